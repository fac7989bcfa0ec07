//! CSV ingestion, preprocessing filters, splits and input standardization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Feature;
use crate::format::fmt17;
use crate::physics::{normalize_angle, EnvironmentRecord};

/// Rows slower than this (knots) are dropped.
pub const MIN_SPEED_KN: f64 = 5.0;
/// Rows with less shaft power than this (kW) are dropped.
pub const MIN_POWER_KW: f64 = 500.0;
/// Nominal sensor cadence; longer intervals are counted as gaps.
pub const NOMINAL_CADENCE_MINUTES: i64 = 15;

/// Canonical CSV header, in file order.
pub const COLUMNS: [&str; 16] = [
    "timestamp",
    "speed_through_water_kn",
    "draught_m",
    "sea_depth_m",
    "sea_temp_c",
    "air_temp_c",
    "wave_height_m",
    "swell_height_m",
    "wave_dir_rel",
    "swell_dir_rel",
    "wind_dir_rel",
    "wind_speed_mps",
    "days_since_propeller_polish",
    "days_since_dry_dock",
    "shaft_rpm",
    "shaft_power_kw",
];

const OPTIONAL_COLUMNS: [&str; 3] = ["air_temp_c", "shaft_rpm", "shaft_power_kw"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Degrees,
    #[default]
    Radians,
}

impl std::str::FromStr for AngleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degrees" => Ok(AngleUnit::Degrees),
            "radians" => Ok(AngleUnit::Radians),
            other => Err(Error::Usage(format!(
                "angle unit must be `degrees` or `radians`, got `{other}`"
            ))),
        }
    }
}

/// Where air temperature comes from when the file has no `air_temp_c` column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AirTempFallback {
    Constant(f64),
    SeaTemp,
}

impl Default for AirTempFallback {
    fn default() -> Self {
        AirTempFallback::Constant(15.0)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvOptions {
    pub angles: AngleUnit,
    /// Canonical column name -> header used in the file.
    #[serde(default)]
    pub column_map: HashMap<String, String>,
    #[serde(default)]
    pub air_temp_fallback: AirTempFallback,
}

/// A row as read from disk; any cell may be missing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawRecord {
    pub timestamp: Option<DateTime<Utc>>,
    pub speed_through_water: Option<f64>,
    pub draught: Option<f64>,
    pub sea_depth: Option<f64>,
    pub sea_temp: Option<f64>,
    pub air_temp: Option<f64>,
    pub wave_height: Option<f64>,
    pub swell_height: Option<f64>,
    pub wave_dir: Option<f64>,
    pub swell_dir: Option<f64>,
    pub wind_dir: Option<f64>,
    pub wind_speed: Option<f64>,
    pub days_since_polish: Option<f64>,
    pub days_since_drydock: Option<f64>,
    pub shaft_rpm: Option<f64>,
    pub shaft_power: Option<f64>,
}

impl RawRecord {
    /// Converts when every feature is present; targets stay optional.
    pub fn to_record(&self) -> Option<EnvironmentRecord> {
        Some(EnvironmentRecord {
            timestamp: self.timestamp?,
            speed_through_water: self.speed_through_water?,
            draught: self.draught?,
            sea_depth: self.sea_depth?,
            sea_temp: self.sea_temp?,
            air_temp: self.air_temp?,
            wave_height: self.wave_height?,
            swell_height: self.swell_height?,
            wave_dir: self.wave_dir?,
            swell_dir: self.swell_dir?,
            wind_dir: self.wind_dir?,
            wind_speed: self.wind_speed?,
            days_since_polish: self.days_since_polish?,
            days_since_drydock: self.days_since_drydock?,
            shaft_rpm: self.shaft_rpm,
            shaft_power: self.shaft_power,
        })
    }
}

impl From<&EnvironmentRecord> for RawRecord {
    fn from(r: &EnvironmentRecord) -> Self {
        RawRecord {
            timestamp: Some(r.timestamp),
            speed_through_water: Some(r.speed_through_water),
            draught: Some(r.draught),
            sea_depth: Some(r.sea_depth),
            sea_temp: Some(r.sea_temp),
            air_temp: Some(r.air_temp),
            wave_height: Some(r.wave_height),
            swell_height: Some(r.swell_height),
            wave_dir: Some(r.wave_dir),
            swell_dir: Some(r.swell_dir),
            wind_dir: Some(r.wind_dir),
            wind_speed: Some(r.wind_speed),
            days_since_polish: Some(r.days_since_polish),
            days_since_drydock: Some(r.days_since_drydock),
            shaft_rpm: r.shaft_rpm,
            shaft_power: r.shaft_power,
        }
    }
}

/// Rows dropped per rule. A row is charged to the first rule it fails, in the
/// order missing, invalid, speed, power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterLog {
    pub input: usize,
    pub missing: usize,
    pub invalid: usize,
    pub speed: usize,
    pub power: usize,
    pub kept: usize,
}

impl FilterLog {
    pub fn dropped(&self) -> usize {
        self.missing + self.invalid + self.speed + self.power
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub filter_log: Option<FilterLog>,
    /// Consecutive-row intervals longer than the nominal cadence.
    pub cadence_gaps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawDataset {
    pub rows: Vec<RawRecord>,
    pub provenance: Provenance,
}

/// Complete, time-ordered records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<EnvironmentRecord>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(rows: Vec<EnvironmentRecord>) -> Self {
        let mut ds = Dataset {
            rows,
            provenance: Provenance::default(),
        };
        ds.rows.sort_by_key(|r| r.timestamp);
        ds.provenance.cadence_gaps = count_gaps(&ds.rows);
        ds
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            rows: self.rows.iter().map(RawRecord::from).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Measured shaft power per row.
    pub fn shaft_power(&self) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.shaft_power
                    .ok_or_else(|| Error::Schema("shaft_power missing".into()).at_row(i))
            })
            .collect()
    }
}

fn count_gaps(rows: &[EnvironmentRecord]) -> usize {
    rows.windows(2)
        .filter(|w| (w[1].timestamp - w[0].timestamp).num_minutes() > NOMINAL_CADENCE_MINUTES)
        .count()
}

fn parse_timestamp(cell: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(cell) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(cell, f).ok())
        .map(|t| t.and_utc())
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a CSV file in the documented schema.
///
/// Unparseable cells become missing values. Directions are converted to radians
/// and normalized to `(-pi, pi]`.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ds = read_csv(file, options)?;
    ds.provenance.source = Some(path.display().to_string());
    Ok(ds)
}

/// Same as [`load_csv`] but from any reader.
pub fn read_csv<R: std::io::Read>(reader: R, options: &CsvOptions) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Usage("empty CSV file (no header row)".into()));
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for &col in &COLUMNS {
        let name = options
            .column_map
            .get(col)
            .map(String::as_str)
            .unwrap_or(col);
        match headers.iter().position(|h| h == name) {
            Some(i) => {
                index.insert(col, i);
            }
            None if OPTIONAL_COLUMNS.contains(&col) => {}
            None => {
                return Err(Error::Schema(format!("missing mandatory column `{name}`")));
            }
        }
    }

    let to_radians = |v: f64| match options.angles {
        AngleUnit::Degrees => v.to_radians(),
        AngleUnit::Radians => v,
    };

    let mut rows = Vec::new();
    for result in rdr.records() {
        let rec = result?;
        let cell = |col: &str| {
            index
                .get(col)
                .and_then(|&i| rec.get(i))
                .filter(|c| !c.is_empty())
        };
        let num = |col: &str| cell(col).and_then(parse_number);
        let angle = |col: &str| num(col).map(|v| normalize_angle(to_radians(v)));

        let sea_temp = num("sea_temp_c");
        let air_temp = if index.contains_key("air_temp_c") {
            num("air_temp_c")
        } else {
            match options.air_temp_fallback {
                AirTempFallback::Constant(t) => Some(t),
                AirTempFallback::SeaTemp => sea_temp,
            }
        };
        rows.push(RawRecord {
            timestamp: cell("timestamp").and_then(parse_timestamp),
            speed_through_water: num("speed_through_water_kn"),
            draught: num("draught_m"),
            sea_depth: num("sea_depth_m"),
            sea_temp,
            air_temp,
            wave_height: num("wave_height_m"),
            swell_height: num("swell_height_m"),
            wave_dir: angle("wave_dir_rel"),
            swell_dir: angle("swell_dir_rel"),
            wind_dir: angle("wind_dir_rel"),
            wind_speed: num("wind_speed_mps"),
            days_since_polish: num("days_since_propeller_polish"),
            days_since_drydock: num("days_since_dry_dock"),
            shaft_rpm: num("shaft_rpm"),
            shaft_power: num("shaft_power_kw"),
        });
    }
    Ok(RawDataset {
        rows,
        provenance: Provenance::default(),
    })
}

/// Writes records in the canonical schema with 17 significant digits.
pub fn write_csv<W: Write>(writer: W, rows: &[EnvironmentRecord], angles: AngleUnit) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    let angle = |v: f64| match angles {
        AngleUnit::Degrees => fmt17(v.to_degrees()),
        AngleUnit::Radians => fmt17(v),
    };
    let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.timestamp
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            fmt17(r.speed_through_water),
            fmt17(r.draught),
            fmt17(r.sea_depth),
            fmt17(r.sea_temp),
            fmt17(r.air_temp),
            fmt17(r.wave_height),
            fmt17(r.swell_height),
            angle(r.wave_dir),
            angle(r.swell_dir),
            angle(r.wind_dir),
            fmt17(r.wind_speed),
            fmt17(r.days_since_polish),
            fmt17(r.days_since_drydock),
            opt(r.shaft_rpm),
            opt(r.shaft_power),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Writes a dataset to `path` in radians.
pub fn export_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufWriter::new(file);
    write_csv(&mut buf, &dataset.rows, AngleUnit::Radians)?;
    buf.flush().map_err(|e| Error::io(path, e))
}

fn filter(raw: &RawDataset, require_targets: bool) -> Result<Dataset> {
    let mut log = FilterLog {
        input: raw.rows.len(),
        ..FilterLog::default()
    };
    let mut rows = Vec::with_capacity(raw.rows.len());
    for r in &raw.rows {
        let rec = match r.to_record() {
            Some(rec) if !require_targets || rec.shaft_power.is_some() => rec,
            _ => {
                log.missing += 1;
                continue;
            }
        };
        if rec.validate().is_err() {
            log.invalid += 1;
            continue;
        }
        if require_targets {
            if rec.speed_through_water < MIN_SPEED_KN {
                log.speed += 1;
                continue;
            }
            if rec.shaft_power.is_some_and(|p| p < MIN_POWER_KW) {
                log.power += 1;
                continue;
            }
        }
        rows.push(rec);
    }
    log.kept = rows.len();
    if rows.is_empty() {
        return Err(Error::Usage("dataset is empty after preprocessing".into()));
    }
    let mut ds = Dataset::new(rows);
    ds.provenance.source = raw.provenance.source.clone();
    ds.provenance.filter_log = Some(log);
    Ok(ds)
}

/// Applies the training filters: drops rows with missing values (shaft power
/// included), rows slower than 5 kn and rows below 500 kW. Thresholds are
/// inclusive: exactly 5 kn or 500 kW is kept.
pub fn preprocess(raw: &RawDataset) -> Result<Dataset> {
    filter(raw, true)
}

/// Drops rows with missing or invalid features only. For inference inputs that
/// may lack measured targets.
pub fn complete_rows(raw: &RawDataset) -> Result<Dataset> {
    filter(raw, false)
}

/// Splits at `boundary`: rows strictly before it form one side, the rest the
/// other. With `reversed`, the later rows are used for training (the test
/// period precedes the training period).
pub fn chronological_split(
    dataset: &Dataset,
    boundary: DateTime<Utc>,
    reversed: bool,
) -> Result<(Dataset, Dataset)> {
    let (before, after): (Vec<_>, Vec<_>) = dataset
        .rows
        .iter()
        .cloned()
        .partition(|r| r.timestamp < boundary);
    if before.is_empty() || after.is_empty() {
        return Err(Error::Usage(format!(
            "split at {boundary} leaves an empty side ({} before, {} after)",
            before.len(),
            after.len()
        )));
    }
    let wrap = |rows: Vec<EnvironmentRecord>| Dataset {
        provenance: Provenance {
            source: dataset.provenance.source.clone(),
            filter_log: None,
            cadence_gaps: count_gaps(&rows),
        },
        rows,
    };
    let (before, after) = (wrap(before), wrap(after));
    Ok(if reversed {
        (after, before)
    } else {
        (before, after)
    })
}

/// Per-feature standardization plus min-max normalization of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub features: Vec<Feature>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

impl Standardizer {
    /// Fits from a row-major matrix with `features.len()` columns.
    pub fn fit(features: &[Feature], matrix: &[f64], targets: &[f64]) -> Result<Self> {
        let width = features.len();
        if width == 0 || matrix.is_empty() || !matrix.len().is_multiple_of(width) {
            return Err(Error::Usage(
                "standardizer needs a non-empty feature matrix".into(),
            ));
        }
        let n = matrix.len() / width;
        if targets.len() != n {
            return Err(Error::Usage(format!(
                "{n} feature rows but {} targets",
                targets.len()
            )));
        }
        let mut means = vec![0.0; width];
        let mut stds = vec![0.0; width];
        for (j, feature) in features.iter().enumerate() {
            let column = || matrix.iter().skip(j).step_by(width);
            let mean = column().sum::<f64>() / n as f64;
            let var = column().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            if !(std > 0.0) || !std.is_finite() {
                return Err(Error::Schema(format!(
                    "feature `{feature}` has zero variance in the training data"
                )));
            }
            means[j] = mean;
            stds[j] = std;
        }
        let target_min = targets.iter().copied().fold(f64::INFINITY, f64::min);
        let target_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(target_max > target_min) || !target_max.is_finite() || !target_min.is_finite() {
            return Err(Error::Schema(
                "target has no spread in the training data".into(),
            ));
        }
        Ok(Self {
            features: features.to_vec(),
            means,
            stds,
            target_min,
            target_max,
        })
    }

    pub fn transform_in_place(&self, matrix: &mut [f64]) {
        let width = self.means.len();
        for row in matrix.chunks_exact_mut(width) {
            for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn normalize_target(&self, p: f64) -> f64 {
        (p - self.target_min) / (self.target_max - self.target_min)
    }

    pub fn denormalize_target(&self, y: f64) -> f64 {
        y * (self.target_max - self.target_min) + self.target_min
    }
}

/// Row-major matrix of `features` for `rows`; `predicted_rpm` supplies the
/// [`Feature::PredictedRpm`] column when present.
pub fn feature_matrix(
    rows: &[EnvironmentRecord],
    features: &[Feature],
    predicted_rpm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len() * features.len());
    for (i, r) in rows.iter().enumerate() {
        let rpm = predicted_rpm.map(|p| p[i]);
        for f in features {
            let v = f.extract(r, rpm).map_err(|e| e.at_row(i))?;
            if !v.is_finite() {
                return Err(Error::Schema(format!("{f} is not finite")).at_row(i));
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Fits a [`Standardizer`] on training rows only.
pub fn fit_standardizer(
    train: &Dataset,
    features: &[Feature],
    predicted_rpm: Option<&[f64]>,
) -> Result<Standardizer> {
    if train.is_empty() {
        return Err(Error::Usage("cannot fit a standardizer on no rows".into()));
    }
    let matrix = feature_matrix(&train.rows, features, predicted_rpm)?;
    Standardizer::fit(features, &matrix, &train.shaft_power()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const HEADER: &str = "timestamp,speed_through_water_kn,draught_m,sea_depth_m,sea_temp_c,air_temp_c,wave_height_m,swell_height_m,wave_dir_rel,swell_dir_rel,wind_dir_rel,wind_speed_mps,days_since_propeller_polish,days_since_dry_dock,shaft_rpm,shaft_power_kw";

    fn line(ts: &str, speed: &str, power: &str) -> String {
        format!("{ts},{speed},9.5,120,14,16,1.2,0.8,0.5,-1.0,2.0,6.5,30,400,75,{power}")
    }

    fn parse(text: &str, options: &CsvOptions) -> Result<RawDataset> {
        read_csv(text.as_bytes(), options)
    }

    #[test]
    fn well_formed_file() {
        let text = format!(
            "{HEADER}\n{}\n{}\n{}\n",
            line("2023-01-01T00:00:00Z", "12", "6000"),
            line("2023-01-01T00:15:00Z", "12.5", "6200"),
            line("2023-01-01T00:30:00Z", "13", "6400"),
        );
        let raw = parse(&text, &CsvOptions::default()).unwrap();
        assert_eq!(raw.rows.len(), 3);
        let ds = preprocess(&raw).unwrap();
        assert_eq!(ds.len(), 3);
        let log = ds.provenance.filter_log.unwrap();
        assert_eq!(log.dropped(), 0);
        assert_eq!(ds.provenance.cadence_gaps, 0);
    }

    #[test]
    fn blank_power_is_missing_then_dropped() {
        let text = format!(
            "{HEADER}\n{}\n{}\n",
            line("2023-01-01T00:00:00Z", "12", ""),
            line("2023-01-01T00:15:00Z", "12", "6000"),
        );
        let raw = parse(&text, &CsvOptions::default()).unwrap();
        assert_eq!(raw.rows[0].shaft_power, None);
        let ds = preprocess(&raw).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.provenance.filter_log.unwrap().missing, 1);
    }

    #[test]
    fn degrees_are_converted() {
        let text = format!("{HEADER}\n2023-01-01T00:00:00Z,12,9.5,120,14,16,1.2,0.8,90,-90,180,6.5,30,400,75,6000\n");
        let opts = CsvOptions {
            angles: AngleUnit::Degrees,
            ..CsvOptions::default()
        };
        let raw = parse(&text, &opts).unwrap();
        assert!((raw.rows[0].wind_dir.unwrap() - PI).abs() < 1e-15);
        assert!((raw.rows[0].wave_dir.unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((raw.rows[0].swell_dir.unwrap() + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn missing_mandatory_column_is_named() {
        let header = HEADER.replace("draught_m,", "");
        let err = parse(&format!("{header}\n"), &CsvOptions::default()).unwrap_err();
        assert!(
            matches!(&err, Error::Schema(m) if m.contains("draught_m")),
            "{err}"
        );
    }

    #[test]
    fn empty_file_is_usage_error() {
        assert!(matches!(
            parse("", &CsvOptions::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn column_map_and_air_temp_fallback() {
        let header = HEADER
            .replace("speed_through_water_kn", "STW")
            .replace("air_temp_c,", "");
        let text = format!("{header}\n2023-01-01T00:00:00Z,12,9.5,120,14,1.2,0.8,0.5,-1.0,2.0,6.5,30,400,75,6000\n");
        let mut opts = CsvOptions::default();
        opts.column_map
            .insert("speed_through_water_kn".into(), "STW".into());
        let raw = parse(&text, &opts).unwrap();
        assert_eq!(raw.rows[0].speed_through_water, Some(12.0));
        assert_eq!(raw.rows[0].air_temp, Some(15.0));
        opts.air_temp_fallback = AirTempFallback::SeaTemp;
        let raw = parse(&text, &opts).unwrap();
        assert_eq!(raw.rows[0].air_temp, Some(14.0));
    }

    #[test]
    fn filters_and_boundaries() {
        let rows = [
            line("2023-01-01T00:00:00Z", "4.9", "6000"), // speed
            line("2023-01-01T00:15:00Z", "10", "500.0"), // kept: boundary
            line("2023-01-01T00:30:00Z", "5", "499.99"), // power
            line("2023-01-01T00:45:00Z", "5.0", "800"),  // kept: boundary
            line("2023-01-01T01:00:00Z", "", "800"),     // missing
            line("2023-01-01T01:15:00Z", "12", "7000"),
            line("2023-01-01T01:30:00Z", "13", "7100"),
            line("2023-01-01T01:45:00Z", "14", "7200"),
            line("not-a-time", "14", "7200"), // missing
            line("2023-01-01T02:15:00Z", "15", "7300"),
        ];
        let text = format!("{HEADER}\n{}\n", rows.join("\n"));
        let ds = preprocess(&parse(&text, &CsvOptions::default()).unwrap()).unwrap();
        let log = ds.provenance.filter_log.unwrap();
        assert_eq!(
            log,
            FilterLog {
                input: 10,
                missing: 2,
                invalid: 0,
                speed: 1,
                power: 1,
                kept: 6
            }
        );
        assert_eq!(log.dropped() + log.kept, log.input);
        assert!(ds.rows.iter().any(|r| r.shaft_power == Some(500.0)));
        assert!(ds.rows.iter().any(|r| r.speed_through_water == 5.0));
        // Kept rows: 00:15, 00:45, 01:15, 01:30, 01:45, 02:15.
        assert_eq!(ds.provenance.cadence_gaps, 3);
    }

    #[test]
    fn preprocess_empty_result_is_error() {
        let text = format!("{HEADER}\n{}\n", line("2023-01-01T00:00:00Z", "3", "6000"));
        assert!(matches!(
            preprocess(&parse(&text, &CsvOptions::default()).unwrap()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn invalid_values_are_dropped() {
        let text = format!("{HEADER}\n2023-01-01T00:00:00Z,12,9.5,120,14,16,-1.2,0.8,0.5,-1.0,2.0,6.5,30,400,75,6000\n{}\n", line("2023-01-01T00:15:00Z", "12", "6000"));
        let ds = preprocess(&parse(&text, &CsvOptions::default()).unwrap()).unwrap();
        assert_eq!(ds.provenance.filter_log.unwrap().invalid, 1);
    }

    #[test]
    fn complete_rows_keeps_unlabelled() {
        let text = format!(
            "{HEADER}\n{}\n{}\n",
            line("2023-01-01T00:00:00Z", "3", ""),
            line("2023-01-01T00:15:00Z", "", ""),
        );
        let ds = complete_rows(&parse(&text, &CsvOptions::default()).unwrap()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.rows[0].shaft_power, None);
    }

    fn dataset(n: usize) -> Dataset {
        let t0 = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let rows = (0..n)
            .map(|i| {
                let mut r = crate::physics::test_support::record(8.0 + i as f64 * 0.1, 9.0);
                r.timestamp = t0 + Duration::minutes(15 * i as i64);
                r.draught = 8.0 + (i % 7) as f64 * 0.3;
                r.wind_speed = (i % 5) as f64;
                r.shaft_power = Some(1000.0 + 10.0 * i as f64);
                r
            })
            .collect();
        Dataset::new(rows)
    }

    #[test]
    fn split_semantics() {
        let ds = dataset(20);
        let t0 = ds.rows[0].timestamp;
        assert!(chronological_split(&ds, t0, false).is_err());
        assert!(chronological_split(&ds, t0 - Duration::days(1), false).is_err());
        let boundary = ds.rows[12].timestamp;
        let (train, test) = chronological_split(&ds, boundary, false).unwrap();
        assert_eq!(train.len() + test.len(), 20);
        assert_eq!(train.len(), 12);
        assert!(train.rows.iter().all(|r| r.timestamp < boundary));
        assert!(test.rows.iter().all(|r| r.timestamp >= boundary));
        let (train_r, test_r) = chronological_split(&ds, boundary, true).unwrap();
        assert_eq!(train_r.rows, test.rows);
        assert_eq!(test_r.rows, train.rows);
    }

    #[test]
    fn standardizer_properties() {
        let ds = dataset(30);
        let feats = [
            Feature::SpeedThroughWater,
            Feature::Draught,
            Feature::WindSpeed,
        ];
        let st = fit_standardizer(&ds, &feats, None).unwrap();
        let mut m = feature_matrix(&ds.rows, &feats, None).unwrap();
        st.transform_in_place(&mut m);
        for j in 0..3 {
            let col: Vec<f64> = m.iter().skip(j).step_by(3).copied().collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        let p = 1234.5;
        assert!((st.denormalize_target(st.normalize_target(p)) - p).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_is_rejected_by_name() {
        let ds = dataset(10);
        let err = fit_standardizer(&ds, &[Feature::SeaDepth], None).unwrap_err();
        assert!(err.to_string().contains("sea_depth"), "{err}");
    }

    #[test]
    fn test_rows_use_train_statistics() {
        let ds = dataset(30);
        let feats = [Feature::SpeedThroughWater, Feature::Draught];
        let st = fit_standardizer(&ds, &feats, None).unwrap();
        // A "test" set made of copies of training rows transforms identically.
        let test_rows: Vec<_> = ds.rows[5..9].to_vec();
        let mut from_test = feature_matrix(&test_rows, &feats, None).unwrap();
        st.transform_in_place(&mut from_test);
        let mut from_train = feature_matrix(&ds.rows, &feats, None).unwrap();
        st.transform_in_place(&mut from_train);
        assert_eq!(from_test, from_train[5 * 2..9 * 2].to_vec());
    }

    #[test]
    fn export_round_trip_and_empty() {
        let ds = dataset(25);
        let mut buf = Vec::new();
        write_csv(&mut buf, &ds.rows, AngleUnit::Radians).unwrap();
        let back = preprocess(&read_csv(buf.as_slice(), &CsvOptions::default()).unwrap()).unwrap();
        assert_eq!(back.rows, ds.rows);

        let mut buf = Vec::new();
        write_csv(&mut buf, &[], AngleUnit::Radians).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), HEADER);
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(
            cells in prop::collection::vec((3.0f64..20.0, 300.0f64..9000.0, any::<bool>()), 1..40)
        ) {
            let t0 = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
            let rows: Vec<RawRecord> = cells
                .iter()
                .enumerate()
                .map(|(i, &(v, p, has_power))| {
                    let mut r = crate::physics::test_support::record(v, 9.0);
                    r.timestamp = t0 + Duration::minutes(15 * i as i64);
                    r.shaft_power = has_power.then_some(p);
                    RawRecord::from(&r)
                })
                .collect();
            let raw = RawDataset { rows, provenance: Provenance::default() };
            match preprocess(&raw) {
                Ok(once) => {
                    let log = once.provenance.filter_log.unwrap();
                    prop_assert_eq!(log.dropped() + log.kept, log.input);
                    let twice = preprocess(&once.to_raw()).unwrap();
                    prop_assert_eq!(&twice.rows, &once.rows);
                    prop_assert_eq!(twice.provenance.filter_log.unwrap().dropped(), 0);
                }
                Err(e) => prop_assert!(matches!(e, Error::Usage(_))),
            }
        }

        #[test]
        fn standardizer_ignores_test_rows(shift in -50.0f64..50.0, k in 0usize..10) {
            let ds = dataset(40);
            let (train, mut test) = chronological_split(&ds, ds.rows[30].timestamp, false).unwrap();
            let feats = [Feature::SpeedThroughWater, Feature::Draught, Feature::WindSpeed];
            let before = fit_standardizer(&train, &feats, None).unwrap();
            test.rows[k].speed_through_water += shift;
            test.rows[k].shaft_power = Some(1e6);
            let after = fit_standardizer(&train, &feats, None).unwrap();
            prop_assert_eq!(before, after);
        }
    }
}
