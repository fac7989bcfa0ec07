//! Synthetic voyages generated from known coefficients.
//!
//! Power follows the resistance formulas for the configured ground-truth
//! coefficients, scaled by a fouling drift and multiplicative noise:
//!
//! ```text
//! power = P_phys * (1 + drift) * (1 + eps)
//! drift = k_d * (1 - exp(-days_since_drydock / tau_d)) + k_p * days_since_polish / 365
//! eps   ~ Normal(0, noise_rel_std)
//! ```
//!
//! RPM is the ground-truth multiplicative polynomial model with its own
//! multiplicative noise. Every row draws from its own generator stream, so a
//! dataset is a pure function of its config.

use std::f64::consts::PI;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MIN_POWER_KW, MIN_SPEED_KN};
use crate::error::{Error, Result};
use crate::features::Feature;
use crate::physics::{physical_power, EnvironmentRecord, ResistanceCoefficients};
use crate::rpm_poly::{AffineScale, MultiplicativePolyModel, PolyFactor};

/// Rejected draws per row before the configuration is declared infeasible.
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoulingConfig {
    /// Asymptotic relative power increase from hull fouling since dry dock.
    pub drydock_gain: f64,
    pub drydock_timescale_days: f64,
    /// Relative power increase per 365 days since the last propeller polish.
    pub polish_gain: f64,
}

impl Default for FoulingConfig {
    fn default() -> Self {
        Self {
            drydock_gain: 0.0,
            drydock_timescale_days: 365.0,
            polish_gain: 0.0,
        }
    }
}

impl FoulingConfig {
    pub fn drift(&self, days_since_polish: f64, days_since_drydock: f64) -> f64 {
        self.drydock_gain * (1.0 - (-days_since_drydock / self.drydock_timescale_days).exp())
            + self.polish_gain * days_since_polish / 365.0
    }
}

/// Maintenance calendar. A dry dock also counts as a propeller polish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventSchedule {
    pub drydock_dates: Vec<DateTime<Utc>>,
    pub polish_period_days: f64,
    /// Age of the previous dry dock at the first row.
    pub initial_days_since_drydock: f64,
    /// Age of the previous polish at the first row.
    pub initial_days_since_polish: f64,
}

impl Default for EventSchedule {
    fn default() -> Self {
        Self {
            drydock_dates: Vec::new(),
            polish_period_days: 182.0,
            initial_days_since_drydock: 400.0,
            initial_days_since_polish: 60.0,
        }
    }
}

impl EventSchedule {
    /// `(days_since_polish, days_since_drydock)` at time `t` for a voyage starting at `start`.
    pub fn ages(&self, start: DateTime<Utc>, t: DateTime<Utc>) -> (f64, f64) {
        let days = |d: Duration| d.num_seconds() as f64 / 86_400.0;
        let elapsed = days(t - start);
        let drydock = self
            .drydock_dates
            .iter()
            .filter(|d| **d <= t)
            .max()
            .map(|d| days(t - *d))
            .unwrap_or(self.initial_days_since_drydock + elapsed);
        let polish = (self.initial_days_since_polish + elapsed).rem_euclid(self.polish_period_days);
        (polish.min(drydock), drydock)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureRanges {
    pub speed_kn: (f64, f64),
    pub draught_m: (f64, f64),
    /// Log-uniform bounds.
    pub sea_depth_m: (f64, f64),
    pub sea_temp_mean_c: f64,
    pub sea_temp_std_c: f64,
    /// Air temperature is sea temperature plus normal noise with this std.
    pub air_sea_temp_std_c: f64,
    pub wave_weibull_shape: f64,
    pub wave_weibull_scale: f64,
    /// Added to every wave height draw.
    pub wave_height_shift_m: f64,
    pub swell_weibull_shape: f64,
    pub swell_weibull_scale: f64,
    /// Rayleigh scale of the wind speed.
    pub wind_rayleigh_sigma: f64,
}

impl Default for FeatureRanges {
    fn default() -> Self {
        Self {
            speed_kn: (8.0, 18.0),
            draught_m: (7.0, 13.0),
            sea_depth_m: (30.0, 5000.0),
            sea_temp_mean_c: 15.0,
            sea_temp_std_c: 5.0,
            air_sea_temp_std_c: 3.0,
            wave_weibull_shape: 2.0,
            wave_weibull_scale: 1.5,
            wave_height_shift_m: 0.0,
            swell_weibull_shape: 2.0,
            swell_weibull_scale: 1.2,
            wind_rayleigh_sigma: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub row_count: usize,
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub cadence_minutes: i64,
    pub true_coefficients: ResistanceCoefficients,
    pub true_rpm_model: MultiplicativePolyModel,
    pub noise_rel_std: f64,
    pub rpm_noise_rel_std: f64,
    pub fouling: FoulingConfig,
    pub events: EventSchedule,
    pub ranges: FeatureRanges,
    /// When set, rows `anchor + k` and `anchor - 1 - k` share every random
    /// draw, so they differ only through the maintenance ages.
    pub paired_anchor: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            row_count: 1000,
            seed: 0,
            start: Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap(),
            cadence_minutes: 60,
            true_coefficients: default_coefficients(),
            true_rpm_model: default_rpm_model(),
            noise_rel_std: 0.0,
            rpm_noise_rel_std: 0.0,
            fouling: FoulingConfig::default(),
            events: EventSchedule::default(),
            ranges: FeatureRanges::default(),
            paired_anchor: None,
        }
    }
}

/// Ground-truth coefficients giving roughly 2-20 MW over the default ranges.
pub fn default_coefficients() -> ResistanceCoefficients {
    ResistanceCoefficients::new(1.0, 2.0, 0.2, 0.4, 0.6, 0.8, 10.0).expect("valid defaults")
}

/// Ground-truth RPM model over speed, draught, wind speed and swell height.
pub fn default_rpm_model() -> MultiplicativePolyModel {
    let factor = |feature, center, half_range, coefficients: [f64; 4]| PolyFactor {
        feature,
        scale: AffineScale { center, half_range },
        coefficients: coefficients.to_vec(),
    };
    MultiplicativePolyModel::new(
        3,
        vec![
            factor(
                Feature::SpeedThroughWater,
                13.0,
                5.0,
                [78.0, 30.0, 1.0, 0.3],
            ),
            factor(Feature::Draught, 10.0, 3.0, [1.0, 0.05, 0.01, 0.0]),
            factor(Feature::WindSpeed, 10.0, 10.0, [1.0, 0.02, 0.01, 0.0]),
            factor(Feature::SwellHeight, 3.0, 3.0, [1.0, 0.03, 0.01, 0.005]),
        ],
    )
    .expect("valid defaults")
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.row_count == 0 {
            return bad("row_count must be >= 1");
        }
        if self.cadence_minutes <= 0 {
            return bad("cadence_minutes must be > 0");
        }
        if !(self.noise_rel_std >= 0.0) || !(self.rpm_noise_rel_std >= 0.0) {
            return bad("noise levels must be >= 0");
        }
        let f = &self.fouling;
        if !(f.drydock_gain >= 0.0) || !(f.polish_gain >= 0.0) {
            return bad("fouling gains must be >= 0");
        }
        if !(f.drydock_timescale_days > 0.0) {
            return bad("drydock_timescale_days must be > 0");
        }
        let e = &self.events;
        if !(e.polish_period_days > 0.0) {
            return bad("polish_period_days must be > 0");
        }
        if !(e.initial_days_since_drydock >= 0.0) || !(e.initial_days_since_polish >= 0.0) {
            return bad("initial maintenance ages must be >= 0");
        }
        let r = &self.ranges;
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(r.speed_kn) || !ordered(r.draught_m) || !ordered(r.sea_depth_m) {
            return bad("feature ranges must be finite with lo <= hi");
        }
        if r.speed_kn.1 < MIN_SPEED_KN {
            return bad("speed range lies entirely below the 5 kn filter");
        }
        if r.draught_m.0 <= 0.0 || r.sea_depth_m.0 <= 0.0 {
            return bad("draught and sea depth must be positive");
        }
        let positive = [
            r.wave_weibull_shape,
            r.wave_weibull_scale,
            r.swell_weibull_shape,
            r.swell_weibull_scale,
            r.wind_rayleigh_sigma,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || !(r.wave_height_shift_m >= 0.0) {
            return bad("distribution parameters must be positive");
        }
        if !(r.sea_temp_std_c >= 0.0) || !(r.air_sea_temp_std_c >= 0.0) {
            return bad("temperature spreads must be >= 0");
        }
        if let Some(anchor) = self.paired_anchor {
            if anchor == 0 || anchor >= self.row_count {
                return bad("paired_anchor must lie strictly inside the row range");
            }
        }
        self.true_rpm_model.validate()
    }

    pub fn timestamp(&self, row: usize) -> DateTime<Utc> {
        self.start + Duration::minutes(self.cadence_minutes * row as i64)
    }

    fn stream(&self, row: usize) -> u64 {
        match self.paired_anchor {
            Some(anchor) if row >= anchor => (row - anchor) as u64,
            Some(anchor) => (anchor - 1 - row) as u64,
            None => row as u64,
        }
    }
}

/// Everything drawn at random for one row.
struct Draw {
    speed: f64,
    draught: f64,
    sea_depth: f64,
    sea_temp: f64,
    air_temp: f64,
    wave_height: f64,
    swell_height: f64,
    wave_dir: f64,
    swell_dir: f64,
    wind_dir: f64,
    wind_speed: f64,
    power_noise: f64,
    rpm_noise: f64,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn direction(rng: &mut ChaCha8Rng) -> f64 {
    // (-pi, pi]
    PI - rng.random_range(0.0..2.0 * PI)
}

fn draw(rng: &mut ChaCha8Rng, config: &SynthConfig) -> Draw {
    let r = &config.ranges;
    let normal = |mean: f64, std: f64, rng: &mut ChaCha8Rng| {
        if std > 0.0 {
            Normal::new(mean, std).expect("std > 0").sample(rng)
        } else {
            mean
        }
    };
    let weibull = |scale: f64, shape: f64, rng: &mut ChaCha8Rng| {
        Weibull::new(scale, shape)
            .expect("positive parameters")
            .sample(rng)
    };
    let speed = uniform(rng, r.speed_kn);
    let draught = uniform(rng, r.draught_m);
    let sea_depth = uniform(rng, (r.sea_depth_m.0.ln(), r.sea_depth_m.1.ln())).exp();
    let sea_temp = normal(r.sea_temp_mean_c, r.sea_temp_std_c, rng);
    let air_temp = sea_temp + normal(0.0, r.air_sea_temp_std_c, rng);
    let wave_height =
        weibull(r.wave_weibull_scale, r.wave_weibull_shape, rng) + r.wave_height_shift_m;
    let swell_height = weibull(r.swell_weibull_scale, r.swell_weibull_shape, rng);
    let wave_dir = direction(rng);
    let swell_dir = direction(rng);
    let wind_dir = direction(rng);
    // Rayleigh(sigma) is Weibull(sigma * sqrt 2, 2).
    let wind_speed = weibull(r.wind_rayleigh_sigma * 2f64.sqrt(), 2.0, rng);
    let power_noise = normal(0.0, config.noise_rel_std, rng);
    let rpm_noise = normal(0.0, config.rpm_noise_rel_std, rng);
    Draw {
        speed,
        draught,
        sea_depth,
        sea_temp,
        air_temp,
        wave_height,
        swell_height,
        wave_dir,
        swell_dir,
        wind_dir,
        wind_speed,
        power_noise,
        rpm_noise,
    }
}

fn generate_row(config: &SynthConfig, row: usize) -> Result<EnvironmentRecord> {
    let timestamp = config.timestamp(row);
    let (days_p, days_d) = config.events.ages(config.start, timestamp);
    let drift = config.fouling.drift(days_p, days_d);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream(row));

    for _ in 0..MAX_ATTEMPTS {
        let d = draw(&mut rng, config);
        let mut record = EnvironmentRecord {
            timestamp,
            speed_through_water: d.speed,
            draught: d.draught,
            sea_depth: d.sea_depth,
            sea_temp: d.sea_temp,
            air_temp: d.air_temp,
            wave_height: d.wave_height,
            swell_height: d.swell_height,
            wave_dir: d.wave_dir,
            swell_dir: d.swell_dir,
            wind_dir: d.wind_dir,
            wind_speed: d.wind_speed,
            days_since_polish: days_p,
            days_since_drydock: days_d,
            shaft_rpm: None,
            shaft_power: None,
        };
        if d.speed < MIN_SPEED_KN || d.air_temp <= crate::physics::ABSOLUTE_ZERO_C {
            continue;
        }
        let base =
            physical_power(&config.true_coefficients, &record)?.total_power * (1.0 + d.power_noise);
        // Drift is non-negative, so testing the drift-free power keeps paired
        // rows on the same rejection path.
        if !(base >= MIN_POWER_KW) {
            continue;
        }
        let rpm = config.true_rpm_model.evaluate(&record)? * (1.0 + d.rpm_noise);
        record.shaft_power = Some(base * (1.0 + drift));
        record.shaft_rpm = Some(rpm);
        return Ok(record);
    }
    Err(Error::Config(format!(
        "row {row}: no feasible draw in {MAX_ATTEMPTS} attempts (check speed range and coefficients)"
    )))
}

/// Generates a time-ordered dataset with measured RPM and power on every row.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let rows = (0..config.row_count)
        .map(|i| generate_row(config, i))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(rows);
    ds.provenance.source = Some(format!("synthetic(seed={})", config.seed));
    Ok(ds)
}

/// A train/test pair generated from one ground truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
}

/// Config for the default drift benchmark: 14 000 hourly rows starting
/// 2022-01-01 at 10-16 kn with 3% power noise, 2% RPM noise and fouling drift.
/// A dry dock on 2022-12-21 falls 62 days before the end of the first 10 000
/// (training) rows, so most of the training period is heavily fouled while
/// the test period is clean.
pub fn drift_benchmark_config(seed: u64) -> SynthConfig {
    SynthConfig {
        row_count: 14_000,
        seed,
        noise_rel_std: 0.03,
        rpm_noise_rel_std: 0.02,
        fouling: FoulingConfig {
            drydock_gain: 0.15,
            drydock_timescale_days: 365.0,
            polish_gain: 0.05,
        },
        events: EventSchedule {
            drydock_dates: vec![Utc.with_ymd_and_hms(2022, 12, 21, 4, 0, 0).unwrap()],
            polish_period_days: 182.0,
            initial_days_since_drydock: 600.0,
            initial_days_since_polish: 60.0,
        },
        ranges: FeatureRanges {
            speed_kn: (10.0, 16.0),
            ..FeatureRanges::default()
        },
        ..SynthConfig::default()
    }
}

/// The default drift benchmark split into 10 000 training and 4 000 test rows.
pub fn drift_benchmark(seed: u64) -> Result<Scenario> {
    let config = drift_benchmark_config(seed);
    let all = generate(&config)?;
    let boundary = config.timestamp(10_000);
    let (train, test) = crate::data::chronological_split(&all, boundary, false)?;
    Ok(Scenario {
        name: "synthetic-drift".into(),
        train,
        test,
    })
}

/// Drift-free scenario whose test period sees heavier seas: the test wave
/// heights are shifted up by one meter and drawn with a wider spread, so they
/// exceed the training range. `train_rows` hourly rows are followed by
/// `test_rows` rows.
pub fn wave_shift_scenario(seed: u64, train_rows: usize, test_rows: usize) -> Result<Scenario> {
    let base = SynthConfig {
        seed,
        noise_rel_std: 0.03,
        rpm_noise_rel_std: 0.02,
        ..SynthConfig::default()
    };
    let train = generate(&SynthConfig {
        row_count: train_rows,
        ..base.clone()
    })?;
    let test_config = SynthConfig {
        row_count: test_rows,
        seed: seed ^ 0x5eed_7e57,
        start: base.timestamp(train_rows),
        events: EventSchedule {
            initial_days_since_drydock: base.events.initial_days_since_drydock
                + (train_rows as f64) * base.cadence_minutes as f64 / 1440.0,
            initial_days_since_polish: base.events.initial_days_since_polish
                + (train_rows as f64) * base.cadence_minutes as f64 / 1440.0,
            ..base.events.clone()
        },
        ranges: FeatureRanges {
            wave_weibull_scale: 2.0,
            wave_height_shift_m: 1.0,
            ..base.ranges.clone()
        },
        ..base
    };
    let test = generate(&test_config)?;
    Ok(Scenario {
        name: "synthetic-waves".into(),
        train,
        test,
    })
}
