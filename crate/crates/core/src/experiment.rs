//! Method comparison: the EF formula fit, the plain network (NN) and the
//! physics-guided network (PGNN) on one train/test split.
//!
//! EF is fitted once. NN and PGNN are trained for `repeats` seeds
//! (`base_seed + i`); the two networks of a repeat share the seed, so they
//! differ only in the loss.

use std::io::Write;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ef_fit::{fit_ef, predict_ef, EfFitConfig, EfFitResult};
use crate::error::{Error, Result};
use crate::features::Feature;
use crate::format::fmt17;
use crate::metrics::{aggregate, render_table, EvalReport, Method, MetricSet};
use crate::nn::{self, FeatureGroups, Pipeline, TrainConfig};
use crate::rpm_poly::{
    fit_rpm_als, greedy_feature_selection, MultiplicativePolyModel, RpmFitConfig, DEFAULT_ORDER,
    DEFAULT_RPM_FEATURES,
};

/// Physics weight used when none is given.
pub const DEFAULT_LAMBDA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpmSetup {
    pub features: Vec<Feature>,
    pub order: usize,
    /// Choose the factors greedily from `features` instead of using all.
    pub select_features: bool,
    pub fit: RpmFitConfig,
}

impl Default for RpmSetup {
    fn default() -> Self {
        Self {
            features: DEFAULT_RPM_FEATURES.to_vec(),
            order: DEFAULT_ORDER,
            select_features: false,
            fit: RpmFitConfig::default(),
        }
    }
}

impl RpmSetup {
    pub fn fit(&self, train: &Dataset) -> Result<MultiplicativePolyModel> {
        let features = if self.select_features {
            greedy_feature_selection(&train.rows, &self.features, self.order, &self.fit)?
        } else {
            self.features.clone()
        };
        fit_rpm_als(&train.rows, &features, self.order, &self.fit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    /// Dataset tag shown in reports.
    pub dataset: String,
    pub repeats: usize,
    pub base_seed: u64,
    pub lambda: f64,
    pub ef: EfFitConfig,
    pub rpm: RpmSetup,
    /// Network settings; `seed` and `lambda` are overridden per run.
    pub train: TrainConfig,
    pub groups: FeatureGroups,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            repeats: 10,
            base_seed: 0,
            lambda: DEFAULT_LAMBDA,
            ef: EfFitConfig::default(),
            rpm: RpmSetup::default(),
            train: TrainConfig::default(),
            groups: FeatureGroups::default(),
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        self.train.validate()?;
        self.groups.validate()?;
        self.ef.validate()
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.repeats as u64).map(|i| self.base_seed.wrapping_add(i))
    }
}

/// Metrics of one fitted model on the test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub method: Method,
    pub seed: u64,
    pub metrics: MetricSet,
}

/// Actual and predicted power of one test row, from the first repeat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub timestamp: DateTime<Utc>,
    pub actual: f64,
    pub ef: f64,
    pub nn: f64,
    pub pgnn: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// EF, NN and PGNN, in that order.
    pub reports: Vec<EvalReport>,
    pub per_seed: Vec<SeedResult>,
    pub series: Vec<SeriesRow>,
    pub ef: EfFitResult,
    pub rpm_model: MultiplicativePolyModel,
}

/// Fits the frozen physics inputs of the networks on the training split.
pub fn fit_physics(
    train: &Dataset,
    config: &CompareConfig,
) -> Result<(EfFitResult, MultiplicativePolyModel)> {
    let ef = fit_ef(&train.rows, &config.ef)?;
    let rpm = config.rpm.fit(train)?;
    Ok((ef, rpm))
}

pub fn compare(train: &Dataset, test: &Dataset, config: &CompareConfig) -> Result<Comparison> {
    config.validate()?;
    if test.is_empty() {
        return Err(Error::Usage("test set is empty".into()));
    }
    let (ef, rpm_model) = fit_physics(train, config)?;
    compare_with(train, test, config, ef, rpm_model)
}

/// Like [`compare`], with EF coefficients and RPM model already fitted.
pub fn compare_with(
    train: &Dataset,
    test: &Dataset,
    config: &CompareConfig,
    ef: EfFitResult,
    rpm_model: MultiplicativePolyModel,
) -> Result<Comparison> {
    config.validate()?;
    let y = test.shaft_power()?;
    let ef_pred = predict_ef(&ef.coefficients, &test.rows)?;
    let mut per_seed = vec![SeedResult {
        method: Method::Ef,
        seed: config.ef.seed,
        metrics: MetricSet::evaluate(&y, &ef_pred)?,
    }];
    let pipeline = Pipeline {
        rpm_model: rpm_model.clone(),
        ef: Some(ef.coefficients),
        groups: config.groups.clone(),
    };
    let mut nn_runs = Vec::new();
    let mut pgnn_runs = Vec::new();
    let mut series = Vec::new();
    for seed in config.seeds() {
        let run = |lambda: f64| -> Result<Vec<f64>> {
            let cfg = TrainConfig {
                seed,
                lambda,
                ..config.train.clone()
            };
            nn::train(train, &pipeline, &cfg)?.predict(&test.rows)
        };
        let nn_pred = run(0.0)?;
        let pgnn_pred = run(config.lambda)?;
        let nn_m = MetricSet::evaluate(&y, &nn_pred)?;
        let pgnn_m = MetricSet::evaluate(&y, &pgnn_pred)?;
        per_seed.push(SeedResult {
            method: Method::Nn,
            seed,
            metrics: nn_m,
        });
        per_seed.push(SeedResult {
            method: Method::Pgnn,
            seed,
            metrics: pgnn_m,
        });
        nn_runs.push(nn_m);
        pgnn_runs.push(pgnn_m);
        if series.is_empty() {
            series = test
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| SeriesRow {
                    timestamp: r.timestamp,
                    actual: y[i],
                    ef: ef_pred[i],
                    nn: nn_pred[i],
                    pgnn: pgnn_pred[i],
                })
                .collect();
        }
    }
    let ef_metrics = per_seed[0].metrics;
    let reports = vec![
        aggregate(&config.dataset, Method::Ef, &[ef_metrics])?,
        aggregate(&config.dataset, Method::Nn, &nn_runs)?,
        aggregate(&config.dataset, Method::Pgnn, &pgnn_runs)?,
    ];
    Ok(Comparison {
        reports,
        per_seed,
        series,
        ef,
        rpm_model,
    })
}

impl Comparison {
    pub fn table(&self) -> String {
        render_table(&self.reports)
    }

    pub fn report(&self, method: Method) -> &EvalReport {
        self.reports
            .iter()
            .find(|r| r.method == method)
            .expect("all methods reported")
    }

    /// Test MAPE per seed for `method`.
    pub fn mape_by_seed(&self, method: Method) -> Vec<(u64, f64)> {
        self.per_seed
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.seed, r.metrics.mape))
            .collect()
    }
}

fn flush(w: &mut csv::Writer<impl Write>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `method,seed,mae,rmse,mape,r2`
pub fn write_per_seed_csv<W: Write>(writer: W, results: &[SeedResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "seed", "mae", "rmse", "mape", "r2"])?;
    for r in results {
        let m = &r.metrics;
        w.write_record([
            r.method.to_string(),
            r.seed.to_string(),
            fmt17(m.mae),
            fmt17(m.rmse),
            fmt17(m.mape),
            fmt17(m.r2),
        ])?;
    }
    flush(&mut w)
}

/// `timestamp,actual_kw,ef_kw,nn_kw,pgnn_kw`
pub fn write_series_csv<W: Write>(writer: W, series: &[SeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "actual_kw", "ef_kw", "nn_kw", "pgnn_kw"])?;
    for r in series {
        w.write_record([
            r.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            fmt17(r.actual),
            fmt17(r.ef),
            fmt17(r.nn),
            fmt17(r.pgnn),
        ])?;
    }
    flush(&mut w)
}

/// `lambda,status,mae,rmse,mape,r2,error`
pub fn write_sweep_csv<W: Write>(writer: W, cells: &[nn::SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lambda", "status", "mae", "rmse", "mape", "r2", "error"])?;
    for c in cells {
        match &c.report {
            Some(r) => w.write_record([
                fmt17(c.lambda),
                "ok".into(),
                fmt17(r.mae.mean),
                fmt17(r.rmse.mean),
                fmt17(r.mape.mean),
                fmt17(r.r2.mean),
                String::new(),
            ])?,
            None => w.write_record([
                fmt17(c.lambda),
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                c.error.clone().unwrap_or_default(),
            ])?,
        }
    }
    flush(&mut w)
}

/// Fits the physics inputs on `train` and sweeps `grid` with the seed of
/// `config.train` (offset by `config.base_seed`).
pub fn lambda_sweep(
    train: &Dataset,
    test: &Dataset,
    grid: &[f64],
    config: &CompareConfig,
) -> Result<Vec<nn::SweepCell>> {
    config.validate()?;
    let (ef, rpm_model) = fit_physics(train, config)?;
    let pipeline = Pipeline {
        rpm_model,
        ef: Some(ef.coefficients),
        groups: config.groups.clone(),
    };
    let cfg = TrainConfig {
        seed: config.base_seed,
        ..config.train.clone()
    };
    nn::lambda_sweep(train, test, grid, &pipeline, &cfg, &config.dataset)
}

/// `lo, lo + step, ...` up to `hi` inclusive (within rounding).
pub fn lambda_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Usage(format!(
            "invalid lambda grid {lo}..{hi} step {step}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}
