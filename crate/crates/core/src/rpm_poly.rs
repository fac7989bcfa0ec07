//! Shaft RPM as a product of univariate polynomials, one per selected feature.
//!
//! Fitting alternates over the factors: with every other polynomial held fixed,
//! the remaining coefficients enter linearly and solve an exact (lightly
//! ridge-damped) least-squares problem.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Feature;
use crate::physics::EnvironmentRecord;

pub const RPM_SCHEMA_VERSION: u32 = 1;

/// Default features: speed through water, draught, wind speed, swell height.
pub const DEFAULT_RPM_FEATURES: [Feature; 4] = [
    Feature::SpeedThroughWater,
    Feature::Draught,
    Feature::WindSpeed,
    Feature::SwellHeight,
];

pub const DEFAULT_ORDER: usize = 3;

/// Maps a raw feature value to `(x - center) / half_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineScale {
    pub center: f64,
    pub half_range: f64,
}

impl AffineScale {
    /// Sends the observed `[min, max]` onto `[-1, 1]`.
    pub fn spanning(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        let half = (hi - lo) / 2.0;
        Self {
            center: (hi + lo) / 2.0,
            half_range: if half > 0.0 && half.is_finite() {
                half
            } else {
                1.0
            },
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) / self.half_range
    }
}

/// One factor: a polynomial in the scaled feature, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFactor {
    pub feature: Feature,
    pub scale: AffineScale,
    pub coefficients: Vec<f64>,
}

impl PolyFactor {
    pub fn eval_scaled(&self, x: f64) -> f64 {
        horner(&self.coefficients, x)
    }

    pub fn eval(&self, raw: f64) -> f64 {
        self.eval_scaled(self.scale.apply(raw))
    }
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativePolyModel {
    pub schema_version: u32,
    pub order: usize,
    pub factors: Vec<PolyFactor>,
}

impl MultiplicativePolyModel {
    /// Validates the structural invariants: at least one factor, speed through
    /// water first, `order + 1` coefficients per factor, no repeated features.
    pub fn new(order: usize, factors: Vec<PolyFactor>) -> Result<Self> {
        let model = Self {
            schema_version: RPM_SCHEMA_VERSION,
            order,
            factors,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks the structural invariants of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RPM_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported RPM model schema_version {}",
                self.schema_version
            )));
        }
        let first = self
            .factors
            .first()
            .ok_or_else(|| Error::Schema("RPM model needs at least one feature".into()))?;
        if first.feature != Feature::SpeedThroughWater {
            return Err(Error::Schema(
                "the first RPM feature must be speed_through_water".into(),
            ));
        }
        for (i, f) in self.factors.iter().enumerate() {
            if f.coefficients.len() != self.order + 1 {
                return Err(Error::Schema(format!(
                    "factor `{}` has {} coefficients, expected {}",
                    f.feature,
                    f.coefficients.len(),
                    self.order + 1
                )));
            }
            if f.feature == Feature::PredictedRpm {
                return Err(Error::Schema("predicted_rpm cannot predict RPM".into()));
            }
            if self.factors[..i].iter().any(|g| g.feature == f.feature) {
                return Err(Error::Schema(format!("feature `{}` repeated", f.feature)));
            }
        }
        Ok(())
    }

    pub fn features(&self) -> Vec<Feature> {
        self.factors.iter().map(|f| f.feature).collect()
    }

    pub fn evaluate(&self, record: &EnvironmentRecord) -> Result<f64> {
        let mut product = 1.0;
        for factor in &self.factors {
            let x = factor.feature.from_record(record).ok_or_else(|| {
                Error::Schema(format!("record lacks RPM feature `{}`", factor.feature))
            })?;
            product *= factor.eval(x);
        }
        Ok(product)
    }

    pub fn predict(&self, records: &[EnvironmentRecord]) -> Result<Vec<f64>> {
        records
            .iter()
            .enumerate()
            .map(|(i, r)| self.evaluate(r).map_err(|e| e.at_row(i)))
            .collect()
    }
}

/// Evaluates `model` on a record.
pub fn rpm_evaluate(model: &MultiplicativePolyModel, record: &EnvironmentRecord) -> Result<f64> {
    model.evaluate(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpmFitConfig {
    pub max_sweeps: usize,
    /// Stop once a sweep improves the training MSE by less than this fraction.
    pub tolerance: f64,
    /// Ridge damping as a multiple of the normal-matrix trace.
    pub ridge: f64,
    /// Feature selection stops when validation MSE improves by less than this fraction.
    pub selection_min_improvement: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for RpmFitConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            tolerance: 1e-8,
            ridge: 1e-8,
            selection_min_improvement: 0.01,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl RpmFitConfig {
    fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) || !(self.ridge >= 0.0) {
            return Err(Error::Config("tolerance and ridge must be >= 0".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(
                "validation_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Fitted model plus the training MSE after initialization and after each sweep.
#[derive(Debug, Clone)]
pub struct RpmFit {
    pub model: MultiplicativePolyModel,
    pub mse_history: Vec<f64>,
}

fn targets(train: &[EnvironmentRecord]) -> Result<Vec<f64>> {
    train
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.shaft_rpm
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Schema("shaft_rpm missing".into()).at_row(i))
        })
        .collect()
}

fn check_features(features: &[Feature]) -> Result<()> {
    if features.first() != Some(&Feature::SpeedThroughWater) {
        return Err(Error::Usage(
            "RPM features must start with speed_through_water".into(),
        ));
    }
    if features.contains(&Feature::PredictedRpm) {
        return Err(Error::Usage("predicted_rpm cannot predict RPM".into()));
    }
    Ok(())
}

/// Solves `(A^T A + ridge * tr(A^T A) I) w = A^T y`.
fn ridge_solve(design: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let mut normal = design.tr_mul(design);
    let rhs = design.tr_mul(y);
    let damping = ridge * normal.trace();
    for k in 0..normal.nrows() {
        normal[(k, k)] += damping;
    }
    match normal.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => normal
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(rhs.len())),
    }
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64
}

/// Fits a multiplicative polynomial model by alternating least squares.
pub fn fit_rpm_als(
    train: &[EnvironmentRecord],
    features: &[Feature],
    order: usize,
    config: &RpmFitConfig,
) -> Result<MultiplicativePolyModel> {
    fit_rpm_als_traced(train, features, order, config).map(|fit| fit.model)
}

/// [`fit_rpm_als`] that also reports the per-sweep training MSE.
pub fn fit_rpm_als_traced(
    train: &[EnvironmentRecord],
    features: &[Feature],
    order: usize,
    config: &RpmFitConfig,
) -> Result<RpmFit> {
    config.validate()?;
    check_features(features)?;
    if train.is_empty() {
        return Err(Error::Usage("cannot fit an RPM model on no rows".into()));
    }
    let y = targets(train)?;
    let n = train.len();
    let width = order + 1;

    let mut factors: Vec<PolyFactor> = Vec::with_capacity(features.len());
    let mut scaled: Vec<Vec<f64>> = Vec::with_capacity(features.len());
    for &feature in features {
        let raw: Vec<f64> = train
            .iter()
            .map(|r| feature.from_record(r).expect("record feature"))
            .collect();
        let scale = AffineScale::spanning(raw.iter().copied());
        scaled.push(raw.iter().map(|&x| scale.apply(x)).collect());
        let mut coefficients = vec![0.0; width];
        coefficients[0] = 1.0;
        factors.push(PolyFactor {
            feature,
            scale,
            coefficients,
        });
    }

    let design_for = |x: &[f64], weight: &[f64]| {
        DMatrix::from_fn(n, width, |i, k| x[i].powi(k as i32) * weight[i])
    };
    let y_vec = DVector::from_vec(y.clone());

    // Speed-only cubic starts the first factor; the rest start at 1.
    factors[0].coefficients =
        ridge_solve(&design_for(&scaled[0], &vec![1.0; n]), &y_vec, config.ridge)
            .iter()
            .copied()
            .collect();

    let mut values: Vec<Vec<f64>> = factors
        .iter()
        .zip(&scaled)
        .map(|(f, x)| x.iter().map(|&v| f.eval_scaled(v)).collect())
        .collect();
    let product = |values: &[Vec<f64>]| -> Vec<f64> {
        (0..n)
            .map(|i| values.iter().map(|v| v[i]).product())
            .collect()
    };

    let mut current = mse(&product(&values), &y);
    let mut history = vec![current];

    for _ in 0..config.max_sweeps {
        if factors.len() == 1 || current == 0.0 {
            break;
        }
        for j in 0..factors.len() {
            let others: Vec<f64> = (0..n)
                .map(|i| {
                    values
                        .iter()
                        .enumerate()
                        .filter(|(l, _)| *l != j)
                        .map(|(_, v)| v[i])
                        .product()
                })
                .collect();
            let w = ridge_solve(&design_for(&scaled[j], &others), &y_vec, config.ridge);
            let candidate: Vec<f64> = w.iter().copied().collect();
            let cand_values: Vec<f64> = scaled[j].iter().map(|&x| horner(&candidate, x)).collect();
            let cand_pred: Vec<f64> = others
                .iter()
                .zip(&cand_values)
                .map(|(o, v)| o * v)
                .collect();
            let cand_mse = mse(&cand_pred, &y);
            // The damped solution can be a hair worse than the current point.
            if cand_mse.is_finite() && cand_mse <= current {
                factors[j].coefficients = candidate;
                values[j] = cand_values;
                current = cand_mse;
            }
        }
        normalize(&mut factors, &mut values);
        current = mse(&product(&values), &y).min(current);
        let previous = *history.last().expect("history starts non-empty");
        history.push(current);
        if previous <= 0.0 || (previous - current) / previous < config.tolerance {
            break;
        }
    }
    normalize(&mut factors, &mut values);

    Ok(RpmFit {
        model: MultiplicativePolyModel::new(order, factors)?,
        mse_history: history,
    })
}

/// Rescales every factor after the first to unit mean over the training rows,
/// pushing the scale into the first factor.
fn normalize(factors: &mut [PolyFactor], values: &mut [Vec<f64>]) {
    for j in 1..factors.len() {
        let mean = values[j].iter().sum::<f64>() / values[j].len() as f64;
        if !mean.is_finite() || mean.abs() < 1e-300 {
            continue;
        }
        for c in &mut factors[j].coefficients {
            *c /= mean;
        }
        for v in &mut values[j] {
            *v /= mean;
        }
        for c in &mut factors[0].coefficients {
            *c *= mean;
        }
        for v in &mut values[0] {
            *v *= mean;
        }
    }
}

fn pearson_abs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).abs();
    if r.is_finite() {
        r
    } else {
        0.0
    }
}

/// Greedy forward selection: start from speed through water and keep adding
/// the candidate most correlated with the current residual while the
/// validation MSE improves by at least `selection_min_improvement`.
pub fn greedy_feature_selection(
    train: &[EnvironmentRecord],
    candidates: &[Feature],
    order: usize,
    config: &RpmFitConfig,
) -> Result<Vec<Feature>> {
    config.validate()?;
    if train.len() < 2 {
        return Err(Error::Usage(
            "feature selection needs at least two rows".into(),
        ));
    }
    let y = targets(train)?;
    let mut idx: Vec<usize> = (0..train.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let n_val = ((train.len() as f64 * config.validation_fraction).round() as usize)
        .clamp(1, train.len() - 1);
    let (val_idx, fit_idx) = idx.split_at(n_val);
    let mut fit_idx = fit_idx.to_vec();
    fit_idx.sort_unstable();
    let mut val_idx = val_idx.to_vec();
    val_idx.sort_unstable();
    let fit_rows: Vec<EnvironmentRecord> = fit_idx.iter().map(|&i| train[i].clone()).collect();
    let val_rows: Vec<EnvironmentRecord> = val_idx.iter().map(|&i| train[i].clone()).collect();
    let fit_y: Vec<f64> = fit_idx.iter().map(|&i| y[i]).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| y[i]).collect();
    let scale2 = val_y.iter().map(|v| v * v).sum::<f64>() / val_y.len() as f64;

    let mut pool: Vec<Feature> = candidates
        .iter()
        .copied()
        .filter(|f| *f != Feature::SpeedThroughWater && *f != Feature::PredictedRpm)
        .collect();
    pool.dedup();
    let mut selected = vec![Feature::SpeedThroughWater];
    let mut model = fit_rpm_als(&fit_rows, &selected, order, config)?;
    let mut val_mse = mse(&model.predict(&val_rows)?, &val_y);

    while !pool.is_empty() && val_mse > 1e-20 * scale2 {
        let pred = model.predict(&fit_rows)?;
        let residual: Vec<f64> = fit_y.iter().zip(&pred).map(|(t, p)| t - p).collect();
        let (best, corr) = pool
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let xs: Vec<f64> = fit_rows
                    .iter()
                    .map(|r| f.from_record(r).expect("record feature"))
                    .collect();
                (k, pearson_abs(&xs, &residual))
            })
            .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if corr <= 0.0 {
            break;
        }
        let mut trial = selected.clone();
        trial.push(pool[best]);
        let trial_model = fit_rpm_als(&fit_rows, &trial, order, config)?;
        let trial_mse = mse(&trial_model.predict(&val_rows)?, &val_y);
        if (val_mse - trial_mse) / val_mse < config.selection_min_improvement {
            break;
        }
        pool.remove(best);
        selected = trial;
        model = trial_model;
        val_mse = trial_mse;
    }
    Ok(selected)
}
