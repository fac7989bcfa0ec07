//! Power regression with the branched dense network, trained either on plain
//! MAE (the NN baseline, `lambda = 0`) or on the physics-guided composite
//! loss (PGNN, `lambda > 0`).
//!
//! The pipeline attaches RPM predicted by the multiplicative polynomial model
//! as a sensor feature, standardizes inputs, min-max normalizes the target and
//! the EF physics estimate with the same transform, and trains with Adam,
//! dropout and early stopping. Every random choice draws from a separate
//! stream of the run seed, so runs that differ only in `lambda` share their
//! initialization, validation split, batch order and dropout masks.

mod adam;
mod loss;
mod model;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{composite_loss, loss_terms, sample_loss_gradient};
pub use model::{Architecture, MlpModel, Tape, BRANCHES};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::features::Feature;
use crate::format::{fmt17, sha256_hex};
use crate::metrics::{aggregate, EvalReport, Method, MetricSet};
use crate::physics::{physical_power, EnvironmentRecord, ResistanceCoefficients};
use crate::rpm_poly::MultiplicativePolyModel;

pub const PREDICTOR_SCHEMA_VERSION: u32 = 1;

/// Which inputs feed which branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureGroups {
    pub copernicus: Vec<Feature>,
    pub sensor: Vec<Feature>,
    pub external: Vec<Feature>,
}

impl Default for FeatureGroups {
    fn default() -> Self {
        Self {
            copernicus: vec![
                Feature::WaveHeight,
                Feature::SwellHeight,
                Feature::WaveDir,
                Feature::SwellDir,
                Feature::WindDir,
                Feature::WindSpeed,
            ],
            sensor: vec![
                Feature::SpeedThroughWater,
                Feature::Draught,
                Feature::SeaDepth,
                Feature::SeaTemp,
                Feature::PredictedRpm,
            ],
            external: vec![Feature::DaysSincePolish, Feature::DaysSinceDrydock],
        }
    }
}

impl FeatureGroups {
    pub fn groups(&self) -> [&[Feature]; BRANCHES] {
        [&self.copernicus, &self.sensor, &self.external]
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, group) in [
            ("copernicus", &self.copernicus),
            ("sensor", &self.sensor),
            ("external", &self.external),
        ] {
            if group.is_empty() {
                return Err(Error::Config(format!("feature group `{name}` is empty")));
            }
            for f in group {
                if !seen.insert(*f) {
                    return Err(Error::Config(format!(
                        "feature `{f}` appears in more than one group"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn uses_predicted_rpm(&self) -> bool {
        self.groups()
            .iter()
            .any(|g| g.contains(&Feature::PredictedRpm))
    }
}

/// How direction features enter the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionEncoding {
    /// The angle in radians, standardized like any other input.
    #[default]
    Raw,
    /// Two columns, `sin` and `cos` of the angle.
    SinCos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationSplit {
    /// A seeded random subset of the training rows.
    #[default]
    Random,
    /// The latest rows of the training period.
    Chronological,
}

/// The validation quantity early stopping watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// The training objective, including the physics term.
    #[default]
    Composite,
    /// Only the data term (validation MAE in normalized units).
    DataOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub validation_split: ValidationSplit,
    pub monitor: Monitor,
    /// Weight of the physics term; 0 trains the plain NN baseline.
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub architecture: Architecture,
    pub direction_encoding: DirectionEncoding,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            batch_size: 16,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.2,
            validation_split: ValidationSplit::Random,
            monitor: Monitor::Composite,
            lambda: 0.0,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
            architecture: Architecture::default(),
            direction_encoding: DirectionEncoding::Raw,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size and max_epochs must be >= 1".into(),
            ));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        self.adam().validate()?;
        self.architecture.validate()
    }

    /// Hex SHA-256 of the canonical JSON of this config and the feature groups.
    pub fn hash(&self, groups: &FeatureGroups) -> String {
        sha256_hex(&serde_json::to_vec(&(self, groups)).expect("config serializes"))
    }
}

/// Seeded random streams of a training run.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Init = 0,
    Split = 1,
    Shuffle = 2,
    Dropout = 3,
}

fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The frozen models the network builds on.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub rpm_model: MultiplicativePolyModel,
    /// Required when `lambda > 0`.
    pub ef: Option<ResistanceCoefficients>,
    pub groups: FeatureGroups,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Transform {
    Identity,
    Sin,
    Cos,
}

/// The network input columns, in branch order.
fn input_columns(
    groups: &FeatureGroups,
    encoding: DirectionEncoding,
) -> [Vec<(Feature, Transform)>; BRANCHES] {
    groups.groups().map(|group| {
        group
            .iter()
            .flat_map(|&f| match encoding {
                DirectionEncoding::SinCos if f.is_direction() => {
                    vec![(f, Transform::Sin), (f, Transform::Cos)]
                }
                _ => vec![(f, Transform::Identity)],
            })
            .collect()
    })
}

/// Raw (unstandardized) input matrix, row-major.
fn raw_inputs(
    rows: &[EnvironmentRecord],
    columns: &[(Feature, Transform)],
    rpm_model: &MultiplicativePolyModel,
    needs_rpm: bool,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len() * columns.len());
    for (i, r) in rows.iter().enumerate() {
        let rpm = if needs_rpm {
            Some(rpm_model.evaluate(r).map_err(|e| e.at_row(i))?)
        } else {
            None
        };
        for &(f, t) in columns {
            let v = f.extract(r, rpm).map_err(|e| e.at_row(i))?;
            let v = match t {
                Transform::Identity => v,
                Transform::Sin => v.sin(),
                Transform::Cos => v.cos(),
            };
            if !v.is_finite() {
                return Err(Error::Schema(format!("input `{f}` is not finite")).at_row(i));
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn shaft_power(rows: &[EnvironmentRecord]) -> Result<Vec<f64>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.shaft_power
                .ok_or_else(|| Error::Schema("row lacks shaft_power".into()).at_row(i))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean composite loss over the training batches of the epoch.
    pub train_loss: f64,
    /// Validation loss measured by the model.
    pub val_loss: f64,
    /// The value early stopping acted on (equal to `val_loss` unless a hook
    /// replaced it).
    pub monitored: f64,
}

/// Observes each epoch and chooses the value early stopping acts on.
pub trait EpochHook {
    fn monitor(&mut self, epoch: usize, train_loss: f64, val_loss: f64) -> f64;
}

/// Early stopping on the measured validation loss.
pub struct MeasuredLoss;

impl EpochHook for MeasuredLoss {
    fn monitor(&mut self, _epoch: usize, _train_loss: f64, val_loss: f64) -> f64 {
        val_loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPredictor {
    pub schema_version: u32,
    /// Weights of `best_epoch`.
    pub model: MlpModel,
    pub standardizer: Standardizer,
    pub groups: FeatureGroups,
    pub direction_encoding: DirectionEncoding,
    /// Supplies the predicted-RPM input at prediction time.
    pub rpm_model: MultiplicativePolyModel,
    pub lambda: f64,
    pub seed: u64,
    pub config_hash: String,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Split of `n` training rows into (fitting, validation) indices.
pub fn validation_split(n: usize, config: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = (n as f64 * config.validation_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Usage(format!(
            "{n} training rows cannot be split with validation_fraction {}",
            config.validation_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    match config.validation_split {
        ValidationSplit::Random => {
            idx.shuffle(&mut stream_rng(config.seed, Stream::Split));
            let val = idx.split_off(n - n_val);
            Ok((idx, val))
        }
        ValidationSplit::Chronological => {
            let val = idx.split_off(n - n_val);
            Ok((idx, val))
        }
    }
}

/// Inputs, targets and physics targets of a row subset, all normalized.
struct Batch {
    x: Vec<f64>,
    width: usize,
    y: Vec<f64>,
    phys: Vec<f64>,
}

impl Batch {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.width..(i + 1) * self.width]
    }

    fn subset(&self, idx: &[usize]) -> Batch {
        Batch {
            x: idx
                .iter()
                .flat_map(|&i| self.row(i).iter().copied())
                .collect(),
            width: self.width,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            phys: idx.iter().map(|&i| self.phys[i]).collect(),
        }
    }
}

/// Rows per inference pass; results do not depend on it.
const INFERENCE_CHUNK: usize = 256;

fn infer(model: &MlpModel, x: &[f64], tape: &mut Tape) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() / model.input_width());
    let mut chunk_out = Vec::new();
    for chunk in x.chunks(INFERENCE_CHUNK * model.input_width()) {
        model.forward_unchecked(chunk, None, tape, &mut chunk_out);
        out.extend_from_slice(&chunk_out);
    }
    out
}

fn predict_batch(model: &MlpModel, batch: &Batch, tape: &mut Tape) -> Vec<f64> {
    infer(model, &batch.x, tape)
}

fn validation_loss(
    model: &MlpModel,
    batch: &Batch,
    lambda: f64,
    monitor: Monitor,
    tape: &mut Tape,
) -> Result<f64> {
    let pred = predict_batch(model, batch, tape);
    let lambda = match monitor {
        Monitor::Composite => lambda,
        Monitor::DataOnly => 0.0,
    };
    composite_loss(&pred, &batch.y, &batch.phys, lambda)
}

/// Trains with early stopping on the measured validation loss.
pub fn train(
    train: &Dataset,
    pipeline: &Pipeline,
    config: &TrainConfig,
) -> Result<TrainedPredictor> {
    train_with_hook(train, pipeline, config, &mut MeasuredLoss)
}

/// Trains, letting `hook` choose the value early stopping acts on each epoch.
pub fn train_with_hook(
    train: &Dataset,
    pipeline: &Pipeline,
    config: &TrainConfig,
    hook: &mut dyn EpochHook,
) -> Result<TrainedPredictor> {
    config.validate()?;
    pipeline.groups.validate()?;
    pipeline.rpm_model.validate()?;
    if config.lambda > 0.0 && pipeline.ef.is_none() {
        return Err(Error::Usage(
            "lambda > 0 requires fitted EF coefficients".into(),
        ));
    }
    let rows = &train.rows;
    let (fit_idx, val_idx) = validation_split(rows.len(), config)?;

    let columns = input_columns(&pipeline.groups, config.direction_encoding);
    let flat: Vec<(Feature, Transform)> = columns.iter().flatten().copied().collect();
    let needs_rpm = pipeline.groups.uses_predicted_rpm();
    let mut x = raw_inputs(rows, &flat, &pipeline.rpm_model, needs_rpm)?;
    let power = shaft_power(rows)?;
    let names: Vec<Feature> = flat.iter().map(|(f, _)| *f).collect();
    let standardizer = Standardizer::fit(&names, &x, &power)?;
    standardizer.transform_in_place(&mut x);
    let y: Vec<f64> = power
        .iter()
        .map(|p| standardizer.normalize_target(*p))
        .collect();
    let phys = match &pipeline.ef {
        Some(ef) => rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                physical_power(ef, r)
                    .map(|b| standardizer.normalize_target(b.total_power))
                    .map_err(|e| e.at_row(i))
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![0.0; rows.len()],
    };
    let all = Batch {
        x,
        width: flat.len(),
        y,
        phys,
    };
    let fit = all.subset(&fit_idx);
    let val = all.subset(&val_idx);
    let lambda = config.lambda;

    let dims: [usize; BRANCHES] = std::array::from_fn(|b| columns[b].len());
    let mut model = MlpModel::init(
        config.architecture.clone(),
        dims,
        &mut stream_rng(config.seed, Stream::Init),
    )?;
    let mut shuffle_rng = stream_rng(config.seed, Stream::Shuffle);
    let mut dropout_rng = stream_rng(config.seed, Stream::Dropout);
    let adam = config.adam();
    let mut state = AdamState::new(model.param_count());
    let mut grads = vec![0.0; model.param_count()];
    let mut tape = Tape::default();
    let (mut xb, mut pred, mut grad_out) = (Vec::new(), Vec::new(), Vec::new());

    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut stopped_early = false;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            xb.clear();
            for &i in chunk {
                xb.extend_from_slice(fit.row(i));
            }
            model.forward_unchecked(&xb, Some(&mut dropout_rng), &mut tape, &mut pred);
            let scale = 1.0 / chunk.len() as f64;
            grad_out.clear();
            for (&i, &p) in chunk.iter().zip(&pred) {
                let (t, f) = (fit.y[i], fit.phys[i]);
                loss_sum += (p - t).abs() + lambda * (p - f).abs();
                grad_out.push(sample_loss_gradient(p, t, f, lambda) * scale);
            }
            model.backward_unchecked(&mut tape, &grad_out, &mut grads);
            adam_step(model.params_mut(), &grads, &mut state, &adam)?;
        }
        let train_loss = loss_sum / fit.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "training loss became non-finite at epoch {epoch}; lower the learning rate"
            )));
        }
        let val_loss = validation_loss(&model, &val, lambda, config.monitor, &mut tape)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "validation loss became non-finite at epoch {epoch}"
            )));
        }
        let monitored = hook.monitor(epoch, train_loss, val_loss);
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            monitored,
        });
        match &best {
            Some((b, _, _)) if !(monitored < *b) => {}
            _ => best = Some((monitored, epoch, model.params().to_vec())),
        }
        let best_epoch = best.as_ref().map(|b| b.1).expect("set above");
        if epoch - best_epoch >= config.patience {
            stopped_early = true;
            break;
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params_mut().copy_from_slice(&params);

    Ok(TrainedPredictor {
        schema_version: PREDICTOR_SCHEMA_VERSION,
        model,
        standardizer,
        groups: pipeline.groups.clone(),
        direction_encoding: config.direction_encoding,
        rpm_model: pipeline.rpm_model.clone(),
        lambda,
        seed: config.seed,
        config_hash: config.hash(&pipeline.groups),
        history,
        best_epoch,
        stopped_early,
    })
}

impl TrainedPredictor {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != PREDICTOR_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported predictor schema_version {} (expected {PREDICTOR_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.groups.validate()?;
        self.rpm_model.validate()?;
        let columns = input_columns(&self.groups, self.direction_encoding);
        let dims: [usize; BRANCHES] = std::array::from_fn(|b| columns[b].len());
        if dims != self.model.input_dims()
            || self.standardizer.means.len() != self.model.input_width()
        {
            return Err(Error::Schema(
                "predictor model, standardizer and groups disagree".into(),
            ));
        }
        Ok(())
    }

    fn standardized_inputs(&self, records: &[EnvironmentRecord]) -> Result<Vec<f64>> {
        let columns = input_columns(&self.groups, self.direction_encoding);
        let flat: Vec<(Feature, Transform)> = columns.iter().flatten().copied().collect();
        let mut x = raw_inputs(
            records,
            &flat,
            &self.rpm_model,
            self.groups.uses_predicted_rpm(),
        )?;
        self.standardizer.transform_in_place(&mut x);
        Ok(x)
    }

    /// Network outputs in normalized target units.
    pub fn predict_normalized(&self, records: &[EnvironmentRecord]) -> Result<Vec<f64>> {
        let x = self.standardized_inputs(records)?;
        Ok(infer(&self.model, &x, &mut Tape::default()))
    }

    /// Predicted shaft power in kW.
    pub fn predict(&self, records: &[EnvironmentRecord]) -> Result<Vec<f64>> {
        let out: Vec<f64> = self
            .predict_normalized(records)?
            .into_iter()
            .map(|y| self.standardizer.denormalize_target(y))
            .collect();
        if let Some(i) = out.iter().position(|p| !p.is_finite()) {
            return Err(Error::Schema("prediction is not finite".into()).at_row(i));
        }
        Ok(out)
    }

    /// Composite loss on `records` in normalized units, as monitored during
    /// training. `ef` supplies the physics targets when `lambda > 0`.
    pub fn loss(
        &self,
        records: &[EnvironmentRecord],
        ef: Option<&ResistanceCoefficients>,
        lambda: f64,
    ) -> Result<f64> {
        let pred = self.predict_normalized(records)?;
        let y: Vec<f64> = shaft_power(records)?
            .iter()
            .map(|p| self.standardizer.normalize_target(*p))
            .collect();
        let phys = match ef {
            Some(ef) => records
                .iter()
                .map(|r| {
                    physical_power(ef, r).map(|b| self.standardizer.normalize_target(b.total_power))
                })
                .collect::<Result<Vec<_>>>()?,
            None if lambda > 0.0 => {
                return Err(Error::Usage("lambda > 0 requires EF coefficients".into()));
            }
            None => vec![0.0; records.len()],
        };
        composite_loss(&pred, &y, &phys, lambda)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Self = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }
}

/// Predicted shaft power in kW for each record.
pub fn predict(predictor: &TrainedPredictor, records: &[EnvironmentRecord]) -> Result<Vec<f64>> {
    predictor.predict(records)
}

/// Writes `epoch,train_loss,val_loss` rows.
pub fn write_history_csv<W: Write>(writer: W, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for h in history {
        w.write_record([h.epoch.to_string(), fmt17(h.train_loss), fmt17(h.val_loss)])?;
    }
    w.flush().map_err(|e| Error::io("<history>", e))?;
    Ok(())
}

/// Outcome of one cell of a lambda sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub report: Option<EvalReport>,
    /// Why the cell failed, when it did.
    pub error: Option<String>,
}

/// Trains one predictor per `lambda` with the seed of `config` and evaluates
/// each on `test`. Cells are ordered by lambda; a failing cell is reported
/// rather than aborting the sweep.
pub fn lambda_sweep(
    train_set: &Dataset,
    test: &Dataset,
    grid: &[f64],
    pipeline: &Pipeline,
    config: &TrainConfig,
    dataset_name: &str,
) -> Result<Vec<SweepCell>> {
    if grid.is_empty() {
        return Err(Error::Usage("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !l.is_finite()) {
        return Err(Error::Usage("lambda grid values must be finite".into()));
    }
    let y = shaft_power(&test.rows)?;
    let mut lambdas = grid.to_vec();
    lambdas.sort_by(f64::total_cmp);
    Ok(lambdas
        .into_iter()
        .map(|lambda| {
            let cfg = TrainConfig {
                lambda,
                ..config.clone()
            };
            let method = if lambda == 0.0 {
                Method::Nn
            } else {
                Method::Pgnn
            };
            let outcome = train(train_set, pipeline, &cfg)
                .and_then(|p| p.predict(&test.rows))
                .and_then(|pred| MetricSet::evaluate(&y, &pred))
                .and_then(|m| aggregate(dataset_name, method, &[m]));
            match outcome {
                Ok(report) => SweepCell {
                    lambda,
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepCell {
                    lambda,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// The lambda with the lowest test MAPE among successful cells.
pub fn best_lambda(cells: &[SweepCell]) -> Option<f64> {
    cells
        .iter()
        .filter_map(|c| c.report.as_ref().map(|r| (c.lambda, r.mape.mean)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(l, _)| l)
}

#[cfg(test)]
mod tests;
