//! One function per subcommand.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use shaftpower::data::{self, CsvOptions, Dataset};
use shaftpower::ef_fit::{self, EfFitConfig, EfFitResult};
use shaftpower::experiment::{self, CompareConfig, RpmSetup};
use shaftpower::features::Feature;
use shaftpower::format::fmt17;
use shaftpower::metrics::{self, aggregate, render_table, Method, MetricSet};
use shaftpower::nn::{self, FeatureGroups, Pipeline, TrainConfig, TrainedPredictor};
use shaftpower::physics::ResistanceCoefficients;
use shaftpower::rpm_poly::MultiplicativePolyModel;
use shaftpower::synth::{self, SynthConfig};

use crate::error::{CliError, Result};
use crate::manifest::{beside, ManifestBuilder};
use crate::output::{create, read_json, write_json, write_text, Outputs};
use crate::{
    CompareArgs, CsvArgs, EvaluateArgs, FitEfArgs, FitRpmArgs, GenerateArgs, PredictArgs,
    PredictMethod, ReportMethod, ScenarioKind, SweepArgs, TrainArgs,
};

const DEFAULT_WAVE_TRAIN_ROWS: usize = 10_000;
const DEFAULT_WAVE_TEST_ROWS: usize = 4_000;

pub fn run(command: crate::Command) -> Result<()> {
    use crate::Command::*;
    match command {
        Generate(a) => generate(a),
        FitEf(a) => fit_ef(a),
        FitRpm(a) => fit_rpm(a),
        Train(a) => train(a),
        Predict(a) => predict(a),
        Evaluate(a) => evaluate(a),
        Compare(a) => compare(a),
        LambdaSweep(a) => lambda_sweep(a),
    }
}

/// Reads a JSON config, or the defaults when no path is given.
fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

/// Loads a CSV; with `targets`, applies the training filters, otherwise keeps
/// every row with complete features.
fn load_data(path: &Path, csv: &CsvArgs, targets: bool) -> Result<Dataset> {
    let options = CsvOptions {
        angles: csv.angles.into(),
        ..CsvOptions::default()
    };
    let raw = data::load_csv(path, &options)?;
    let ds = if targets {
        data::preprocess(&raw)?
    } else {
        data::complete_rows(&raw)?
    };
    if ds.is_empty() {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            message: "no usable rows".into(),
        });
    }
    if let Some(log) = ds.provenance.filter_log {
        if log.dropped() > 0 {
            eprintln!(
                "{}: kept {} of {} rows (missing {}, invalid {}, speed {}, power {})",
                path.display(),
                log.kept,
                log.input,
                log.missing,
                log.invalid,
                log.speed,
                log.power
            );
        }
    }
    Ok(ds)
}

/// EF coefficients, either bare or wrapped in a fit result.
#[derive(Deserialize)]
#[serde(untagged)]
enum EfDoc {
    Fit(EfFitResult),
    Coefficients(ResistanceCoefficients),
}

fn load_ef(path: &Path) -> Result<ResistanceCoefficients> {
    Ok(match read_json::<EfDoc>(path)? {
        EfDoc::Fit(f) => f.coefficients,
        EfDoc::Coefficients(c) => c,
    })
}

fn load_rpm(path: &Path) -> Result<MultiplicativePolyModel> {
    let model: MultiplicativePolyModel = read_json(path)?;
    model.validate().map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(model)
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("generate");
    let mut outputs = Outputs::new();
    let seed = args.seed.unwrap_or(0);
    match args.scenario {
        Some(kind) => {
            let test_out = args
                .test_out
                .as_deref()
                .ok_or_else(|| usage("--scenario requires --test-out"))?;
            let (scenario, manifest) = match kind {
                ScenarioKind::Drift => {
                    if args.rows.is_some() || args.test_rows.is_some() {
                        return Err(usage("the drift scenario has fixed row counts"));
                    }
                    let cfg = synth::drift_benchmark_config(seed);
                    (
                        synth::drift_benchmark(seed)?,
                        manifest.config(&("drift", &cfg)).seeds([seed]),
                    )
                }
                ScenarioKind::Waves => {
                    let train_rows = args.rows.unwrap_or(DEFAULT_WAVE_TRAIN_ROWS);
                    let test_rows = args.test_rows.unwrap_or(DEFAULT_WAVE_TEST_ROWS);
                    (
                        synth::wave_shift_scenario(seed, train_rows, test_rows)?,
                        manifest
                            .config(&("waves", seed, train_rows, test_rows))
                            .seeds([seed]),
                    )
                }
            };
            let train = outputs.file(&args.out)?;
            data::export_csv(&scenario.train, &train)?;
            let test = outputs.file(test_out)?;
            data::export_csv(&scenario.test, &test)?;
            println!(
                "{}: {} training rows -> {}, {} test rows -> {}",
                scenario.name,
                scenario.train.len(),
                train.display(),
                scenario.test.len(),
                test.display()
            );
            finish(outputs, manifest, &args.out)
        }
        None => {
            if args.test_rows.is_some() {
                return Err(usage("--test-rows applies to --scenario waves only"));
            }
            let mut cfg: SynthConfig = load_config(args.config.as_deref())?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(n) = args.rows {
                cfg.row_count = n;
            }
            let ds = synth::generate(&cfg)?;
            let out = outputs.file(&args.out)?;
            data::export_csv(&ds, &out)?;
            println!("{} rows -> {}", ds.len(), out.display());
            let mut manifest = manifest.seeds([cfg.seed]).config(&cfg);
            if let Some(p) = &args.config {
                manifest = manifest.input(p);
            }
            finish(outputs, manifest, &args.out)
        }
    }
}

/// Writes the manifest beside `primary` and keeps all outputs.
fn finish(mut outputs: Outputs, manifest: ManifestBuilder, primary: &Path) -> Result<()> {
    let path = outputs.file(beside(primary))?;
    manifest.write(&path, outputs.paths())?;
    outputs.commit();
    Ok(())
}

fn with_inputs(mut manifest: ManifestBuilder, paths: &[Option<&Path>]) -> ManifestBuilder {
    for p in paths.iter().flatten() {
        manifest = manifest.input(p);
    }
    manifest
}

fn fit_ef(args: FitEfArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("fit-ef");
    let mut cfg: EfFitConfig = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let train = load_data(&args.train, &args.csv, true)?;
    let fit = ef_fit::fit_ef(&train.rows, &cfg)?;
    let y = train.shaft_power()?;
    let pred = ef_fit::predict_ef(&fit.coefficients, &train.rows)?;
    println!(
        "EF fit: {} rows, restart {}, {} iterations, converged {}, train MAPE {:.3}%",
        train.len(),
        fit.restart,
        fit.iterations_used,
        fit.converged,
        metrics::mape(&y, &pred)?
    );
    let mut outputs = Outputs::new();
    let out = outputs.file(&args.out)?;
    write_json(&out, &fit)?;
    let manifest = manifest.config(&cfg).seeds([cfg.seed]);
    let manifest = with_inputs(manifest, &[Some(&args.train), args.config.as_deref()]);
    finish(outputs, manifest, &args.out)
}

fn fit_rpm(args: FitRpmArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("fit-rpm");
    let mut setup: RpmSetup = load_config(args.config.as_deref())?;
    if let Some(names) = &args.features {
        setup.features = names
            .iter()
            .map(|n| n.trim().parse::<Feature>())
            .collect::<shaftpower::Result<_>>()?;
    }
    if let Some(order) = args.order {
        setup.order = order;
    }
    setup.select_features |= args.select_features;
    let train = load_data(&args.train, &args.csv, true)?;
    let model = setup.fit(&train)?;
    let measured: Vec<f64> = train.rows.iter().filter_map(|r| r.shaft_rpm).collect();
    if measured.len() == train.len() {
        let pred = model.predict(&train.rows)?;
        let names: Vec<_> = model.features().iter().map(|f| f.name()).collect();
        println!(
            "RPM model: order {}, factors [{}], train MAPE {:.3}%",
            model.order,
            names.join(", "),
            metrics::mape(&measured, &pred)?
        );
    }
    let mut outputs = Outputs::new();
    let out = outputs.file(&args.out)?;
    write_json(&out, &model)?;
    let manifest = manifest.config(&setup).seeds([setup.fit.seed]);
    let manifest = with_inputs(manifest, &[Some(&args.train), args.config.as_deref()]);
    finish(outputs, manifest, &args.out)
}

fn train(args: TrainArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("train");
    let mut cfg: TrainConfig = load_config(args.config.as_deref())?;
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let groups: FeatureGroups = load_config(args.groups.as_deref())?;
    let ef = args.ef.as_deref().map(load_ef).transpose()?;
    if cfg.lambda > 0.0 && ef.is_none() {
        return Err(usage("lambda > 0 requires --ef"));
    }
    let pipeline = Pipeline {
        rpm_model: load_rpm(&args.rpm)?,
        ef,
        groups,
    };
    let train = load_data(&args.train, &args.csv, true)?;
    let predictor = nn::train(&train, &pipeline, &cfg)?;
    println!(
        "trained lambda {} seed {}: best epoch {} of {}{}",
        cfg.lambda,
        cfg.seed,
        predictor.best_epoch,
        predictor.history.len(),
        if predictor.stopped_early {
            " (early stop)"
        } else {
            ""
        }
    );
    let mut outputs = Outputs::new();
    let out = outputs.file(&args.out)?;
    predictor.save(&out)?;
    if let Some(h) = &args.history {
        let h = outputs.file(h)?;
        let mut w = create(&h)?;
        nn::write_history_csv(&mut w, &predictor.history)?;
        w.flush().map_err(|e| CliError::io(&h, e))?;
    }
    let manifest = manifest.config(&(&cfg, &pipeline.groups)).seeds([cfg.seed]);
    let manifest = with_inputs(
        manifest,
        &[
            Some(&args.train),
            args.ef.as_deref(),
            Some(&args.rpm),
            args.config.as_deref(),
            args.groups.as_deref(),
        ],
    );
    finish(outputs, manifest, &args.out)
}

fn predict(args: PredictArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("predict");
    let ds = load_data(&args.data, &args.csv, false)?;
    let pred = match args.method {
        PredictMethod::Nn => {
            let predictor = TrainedPredictor::load(&args.model)?;
            nn::predict(&predictor, &ds.rows)?
        }
        PredictMethod::Ef => ef_fit::predict_ef(&load_ef(&args.model)?, &ds.rows)?,
    };
    let mut outputs = Outputs::new();
    let out = outputs.file(&args.out)?;
    let mut w = csv::Writer::from_writer(create(&out)?);
    w.write_record(["timestamp", "predicted_kw"])?;
    for (r, p) in ds.rows.iter().zip(&pred) {
        w.write_record([timestamp(&r.timestamp), fmt17(*p)])?;
    }
    w.flush().map_err(|e| CliError::io(&out, e))?;
    drop(w);
    println!("{} predictions -> {}", pred.len(), out.display());
    let method = match args.method {
        PredictMethod::Nn => "nn",
        PredictMethod::Ef => "ef",
    };
    let manifest = manifest.config(&method);
    let manifest = with_inputs(manifest, &[Some(&args.model), Some(&args.data)]);
    finish(outputs, manifest, &args.out)
}

/// Reads `timestamp,predicted_kw` into a map keyed by timestamp.
fn read_predictions(path: &Path) -> Result<BTreeMap<DateTime<Utc>, f64>> {
    let bad = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (ts_col, p_col) = (col("timestamp")?, col("predicted_kw")?);
    let mut out = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let t = DateTime::parse_from_rfc3339(rec.get(ts_col).unwrap_or("").trim())
            .map_err(|e| bad(format!("line {line}: bad timestamp: {e}")))?
            .with_timezone(&Utc);
        let p: f64 = rec
            .get(p_col)
            .unwrap_or("")
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad(format!("line {line}: predicted_kw is not a finite number")))?;
        if out.insert(t, p).is_some() {
            return Err(bad(format!(
                "line {line}: duplicate timestamp {}",
                timestamp(&t)
            )));
        }
    }
    Ok(out)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("evaluate");
    let predictions = read_predictions(&args.predictions)?;
    let truth = load_data(&args.truth, &args.csv, true)?;
    let (y, y_hat): (Vec<f64>, Vec<f64>) = truth
        .rows
        .iter()
        .filter_map(|r| Some((r.shaft_power?, *predictions.get(&r.timestamp)?)))
        .unzip();
    if y.is_empty() {
        return Err(usage("no prediction timestamp matches a ground-truth row"));
    }
    let method = match args.method {
        ReportMethod::Ef => Method::Ef,
        ReportMethod::Nn => Method::Nn,
        ReportMethod::Pgnn => Method::Pgnn,
    };
    let report = aggregate(&args.dataset, method, &[MetricSet::evaluate(&y, &y_hat)?])?;
    print!("{}", render_table(std::slice::from_ref(&report)));
    println!(
        "matched {} of {} ground-truth rows ({} predictions)",
        y.len(),
        truth.len(),
        predictions.len()
    );
    if let Some(out_path) = &args.out {
        let mut outputs = Outputs::new();
        let out = outputs.file(out_path)?;
        write_json(&out, &report)?;
        let manifest = manifest.config(&(&args.dataset, method));
        let manifest = with_inputs(manifest, &[Some(&args.predictions), Some(&args.truth)]);
        finish(outputs, manifest, out_path)?;
    }
    Ok(())
}

fn compare_config(
    path: Option<&Path>,
    seed: Option<u64>,
    dataset: Option<String>,
    lambda: Option<f64>,
) -> Result<CompareConfig> {
    let mut cfg: CompareConfig = load_config(path)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(d) = dataset {
        cfg.dataset = d;
    }
    if let Some(l) = lambda {
        cfg.lambda = l;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct CompareReport<'a> {
    dataset: &'a str,
    lambda: f64,
    repeats: usize,
    seeds: Vec<u64>,
    reports: &'a [metrics::EvalReport],
}

fn compare(args: CompareArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("compare");
    let mut cfg = compare_config(args.config.as_deref(), args.seed, args.dataset, args.lambda)?;
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    cfg.validate()?;
    let train = load_data(&args.train, &args.csv, true)?;
    let test = load_data(&args.test, &args.csv, true)?;
    let result = experiment::compare(&train, &test, &cfg)?;
    let table = result.table();
    print!("{table}");

    let mut outputs = Outputs::new();
    let dir = outputs.dir(&args.out_dir)?;
    let report = CompareReport {
        dataset: &cfg.dataset,
        lambda: cfg.lambda,
        repeats: cfg.repeats,
        seeds: cfg.seeds().collect(),
        reports: &result.reports,
    };
    write_json(&outputs.file(dir.join("report.json"))?, &report)?;
    write_text(&outputs.file(dir.join("report.txt"))?, &table)?;
    write_csv_file(&mut outputs, &dir.join("per_seed.csv"), |w| {
        experiment::write_per_seed_csv(w, &result.per_seed)
    })?;
    write_csv_file(&mut outputs, &dir.join("series.csv"), |w| {
        experiment::write_series_csv(w, &result.series)
    })?;
    write_json(&outputs.file(dir.join("ef.json"))?, &result.ef)?;
    write_json(&outputs.file(dir.join("rpm.json"))?, &result.rpm_model)?;
    let manifest = manifest.config(&cfg).seeds(cfg.seeds());
    let manifest = with_inputs(
        manifest,
        &[Some(&args.train), Some(&args.test), args.config.as_deref()],
    );
    let path = outputs.file(dir.join("manifest.json"))?;
    manifest.write(&path, outputs.paths())?;
    outputs.commit();
    Ok(())
}

fn write_csv_file(
    outputs: &mut Outputs,
    path: &Path,
    write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> shaftpower::Result<()>,
) -> Result<()> {
    let path = outputs.file(path)?;
    let mut w = create(&path)?;
    write(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))
}

/// Aligned text table of a sweep, one row per lambda.
fn sweep_table(cells: &[nn::SweepCell]) -> String {
    let mut rows = vec![["lambda", "MAE", "RMSE", "R²", "MAPE"].map(String::from)];
    for c in cells {
        rows.push(match &c.report {
            Some(r) => [
                format!("{}", c.lambda),
                format!("{:.2}", r.mae.mean),
                format!("{:.2}", r.rmse.mean),
                format!("{:.4}", r.r2.mean),
                format!("{:.2}", r.mape.mean),
            ],
            None => [
                format!("{}", c.lambda),
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
            ],
        });
    }
    let widths: Vec<usize> = (0..5)
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn lambda_sweep(args: SweepArgs) -> Result<()> {
    let manifest = ManifestBuilder::new("lambda-sweep");
    let cfg = compare_config(args.config.as_deref(), args.seed, args.dataset, None)?;
    let grid = match args.grid {
        Some(g) => g,
        None => experiment::lambda_grid(0.05, 1.0, 0.05)?,
    };
    let train = load_data(&args.train, &args.csv, true)?;
    let test = load_data(&args.test, &args.csv, true)?;
    let cells = experiment::lambda_sweep(&train, &test, &grid, &cfg)?;
    let table = sweep_table(&cells);
    print!("{table}");
    for c in cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "lambda {} failed: {}",
            c.lambda,
            c.error.as_deref().unwrap_or("")
        );
    }
    let Some(best) = nn::best_lambda(&cells) else {
        return Err(usage("every lambda in the sweep failed"));
    };
    println!("best lambda by test MAPE: {best}");

    let mut outputs = Outputs::new();
    let dir = outputs.dir(&args.out_dir)?;
    write_csv_file(&mut outputs, &dir.join("sweep.csv"), |w| {
        experiment::write_sweep_csv(w, &cells)
    })?;
    write_json(&outputs.file(dir.join("sweep.json"))?, &cells)?;
    write_text(&outputs.file(dir.join("sweep.txt"))?, &table)?;
    let manifest = manifest.config(&(&cfg, &grid)).seeds([cfg.base_seed]);
    let manifest = with_inputs(
        manifest,
        &[Some(&args.train), Some(&args.test), args.config.as_deref()],
    );
    let path = outputs.file(dir.join("manifest.json"))?;
    manifest.write(&path, outputs.paths())?;
    outputs.commit();
    Ok(())
}
