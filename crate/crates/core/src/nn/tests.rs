use super::*;
use crate::synth::{self, SynthConfig};
use rand::Rng;

fn small_arch() -> Architecture {
    Architecture {
        copernicus: vec![8, 4],
        sensor: vec![8, 4],
        external: vec![4, 2],
        trunk: vec![8, 4],
        dropout: 0.2,
    }
}

fn small_config() -> TrainConfig {
    TrainConfig {
        architecture: small_arch(),
        max_epochs: 30,
        ..TrainConfig::default()
    }
}

fn dataset(rows: usize, seed: u64) -> Dataset {
    synth::generate(&SynthConfig {
        row_count: rows,
        seed,
        noise_rel_std: 0.02,
        ..synth::drift_benchmark_config(seed)
    })
    .unwrap()
}

fn pipeline(with_ef: bool) -> Pipeline {
    Pipeline {
        rpm_model: synth::default_rpm_model(),
        ef: with_ef.then(synth::default_coefficients),
        groups: FeatureGroups::default(),
    }
}

/// Mean batch loss as a function of the parameters, with dropout masks
/// fixed by reseeding the mask generator on every evaluation.
fn batch_loss(
    model: &MlpModel,
    xs: &[Vec<f64>],
    t: &[f64],
    f: &[f64],
    lambda: f64,
    mask_seed: Option<u64>,
) -> f64 {
    let mut rng = mask_seed.map(ChaCha8Rng::seed_from_u64);
    let p = model
        .forward(&xs.concat(), rng.as_mut(), &mut Tape::default())
        .unwrap();
    composite_loss(&p, t, f, lambda).unwrap()
}

fn analytic(
    model: &MlpModel,
    xs: &[Vec<f64>],
    t: &[f64],
    f: &[f64],
    lambda: f64,
    mask_seed: Option<u64>,
) -> Vec<f64> {
    let mut rng = mask_seed.map(ChaCha8Rng::seed_from_u64);
    let mut tape = Tape::default();
    let p = model
        .forward(&xs.concat(), rng.as_mut(), &mut tape)
        .unwrap();
    let g: Vec<f64> = (0..xs.len())
        .map(|i| sample_loss_gradient(p[i], t[i], f[i], lambda) / xs.len() as f64)
        .collect();
    let mut grads = vec![0.0; model.param_count()];
    model.backward(&mut tape, &g, &mut grads).unwrap();
    grads
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 25 {
        let width = |rng: &mut ChaCha8Rng| rng.random_range(2..6usize);
        let arch = Architecture {
            copernicus: vec![width(&mut rng), width(&mut rng)],
            sensor: vec![width(&mut rng)],
            external: vec![width(&mut rng)],
            trunk: vec![width(&mut rng), width(&mut rng)],
            dropout: 0.2,
        };
        let dims = [
            rng.random_range(1..4),
            rng.random_range(1..4),
            rng.random_range(1..3),
        ];
        let mut model = MlpModel::init(arch, dims, &mut rng).unwrap();
        for b in model.params_mut() {
            *b += rng.random_range(-0.1..0.1);
        }
        let n = rng.random_range(1..6);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..model.input_width())
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect()
            })
            .collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = rng.random_range(0.0..2.0);
        let mask_seed = rng.random_bool(0.5).then(|| rng.random());
        // Stay away from kinks of the rectifiers and of |.|.
        let mut mrng = mask_seed.map(ChaCha8Rng::seed_from_u64);
        let p = model
            .forward(&xs.concat(), mrng.as_mut(), &mut Tape::default())
            .unwrap();
        let smooth = xs.iter().enumerate().all(|(i, x)| {
            model.kink_margin(x).unwrap() > 1e-3
                && (p[i] - t[i]).abs() > 1e-3
                && (p[i] - f[i]).abs() > 1e-3
        });
        if !smooth {
            continue;
        }
        let grads = analytic(&model, &xs, &t, &f, lambda, mask_seed);
        #[allow(clippy::needless_range_loop)] // params are perturbed in place by index
        for k in 0..model.param_count() {
            let orig = model.params()[k];
            model.params_mut()[k] = orig + h;
            let up = batch_loss(&model, &xs, &t, &f, lambda, mask_seed);
            model.params_mut()[k] = orig - h;
            let down = batch_loss(&model, &xs, &t, &f, lambda, mask_seed);
            model.params_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = grads[k].abs().max(numeric.abs());
            if scale > 0.0 {
                worst = worst.max((grads[k] - numeric).abs() / scale.max(1e-6));
            }
        }
        checked += 1;
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn training_is_deterministic() {
    let data = dataset(300, 1);
    let cfg = TrainConfig {
        lambda: 0.1,
        ..small_config()
    };
    let a = train(&data, &pipeline(true), &cfg).unwrap();
    let b = train(&data, &pipeline(true), &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(&data, &pipeline(true), &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn zero_lambda_equals_plain_baseline() {
    let data = dataset(300, 2);
    let cfg = small_config();
    let pgnn = train(&data, &pipeline(true), &cfg).unwrap();
    let nn = train(&data, &pipeline(false), &cfg).unwrap();
    assert_eq!(pgnn.model.params(), nn.model.params());
    assert_eq!(pgnn.history, nn.history);
    assert_eq!(
        pgnn.predict(&data.rows).unwrap(),
        nn.predict(&data.rows).unwrap()
    );
}

struct Injected(Vec<f64>);

impl EpochHook for Injected {
    fn monitor(&mut self, epoch: usize, _train: f64, _val: f64) -> f64 {
        self.0[epoch.min(self.0.len() - 1)]
    }
}

#[test]
fn early_stopping_restores_best_epoch() {
    let data = dataset(200, 3);
    let cfg = TrainConfig {
        lambda: 0.5,
        max_epochs: 100,
        ..small_config()
    };
    let mut seq = vec![1.0, 0.9, 0.8, 0.85, 0.7];
    seq.extend(std::iter::repeat_n(0.75, 50));
    let p = train_with_hook(&data, &pipeline(true), &cfg, &mut Injected(seq)).unwrap();
    assert_eq!(p.best_epoch, 4);
    assert_eq!(p.history.len(), 4 + cfg.patience + 1);
    assert!(p.stopped_early);
    let (_, val_idx) = validation_split(data.len(), &cfg).unwrap();
    let val: Vec<EnvironmentRecord> = val_idx.iter().map(|&i| data.rows[i].clone()).collect();
    let ef = synth::default_coefficients();
    let loss = p.loss(&val, Some(&ef), cfg.lambda).unwrap();
    assert_eq!(loss, p.history[4].val_loss);
    assert_ne!(loss, p.history.last().unwrap().val_loss);
}

#[test]
fn runs_to_max_epochs_without_stopping() {
    let data = dataset(200, 4);
    let cfg = TrainConfig {
        max_epochs: 5,
        ..small_config()
    };
    let seq = vec![5.0, 4.0, 3.0, 2.0, 1.0];
    let p = train_with_hook(&data, &pipeline(false), &cfg, &mut Injected(seq)).unwrap();
    assert_eq!(p.history.len(), 5);
    assert_eq!(p.best_epoch, 4);
    assert!(!p.stopped_early);
}

#[test]
fn predict_batch_equals_row_loop_and_round_trips() {
    let data = dataset(200, 5);
    let p = train(
        &data,
        &pipeline(true),
        &TrainConfig {
            lambda: 0.2,
            ..small_config()
        },
    )
    .unwrap();
    let batch = p.predict(&data.rows).unwrap();
    for (i, r) in data.rows.iter().enumerate().take(50) {
        assert_eq!(p.predict(std::slice::from_ref(r)).unwrap()[0], batch[i]);
    }
    assert_eq!(batch, predict(&p, &data.rows).unwrap());
    for r in &data.rows {
        let power = r.shaft_power.unwrap();
        let back = p
            .standardizer
            .denormalize_target(p.standardizer.normalize_target(power));
        assert!((back - power).abs() <= 1e-12 * power);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("predictor.json");
    p.save(&path).unwrap();
    let loaded = TrainedPredictor::load(&path).unwrap();
    assert_eq!(loaded, p);
    assert_eq!(loaded.predict(&data.rows).unwrap(), batch);
}

#[test]
fn config_errors() {
    let data = dataset(50, 6);
    let bad = |cfg: TrainConfig| train(&data, &pipeline(true), &cfg).unwrap_err();
    assert!(matches!(
        bad(TrainConfig {
            patience: 0,
            ..small_config()
        }),
        Error::Config(_)
    ));
    assert!(matches!(
        bad(TrainConfig {
            lambda: -1.0,
            ..small_config()
        }),
        Error::Config(_)
    ));
    assert!(matches!(
        bad(TrainConfig {
            validation_fraction: 1.0,
            ..small_config()
        }),
        Error::Config(_)
    ));
    assert!(matches!(
        train(
            &data,
            &pipeline(false),
            &TrainConfig {
                lambda: 0.1,
                ..small_config()
            }
        )
        .unwrap_err(),
        Error::Usage(_)
    ));
    let tiny = Dataset::new(data.rows[..2].to_vec());
    assert!(matches!(
        train(
            &tiny,
            &pipeline(true),
            &TrainConfig {
                validation_fraction: 0.1,
                ..small_config()
            }
        )
        .unwrap_err(),
        Error::Usage(_)
    ));
    let overlapping = Pipeline {
        groups: FeatureGroups {
            external: vec![Feature::SpeedThroughWater],
            ..FeatureGroups::default()
        },
        ..pipeline(true)
    };
    assert!(matches!(
        train(&data, &overlapping, &small_config()).unwrap_err(),
        Error::Config(_)
    ));
}

#[test]
fn divergence_is_reported() {
    let data = dataset(100, 7);
    let cfg = TrainConfig {
        learning_rate: 1e300,
        ..small_config()
    };
    assert!(matches!(
        train(&data, &pipeline(false), &cfg),
        Err(Error::Diverged(_))
    ));
}

#[test]
fn sin_cos_encoding_and_chronological_split() {
    let data = dataset(200, 8);
    let cfg = TrainConfig {
        direction_encoding: DirectionEncoding::SinCos,
        validation_split: ValidationSplit::Chronological,
        monitor: Monitor::DataOnly,
        lambda: 0.3,
        max_epochs: 3,
        ..small_config()
    };
    let p = train(&data, &pipeline(true), &cfg).unwrap();
    // Three copernicus directions become six columns.
    assert_eq!(p.model.input_dims(), [9, 5, 2]);
    assert_eq!(
        validation_split(200, &cfg).unwrap().1,
        (160..200).collect::<Vec<_>>()
    );
    assert!(p.predict(&data.rows).unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn history_csv_layout() {
    let history = vec![
        EpochRecord {
            epoch: 0,
            train_loss: 0.5,
            val_loss: 0.25,
            monitored: 0.25,
        },
        EpochRecord {
            epoch: 1,
            train_loss: 0.4,
            val_loss: 0.2,
            monitored: 0.2,
        },
    ];
    let mut buf = Vec::new();
    write_history_csv(&mut buf, &history).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_loss");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,5.0000000000000000e-1,"));
}

#[test]
fn sweep_cells_are_ordered_and_marked() {
    let train_set = dataset(200, 9);
    let test = dataset(80, 10);
    let cfg = TrainConfig {
        max_epochs: 3,
        ..small_config()
    };
    let cells = lambda_sweep(&train_set, &test, &[0.5, 0.0], &pipeline(true), &cfg, "s").unwrap();
    assert_eq!(
        cells.iter().map(|c| c.lambda).collect::<Vec<_>>(),
        vec![0.0, 0.5]
    );
    assert_eq!(cells[0].report.as_ref().unwrap().method, Method::Nn);
    let nn = train(&train_set, &pipeline(true), &cfg).unwrap();
    let pred = nn.predict(&test.rows).unwrap();
    let y = test.shaft_power().unwrap();
    assert_eq!(
        cells[0].report.as_ref().unwrap().mape.mean,
        crate::metrics::mape(&y, &pred).unwrap()
    );
    let best = best_lambda(&cells).unwrap();
    let min = cells
        .iter()
        .map(|c| c.report.as_ref().unwrap().mape.mean)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(
        cells
            .iter()
            .find(|c| c.lambda == best)
            .unwrap()
            .report
            .as_ref()
            .unwrap()
            .mape
            .mean,
        min
    );

    // A failing cell does not abort the sweep.
    let cells = lambda_sweep(&train_set, &test, &[0.0, 0.5], &pipeline(false), &cfg, "s").unwrap();
    assert!(cells[0].report.is_some());
    assert!(cells[1].error.is_some() && cells[1].report.is_none());
    assert!(lambda_sweep(&train_set, &test, &[], &pipeline(true), &cfg, "s").is_err());
}
