//! Fitting the resistance coefficients to measured shaft power (the EF baseline).
//!
//! The objective is the mean squared error between the physical power and the
//! measured shaft power. It is minimized by full-batch Adam over a
//! reparameterization that keeps the coefficients admissible:
//!
//! - `c = s_c * softplus(u_c)` and `f_g = s_g * softplus(u_g)` stay positive,
//! - `f_c = sigmoid(u_fc)` stays in `(0, 1)`,
//! - `a`, `b`, `f_h`, `f_s` are linear in their raw parameters.
//!
//! The scales `s_*` come from each restart's starting point, so every raw
//! parameter starts at order one. Each restart draws `(a, b, f_c)` and solves
//! the remaining four coefficients, which enter the power linearly, by least
//! squares before Adam refines all seven jointly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{
    air_density, physical_power, wave_direction_factor, EnvironmentRecord, ResistanceCoefficients,
    DEFAULT_WAVE_EXPONENT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfFitConfig {
    pub max_iterations: usize,
    pub learning_rate: f64,
    /// Relative MSE improvement over `convergence_window` iterations below which a run stops.
    pub convergence_tol: f64,
    pub convergence_window: usize,
    pub multistart_count: usize,
    pub seed: u64,
    pub gamma: f64,
    pub water_density: f64,
}

impl Default for EfFitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            learning_rate: 0.02,
            convergence_tol: 1e-10,
            convergence_window: 20,
            multistart_count: 8,
            seed: 0,
            gamma: DEFAULT_WAVE_EXPONENT,
            water_density: 1.0,
        }
    }
}

impl EfFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.multistart_count == 0 {
            return Err(Error::Config("multistart_count must be >= 1".into()));
        }
        if self.convergence_window == 0 {
            return Err(Error::Config("convergence_window must be >= 1".into()));
        }
        if !(self.gamma > 0.0) || !(self.water_density > 0.0) {
            return Err(Error::Config("gamma and water_density must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfFitResult {
    pub coefficients: ResistanceCoefficients,
    /// Mean squared error on the training rows, kW².
    pub train_mse: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Per-row quantities that do not depend on the coefficients.
struct Row {
    speed: f64,
    draught: f64,
    /// `rho * v_wind^2 * cos(d_wind)`.
    wind: f64,
    cos_abs: f64,
    sin_abs: f64,
    /// `h^gamma * d_water * (0.667 + 0.333 cos(d_wave))`.
    wave: f64,
    target: f64,
}

fn prepare(train: &[EnvironmentRecord], config: &EfFitConfig) -> Result<Vec<Row>> {
    train
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let at = |e: Error| e.at_row(i);
            let target = r
                .shaft_power
                .filter(|p| p.is_finite())
                .ok_or_else(|| at(Error::Schema("shaft_power missing".into())))?;
            if !(r.speed_through_water > 0.0) {
                return Err(at(Error::Domain(format!(
                    "speed_through_water must be > 0, got {}",
                    r.speed_through_water
                ))));
            }
            if !(r.wave_height >= 0.0) || !(r.wind_speed >= 0.0) {
                return Err(at(Error::Domain(
                    "negative wave height or wind speed".into(),
                )));
            }
            let rho = air_density(r.air_temp).map_err(at)?;
            Ok(Row {
                speed: r.speed_through_water,
                draught: r.draught,
                wind: rho * r.wind_speed * r.wind_speed * r.wind_dir.cos(),
                cos_abs: r.wind_dir.cos().abs(),
                sin_abs: r.wind_dir.sin().abs(),
                wave: r.wave_height.powf(config.gamma)
                    * config.water_density
                    * wave_direction_factor(r.wave_dir),
                target,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Coeffs {
    a: f64,
    b: f64,
    c: f64,
    f_c: f64,
    f_h: f64,
    f_s: f64,
    f_g: f64,
}

impl Coeffs {
    fn power(&self, r: &Row) -> f64 {
        let bv = self.b + r.speed;
        self.c * (self.a + r.draught) * bv * bv * bv
            + r.speed
                * r.wind
                * (self.f_h * (self.f_c + (1.0 - self.f_c) * r.cos_abs)
                    + self.f_s * (1.0 - self.f_c) * r.sin_abs)
            + self.f_g * r.speed * r.wave
    }

    /// Power and its partial derivatives in the order `a, b, c, f_c, f_h, f_s, f_g`.
    fn power_grad(&self, r: &Row) -> (f64, [f64; 7]) {
        let bv = self.b + r.speed;
        let bv2 = bv * bv;
        let at = self.a + r.draught;
        let vw = r.speed * r.wind;
        let head = self.f_c + (1.0 - self.f_c) * r.cos_abs;
        let side = (1.0 - self.f_c) * r.sin_abs;
        let p = self.c * at * bv2 * bv
            + vw * (self.f_h * head + self.f_s * side)
            + self.f_g * r.speed * r.wave;
        (
            p,
            [
                self.c * bv2 * bv,
                3.0 * self.c * at * bv2,
                at * bv2 * bv,
                vw * (self.f_h * (1.0 - r.cos_abs) - self.f_s * r.sin_abs),
                vw * head,
                vw * side,
                r.speed * r.wave,
            ],
        )
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Raw unconstrained parameters and the fixed per-restart scales.
#[derive(Debug, Clone)]
struct Reparam {
    scale: [f64; 7],
}

impl Reparam {
    fn to_coeffs(&self, u: &[f64; 7]) -> Coeffs {
        let s = &self.scale;
        Coeffs {
            a: s[0] * u[0],
            b: s[1] * u[1],
            c: s[2] * softplus(u[2]),
            f_c: sigmoid(u[3]),
            f_h: s[4] * u[4],
            f_s: s[5] * u[5],
            f_g: s[6] * softplus(u[6]),
        }
    }

    /// d(coefficient)/d(raw) for each parameter.
    fn jacobian(&self, u: &[f64; 7]) -> [f64; 7] {
        let s = &self.scale;
        let fc = sigmoid(u[3]);
        [
            s[0],
            s[1],
            s[2] * sigmoid(u[2]),
            fc * (1.0 - fc),
            s[4],
            s[5],
            s[6] * sigmoid(u[6]),
        ]
    }

    /// Raw parameters reproducing `k`, with scales chosen so they start near one.
    fn around(k: &Coeffs, floors: &[f64; 7]) -> (Self, [f64; 7]) {
        let mag = |v: f64, floor: f64| v.abs().max(floor);
        let scale = [
            mag(k.a, floors[0]),
            mag(k.b, floors[1]),
            mag(k.c, floors[2]),
            1.0,
            mag(k.f_h, floors[4]),
            mag(k.f_s, floors[5]),
            mag(k.f_g, floors[6]),
        ];
        let f_c = k.f_c.clamp(1e-6, 1.0 - 1e-6);
        let u = [
            k.a / scale[0],
            k.b / scale[1],
            softplus_inv(k.c.max(floors[2] * 1e-3) / scale[2]),
            (f_c / (1.0 - f_c)).ln(),
            k.f_h / scale[4],
            k.f_s / scale[5],
            softplus_inv(k.f_g.max(floors[6] * 1e-3) / scale[6]),
        ];
        (Self { scale }, u)
    }
}

struct Objective<'a> {
    rows: &'a [Row],
    /// Mean squared target; the optimizer sees MSE divided by this.
    norm: f64,
}

impl Objective<'_> {
    fn mse(&self, k: &Coeffs) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let e = k.power(r) - r.target;
                e * e
            })
            .sum::<f64>()
            / self.rows.len() as f64
    }

    fn mse_grad(&self, k: &Coeffs) -> (f64, [f64; 7]) {
        let mut loss = 0.0;
        let mut grad = [0.0; 7];
        for r in self.rows {
            let (p, dp) = k.power_grad(r);
            let e = p - r.target;
            loss += e * e;
            for (g, d) in grad.iter_mut().zip(dp) {
                *g += 2.0 * e * d;
            }
        }
        let n = self.rows.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }
}

/// Least-squares solution for `(c, f_h, f_s, f_g)` given `(a, b, f_c)`.
fn linear_start(rows: &[Row], a: f64, b: f64, f_c: f64) -> [f64; 4] {
    let design = DMatrix::from_fn(rows.len(), 4, |i, j| {
        let r = &rows[i];
        match j {
            0 => (a + r.draught) * (b + r.speed).powi(3),
            1 => r.speed * r.wind * (f_c + (1.0 - f_c) * r.cos_abs),
            2 => r.speed * r.wind * (1.0 - f_c) * r.sin_abs,
            _ => r.speed * r.wave,
        }
    });
    // Column scaling keeps the normal equations well conditioned.
    let norms: Vec<f64> = (0..4)
        .map(|j| {
            let n = design.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(rows.len(), 4, |i, j| design[(i, j)] / norms[j]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.target));
    let w = scaled
        .svd(true, true)
        .solve(&y, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(4));
    [
        w[0] / norms[0],
        w[1] / norms[1],
        w[2] / norms[2],
        w[3] / norms[3],
    ]
}

struct RunOutcome {
    coeffs: Coeffs,
    mse: f64,
    iterations: usize,
    converged: bool,
}

fn run_restart(
    objective: &Objective<'_>,
    start: Coeffs,
    floors: &[f64; 7],
    config: &EfFitConfig,
) -> Option<RunOutcome> {
    let (reparam, mut u) = Reparam::around(&start, floors);
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = [0.0; 7];
    let mut v = [0.0; 7];

    let initial = reparam.to_coeffs(&u);
    let mut best = (objective.mse(&initial), initial);
    if !best.0.is_finite() {
        return None;
    }
    let mut window: Vec<f64> = Vec::with_capacity(config.max_iterations);
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=config.max_iterations {
        iterations = t;
        let k = reparam.to_coeffs(&u);
        let (loss, grad_k) = objective.mse_grad(&k);
        if !loss.is_finite() {
            return None;
        }
        if loss < best.0 {
            best = (loss, k);
        }
        window.push(loss);
        if loss == 0.0 {
            converged = true;
            break;
        }
        if t > config.convergence_window {
            let old = window[t - 1 - config.convergence_window];
            if (old - loss) / old < config.convergence_tol {
                converged = true;
                break;
            }
        }
        let jac = reparam.jacobian(&u);
        // Learning rate decays geometrically by 100x over the iteration budget.
        let lr = config.learning_rate * 0.01f64.powf(t as f64 / config.max_iterations as f64);
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        for i in 0..7 {
            let g = grad_k[i] * jac[i] / objective.norm;
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            u[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
        }
    }
    let last = reparam.to_coeffs(&u);
    let last_mse = objective.mse(&last);
    if last_mse.is_finite() && last_mse < best.0 {
        best = (last_mse, last);
    }
    Some(RunOutcome {
        coeffs: best.1,
        mse: best.0,
        iterations,
        converged,
    })
}

/// Fits the seven resistance coefficients by multistart Adam on the training MSE.
///
/// Deterministic for a given `(train, config)`. Each restart `i` draws its
/// starting point from its own stream of the seeded generator.
pub fn fit_ef(train: &[EnvironmentRecord], config: &EfFitConfig) -> Result<EfFitResult> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Usage("cannot fit EF coefficients on no rows".into()));
    }
    let rows = prepare(train, config)?;
    let n = rows.len() as f64;
    let norm = rows.iter().map(|r| r.target * r.target).sum::<f64>() / n;
    let norm = if norm > 0.0 { norm } else { 1.0 };
    let objective = Objective { rows: &rows, norm };

    let mean = |f: fn(&Row) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean_target = mean(|r| r.target.abs()).max(1e-12);
    let (t_min, t_max) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.draught), hi.max(r.draught))
        });
    let (v_min, v_max) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.speed), hi.max(r.speed))
        });
    let ratio = |denominator: f64| {
        if denominator > 0.0 {
            mean_target / denominator
        } else {
            1.0
        }
    };
    let floors = [
        1.0,
        1.0,
        1e-3 * ratio(mean(|r| r.draught * r.speed.powi(3))),
        1.0,
        1e-3 * ratio(mean(|r| (r.speed * r.wind).abs())),
        1e-3 * ratio(mean(|r| (r.speed * r.wind).abs())),
        1e-3 * ratio(mean(|r| r.speed * r.wave)),
    ];

    let mut best: Option<(RunOutcome, usize)> = None;
    for restart in 0..config.multistart_count {
        let (a, b, f_c) = if restart == 0 {
            (0.0, 0.0, 0.5)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(restart as u64);
            (
                rng.random_range(-0.5 * t_min..=t_max),
                rng.random_range(-0.5 * v_min..=v_max),
                rng.random_range(0.05..0.95),
            )
        };
        let [c, f_h, f_s, f_g] = linear_start(&rows, a, b, f_c);
        let start = Coeffs {
            a,
            b,
            c: if c > 0.0 { c } else { floors[2] },
            f_c,
            f_h,
            f_s,
            f_g: f_g.max(0.0),
        };
        let Some(outcome) = run_restart(&objective, start, &floors, config) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((b, _)) => outcome.mse < b.mse,
        };
        if better {
            best = Some((outcome, restart));
        }
    }

    let (outcome, restart) = best.ok_or_else(|| {
        Error::Diverged(format!(
            "all {} EF restarts produced a non-finite loss",
            config.multistart_count
        ))
    })?;
    let k = outcome.coeffs;
    let coefficients = ResistanceCoefficients::new(
        k.a,
        k.b,
        k.c,
        k.f_c.clamp(0.0, 1.0),
        k.f_h,
        k.f_s,
        k.f_g.max(0.0),
    )?
    .with_gamma(config.gamma)?
    .with_water_density(config.water_density)?;
    Ok(EfFitResult {
        coefficients,
        train_mse: outcome.mse,
        iterations_used: outcome.iterations,
        converged: outcome.converged,
        restart,
    })
}

/// Physical power for each record.
pub fn predict_ef(
    coeffs: &ResistanceCoefficients,
    records: &[EnvironmentRecord],
) -> Result<Vec<f64>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            physical_power(coeffs, r)
                .map(|b| b.total_power)
                .map_err(|e| e.at_row(i))
        })
        .collect()
}

/// Measured minus predicted power for each record.
pub fn ef_residuals(
    coeffs: &ResistanceCoefficients,
    records: &[EnvironmentRecord],
) -> Result<Vec<f64>> {
    let predicted = predict_ef(coeffs, records)?;
    records
        .iter()
        .zip(predicted)
        .enumerate()
        .map(|(i, (r, p))| {
            r.shaft_power
                .map(|m| m - p)
                .ok_or_else(|| Error::Schema("shaft_power missing".into()).at_row(i))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::test_support::record;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn truth() -> ResistanceCoefficients {
        ResistanceCoefficients::new(1.0, 2.0, 0.2, 0.4, 0.6, 0.8, 10.0).unwrap()
    }

    fn sample(
        n: usize,
        seed: u64,
        coeffs: &ResistanceCoefficients,
        noise: f64,
    ) -> Vec<EnvironmentRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = Normal::new(0.0, noise.max(1e-300)).unwrap();
        (0..n)
            .map(|_| {
                let mut r = record(rng.random_range(8.0..18.0), rng.random_range(7.0..13.0));
                r.air_temp = rng.random_range(-5.0..30.0);
                r.wind_speed = rng.random_range(0.0..20.0);
                r.wind_dir = rng.random_range(-PI..PI);
                r.wave_height = rng.random_range(0.0..5.0);
                r.wave_dir = rng.random_range(-PI..PI);
                let p = physical_power(coeffs, &r).unwrap().total_power;
                let e = if noise > 0.0 {
                    eps.sample(&mut rng)
                } else {
                    0.0
                };
                r.shaft_power = Some(p * (1.0 + e));
                r
            })
            .collect()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let rows = prepare(&sample(50, 1, &truth(), 0.0), &EfFitConfig::default()).unwrap();
        let k = Coeffs {
            a: 0.3,
            b: 1.1,
            c: 0.15,
            f_c: 0.3,
            f_h: 0.9,
            f_s: 0.5,
            f_g: 7.0,
        };
        for r in &rows {
            let (_, g) = k.power_grad(r);
            let params = [k.a, k.b, k.c, k.f_c, k.f_h, k.f_s, k.f_g];
            for i in 0..7 {
                let h = 1e-6 * params[i].abs().max(1.0);
                let mut plus = params;
                let mut minus = params;
                plus[i] += h;
                minus[i] -= h;
                let mk = |p: [f64; 7]| Coeffs {
                    a: p[0],
                    b: p[1],
                    c: p[2],
                    f_c: p[3],
                    f_h: p[4],
                    f_s: p[5],
                    f_g: p[6],
                };
                let fd = (mk(plus).power(r) - mk(minus).power(r)) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()),
                    "param {i}: {fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn power_kernel_agrees_with_physics() {
        let t = truth();
        let train = sample(20, 2, &t, 0.0);
        let rows = prepare(&train, &EfFitConfig::default()).unwrap();
        let [a, b, c, f_c, f_h, f_s, f_g] = t.learnable();
        let k = Coeffs {
            a,
            b,
            c,
            f_c,
            f_h,
            f_s,
            f_g,
        };
        for (row, rec) in rows.iter().zip(&train) {
            let p = physical_power(&t, rec).unwrap().total_power;
            assert!((k.power(row) - p).abs() <= 1e-10 * p.abs());
        }
    }

    #[test]
    fn recovers_noise_free_power() {
        let t = truth();
        let train = sample(3000, 3, &t, 0.0);
        let test = sample(1000, 4, &t, 0.0);
        let fit = fit_ef(&train, &EfFitConfig::default()).unwrap();
        let pred = predict_ef(&fit.coefficients, &test).unwrap();
        let y: Vec<f64> = test.iter().map(|r| r.shaft_power.unwrap()).collect();
        let mape = crate::metrics::mape(&y, &pred).unwrap();
        assert!(mape < 0.5, "held-out MAPE {mape}");
    }

    #[test]
    fn single_record_is_interpolated() {
        let train = sample(1, 5, &truth(), 0.0);
        let fit = fit_ef(&train, &EfFitConfig::default()).unwrap();
        let res = ef_residuals(&fit.coefficients, &train).unwrap();
        let p = train[0].shaft_power.unwrap();
        assert!(res[0].abs() < 1e-6 * p, "residual {}", res[0]);
    }

    #[test]
    fn deterministic_and_constrained() {
        let train = sample(500, 6, &truth(), 0.03);
        let cfg = EfFitConfig {
            max_iterations: 800,
            multistart_count: 3,
            seed: 17,
            ..EfFitConfig::default()
        };
        let a = fit_ef(&train, &cfg).unwrap();
        let b = fit_ef(&train, &cfg).unwrap();
        assert_eq!(a, b);
        let k = a.coefficients;
        assert!(k.c() > 0.0 && k.f_g() >= 0.0 && (0.0..=1.0).contains(&k.f_c()));
        assert!(a.train_mse >= 0.0);
    }

    #[test]
    fn fit_never_ends_worse_than_its_start() {
        let train = sample(300, 7, &truth(), 0.05);
        let cfg = EfFitConfig {
            max_iterations: 50,
            multistart_count: 1,
            ..EfFitConfig::default()
        };
        let rows = prepare(&train, &cfg).unwrap();
        let [c, f_h, f_s, f_g] = linear_start(&rows, 0.0, 0.0, 0.5);
        let start = Coeffs {
            a: 0.0,
            b: 0.0,
            c,
            f_c: 0.5,
            f_h,
            f_s,
            f_g: f_g.max(0.0),
        };
        let norm = rows.iter().map(|r| r.target * r.target).sum::<f64>() / rows.len() as f64;
        let objective = Objective { rows: &rows, norm };
        let fit = fit_ef(&train, &cfg).unwrap();
        assert!(fit.train_mse <= objective.mse(&start));
    }

    #[test]
    fn input_errors() {
        let cfg = EfFitConfig::default();
        assert!(matches!(fit_ef(&[], &cfg), Err(Error::Usage(_))));
        let mut train = sample(5, 8, &truth(), 0.0);
        train[2].shaft_power = None;
        assert!(matches!(
            fit_ef(&train, &cfg),
            Err(Error::Row { row: 2, .. })
        ));
        let bad = EfFitConfig {
            multistart_count: 0,
            ..cfg
        };
        assert!(matches!(
            fit_ef(&sample(5, 8, &truth(), 0.0), &bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn predict_and_residuals() {
        let t = truth();
        assert!(predict_ef(&t, &[]).unwrap().is_empty());
        let recs = sample(100, 9, &t, 0.0);
        let batch = predict_ef(&t, &recs).unwrap();
        for (r, p) in recs.iter().zip(&batch) {
            assert_eq!(*p, physical_power(&t, r).unwrap().total_power);
        }
        let res = ef_residuals(&t, &recs).unwrap();
        assert!(res.iter().all(|e| *e == 0.0));
        let shifted: Vec<_> = recs
            .iter()
            .zip(&batch)
            .map(|(r, p)| {
                let mut r = r.clone();
                r.shaft_power = Some(p + 5.0);
                r
            })
            .collect();
        for e in ef_residuals(&t, &shifted).unwrap() {
            assert!((e - 5.0).abs() < 1e-9);
        }
        let mut bad = recs[..3].to_vec();
        bad[1].speed_through_water = 0.0;
        assert!(matches!(
            predict_ef(&t, &bad),
            Err(Error::Row { row: 1, .. })
        ));
    }
}
