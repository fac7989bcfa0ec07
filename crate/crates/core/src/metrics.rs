//! Regression metrics and aggregation of seeded repeats.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest `|y|` accepted by [`mape`].
pub const MAPE_GUARD: f64 = 1e-9;

fn check_lengths(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Usage("metrics need at least one value".into()));
    }
    if y.len() != y_hat.len() {
        return Err(Error::Usage(format!(
            "length mismatch: {} actual vs {} predicted",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let sum: f64 = y.iter().zip(y_hat).map(|(a, p)| (a - p).abs()).sum();
    Ok(sum / y.len() as f64)
}

/// Root mean squared error.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let sum: f64 = y.iter().zip(y_hat).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok((sum / y.len() as f64).sqrt())
}

/// Mean absolute percentage error, in percent.
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let mut sum = 0.0;
    for (i, (a, p)) in y.iter().zip(y_hat).enumerate() {
        if !(a.abs() >= MAPE_GUARD) {
            return Err(Error::Domain(format!(
                "MAPE undefined: |y[{i}]| = {} below {MAPE_GUARD}",
                a.abs()
            )));
        }
        sum += ((a - p) / a).abs();
    }
    Ok(sum / y.len() as f64 * 100.0)
}

/// Coefficient of determination. Negative when worse than predicting the mean.
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Domain("R² undefined for constant targets".into()));
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// All four metrics for one prediction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub r2: f64,
}

impl MetricSet {
    pub fn evaluate(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        Ok(Self {
            mae: mae(y, y_hat)?,
            rmse: rmse(y, y_hat)?,
            mape: mape(y, y_hat)?,
            r2: r2(y, y_hat)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "EF")]
    Ef,
    #[serde(rename = "NN")]
    Nn,
    #[serde(rename = "PGNN")]
    Pgnn,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ef => "EF",
            Method::Nn => "NN",
            Method::Pgnn => "PGNN",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Usage("cannot aggregate zero repeats".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Ok(Self { mean, std })
    }
}

/// Mean ± std of every metric over seeded repeats of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub method: Method,
    pub repeat_count: usize,
    /// Always `"sample"`: standard deviations use the `n - 1` denominator.
    pub std_kind: String,
    /// Set when `repeat_count == 1` and the stds are therefore 0 by definition.
    pub single_repeat: bool,
    pub mae: MeanStd,
    pub rmse: MeanStd,
    pub mape: MeanStd,
    pub r2: MeanStd,
}

/// Aggregates per-repeat metrics into a report. Repeat order does not matter.
pub fn aggregate(dataset: &str, method: Method, repeats: &[MetricSet]) -> Result<EvalReport> {
    let column = |f: fn(&MetricSet) -> f64| repeats.iter().map(f).collect::<Vec<_>>();
    Ok(EvalReport {
        dataset: dataset.to_string(),
        method,
        repeat_count: repeats.len(),
        std_kind: "sample".into(),
        single_repeat: repeats.len() == 1,
        mae: MeanStd::of(&column(|m| m.mae))?,
        rmse: MeanStd::of(&column(|m| m.rmse))?,
        mape: MeanStd::of(&column(|m| m.mape))?,
        r2: MeanStd::of(&column(|m| m.r2))?,
    })
}

/// Aligned text table in the column order Vessel / Method / MAE / RMSE / R² / MAPE.
pub fn render_table(reports: &[EvalReport]) -> String {
    let header = ["Vessel", "Method", "MAE", "RMSE", "R²", "MAPE"];
    let mut rows: Vec<[String; 6]> = vec![header.map(String::from)];
    for r in reports {
        let cell =
            |m: MeanStd, digits: usize| format!("{:.*} ± {:.*}", digits, m.mean, digits, m.std);
        rows.push([
            r.dataset.clone(),
            r.method.to_string(),
            cell(r.mae, 2),
            cell(r.rmse, 2),
            cell(r.r2, 4),
            cell(r.mape, 2),
        ]);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
