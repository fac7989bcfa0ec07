//! Data loss plus a weighted disagreement with the physics estimate, both in
//! normalized target space:
//!
//! ```text
//! loss = mean|pred - target| + lambda * mean|pred - physics|
//! ```

use crate::error::{Error, Result};

fn check(predictions: &[f64], targets: &[f64], physics: &[f64], lambda: f64) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::Usage("loss of an empty batch".into()));
    }
    if predictions.len() != targets.len() || predictions.len() != physics.len() {
        return Err(Error::Usage(format!(
            "loss inputs differ in length: {} predictions, {} targets, {} physics targets",
            predictions.len(),
            targets.len(),
            physics.len()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Usage(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// `(mean|pred - target|, mean|pred - physics|)`.
pub fn loss_terms(predictions: &[f64], targets: &[f64], physics: &[f64]) -> Result<(f64, f64)> {
    check(predictions, targets, physics, 0.0)?;
    let n = predictions.len() as f64;
    let mut data = 0.0;
    let mut phys = 0.0;
    for ((p, t), f) in predictions.iter().zip(targets).zip(physics) {
        data += (p - t).abs();
        phys += (p - f).abs();
    }
    Ok((data / n, phys / n))
}

pub fn composite_loss(
    predictions: &[f64],
    targets: &[f64],
    physics: &[f64],
    lambda: f64,
) -> Result<f64> {
    check(predictions, targets, physics, lambda)?;
    let (data, phys) = loss_terms(predictions, targets, physics)?;
    Ok(data + lambda * phys)
}

/// Derivative of the per-sample loss term `|p - t| + lambda |p - f|` with
/// respect to `p`; the subgradient of `|.|` at zero is taken as zero.
#[inline]
pub fn sample_loss_gradient(prediction: f64, target: f64, physics: f64, lambda: f64) -> f64 {
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    sign(prediction - target) + lambda * sign(prediction - physics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            composite_loss(&[0.5], &[0.3], &[0.1], 0.5).unwrap(),
            0.2 + 0.5 * 0.4
        );
        assert!((composite_loss(&[0.5], &[0.3], &[0.1], 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(
            composite_loss(&[0.2, 0.7], &[0.2, 0.7], &[0.2, 0.7], 3.0).unwrap(),
            0.0
        );
        let p = [0.1, 0.4, 0.9];
        let t = [0.2, 0.2, 1.0];
        let mae = (0.1 + 0.2 + 0.1) / 3.0;
        assert!((composite_loss(&p, &t, &[5.0; 3], 0.0).unwrap() - mae).abs() < 1e-15);
    }

    #[test]
    fn usage_errors() {
        assert!(matches!(
            composite_loss(&[], &[], &[], 0.0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            composite_loss(&[1.0], &[1.0, 2.0], &[1.0], 0.0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            composite_loss(&[1.0], &[1.0], &[1.0], -1.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn gradient_signs() {
        assert_eq!(sample_loss_gradient(0.5, 0.3, 0.1, 0.5), 1.5);
        assert_eq!(sample_loss_gradient(0.5, 0.5, 0.9, 2.0), -2.0);
        assert_eq!(sample_loss_gradient(0.5, 0.5, 0.5, 2.0), 0.0);
    }

    proptest! {
        #[test]
        fn decomposes_into_data_and_physics_terms(
            rows in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..40),
            lambda in 0.0f64..100.0,
        ) {
            let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let t: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let f: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let (_, phys) = loss_terms(&p, &t, &f).unwrap();
            let full = composite_loss(&p, &t, &f, lambda).unwrap();
            let base = composite_loss(&p, &t, &f, 0.0).unwrap();
            prop_assert_eq!(full, base + lambda * phys);
        }
    }
}
