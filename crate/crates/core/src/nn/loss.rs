//! Losses (value plus gradient) and evaluation metrics.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Mean cross-entropy of `logits` (batch x classes) against `labels`.
pub fn cross_entropy(logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (batch, classes) = logits.dim();
    if labels.len() != batch {
        return Err(Error::shape(format!("{batch} labels"), labels.len()));
    }
    let mut grad = Array2::zeros((batch, classes));
    let mut total = 0.0;
    for (r, (row, &label)) in logits.outer_iter().zip(labels).enumerate() {
        if label >= classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        total += log_z - row[label];
        for (c, v) in row.iter().enumerate() {
            grad[[r, c]] = (v - log_z).exp() / batch as f64;
        }
        grad[[r, label]] -= 1.0 / batch as f64;
    }
    Ok((total / batch as f64, grad))
}

/// Mean squared error over every element.
pub fn mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(format!("{:?}", target.dim()), format!("{:?}", pred.dim())));
    }
    let n = pred.len() as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// RMSE normalized by the target's standard deviation; a constant prediction
/// at the target mean scores 1.
pub fn nrmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape(format!("{} values", target.len()), pred.len()));
    }
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let spread = (target.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    let rmse = (pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n).sqrt();
    Ok(rmse / spread)
}

/// Fraction of rows whose argmax matches the label.
pub fn accuracy(logits: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let hits = logits
        .outer_iter()
        .zip(labels)
        .filter(|(row, &label)| {
            let best = row.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
            best.0 == label
        })
        .count();
    hits as f64 / labels.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_logits_cost_ln_classes() {
        let logits = Array2::zeros((3, 10));
        let (loss, grad) = cross_entropy(logits.view(), &[0, 4, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((grad.sum()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_is_stable_for_huge_logits() {
        let logits = array![[1e4, 0.0, -1e4]];
        let (loss, grad) = cross_entropy(logits.view(), &[0]).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (loss, _) = cross_entropy(logits.view(), &[2]).unwrap();
        assert!((loss - 2e4).abs() < 1e-6);
    }

    #[test]
    fn bad_label() {
        assert!(cross_entropy(Array2::zeros((1, 3)).view(), &[3]).is_err());
        assert!(cross_entropy(Array2::zeros((2, 3)).view(), &[0]).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let t = array![[0.5], [1.5], [-2.0]];
        let (loss, grad) = mse(t.view(), t.view()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
        let flat: Vec<f64> = t.iter().copied().collect();
        assert_eq!(nrmse(&flat, &flat).unwrap(), 0.0);
    }

    #[test]
    fn mean_predictor_scores_one() {
        let target = [1.0, 2.0, 4.0, 9.0];
        let mean = 4.0;
        assert!((nrmse(&[mean; 4], &target).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mse_gradient() {
        let (loss, grad) = mse(array![[1.0], [3.0]].view(), array![[0.0], [0.0]].view()).unwrap();
        assert_eq!(loss, 5.0);
        assert_eq!(grad, array![[1.0], [3.0]]);
    }

    #[test]
    fn accuracy_counts_argmax() {
        let logits = array![[0.1, 0.9], [0.8, 0.2], [0.3, 0.7]];
        assert!((accuracy(logits.view(), &[1, 0, 0]) - 2.0 / 3.0).abs() < 1e-12);
    }
}
