use ndarray::{Array1, Array2, ArrayView2, Axis};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-feature batch normalization over all rows (batch x time samples).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BatchNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Array1::ones(features),
            beta: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub(crate) fn forward_train(&mut self, x: ArrayView2<f64>) -> (Array2<f64>, BatchNormCache) {
        let rows = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("batch norm needs at least one row");
        let centered = &x - &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / rows;
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let normalized = &centered * &inv_std;
        let y = &normalized * &self.gamma + &self.beta;

        let unbiased = if rows > 1.0 {
            &var * (rows / (rows - 1.0))
        } else {
            var.clone()
        };
        self.running_mean = &self.running_mean * (1.0 - BN_MOMENTUM) + &mean * BN_MOMENTUM;
        self.running_var = &self.running_var * (1.0 - BN_MOMENTUM) + &unbiased * BN_MOMENTUM;
        (y, BatchNormCache { normalized, inv_std })
    }

    pub(crate) fn forward_eval(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        (&x - &self.running_mean) * &inv_std * &self.gamma + &self.beta
    }

    /// Returns `(grad_x, grad_gamma, grad_beta)`.
    pub(crate) fn backward(
        &self,
        cache: &BatchNormCache,
        grad_y: ArrayView2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
        let rows = grad_y.nrows() as f64;
        let grad_beta = grad_y.sum_axis(Axis(0));
        let grad_gamma = (&grad_y * &cache.normalized).sum_axis(Axis(0));
        let grad_norm = &grad_y * &self.gamma;
        let sum = grad_norm.sum_axis(Axis(0));
        let dot = (&grad_norm * &cache.normalized).sum_axis(Axis(0));
        let grad_x = (&grad_norm * rows - &sum - &cache.normalized * &dot) * &(&cache.inv_std / rows);
        (grad_x, grad_gamma, grad_beta)
    }
}
