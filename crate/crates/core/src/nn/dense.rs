use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

/// Fully connected layer `y = x W^T + b`, weight stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, zero biases.
    pub fn init_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..bound));
        Self {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight.t());
        y += &self.bias;
        y
    }

    /// Parameter gradients and, if asked, the gradient with respect to `x`.
    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        grad_y: ArrayView2<f64>,
        want_input_grad: bool,
    ) -> (DenseGrad, Option<Array2<f64>>) {
        let grad = DenseGrad {
            weight: grad_y.t().dot(&x),
            bias: grad_y.sum_axis(Axis(0)),
        };
        let grad_x = want_input_grad.then(|| grad_y.dot(&self.weight));
        (grad, grad_x)
    }
}
