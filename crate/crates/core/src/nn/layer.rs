use std::sync::Arc;

use ndarray::{s, Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::batch_norm::{BatchNorm, BatchNormCache};
use super::dense::{Dense, DenseGrad};
use crate::error::{Error, Result};
use crate::filterbank::{build_kernels, geometric_taus, FilterBank, FilterSpec};
use crate::sith::{convolve_all, convolve_last, correlate_all, correlate_last, Signal};

/// Hyperparameters of one layer; `k` is already resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_taus: usize,
    pub k: u32,
    pub hidden: usize,
    #[serde(default)]
    pub batch_norm: bool,
}

impl LayerConfig {
    pub fn build_bank(&self) -> Result<FilterBank> {
        let grid = geometric_taus(self.tau_min, self.tau_max, self.n_taus)?;
        build_kernels(FilterSpec::new(grid, self.k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Which timesteps a layer has to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Span {
    All,
    Last,
}

/// Filter bank, then dense + ReLU, then optional batch norm and dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepSithLayer {
    pub bank: Arc<FilterBank>,
    pub dense: Dense,
    pub batch_norm: Option<BatchNorm>,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    span: Span,
    batch: usize,
    steps: usize,
    memory: Array2<f64>,
    pre_activation: Array2<f64>,
    batch_norm: Option<BatchNormCache>,
    dropout_mask: Option<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub dense: DenseGrad,
    /// `(gamma, beta)` gradients when batch norm is enabled.
    pub batch_norm: Option<(ndarray::Array1<f64>, ndarray::Array1<f64>)>,
}

impl DeepSithLayer {
    pub fn new(bank: Arc<FilterBank>, dense: Dense, batch_norm: bool, dropout: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        if !dense.inputs().is_multiple_of(bank.num_taus()) {
            return Err(Error::shape(
                format!("a multiple of {} dense inputs", bank.num_taus()),
                dense.inputs(),
            ));
        }
        let hidden = dense.outputs();
        Ok(Self {
            bank,
            dense,
            batch_norm: batch_norm.then(|| BatchNorm::new(hidden)),
            dropout,
        })
    }

    pub fn input_features(&self) -> usize {
        self.dense.inputs() / self.bank.num_taus()
    }

    pub fn hidden(&self) -> usize {
        self.dense.outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.dense.parameter_count() + self.batch_norm.as_ref().map_or(0, BatchNorm::parameter_count)
    }

    /// Single-series forward; batch norm (if any) uses this series' timesteps
    /// as its batch.
    pub fn forward_signal<R: Rng + ?Sized>(&mut self, signal: &Signal, mode: Mode, rng: &mut R) -> Result<Signal> {
        let input = signal.data().clone().insert_axis(Axis(0));
        let out = match mode {
            Mode::Train => self.forward_train(&input, Span::All, rng)?.0,
            Mode::Eval => self.forward_eval(&input, Span::All)?,
        };
        Signal::new(out)
    }

    fn check_input(&self, input: &Array3<f64>) -> Result<()> {
        let (_, steps, features) = input.dim();
        if features != self.input_features() {
            return Err(Error::shape(
                format!("{} input features", self.input_features()),
                features,
            ));
        }
        if steps == 0 {
            return Err(Error::invalid("empty time axis"));
        }
        Ok(())
    }

    fn memory(&self, input: &Array3<f64>, span: Span) -> Array2<f64> {
        let (batch, steps, features) = input.dim();
        let width = features * self.bank.num_taus();
        match span {
            Span::All => {
                let mut memory = Array2::zeros((batch * steps, width));
                for (b, sample) in input.outer_iter().enumerate() {
                    let rows = memory.slice_mut(s![b * steps..(b + 1) * steps, ..]);
                    convolve_all(sample, &self.bank, rows);
                }
                memory
            }
            Span::Last => {
                let mut memory = Array2::zeros((batch, width));
                for (b, sample) in input.outer_iter().enumerate() {
                    let row = convolve_last(sample, &self.bank);
                    memory.row_mut(b).assign(&ndarray::ArrayView1::from(&row));
                }
                memory
            }
        }
    }

    /// Output rows are `batch * steps` (or `batch` for [`Span::Last`]).
    pub(crate) fn forward_train<R: Rng + ?Sized>(
        &mut self,
        input: &Array3<f64>,
        span: Span,
        rng: &mut R,
    ) -> Result<(Array2<f64>, LayerTrace)> {
        self.check_input(input)?;
        let (batch, steps, _) = input.dim();
        let memory = self.memory(input, span);
        let pre_activation = self.dense.forward(memory.view());
        let mut out = pre_activation.mapv(|v| v.max(0.0));
        let mut bn_cache = None;
        if let Some(bn) = self.batch_norm.as_mut() {
            let (y, cache) = bn.forward_train(out.view());
            out = y;
            bn_cache = Some(cache);
        }
        let mut dropout_mask = None;
        if self.dropout > 0.0 {
            let keep = 1.0 / (1.0 - self.dropout);
            let p = self.dropout;
            let mask = Array2::from_shape_simple_fn(out.dim(), || if rng.random::<f64>() < p { 0.0 } else { keep });
            out *= &mask;
            dropout_mask = Some(mask);
        }
        let trace = LayerTrace {
            span,
            batch,
            steps,
            memory,
            pre_activation,
            batch_norm: bn_cache,
            dropout_mask,
        };
        Ok((out, trace))
    }

    pub(crate) fn forward_eval(&self, input: &Array3<f64>, span: Span) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let memory = self.memory(input, span);
        let mut out = self.dense.forward(memory.view());
        out.mapv_inplace(|v| v.max(0.0));
        if let Some(bn) = &self.batch_norm {
            out = bn.forward_eval(out.view());
        }
        Ok(out)
    }

    /// Gradients for this layer and, when asked, for its `B x T x F` input.
    pub(crate) fn backward(
        &self,
        trace: &LayerTrace,
        grad_out: Array2<f64>,
        want_input_grad: bool,
    ) -> Result<(LayerGrad, Option<Array3<f64>>)> {
        if grad_out.dim() != trace.pre_activation.dim() {
            return Err(Error::shape(
                format!("{:?}", trace.pre_activation.dim()),
                format!("{:?}", grad_out.dim()),
            ));
        }
        let mut grad = grad_out;
        if let Some(mask) = &trace.dropout_mask {
            grad *= mask;
        }
        let mut bn_grad = None;
        if let (Some(bn), Some(cache)) = (&self.batch_norm, &trace.batch_norm) {
            let (gx, gg, gb) = bn.backward(cache, grad.view());
            grad = gx;
            bn_grad = Some((gg, gb));
        }
        ndarray::Zip::from(&mut grad)
            .and(&trace.pre_activation)
            .for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
        let (dense_grad, grad_memory) = self.dense.backward(trace.memory.view(), grad.view(), want_input_grad);
        let grad_input = grad_memory.map(|gm| {
            let features = self.input_features();
            let mut gi = Array3::zeros((trace.batch, trace.steps, features));
            for (b, mut sample) in gi.outer_iter_mut().enumerate() {
                match trace.span {
                    Span::All => {
                        let rows = gm.slice(s![b * trace.steps..(b + 1) * trace.steps, ..]);
                        correlate_all(rows, &self.bank, sample.view_mut());
                    }
                    Span::Last => {
                        let row = gm.row(b).to_vec();
                        correlate_last(&row, &self.bank, sample.view_mut());
                    }
                }
            }
            gi
        });
        Ok((
            LayerGrad {
                dense: dense_grad,
                batch_norm: bn_grad,
            },
            grad_input,
        ))
    }
}
