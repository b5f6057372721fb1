use std::sync::Arc;

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{Dense, DenseGrad};
use super::layer::{DeepSithLayer, LayerConfig, LayerGrad, LayerTrace, Span};
use crate::error::{Error, Result};
use crate::sith::Signal;

/// Where the readout layer is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutMode {
    /// One output per series, from the last timestep.
    FinalStep,
    /// One output per timestep.
    EveryStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_features: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerConfig>,
    pub readout: ReadoutMode,
    /// Dropout after every layer but the last.
    #[serde(default)]
    pub dropout: f64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if self.input_features == 0 || self.output_dim == 0 {
            return Err(Error::Config("input and output dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.hidden == 0 || l.n_taus < 2 || l.k == 0 {
                return Err(Error::Config(format!(
                    "layer {i}: hidden, n_taus >= 2 and k must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Learnable scalars implied by the configuration alone.
    pub fn parameter_count(&self) -> usize {
        let mut features = self.input_features;
        let mut total = 0;
        for layer in &self.layers {
            total += layer.hidden * (features * layer.n_taus + 1);
            if layer.batch_norm {
                total += 2 * layer.hidden;
            }
            features = layer.hidden;
        }
        total + self.output_dim * (features + 1)
    }
}

/// Stacked layers plus a linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepSithNet {
    config: NetConfig,
    layers: Vec<DeepSithLayer>,
    readout: Dense,
    generation: u64,
}

/// Everything the backward pass needs from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    generation: u64,
    batch: usize,
    steps: usize,
    layers: Vec<LayerTrace>,
    readout_input: Array2<f64>,
}

/// Gradients laid out like [`DeepSithNet::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub readout: DenseGrad,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.dense.weight.as_slice().expect("standard layout"));
            out.push(l.dense.bias.as_slice().expect("standard layout"));
            if let Some((g, b)) = &l.batch_norm {
                out.push(g.as_slice().expect("standard layout"));
                out.push(b.as_slice().expect("standard layout"));
            }
        }
        out.push(self.readout.weight.as_slice().expect("standard layout"));
        out.push(self.readout.bias.as_slice().expect("standard layout"));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

impl DeepSithNet {
    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut features = config.input_features;
        let last = config.layers.len() - 1;
        for (i, lc) in config.layers.iter().enumerate() {
            let bank = Arc::new(lc.build_bank()?);
            let dense = Dense::init_uniform(features * lc.n_taus, lc.hidden, rng);
            let dropout = if i == last { 0.0 } else { config.dropout };
            layers.push(DeepSithLayer::new(bank, dense, lc.batch_norm, dropout)?);
            features = lc.hidden;
        }
        let readout = Dense::init_uniform(features, config.output_dim, rng);
        Ok(Self {
            config,
            layers,
            readout,
            generation: 0,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DeepSithLayer] {
        &self.layers
    }

    pub fn readout(&self) -> &Dense {
        &self.readout
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(DeepSithLayer::parameter_count).sum::<usize>() + self.readout.parameter_count()
    }

    // A final-step readout only needs the last layer at the last timestep,
    // unless batch norm there couples it to every timestep.
    fn last_span(&self) -> Span {
        let last = self.layers.last().expect("validated non-empty");
        if self.config.readout == ReadoutMode::FinalStep && last.batch_norm.is_none() {
            Span::Last
        } else {
            Span::All
        }
    }

    fn check_input(&self, input: &Array3<f64>) -> Result<()> {
        let (batch, steps, features) = input.dim();
        if features != self.config.input_features {
            return Err(Error::shape(
                format!("{} input features", self.config.input_features),
                features,
            ));
        }
        if batch == 0 || steps == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    fn final_rows(&self, hidden: Array2<f64>, batch: usize, steps: usize, span: Span) -> Array2<f64> {
        match (self.config.readout, span) {
            (ReadoutMode::FinalStep, Span::All) => {
                let mut rows = Array2::zeros((batch, hidden.ncols()));
                for b in 0..batch {
                    rows.row_mut(b).assign(&hidden.row(b * steps + steps - 1));
                }
                rows
            }
            _ => hidden,
        }
    }

    /// Inference pass over a `B x T x F` batch. Rows of the result are
    /// samples (final-step readout) or sample-major timesteps (every-step).
    pub fn forward_eval(&self, input: &Array3<f64>) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let (batch, steps, _) = input.dim();
        let span = self.last_span();
        let mut current = input.clone();
        let last = self.layers.len() - 1;
        let mut hidden = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let layer_span = if i == last { span } else { Span::All };
            let out = layer.forward_eval(&current, layer_span)?;
            if i == last {
                hidden = Some(out);
            } else {
                let h = out.ncols();
                current = out
                    .into_shape_with_order((batch, steps, h))
                    .expect("rows are batch-major");
            }
        }
        let rows = self.final_rows(hidden.expect("at least one layer"), batch, steps, span);
        Ok(self.readout.forward(rows.view()))
    }

    pub fn forward_train<R: Rng + ?Sized>(&mut self, input: &Array3<f64>, rng: &mut R) -> Result<(Array2<f64>, Trace)> {
        self.check_input(input)?;
        let (batch, steps, _) = input.dim();
        let span = self.last_span();
        let mut current = input.clone();
        let last = self.layers.len() - 1;
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut hidden = None;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let layer_span = if i == last { span } else { Span::All };
            let (out, trace) = layer.forward_train(&current, layer_span, rng)?;
            traces.push(trace);
            if i == last {
                hidden = Some(out);
            } else {
                let h = out.ncols();
                current = out
                    .into_shape_with_order((batch, steps, h))
                    .expect("rows are batch-major");
            }
        }
        let rows = self.final_rows(hidden.expect("at least one layer"), batch, steps, span);
        let output = self.readout.forward(rows.view());
        let trace = Trace {
            generation: self.generation,
            batch,
            steps,
            layers: traces,
            readout_input: rows,
        };
        Ok((output, trace))
    }

    /// Reverse pass for the loss gradient `grad_output` (same shape as the
    /// forward output).
    pub fn backward(&self, trace: &Trace, grad_output: ArrayView2<f64>) -> Result<Gradients> {
        if trace.generation != self.generation || trace.layers.len() != self.layers.len() {
            return Err(Error::StaleTrace(format!(
                "trace from generation {}, network at {}",
                trace.generation, self.generation
            )));
        }
        if grad_output.nrows() != trace.readout_input.nrows() || grad_output.ncols() != self.config.output_dim {
            return Err(Error::shape(
                format!("({}, {})", trace.readout_input.nrows(), self.config.output_dim),
                format!("{:?}", grad_output.dim()),
            ));
        }
        let (batch, steps) = (trace.batch, trace.steps);
        let (readout_grad, grad_rows) = self.readout.backward(trace.readout_input.view(), grad_output, true);
        let grad_rows = grad_rows.expect("requested");
        let span = self.last_span();
        let mut grad = match (self.config.readout, span) {
            (ReadoutMode::FinalStep, Span::All) => {
                let mut full = Array2::zeros((batch * steps, grad_rows.ncols()));
                for b in 0..batch {
                    full.row_mut(b * steps + steps - 1).assign(&grad_rows.row(b));
                }
                full
            }
            _ => grad_rows,
        };
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (i, (layer, lt)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            let (lg, gi) = layer.backward(lt, grad, i > 0)?;
            layer_grads.push(lg);
            grad = match gi {
                Some(g) => {
                    let f = g.dim().2;
                    g.into_shape_with_order((batch * steps, f)).expect("contiguous")
                }
                None => Array2::zeros((0, 0)),
            };
        }
        layer_grads.reverse();
        Ok(Gradients {
            layers: layer_grads,
            readout: readout_grad,
        })
    }

    /// Learnable tensors in a fixed order: per layer weight, bias, then
    /// gamma and beta when batch norm is on; readout weight and bias last.
    /// Borrowing them mutably invalidates outstanding traces.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.dense.weight.as_slice_mut().expect("standard layout"));
            out.push(l.dense.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut l.batch_norm {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out.push(self.readout.weight.as_slice_mut().expect("standard layout"));
        out.push(self.readout.bias.as_slice_mut().expect("standard layout"));
        out
    }

    /// Every stored tensor (learnable or not) with a stable name and shape.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((
                format!("layers.{i}.dense.weight"),
                l.dense.weight.shape().to_vec(),
                l.dense.weight.as_slice().expect("standard layout"),
            ));
            out.push((
                format!("layers.{i}.dense.bias"),
                l.dense.bias.shape().to_vec(),
                l.dense.bias.as_slice().expect("standard layout"),
            ));
            if let Some(bn) = &l.batch_norm {
                for (name, t) in [
                    ("gamma", &bn.gamma),
                    ("beta", &bn.beta),
                    ("running_mean", &bn.running_mean),
                    ("running_var", &bn.running_var),
                ] {
                    out.push((
                        format!("layers.{i}.batch_norm.{name}"),
                        t.shape().to_vec(),
                        t.as_slice().expect("standard layout"),
                    ));
                }
            }
        }
        out.push((
            "readout.weight".into(),
            self.readout.weight.shape().to_vec(),
            self.readout.weight.as_slice().expect("standard layout"),
        ));
        out.push((
            "readout.bias".into(),
            self.readout.bias.shape().to_vec(),
            self.readout.bias.as_slice().expect("standard layout"),
        ));
        out
    }

    /// Mutable counterpart of [`Self::named_tensors`].
    pub(crate) fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.generation += 1;
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((
                format!("layers.{i}.dense.weight"),
                l.dense.weight.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                format!("layers.{i}.dense.bias"),
                l.dense.bias.as_slice_mut().expect("standard layout"),
            ));
            if let Some(bn) = &mut l.batch_norm {
                out.push((
                    format!("layers.{i}.batch_norm.gamma"),
                    bn.gamma.as_slice_mut().expect("standard layout"),
                ));
                out.push((
                    format!("layers.{i}.batch_norm.beta"),
                    bn.beta.as_slice_mut().expect("standard layout"),
                ));
                out.push((
                    format!("layers.{i}.batch_norm.running_mean"),
                    bn.running_mean.as_slice_mut().expect("standard layout"),
                ));
                out.push((
                    format!("layers.{i}.batch_norm.running_var"),
                    bn.running_var.as_slice_mut().expect("standard layout"),
                ));
            }
        }
        out.push((
            "readout.weight".into(),
            self.readout.weight.as_slice_mut().expect("standard layout"),
        ));
        out.push((
            "readout.bias".into(),
            self.readout.bias.as_slice_mut().expect("standard layout"),
        ));
        out
    }
}

/// Stacks equally shaped series into a `B x T x F` batch.
pub fn stack_signals(signals: &[Signal]) -> Result<Array3<f64>> {
    let first = signals.first().ok_or_else(|| Error::invalid("empty batch"))?;
    let (steps, features) = (first.steps(), first.features());
    let mut out = Array3::zeros((signals.len(), steps, features));
    for (b, sig) in signals.iter().enumerate() {
        if sig.steps() != steps || sig.features() != features {
            return Err(Error::shape(
                format!("{steps}x{features}"),
                format!("{}x{}", sig.steps(), sig.features()),
            ));
        }
        out.slice_mut(s![b, .., ..]).assign(sig.data());
    }
    Ok(out)
}
