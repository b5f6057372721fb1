//! Deep networks built from scale-invariant temporal history (SITH) layers.
//!
//! Each layer convolves its input with a fixed bank of gamma-shaped filters
//! whose peak times are spaced geometrically, so the layer sees its past on a
//! log-compressed time axis. A learnable dense layer then mixes the
//! "what" and "when" of that memory into new features for the next layer.
//!
//! * [`filterbank`]: the fixed filters and the automatic choice of their
//!   sharpness `k`.
//! * [`sith`]: causal convolution of a series with a bank, and its adjoint.
//! * [`laplace`]: a streaming route to the same memory through the Laplace
//!   domain.
//! * [`nn`]: layers, readout, backpropagation, Adam, losses, checkpoints.
//! * [`tasks`]: benchmark data (adding problem, Mackey-Glass, Hateful-8,
//!   sequential MNIST).
//! * [`experiment`]: configuration, training runs, aggregation, CSV output.

pub mod error;
pub mod experiment;
pub mod filterbank;
pub mod laplace;
pub mod nn;
pub mod sith;
pub mod tasks;

pub use error::{Error, Result};
