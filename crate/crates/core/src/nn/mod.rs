//! The learnable network: layers, readout, backpropagation and training
//! utilities.

mod adam;
mod batch_norm;
mod checkpoint;
mod dense;
mod layer;
pub mod loss;
mod net;

pub use adam::{AdamConfig, AdamState};
pub use batch_norm::{BatchNorm, BN_EPS, BN_MOMENTUM};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use dense::{Dense, DenseGrad};
pub use layer::{DeepSithLayer, LayerConfig, LayerGrad, Mode};
pub use net::{stack_signals, DeepSithNet, Gradients, NetConfig, ReadoutMode, Trace};

/// Applies one Adam update to every learnable tensor of `net`.
pub fn adam_step(net: &mut DeepSithNet, grads: &Gradients, state: &mut AdamState) -> crate::Result<()> {
    let g = grads.slices();
    let mut params = net.params_mut();
    state.step(&mut params, &g)
}
