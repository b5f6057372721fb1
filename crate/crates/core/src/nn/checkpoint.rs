//! JSON checkpoints.
//!
//! ```text
//! {
//!   "format": "deepsith-checkpoint",
//!   "version": 1,
//!   "config": { ...NetConfig... },
//!   "tensors": [ { "name": "layers.0.dense.weight", "shape": [25, 26], "data": [...] }, ... ]
//! }
//! ```
//!
//! Tensor names are those of [`DeepSithNet::named_tensors`]; data is
//! row-major. Floats are written in shortest round-trip form, so a reload
//! reproduces every parameter bit for bit. Filter banks are rebuilt from the
//! config.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{DeepSithNet, NetConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "deepsith-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: NetConfig,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_net(net: &DeepSithNet) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: net.config().clone(),
            tensors: net
                .named_tensors()
                .into_iter()
                .map(|(name, shape, data)| TensorRecord {
                    name,
                    shape,
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_net(self) -> Result<DeepSithNet> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format tag {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        // Initial values are overwritten below.
        let mut net = DeepSithNet::new(self.config, &mut ChaCha8Rng::seed_from_u64(0))?;
        let expected: Vec<(String, Vec<usize>)> = net.named_tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), rec) in expected.iter().zip(&self.tensors) {
            if *name != rec.name || *shape != rec.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} {shape:?} does not match stored {} {:?}",
                    rec.name, rec.shape
                )));
            }
            if rec.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has {} values",
                    rec.data.len()
                )));
            }
        }
        for ((_, dst), rec) in net.named_tensors_mut().into_iter().zip(&self.tensors) {
            dst.copy_from_slice(&rec.data);
        }
        Ok(net)
    }
}

pub fn save_checkpoint(net: &DeepSithNet, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::from_net(net))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<DeepSithNet> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.into_net()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::LayerConfig;
    use crate::nn::net::ReadoutMode;
    use ndarray::Array3;

    fn config() -> NetConfig {
        NetConfig {
            input_features: 2,
            output_dim: 3,
            layers: vec![
                LayerConfig {
                    tau_min: 1.0,
                    tau_max: 8.0,
                    n_taus: 4,
                    k: 8,
                    hidden: 5,
                    batch_norm: true,
                },
                LayerConfig {
                    tau_min: 1.0,
                    tau_max: 30.0,
                    n_taus: 4,
                    k: 5,
                    hidden: 5,
                    batch_norm: false,
                },
            ],
            readout: ReadoutMode::EveryStep,
            dropout: 0.2,
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut net = DeepSithNet::new(config(), &mut rng).unwrap();
        let x = Array3::from_shape_fn((2, 12, 2), |(b, t, f)| ((b + 3 * t + 7 * f) as f64 * 0.11).cos());
        // Move running statistics away from their initial values.
        net.forward_train(&x, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_checkpoint(&net, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        for ((na, _, a), (nb, _, b)) in net.named_tensors().into_iter().zip(loaded.named_tensors()) {
            assert_eq!(na, nb);
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let ya = net.forward_eval(&x).unwrap();
        let yb = loaded.forward_eval(&x).unwrap();
        assert!(ya.iter().zip(yb.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_tampered_files() {
        let net = DeepSithNet::new(config(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut ck = Checkpoint::from_net(&net);
        ck.version = 99;
        assert!(ck.clone().into_net().is_err());
        let mut ck = Checkpoint::from_net(&net);
        ck.tensors[0].data.pop();
        assert!(ck.into_net().is_err());
        let mut ck = Checkpoint::from_net(&net);
        ck.tensors.swap(0, 1);
        assert!(ck.into_net().is_err());
    }
}
