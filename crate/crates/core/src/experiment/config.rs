//! Experiment configuration: task, layers, training and seeds, read from
//! TOML. Every field can be overridden with a dotted `key=value` pair.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{geometric_taus, select_k, DEFAULT_K_MAX};
use crate::nn::{LayerConfig, NetConfig, ReadoutMode};
use crate::tasks::MackeyGlassParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    Adding {
        length: usize,
    },
    MackeyGlass {
        tau: usize,
        distance: usize,
        /// Total signals; half train, half test.
        #[serde(default = "default_mg_signals")]
        signals: usize,
        /// Timesteps per signal.
        #[serde(default = "default_mg_steps")]
        steps: usize,
        #[serde(default)]
        params: MackeyGlassParams,
    },
    Hateful8 {
        noise_len: usize,
        #[serde(default = "default_h8_train")]
        train_per_class: usize,
        #[serde(default = "default_h8_test")]
        test_per_class: usize,
    },
    Mnist {
        permuted: bool,
        #[serde(default)]
        perm_seed: u64,
        #[serde(default)]
        data_dir: Option<PathBuf>,
        /// Keep only the first `n` training images (after the seeded split).
        #[serde(default)]
        train_subset: Option<usize>,
        #[serde(default)]
        test_subset: Option<usize>,
        /// Evaluate on the held-out 20% of the training files instead of
        /// the test files.
        #[serde(default)]
        validation: bool,
    },
}

fn default_mg_signals() -> usize {
    128
}
fn default_mg_steps() -> usize {
    300
}
fn default_h8_train() -> usize {
    32
}
fn default_h8_test() -> usize {
    10
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Adding { .. } => "adding",
            TaskConfig::MackeyGlass { .. } => "mackey-glass",
            TaskConfig::Hateful8 { .. } => "hateful8",
            TaskConfig::Mnist { permuted: true, .. } => "psmnist",
            TaskConfig::Mnist { permuted: false, .. } => "smnist",
        }
    }

    pub fn input_features(&self) -> usize {
        match self {
            TaskConfig::Adding { .. } => 2,
            _ => 1,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            TaskConfig::Adding { .. } | TaskConfig::MackeyGlass { .. } => 1,
            TaskConfig::Hateful8 { .. } => 8,
            TaskConfig::Mnist { .. } => 10,
        }
    }

    pub fn readout(&self) -> ReadoutMode {
        match self {
            TaskConfig::MackeyGlass { .. } => ReadoutMode::EveryStep,
            _ => ReadoutMode::FinalStep,
        }
    }

    /// Adding trains on fresh batches counted in steps; the rest in epochs.
    pub fn trains_in_steps(&self) -> bool {
        matches!(self, TaskConfig::Adding { .. })
    }
}

/// A fixed sharpness or `"auto"` (resolved by the k scan before training).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KChoice {
    Fixed(u32),
    Auto(AutoK),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoK {
    Auto,
}

impl KChoice {
    pub const AUTO: KChoice = KChoice::Auto(AutoK::Auto);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    #[serde(default = "default_tau_min")]
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_taus: usize,
    pub hidden: usize,
    pub k: KChoice,
    #[serde(default)]
    pub batch_norm: bool,
}

fn default_tau_min() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub batch_size: usize,
    /// Training length: optimizer steps for the adding problem, epochs
    /// otherwise.
    pub horizon: usize,
    /// Split evenly over the horizon, e.g. `[2e-3, 2e-4, 2e-5]` steps down
    /// at each third.
    pub learning_rates: Vec<f64>,
    #[serde(default)]
    pub dropout: f64,
    /// Adding problem: log the running MSE every this many steps.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Stop a seed early once its monitored metric reaches this value
    /// (running MSE or test NRMSE from below, test accuracy from above).
    #[serde(default)]
    pub stop_at: Option<f64>,
}

fn default_log_every() -> usize {
    10
}

impl TrainingConfig {
    /// Learning rate for step or epoch `at` of `horizon`.
    pub fn learning_rate(&self, at: usize) -> f64 {
        let phases = self.learning_rates.len();
        let phase = (at * phases / self.horizon.max(1)).min(phases - 1);
        self.learning_rates[phase]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: TaskConfig,
    pub layers: Vec<LayerSpec>,
    pub training: TrainingConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Where per-seed checkpoints are written after training.
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

/// Five consecutive seeds starting at `master`.
pub fn seeds_from(master: u64) -> Vec<u64> {
    (master..master + 5).collect()
}

fn default_seeds() -> Vec<u64> {
    seeds_from(0)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `key.path=value` overrides. Values are parsed as TOML and
    /// fall back to plain strings, so `training.batch_size=64`,
    /// `layers.0.k="auto"` and `output=out.csv` all work.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            set_path(&mut value, key.trim(), parse_value(raw.trim()))?;
        }
        let config: Self = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.layers.is_empty() {
            return bad("at least one layer is required".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.tau_min > 0.0 && l.tau_max > l.tau_min) || l.n_taus < 2 || l.hidden == 0 {
                return bad(format!(
                    "layer {i}: need 0 < tau_min < tau_max, n_taus >= 2, hidden >= 1"
                ));
            }
            if l.k == KChoice::Fixed(0) {
                return bad(format!("layer {i}: k must be positive"));
            }
        }
        let t = &self.training;
        if t.batch_size == 0 || t.horizon == 0 || t.log_every == 0 {
            return bad("batch_size, horizon and log_every must be positive".into());
        }
        if t.learning_rates.is_empty() || t.learning_rates.iter().any(|lr| !(*lr > 0.0)) {
            return bad("learning_rates must be a nonempty list of positive values".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        match &self.task {
            TaskConfig::Adding { length } if *length < 2 || length % 2 != 0 => {
                bad(format!("adding length must be even and >= 2, got {length}"))
            }
            TaskConfig::MackeyGlass {
                tau, signals, steps, ..
            } if *tau == 0 || *signals < 2 || *steps == 0 => {
                bad("Mackey-Glass needs tau >= 1, signals >= 2 and steps >= 1".into())
            }
            TaskConfig::Hateful8 {
                train_per_class,
                test_per_class,
                ..
            } if *train_per_class == 0 || *test_per_class == 0 => bad("Hateful-8 needs samples per class".into()),
            _ => Ok(()),
        }
    }

    /// Resolves `"auto"` sharpness values by the k scan.
    pub fn resolved_ks(&self) -> Result<Vec<u32>> {
        self.layers
            .iter()
            .map(|l| match l.k {
                KChoice::Fixed(k) => Ok(k),
                KChoice::Auto(_) => {
                    let grid = geometric_taus(l.tau_min, l.tau_max, l.n_taus)?;
                    Ok(select_k(&grid, DEFAULT_K_MAX)?.chosen_k)
                }
            })
            .collect()
    }

    pub fn net_config(&self) -> Result<NetConfig> {
        let ks = self.resolved_ks()?;
        let layers = self
            .layers
            .iter()
            .zip(ks)
            .map(|(l, k)| LayerConfig {
                tau_min: l.tau_min,
                tau_max: l.tau_max,
                n_taus: l.n_taus,
                k,
                hidden: l.hidden,
                batch_norm: l.batch_norm,
            })
            .collect();
        let config = NetConfig {
            input_features: self.task.input_features(),
            output_dim: self.task.output_dim(),
            layers,
            readout: self.task.readout(),
            dropout: self.training.dropout,
        };
        config.validate()?;
        Ok(config)
    }

    /// Copy with every `"auto"` replaced by its resolved value.
    pub fn resolved(&self) -> Result<Self> {
        let ks = self.resolved_ks()?;
        let mut out = self.clone();
        for (l, k) in out.layers.iter_mut().zip(ks) {
            l.k = KChoice::Fixed(k);
        }
        Ok(out)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert((*part).to_string(), value);
                    return Ok(());
                }
                t.entry((*part).to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{key}` is not an index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(i)
                    .ok_or_else(|| Error::Config(format!("index {i} in `{key}` out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("`{key}` does not name a field"))),
        };
    }
    Ok(())
}

/// Dropout after every layer but the last.
pub const DEFAULT_DROPOUT: f64 = 0.2;

fn layer(tau_max: f64, n_taus: usize, hidden: usize, k: u32, batch_norm: bool) -> LayerSpec {
    LayerSpec {
        tau_min: 1.0,
        tau_max,
        n_taus,
        hidden,
        k: KChoice::Fixed(k),
        batch_norm,
    }
}

/// The four benchmark architectures with their default training settings.
pub mod presets {
    use super::*;

    pub fn smnist(permuted: bool) -> ExperimentConfig {
        ExperimentConfig {
            name: if permuted { "psmnist" } else { "smnist" }.into(),
            task: TaskConfig::Mnist {
                permuted,
                perm_seed: 0,
                data_dir: None,
                train_subset: None,
                test_subset: None,
                validation: false,
            },
            layers: vec![
                layer(30.0, 20, 60, 125, true),
                layer(150.0, 20, 60, 61, true),
                layer(750.0, 20, 60, 35, true),
            ],
            training: TrainingConfig {
                batch_size: 64,
                horizon: 30,
                learning_rates: vec![2e-3, 2e-4, 2e-5],
                dropout: DEFAULT_DROPOUT,
                log_every: default_log_every(),
                stop_at: None,
            },
            seeds: default_seeds(),
            output: None,
            checkpoint_dir: None,
        }
    }

    pub fn adding(length: usize) -> ExperimentConfig {
        ExperimentConfig {
            name: format!("adding-t{length}"),
            task: TaskConfig::Adding { length },
            layers: vec![
                layer(20.0, 13, 25, 75, false),
                layer(120.0, 13, 25, 27, false),
                layer(720.0, 13, 25, 14, false),
                layer(4320.0, 13, 25, 8, false),
            ],
            training: TrainingConfig {
                batch_size: 50,
                horizon: 2500,
                learning_rates: vec![1e-3],
                dropout: DEFAULT_DROPOUT,
                log_every: default_log_every(),
                stop_at: None,
            },
            seeds: default_seeds(),
            output: None,
            checkpoint_dir: None,
        }
    }

    pub fn mackey_glass(tau: usize, distance: usize) -> ExperimentConfig {
        ExperimentConfig {
            name: format!("mackey-glass-{tau}-{distance}"),
            task: TaskConfig::MackeyGlass {
                tau,
                distance,
                signals: default_mg_signals(),
                steps: default_mg_steps(),
                params: MackeyGlassParams::default(),
            },
            layers: vec![
                layer(25.0, 8, 25, 15, false),
                layer(50.0, 8, 25, 8, false),
                layer(150.0, 8, 25, 4, false),
            ],
            training: TrainingConfig {
                batch_size: 32,
                // 64 training signals make only two steps per epoch.
                horizon: 200,
                learning_rates: vec![1e-2],
                dropout: DEFAULT_DROPOUT,
                log_every: default_log_every(),
                stop_at: None,
            },
            seeds: default_seeds(),
            output: None,
            checkpoint_dir: None,
        }
    }

    pub fn hateful8(noise_len: usize) -> ExperimentConfig {
        ExperimentConfig {
            name: format!("hateful8-{noise_len}"),
            task: TaskConfig::Hateful8 {
                noise_len,
                train_per_class: default_h8_train(),
                test_per_class: default_h8_test(),
            },
            layers: vec![
                layer(25.0, 10, 35, 35, true),
                layer(100.0, 10, 35, 16, true),
                layer(400.0, 10, 35, 9, true),
                layer(1200.0, 10, 35, 6, true),
            ],
            training: TrainingConfig {
                batch_size: 32,
                horizon: 60,
                learning_rates: vec![1e-3],
                dropout: DEFAULT_DROPOUT,
                log_every: default_log_every(),
                stop_at: None,
            },
            seeds: default_seeds(),
            output: None,
            checkpoint_dir: None,
        }
    }

    /// Looks a preset up by name: `adding`, `mackey-glass`, `hateful8`,
    /// `smnist`, `psmnist`.
    pub fn by_name(name: &str) -> Result<ExperimentConfig> {
        match name {
            "adding" => Ok(adding(100)),
            "mackey-glass" => Ok(mackey_glass(17, 15)),
            "hateful8" => Ok(hateful8(100)),
            "smnist" => Ok(smnist(false)),
            "psmnist" => Ok(smnist(true)),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (adding, mackey-glass, hateful8, smnist, psmnist)"
            ))),
        }
    }

    pub const NAMES: [&str; 5] = ["adding", "mackey-glass", "hateful8", "smnist", "psmnist"];
}
