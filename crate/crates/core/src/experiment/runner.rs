//! Training runs: one [`RunRecord`] per seed.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Instant;

use ndarray::{s, Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TaskConfig};
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss, save_checkpoint, AdamConfig, AdamState, DeepSithNet};
use crate::tasks::batching::EpochBatches;
use crate::tasks::mnist::{data_dir, MnistSet};
use crate::tasks::{adding_batch, hateful8_dataset, load_mnist_sequences, mg_dataset, sample_rng};

/// Items in the adding problem's running-average MSE window. Values logged
/// before the window fills average over fewer items.
pub const RUNNING_WINDOW: usize = 1000;
/// Fresh held-out items used to score an adding-problem network.
const ADDING_EVAL_ITEMS: usize = 1000;
const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    /// The monitored metric reached `training.stop_at`.
    StoppedEarly {
        step: u64,
    },
    Diverged {
        step: u64,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub seed: u64,
    /// The configuration with every `"auto"` k resolved.
    pub config: ExperimentConfig,
    pub resolved_k: Vec<u32>,
    pub parameter_count: usize,
    pub metrics: Vec<MetricPoint>,
    pub status: RunStatus,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    fn push(&mut self, step: u64, metric: &str, value: f64) {
        self.metrics.push(MetricPoint {
            step,
            metric: metric.to_string(),
            value,
        });
    }

    /// `(step, value)` pairs of one metric, in logging order.
    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.metrics
            .iter()
            .filter(|m| m.metric == metric)
            .map(|m| (m.step, m.value))
            .collect()
    }

    pub fn last(&self, metric: &str) -> Option<f64> {
        self.series(metric).last().map(|p| p.1)
    }

    /// First logged step at which `metric` satisfies `reached`.
    pub fn first_step_where(&self, metric: &str, reached: impl Fn(f64) -> bool) -> Option<u64> {
        self.series(metric).into_iter().find(|p| reached(p.1)).map(|p| p.0)
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_clock_secs = other.wall_clock_secs;
        a == *other
    }
}

/// Second-level seed for a purpose `tag` under the run seed.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    sample_rng(seed, 1 << 32 | tag).random()
}

const INIT_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;
const TRAIN_DATA_TAG: u64 = 2;
const ORDER_TAG: u64 = 3;
const TEST_DATA_TAG: u64 = 4;

enum Targets {
    Labels(Vec<usize>),
    /// `B x T x 1` per-step regression targets.
    Series(Array3<f64>),
}

enum Dataset {
    InMemory { x: Array3<f64>, y: Targets },
    Mnist(MnistSet),
}

enum BatchTargets {
    Labels(Vec<usize>),
    Values(Array2<f64>),
}

impl Dataset {
    fn len(&self) -> usize {
        match self {
            Dataset::InMemory { x, .. } => x.len_of(Axis(0)),
            Dataset::Mnist(m) => m.len(),
        }
    }

    fn batch(&self, indices: &[usize]) -> (Array3<f64>, BatchTargets) {
        match self {
            Dataset::InMemory { x, y } => {
                let xb = x.select(Axis(0), indices);
                let yb = match y {
                    Targets::Labels(l) => BatchTargets::Labels(indices.iter().map(|&i| l[i]).collect()),
                    Targets::Series(t) => {
                        let sel = t.select(Axis(0), indices);
                        let (b, steps, _) = sel.dim();
                        BatchTargets::Values(sel.into_shape_with_order((b * steps, 1)).expect("contiguous"))
                    }
                };
                (xb, yb)
            }
            Dataset::Mnist(m) => {
                let (x, y) = m.batch(indices);
                (x, BatchTargets::Labels(y))
            }
        }
    }
}

/// Batch loss value and gradient with respect to the network output.
fn batch_loss(output: &Array2<f64>, targets: &BatchTargets) -> Result<(f64, Array2<f64>)> {
    match targets {
        BatchTargets::Labels(l) => loss::cross_entropy(output.view(), l),
        BatchTargets::Values(v) => loss::mse(output.view(), v.view()),
    }
}

fn sequences_to_array(rows: &[Vec<f64>]) -> Array3<f64> {
    let steps = rows.first().map_or(0, Vec::len);
    let mut x = Array3::zeros((rows.len(), steps, 1));
    for (i, r) in rows.iter().enumerate() {
        for (t, &v) in r.iter().enumerate() {
            x[[i, t, 0]] = v;
        }
    }
    x
}

/// Loads MNIST once per experiment; other tasks build data per seed.
fn load_mnist(config: &ExperimentConfig) -> Result<Option<(MnistSet, MnistSet)>> {
    let TaskConfig::Mnist {
        permuted,
        perm_seed,
        data_dir: dir,
        train_subset,
        test_subset,
        validation,
    } = &config.task
    else {
        return Ok(None);
    };
    let dir = data_dir(dir.as_deref());
    let data = load_mnist_sequences(&dir, *permuted, *perm_seed, *validation)?;
    let test = if *validation {
        data.validation.expect("requested split")
    } else {
        data.test
    };
    let cut = |set: MnistSet, n: &Option<usize>| match n {
        Some(n) if *n < set.len() => set.subset(&(0..*n).collect::<Vec<_>>()),
        _ => set,
    };
    Ok(Some((cut(data.train, train_subset), cut(test, test_subset))))
}

fn fixed_datasets(
    config: &ExperimentConfig,
    seed: u64,
    mnist: Option<&(MnistSet, MnistSet)>,
) -> Result<(Dataset, Dataset)> {
    match &config.task {
        TaskConfig::Adding { .. } => Err(Error::invalid("the adding problem has no fixed dataset")),
        TaskConfig::MackeyGlass {
            tau,
            distance,
            signals,
            steps,
            params,
        } => {
            let (x, y) = mg_dataset(
                *tau,
                *distance,
                *signals,
                *steps,
                derive_seed(seed, TRAIN_DATA_TAG),
                params,
            )?;
            let half = signals / 2;
            let part = |a: &Array3<f64>, lo: usize, hi: usize| a.slice(s![lo..hi, .., ..]).to_owned();
            Ok((
                Dataset::InMemory {
                    x: part(&x, 0, half),
                    y: Targets::Series(part(&y, 0, half)),
                },
                Dataset::InMemory {
                    x: part(&x, half, *signals),
                    y: Targets::Series(part(&y, half, *signals)),
                },
            ))
        }
        TaskConfig::Hateful8 {
            noise_len,
            train_per_class,
            test_per_class,
        } => {
            let build = |per_class: usize, tag: u64| -> Result<Dataset> {
                let samples = hateful8_dataset(*noise_len, per_class, derive_seed(seed, tag))?;
                let inputs: Vec<Vec<f64>> = samples.iter().map(|s| s.input.clone()).collect();
                Ok(Dataset::InMemory {
                    x: sequences_to_array(&inputs),
                    y: Targets::Labels(samples.iter().map(|s| s.label).collect()),
                })
            };
            Ok((
                build(*train_per_class, TRAIN_DATA_TAG)?,
                build(*test_per_class, TEST_DATA_TAG)?,
            ))
        }
        TaskConfig::Mnist { .. } => {
            let (train, test) = mnist.ok_or_else(|| Error::invalid("MNIST data not loaded"))?;
            Ok((Dataset::Mnist(train.clone()), Dataset::Mnist(test.clone())))
        }
    }
}

/// Test metrics for a trained network on a fixed dataset.
fn evaluate_dataset(net: &DeepSithNet, data: &Dataset) -> Result<Vec<(&'static str, f64)>> {
    let n = data.len();
    let mut total_loss = 0.0;
    let mut hits = 0.0;
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    let mut classification = false;
    for start in (0..n).step_by(EVAL_BATCH) {
        let idx: Vec<usize> = (start..n.min(start + EVAL_BATCH)).collect();
        let (x, y) = data.batch(&idx);
        let out = net.forward_eval(&x)?;
        let (l, _) = batch_loss(&out, &y)?;
        total_loss += l * idx.len() as f64;
        match y {
            BatchTargets::Labels(labels) => {
                classification = true;
                hits += loss::accuracy(out.view(), &labels) * idx.len() as f64;
            }
            BatchTargets::Values(v) => {
                preds.extend(out.iter().copied());
                truth.extend(v.iter().copied());
            }
        }
    }
    let mut metrics = vec![("test_loss", total_loss / n as f64)];
    if classification {
        metrics.push(("test_accuracy", hits / n as f64));
    } else {
        metrics.push(("test_nrmse", loss::nrmse(&preds, &truth)?));
    }
    Ok(metrics)
}

/// Metrics of `net` on the held-out data that training with `seed` would
/// use. The adding problem is scored on a fresh held-out batch.
pub fn evaluate(config: &ExperimentConfig, seed: u64, net: &DeepSithNet) -> Result<Vec<(&'static str, f64)>> {
    if let TaskConfig::Adding { length } = config.task {
        let (x, y) = adding_batch(length, ADDING_EVAL_ITEMS, derive_seed(seed, TEST_DATA_TAG), 0)?;
        let out = net.forward_eval(&x)?;
        let (mse, _) = loss::mse(out.view(), y.view())?;
        return Ok(vec![("test_mse", mse)]);
    }
    let mnist = load_mnist(config)?;
    let (_, test) = fixed_datasets(config, seed, mnist.as_ref())?;
    evaluate_dataset(net, &test)
}

fn new_record(config: &ExperimentConfig, seed: u64) -> Result<(RunRecord, DeepSithNet)> {
    let resolved = config.resolved()?;
    let net_config = resolved.net_config()?;
    let net = DeepSithNet::new(net_config, &mut sample_rng(seed, INIT_STREAM))?;
    let record = RunRecord {
        task: config.task.name().to_string(),
        seed,
        resolved_k: net.config().layers.iter().map(|l| l.k).collect(),
        parameter_count: net.parameter_count(),
        config: resolved,
        metrics: Vec::new(),
        status: RunStatus::Completed,
        wall_clock_secs: 0.0,
    };
    Ok((record, net))
}

/// What a training step produced: keep going, or the run is over.
enum Flow {
    Continue,
    Diverged(String),
}

fn train_step<R: Rng + ?Sized>(
    net: &mut DeepSithNet,
    adam: &mut AdamState,
    x: &Array3<f64>,
    y: &BatchTargets,
    rng: &mut R,
) -> Result<(Flow, f64, Array2<f64>)> {
    let (out, trace) = net.forward_train(x, rng)?;
    let (l, grad) = batch_loss(&out, y)?;
    if !l.is_finite() {
        return Ok((Flow::Diverged(format!("loss became {l}")), l, out));
    }
    let grads = net.backward(&trace, grad.view())?;
    match adam_step(net, &grads, adam) {
        Ok(()) => Ok((Flow::Continue, l, out)),
        Err(Error::Diverged(msg)) => Ok((Flow::Diverged(msg), l, out)),
        Err(e) => Err(e),
    }
}

fn run_adding(
    config: &ExperimentConfig,
    seed: u64,
    length: usize,
    record: &mut RunRecord,
    net: &mut DeepSithNet,
) -> Result<()> {
    let t = &config.training;
    let mut adam = AdamState::new(AdamConfig::default());
    let mut dropout_rng = sample_rng(seed, DROPOUT_STREAM);
    let data_seed = derive_seed(seed, TRAIN_DATA_TAG);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(RUNNING_WINDOW);
    for step in 0..t.horizon {
        adam.set_learning_rate(t.learning_rate(step));
        let (x, y) = adding_batch(length, t.batch_size, data_seed, step as u64)?;
        let targets = BatchTargets::Values(y);
        let (flow, batch_loss, out) = train_step(net, &mut adam, &x, &targets, &mut dropout_rng)?;
        let done = step as u64 + 1;
        if let Flow::Diverged(message) = flow {
            record.status = RunStatus::Diverged { step: done, message };
            return Ok(());
        }
        let BatchTargets::Values(y) = &targets else {
            unreachable!()
        };
        for (p, target) in out.iter().zip(y.iter()) {
            if window.len() == RUNNING_WINDOW {
                window.pop_front();
            }
            window.push_back((p - target).powi(2));
        }
        if done.is_multiple_of(t.log_every as u64) || step + 1 == t.horizon {
            let running = window.iter().sum::<f64>() / window.len() as f64;
            record.push(done, "train_loss", batch_loss);
            record.push(done, "running_mse", running);
            if window.len() == RUNNING_WINDOW && t.stop_at.is_some_and(|target| running <= target) {
                record.status = RunStatus::StoppedEarly { step: done };
                return Ok(());
            }
        }
    }
    Ok(())
}

fn run_epochs(
    config: &ExperimentConfig,
    seed: u64,
    mnist: Option<&(MnistSet, MnistSet)>,
    record: &mut RunRecord,
    net: &mut DeepSithNet,
) -> Result<()> {
    let t = &config.training;
    let (train, test) = fixed_datasets(config, seed, mnist)?;
    let batches = EpochBatches::new(train.len(), t.batch_size, derive_seed(seed, ORDER_TAG))?;
    let mut adam = AdamState::new(AdamConfig::default());
    let mut dropout_rng = sample_rng(seed, DROPOUT_STREAM);
    for epoch in 0..t.horizon {
        let lr = t.learning_rate(epoch);
        adam.set_learning_rate(lr);
        let done = epoch as u64 + 1;
        record.push(done, "learning_rate", lr);
        let mut total = 0.0;
        for idx in batches.epoch(epoch as u64) {
            let (x, y) = train.batch(&idx);
            let (flow, l, _) = train_step(net, &mut adam, &x, &y, &mut dropout_rng)?;
            if let Flow::Diverged(message) = flow {
                record.status = RunStatus::Diverged { step: done, message };
                return Ok(());
            }
            total += l * idx.len() as f64;
        }
        record.push(done, "train_loss", total / train.len() as f64);
        let mut stop = false;
        for (name, value) in evaluate_dataset(net, &test)? {
            record.push(done, name, value);
            if let Some(target) = t.stop_at {
                stop |= match name {
                    "test_accuracy" => value >= target,
                    "test_nrmse" => value <= target,
                    _ => false,
                };
            }
        }
        if stop {
            record.status = RunStatus::StoppedEarly { step: done };
            return Ok(());
        }
    }
    Ok(())
}

fn run_seed_with(
    config: &ExperimentConfig,
    seed: u64,
    mnist: Option<&(MnistSet, MnistSet)>,
) -> Result<(RunRecord, DeepSithNet)> {
    let started = Instant::now();
    let (mut record, mut net) = new_record(config, seed)?;
    match config.task {
        TaskConfig::Adding { length } => run_adding(config, seed, length, &mut record, &mut net)?,
        _ => run_epochs(config, seed, mnist, &mut record, &mut net)?,
    }
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
        save_checkpoint(&net, &checkpoint_path(dir, &config.name, seed))?;
    }
    record.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok((record, net))
}

pub fn checkpoint_path(dir: &Path, name: &str, seed: u64) -> std::path::PathBuf {
    dir.join(format!("{name}-seed{seed}.json"))
}

/// Trains one seed and returns its record and the trained network.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<(RunRecord, DeepSithNet)> {
    config.validate()?;
    let mnist = load_mnist(config)?;
    run_seed_with(config, seed, mnist.as_ref())
}

/// Trains every configured seed in order. A diverged seed is recorded with
/// its status rather than dropped.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let mnist = load_mnist(config)?;
    config
        .seeds
        .iter()
        .map(|&seed| run_seed_with(config, seed, mnist.as_ref()).map(|(r, _)| r))
        .collect()
}
