#![allow(dead_code)]

use std::sync::Arc;

use deepsith::filterbank::{build_kernels, geometric_taus, FilterSpec};
use deepsith::laplace::{post_invert, LaplaceState, SGrid};
use deepsith::nn::{loss, DeepSithNet, LayerConfig, NetConfig, ReadoutMode};
use deepsith::sith::{sith_forward, Signal};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of checking one random network.
#[derive(Debug)]
pub struct GradReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub failures: Vec<String>,
}

pub const GRAD_REL_TOL: f64 = 1e-4;
// Below this magnitude central differences are dominated by round-off.
const GRAD_ABS_FLOOR: f64 = 1e-6;

/// Small random network with a matching random batch and loss.
pub struct GradCase {
    pub net: DeepSithNet,
    pub input: Array3<f64>,
    pub target: Target,
    pub dropout_seed: u64,
}

pub enum Target {
    Regression(Array2<f64>),
    Classes(Vec<usize>),
}

pub fn random_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=2);
    let input_features = rng.random_range(1..=2);
    let layers: Vec<LayerConfig> = (0..depth)
        .map(|_| LayerConfig {
            tau_min: 1.0,
            tau_max: rng.random_range(3.0..8.0),
            n_taus: rng.random_range(2..=4),
            k: rng.random_range(2..=8),
            hidden: rng.random_range(2..=4),
            batch_norm: rng.random_bool(0.5),
        })
        .collect();
    let classify = rng.random_bool(0.5);
    let output_dim = if classify {
        rng.random_range(2..=3)
    } else {
        rng.random_range(1..=2)
    };
    let readout = if !classify && rng.random_bool(0.5) {
        ReadoutMode::EveryStep
    } else {
        ReadoutMode::FinalStep
    };
    let dropout = if depth > 1 && rng.random_bool(0.5) { 0.3 } else { 0.0 };
    let config = NetConfig {
        input_features,
        output_dim,
        layers,
        readout,
        dropout,
    };
    let mut net = DeepSithNet::new(config, &mut rng).unwrap();
    // Biases start at zero, which parks every t = 0 row (the kernels vanish
    // at lag 0) exactly on the ReLU kink. Random values move them off it.
    for p in net.params_mut() {
        p.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
    }
    let (batch, steps) = (rng.random_range(2..=3), rng.random_range(4..=8));
    let input = Array3::from_shape_fn((batch, steps, input_features), |_| rng.random_range(-1.0..1.0));
    let rows = if readout == ReadoutMode::EveryStep {
        batch * steps
    } else {
        batch
    };
    let target = if classify {
        Target::Classes((0..rows).map(|_| rng.random_range(0..output_dim)).collect())
    } else {
        Target::Regression(Array2::from_shape_fn((rows, output_dim), |_| {
            rng.random_range(-1.0..1.0)
        }))
    };
    GradCase {
        net,
        input,
        target,
        dropout_seed: rng.random(),
    }
}

fn loss_and_grad(case: &mut GradCase) -> (f64, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(case.dropout_seed);
    let (out, trace) = case.net.forward_train(&case.input, &mut rng).unwrap();
    let (l, g) = match &case.target {
        Target::Regression(t) => loss::mse(out.view(), t.view()).unwrap(),
        Target::Classes(c) => loss::cross_entropy(out.view(), c).unwrap(),
    };
    let grads = case.net.backward(&trace, g.view()).unwrap();
    (l, grads.slices().iter().map(|s| s.to_vec()).collect())
}

fn loss_only(case: &mut GradCase) -> f64 {
    // The same seed replays the same dropout masks.
    let mut rng = ChaCha8Rng::seed_from_u64(case.dropout_seed);
    let (out, _) = case.net.forward_train(&case.input, &mut rng).unwrap();
    match &case.target {
        Target::Regression(t) => loss::mse(out.view(), t.view()).unwrap().0,
        Target::Classes(c) => loss::cross_entropy(out.view(), c).unwrap().0,
    }
}

fn nudge(case: &mut GradCase, tensor: usize, index: usize, delta: f64) {
    case.net.params_mut()[tensor][index] += delta;
}

fn central(case: &mut GradCase, tensor: usize, index: usize, h: f64) -> f64 {
    nudge(case, tensor, index, h);
    let up = loss_only(case);
    nudge(case, tensor, index, -2.0 * h);
    let down = loss_only(case);
    nudge(case, tensor, index, h);
    (up - down) / (2.0 * h)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_ABS_FLOOR)
}

/// Compares every analytic gradient entry with central differences.
/// Entries whose step-halved estimates disagree sit on a ReLU kink and are
/// skipped.
pub fn check_gradients(seed: u64) -> GradReport {
    let mut case = random_case(seed);
    let (_, analytic) = loss_and_grad(&mut case);
    let h = 1e-5;
    let mut report = GradReport {
        checked: 0,
        skipped_kinks: 0,
        failures: Vec::new(),
    };
    for (t, tensor) in analytic.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let fd = central(&mut case, t, i, h);
            let fd_half = central(&mut case, t, i, h / 2.0);
            if rel_err(fd, fd_half) > GRAD_REL_TOL {
                report.skipped_kinks += 1;
                continue;
            }
            report.checked += 1;
            if rel_err(a, fd_half) > GRAD_REL_TOL {
                report.failures.push(format!(
                    "seed {seed} tensor {t} index {i}: analytic {a:e} vs fd {fd_half:e}"
                ));
            }
        }
    }
    report
}

/// Largest relative gap per tau* between the streaming Laplace memory and
/// the convolution bank at the final step, over random positive inputs.
pub fn laplace_gap(k: u32, steps: usize, n_taus: usize, seed: u64) -> f64 {
    let taus = geometric_taus(5.0, 40.0, n_taus).unwrap();
    let bank = Arc::new(build_kernels(FilterSpec::new(taus.clone(), k)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..steps).map(|_| rng.random_range(0.0..1.0)).collect();
    let direct = sith_forward(&Signal::from_series(&xs).unwrap(), &bank);
    let mut state = LaplaceState::new(Arc::new(SGrid::for_inversion(&taus, k).unwrap()), 1);
    for &x in &xs {
        state.step(&[x], 1.0).unwrap();
    }
    let inverted = post_invert(&state, k, &taus).unwrap();
    (0..n_taus)
        .map(|i| {
            let want = direct.data[[steps - 1, 0, i]];
            (inverted[[0, i]] - want).abs() / want.abs()
        })
        .fold(0.0, f64::max)
}
