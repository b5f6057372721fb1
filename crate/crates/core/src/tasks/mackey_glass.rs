//! Mackey-Glass delay differential equation
//! `dx/dt = beta x(t - tau) / (1 + x(t - tau)^n) - gamma x(t)`.

use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sample_rng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MackeyGlassParams {
    pub beta: f64,
    pub gamma: f64,
    pub n: f64,
    /// RK4 step; `1 / dt` must be a whole number.
    pub dt: f64,
    /// Time units integrated and discarded before output starts. Long
    /// enough that series from nearby histories have decorrelated.
    pub warmup: usize,
    pub history_level: f64,
    /// Half-width of the uniform jitter added to each history point.
    pub history_jitter: f64,
    /// Subtract the pooled mean of the generated set from inputs and targets.
    /// NRMSE is unchanged; training no longer has to learn the offset.
    pub center: bool,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            n: 10.0,
            dt: 1.0,
            warmup: 6000,
            history_level: 1.2,
            history_jitter: 0.1,
            center: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgSeries {
    pub values: Vec<f64>,
    pub tau: usize,
    pub params: MackeyGlassParams,
    pub warmup_dropped: usize,
}

/// Integrates with RK4, interpolating the delayed term linearly, and emits
/// `length` samples spaced one time unit apart after the warmup.
pub fn gen_mackey_glass(tau: usize, length: usize, seed: u64, params: &MackeyGlassParams) -> Result<MgSeries> {
    gen_mackey_glass_with(tau, length, params, &mut sample_rng(seed, 0))
}

pub fn gen_mackey_glass_with<R: Rng + ?Sized>(
    tau: usize,
    length: usize,
    params: &MackeyGlassParams,
    rng: &mut R,
) -> Result<MgSeries> {
    if tau < 1 {
        return Err(Error::invalid("Mackey-Glass delay must be >= 1"));
    }
    if length < 1 {
        return Err(Error::invalid("Mackey-Glass length must be >= 1"));
    }
    let per_unit = (1.0 / params.dt).round();
    if !(params.dt > 0.0) || per_unit < 1.0 || ((1.0 / params.dt) - per_unit).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "1/dt must be a whole number, got dt={}",
            params.dt
        )));
    }
    let per_unit = per_unit as usize;
    let delay = tau * per_unit;
    let total_steps = (params.warmup + length) * per_unit;

    let mut xs = Vec::with_capacity(delay + 1 + total_steps);
    for _ in 0..=delay {
        let jitter = if params.history_jitter > 0.0 {
            rng.random_range(-params.history_jitter..=params.history_jitter)
        } else {
            0.0
        };
        xs.push(params.history_level + jitter);
    }

    let (beta, gamma, n, h) = (params.beta, params.gamma, params.n, params.dt);
    let rhs = |x: f64, lagged: f64| beta * lagged / (1.0 + lagged.powf(n)) - gamma * x;
    let mut values = Vec::with_capacity(length);
    for step in 0..total_steps {
        let now = delay + step;
        let x = xs[now];
        // x(t - tau) sits `delay` slots back.
        let lag0 = xs[now - delay];
        let lag1 = xs[now - delay + 1];
        let lag_half = 0.5 * (lag0 + lag1);
        let k1 = rhs(x, lag0);
        let k2 = rhs(x + 0.5 * h * k1, lag_half);
        let k3 = rhs(x + 0.5 * h * k2, lag_half);
        let k4 = rhs(x + h * k3, lag1);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Diverged(format!(
                "Mackey-Glass state became {next} at step {step}"
            )));
        }
        xs.push(next);
        let done = step + 1;
        if done > params.warmup * per_unit && done % per_unit == 0 {
            values.push(next);
        }
    }
    Ok(MgSeries {
        values,
        tau,
        params: params.clone(),
        warmup_dropped: params.warmup,
    })
}

/// Forecasting pairs: signal `i` comes from stream `i` of `seed`; the input
/// is `x[0..steps]` and the target `x[distance..distance + steps]`.
/// Both arrays are `signals x steps x 1`.
pub fn mg_dataset(
    tau: usize,
    distance: usize,
    signals: usize,
    steps: usize,
    seed: u64,
    params: &MackeyGlassParams,
) -> Result<(Array3<f64>, Array3<f64>)> {
    if signals == 0 || steps == 0 {
        return Err(Error::invalid(
            "Mackey-Glass dataset needs at least one signal and one step",
        ));
    }
    let mut inputs = Array3::zeros((signals, steps, 1));
    let mut targets = Array3::zeros((signals, steps, 1));
    for i in 0..signals {
        let series = gen_mackey_glass_with(tau, steps + distance, params, &mut sample_rng(seed, i as u64))?;
        for t in 0..steps {
            inputs[[i, t, 0]] = series.values[t];
            targets[[i, t, 0]] = series.values[t + distance];
        }
    }
    if params.center {
        let mean = inputs.mean().unwrap_or(0.0);
        inputs -= mean;
        targets -= mean;
    }
    Ok((inputs, targets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_is_preserved() {
        let params = MackeyGlassParams {
            history_level: 1.0,
            history_jitter: 0.0,
            ..Default::default()
        };
        let s = gen_mackey_glass(17, 1000, 0, &params).unwrap();
        assert_eq!(s.values.len(), 1000);
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn fixed_point_with_substeps() {
        let params = MackeyGlassParams {
            history_level: 1.0,
            history_jitter: 0.0,
            dt: 0.25,
            ..Default::default()
        };
        let s = gen_mackey_glass(30, 200, 0, &params).unwrap();
        assert_eq!(s.values.len(), 200);
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn same_seed_same_series() {
        let p = MackeyGlassParams::default();
        let a = gen_mackey_glass(17, 300, 5, &p).unwrap();
        let b = gen_mackey_glass(17, 300, 5, &p).unwrap();
        let c = gen_mackey_glass(17, 300, 6, &p).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn aperiodic_at_tau_17() {
        let s = gen_mackey_glass(17, 3000, 1, &MackeyGlassParams::default()).unwrap();
        let x = &s.values;
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        for lag in 1..=500 {
            let n = centered.len() - lag;
            let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for t in 0..n {
                let (a, b) = (centered[t], centered[t + lag]);
                ab += a * b;
                aa += a * a;
                bb += b * b;
            }
            let r = ab / (aa * bb).sqrt();
            assert!(r < 0.999, "lag {lag} autocorrelation {r}");
        }
    }

    #[test]
    fn dataset_target_is_shifted_input() {
        let p = MackeyGlassParams::default();
        let (x, y) = mg_dataset(17, 15, 3, 100, 2, &p).unwrap();
        assert_eq!(x.dim(), (3, 100, 1));
        for i in 0..3 {
            for t in 0..85 {
                assert_eq!(y[[i, t, 0]], x[[i, t + 15, 0]]);
            }
        }
        assert_ne!(x.slice(ndarray::s![0, .., 0]), x.slice(ndarray::s![1, .., 0]));
    }

    #[test]
    fn centering_is_one_shift() {
        let raw = MackeyGlassParams {
            center: false,
            ..Default::default()
        };
        let (x0, y0) = mg_dataset(17, 15, 4, 60, 5, &raw).unwrap();
        let (x, y) = mg_dataset(17, 15, 4, 60, 5, &MackeyGlassParams::default()).unwrap();
        assert!(x.mean().unwrap().abs() < 1e-12);
        let shift = x0[[0, 0, 0]] - x[[0, 0, 0]];
        assert!(shift > 0.3);
        for (a, b) in x0.iter().chain(y0.iter()).zip(x.iter().chain(y.iter())) {
            assert!((a - b - shift).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = MackeyGlassParams::default();
        assert!(gen_mackey_glass(0, 10, 0, &p).is_err());
        assert!(gen_mackey_glass(17, 0, 0, &p).is_err());
        let odd = MackeyGlassParams {
            dt: 0.3,
            ..Default::default()
        };
        assert!(gen_mackey_glass(17, 10, 0, &odd).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let p = MackeyGlassParams {
            gamma: -50.0,
            ..Default::default()
        };
        assert!(matches!(gen_mackey_glass(17, 400, 0, &p), Err(Error::Diverged(_))));
    }
}
