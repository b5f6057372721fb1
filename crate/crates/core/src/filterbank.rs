//! Fixed scale-invariant temporal filters.
//!
//! A bank is a set of gamma-shaped impulse responses `x^k e^{-kx}` with
//! `x = lag / tau*`, one per entry of a geometrically spaced `tau*` grid. The
//! filters are not learned; they give every layer a log-compressed view of
//! its input history.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

/// Default fraction of each kernel's continuous area kept after truncation.
pub const DEFAULT_TRUNCATION_MASS: f64 = 0.999;

/// Default upper bound for the k scan in [`select_k`].
pub const DEFAULT_K_MAX: u32 = 300;

/// Log-time samples per grid interval used by [`std_ratio_objective`].
const OBJECTIVE_SAMPLES_PER_INTERVAL: usize = 200;

/// Peak times `tau*_i = tau_min (1 + c)^i`, evenly spaced on a log axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauStarGrid {
    tau_min: f64,
    tau_max: f64,
    values: Vec<f64>,
    c: f64,
}

impl TauStarGrid {
    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Growth factor between neighbours: `values[i+1] / values[i] == 1 + c`.
    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Builds `count` log-evenly spaced peak times from `tau_min` to `tau_max`
/// inclusive.
pub fn geometric_taus(tau_min: f64, tau_max: f64, count: usize) -> Result<TauStarGrid> {
    if count < 2 {
        return Err(Error::invalid(format!(
            "tau* grid needs at least 2 points, got {count}"
        )));
    }
    if !(tau_min.is_finite() && tau_max.is_finite()) || tau_min <= 0.0 {
        return Err(Error::invalid(format!(
            "tau* bounds must be finite and positive, got ({tau_min}, {tau_max})"
        )));
    }
    if tau_max <= tau_min {
        return Err(Error::invalid(format!(
            "tau_max ({tau_max}) must exceed tau_min ({tau_min})"
        )));
    }
    let log_min = tau_min.ln();
    let step = (tau_max.ln() - log_min) / (count - 1) as f64;
    let mut values: Vec<f64> = (0..count).map(|i| (log_min + step * i as f64).exp()).collect();
    values[0] = tau_min;
    values[count - 1] = tau_max;
    Ok(TauStarGrid {
        tau_min,
        tau_max,
        values,
        c: step.exp_m1(),
    })
}

/// Unnormalized gamma kernel `x^k e^{-kx}`, evaluated in log space.
pub fn phi(x: f64, k: u32) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("phi is defined for x >= 0, got {x}")));
    }
    if k == 0 {
        return Err(Error::invalid("phi needs k >= 1"));
    }
    Ok(log_phi(x, k).exp())
}

fn log_phi(x: f64, k: u32) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let k = f64::from(k);
    k * (x.ln() - x)
}

/// Parameters of a discretized bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub grid: TauStarGrid,
    pub k: u32,
    pub dt: f64,
    pub truncation_mass: f64,
    /// Hard cap on any row's truncation length. `None` means `16 tau_max / dt`.
    pub max_len: Option<usize>,
}

impl FilterSpec {
    pub fn new(grid: TauStarGrid, k: u32) -> Self {
        Self {
            grid,
            k,
            dt: 1.0,
            truncation_mass: DEFAULT_TRUNCATION_MASS,
            max_len: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_truncation_mass(mut self, mass: f64) -> Self {
        self.truncation_mass = mass;
        self
    }

    pub fn with_max_len(mut self, cap: usize) -> Self {
        self.max_len = Some(cap);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.truncation_mass > 0.99 && self.truncation_mass < 1.0) {
            return Err(Error::invalid(format!(
                "truncation mass must lie in (0.99, 1), got {}",
                self.truncation_mass
            )));
        }
        Ok(())
    }

    fn length_cap(&self) -> usize {
        self.max_len
            .unwrap_or_else(|| (16.0 * self.grid.tau_max / self.dt).ceil() as usize)
    }
}

/// Discrete, area-normalized kernels, one row per `tau*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    spec: FilterSpec,
    kernels: Vec<Vec<f64>>,
}

impl FilterBank {
    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn num_taus(&self) -> usize {
        self.kernels.len()
    }

    /// Taps of row `i`, indexed by lag `0..=L_i`.
    pub fn kernel(&self, i: usize) -> &[f64] {
        &self.kernels[i]
    }

    pub fn kernels(&self) -> &[Vec<f64>] {
        &self.kernels
    }

    /// Truncation lengths `L_i` (the last lag of each row).
    pub fn lengths(&self) -> Vec<usize> {
        self.kernels.iter().map(|row| row.len() - 1).collect()
    }

    pub fn max_lag(&self) -> usize {
        self.kernels.iter().map(|row| row.len() - 1).max().unwrap_or(0)
    }
}

/// Samples `phi(lag dt / tau*, k)` for every row, truncates each row once it
/// holds `truncation_mass` of the continuous area and renormalizes it to sum
/// to one.
pub fn build_kernels(spec: FilterSpec) -> Result<FilterBank> {
    spec.validate()?;
    let cap = spec.length_cap();
    let k = spec.k;
    let shape = f64::from(k) + 1.0;
    let mut kernels = Vec::with_capacity(spec.grid.len());
    for &tau in spec.grid.values() {
        // Continuous mass of x^k e^{-kx} on [0, X] is P(k+1, kX).
        let scale = spec.dt / tau;
        let mass_at = |lag: usize| gamma_lr(shape, f64::from(k) * lag as f64 * scale);
        let mut len = (tau / spec.dt).ceil().max(1.0) as usize;
        while mass_at(len) < spec.truncation_mass {
            len += 1;
            if len > cap {
                return Err(Error::KernelTooLong { tau, needed: len, cap });
            }
        }
        if len > cap {
            return Err(Error::KernelTooLong { tau, needed: len, cap });
        }
        let logs: Vec<f64> = (0..=len).map(|lag| log_phi(lag as f64 * scale, k)).collect();
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut row: Vec<f64> = logs.iter().map(|&l| (l - peak).exp()).collect();
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
        kernels.push(row);
    }
    Ok(FilterBank { spec, kernels })
}

/// Mean and standard deviation of the lag, treating a kernel row as a
/// distribution over lags.
pub fn lag_moments(row: &[f64]) -> (f64, f64) {
    let total: f64 = row.iter().sum();
    let mean = row.iter().enumerate().map(|(l, w)| l as f64 * w).sum::<f64>() / total;
    let var = row
        .iter()
        .enumerate()
        .map(|(l, w)| w * (l as f64 - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var.sqrt())
}

/// Coefficient of variation (lag std over lag mean) of a kernel row.
pub fn coefficient_of_variation(row: &[f64]) -> f64 {
    let (mean, std) = lag_moments(row);
    std / mean
}

/// Ratio of the temporal standard deviation of the summed filters to that of
/// the odd-indexed filters alone.
///
/// Filters are peak-normalized to height one and sampled on a log-even time
/// axis spanning `[tau_min, tau_max]`. Small values mean the full bank tiles
/// time evenly while each half of it leaves gaps.
pub fn std_ratio_objective(grid: &TauStarGrid, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let exponents = objective_exponents(grid);
    Ok(ratio_for_k(&exponents, grid.len(), k))
}

// Row-major (tau*, time) table of `ln x - x + 1`, with x = t / tau*.
fn objective_exponents(grid: &TauStarGrid) -> Vec<f64> {
    let samples = OBJECTIVE_SAMPLES_PER_INTERVAL * (grid.len() - 1) + 1;
    let lo = grid.tau_min.ln();
    let step = (grid.tau_max.ln() - lo) / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|j| (lo + step * j as f64).exp()).collect();
    let mut out = Vec::with_capacity(samples * grid.len());
    for &tau in grid.values() {
        out.extend(times.iter().map(|&t| {
            let x = t / tau;
            x.ln() - x + 1.0
        }));
    }
    out
}

fn ratio_for_k(exponents: &[f64], rows: usize, k: u32) -> f64 {
    let samples = exponents.len() / rows;
    let k = f64::from(k);
    let mut all = vec![0.0; samples];
    let mut alt = vec![0.0; samples];
    for (i, row) in exponents.chunks_exact(samples).enumerate() {
        for (j, &e) in row.iter().enumerate() {
            let v = (k * e).exp();
            all[j] += v;
            if i % 2 == 1 {
                alt[j] += v;
            }
        }
    }
    population_std(&all) / population_std(&alt)
}

fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Result of scanning integer `k` values for the flattest bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub candidate_ks: Vec<u32>,
    pub objective_values: Vec<f64>,
    pub chosen_k: u32,
}

impl KSelectionReport {
    /// Writes `k,objective` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["k", "objective"])?;
        for (k, v) in self.candidate_ks.iter().zip(&self.objective_values) {
            out.write_record([k.to_string(), format!("{v:e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Scans `k = 1..=k_max` and picks the minimizer of [`std_ratio_objective`];
/// ties go to the smaller k.
pub fn select_k(grid: &TauStarGrid, k_max: u32) -> Result<KSelectionReport> {
    if k_max < 2 {
        return Err(Error::invalid(format!("k_max must be >= 2, got {k_max}")));
    }
    let exponents = objective_exponents(grid);
    let candidate_ks: Vec<u32> = (1..=k_max).collect();
    let objective_values: Vec<f64> = candidate_ks
        .iter()
        .map(|&k| ratio_for_k(&exponents, grid.len(), k))
        .collect();
    let mut best = 0;
    for (i, v) in objective_values.iter().enumerate() {
        if *v < objective_values[best] {
            best = i;
        }
    }
    Ok(KSelectionReport {
        chosen_k: candidate_ks[best],
        candidate_ks,
        objective_values,
    })
}
