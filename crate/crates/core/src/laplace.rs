//! Streaming temporal memory through the real Laplace domain.
//!
//! Each feature keeps `F(t, s)` on a log-spaced grid of decay rates and
//! integrates `dF/dt = -s F + f(t)`. Reading the memory out uses the Post
//! inversion `C_k s^{k+1} d^k F / ds^k` at `s = k / tau*`, which recovers the
//! same gamma-shaped history as [`crate::sith`] without storing the past.
//! Only modest `k` are supported: the k-th finite difference loses precision
//! quickly as `k` grows.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::filterbank::TauStarGrid;

/// Largest `k` accepted by [`post_invert`] by default.
pub const DEFAULT_MAX_POST_K: u32 = 8;

/// Minimum oversampling of the `s` grid per `tau*` interval.
pub const MIN_OVERSAMPLING: usize = 4;

/// Log-even grid of decay rates that contains every `k / tau*_i` exactly,
/// with `k` padding points on either side for the derivative stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct SGrid {
    /// Ascending decay rates (so descending in `tau*`).
    s_values: Vec<f64>,
    k: u32,
    oversampling: usize,
    taus: TauStarGrid,
}

impl SGrid {
    /// Grid with `oversampling` points per `tau*` interval.
    pub fn new(taus: &TauStarGrid, k: u32, oversampling: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("Post inversion needs k >= 1"));
        }
        if oversampling == 0 {
            return Err(Error::invalid("oversampling must be >= 1"));
        }
        let n = taus.len();
        let kk = k as usize;
        let log_ratio = (1.0 + taus.c()).ln() / oversampling as f64;
        let s_low = f64::from(k) / taus.tau_max();
        let count = oversampling * (n - 1) + 1 + 2 * kk;
        let s_values = (0..count)
            .map(|j| s_low * ((j as f64 - kk as f64) * log_ratio).exp())
            .collect();
        Ok(Self {
            s_values,
            k,
            oversampling,
            taus: taus.clone(),
        })
    }

    /// Grid whose spacing balances truncation against rounding error of the
    /// k-th difference, never coarser than [`MIN_OVERSAMPLING`].
    pub fn for_inversion(taus: &TauStarGrid, k: u32) -> Result<Self> {
        let step = balanced_relative_step(k);
        let needed = ((1.0 + taus.c()).ln() / step.ln_1p()).ceil() as usize;
        Self::new(taus, k, needed.max(MIN_OVERSAMPLING))
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn taus(&self) -> &TauStarGrid {
        &self.taus
    }

    /// Index of `k / tau*_i` in [`Self::s_values`].
    pub fn target_index(&self, i: usize) -> usize {
        self.k as usize + self.oversampling * (self.taus.len() - 1 - i)
    }
}

// Relative s-step that minimizes k^3 d^2 / 6 + eps 2^k / (k! d^k).
fn balanced_relative_step(k: u32) -> f64 {
    let k = f64::from(k);
    let log_fact: f64 = (1..=k as u64).map(|i| (i as f64).ln()).sum();
    let rhs = (3.0 * f64::EPSILON).ln() + k * 2f64.ln() - 2.0 * k.ln() - log_fact;
    (rhs / (k + 2.0)).exp()
}

/// `F(t, s)` for each input feature, row per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceState {
    grid: Arc<SGrid>,
    values: Array2<f64>,
    time: f64,
}

impl LaplaceState {
    pub fn new(grid: Arc<SGrid>, features: usize) -> Self {
        let width = grid.len();
        Self {
            grid,
            values: Array2::zeros((features, width)),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &SGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn features(&self) -> usize {
        self.values.nrows()
    }

    /// Exponential-Euler step: `F <- F e^{-s dt} + f dt`.
    pub fn step(&mut self, input: &[f64], dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if input.len() != self.features() {
            return Err(Error::shape(
                format!("{} features", self.features()),
                format!("{}", input.len()),
            ));
        }
        let decay: Vec<f64> = self.grid.s_values.iter().map(|s| (-s * dt).exp()).collect();
        for (mut row, &x) in self.values.outer_iter_mut().zip(input) {
            for (v, d) in row.iter_mut().zip(&decay) {
                *v = *v * d + x * dt;
            }
        }
        self.time += dt;
        Ok(())
    }
}

pub fn laplace_step(mut state: LaplaceState, input: &[f64], dt: f64) -> Result<LaplaceState> {
    state.step(input, dt)?;
    Ok(state)
}

/// Post inversion of `state` at every `tau*` of `taus`. Returns `F x N`.
pub fn post_invert(state: &LaplaceState, k: u32, taus: &TauStarGrid) -> Result<Array2<f64>> {
    post_invert_with_cap(state, k, taus, DEFAULT_MAX_POST_K)
}

pub fn post_invert_with_cap(state: &LaplaceState, k: u32, taus: &TauStarGrid, max_k: u32) -> Result<Array2<f64>> {
    if k > max_k {
        return Err(Error::UnsupportedK { k, max: max_k });
    }
    let grid = &state.grid;
    if grid.k != k || grid.taus != *taus {
        return Err(Error::invalid(
            "state's s grid was built for a different k or tau* grid",
        ));
    }
    let s = &grid.s_values;
    let n = taus.len();
    // C_k s^{k+1} with C_k = (-1)^k / k!
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let log_fact: f64 = (1..=u64::from(k)).map(|i| (i as f64).ln()).sum();
    let mut out = Array2::zeros((state.features(), n));
    let mut work = vec![0.0; s.len()];
    let mut next = vec![0.0; s.len()];
    for (f, row) in state.values.outer_iter().enumerate() {
        work.iter_mut().zip(row.iter()).for_each(|(w, v)| *w = *v);
        // After pass p, entries p..len-p hold the p-th derivative.
        for pass in 1..=k as usize {
            for j in pass..s.len() - pass {
                next[j] = (work[j + 1] - work[j - 1]) / (s[j + 1] - s[j - 1]);
            }
            std::mem::swap(&mut work, &mut next);
        }
        for i in 0..n {
            let j = grid.target_index(i);
            let sj = s[j];
            let scale = sign * ((f64::from(k) + 1.0) * sj.ln() - log_fact).exp();
            out[[f, i]] = scale * work[j];
        }
    }
    Ok(out)
}
