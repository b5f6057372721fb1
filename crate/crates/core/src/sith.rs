//! Causal convolution of a multivariate series with a [`FilterBank`].
//!
//! `out[t, f, i] = sum_l kernel_i[l] * signal[t - l, f]`, with zero history
//! before `t = 0`. The backward pass is the exact adjoint (a correlation).

use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;

/// A `T x F` time-major series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    data: Array2<f64>,
}

impl Signal {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (t, f) = data.dim();
        if t == 0 || f == 0 {
            return Err(Error::invalid(format!("signal must be non-empty, got {t}x{f}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("signal contains non-finite values"));
        }
        Ok(Self { data })
    }

    /// One feature, `values.len()` timesteps.
    pub fn from_series(values: &[f64]) -> Result<Self> {
        Self::new(
            Array2::from_shape_vec((values.len(), 1), values.to_vec()).map_err(|e| Error::invalid(e.to_string()))?,
        )
    }

    pub fn from_vec(steps: usize, features: usize, data: Vec<f64>) -> Result<Self> {
        let arr = Array2::from_shape_vec((steps, features), data)
            .map_err(|_| Error::shape(format!("{steps}x{features}"), "buffer of another length"))?;
        Self::new(arr)
    }

    pub fn steps(&self) -> usize {
        self.data.nrows()
    }

    pub fn features(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Memory tensor `T x F x N_tau*`.
#[derive(Debug, Clone)]
pub struct SithActivation {
    pub data: Array3<f64>,
    pub bank: Arc<FilterBank>,
}

pub fn sith_forward(signal: &Signal, bank: &Arc<FilterBank>) -> SithActivation {
    let (steps, features) = signal.data.dim();
    let taus = bank.num_taus();
    let mut flat = Array2::zeros((steps, features * taus));
    convolve_all(signal.view(), bank, flat.view_mut());
    let data = flat
        .into_shape_with_order((steps, features, taus))
        .expect("row-major (T, F*N) reshapes to (T, F, N)");
    SithActivation {
        data,
        bank: Arc::clone(bank),
    }
}

/// Vector-Jacobian product of [`sith_forward`] with respect to its input.
pub fn sith_backward(grad_out: &Array3<f64>, bank: &FilterBank) -> Result<Array2<f64>> {
    let (steps, features, taus) = grad_out.dim();
    if taus != bank.num_taus() {
        return Err(Error::shape(
            format!("{} tau* columns", bank.num_taus()),
            format!("{taus}"),
        ));
    }
    let flat = grad_out
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((steps, features * taus))
        .expect("contiguous gradient reshapes");
    let mut grad_in = Array2::zeros((steps, features));
    correlate_all(flat.view(), bank, grad_in.view_mut());
    Ok(grad_in)
}

// The routines below work on the flattened `(T, F*N)` layout used by the
// dense layers, column `f * N + i`.

/// Full causal convolution into `out` (shape `T x F*N`), overwriting it.
pub(crate) fn convolve_all(input: ArrayView2<f64>, bank: &FilterBank, mut out: ArrayViewMut2<f64>) {
    let (steps, features) = input.dim();
    let taus = bank.num_taus();
    debug_assert_eq!(out.dim(), (steps, features * taus));
    let mut x = vec![0.0; steps];
    let mut y = vec![0.0; steps];
    for f in 0..features {
        for (dst, v) in x.iter_mut().zip(input.column(f)) {
            *dst = *v;
        }
        for i in 0..taus {
            y.iter_mut().for_each(|v| *v = 0.0);
            let kernel = bank.kernel(i);
            for (lag, &w) in kernel.iter().enumerate().take(steps) {
                if w == 0.0 {
                    continue;
                }
                for (acc, &xv) in y[lag..].iter_mut().zip(&x[..steps - lag]) {
                    *acc += w * xv;
                }
            }
            let col = f * taus + i;
            for (t, &v) in y.iter().enumerate() {
                out[[t, col]] = v;
            }
        }
    }
}

/// Convolution evaluated only at the final timestep: returns the `F*N` row.
pub(crate) fn convolve_last(input: ArrayView2<f64>, bank: &FilterBank) -> Vec<f64> {
    let (steps, features) = input.dim();
    let taus = bank.num_taus();
    let mut out = vec![0.0; features * taus];
    for f in 0..features {
        let x = input.column(f);
        for i in 0..taus {
            out[f * taus + i] = bank
                .kernel(i)
                .iter()
                .take(steps)
                .enumerate()
                .map(|(lag, &w)| w * x[steps - 1 - lag])
                .sum();
        }
    }
    out
}

/// Adjoint of [`convolve_all`], accumulated into `grad_in` (shape `T x F`).
pub(crate) fn correlate_all(grad: ArrayView2<f64>, bank: &FilterBank, mut grad_in: ArrayViewMut2<f64>) {
    let (steps, features) = grad_in.dim();
    let taus = bank.num_taus();
    let mut g = vec![0.0; steps];
    let mut acc = vec![0.0; steps];
    for f in 0..features {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..taus {
            let col = f * taus + i;
            for (dst, v) in g.iter_mut().zip(grad.column(col)) {
                *dst = *v;
            }
            for (lag, &w) in bank.kernel(i).iter().enumerate().take(steps) {
                if w == 0.0 {
                    continue;
                }
                for (a, &gv) in acc[..steps - lag].iter_mut().zip(&g[lag..]) {
                    *a += w * gv;
                }
            }
        }
        for (dst, v) in grad_in.column_mut(f).iter_mut().zip(&acc) {
            *dst += *v;
        }
    }
}

/// Adjoint of [`convolve_last`], accumulated into `grad_in` (shape `T x F`).
pub(crate) fn correlate_last(grad_row: &[f64], bank: &FilterBank, mut grad_in: ArrayViewMut2<f64>) {
    let (steps, features) = grad_in.dim();
    let taus = bank.num_taus();
    for f in 0..features {
        for i in 0..taus {
            let g = grad_row[f * taus + i];
            if g == 0.0 {
                continue;
            }
            for (lag, &w) in bank.kernel(i).iter().enumerate().take(steps) {
                grad_in[[steps - 1 - lag, f]] += w * g;
            }
        }
    }
}
