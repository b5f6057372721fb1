//! The adding problem: remember two marked values and report their sum.

use ndarray::{Array2, Array3};
use rand::Rng;

use super::sample_rng;
use crate::error::{Error, Result};
use crate::sith::Signal;

#[derive(Debug, Clone, PartialEq)]
pub struct AddingSample {
    /// `T x 2`: uniform values in column 0, two unit markers in column 1.
    pub input: Signal,
    pub target: f64,
    pub markers: [usize; 2],
}

fn check_length(steps: usize) -> Result<()> {
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "adding problem needs an even length >= 2, got {steps}"
        )));
    }
    Ok(())
}

pub fn gen_adding(steps: usize, seed: u64) -> Result<AddingSample> {
    gen_adding_with(steps, &mut sample_rng(seed, 0))
}

pub fn gen_adding_with<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> Result<AddingSample> {
    check_length(steps)?;
    let half = steps / 2;
    let mut data = Array2::zeros((steps, 2));
    for t in 0..steps {
        data[[t, 0]] = rng.random::<f64>();
    }
    let first = rng.random_range(0..half);
    let second = rng.random_range(half..steps);
    data[[first, 1]] = 1.0;
    data[[second, 1]] = 1.0;
    let target = data[[first, 0]] + data[[second, 0]];
    Ok(AddingSample {
        input: Signal::new(data)?,
        target,
        markers: [first, second],
    })
}

/// Batch `index` of a fresh stream: inputs `B x T x 2`, targets `B x 1`.
pub fn adding_batch(steps: usize, batch: usize, seed: u64, index: u64) -> Result<(Array3<f64>, Array2<f64>)> {
    check_length(steps)?;
    let mut rng = sample_rng(seed, index);
    let mut inputs = Array3::zeros((batch, steps, 2));
    let mut targets = Array2::zeros((batch, 1));
    for b in 0..batch {
        let s = gen_adding_with(steps, &mut rng)?;
        inputs.slice_mut(ndarray::s![b, .., ..]).assign(s.input.data());
        targets[[b, 0]] = s.target;
    }
    Ok((inputs, targets))
}
