//! Seeded minibatch order over a fixed dataset.

use rand::seq::SliceRandom;

use super::sample_rng;
use crate::error::{Error, Result};

/// Index batches for each epoch. The order for epoch `e` depends only on
/// `(seed, e)`, and the last batch keeps whatever is left over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochBatches {
    len: usize,
    batch_size: usize,
    seed: u64,
}

pub fn split_and_batch<T>(dataset: &[T], batch_size: usize, seed: u64) -> Result<EpochBatches> {
    EpochBatches::new(dataset.len(), batch_size, seed)
}

impl EpochBatches {
    pub fn new(len: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("cannot batch an empty dataset"));
        }
        if batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(Self { len, batch_size, seed })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.len.div_ceil(self.batch_size)
    }

    pub fn epoch(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.len).collect();
        order.shuffle(&mut sample_rng(self.seed, epoch));
        order.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_batch_is_a_permutation() {
        let data = [10, 20, 30, 40, 50];
        let b = split_and_batch(&data, 5, 1).unwrap();
        let e = b.epoch(0);
        assert_eq!(e.len(), 1);
        let mut sorted = e[0].clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn union_without_duplicates_and_short_tail() {
        let b = EpochBatches::new(23, 5, 4).unwrap();
        let e = b.epoch(3);
        assert_eq!(e.len(), 5);
        assert_eq!(b.batches_per_epoch(), 5);
        assert_eq!(e.last().unwrap().len(), 3);
        let mut all: Vec<usize> = e.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_per_seed_and_epoch() {
        let a = EpochBatches::new(50, 7, 9).unwrap();
        let b = EpochBatches::new(50, 7, 9).unwrap();
        assert_eq!(a.epoch(2), b.epoch(2));
        assert_ne!(a.epoch(2), a.epoch(3));
    }

    #[test]
    fn rejects_empty_and_zero_batch() {
        assert!(split_and_batch::<u8>(&[], 4, 0).is_err());
        assert!(EpochBatches::new(3, 0, 0).is_err());
    }
}
