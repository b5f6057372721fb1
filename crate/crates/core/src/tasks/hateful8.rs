//! Hateful-8: classify one of eight dot/dash codes that is followed by
//! signal-like noise.
//!
//! A dot is one active step, a dash three; elements are separated by one
//! silent step. The decodable window is 17 steps: the code, padded with
//! silence, always ending in at least a 3-step pause.

use rand::Rng;

use super::sample_rng;
use crate::error::{Error, Result};

pub const DECODABLE_STEPS: usize = 17;
pub const NUM_CLASSES: usize = 8;

/// Fixed code table; class `i` is `HATEFUL8_CODES[i]`.
pub const HATEFUL8_CODES: [&str; NUM_CLASSES] = ["....", "...-", "..-.", ".-..", "-...", "-..-", "-.-.", "--.."];

const PAUSE_PROBABILITY: f64 = 0.1;
const PAUSE_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Hateful8Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

fn push_element(out: &mut Vec<f64>, dash: bool) {
    let len = if dash { 3 } else { 1 };
    out.extend(std::iter::repeat_n(1.0, len));
}

/// The 17-step decodable window for `class`.
pub fn encode_class(class: usize) -> Result<Vec<f64>> {
    let code = HATEFUL8_CODES
        .get(class)
        .ok_or_else(|| Error::invalid(format!("Hateful-8 class must be < 8, got {class}")))?;
    let mut out = Vec::with_capacity(DECODABLE_STEPS);
    for (i, c) in code.chars().enumerate() {
        if i > 0 {
            out.push(0.0);
        }
        push_element(&mut out, c == '-');
    }
    debug_assert!(out.len() <= DECODABLE_STEPS - PAUSE_STEPS);
    out.resize(DECODABLE_STEPS, 0.0);
    Ok(out)
}

/// Dots and dashes with equal probability, one silent step after each and
/// occasionally a 3-step pause instead.
pub fn noise<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 4);
    while out.len() < len {
        push_element(&mut out, rng.random_bool(0.5));
        let gap = if rng.random_bool(PAUSE_PROBABILITY) {
            PAUSE_STEPS
        } else {
            1
        };
        out.extend(std::iter::repeat_n(0.0, gap));
    }
    out.truncate(len);
    out
}

pub fn gen_hateful8(noise_len: usize, class: usize, seed: u64) -> Result<Hateful8Sample> {
    gen_hateful8_with(noise_len, class, &mut sample_rng(seed, 0))
}

pub fn gen_hateful8_with<R: Rng + ?Sized>(noise_len: usize, class: usize, rng: &mut R) -> Result<Hateful8Sample> {
    let mut input = encode_class(class)?;
    input.extend(noise(noise_len, rng));
    Ok(Hateful8Sample { input, label: class })
}

/// `per_class` noisy versions of every class, class-major order.
pub fn hateful8_dataset(noise_len: usize, per_class: usize, seed: u64) -> Result<Vec<Hateful8Sample>> {
    let mut out = Vec::with_capacity(per_class * NUM_CLASSES);
    for class in 0..NUM_CLASSES {
        for copy in 0..per_class {
            let index = (class * per_class + copy) as u64;
            out.push(gen_hateful8_with(noise_len, class, &mut sample_rng(seed, index))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_fit_and_end_in_silence() {
        for class in 0..NUM_CLASSES {
            let w = encode_class(class).unwrap();
            assert_eq!(w.len(), DECODABLE_STEPS);
            assert!(w[14..].iter().all(|&v| v == 0.0));
            assert_eq!(w[0], 1.0);
        }
    }

    #[test]
    fn codes_pairwise_distinct_in_first_14_steps() {
        let windows: Vec<Vec<f64>> = (0..NUM_CLASSES).map(|c| encode_class(c).unwrap()).collect();
        for a in 0..NUM_CLASSES {
            for b in a + 1..NUM_CLASSES {
                assert_ne!(windows[a][..14], windows[b][..14], "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dash_is_three_steps() {
        assert_eq!(
            &encode_class(1).unwrap()[..10],
            &[1., 0., 1., 0., 1., 0., 1., 1., 1., 0.]
        );
    }

    #[test]
    fn dataset_sizes_and_prefixes() {
        let train = hateful8_dataset(50, 32, 1).unwrap();
        let test = hateful8_dataset(50, 10, 2).unwrap();
        assert_eq!(train.len(), 256);
        assert_eq!(test.len(), 80);
        for s in train.iter().chain(&test) {
            assert_eq!(s.input.len(), 67);
            assert!(s.input.iter().all(|&v| v == 0.0 || v == 1.0));
            assert_eq!(s.input[..17], encode_class(s.label).unwrap()[..]);
        }
        let noises: std::collections::HashSet<Vec<u64>> = train
            .iter()
            .filter(|s| s.label == 3)
            .map(|s| s.input[17..].iter().map(|v| v.to_bits()).collect())
            .collect();
        assert!(noises.len() > 28);
    }

    #[test]
    fn noise_mixes_dots_and_dashes() {
        let mut rng = sample_rng(9, 0);
        let n = noise(20_000, &mut rng);
        let mut runs = Vec::new();
        let mut current = 0;
        for &v in &n {
            if v == 1.0 {
                current += 1;
            } else if current > 0 {
                runs.push(current);
                current = 0;
            }
        }
        let dots = runs.iter().filter(|&&r| r == 1).count() as f64;
        let dashes = runs.iter().filter(|&&r| r == 3).count() as f64;
        assert_eq!(dots + dashes, runs.len() as f64);
        assert!((dots / (dots + dashes) - 0.5).abs() < 0.03);
    }

    #[test]
    fn invalid_class() {
        assert!(gen_hateful8(10, 8, 0).is_err());
        assert_eq!(gen_hateful8(0, 7, 0).unwrap().input.len(), 17);
    }
}
