use deepsith::tasks::adding::gen_adding_with;
use deepsith::tasks::hateful8::{encode_class, DECODABLE_STEPS, NUM_CLASSES};
use deepsith::tasks::{
    adding_batch, gen_adding, gen_hateful8, gen_mackey_glass, hateful8_dataset, mg_dataset, sample_rng, EpochBatches,
    MackeyGlassParams,
};
use proptest::prelude::*;

#[test]
fn adding_values_are_uniform() {
    let mut xs: Vec<f64> = (0..200)
        .flat_map(|seed| gen_adding(100, seed).unwrap().input.data().column(0).to_vec())
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at alpha = 0.01.
    assert!(d < 1.628 / n.sqrt(), "D = {d}");
}

#[test]
fn predicting_one_scores_one_sixth() {
    let mut rng = sample_rng(17, 0);
    let n = 1_000_000;
    let mse = (0..n)
        .map(|_| (gen_adding_with(2, &mut rng).unwrap().target - 1.0).powi(2))
        .sum::<f64>()
        / n as f64;
    assert!((mse - 1.0 / 6.0).abs() < 1e-3, "{mse}");
}

#[test]
fn hateful8_windows_are_distinct() {
    let codes: Vec<Vec<f64>> = (0..NUM_CLASSES).map(|c| encode_class(c).unwrap()).collect();
    for a in 0..NUM_CLASSES {
        assert_eq!(codes[a].len(), DECODABLE_STEPS);
        for b in a + 1..NUM_CLASSES {
            assert_ne!(codes[a], codes[b]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generators_are_pure(seed in any::<u64>()) {
        let p = MackeyGlassParams::default();
        let (a, b) = (gen_adding(20, seed).unwrap(), gen_adding(20, seed).unwrap());
        prop_assert_eq!(a.input.data(), b.input.data());
        prop_assert_eq!(adding_batch(10, 3, seed, 4).unwrap(), adding_batch(10, 3, seed, 4).unwrap());
        prop_assert_eq!(gen_hateful8(50, 3, seed).unwrap(), gen_hateful8(50, 3, seed).unwrap());
        prop_assert_eq!(
            gen_mackey_glass(17, 60, seed, &p).unwrap().values,
            gen_mackey_glass(17, 60, seed, &p).unwrap().values
        );
        let (x1, y1) = mg_dataset(17, 5, 2, 40, seed, &p).unwrap();
        let (x2, y2) = mg_dataset(17, 5, 2, 40, seed, &p).unwrap();
        prop_assert_eq!(x1, x2);
        prop_assert_eq!(y1, y2);
    }

    #[test]
    fn adding_target_is_sum_of_marked(seed in any::<u64>(), half in 1usize..60) {
        let s = gen_adding(2 * half, seed).unwrap();
        let x = s.input.data();
        let marked: Vec<usize> = (0..2 * half).filter(|&t| x[[t, 1]] == 1.0).collect();
        prop_assert_eq!(marked.len(), 2);
        prop_assert!(marked[0] < half && marked[1] >= half);
        prop_assert!((s.target - x[[marked[0], 0]] - x[[marked[1], 0]]).abs() < 1e-15);
        prop_assert!((0.0..2.0).contains(&s.target));
    }

    #[test]
    fn hateful8_prefix_decides_class(seed in any::<u64>(), class in 0usize..8, noise_len in 0usize..300) {
        let s = gen_hateful8(noise_len, class, seed).unwrap();
        prop_assert_eq!(s.input.len(), DECODABLE_STEPS + noise_len);
        prop_assert_eq!(&s.input[..DECODABLE_STEPS], &encode_class(class).unwrap()[..]);
        prop_assert!(s.input.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn hateful8_dataset_is_balanced(seed in any::<u64>(), per_class in 1usize..6) {
        let d = hateful8_dataset(20, per_class, seed).unwrap();
        prop_assert_eq!(d.len(), 8 * per_class);
        for c in 0..8 {
            prop_assert_eq!(d.iter().filter(|s| s.label == c).count(), per_class);
        }
    }

    #[test]
    fn mackey_glass_stays_positive_and_bounded(seed in any::<u64>(), tau in 5usize..40) {
        let v = gen_mackey_glass(tau, 400, seed, &MackeyGlassParams::default()).unwrap().values;
        prop_assert!(v.iter().all(|&x| x > 0.0 && x < 2.0));
    }

    #[test]
    fn epochs_are_permutations(len in 1usize..200, batch in 1usize..40, seed in any::<u64>(), e in 0u64..5) {
        let b = EpochBatches::new(len, batch, seed).unwrap();
        let mut all: Vec<usize> = b.epoch(e).into_iter().flatten().collect();
        prop_assert_eq!(b.epoch(e), b.epoch(e));
        all.sort_unstable();
        prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        prop_assert_eq!(b.epoch(e).len(), len.div_ceil(batch));
    }
}
