mod common;

use common::laplace_gap;

#[test]
fn streaming_memory_matches_convolution() {
    for k in [2, 4, 8] {
        for seed in 0..3 {
            let gap = laplace_gap(k, 200, 6, seed);
            assert!(gap < 0.1, "k={k} seed={seed}: relative gap {gap}");
        }
    }
}
