//! Seeded benchmark generators and dataset plumbing.
//!
//! Every generator is a pure function of its parameters and seed. Samples
//! inside a dataset draw from their own ChaCha stream, keyed by
//! `(master seed, sample index)`, so any subset can be regenerated
//! independently and in any order.

pub mod adding;
pub mod batching;
pub mod export;
pub mod hateful8;
pub mod mackey_glass;
pub mod mnist;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adding::{adding_batch, gen_adding, AddingSample};
pub use batching::{split_and_batch, EpochBatches};
pub use hateful8::{gen_hateful8, hateful8_dataset, Hateful8Sample, HATEFUL8_CODES};
pub use mackey_glass::{gen_mackey_glass, mg_dataset, MackeyGlassParams, MgSeries};
pub use mnist::{load_mnist_sequences, MnistData, MnistSequence, MnistSet};

/// Random stream for item `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
