//! Deterministic random substreams.
//!
//! Every Monte Carlo loop derives one generator per trial from
//! `(seed, tag, trial)`, so the multiset of per-trial results depends only on
//! the seed and the trial count, never on thread scheduling. Results are
//! collected and reduced in trial-index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent 64-bit seed for a labelled sub-experiment.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Generator for trial `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Run `trials` independent trials, trial `i` seeing `substream(seed, i)`.
/// The returned vector is in trial-index order.
pub fn run_trials<T, F>(seed: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng) -> T + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            f(&mut rng)
        })
        .collect()
}
