//! Shared helpers for the integration suites.

use gfra::rand_chacha::rand_core::SeedableRng;
use gfra::rand_chacha::ChaCha12Rng;

/// Deterministic per-trial stream, mirroring the campaign convention
/// (key = seed, stream = trial index).
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}
