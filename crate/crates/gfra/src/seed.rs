//! Deterministic seed derivation for parallel work.
//!
//! Trials inside a campaign use ChaCha12 with the campaign seed as key and
//! the trial index as stream number, so any trial can be generated
//! independently of thread scheduling. Sweeps over grid points derive one
//! campaign seed per point with a SplitMix64 step, keeping points decoupled
//! from each other and from the grid size.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; the standard 64-bit bit-mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Campaign seed for grid point `index` under sweep master seed `master`.
pub(crate) fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// RNG substream for one trial: ChaCha12 keyed by the campaign seed, with the
/// trial index as the stream number.
pub(crate) fn trial_rng(campaign_seed: u64, trial_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(campaign_seed);
    rng.set_stream(trial_index);
    rng
}
