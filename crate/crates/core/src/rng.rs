//! Labeled random streams derived from one master seed.
//!
//! Each component (environment, exploration, initialization, worker `i`)
//! draws from its own ChaCha stream selected by a hash of its label, so
//! adding a consumer never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a of the label, used as the ChaCha stream id.
fn label_id(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn stream(master_seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(label_id(label));
    rng
}

/// A 64-bit seed for components that own their generator (environments).
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    stream(master_seed, label).next_u64()
}
