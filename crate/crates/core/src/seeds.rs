//! Seed derivation and the counter-based hash used for site lookups.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed for `(stream, index)` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ 0x5851_F42D_4C95_7F2D);
    let b = splitmix64(a ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ index.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Walk-side generator for `(stream, index)` under `master`.
pub fn walk_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

/// Top 53 bits as a uniform value in `[0, 1)`.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Streams used by the estimators, so the same master seed never feeds two
/// unrelated consumers.
pub mod stream {
    pub const ENVIRONMENT: u64 = 1;
    pub const WALK: u64 = 2;
    pub const KILLING: u64 = 3;
    pub const INSTANCE: u64 = 4;
    pub const GREEN_SIDE: u64 = 5;
    pub const RECIPE: u64 = 6;
}
