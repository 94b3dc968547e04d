//! Counter-based deterministic random stream (SplitMix64).
//!
//! Draw `k` of the stream seeded by `seed` is the SplitMix64 finalizer applied
//! to `seed + (k+1) * 0x9E3779B97F4A7C15`, i.e. the standard SplitMix64
//! sequence with random access by index. Every consumer in the crate addresses
//! draws by counter, so results do not depend on traversal order.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw `k` (0-based) of the stream seeded by `seed`.
#[inline]
pub fn stream(seed: u64, k: u64) -> u64 {
    finalize(seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Uniform in `[0, 1)`, 53 significant bits.
#[inline]
pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform in `(0, 1]`; safe as the argument of a logarithm.
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw for counter `k`: Box-Muller cosine branch on draws
/// `2k` and `2k+1` of the stream.
#[inline]
pub fn standard_normal(seed: u64, k: u64) -> f64 {
    let u1 = unit_open(stream(seed, 2 * k));
    let u2 = unit(stream(seed, 2 * k + 1));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform in `[-0.5, 0.5)` for seeding power iterations and test vectors.
#[inline]
pub fn centered(seed: u64, k: u64) -> f64 {
    unit(stream(seed, k)) - 0.5
}
