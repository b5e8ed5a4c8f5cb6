//! Counter-based Gaussian draws.
//!
//! Draw `k` of stream `seed` is a pure function of `(seed, k)`: a SplitMix64
//! style hash produces a uniform in (0, 1), which is mapped through the
//! inverse normal CDF. No generator state is carried between draws, so the
//! value of a draw never depends on evaluation order or thread schedule.

use statrs::function::erf::erfc_inv;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(seed, index)`. Used both for per-draw bits and to derive child
/// seeds (per trial, per restart, per letter, ...).
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ GOLDEN) ^ mix64(index.wrapping_mul(GOLDEN).wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Uniform in the open interval (0, 1) with 53 random bits.
#[inline]
pub fn uniform(seed: u64, index: u64) -> f64 {
    let bits = derive_seed(seed, index) >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal quantile.
#[inline]
pub fn inverse_normal_cdf(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// The `index`-th standard normal draw of stream `seed`.
#[inline]
pub fn normal(seed: u64, index: u64) -> f64 {
    inverse_normal_cdf(uniform(seed, index))
}

/// Fair random sign.
#[inline]
pub fn sign(seed: u64, index: u64) -> f64 {
    if derive_seed(seed, index) >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Fills a vector with draws `0..len` of stream `seed`.
pub fn normals(seed: u64, len: usize) -> Vec<f64> {
    (0..len as u64).map(|k| normal(seed, k)).collect()
}
