//! Seed derivation and Gaussian sampling helpers.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is
//! derived from a top-level seed, a purpose label and an index. Streams for
//! different purposes or draw indices never share state, so results do not
//! depend on evaluation order or thread scheduling.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `(seed, label, index)` into a substream seed.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label, then mixed with seed and index.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(mix64(seed ^ h).wrapping_add(index))
}

pub fn stream(seed: u64, label: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, label, index))
}

pub fn standard_normals<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `mean + factor * z` with `z` standard normal; `factor` is any square root
/// of the target covariance.
pub fn correlated_normal<R: rand::Rng + ?Sized>(rng: &mut R, mean: &[f64], factor: &Matrix) -> Vec<f64> {
    let z = standard_normals(rng, factor.cols());
    let mut out = factor.mul_vec(&z);
    for (o, m) in out.iter_mut().zip(mean) {
        *o += m;
    }
    out
}
