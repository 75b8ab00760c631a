//! Deterministic random-number plumbing.
//!
//! Every stochastic routine takes an explicit 64-bit root seed and derives one
//! independent ChaCha substream per replicate index. Parallel and serial runs
//! therefore produce bit-identical results: replicate i always reads from
//! stream i regardless of scheduling.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::sample::Sample;

/// Independent deterministic stream `index` of the generator keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 step, used to spawn per-cell seeds from a root seed.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    let mut z = root
        .wrapping_add(tag.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// n×d matrix of i.i.d. standard normal draws, row-major draw order.
pub fn standard_normal_matrix<R: Rng>(rng: &mut R, n: usize, d: usize) -> Array2<f64> {
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        data.push(rng.sample::<f64, _>(StandardNormal));
    }
    Array2::from_shape_vec((n, d), data).expect("shape matches draw count")
}

/// A standard-normal sample Q_n ~ N_d.
pub fn standard_normal_sample<R: Rng>(rng: &mut R, n: usize, d: usize) -> Sample {
    Sample::new(standard_normal_matrix(rng, n, d)).expect("normal draws are finite")
}
