//! Deterministic seeding helpers.
//!
//! Everything random in the crate is driven by ChaCha8 streams derived from a
//! user seed, so results do not depend on thread scheduling.

use ndarray::ArrayView1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// ChaCha8 generator keyed by `seed` on counter stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Hash of a row's exact bit pattern, keyed by `key`. Independent of the
/// row's position in its matrix.
pub fn hash_row(row: ArrayView1<'_, f64>, key: u64) -> u64 {
    row.iter()
        .fold(splitmix64(key), |acc, v| splitmix64(acc ^ v.to_bits()))
}

/// Maps a 64-bit hash to `[0, 1)`.
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Poisson(1) draw by inverse CDF from a uniform `u` in `[0, 1)`.
pub fn poisson_one(u: f64) -> u32 {
    let mut k = 0u32;
    let mut p = (-1.0f64).exp();
    let mut cdf = p;
    while u >= cdf && k < 32 {
        k += 1;
        p /= k as f64;
        cdf += p;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_mean_is_one() {
        let n = 200_000u64;
        let total: u64 = (0..n)
            .map(|i| poisson_one(unit_interval(splitmix64(i))) as u64)
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn row_hash_ignores_position() {
        let m = ndarray::array![[1.0, 2.0], [3.0, 4.0], [1.0, 2.0]];
        assert_eq!(hash_row(m.row(0), 7), hash_row(m.row(2), 7));
        assert_ne!(hash_row(m.row(0), 7), hash_row(m.row(1), 7));
        assert_ne!(hash_row(m.row(0), 7), hash_row(m.row(0), 8));
    }
}
