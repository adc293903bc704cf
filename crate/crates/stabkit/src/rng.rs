//! Seeded random-number plumbing.
//!
//! Every sampled quantity in the toolkit (multistart points, sphere samples,
//! random initial states) is drawn from a `ChaCha8Rng` derived from a single
//! scenario seed, so two runs with the same seed are bit-identical.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG from a bare seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic RNG for a named stage of a larger run.
///
/// Mixing the label into the seed (FNV-1a) decouples the streams of
/// independent stages: inserting a draw in one stage does not shift
/// the samples seen by another.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Standard-normal vector of length `n`.
pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        // Box-Muller; two uniforms per draw keeps the stream simple.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_reproducible_and_distinct() {
        let a: u64 = substream(7, "certify").gen();
        let b: u64 = substream(7, "certify").gen();
        let c: u64 = substream(7, "simulate").gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normal_vector_deterministic() {
        let mut r1 = seeded(3);
        let mut r2 = seeded(3);
        assert_eq!(normal_vector(&mut r1, 8), normal_vector(&mut r2, 8));
    }
}
