//! Seeded Halton points for multistart initialization.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Halton sequence in `[0, 1)^dim` with a random Cranley-Patterson shift
/// drawn from `seed`. Point `n` is a pure function of `(seed, n)`.
#[derive(Clone, Debug)]
pub struct ShiftedHalton {
    shift: Vec<f64>,
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} not supported");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim)
            .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
            .collect();
        Self { shift }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn point(&self, n: u64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(n + 1, p) + s).fract())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_prefix() {
        let got: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(got, [0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn points_are_in_unit_cube_and_seeded() {
        let h = ShiftedHalton::new(10, 7);
        let again = ShiftedHalton::new(10, 7);
        let other = ShiftedHalton::new(10, 8);
        for n in 0..100 {
            let p = h.point(n);
            assert!(p.iter().all(|x| (0.0..1.0).contains(x)));
            assert_eq!(p, again.point(n));
        }
        assert_ne!(h.point(0), other.point(0));
    }
}
