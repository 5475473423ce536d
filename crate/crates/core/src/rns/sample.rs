//! Seeded sampling of ring elements.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::basis::RnsBasis;
use super::poly::{BasisSlice, Domain, PolyRns};

/// Coefficient distributions for keys, encryption randomness and errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distribution {
    /// Uniform over `{-1, 0, 1}`.
    Ternary,
    /// Uniform over `[0, q)` independently per prime.
    Uniform,
    /// Centered binomial with parameter `eta`: variance `eta / 2`.
    CenteredBinomial { eta: u32 },
}

/// Default error distribution: variance 10.5, standard deviation about 3.2.
pub const ERROR_DISTRIBUTION: Distribution = Distribution::CenteredBinomial { eta: 21 };

pub fn ternary_coeffs<R: RngCore>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| rng.random_range(-1i64..=1)).collect()
}

pub fn cbd_coeffs<R: RngCore>(n: usize, eta: u32, rng: &mut R) -> Vec<i64> {
    assert!((1..=32).contains(&eta));
    let mask = (1u64 << eta) - 1;
    (0..n)
        .map(|_| {
            let bits = rng.next_u64();
            (bits & mask).count_ones() as i64 - ((bits >> 32) & mask).count_ones() as i64
        })
        .collect()
}

/// Draws a coefficient-domain polynomial over `slice`.
pub fn sample<R: RngCore>(basis: &Arc<RnsBasis>, slice: BasisSlice, dist: Distribution, rng: &mut R) -> PolyRns {
    let n = basis.degree();
    match dist {
        Distribution::Ternary => PolyRns::from_signed(basis, slice, &ternary_coeffs(n, rng)),
        Distribution::CenteredBinomial { eta } => PolyRns::from_signed(basis, slice, &cbd_coeffs(n, eta, rng)),
        Distribution::Uniform => {
            let mut p = PolyRns::zero(basis, slice, Domain::Coefficient);
            for (k, idx) in slice.indices(basis).enumerate() {
                let q = basis.modulus(idx).value();
                for x in p.residues_mut(k) {
                    *x = rng.random_range(0..q);
                }
            }
            p
        }
    }
}

/// [`sample`] from a fresh ChaCha20 stream seeded with `seed`.
pub fn sample_seeded(basis: &Arc<RnsBasis>, slice: BasisSlice, dist: Distribution, seed: u64) -> PolyRns {
    sample(basis, slice, dist, &mut ChaCha20Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rns::Security;

    fn basis() -> Arc<RnsBasis> {
        RnsBasis::generate(1024, 30, 30, 1, 31, 1, Security::Unchecked).unwrap()
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let b = basis();
        for dist in [Distribution::Ternary, Distribution::Uniform, ERROR_DISTRIBUTION] {
            let a = sample_seeded(&b, BasisSlice::extended(1), dist, 99);
            let c = sample_seeded(&b, BasisSlice::extended(1), dist, 99);
            assert_eq!(a, c);
            let d = sample_seeded(&b, BasisSlice::extended(1), dist, 100);
            assert_ne!(a, d);
        }
    }

    #[test]
    fn ternary_frequencies_within_three_sigma() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let n = 100_000;
        let draws = ternary_coeffs(n, &mut rng);
        let p = 1.0 / 3.0;
        let sigma = libm::sqrt(n as f64 * p * (1.0 - p));
        for v in [-1i64, 0, 1] {
            let count = draws.iter().filter(|&&x| x == v).count() as f64;
            assert!((count - n as f64 * p).abs() < 3.0 * sigma, "value {v}: {count}");
        }
    }

    #[test]
    fn cbd_mean_and_variance() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let n = 100_000;
        let draws = cbd_coeffs(n, 21, &mut rng);
        let mean = draws.iter().sum::<i64>() as f64 / n as f64;
        let var = draws.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        // standard error of the mean is sqrt(10.5 / n)
        assert!(mean.abs() < 3.0 * libm::sqrt(10.5 / n as f64));
        assert!((var - 10.5).abs() < 0.3);
        assert!(draws.iter().all(|x| x.abs() <= 21));
    }

    #[test]
    fn uniform_residues_in_range() {
        let b = basis();
        let p = sample_seeded(&b, BasisSlice::extended(1), Distribution::Uniform, 3);
        for k in 0..p.prime_count() {
            let q = b.modulus(p.modulus_index(k)).value();
            assert!(p.residues(k).iter().all(|&x| x < q));
        }
    }
}
