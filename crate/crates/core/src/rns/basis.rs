use alloc::sync::Arc;
use alloc::vec::Vec;

use super::ntt::NttTable;
use crate::arith::{generate_ntt_primes, Modulus};
use crate::error::{Error, Result};

/// Parameter-set validation policy applied when a basis is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Security {
    /// Reject sets whose `log2(PQ)` exceeds the 128-bit classical R-LWE
    /// bound for the ring degree (uniform ternary secret).
    Classical128,
    /// No check. Only for arithmetic tests on toy rings.
    Unchecked,
}

/// Largest `log2(PQ)` admitted at 128-bit classical security. Degrees up to
/// 2^15 follow the homomorphic-encryption standard table; the two larger
/// degrees extend it by doubling.
pub fn max_modulus_bits(degree: usize) -> Option<u32> {
    Some(match degree {
        1024 => 27,
        2048 => 54,
        4096 => 109,
        8192 => 218,
        16384 => 438,
        32768 => 881,
        65536 => 1762,
        131072 => 3524,
        _ => return None,
    })
}

/// The ordered prime chain `q_0 .. q_L` plus the special primes used by key
/// switching, with one NTT table per prime.
#[derive(Debug)]
pub struct RnsBasis {
    degree: usize,
    moduli: Vec<Modulus>,
    tables: Vec<NttTable>,
    q_count: usize,
}

impl PartialEq for RnsBasis {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree
            && self.q_count == other.q_count
            && self.moduli.len() == other.moduli.len()
            && self.moduli.iter().zip(&other.moduli).all(|(a, b)| a.value() == b.value())
    }
}

impl Eq for RnsBasis {}

impl RnsBasis {
    pub fn new(degree: usize, primes: &[u64], special: &[u64], security: Security) -> Result<Arc<Self>> {
        if primes.is_empty() {
            return Err(Error::Parameter("at least one ciphertext prime is required"));
        }
        let all: Vec<u64> = primes.iter().chain(special).copied().collect();
        for (i, a) in all.iter().enumerate() {
            if all[..i].contains(a) {
                return Err(Error::Parameter("RNS primes must be pairwise distinct"));
            }
        }
        let moduli = all
            .iter()
            .map(|&q| Modulus::new(q, degree))
            .collect::<Result<Vec<_>>>()?;
        if security == Security::Classical128 {
            let log_pq: f64 = moduli.iter().map(Modulus::bits).sum();
            let bound = max_modulus_bits(degree).ok_or(Error::Parameter("no security bound for this ring degree"))?;
            if log_pq > bound as f64 {
                return Err(Error::Insecure { degree, log_pq, bound });
            }
        }
        let tables = moduli.iter().map(|m| NttTable::new(m, degree)).collect();
        Ok(Arc::new(RnsBasis { degree, moduli, tables, q_count: primes.len() }))
    }

    /// Generates a chain with one `first_bits` base prime, `depth` scaling
    /// primes of `scale_bits`, and `special_count` special primes of
    /// `special_bits`, by descending search.
    pub fn generate(
        degree: usize,
        first_bits: u32,
        scale_bits: u32,
        depth: usize,
        special_bits: u32,
        special_count: usize,
        security: Security,
    ) -> Result<Arc<Self>> {
        let mut taken: Vec<u64> = Vec::new();
        let first = generate_ntt_primes(first_bits, 1, degree, &taken)?;
        taken.extend(&first);
        let mids = generate_ntt_primes(scale_bits, depth, degree, &taken)?;
        taken.extend(&mids);
        let specials = generate_ntt_primes(special_bits, special_count, degree, &taken)?;
        let mut chain = first;
        chain.extend(mids);
        Self::new(degree, &chain, &specials, security)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `L`, the index of the last ciphertext prime.
    pub fn max_level(&self) -> usize {
        self.q_count - 1
    }

    pub fn special_count(&self) -> usize {
        self.moduli.len() - self.q_count
    }

    /// Modulus by global index: `0..=L` are the ciphertext primes, then the
    /// special primes.
    pub fn modulus(&self, index: usize) -> &Modulus {
        &self.moduli[index]
    }

    pub(crate) fn table(&self, index: usize) -> &NttTable {
        &self.tables[index]
    }

    pub fn q(&self, i: usize) -> &Modulus {
        &self.moduli[i]
    }

    pub fn special(&self, j: usize) -> &Modulus {
        &self.moduli[self.q_count + j]
    }

    pub fn special_range(&self) -> core::ops::Range<usize> {
        self.q_count..self.moduli.len()
    }

    /// `log2(Q * P)` over the full chain.
    pub fn log_modulus(&self) -> f64 {
        self.moduli.iter().map(Modulus::bits).sum()
    }

    /// Product of the special primes reduced modulo prime `index`.
    pub(crate) fn special_product_mod(&self, index: usize) -> u64 {
        let m = &self.moduli[index];
        self.special_range().fold(1u64, |acc, j| m.mul(acc, m.reduce(self.moduli[j].value())))
    }
}

/// Exact conversion from residues over a set of source primes to the
/// centered integer they represent, evaluated modulo other primes or as a
/// float. Uses Garner's mixed-radix form.
#[derive(Clone, Debug)]
pub(crate) struct CrtConverter {
    src: Vec<usize>,
    /// `(s_0 * .. * s_{k-1})^{-1} mod s_k`
    inv_prefix: Vec<u64>,
    /// Mixed-radix digits of `floor(S / 2)`.
    half: Vec<u64>,
}

pub(crate) const MAX_CRT_PRIMES: usize = 64;

impl CrtConverter {
    pub fn new(basis: &RnsBasis, src: Vec<usize>) -> Self {
        let k = src.len();
        assert!(k <= MAX_CRT_PRIMES);
        let mut inv_prefix = Vec::with_capacity(k);
        for (i, &si) in src.iter().enumerate() {
            let m = basis.modulus(si);
            let prod = src[..i]
                .iter()
                .fold(1u64, |acc, &sj| m.mul(acc, m.reduce(basis.modulus(sj).value())));
            inv_prefix.push(m.inv(prod));
        }
        // floor(S/2) in mixed radix: S = prod s_i, all odd, so
        // floor(S/2) has digits (s_i - 1)/2 at every position.
        let half = src.iter().map(|&s| (basis.modulus(s).value() - 1) / 2).collect();
        CrtConverter { src, inv_prefix, half }
    }

    /// Garner digits of the value with the given residues (one per source
    /// prime, same order).
    #[inline]
    pub fn digits(&self, basis: &RnsBasis, residues: &[u64], out: &mut [u64]) {
        for k in 0..self.src.len() {
            let m = basis.modulus(self.src[k]);
            // evaluate v_0 + v_1 s_0 + ... + v_{k-1} s_0..s_{k-2} mod s_k
            let mut acc = 0u64;
            for j in (0..k).rev() {
                acc = m.add(m.mul(acc, m.reduce(basis.modulus(self.src[j]).value())), m.reduce(out[j]));
            }
            out[k] = m.mul(m.sub(residues[k], acc), self.inv_prefix[k]);
        }
    }

    /// True when the mixed-radix value exceeds `floor(S/2)`.
    #[inline]
    pub fn is_upper_half(&self, digits: &[u64]) -> bool {
        for k in (0..digits.len()).rev() {
            if digits[k] != self.half[k] {
                return digits[k] > self.half[k];
            }
        }
        false
    }

    /// Value of the mixed-radix digits modulo `target`.
    #[inline]
    pub fn eval_mod(&self, basis: &RnsBasis, digits: &[u64], target: &Modulus) -> u64 {
        let mut acc = 0u64;
        for j in (0..digits.len()).rev() {
            acc = target.add(
                target.mul(acc, target.reduce(basis.modulus(self.src[j]).value())),
                target.reduce(digits[j]),
            );
        }
        acc
    }

    /// `S mod target`.
    pub fn product_mod(&self, basis: &RnsBasis, target: &Modulus) -> u64 {
        self.src
            .iter()
            .fold(1u64, |acc, &s| target.mul(acc, target.reduce(basis.modulus(s).value())))
    }

    /// Centered value as a float.
    pub fn centered_f64(&self, basis: &RnsBasis, residues: &[u64], scratch: &mut [u64]) -> f64 {
        self.digits(basis, residues, scratch);
        let negative = self.is_upper_half(scratch);
        if negative {
            let mut neg = [0u64; MAX_CRT_PRIMES];
            for (k, (&r, &s)) in residues.iter().zip(&self.src).enumerate() {
                neg[k] = basis.modulus(s).neg(r);
            }
            self.digits(basis, &neg[..self.src.len()], scratch);
        }
        let mut value = 0.0f64;
        let mut radix = 1.0f64;
        for (k, &d) in scratch.iter().enumerate() {
            value += d as f64 * radix;
            radix *= basis.modulus(self.src[k]).value() as f64;
        }
        if negative {
            -value
        } else {
            value
        }
    }
}
