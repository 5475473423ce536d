use alloc::sync::Arc;
use alloc::vec::Vec;

use super::encoding::{Encoder, Plaintext};
use crate::error::{Error, Result};
use crate::rns::{digit_count, RnsBasis, Security};

/// Parameter choices from which a [`Params`] is built.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSpec {
    pub degree: usize,
    /// Number of rescalings available: the chain has `depth + 1` primes.
    pub depth: usize,
    /// `log2 Δ`; also the bit length of each scaling prime.
    pub scale_bits: u32,
    /// Bit length of the base prime `q_0`.
    pub first_bits: u32,
    /// Bit length of each special prime.
    pub special_bits: u32,
    /// Primes per key-switching digit; the chain gets `alpha` special primes.
    pub alpha: usize,
    pub security: Security,
}

impl Default for ParamSpec {
    fn default() -> Self {
        ParamSpec {
            degree: 8192,
            depth: 3,
            scale_bits: 40,
            first_bits: 49,
            special_bits: 49,
            alpha: 1,
            security: Security::Classical128,
        }
    }
}

impl ParamSpec {
    pub fn with_degree(self, degree: usize) -> Self {
        ParamSpec { degree, ..self }
    }
}

/// Key-switching layout: `dnum = ⌈(L+1)/α⌉` digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeySwitchParams {
    pub alpha: usize,
    pub dnum: usize,
}

/// Immutable scheme context shared by every key, ciphertext and evaluator.
#[derive(Debug)]
pub struct Params {
    spec: ParamSpec,
    basis: Arc<RnsBasis>,
    encoder: Encoder,
}

impl Params {
    pub fn new(spec: ParamSpec) -> Result<Arc<Self>> {
        if !spec.degree.is_power_of_two() || spec.degree < 4 {
            return Err(Error::Parameter("ring degree must be a power of two"));
        }
        if spec.alpha == 0 || spec.alpha > spec.depth + 1 {
            return Err(Error::Parameter("alpha must lie in 1..=L+1"));
        }
        if spec.scale_bits >= spec.first_bits + 20 || spec.scale_bits < 10 {
            return Err(Error::Parameter("scale bits out of range"));
        }
        let basis = RnsBasis::generate(
            spec.degree,
            spec.first_bits,
            spec.scale_bits,
            spec.depth,
            spec.special_bits,
            spec.alpha,
            spec.security,
        )?;
        Ok(Arc::new(Params { spec, basis, encoder: Encoder::new(spec.degree) }))
    }

    pub fn spec(&self) -> &ParamSpec {
        &self.spec
    }

    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    pub fn slot_count(&self) -> usize {
        self.spec.degree / 2
    }

    pub fn max_level(&self) -> usize {
        self.basis.max_level()
    }

    /// `Δ`
    pub fn scale(&self) -> f64 {
        libm::ldexp(1.0, self.spec.scale_bits as i32)
    }

    pub fn key_switch(&self) -> KeySwitchParams {
        KeySwitchParams { alpha: self.spec.alpha, dnum: digit_count(self.max_level(), self.spec.alpha) }
    }

    /// Encodes at the default scale and top level.
    pub fn encode(&self, values: &[f64]) -> Result<Plaintext> {
        self.encoder.encode(&self.basis, values, self.scale(), self.max_level())
    }

    pub fn encode_at(&self, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
        self.encoder.encode(&self.basis, values, scale, level)
    }

    pub fn decode(&self, pt: &Plaintext) -> Result<Vec<f64>> {
        self.encoder.decode(pt)
    }

    /// Galois element `5^k mod 2N` of a left rotation by `k` slots.
    pub fn galois_element(&self, step: usize) -> usize {
        self.encoder.rotation_group()[step % self.slot_count()]
    }
}
