use alloc::vec::Vec;

use rand::RngCore;

use crate::ckks::{decrypt, encrypt, Ciphertext, Params, PublicKey, SecretKey};
use crate::error::{Error, Result};

/// A flattened model: finite reals.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("weight vector is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(WeightVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn squared_distance(&self, other: &WeightVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// `⌈P / slots⌉`
pub fn chunk_count(len: usize, slots: usize) -> usize {
    len.div_ceil(slots)
}

/// A model encrypted as consecutive `N/2`-slot chunks, the last one
/// zero-padded.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedWeights {
    pub(crate) chunks: Vec<Ciphertext>,
    pub(crate) len: usize,
}

impl PackedWeights {
    pub fn from_chunks(chunks: Vec<Ciphertext>, len: usize) -> Result<Self> {
        if chunks.is_empty() || len == 0 {
            return Err(Error::Shape("packed weights need at least one chunk"));
        }
        let level = chunks[0].level();
        if chunks.iter().any(|c| c.level() != level || c.scale() != chunks[0].scale()) {
            return Err(Error::Alignment);
        }
        Ok(PackedWeights { chunks, len })
    }

    pub fn chunks(&self) -> &[Ciphertext] {
        &self.chunks
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// Original (unpadded) length `P`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn level(&self) -> usize {
        self.chunks[0].level()
    }

    pub fn size_bytes(&self) -> usize {
        self.chunks.iter().map(Ciphertext::size_bytes).sum()
    }

    pub(crate) fn same_shape(&self, other: &PackedWeights) -> bool {
        self.len == other.len && self.chunks.len() == other.chunks.len()
    }
}

pub fn pack_and_encrypt<R: RngCore>(w: &WeightVector, pk: &PublicKey, params: &Params, rng: &mut R) -> Result<PackedWeights> {
    let slots = params.slot_count();
    let chunks = w
        .as_slice()
        .chunks(slots)
        .map(|c| encrypt(params, pk, &params.encode(c)?, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(PackedWeights { chunks, len: w.len() })
}

/// Decrypts and concatenates the chunks, dropping the padding.
pub fn decrypt_packed(params: &Params, sk: &SecretKey, packed: &PackedWeights) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(packed.chunks.len() * params.slot_count());
    for ct in &packed.chunks {
        out.extend(params.decode(&decrypt(sk, ct)?)?);
    }
    out.truncate(packed.len);
    Ok(out)
}
