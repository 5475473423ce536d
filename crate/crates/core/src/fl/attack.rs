use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::RngCore;

use super::data::Dataset;
use crate::distance::WeightVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AttackKind {
    /// Train on labels mapped `y -> C - 1 - y`.
    LabelFlip,
    /// Upload `W_g - λ (W_h - W_g)` where `W_h` is the honest update.
    Untargeted { lambda: f64 },
    /// Train with every `source` sample relabelled as `target`.
    Targeted { source: usize, target: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// Number of malicious clients.
    pub byzantine: usize,
}

impl AttackConfig {
    pub fn validate(&self, clients: usize) -> Result<()> {
        if 2 * self.byzantine >= clients {
            return Err(Error::Parameter("byzantine fraction must be below one half"));
        }
        match self.kind {
            AttackKind::Untargeted { lambda } if !(lambda.is_finite() && lambda >= 0.0) => {
                Err(Error::Parameter("attack scale must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// Which clients are malicious, as a sorted index list.
    pub fn choose<R: RngCore>(&self, clients: usize, rng: &mut R) -> Vec<usize> {
        let mut ids = sample(rng, clients, self.byzantine).into_vec();
        ids.sort_unstable();
        ids
    }
}

/// The training set a malicious client actually uses.
pub fn poison(data: &Dataset, kind: &AttackKind) -> Dataset {
    let classes = data.classes();
    match *kind {
        AttackKind::LabelFlip if classes > 0 => data.relabel(|y| classes - 1 - y),
        AttackKind::Targeted { source, target } if classes > 0 => {
            data.relabel(|y| if y == source { target } else { y })
        }
        _ => data.clone(),
    }
}

/// Model-replacement step of the untargeted attack.
pub fn untargeted(global: &WeightVector, honest: &WeightVector, lambda: f64) -> Result<WeightVector> {
    if global.len() != honest.len() {
        return Err(Error::Shape("update length differs from the global model"));
    }
    let w = global
        .as_slice()
        .iter()
        .zip(honest.as_slice())
        .map(|(&g, &h)| g - lambda * (h - g))
        .collect();
    WeightVector::new(w)
}
