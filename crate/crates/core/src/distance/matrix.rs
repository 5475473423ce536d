use alloc::vec::Vec;

use super::hoist::{slot_reduce, HoistPlan};
use super::pack::PackedWeights;
use crate::ckks::{decrypt, Ciphertext, EvaluationKey, Evaluator, GaloisKeys, Params, SecretKey, TernaryCiphertext};
use crate::error::{Error, Result};
use crate::exec::Executor;

/// Encrypted squared distance: a ciphertext whose slot sum is
/// `‖a - b‖²`. With `lazy` the per-chunk squares are summed in ternary
/// form and relinearized once; otherwise every chunk is relinearized.
pub fn encrypted_pairwise_distance(
    eval: &Evaluator,
    a: &PackedWeights,
    b: &PackedWeights,
    rk: &EvaluationKey,
    lazy: bool,
) -> Result<Ciphertext> {
    if !a.same_shape(b) {
        return Err(Error::Shape("models differ in length"));
    }
    let squares = a
        .chunks
        .iter()
        .zip(&b.chunks)
        .map(|(x, y)| eval.square(&eval.sub(x, y)?))
        .collect::<Result<Vec<TernaryCiphertext>>>()?;
    let summed = if lazy {
        eval.relinearize(&eval.lazy_accumulate(&squares)?, rk)?
    } else {
        let mut acc = eval.relinearize(&squares[0], rk)?;
        for t in &squares[1..] {
            let r = eval.relinearize(t, rk)?;
            eval.add_assign(&mut acc, &r)?;
        }
        acc
    };
    eval.rescale(&summed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MatrixMode {
    /// One entry per unordered pair `i < j`.
    PerPair,
    /// One entry per client: `Σ_j d(i, j)`.
    RowSums,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceConfig {
    pub mode: MatrixMode,
    pub lazy: bool,
    /// Slot-reduce on the server under this plan; `None` leaves the slot
    /// sum to the key holder.
    pub reduce: Option<HoistPlan>,
}

/// Width of the rotation tree that sums a distance ciphertext's slots.
pub fn reduction_width(len: usize, slots: usize) -> usize {
    if len <= slots {
        len.next_power_of_two()
    } else {
        slots
    }
}

/// Index of pair `(i, j)`, `i < j`, in row-major upper-triangular order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedDistanceMatrix {
    pub(crate) n: usize,
    pub(crate) mode: MatrixMode,
    pub(crate) entries: Vec<Ciphertext>,
    pub(crate) reduced: bool,
}

impl EncryptedDistanceMatrix {
    pub fn client_count(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> MatrixMode {
        self.mode
    }

    pub fn entries(&self) -> &[Ciphertext] {
        &self.entries
    }

    /// Whether slot 0 already holds each distance.
    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    /// Decrypts every entry to a real number.
    pub fn decrypt_values(&self, params: &Params, sk: &SecretKey) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|ct| {
                let slots = params.decode(&decrypt(sk, ct)?)?;
                Ok(if self.reduced { slots[0] } else { slots.iter().sum() })
            })
            .collect()
    }
}

/// Server-side distance phase over all clients' packed models.
pub fn build_distance_matrix<E: Executor>(
    eval: &Evaluator,
    all: &[PackedWeights],
    rk: &EvaluationKey,
    galois: &GaloisKeys,
    cfg: &DistanceConfig,
    exec: &E,
) -> Result<EncryptedDistanceMatrix> {
    let n = all.len();
    if n < 2 {
        return Err(Error::Shape("at least two clients are required"));
    }
    if all.iter().any(|w| !w.same_shape(&all[0])) {
        return Err(Error::Shape("models differ in length"));
    }
    let pair_list = pairs(n);
    let per_pair = exec
        .map(&pair_list, |&(i, j)| encrypted_pairwise_distance(eval, &all[i], &all[j], rk, cfg.lazy))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let entries = match cfg.mode {
        MatrixMode::PerPair => per_pair,
        MatrixMode::RowSums => {
            let mut rows: Vec<Option<Ciphertext>> = (0..n).map(|_| None).collect();
            for (&(i, j), d) in pair_list.iter().zip(&per_pair) {
                for r in [i, j] {
                    match &mut rows[r] {
                        Some(acc) => eval.add_assign(acc, d)?,
                        slot => *slot = Some(d.clone()),
                    }
                }
            }
            rows.into_iter().map(|r| r.expect("n >= 2")).collect()
        }
    };
    let entries = match &cfg.reduce {
        Some(plan) => exec
            .map(&entries, |ct| slot_reduce(eval, ct, plan, galois))
            .into_iter()
            .collect::<Result<Vec<_>>>()?,
        None => entries,
    };
    Ok(EncryptedDistanceMatrix { n, mode: cfg.mode, entries, reduced: cfg.reduce.is_some() })
}
