use alloc::vec::Vec;

use rand::RngCore;

use super::rules::{select, DecryptedDistances, DistanceTable, RuleConfig, SelectionResult};
use crate::ckks::{decrypt, encrypt, encrypt_symmetric, Ciphertext, EvaluationKey, Evaluator, Params, Plaintext, PublicKey, SecretKey};
use crate::distance::{EncryptedDistanceMatrix, MatrixMode, PackedWeights};
use crate::error::{Error, Result};
use crate::exec::Executor;

/// Encrypted selection matrix: row `r < l` is `e_j` for the `r`-th selected
/// client `j`, the remaining rows are zero. Each entry is one ciphertext
/// with its scalar in every slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionMask {
    pub(crate) rows: Vec<Vec<Ciphertext>>,
}

impl SelectionMask {
    pub fn rows(&self) -> &[Vec<Ciphertext>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }
}

/// The plaintext one-hot rows of the mask for `sel`.
pub fn mask_rows(sel: &SelectionResult, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut seen = alloc::vec![false; n];
    for &j in &sel.selected {
        if j >= n || seen[j] {
            return Err(Error::Rule("selection indices must be distinct and in range"));
        }
        seen[j] = true;
    }
    Ok((0..n)
        .map(|r| {
            let mut row = alloc::vec![0.0; n];
            if let Some(&j) = sel.selected.get(r) {
                row[j] = 1.0;
            }
            row
        })
        .collect())
}

pub fn build_mask<R: RngCore>(sel: &SelectionResult, n: usize, pk: &PublicKey, params: &Params, rng: &mut R) -> Result<SelectionMask> {
    encrypt_rows(sel, n, params, |pt| encrypt(params, pk, pt, rng))
}

/// [`build_mask`] under the secret key, as the key holder can do.
pub fn build_mask_secret<R: RngCore>(sel: &SelectionResult, n: usize, sk: &SecretKey, params: &Params, rng: &mut R) -> Result<SelectionMask> {
    encrypt_rows(sel, n, params, |pt| encrypt_symmetric(params, sk, pt, rng))
}

fn encrypt_rows(
    sel: &SelectionResult,
    n: usize,
    params: &Params,
    mut enc: impl FnMut(&Plaintext) -> Result<Ciphertext>,
) -> Result<SelectionMask> {
    let zero = params.encode(&[])?;
    let one = params.encode(&alloc::vec![1.0; params.slot_count()])?;
    let rows = mask_rows(sel, n)?
        .iter()
        .map(|row| row.iter().map(|&v| enc(if v == 0.0 { &zero } else { &one })).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionMask { rows })
}

/// Decrypts a mask back to its plaintext rows (slot 0 of every entry).
pub fn decrypt_mask(params: &Params, sk: &SecretKey, mask: &SelectionMask) -> Result<Vec<Vec<f64>>> {
    mask.rows
        .iter()
        .map(|row| row.iter().map(|ct| Ok(params.decode(&decrypt(sk, ct)?)?[0])).collect())
        .collect()
}

/// Levels the masked aggregation consumes: one for the mask product, one
/// more when the result is averaged.
pub fn aggregation_depth(averages: bool) -> usize {
    1 + usize::from(averages)
}

/// Server side: `Σ_i (Σ_r M[r][i]) ⊗ W_i` per chunk with a single
/// relinearization per chunk, then `1/l` when `average` is `Some(l)`.
pub fn masked_aggregate<E: Executor>(
    eval: &Evaluator,
    weights: &[PackedWeights],
    mask: &SelectionMask,
    rk: &EvaluationKey,
    average: Option<usize>,
    exec: &E,
) -> Result<PackedWeights> {
    let n = weights.len();
    if n == 0 || mask.rows.len() != n || mask.rows.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("mask does not match the client count"));
    }
    if weights.iter().any(|w| !w.same_shape(&weights[0])) {
        return Err(Error::Shape("models differ in length"));
    }
    let level = weights[0].level();
    if level < aggregation_depth(average.is_some()) {
        return Err(Error::DepthExhausted);
    }
    let mut columns: Vec<Ciphertext> = mask.rows[0].clone();
    for row in &mask.rows[1..] {
        for (acc, ct) in columns.iter_mut().zip(row) {
            eval.add_assign(acc, ct)?;
        }
    }
    let columns = columns
        .iter()
        .map(|c| eval.drop_to_level(c, level))
        .collect::<Result<Vec<_>>>()?;
    let chunk_ids: Vec<usize> = (0..weights[0].chunk_count()).collect();
    let chunks = exec
        .map(&chunk_ids, |&k| {
            let triples = weights
                .iter()
                .zip(&columns)
                .map(|(w, col)| eval.multiply(&w.chunks[k], col))
                .collect::<Result<Vec<_>>>()?;
            let summed = eval.rescale(&eval.relinearize(&eval.lazy_accumulate(&triples)?, rk)?)?;
            match average {
                Some(l) if l > 1 => eval.mul_const(&summed, 1.0 / l as f64),
                _ => Ok(summed),
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    PackedWeights::from_chunks(chunks, weights[0].len())
}

/// What the key holder saw in a round; kept for audit, never sent to the
/// server.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KgcRecord {
    pub distances: DecryptedDistances,
    pub selection: SelectionResult,
}

/// Key-holder side: decrypt distances, select, and return the encrypted
/// mask.
pub fn masked_sort_round<R: RngCore>(
    params: &Params,
    matrix: &EncryptedDistanceMatrix,
    sk: &SecretKey,
    cfg: &RuleConfig,
    rng: &mut R,
) -> Result<(SelectionMask, KgcRecord)> {
    let values = matrix.decrypt_values(params, sk)?;
    let n = matrix.client_count();
    let distances = match matrix.mode() {
        MatrixMode::PerPair => DecryptedDistances::Pairwise(DistanceTable::from_pairs(n, &values)?),
        MatrixMode::RowSums => DecryptedDistances::Totals(values),
    };
    let selection = select(&distances, cfg)?;
    let mask = build_mask_secret(&selection, n, sk, params, rng)?;
    Ok((mask, KgcRecord { distances, selection }))
}
