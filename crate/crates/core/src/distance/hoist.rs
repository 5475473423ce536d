use alloc::vec::Vec;

use crate::ckks::{Ciphertext, Evaluator, GaloisKeys};
use crate::error::{Error, Result};

/// Unfold factor for the rotation-sum tree of width `width`, with the cost
/// model it was chosen under.
///
/// The first `k - 1` tree levels run as one hoisted batch (rotations
/// `1 .. 2^(k-1) - 1` from a single ModUp); the remaining
/// `log2(width) - k + 1` levels run as rotate-and-add steps.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HoistPlan {
    pub k: usize,
    pub t_hoist: f64,
    pub t_decompose: f64,
    pub m_cipher: u64,
    pub m_budget: u64,
    pub width: usize,
}

fn log2_width(width: usize) -> Result<usize> {
    if width == 0 || !width.is_power_of_two() {
        return Err(Error::Width(width));
    }
    Ok(width.trailing_zeros() as usize)
}

/// Objective `(log n - k + 1)·T_H + (k - 1)·T_D`.
pub fn unfold_cost(k: usize, t_hoist: f64, t_decompose: f64, width: usize) -> f64 {
    let log_n = width.trailing_zeros() as f64;
    (log_n - k as f64 + 1.0) * t_hoist + (k as f64 - 1.0) * t_decompose
}

/// Minimizes the unfold objective subject to `k·M_c ≤ M_B` and
/// `1 ≤ k ≤ log2(n) + 1`, by evaluating every feasible `k`; ties go to the
/// smallest `k`.
pub fn plan_unfold(t_hoist: f64, t_decompose: f64, m_cipher: u64, m_budget: u64, width: usize) -> Result<HoistPlan> {
    let log_n = log2_width(width)?;
    if !(t_hoist.is_finite() && t_decompose.is_finite()) || t_hoist <= 0.0 || t_decompose <= 0.0 || m_cipher == 0 {
        return Err(Error::Parameter("costs and sizes must be positive"));
    }
    if m_cipher > m_budget {
        return Err(Error::Infeasible);
    }
    let k_max = ((m_budget / m_cipher) as usize).min(log_n + 1);
    let mut best = 1;
    let mut best_cost = unfold_cost(1, t_hoist, t_decompose, width);
    for k in 2..=k_max {
        let c = unfold_cost(k, t_hoist, t_decompose, width);
        if c < best_cost {
            best = k;
            best_cost = c;
        }
    }
    Ok(HoistPlan { k: best, t_hoist, t_decompose, m_cipher, m_budget, width })
}

impl HoistPlan {
    /// A plan with a fixed `k` and no cost model.
    pub fn fixed(k: usize, width: usize) -> Result<Self> {
        let log_n = log2_width(width)?;
        if k == 0 || k > log_n + 1 {
            return Err(Error::Parameter("unfold factor out of range"));
        }
        Ok(HoistPlan { k, t_hoist: 0.0, t_decompose: 0.0, m_cipher: 0, m_budget: 0, width })
    }

    /// Number of tree levels executed in the hoisted batch.
    pub fn hoisted_levels(&self) -> usize {
        (self.k - 1).min(self.width.trailing_zeros() as usize)
    }

    /// Rotation steps whose keys the plan needs.
    pub fn rotation_steps(&self) -> Vec<usize> {
        let h = self.hoisted_levels();
        let mut steps: Vec<usize> = (1..1usize << h).collect();
        let mut s = 1usize << h;
        while s < self.width {
            steps.push(s);
            s <<= 1;
        }
        steps
    }
}

/// Puts the sum of slots `0 .. width` of `a` into slot 0.
pub fn slot_reduce(eval: &Evaluator, a: &Ciphertext, plan: &HoistPlan, keys: &GaloisKeys) -> Result<Ciphertext> {
    let width = plan.width;
    let log_n = log2_width(width)?;
    if width > eval.params().slot_count() {
        return Err(Error::Width(width));
    }
    let h = plan.hoisted_levels();
    let mut y = a.clone();
    if h > 0 {
        let steps: Vec<usize> = (1..1usize << h).collect();
        for r in eval.hoisted_rotations(a, &steps, keys)? {
            eval.add_assign(&mut y, &r)?;
        }
    }
    for j in h..log_n {
        let r = eval.rotate(&y, 1 << j, keys)?;
        eval.add_assign(&mut y, &r)?;
    }
    Ok(y)
}
