use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::basis::{CrtConverter, RnsBasis};
use super::ntt::eval_automorphism_permutation;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Domain {
    Coefficient,
    Evaluation,
}

/// Which primes of a basis a polynomial lives on: `q_0..=q_level`, plus the
/// special primes when `special` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisSlice {
    pub level: usize,
    pub special: bool,
}

impl BasisSlice {
    pub fn q(level: usize) -> Self {
        BasisSlice { level, special: false }
    }

    pub fn extended(level: usize) -> Self {
        BasisSlice { level, special: true }
    }

    pub fn prime_count(&self, basis: &RnsBasis) -> usize {
        self.level + 1 + if self.special { basis.special_count() } else { 0 }
    }

    /// Global modulus indices, in storage order.
    pub fn indices(&self, basis: &RnsBasis) -> impl Iterator<Item = usize> + Clone {
        let special = if self.special { basis.special_range() } else { 0..0 };
        (0..=self.level).chain(special)
    }
}

/// A ring element of `Z[X]/(X^N + 1)` in residue-number-system form: one
/// length-`N` residue vector per live prime, stored prime-major.
#[derive(Clone)]
pub struct PolyRns {
    basis: Arc<RnsBasis>,
    slice: BasisSlice,
    domain: Domain,
    data: Vec<u64>,
}

impl core::fmt::Debug for PolyRns {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PolyRns")
            .field("degree", &self.basis.degree())
            .field("slice", &self.slice)
            .field("domain", &self.domain)
            .finish()
    }
}

impl PartialEq for PolyRns {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.basis, &other.basis) || self.basis == other.basis)
            && self.slice == other.slice
            && self.domain == other.domain
            && self.data == other.data
    }
}

impl Eq for PolyRns {}

impl PolyRns {
    pub fn zero(basis: &Arc<RnsBasis>, slice: BasisSlice, domain: Domain) -> Self {
        let len = slice.prime_count(basis) * basis.degree();
        PolyRns { basis: basis.clone(), slice, domain, data: vec![0; len] }
    }

    /// Coefficient-domain polynomial from signed integer coefficients.
    pub fn from_signed(basis: &Arc<RnsBasis>, slice: BasisSlice, coeffs: &[i64]) -> Self {
        let n = basis.degree();
        assert_eq!(coeffs.len(), n);
        let mut p = Self::zero(basis, slice, Domain::Coefficient);
        for (k, idx) in slice.indices(basis).enumerate() {
            let m = basis.modulus(idx);
            for (dst, &c) in p.data[k * n..(k + 1) * n].iter_mut().zip(coeffs) {
                *dst = m.reduce_i64(c);
            }
        }
        p
    }

    /// Builds a polynomial from raw prime-major residues.
    pub fn from_residues(basis: &Arc<RnsBasis>, slice: BasisSlice, domain: Domain, data: Vec<u64>) -> Result<Self> {
        if data.len() != slice.prime_count(basis) * basis.degree() {
            return Err(Error::Shape("residue vector length"));
        }
        for (k, idx) in slice.indices(basis).enumerate() {
            let q = basis.modulus(idx).value();
            let n = basis.degree();
            if data[k * n..(k + 1) * n].iter().any(|&x| x >= q) {
                return Err(Error::Shape("residue out of range"));
            }
        }
        Ok(PolyRns { basis: basis.clone(), slice, domain, data })
    }

    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }

    pub fn slice(&self) -> BasisSlice {
        self.slice
    }

    pub fn level(&self) -> usize {
        self.slice.level
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn prime_count(&self) -> usize {
        self.data.len() / self.basis.degree()
    }

    /// Global modulus index of the `k`-th stored prime.
    pub fn modulus_index(&self, k: usize) -> usize {
        if k <= self.slice.level {
            k
        } else {
            self.basis.special_range().start + (k - self.slice.level - 1)
        }
    }

    pub fn residues(&self, k: usize) -> &[u64] {
        let n = self.degree();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn residues_mut(&mut self, k: usize) -> &mut [u64] {
        let n = self.degree();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !(Arc::ptr_eq(&self.basis, &other.basis) || self.basis == other.basis) || self.slice != other.slice {
            return Err(Error::Basis);
        }
        if self.domain != other.domain {
            return Err(Error::Domain);
        }
        Ok(())
    }

    /// Forward negacyclic NTT of every residue vector.
    pub fn ntt_forward(mut self) -> Result<Self> {
        if self.domain != Domain::Coefficient {
            return Err(Error::Domain);
        }
        self.transform(true);
        Ok(self)
    }

    pub fn ntt_inverse(mut self) -> Result<Self> {
        if self.domain != Domain::Evaluation {
            return Err(Error::Domain);
        }
        self.transform(false);
        Ok(self)
    }

    /// Moves to the evaluation domain; no-op if already there.
    pub fn to_evaluation(&mut self) {
        if self.domain == Domain::Coefficient {
            self.transform(true);
        }
    }

    pub fn to_coefficient(&mut self) {
        if self.domain == Domain::Evaluation {
            self.transform(false);
        }
    }

    /// Forward transform with the residues on the global primes in `known`
    /// copied from `source` (already in evaluation form) instead of
    /// recomputed.
    pub(crate) fn to_evaluation_reusing(&mut self, source: &Self, known: core::ops::Range<usize>) {
        debug_assert_eq!(self.domain, Domain::Coefficient);
        debug_assert_eq!(source.domain, Domain::Evaluation);
        let n = self.degree();
        let basis = self.basis.clone();
        for (k, idx) in self.slice.indices(&basis).enumerate() {
            let chunk = &mut self.data[k * n..(k + 1) * n];
            if known.contains(&idx) {
                chunk.copy_from_slice(source.residues(idx));
            } else {
                basis.table(idx).forward(basis.modulus(idx), chunk);
            }
        }
        self.domain = Domain::Evaluation;
    }

    fn transform(&mut self, forward: bool) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (k, idx) in self.slice.indices(&basis).enumerate() {
            let chunk = &mut self.data[k * n..(k + 1) * n];
            if forward {
                basis.table(idx).forward(basis.modulus(idx), chunk);
            } else {
                basis.table(idx).inverse(basis.modulus(idx), chunk);
            }
        }
        self.domain = if forward { Domain::Evaluation } else { Domain::Coefficient };
    }

    fn zip_assign(&mut self, other: &Self, op: impl Fn(&crate::arith::Modulus, u64, u64) -> u64) -> Result<()> {
        self.check_compatible(other)?;
        let n = self.degree();
        let basis = self.basis.clone();
        for (k, idx) in self.slice.indices(&basis).enumerate() {
            let m = basis.modulus(idx);
            let dst = &mut self.data[k * n..(k + 1) * n];
            let src = &other.data[k * n..(k + 1) * n];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = op(m, *d, s);
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.zip_assign(other, |m, a, b| m.add(a, b))
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.zip_assign(other, |m, a, b| m.sub(a, b))
    }

    /// Coefficient-wise product; meaningful as ring multiplication only in
    /// the evaluation domain.
    pub fn mul_assign(&mut self, other: &Self) -> Result<()> {
        self.zip_assign(other, |m, a, b| m.mul(a, b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut r = self.clone();
        r.add_assign(other)?;
        Ok(r)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut r = self.clone();
        r.sub_assign(other)?;
        Ok(r)
    }

    pub fn mul_pointwise(&self, other: &Self) -> Result<Self> {
        let mut r = self.clone();
        r.mul_assign(other)?;
        Ok(r)
    }

    /// Ring product, whatever the operands' domain; result is in the
    /// evaluation domain.
    pub fn ring_mul(&self, other: &Self) -> Result<Self> {
        let mut a = self.clone();
        let mut b = other.clone();
        a.to_evaluation();
        b.to_evaluation();
        a.mul_assign(&b)?;
        Ok(a)
    }

    pub fn neg_assign(&mut self) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (k, idx) in self.slice.indices(&basis).enumerate() {
            let m = basis.modulus(idx);
            for x in &mut self.data[k * n..(k + 1) * n] {
                *x = m.neg(*x);
            }
        }
    }

    /// Multiplies by a signed integer constant.
    pub fn mul_scalar_assign(&mut self, c: i64) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (k, idx) in self.slice.indices(&basis).enumerate() {
            let m = basis.modulus(idx);
            let w = m.reduce_i64(c);
            let ws = m.shoup(w);
            for x in &mut self.data[k * n..(k + 1) * n] {
                *x = m.mul_shoup(*x, w, ws);
            }
        }
    }

    /// Multiplies the residues of the `k`-th stored prime by `w`.
    #[cfg(test)]
    pub(crate) fn mul_residue_scalar(&mut self, k: usize, w: u64) {
        let n = self.degree();
        let m = self.basis.modulus(self.modulus_index(k)).clone();
        let ws = m.shoup(w);
        for x in &mut self.data[k * n..(k + 1) * n] {
            *x = m.mul_shoup(*x, w, ws);
        }
    }

    /// Applies `X -> X^galois` (galois odd), in whichever domain the
    /// polynomial currently is.
    pub fn automorphism(&self, galois: usize) -> Self {
        let n = self.degree();
        let two_n = 2 * n;
        debug_assert!(galois % 2 == 1);
        let mut out = Self::zero(&self.basis, self.slice, self.domain);
        match self.domain {
            Domain::Coefficient => {
                for (k, idx) in self.slice.indices(&self.basis).enumerate() {
                    let m = self.basis.modulus(idx);
                    let src = &self.data[k * n..(k + 1) * n];
                    let dst = &mut out.data[k * n..(k + 1) * n];
                    for (i, &c) in src.iter().enumerate() {
                        let j = (i * galois) % two_n;
                        if j < n {
                            dst[j] = c;
                        } else {
                            dst[j - n] = m.neg(c);
                        }
                    }
                }
            }
            Domain::Evaluation => {
                let perm = eval_automorphism_permutation(n, galois);
                self.permute_into(&perm, &mut out);
            }
        }
        out
    }

    /// Evaluation-domain automorphism with a precomputed permutation.
    pub(crate) fn permute_into(&self, perm: &[usize], out: &mut Self) {
        let n = self.degree();
        for k in 0..self.prime_count() {
            let src = &self.data[k * n..(k + 1) * n];
            let dst = &mut out.data[k * n..(k + 1) * n];
            for (d, &j) in dst.iter_mut().zip(perm) {
                *d = src[j];
            }
        }
    }

    /// Drops every prime above `level` (and the special primes).
    pub fn truncate(&self, level: usize) -> Result<Self> {
        if level > self.slice.level {
            return Err(Error::Basis);
        }
        let n = self.degree();
        Ok(PolyRns {
            basis: self.basis.clone(),
            slice: BasisSlice::q(level),
            domain: self.domain,
            data: self.data[..(level + 1) * n].to_vec(),
        })
    }

    /// Keeps the primes of `slice`, which must be contained in this
    /// polynomial's slice.
    pub fn restrict(&self, slice: BasisSlice) -> Result<Self> {
        if slice.level > self.slice.level || (slice.special && !self.slice.special) {
            return Err(Error::Basis);
        }
        let n = self.degree();
        let mut data = self.data[..(slice.level + 1) * n].to_vec();
        if slice.special {
            data.extend_from_slice(&self.data[(self.slice.level + 1) * n..]);
        }
        Ok(PolyRns { basis: self.basis.clone(), slice, domain: self.domain, data })
    }

    /// `round(x / q_level)` over `Q_{level-1}`: drops the top prime with
    /// rounding. Works in either domain.
    pub fn divide_round_by_last(&self) -> Result<Self> {
        if self.slice.special {
            return Err(Error::Basis);
        }
        let top = self.slice.level;
        if top == 0 {
            return Err(Error::DepthExhausted);
        }
        let n = self.degree();
        let basis = self.basis.clone();
        let ql = basis.modulus(top);
        let mut last = self.residues(top).to_vec();
        if self.domain == Domain::Evaluation {
            basis.table(top).inverse(ql, &mut last);
        }
        let half = ql.value() / 2;
        let mut out = self.truncate(top - 1)?;
        let mut tmp = vec![0u64; n];
        for i in 0..top {
            let m = basis.modulus(i);
            let ql_mod = m.reduce(ql.value());
            for (t, &x) in tmp.iter_mut().zip(&last) {
                let r = m.reduce(x);
                *t = if x > half { m.sub(r, ql_mod) } else { r };
            }
            if self.domain == Domain::Evaluation {
                basis.table(i).forward(m, &mut tmp);
            }
            let inv = m.inv(ql_mod);
            let ws = m.shoup(inv);
            for (d, &t) in out.residues_mut(i).iter_mut().zip(&tmp) {
                *d = m.mul_shoup(m.sub(*d, t), inv, ws);
            }
        }
        Ok(out)
    }

    /// Centered coefficients as floats, reconstructed exactly through CRT.
    /// Coefficient domain only.
    pub fn centered_f64(&self) -> Result<Vec<f64>> {
        if self.domain != Domain::Coefficient {
            return Err(Error::Domain);
        }
        let n = self.degree();
        let primes: Vec<usize> = self.slice.indices(&self.basis).collect();
        let conv = CrtConverter::new(&self.basis, primes.clone());
        let mut residues = vec![0u64; primes.len()];
        let mut scratch = vec![0u64; primes.len()];
        Ok((0..n)
            .map(|i| {
                for k in 0..primes.len() {
                    residues[k] = self.data[k * n + i];
                }
                conv.centered_f64(&self.basis, &residues, &mut scratch)
            })
            .collect())
    }

    /// Centered coefficients of a single-prime residue vector.
    pub fn centered_residues(&self, k: usize) -> Vec<i64> {
        let m = self.basis.modulus(self.modulus_index(k));
        self.residues(k).iter().map(|&x| m.center(x)).collect()
    }

    /// Replaces the stored data; used by routines that build residues in
    /// place.
    pub(crate) fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    pub(crate) fn set_domain(&mut self, domain: Domain) {
        self.domain = domain;
    }
}
