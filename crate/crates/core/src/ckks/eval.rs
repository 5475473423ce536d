use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use super::cipher::{Ciphertext, TernaryCiphertext};
use super::keys::{EvaluationKey, GaloisKeys, KeyKind};
use super::params::Params;
use crate::error::{Error, Result};
use crate::rns::{decompose_digits, eval_automorphism_permutation, mod_down, mod_up, BasisSlice, Domain, PolyRns};

/// Snapshot of the evaluator's operation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OpCount {
    pub relinearizations: u64,
    pub modups: u64,
    pub rotations: u64,
    pub multiplications: u64,
}

impl core::ops::Sub for OpCount {
    type Output = OpCount;

    fn sub(self, rhs: OpCount) -> OpCount {
        OpCount {
            relinearizations: self.relinearizations - rhs.relinearizations,
            modups: self.modups - rhs.modups,
            rotations: self.rotations - rhs.rotations,
            multiplications: self.multiplications - rhs.multiplications,
        }
    }
}

impl core::ops::Add for OpCount {
    type Output = OpCount;

    fn add(self, rhs: OpCount) -> OpCount {
        OpCount {
            relinearizations: self.relinearizations + rhs.relinearizations,
            modups: self.modups + rhs.modups,
            rotations: self.rotations + rhs.rotations,
            multiplications: self.multiplications + rhs.multiplications,
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    relin: AtomicU64,
    modup: AtomicU64,
    rotation: AtomicU64,
    mult: AtomicU64,
}

/// Homomorphic operations over a fixed parameter set. Counters are atomic,
/// so one evaluator may be shared across worker threads.
#[derive(Debug)]
pub struct Evaluator {
    params: Arc<Params>,
    counters: Counters,
}

/// A ciphertext part after decomposition and ModUp, reusable across many
/// key switches of automorphic images of the same ciphertext.
#[derive(Clone, Debug)]
pub struct RaisedDigits {
    digits: Vec<PolyRns>,
}

fn check_pair(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
    if a.level() != b.level() || a.scale != b.scale {
        return Err(Error::Alignment);
    }
    Ok(())
}

impl Evaluator {
    pub fn new(params: &Arc<Params>) -> Self {
        Evaluator { params: params.clone(), counters: Counters::default() }
    }

    pub fn params(&self) -> &Arc<Params> {
        &self.params
    }

    pub fn counts(&self) -> OpCount {
        OpCount {
            relinearizations: self.counters.relin.load(Ordering::Relaxed),
            modups: self.counters.modup.load(Ordering::Relaxed),
            rotations: self.counters.rotation.load(Ordering::Relaxed),
            multiplications: self.counters.mult.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counts(&self) {
        self.counters.relin.store(0, Ordering::Relaxed);
        self.counters.modup.store(0, Ordering::Relaxed);
        self.counters.rotation.store(0, Ordering::Relaxed);
        self.counters.mult.store(0, Ordering::Relaxed);
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let mut r = a.clone();
        self.add_assign(&mut r, b)?;
        Ok(r)
    }

    pub fn add_assign(&self, a: &mut Ciphertext, b: &Ciphertext) -> Result<()> {
        check_pair(a, b)?;
        a.c0.add_assign(&b.c0)?;
        a.c1.add_assign(&b.c1)
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        check_pair(a, b)?;
        Ok(Ciphertext { c0: a.c0.sub(&b.c0)?, c1: a.c1.sub(&b.c1)?, scale: a.scale })
    }

    fn check_mult(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        if a.level() != b.level() {
            return Err(Error::Alignment);
        }
        if a.level() == 0 {
            return Err(Error::DepthExhausted);
        }
        Ok(())
    }

    /// Tensor product with the Karatsuba cross term
    /// `d1 = (c0 + c1)(c0' + c1') - d0 - d2`.
    pub fn multiply(&self, a: &Ciphertext, b: &Ciphertext) -> Result<TernaryCiphertext> {
        self.check_mult(a, b)?;
        let d0 = a.c0.mul_pointwise(&b.c0)?;
        let d2 = a.c1.mul_pointwise(&b.c1)?;
        let mut d1 = a.c0.add(&a.c1)?;
        d1.mul_assign(&b.c0.add(&b.c1)?)?;
        d1.sub_assign(&d0)?;
        d1.sub_assign(&d2)?;
        self.counters.mult.fetch_add(1, Ordering::Relaxed);
        Ok(TernaryCiphertext { d0, d1, d2, scale: a.scale * b.scale })
    }

    /// Tensor product with the four-multiplication cross term.
    pub fn multiply_classical(&self, a: &Ciphertext, b: &Ciphertext) -> Result<TernaryCiphertext> {
        self.check_mult(a, b)?;
        let d0 = a.c0.mul_pointwise(&b.c0)?;
        let d2 = a.c1.mul_pointwise(&b.c1)?;
        let mut d1 = a.c0.mul_pointwise(&b.c1)?;
        d1.add_assign(&a.c1.mul_pointwise(&b.c0)?)?;
        self.counters.mult.fetch_add(1, Ordering::Relaxed);
        Ok(TernaryCiphertext { d0, d1, d2, scale: a.scale * b.scale })
    }

    /// `(c0², 2·c0·c1, c1²)`
    pub fn square(&self, a: &Ciphertext) -> Result<TernaryCiphertext> {
        self.check_mult(a, a)?;
        let d0 = a.c0.mul_pointwise(&a.c0)?;
        let d2 = a.c1.mul_pointwise(&a.c1)?;
        let mut d1 = a.c0.mul_pointwise(&a.c1)?;
        let copy = d1.clone();
        d1.add_assign(&copy)?;
        self.counters.mult.fetch_add(1, Ordering::Relaxed);
        Ok(TernaryCiphertext { d0, d1, d2, scale: a.scale * a.scale })
    }

    pub fn add_triple_assign(&self, acc: &mut TernaryCiphertext, t: &TernaryCiphertext) -> Result<()> {
        if acc.level() != t.level() || acc.scale != t.scale {
            return Err(Error::Alignment);
        }
        acc.d0.add_assign(&t.d0)?;
        acc.d1.add_assign(&t.d1)?;
        acc.d2.add_assign(&t.d2)
    }

    /// Sum of product triples, left in ternary form for a single later
    /// relinearization.
    pub fn lazy_accumulate(&self, ts: &[TernaryCiphertext]) -> Result<TernaryCiphertext> {
        let (first, rest) = ts.split_first().ok_or(Error::Parameter("nothing to accumulate"))?;
        let mut acc = first.clone();
        for t in rest {
            self.add_triple_assign(&mut acc, t)?;
        }
        Ok(acc)
    }

    /// Decomposition and ModUp of an evaluation-domain polynomial over
    /// `Q_ℓ`: the hoistable half of key switching.
    pub fn raise(&self, c: &PolyRns) -> Result<RaisedDigits> {
        if c.slice().special {
            return Err(Error::Basis);
        }
        let mut coeff = c.clone();
        coeff.to_coefficient();
        let converted = (c.domain() == Domain::Coefficient).then(|| {
            let mut e = c.clone();
            e.to_evaluation();
            e
        });
        let eval_form = converted.as_ref().unwrap_or(c);
        let digits = decompose_digits(&coeff, self.params.spec().alpha)?
            .iter()
            .map(|d| {
                let mut up = mod_up(d)?;
                // a digit's own residues are the input's
                up.to_evaluation_reusing(eval_form, d.primes());
                Ok(up)
            })
            .collect::<Result<Vec<_>>>()?;
        self.counters.modup.fetch_add(1, Ordering::Relaxed);
        Ok(RaisedDigits { digits })
    }

    /// Inner product of (optionally permuted) raised digits with a key,
    /// followed by ModDown: returns `(ks0, ks1)` over `Q_ℓ` with
    /// `ks0 + ks1·s ≈ x·s'`.
    fn switch(&self, raised: &RaisedDigits, key: &EvaluationKey, perm: Option<&[usize]>) -> Result<(PolyRns, PolyRns)> {
        let basis = self.params.basis();
        let level = raised.digits[0].level();
        if key.parts.len() < raised.digits.len() {
            return Err(Error::Key("key has too few digits"));
        }
        let n = basis.degree();
        let slice = BasisSlice::extended(level);
        let mut acc0 = PolyRns::zero(basis, slice, Domain::Evaluation);
        let mut acc1 = PolyRns::zero(basis, slice, Domain::Evaluation);
        let mut wide0 = vec![0u128; n];
        let mut wide1 = vec![0u128; n];
        for (k, g) in slice.indices(basis).enumerate() {
            // the key lives over the full chain, where global index = storage position
            let m = basis.modulus(g);
            wide0.iter_mut().for_each(|x| *x = 0);
            wide1.iter_mut().for_each(|x| *x = 0);
            for (digit, (k0, k1)) in raised.digits.iter().zip(&key.parts) {
                let d = digit.residues(k);
                let (r0, r1) = (k0.residues(g), k1.residues(g));
                match perm {
                    Some(p) => {
                        for i in 0..n {
                            let x = d[p[i]] as u128;
                            wide0[i] += x * r0[i] as u128;
                            wide1[i] += x * r1[i] as u128;
                        }
                    }
                    None => {
                        for i in 0..n {
                            let x = d[i] as u128;
                            wide0[i] += x * r0[i] as u128;
                            wide1[i] += x * r1[i] as u128;
                        }
                    }
                }
            }
            for (dst, &w) in acc0.residues_mut(k).iter_mut().zip(&wide0) {
                *dst = m.reduce_u128(w);
            }
            for (dst, &w) in acc1.residues_mut(k).iter_mut().zip(&wide1) {
                *dst = m.reduce_u128(w);
            }
        }
        Ok((mod_down(&acc0)?, mod_down(&acc1)?))
    }

    pub fn relinearize(&self, t: &TernaryCiphertext, rk: &EvaluationKey) -> Result<Ciphertext> {
        if rk.kind != KeyKind::Relinearization {
            return Err(Error::Key("expected a relinearization key"));
        }
        let raised = self.raise(&t.d2)?;
        let (ks0, ks1) = self.switch(&raised, rk, None)?;
        self.counters.relin.fetch_add(1, Ordering::Relaxed);
        Ok(Ciphertext { c0: t.d0.add(&ks0)?, c1: t.d1.add(&ks1)?, scale: t.scale })
    }

    /// Divides by the top prime of the ciphertext's level.
    pub fn rescale(&self, a: &Ciphertext) -> Result<Ciphertext> {
        let level = a.level();
        if level == 0 {
            return Err(Error::DepthExhausted);
        }
        let q = self.params.basis().q(level).value() as f64;
        Ok(Ciphertext { c0: a.c0.divide_round_by_last()?, c1: a.c1.divide_round_by_last()?, scale: a.scale / q })
    }

    /// Multiply, relinearize and rescale.
    pub fn mul_relin_rescale(&self, a: &Ciphertext, b: &Ciphertext, rk: &EvaluationKey) -> Result<Ciphertext> {
        let t = self.multiply(a, b)?;
        self.rescale(&self.relinearize(&t, rk)?)
    }

    /// Multiplies by the real constant `x`, consuming one level. The constant
    /// is encoded at the scale of the dropped prime, so the ciphertext's
    /// scale is unchanged.
    pub fn mul_const(&self, a: &Ciphertext, x: f64) -> Result<Ciphertext> {
        let level = a.level();
        if level == 0 {
            return Err(Error::DepthExhausted);
        }
        if !x.is_finite() {
            return Err(Error::NonFinite);
        }
        let q = self.params.basis().q(level).value() as f64;
        let c = libm::round(x * q);
        if c.abs() > 9.0e18 {
            return Err(Error::Parameter("constant too large"));
        }
        let mut r = a.clone();
        r.c0.mul_scalar_assign(c as i64);
        r.c1.mul_scalar_assign(c as i64);
        r.scale = a.scale * q;
        self.rescale(&r)
    }

    /// Drops primes above `level` without dividing; the scale is unchanged.
    pub fn drop_to_level(&self, a: &Ciphertext, level: usize) -> Result<Ciphertext> {
        if level > a.level() {
            return Err(Error::Alignment);
        }
        Ok(Ciphertext { c0: a.c0.truncate(level)?, c1: a.c1.truncate(level)?, scale: a.scale })
    }

    fn rotate_raised(&self, a: &Ciphertext, raised: &RaisedDigits, key: &EvaluationKey) -> Result<Ciphertext> {
        let KeyKind::Rotation { galois, .. } = key.kind else {
            return Err(Error::Key("expected a rotation key"));
        };
        let perm = eval_automorphism_permutation(self.params.degree(), galois);
        let (ks0, c1) = self.switch(raised, key, Some(&perm))?;
        let mut c0 = ks0.clone();
        a.c0.permute_into(&perm, &mut c0);
        c0.add_assign(&ks0)?;
        self.counters.rotation.fetch_add(1, Ordering::Relaxed);
        Ok(Ciphertext { c0, c1, scale: a.scale })
    }

    fn key_for<'k>(&self, keys: &'k GaloisKeys, step: usize) -> Result<&'k EvaluationKey> {
        keys.get(step % self.params.slot_count()).ok_or(Error::Key("no rotation key for this step"))
    }

    /// Left rotation of the slot vector by `step`.
    pub fn rotate(&self, a: &Ciphertext, step: usize, keys: &GaloisKeys) -> Result<Ciphertext> {
        if step % self.params.slot_count() == 0 {
            return Ok(a.clone());
        }
        let key = self.key_for(keys, step)?;
        let raised = self.raise(&a.c1)?;
        self.rotate_raised(a, &raised, key)
    }

    /// Rotation of `a` by `step` from digits already raised from `a`'s
    /// second part.
    pub fn rotate_hoisted(&self, a: &Ciphertext, raised: &RaisedDigits, step: usize, keys: &GaloisKeys) -> Result<Ciphertext> {
        if step % self.params.slot_count() == 0 {
            return Ok(a.clone());
        }
        let key = self.key_for(keys, step)?;
        self.rotate_raised(a, raised, key)
    }

    /// All `steps` rotations of `a` from a single decomposition and ModUp.
    pub fn hoisted_rotations(&self, a: &Ciphertext, steps: &[usize], keys: &GaloisKeys) -> Result<Vec<Ciphertext>> {
        let slots = self.params.slot_count();
        let mut resolved = Vec::with_capacity(steps.len());
        for &step in steps {
            resolved.push(if step % slots == 0 { None } else { Some(self.key_for(keys, step)?) });
        }
        if resolved.iter().all(Option::is_none) {
            return Ok(steps.iter().map(|_| a.clone()).collect());
        }
        let raised = self.raise(&a.c1)?;
        resolved
            .into_iter()
            .map(|key| match key {
                None => Ok(a.clone()),
                Some(key) => self.rotate_raised(a, &raised, key),
            })
            .collect()
    }
}
