//! RNS digit decomposition and the basis extensions used by key switching.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::basis::{CrtConverter, RnsBasis};
use super::poly::{BasisSlice, Domain, PolyRns};
use crate::error::{Error, Result};

/// One digit of a decomposition: the residues of a polynomial on the
/// contiguous block of ciphertext primes `start..end`, representing an
/// integer in `[0, q_start * .. * q_{end-1})`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RnsDigit {
    basis: Arc<RnsBasis>,
    level: usize,
    start: usize,
    end: usize,
    domain: Domain,
    data: Vec<u64>,
}

impl RnsDigit {
    pub fn primes(&self) -> core::ops::Range<usize> {
        self.start..self.end
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn residues(&self, k: usize) -> &[u64] {
        let n = self.basis.degree();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }
}

/// `β = ⌈(ℓ + 1) / α⌉`.
pub fn digit_count(level: usize, alpha: usize) -> usize {
    (level + alpha) / alpha
}

fn split(p: &PolyRns, alpha: usize, scale: impl Fn(usize) -> u64) -> Result<Vec<RnsDigit>> {
    if alpha == 0 {
        return Err(Error::Parameter("decomposition width must be positive"));
    }
    if p.slice().special {
        return Err(Error::Basis);
    }
    let level = p.level();
    let n = p.degree();
    let beta = digit_count(level, alpha);
    let mut digits = Vec::with_capacity(beta);
    for j in 0..beta {
        let start = j * alpha;
        let end = ((j + 1) * alpha).min(level + 1);
        let mut data = p.data()[start * n..end * n].to_vec();
        for i in start..end {
            let m = p.basis().modulus(i);
            let w = scale(i);
            if w != 1 {
                let ws = m.shoup(w);
                for x in &mut data[(i - start) * n..(i - start + 1) * n] {
                    *x = m.mul_shoup(*x, w, ws);
                }
            }
        }
        digits.push(RnsDigit {
            basis: p.basis().clone(),
            level,
            start,
            end,
            domain: p.domain(),
            data,
        });
    }
    Ok(digits)
}

/// Splits `p` (over `Q_ℓ`) into `⌈(ℓ+1)/α⌉` residue blocks of `α` primes.
/// This is the form consumed by key switching, whose keys carry the CRT
/// idempotent of each block.
pub fn decompose_digits(p: &PolyRns, alpha: usize) -> Result<Vec<RnsDigit>> {
    split(p, alpha, |_| 1)
}

/// `Q' = ∏_{i=ℓ+1}^{αβ-1} q_i` reduced modulo prime `target`; primes past the
/// end of the chain count as zero padding and contribute nothing.
fn padding_factor(basis: &RnsBasis, level: usize, alpha: usize, target: usize) -> u64 {
    let beta = digit_count(level, alpha);
    let top = (alpha * beta).min(basis.max_level() + 1);
    let m = basis.modulus(target);
    (level + 1..top).fold(1u64, |acc, i| m.mul(acc, m.reduce(basis.q(i).value())))
}

/// Padded-layout decomposition: each of the `β` digits holds the residues of
/// `p` on its block, multiplied by `[Q']_{q_i}`.
pub fn rns_decompose(p: &PolyRns, alpha: usize) -> Result<Vec<RnsDigit>> {
    let basis = p.basis().clone();
    let level = p.level();
    split(p, alpha, |i| padding_factor(&basis, level, alpha, i))
}

/// Inverse of [`rns_decompose`] (`padded = true`) or [`decompose_digits`]:
/// the CRT-weighted sum of the digits, divided by `Q'` when padded.
pub fn rns_recombine(digits: &[RnsDigit], alpha: usize, padded: bool) -> Result<PolyRns> {
    let first = digits.first().ok_or(Error::Parameter("no digits"))?;
    let basis = first.basis.clone();
    let level = first.level;
    let n = basis.degree();
    if digits.len() != digit_count(level, alpha) || digits.iter().any(|d| d.level != level || d.domain != first.domain) {
        return Err(Error::Basis);
    }
    let mut out = PolyRns::zero(&basis, BasisSlice::q(level), first.domain);
    for d in digits {
        for i in d.start..d.end {
            let m = basis.modulus(i);
            let src = d.residues(i - d.start);
            let dst = &mut out.data_mut()[i * n..(i + 1) * n];
            if padded {
                let w = m.inv(padding_factor(&basis, level, alpha, i));
                let ws = m.shoup(w);
                for (x, &s) in dst.iter_mut().zip(src) {
                    *x = m.mul_shoup(s, w, ws);
                }
            } else {
                dst.copy_from_slice(src);
            }
        }
    }
    Ok(out)
}

/// ModUp: lifts a coefficient-domain digit to every prime of `Q_ℓ ∪ P`,
/// using the exact centered representative of the digit's integer value.
pub fn mod_up(digit: &RnsDigit) -> Result<PolyRns> {
    if digit.domain != Domain::Coefficient {
        return Err(Error::Domain);
    }
    let basis = &digit.basis;
    let n = basis.degree();
    let slice = BasisSlice::extended(digit.level);
    let mut out = PolyRns::zero(basis, slice, Domain::Coefficient);
    let width = digit.end - digit.start;
    let conv = CrtConverter::new(basis, (digit.start..digit.end).collect());
    let targets: Vec<usize> = slice.indices(basis).collect();

    // single-prime digits need only a centered lift
    if width == 1 {
        let src_mod = basis.modulus(digit.start);
        let centered: Vec<i64> = digit.residues(0).iter().map(|&x| src_mod.center(x)).collect();
        for (k, &t) in targets.iter().enumerate() {
            let dst = &mut out.data_mut()[k * n..(k + 1) * n];
            if t == digit.start {
                dst.copy_from_slice(digit.residues(0));
            } else {
                let m = basis.modulus(t);
                for (d, &c) in dst.iter_mut().zip(&centered) {
                    *d = m.reduce_i64(c);
                }
            }
        }
        return Ok(out);
    }

    let mut residues = vec![0u64; width];
    let mut mixed = vec![0u64; width];
    let span: Vec<u64> = targets.iter().map(|&t| conv.product_mod(basis, basis.modulus(t))).collect();
    for i in 0..n {
        for k in 0..width {
            residues[k] = digit.data[k * n + i];
        }
        conv.digits(basis, &residues, &mut mixed);
        let upper = conv.is_upper_half(&mixed);
        for (k, &t) in targets.iter().enumerate() {
            let value = if (digit.start..digit.end).contains(&t) {
                residues[t - digit.start]
            } else {
                let m = basis.modulus(t);
                let v = conv.eval_mod(basis, &mixed, m);
                if upper {
                    m.sub(v, span[k])
                } else {
                    v
                }
            };
            out.data_mut()[k * n + i] = value;
        }
    }
    Ok(out)
}

/// ModDown: maps `x` over `Q_ℓ ∪ P` to `round(x / P)` over `Q_ℓ`. Works in
/// either domain; the result keeps the input's domain.
pub fn mod_down(x: &PolyRns) -> Result<PolyRns> {
    if !x.slice().special {
        return Err(Error::Basis);
    }
    let basis = x.basis().clone();
    let n = basis.degree();
    let level = x.level();
    let sp = basis.special_count();
    // special residues in coefficient form
    let mut special: Vec<Vec<u64>> = (0..sp).map(|j| x.residues(level + 1 + j).to_vec()).collect();
    if x.domain() == Domain::Evaluation {
        for (j, res) in special.iter_mut().enumerate() {
            let idx = basis.special_range().start + j;
            basis.table(idx).inverse(basis.modulus(idx), res);
        }
    }
    let conv = CrtConverter::new(&basis, basis.special_range().collect());
    let mut out = x.truncate(level)?;

    // centered [x]_P, as mixed-radix digits once per coefficient
    let mut mixed = vec![0u64; sp * n];
    let mut upper = vec![false; n];
    if sp > 1 {
        let mut residues = vec![0u64; sp];
        for i in 0..n {
            for j in 0..sp {
                residues[j] = special[j][i];
            }
            conv.digits(&basis, &residues, &mut mixed[i * sp..(i + 1) * sp]);
            upper[i] = conv.is_upper_half(&mixed[i * sp..(i + 1) * sp]);
        }
    }

    let mut corr = vec![0u64; n];
    for i in 0..=level {
        let m = basis.modulus(i);
        if sp == 1 {
            let sm = basis.special(0);
            for (c, &r) in corr.iter_mut().zip(&special[0]) {
                *c = m.reduce_i64(sm.center(r));
            }
        } else {
            let span = conv.product_mod(&basis, m);
            for (k, c) in corr.iter_mut().enumerate() {
                let v = conv.eval_mod(&basis, &mixed[k * sp..(k + 1) * sp], m);
                *c = if upper[k] { m.sub(v, span) } else { v };
            }
        }
        if x.domain() == Domain::Evaluation {
            basis.table(i).forward(m, &mut corr);
        }
        let p_inv = m.inv(basis.special_product_mod(i));
        let p_inv_s = m.shoup(p_inv);
        for (d, &c) in out.residues_mut(i).iter_mut().zip(&corr) {
            *d = m.mul_shoup(m.sub(*d, c), p_inv, p_inv_s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rns::Security;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(depth: usize, specials: usize) -> Arc<RnsBasis> {
        RnsBasis::generate(16, 30, 28, depth, 31, specials, Security::Unchecked).unwrap()
    }

    fn random(basis: &Arc<RnsBasis>, slice: BasisSlice, rng: &mut ChaCha8Rng) -> PolyRns {
        let n = basis.degree();
        let mut data = Vec::new();
        for idx in slice.indices(basis) {
            let q = basis.modulus(idx).value();
            data.extend((0..n).map(|_| rng.random_range(0..q)));
        }
        PolyRns::from_residues(basis, slice, Domain::Coefficient, data).unwrap()
    }

    fn crt(residues: &[(u64, u64)]) -> BigInt {
        let big: BigInt = residues.iter().map(|&(_, q)| BigInt::from(q)).product();
        let mut acc = BigInt::from(0);
        for &(r, q) in residues {
            let qb = BigInt::from(q);
            let hat = &big / &qb;
            let inv = (&hat % &qb).modpow(&(&qb - 2u32), &qb);
            acc += BigInt::from(r) * &hat * inv;
        }
        ((acc % &big) + &big) % &big
    }

    fn modulus_product(basis: &RnsBasis, idx: impl Iterator<Item = usize>) -> BigInt {
        idx.map(|i| BigInt::from(basis.modulus(i).value())).product()
    }

    #[test]
    fn digit_counts() {
        assert_eq!(digit_count(3, 2), 2);
        assert_eq!(digit_count(3, 4), 1);
        assert_eq!(digit_count(2, 2), 2);
        assert_eq!(digit_count(0, 1), 1);
    }

    #[test]
    fn single_digit_is_the_input() {
        let b = basis(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random(&b, BasisSlice::q(3), &mut rng);
        let digits = rns_decompose(&p, 4).unwrap();
        assert_eq!(digits.len(), 1);
        for k in 0..4 {
            assert_eq!(digits[0].residues(k), p.residues(k));
        }
        // L = 3, alpha = 2 at the top level: two digits
        assert_eq!(rns_decompose(&p, 2).unwrap().len(), 2);
    }

    #[test]
    fn recombination_matches_bigint_oracle() {
        let b = basis(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &(level, alpha) in &[(3usize, 2usize), (2, 2), (1, 3), (3, 1), (2, 3)] {
            let p = random(&b, BasisSlice::q(level), &mut rng);
            let q_l = modulus_product(&b, 0..=level);
            let beta = digit_count(level, alpha);
            let top = (alpha * beta).min(b.max_level() + 1);
            let q_pad = modulus_product(&b, level + 1..top);
            let digits = rns_decompose(&p, alpha).unwrap();
            for i in 0..b.degree() {
                // integer value of p and the idempotent-weighted digit sum
                let pv = crt(&(0..=level).map(|k| (p.residues(k)[i], b.q(k).value())).collect::<Vec<_>>());
                let mut sum = BigInt::from(0);
                for d in &digits {
                    let block: Vec<(u64, u64)> = d.primes().map(|k| (d.residues(k - d.primes().start)[i], b.q(k).value())).collect();
                    let dv = crt(&block);
                    let dj = modulus_product(&b, d.primes());
                    let hat = &q_l / &dj;
                    // idempotent: hat * (hat^{-1} mod dj)
                    let inv = crt_inverse(&hat, &dj);
                    sum += dv * hat * inv;
                }
                let sum = ((sum % &q_l) + &q_l) % &q_l;
                assert_eq!(sum, (&pv * &q_pad) % &q_l);
            }
            assert_eq!(rns_recombine(&digits, alpha, true).unwrap(), p);
            assert_eq!(rns_recombine(&decompose_digits(&p, alpha).unwrap(), alpha, false).unwrap(), p);
        }
    }

    fn crt_inverse(a: &BigInt, m: &BigInt) -> BigInt {
        // extended Euclid
        let (mut old_r, mut r) = (((a % m) + m) % m, m.clone());
        let (mut old_s, mut s) = (BigInt::from(1), BigInt::from(0));
        while r != BigInt::from(0) {
            let q = &old_r / &r;
            let t = &old_r - &q * &r;
            old_r = core::mem::replace(&mut r, t);
            let t = &old_s - &q * &s;
            old_s = core::mem::replace(&mut s, t);
        }
        ((old_s % m) + m) % m
    }

    #[test]
    fn mod_up_matches_centered_crt_lift() {
        for specials in [1usize, 2] {
            let b = basis(3, specials);
            let mut rng = ChaCha8Rng::seed_from_u64(7 + specials as u64);
            let p = random(&b, BasisSlice::q(3), &mut rng);
            for alpha in [1usize, 2, 3] {
                for d in decompose_digits(&p, alpha).unwrap() {
                    let up = mod_up(&d).unwrap();
                    let dj = modulus_product(&b, d.primes());
                    for i in 0..b.degree() {
                        let block: Vec<(u64, u64)> = d.primes().map(|k| (d.residues(k - d.primes().start)[i], b.q(k).value())).collect();
                        let mut v = crt(&block);
                        if &v * 2 > dj {
                            v -= &dj;
                        }
                        for (k, idx) in BasisSlice::extended(3).indices(&b).enumerate() {
                            let q = BigInt::from(b.modulus(idx).value());
                            let expect = ((&v % &q) + &q) % &q;
                            assert_eq!(BigInt::from(up.residues(k)[i]), expect);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_roundtrip() {
        let b = basis(2, 1);
        let z = PolyRns::zero(&b, BasisSlice::q(2), Domain::Coefficient);
        for d in decompose_digits(&z, 1).unwrap() {
            let up = mod_up(&d).unwrap();
            assert!(up.data().iter().all(|&x| x == 0));
            let down = mod_down(&up).unwrap();
            assert!(down.data().iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn small_coefficients_survive_scaled_roundtrip() {
        for specials in [1usize, 2] {
            let b = basis(2, specials);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let q0 = b.q(0).value() as i64;
            let coeffs: Vec<i64> = (0..16).map(|_| rng.random_range(-q0 / 4..q0 / 4)).collect();
            let noise: Vec<i64> = (0..16).map(|_| rng.random_range(-1000..1000)).collect();
            let x = PolyRns::from_signed(&b, BasisSlice::q(2), &coeffs);
            // single digit covering the whole level
            let d = decompose_digits(&x, 3).unwrap().remove(0);
            let mut up = mod_up(&d).unwrap();
            // multiply by P and perturb: mod_down must return x exactly
            for k in 0..up.prime_count() {
                let idx = up.modulus_index(k);
                let w = b.special_product_mod(idx);
                up.mul_residue_scalar(k, w);
            }
            up.add_assign(&PolyRns::from_signed(&b, BasisSlice::extended(2), &noise)).unwrap();
            for domain_eval in [false, true] {
                let mut input = up.clone();
                if domain_eval {
                    input.to_evaluation();
                }
                let mut down = mod_down(&input).unwrap();
                down.to_coefficient();
                let back = down.centered_f64().unwrap();
                for (a, r) in coeffs.iter().zip(&back) {
                    assert!((*a as f64 - r).abs() <= 1.0);
                }
            }
        }
    }
}
