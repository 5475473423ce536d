//! Negacyclic number-theoretic transform over `Z_q[X]/(X^N + 1)`.
//!
//! Forward transform is Cooley-Tukey with merged `psi` twiddles (natural
//! order in, bit-reversed out); the inverse is the matching Gentleman-Sande
//! pass. Output slot `i` of the forward transform holds the evaluation at
//! `psi^(2 * bitrev(i) + 1)`.

use alloc::vec::Vec;

use crate::arith::Modulus;

#[derive(Clone, Debug)]
pub struct NttTable {
    degree: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    ipsi_rev: Vec<u64>,
    ipsi_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

#[inline]
pub(crate) fn bit_reverse(mut x: usize, bits: u32) -> usize {
    if bits == 0 {
        return 0;
    }
    x = x.reverse_bits();
    x >> (usize::BITS - bits)
}

impl NttTable {
    pub fn new(modulus: &Modulus, degree: usize) -> Self {
        let bits = degree.trailing_zeros();
        let psi = modulus.root();
        let ipsi = modulus.inv(psi);
        let mut psi_rev = alloc::vec![0u64; degree];
        let mut ipsi_rev = alloc::vec![0u64; degree];
        let mut pw = 1u64;
        let mut ipw = 1u64;
        for i in 0..degree {
            let r = bit_reverse(i, bits);
            psi_rev[r] = pw;
            ipsi_rev[r] = ipw;
            pw = modulus.mul(pw, psi);
            ipw = modulus.mul(ipw, ipsi);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let ipsi_rev_shoup = ipsi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        NttTable {
            degree,
            psi_rev,
            psi_rev_shoup,
            ipsi_rev,
            ipsi_rev_shoup,
            n_inv: modulus.n_inverse(),
            n_inv_shoup: modulus.shoup(modulus.n_inverse()),
        }
    }

    pub fn forward(&self, m: &Modulus, a: &mut [u64]) {
        let n = self.degree;
        debug_assert_eq!(a.len(), n);
        let q = m.value();
        let mut t = n;
        let mut groups = 1;
        while groups < n {
            t >>= 1;
            for i in 0..groups {
                let j1 = 2 * i * t;
                let w = self.psi_rev[groups + i];
                let ws = self.psi_rev_shoup[groups + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = m.mul_shoup(*y, w, ws);
                    let s = u + v;
                    *x = s.min(s.wrapping_sub(q));
                    let d = u.wrapping_sub(v);
                    *y = d.min(d.wrapping_add(q));
                }
            }
            groups <<= 1;
        }
    }

    pub fn inverse(&self, m: &Modulus, a: &mut [u64]) {
        let n = self.degree;
        debug_assert_eq!(a.len(), n);
        let q = m.value();
        let mut t = 1;
        let mut groups = n;
        while groups > 1 {
            let h = groups >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.ipsi_rev[h + i];
                let ws = self.ipsi_rev_shoup[h + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let s = u + v;
                    *x = s.min(s.wrapping_sub(q));
                    let d = u.wrapping_sub(v);
                    let d = d.min(d.wrapping_add(q));
                    *y = m.mul_shoup(d, w, ws);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            groups = h;
        }
        for x in a.iter_mut() {
            *x = m.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

/// Permutation realising the automorphism `X -> X^g` on bit-reversed
/// evaluation vectors: `out[i] = in[perm[i]]`.
pub(crate) fn eval_automorphism_permutation(degree: usize, galois: usize) -> Vec<usize> {
    let bits = degree.trailing_zeros();
    let two_n = 2 * degree;
    (0..degree)
        .map(|i| {
            let e = 2 * bit_reverse(i, bits) + 1;
            let target = (galois * e) % two_n;
            bit_reverse((target - 1) / 2, bits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schoolbook(m: &Modulus, a: &[u64], b: &[u64]) -> Vec<u64> {
        let n = a.len();
        let mut out = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                let p = m.mul(a[i], b[j]);
                let k = i + j;
                if k < n {
                    out[k] = m.add(out[k], p);
                } else {
                    out[k - n] = m.sub(out[k - n], p);
                }
            }
        }
        out
    }

    #[test]
    fn x_evaluates_to_odd_powers() {
        let m = Modulus::new(17, 8).unwrap();
        let t = NttTable::new(&m, 8);
        let mut a = vec![0, 1, 0, 0, 0, 0, 0, 0];
        t.forward(&m, &mut a);
        let mut expected: Vec<u64> = (0..8).map(|k| m.pow(m.root(), 2 * k + 1)).collect();
        for i in 0..8 {
            assert_eq!(a[i], m.pow(m.root(), 2 * bit_reverse(i, 3) as u64 + 1));
        }
        a.sort_unstable();
        expected.sort_unstable();
        assert_eq!(a, expected);
    }

    #[test]
    fn constant_evaluates_to_itself() {
        let m = Modulus::new(97, 16).unwrap();
        let t = NttTable::new(&m, 16);
        let mut a = vec![0u64; 16];
        a[0] = 42;
        t.forward(&m, &mut a);
        assert!(a.iter().all(|&x| x == 42));
        t.inverse(&m, &mut a);
        assert_eq!(a[0], 42);
        assert!(a[1..].iter().all(|&x| x == 0));
    }

    #[test]
    fn convolution_matches_schoolbook() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[4usize, 8, 16, 32] {
            let q = crate::arith::generate_ntt_primes(30, 1, n, &[]).unwrap()[0];
            let m = Modulus::new(q, n).unwrap();
            let t = NttTable::new(&m, n);
            for _ in 0..1000 {
                let a: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
                let b: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
                let expected = schoolbook(&m, &a, &b);
                let (mut fa, mut fb) = (a.clone(), b.clone());
                t.forward(&m, &mut fa);
                t.forward(&m, &mut fb);
                let mut prod: Vec<u64> = fa.iter().zip(&fb).map(|(&x, &y)| m.mul(x, y)).collect();
                t.inverse(&m, &mut prod);
                assert_eq!(prod, expected);
            }
        }
    }

    #[test]
    fn permutation_matches_coefficient_automorphism() {
        let n = 32;
        let q = crate::arith::generate_ntt_primes(30, 1, n, &[]).unwrap()[0];
        let m = Modulus::new(q, n).unwrap();
        let t = NttTable::new(&m, n);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
        for g in [5usize, 25, 2 * n - 1, 3] {
            let mut expect = vec![0u64; n];
            for (k, &c) in a.iter().enumerate() {
                let idx = (k * g) % (2 * n);
                if idx < n {
                    expect[idx] = c;
                } else {
                    expect[idx - n] = m.neg(c);
                }
            }
            t.forward(&m, &mut expect);
            let mut fa = a.clone();
            t.forward(&m, &mut fa);
            let perm = eval_automorphism_permutation(n, g);
            let got: Vec<u64> = perm.iter().map(|&j| fa[j]).collect();
            assert_eq!(got, expect);
        }
    }
}
