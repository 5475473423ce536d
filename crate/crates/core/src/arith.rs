//! Word-sized modular arithmetic: Barrett and Shoup reduction, primality
//! testing and NTT-friendly prime search.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest supported prime width. Barrett reduction below relies on
/// `q < 2^61` so that a single estimate is off by at most two multiples.
pub const MAX_PRIME_BITS: u32 = 61;

#[inline(always)]
fn mul_hi(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) >> 64) as u64
}

/// An NTT-friendly prime `q ≡ 1 (mod 2N)` with its primitive `2N`-th root of
/// unity and the precomputed constants used by the hot loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    ratio_lo: u64,
    ratio_hi: u64,
    root: u64,
    n_inverse: u64,
}

impl Modulus {
    /// Builds the modulus for ring degree `degree`. Fails unless `value` is a
    /// prime congruent to 1 modulo `2 * degree`.
    pub fn new(value: u64, degree: usize) -> Result<Self> {
        if !degree.is_power_of_two() || degree < 2 {
            return Err(Error::Parameter("ring degree must be a power of two"));
        }
        if value < 3 || 64 - value.leading_zeros() > MAX_PRIME_BITS {
            return Err(Error::InvalidPrime(value));
        }
        if !is_prime(value) || (value - 1) % (2 * degree as u64) != 0 {
            return Err(Error::InvalidPrime(value));
        }
        let ratio = u128::MAX / value as u128;
        let mut m = Modulus {
            value,
            ratio_lo: ratio as u64,
            ratio_hi: (ratio >> 64) as u64,
            root: 0,
            n_inverse: 0,
        };
        m.root = m.find_primitive_root(2 * degree as u64);
        m.n_inverse = m.inv(degree as u64 % value);
        Ok(m)
    }

    #[inline(always)]
    pub fn value(&self) -> u64 {
        self.value
    }

    /// Primitive `2N`-th root of unity.
    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn n_inverse(&self) -> u64 {
        self.n_inverse
    }

    pub fn bits(&self) -> f64 {
        libm::log2(self.value as f64)
    }

    #[inline(always)]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        s.min(s.wrapping_sub(self.value))
    }

    #[inline(always)]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let d = a.wrapping_sub(b);
        d.min(d.wrapping_add(self.value))
    }

    #[inline(always)]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    /// Reduces a 128-bit value (any size) modulo `q` with Barrett's method.
    #[inline(always)]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let q = self.value;
        let xlo = x as u64;
        let xhi = (x >> 64) as u64;
        let t1 = mul_hi(xlo, self.ratio_lo);
        let t2 = xlo as u128 * self.ratio_hi as u128;
        let t3 = xhi as u128 * self.ratio_lo as u128;
        let mid = t1 as u128 + (t2 as u64) as u128 + (t3 as u64) as u128;
        let qhat = xhi
            .wrapping_mul(self.ratio_hi)
            .wrapping_add((t2 >> 64) as u64)
            .wrapping_add((t3 >> 64) as u64)
            .wrapping_add((mid >> 64) as u64);
        let r = xlo.wrapping_sub(qhat.wrapping_mul(q));
        let r = r.min(r.wrapping_sub(q));
        r.min(r.wrapping_sub(q))
    }

    #[inline(always)]
    pub fn reduce(&self, x: u64) -> u64 {
        if x >= self.value {
            self.reduce_u128(x as u128)
        } else {
            x
        }
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Shoup companion `floor(w * 2^64 / q)` for a fixed multiplicand `w < q`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod q` using the Shoup companion of `w`.
    #[inline(always)]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let qhat = mul_hi(a, w_shoup);
        let r = a.wrapping_mul(w).wrapping_sub(qhat.wrapping_mul(self.value));
        r.min(r.wrapping_sub(self.value))
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut result = 1u64;
        let mut b = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                result = self.mul(result, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        result
    }

    /// Multiplicative inverse; `a` must be non-zero mod `q`.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(self.reduce(a) != 0);
        self.pow(a, self.value - 2)
    }

    /// Centered representative of `a` in `(-q/2, q/2]`.
    #[inline(always)]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }

    fn find_primitive_root(&self, order: u64) -> u64 {
        let exp = (self.value - 1) / order;
        let half = order / 2;
        let mut x = 2u64;
        loop {
            let g = self.pow(x, exp);
            if self.pow(g, half) == self.value - 1 {
                // smallest odd power gives a canonical choice
                let g2 = self.mul(g, g);
                let mut best = g;
                let mut cur = g;
                for _ in 1..half {
                    cur = self.mul(cur, g2);
                    if cur < best {
                        best = cur;
                    }
                }
                return best;
            }
            x += 1;
        }
    }
}

fn mul_mod_u128(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod_u128(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod_u128(r, b, m);
        }
        b = mul_mod_u128(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod_u128(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u128(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Searches downward from `2^bits` for `count` primes `q ≡ 1 (mod 2N)` that
/// are not listed in `exclude`.
pub fn generate_ntt_primes(bits: u32, count: usize, degree: usize, exclude: &[u64]) -> Result<Vec<u64>> {
    if !(10..=MAX_PRIME_BITS).contains(&bits) {
        return Err(Error::Parameter("prime bit-length out of range"));
    }
    let step = 2 * degree as u64;
    let top = 1u64 << bits;
    let mut candidate = ((top - 1) / step) * step + 1;
    let mut primes = Vec::with_capacity(count);
    while primes.len() < count {
        if candidate <= step || candidate < (1u64 << (bits - 1)) {
            return Err(Error::Parameter("not enough NTT-friendly primes at this bit-length"));
        }
        if is_prime(candidate) && !exclude.contains(&candidate) {
            primes.push(candidate);
        }
        candidate -= step;
    }
    Ok(primes)
}
