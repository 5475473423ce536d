//! Batch encoding through the canonical embedding.
//!
//! Slot `j` holds `m(ζ^{5^j})` for the primitive `2N`-th root `ζ = e^{iπ/N}`;
//! the transform between slots and coefficients is the special FFT over the
//! rotation group generated by 5.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rns::{BasisSlice, PolyRns, RnsBasis};

/// Largest magnitude a scaled coefficient may take.
const COEFF_BOUND: f64 = 9.0e18;

/// A ring element carrying an encoded message, kept in the evaluation
/// domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    pub(crate) poly: PolyRns,
    pub(crate) scale: f64,
}

impl Plaintext {
    pub fn poly(&self) -> &PolyRns {
        &self.poly
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn level(&self) -> usize {
        self.poly.level()
    }
}

#[derive(Clone, Debug)]
pub struct Encoder {
    degree: usize,
    /// `5^j mod 2N`
    rot_group: Vec<usize>,
    /// `e^{2πik / 2N}` for `k` in `0..=2N`
    ksi: Vec<Complex64>,
}

fn bit_reverse_in_place<T>(v: &mut [T]) {
    let n = v.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            v.swap(i, j);
        }
    }
}

impl Encoder {
    pub fn new(degree: usize) -> Self {
        let m = 2 * degree;
        let slots = degree / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = (g * 5) % m;
        }
        let ksi = (0..=m)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / m as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Encoder { degree, rot_group, ksi }
    }

    pub fn slot_count(&self) -> usize {
        self.degree / 2
    }

    /// The subgroup `T = <5>` of `Z*_{2N}`, in slot order.
    pub fn rotation_group(&self) -> &[usize] {
        &self.rot_group
    }

    /// Slots to the coefficient-side vector (before splitting into real and
    /// imaginary halves).
    fn special_fft_inv(&self, vals: &mut [Complex64]) {
        let n = vals.len();
        let m = 2 * self.degree;
        let mut len = n;
        while len >= 1 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..n).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_in_place(vals);
        let inv = 1.0 / n as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }

    fn special_fft(&self, vals: &mut [Complex64]) {
        let n = vals.len();
        let m = 2 * self.degree;
        bit_reverse_in_place(vals);
        let mut len = 2;
        while len <= n {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..n).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    /// Signed integer coefficients of `round(scale * σ^{-1}(values))`.
    pub fn encode_coeffs(&self, values: &[f64], scale: f64) -> Result<Vec<i64>> {
        let slots = self.slot_count();
        if values.len() > slots {
            return Err(Error::Capacity { given: values.len(), slots });
        }
        if values.iter().any(|v| !v.is_finite()) || !scale.is_finite() || scale <= 0.0 {
            return Err(Error::NonFinite);
        }
        let mut vals = vec![Complex64::new(0.0, 0.0); slots];
        for (c, &v) in vals.iter_mut().zip(values) {
            c.re = v;
        }
        self.special_fft_inv(&mut vals);
        let mut coeffs = vec![0i64; self.degree];
        for (i, v) in vals.iter().enumerate() {
            let (re, im) = (libm::round(v.re * scale), libm::round(v.im * scale));
            if re.abs() > COEFF_BOUND || im.abs() > COEFF_BOUND {
                return Err(Error::Parameter("message too large for the encoding scale"));
            }
            coeffs[i] = re as i64;
            coeffs[i + slots] = im as i64;
        }
        Ok(coeffs)
    }

    /// Real parts of `σ(coeffs) / scale`.
    pub fn decode_coeffs(&self, coeffs: &[f64], scale: f64) -> Vec<f64> {
        let slots = self.slot_count();
        let mut vals: Vec<Complex64> = (0..slots)
            .map(|i| Complex64::new(coeffs[i] / scale, coeffs[i + slots] / scale))
            .collect();
        self.special_fft(&mut vals);
        vals.into_iter().map(|c| c.re).collect()
    }

    /// Encodes at `scale` over `Q_level`; missing slots are zero.
    pub fn encode(&self, basis: &Arc<RnsBasis>, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
        if level > basis.max_level() {
            return Err(Error::Parameter("level above the top of the chain"));
        }
        let coeffs = self.encode_coeffs(values, scale)?;
        let mut poly = PolyRns::from_signed(basis, BasisSlice::q(level), &coeffs);
        poly.to_evaluation();
        Ok(Plaintext { poly, scale })
    }

    pub fn decode(&self, pt: &Plaintext) -> Result<Vec<f64>> {
        let mut p = pt.poly.clone();
        p.to_coefficient();
        Ok(self.decode_coeffs(&p.centered_f64()?, pt.scale))
    }
}
