use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::RngCore;

use super::encoding::Plaintext;
use super::keys::{PublicKey, SecretKey};
use super::params::Params;
use crate::error::{Error, Result};
use crate::rns::{mod_down, sample, BasisSlice, Distribution, Domain, PolyRns, RnsBasis, ERROR_DISTRIBUTION};

/// `(c0, c1)` over `Q_ℓ`, decrypting as `c0 + c1·s`. Both parts are kept in
/// the evaluation domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) c0: PolyRns,
    pub(crate) c1: PolyRns,
    pub(crate) scale: f64,
}

/// Product triple `(d0, d1, d2)`, decrypting as `d0 + d1·s + d2·s²`.
#[derive(Clone, Debug, PartialEq)]
pub struct TernaryCiphertext {
    pub(crate) d0: PolyRns,
    pub(crate) d1: PolyRns,
    pub(crate) d2: PolyRns,
    pub(crate) scale: f64,
}

impl Ciphertext {
    pub fn from_parts(c0: PolyRns, c1: PolyRns, scale: f64) -> Result<Self> {
        if c0.slice() != c1.slice() || c0.slice().special {
            return Err(Error::Basis);
        }
        if c0.domain() != Domain::Evaluation || c1.domain() != Domain::Evaluation {
            return Err(Error::Domain);
        }
        Ok(Ciphertext { c0, c1, scale })
    }

    pub fn level(&self) -> usize {
        self.c0.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn parts(&self) -> (&PolyRns, &PolyRns) {
        (&self.c0, &self.c1)
    }

    /// Residue bytes held by this ciphertext.
    pub fn size_bytes(&self) -> usize {
        8 * (self.c0.data().len() + self.c1.data().len())
    }
}

impl TernaryCiphertext {
    pub fn level(&self) -> usize {
        self.d0.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn parts(&self) -> (&PolyRns, &PolyRns, &PolyRns) {
        (&self.d0, &self.d1, &self.d2)
    }
}

/// Secret-key encryption `(-a·s + e + m, a)` at the plaintext's level.
/// A uniform polynomial is uniform in either domain, so `a` is drawn
/// directly in evaluation form.
pub fn encrypt_symmetric<R: RngCore>(params: &Params, sk: &SecretKey, pt: &Plaintext, rng: &mut R) -> Result<Ciphertext> {
    let level = pt.level();
    if level > params.max_level() {
        return Err(Error::Parameter("plaintext level above the top of the chain"));
    }
    let basis = params.basis();
    let slice = BasisSlice::q(level);
    let mut a = sample(basis, slice, Distribution::Uniform, rng);
    a.set_domain(Domain::Evaluation);
    let mut c0 = a.mul_pointwise(&sk.at_level(level)?)?;
    c0.neg_assign();
    c0.add_assign(&eval_noise(basis, slice, ERROR_DISTRIBUTION, rng))?;
    c0.add_assign(&pt.poly)?;
    Ok(Ciphertext { c0, c1: a, scale: pt.scale })
}

fn eval_noise<R: RngCore>(basis: &Arc<RnsBasis>, slice: BasisSlice, dist: Distribution, rng: &mut R) -> PolyRns {
    let mut p = sample(basis, slice, dist, rng);
    p.to_evaluation();
    p
}

/// `(round((r·u0 + e0) / P) + m, round((r·u1 + e1) / P))` at the
/// plaintext's level.
pub fn encrypt<R: RngCore>(params: &Params, pk: &PublicKey, pt: &Plaintext, rng: &mut R) -> Result<Ciphertext> {
    let level = pt.level();
    if level > params.max_level() {
        return Err(Error::Parameter("plaintext level above the top of the chain"));
    }
    let basis = params.basis();
    let slice = BasisSlice::extended(level);
    let u0 = pk.u0.restrict(slice)?;
    let u1 = pk.u1.restrict(slice)?;
    let r = eval_noise(basis, slice, Distribution::Ternary, rng);
    let mut c0 = r.mul_pointwise(&u0)?;
    c0.add_assign(&eval_noise(basis, slice, ERROR_DISTRIBUTION, rng))?;
    let mut c1 = r.mul_pointwise(&u1)?;
    c1.add_assign(&eval_noise(basis, slice, ERROR_DISTRIBUTION, rng))?;
    let mut c0 = mod_down(&c0)?;
    c0.add_assign(&pt.poly)?;
    Ok(Ciphertext { c0, c1: mod_down(&c1)?, scale: pt.scale })
}

pub fn decrypt(sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
    let s = sk.at_level(ct.level())?;
    let mut m = ct.c1.mul_pointwise(&s)?;
    m.add_assign(&ct.c0)?;
    Ok(Plaintext { poly: m, scale: ct.scale })
}

pub fn decrypt_triple(sk: &SecretKey, t: &TernaryCiphertext) -> Result<Plaintext> {
    let s = sk.at_level(t.level())?;
    let mut m = t.d2.mul_pointwise(&s)?;
    m.add_assign(&t.d1)?;
    m.mul_assign(&s)?;
    m.add_assign(&t.d0)?;
    Ok(Plaintext { poly: m, scale: t.scale })
}

const MAGIC: &[u8; 4] = b"LCLT";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 1 + 1 + 1 + 8;

impl Ciphertext {
    /// Binary encoding: magic `LCLT`, version (u16), N (u32), level (u8),
    /// rounded `log2 scale` (u8), prime count (u8), exact scale (f64), then
    /// `c0` and `c1` in the coefficient domain, each as one array of N
    /// little-endian u64 residues per prime.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.c0.degree();
        let primes = self.c0.prime_count();
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * n * primes);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.push(self.level() as u8);
        out.push(libm::round(libm::log2(self.scale)).clamp(0.0, 255.0) as u8);
        out.push(primes as u8);
        out.extend_from_slice(&self.scale.to_le_bytes());
        for part in [&self.c0, &self.c1] {
            let mut p = part.clone();
            p.to_coefficient();
            for x in p.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], basis: &Arc<RnsBasis>) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Decode("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Decode("bad magic"));
        }
        if u16::from_le_bytes([bytes[4], bytes[5]]) != VERSION {
            return Err(Error::Decode("unsupported version"));
        }
        let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let level = bytes[10] as usize;
        let primes = bytes[12] as usize;
        let scale = f64::from_le_bytes(bytes[13..21].try_into().unwrap());
        if n != basis.degree() || level > basis.max_level() || primes != level + 1 {
            return Err(Error::Decode("header does not match the parameter set"));
        }
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::Decode("invalid scale"));
        }
        let words = n * primes;
        if bytes.len() != HEADER_LEN + 16 * words {
            return Err(Error::Decode("payload length mismatch"));
        }
        let mut parts = bytes[HEADER_LEN..].chunks_exact(8 * words).map(|chunk| {
            let data: Vec<u64> = chunk.chunks_exact(8).map(|w| u64::from_le_bytes(w.try_into().unwrap())).collect();
            for (k, res) in data.chunks_exact(n).enumerate() {
                let q = basis.q(k).value();
                if res.iter().any(|&x| x >= q) {
                    return Err(Error::Decode("residue out of range"));
                }
            }
            let mut p = PolyRns::from_residues(basis, BasisSlice::q(level), Domain::Coefficient, data)?;
            p.to_evaluation();
            Ok(p)
        });
        let c0 = parts.next().unwrap()?;
        let c1 = parts.next().unwrap()?;
        Ok(Ciphertext { c0, c1, scale })
    }
}
