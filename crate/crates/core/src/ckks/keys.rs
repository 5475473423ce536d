use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::RngCore;

use super::params::Params;
use crate::error::{Error, Result};
use crate::rns::{sample, BasisSlice, Distribution, Domain, PolyRns, ERROR_DISTRIBUTION};

/// Ternary secret `s`, held in the evaluation domain over `Q_L ∪ P`.
#[derive(Clone)]
pub struct SecretKey {
    pub(crate) s: PolyRns,
}

impl core::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// `(u0, u1) = (-a·s + e, a)` over `Q_L ∪ P`. Encryption runs over the
/// extended basis and divides by `P`, so fresh noise is mostly rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicKey {
    pub(crate) u0: PolyRns,
    pub(crate) u1: PolyRns,
}

impl PublicKey {
    pub fn parts(&self) -> (&PolyRns, &PolyRns) {
        (&self.u0, &self.u1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyKind {
    Relinearization,
    Rotation { step: usize, galois: usize },
}

/// Key-switching key from `s'` to `s`: one pair per digit,
/// `k0_j + k1_j·s = e_j + P·Q̃_j·s'` over `Q_L ∪ P`, where `Q̃_j` is the CRT
/// idempotent of digit `j`. Stored in the evaluation domain.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationKey {
    pub(crate) kind: KeyKind,
    pub(crate) parts: Vec<(PolyRns, PolyRns)>,
}

impl EvaluationKey {
    pub fn kind(&self) -> KeyKind {
        self.kind
    }

    pub fn parts(&self) -> &[(PolyRns, PolyRns)] {
        &self.parts
    }

    /// Bytes of residue data held by the key.
    pub fn size_bytes(&self) -> usize {
        self.parts.iter().map(|(a, b)| 8 * (a.data().len() + b.data().len())).sum()
    }
}

/// Rotation keys indexed by left-rotation step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaloisKeys {
    keys: BTreeMap<usize, EvaluationKey>,
}

impl GaloisKeys {
    pub fn get(&self, step: usize) -> Option<&EvaluationKey> {
        self.keys.get(&step)
    }

    pub fn steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.keys.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn size_bytes(&self) -> usize {
        self.keys.values().map(EvaluationKey::size_bytes).sum()
    }
}

/// `1, 2, 4, ..., slots/2`: the steps of a full rotation-sum tree.
pub fn power_of_two_steps(slots: usize) -> Vec<usize> {
    let mut steps = Vec::new();
    let mut k = 1;
    while k < slots {
        steps.push(k);
        k <<= 1;
    }
    steps
}

fn eval_sample<R: RngCore>(params: &Params, slice: BasisSlice, dist: Distribution, rng: &mut R) -> PolyRns {
    let mut p = sample(params.basis(), slice, dist, rng);
    if dist == Distribution::Uniform {
        // uniform residues are uniform in either domain
        p.set_domain(Domain::Evaluation);
    } else {
        p.to_evaluation();
    }
    p
}

impl SecretKey {
    pub fn generate<R: RngCore>(params: &Params, rng: &mut R) -> Self {
        let slice = BasisSlice::extended(params.max_level());
        SecretKey { s: eval_sample(params, slice, Distribution::Ternary, rng) }
    }

    /// The secret over `Q_level`.
    pub(crate) fn at_level(&self, level: usize) -> Result<PolyRns> {
        self.s.truncate(level)
    }

    /// Signed coefficients of `s`.
    pub fn coefficients(&self) -> Vec<i64> {
        let mut c = self.s.clone();
        c.to_coefficient();
        c.centered_residues(0)
    }

    pub fn public_key<R: RngCore>(&self, params: &Params, rng: &mut R) -> PublicKey {
        let slice = BasisSlice::extended(params.max_level());
        let a = eval_sample(params, slice, Distribution::Uniform, rng);
        let e = eval_sample(params, slice, ERROR_DISTRIBUTION, rng);
        let mut u0 = a.mul_pointwise(&self.s).expect("same basis");
        u0.neg_assign();
        u0.add_assign(&e).expect("same basis");
        PublicKey { u0, u1: a }
    }

    fn switching_key<R: RngCore>(&self, params: &Params, s_prime: &PolyRns, kind: KeyKind, rng: &mut R) -> EvaluationKey {
        let basis = params.basis();
        let top = params.max_level();
        let alpha = params.spec().alpha;
        let slice = BasisSlice::extended(top);
        let n = basis.degree();
        let dnum = params.key_switch().dnum;
        let mut parts = Vec::with_capacity(dnum);
        for j in 0..dnum {
            let a = eval_sample(params, slice, Distribution::Uniform, rng);
            let e = eval_sample(params, slice, ERROR_DISTRIBUTION, rng);
            let mut k0 = a.mul_pointwise(&self.s).expect("same basis");
            k0.neg_assign();
            k0.add_assign(&e).expect("same basis");
            // P·Q̃_j·s' is P·s' on the primes of digit j and zero elsewhere
            for i in j * alpha..((j + 1) * alpha).min(top + 1) {
                let m = basis.modulus(i);
                let p_mod = basis.special_product_mod(i);
                let src = &s_prime.residues(i)[..n];
                let dst = k0.residues_mut(i);
                for (d, &x) in dst.iter_mut().zip(src) {
                    *d = m.add(*d, m.mul(p_mod, x));
                }
            }
            parts.push((k0, a));
        }
        EvaluationKey { kind, parts }
    }

    pub fn relin_key<R: RngCore>(&self, params: &Params, rng: &mut R) -> EvaluationKey {
        let s2 = self.s.mul_pointwise(&self.s).expect("same basis");
        self.switching_key(params, &s2, KeyKind::Relinearization, rng)
    }

    pub fn rotation_key<R: RngCore>(&self, params: &Params, step: usize, rng: &mut R) -> Result<EvaluationKey> {
        let step = step % params.slot_count();
        if step == 0 {
            return Err(Error::Key("rotation by zero needs no key"));
        }
        let galois = params.galois_element(step);
        let rotated = self.s.automorphism(galois);
        Ok(self.switching_key(params, &rotated, KeyKind::Rotation { step, galois }, rng))
    }

    pub fn galois_keys<R: RngCore>(&self, params: &Params, steps: &[usize], rng: &mut R) -> Result<GaloisKeys> {
        let mut keys = BTreeMap::new();
        for &step in steps {
            let step = step % params.slot_count();
            if step == 0 || keys.contains_key(&step) {
                continue;
            }
            keys.insert(step, self.rotation_key(params, step, rng)?);
        }
        Ok(GaloisKeys { keys })
    }
}

/// Complete key material produced by the key-generation center.
#[derive(Clone, Debug)]
pub struct KeySet {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: EvaluationKey,
    pub galois: GaloisKeys,
}

impl KeySet {
    /// Generates all keys, with rotation keys for `steps`.
    pub fn generate<R: RngCore>(params: &Params, steps: &[usize], rng: &mut R) -> Result<Self> {
        let secret = SecretKey::generate(params, rng);
        let public = secret.public_key(params, rng);
        let relin = secret.relin_key(params, rng);
        let galois = secret.galois_keys(params, steps, rng)?;
        Ok(KeySet { secret, public, relin, galois })
    }
}
