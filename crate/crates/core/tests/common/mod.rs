#![allow(dead_code)]

use std::sync::Arc;

use lancelot_core::ckks::{decrypt, encrypt, Ciphertext, Evaluator, KeySet, ParamSpec, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct Ctx {
    pub params: Arc<Params>,
    pub keys: KeySet,
    pub eval: Evaluator,
    pub rng: ChaCha20Rng,
}

impl Ctx {
    pub fn with_spec(spec: ParamSpec, steps: &[usize], seed: u64) -> Self {
        let params = Params::new(spec).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let keys = KeySet::generate(&params, steps, &mut rng).unwrap();
        let eval = Evaluator::new(&params);
        Ctx { params, keys, eval, rng }
    }

    pub fn new(steps: &[usize], seed: u64) -> Self {
        Self::with_spec(ParamSpec::default(), steps, seed)
    }

    pub fn values(&mut self, n: usize, bound: f64) -> Vec<f64> {
        (0..n).map(|_| self.rng.random_range(-bound..bound)).collect()
    }

    pub fn enc(&mut self, v: &[f64]) -> Ciphertext {
        let pt = self.params.encode(v).unwrap();
        encrypt(&self.params, &self.keys.public, &pt, &mut self.rng).unwrap()
    }

    pub fn dec(&self, ct: &Ciphertext) -> Vec<f64> {
        self.params.decode(&decrypt(&self.keys.secret, ct).unwrap()).unwrap()
    }
}

pub fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Error relative to the largest expected magnitude.
pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    max_err(got, want) / scale
}

pub fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}
