//! Homomorphism checks at the default parameter set (N = 2^13, depth 3,
//! Δ = 2^40).

mod common;

use common::{max_err, rel_err, Ctx};
use lancelot_core::ckks::{power_of_two_steps, ParamSpec, Params};
use lancelot_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn ctx(seed: u64) -> Ctx {
    Ctx::new(&power_of_two_steps(4096), seed)
}

#[test]
fn default_parameters_are_accepted() {
    let params = Params::new(ParamSpec::default()).unwrap();
    assert_eq!(params.slot_count(), 4096);
    assert_eq!(params.max_level(), 3);
    assert_eq!(params.scale(), 2f64.powi(40));
    assert!(params.basis().log_modulus() <= 218.0);
    assert_eq!(params.key_switch().dnum, 4);
}

#[test]
fn encode_roundtrip_thousand_vectors() {
    let params = Params::new(ParamSpec::default()).unwrap();
    let enc = params.encoder();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let v: Vec<f64> = (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coeffs: Vec<f64> = enc.encode_coeffs(&v, params.scale()).unwrap().iter().map(|&c| c as f64).collect();
        assert!(max_err(&enc.decode_coeffs(&coeffs, params.scale()), &v) < 2f64.powi(-30));
    }
}

#[test]
fn homomorphism_over_random_trials() {
    let mut c = ctx(2);
    for trial in 0..25 {
        let (x, y) = (c.values(4096, 1.0), c.values(4096, 1.0));
        let (a, b) = (c.enc(&x), c.enc(&y));
        assert!(max_err(&c.dec(&a), &x) < 2f64.powi(-25));

        let sum: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
        let diff: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
        let prod: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let sq: Vec<f64> = x.iter().map(|p| p * p).collect();
        assert!(rel_err(&c.dec(&c.eval.add(&a, &b).unwrap()), &sum) < 2f64.powi(-20));
        assert!(rel_err(&c.dec(&c.eval.sub(&a, &b).unwrap()), &diff) < 2f64.powi(-20));
        let m = c.eval.mul_relin_rescale(&a, &b, &c.keys.relin).unwrap();
        assert!(rel_err(&c.dec(&m), &prod) < 2f64.powi(-20));
        let s = c.eval.rescale(&c.eval.relinearize(&c.eval.square(&a).unwrap(), &c.keys.relin).unwrap()).unwrap();
        assert!(rel_err(&c.dec(&s), &sq) < 2f64.powi(-20));
        let k = 1usize << (trial % 12);
        let mut rot = x.clone();
        rot.rotate_left(k);
        assert!(rel_err(&c.dec(&c.eval.rotate(&a, k, &c.keys.galois).unwrap()), &rot) < 2f64.powi(-20));
    }
}

#[test]
fn multiply_by_ones_is_identity() {
    let mut c = ctx(3);
    let x = c.values(4096, 1.0);
    let a = c.enc(&x);
    let ones = c.enc(&vec![1.0; 4096]);
    let r = c.eval.mul_relin_rescale(&a, &ones, &c.keys.relin).unwrap();
    assert!(max_err(&c.dec(&r), &x) < 2f64.powi(-20));
}

#[test]
fn depth_three_chain() {
    let mut c = ctx(4);
    let x = c.values(4096, 1.0);
    let mut ct = c.enc(&x);
    let mut expect = x.clone();
    for _ in 0..3 {
        // square keeps scales aligned without extra bookkeeping
        ct = c.eval.rescale(&c.eval.relinearize(&c.eval.square(&ct).unwrap(), &c.keys.relin).unwrap()).unwrap();
        expect.iter_mut().for_each(|e| *e *= *e);
    }
    assert_eq!(ct.level(), 0);
    assert!(max_err(&c.dec(&ct), &expect) < 2f64.powi(-15));
    assert_eq!(c.eval.square(&ct).unwrap_err(), Error::DepthExhausted);
}

#[test]
fn lazy_relinearization_sixteen_products() {
    let mut c = ctx(5);
    let triples: Vec<_> = (0..16)
        .map(|_| {
            let (x, y) = (c.values(4096, 1.0), c.values(4096, 1.0));
            let (a, b) = (c.enc(&x), c.enc(&y));
            c.eval.multiply(&a, &b).unwrap()
        })
        .collect();
    c.eval.reset_counts();
    let lazy = c.eval.relinearize(&c.eval.lazy_accumulate(&triples).unwrap(), &c.keys.relin).unwrap();
    assert_eq!(c.eval.counts().relinearizations, 1);
    c.eval.reset_counts();
    let mut eager = c.eval.relinearize(&triples[0], &c.keys.relin).unwrap();
    for t in &triples[1..] {
        let r = c.eval.relinearize(t, &c.keys.relin).unwrap();
        c.eval.add_assign(&mut eager, &r).unwrap();
    }
    assert_eq!(c.eval.counts().relinearizations, 16);
    let (l, e) = (c.dec(&c.eval.rescale(&lazy).unwrap()), c.dec(&c.eval.rescale(&eager).unwrap()));
    assert!(max_err(&l, &e) < 2f64.powi(-22));
}

#[test]
fn hoisted_power_of_two_rotations() {
    let mut c = ctx(6);
    let x = c.values(4096, 1.0);
    let a = c.enc(&x);
    let steps = [1usize, 2, 4, 8];
    c.eval.reset_counts();
    let hoisted = c.eval.hoisted_rotations(&a, &steps, &c.keys.galois).unwrap();
    assert_eq!(c.eval.counts().modups, 1);
    for (h, &k) in hoisted.iter().zip(&steps) {
        let seq = c.eval.rotate(&a, k, &c.keys.galois).unwrap();
        assert!(max_err(&c.dec(h), &c.dec(&seq)) < 2f64.powi(-22));
    }
    assert_eq!(c.eval.counts().modups, 1 + steps.len() as u64);
}
