//! Encrypted distance evaluation at the default parameter set.

mod common;

use common::{max_err, rel, Ctx};
use lancelot_core::ckks::power_of_two_steps;
use lancelot_core::distance::{
    build_distance_matrix, chunk_count, decrypt_packed, encrypted_pairwise_distance, pack_and_encrypt, reduction_width,
    slot_reduce, DistanceConfig, HoistPlan, MatrixMode, PackedWeights, WeightVector,
};
use lancelot_core::exec::Sequential;
use lancelot_core::Error;

fn pack(c: &mut Ctx, values: &[f64]) -> PackedWeights {
    let w = WeightVector::new(values.to_vec()).unwrap();
    pack_and_encrypt(&w, &c.keys.public, &c.params, &mut c.rng).unwrap()
}

/// Slot sum of a distance ciphertext, decrypted.
fn slot_sum(c: &Ctx, ct: &lancelot_core::ckks::Ciphertext) -> f64 {
    c.dec(ct).iter().sum()
}

fn plain_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[test]
fn chunk_counts() {
    assert_eq!(chunk_count(61_706, 4096), 16);
    assert_eq!(chunk_count(4096, 4096), 1);
    assert_eq!(chunk_count(4097, 4096), 2);
    assert_eq!(reduction_width(10, 4096), 16);
    assert_eq!(reduction_width(61_706, 4096), 4096);
}

#[test]
fn packing_roundtrip() {
    let mut c = Ctx::new(&[], 1);
    let v = c.values(10, 1.0);
    let p = pack(&mut c, &v);
    assert_eq!(p.chunk_count(), 1);
    assert!(max_err(&decrypt_packed(&c.params, &c.keys.secret, &p).unwrap(), &v) < 2f64.powi(-25));
    let full = c.values(4096, 1.0);
    assert_eq!(pack(&mut c, &full).chunk_count(), 1);
    let big = c.values(61_706, 1.0);
    let p = pack(&mut c, &big);
    assert_eq!(p.chunk_count(), 16);
    assert_eq!(p.len(), 61_706);
    assert!(max_err(&decrypt_packed(&c.params, &c.keys.secret, &p).unwrap(), &big) < 2f64.powi(-25));
    assert_eq!(WeightVector::new(vec![1.0, f64::INFINITY]).unwrap_err(), Error::NonFinite);
}

#[test]
fn small_hand_checked_distances() {
    let mut c = Ctx::new(&[], 2);
    let a = pack(&mut c, &[1.0, 2.0, 3.0]);
    let b = pack(&mut c, &[1.0, 2.0, 5.0]);
    let d = encrypted_pairwise_distance(&c.eval, &a, &b, &c.keys.relin, true).unwrap();
    assert!(rel(slot_sum(&c, &d), 4.0) < 1e-3);
    let same = encrypted_pairwise_distance(&c.eval, &a, &a, &c.keys.relin, true).unwrap();
    assert!(slot_sum(&c, &same).abs() < 1e-4 * 3.0);
    // one level consumed, two left for aggregation
    assert_eq!(d.level(), c.params.max_level() - 1);
    let short = pack(&mut c, &[1.0, 2.0]);
    assert!(matches!(
        encrypted_pairwise_distance(&c.eval, &a, &short, &c.keys.relin, true),
        Err(Error::Shape(_))
    ));
}

#[test]
fn random_distances_match_plaintext() {
    let mut c = Ctx::new(&[], 3);
    for (trial, &len) in [10usize, 4096, 10_000].iter().cycle().take(30).enumerate() {
        let bound = if trial % 2 == 0 { 1.0 } else { 0.05 };
        let (x, y) = (c.values(len, bound), c.values(len, bound));
        let (a, b) = (pack(&mut c, &x), pack(&mut c, &y));
        let d = encrypted_pairwise_distance(&c.eval, &a, &b, &c.keys.relin, true).unwrap();
        assert!(rel(slot_sum(&c, &d), plain_distance(&x, &y)) < 1e-3);
    }
}

#[test]
fn lazy_and_eager_agree_on_sixteen_chunks() {
    let mut c = Ctx::new(&[], 4);
    let (x, y) = (c.values(61_706, 0.1), c.values(61_706, 0.1));
    let (a, b) = (pack(&mut c, &x), pack(&mut c, &y));
    c.eval.reset_counts();
    let lazy = encrypted_pairwise_distance(&c.eval, &a, &b, &c.keys.relin, true).unwrap();
    assert_eq!(c.eval.counts().relinearizations, 1);
    c.eval.reset_counts();
    let eager = encrypted_pairwise_distance(&c.eval, &a, &b, &c.keys.relin, false).unwrap();
    assert_eq!(c.eval.counts().relinearizations, 16);
    let (l, e) = (slot_sum(&c, &lazy), slot_sum(&c, &eager));
    assert!(rel(l, e) < 1e-4);
    assert!(rel(l, plain_distance(&x, &y)) < 1e-3);
}

#[test]
fn slot_reduce_is_plan_invariant() {
    let plans: Vec<HoistPlan> = [1, 3, 7].iter().map(|&k| HoistPlan::fixed(k, 64).unwrap()).collect();
    let mut steps: Vec<usize> = plans.iter().flat_map(HoistPlan::rotation_steps).collect();
    steps.extend([8usize]);
    let mut c = Ctx::new(&steps, 5);
    let v = c.values(64, 1.0);
    let ct = c.enc(&v);
    let want: f64 = v.iter().sum();
    let mut results = Vec::new();
    for plan in &plans {
        c.eval.reset_counts();
        let r = slot_reduce(&c.eval, &ct, plan, &c.keys.galois).unwrap();
        let counts = c.eval.counts();
        // one ModUp for the hoisted batch plus one per iterative level
        let iterative = 6 - plan.hoisted_levels() as u64;
        let batch = u64::from(plan.hoisted_levels() > 0);
        assert_eq!(counts.modups, batch + iterative);
        results.push(c.dec(&r)[0]);
    }
    for r in &results {
        assert!(rel(*r, want) < 1e-3);
        assert!((r - results[0]).abs() < 1e-3 * want.abs().max(1.0));
    }

    let ones = c.enc(&[1.0; 8]);
    let r = slot_reduce(&c.eval, &ones, &HoistPlan::fixed(1, 8).unwrap(), &c.keys.galois).unwrap();
    assert!((c.dec(&r)[0] - 8.0).abs() < 1e-6);
    let id = slot_reduce(&c.eval, &ones, &HoistPlan::fixed(1, 1).unwrap(), &c.keys.galois).unwrap();
    assert_eq!(id, ones);
    let bad = HoistPlan { width: 12, ..HoistPlan::fixed(1, 8).unwrap() };
    assert_eq!(slot_reduce(&c.eval, &ones, &bad, &c.keys.galois).unwrap_err(), Error::Width(12));
}

#[test]
fn three_client_matrix() {
    let plan = HoistPlan::fixed(2, 4).unwrap();
    let mut c = Ctx::new(&plan.rotation_steps(), 6);
    let clients = [[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0]];
    let packed: Vec<PackedWeights> = clients.iter().map(|w| pack(&mut c, w)).collect();
    for reduce in [None, Some(plan)] {
        for (mode, want) in [(MatrixMode::PerPair, vec![1.0, 9.0, 4.0]), (MatrixMode::RowSums, vec![10.0, 5.0, 13.0])] {
            let cfg = DistanceConfig { mode, lazy: true, reduce };
            let m = build_distance_matrix(&c.eval, &packed, &c.keys.relin, &c.keys.galois, &cfg, &Sequential).unwrap();
            assert_eq!(m.entries().len(), 3);
            let got = m.decrypt_values(&c.params, &c.keys.secret).unwrap();
            for (g, w) in got.iter().zip(&want) {
                assert!(rel(*g, *w) < 1e-3, "{mode:?} {g} {w}");
            }
        }
    }
}

#[test]
fn identical_clients_have_zero_distance() {
    let mut c = Ctx::new(&[], 7);
    let v = c.values(100, 1.0);
    let packed = vec![pack(&mut c, &v), pack(&mut c, &v)];
    let cfg = DistanceConfig { mode: MatrixMode::PerPair, lazy: true, reduce: None };
    let m = build_distance_matrix(&c.eval, &packed, &c.keys.relin, &c.keys.galois, &cfg, &Sequential).unwrap();
    assert!(m.decrypt_values(&c.params, &c.keys.secret).unwrap()[0].abs() < 1e-4 * 100.0);
}

#[test]
fn ten_clients_at_lenet_scale() {
    let plan = HoistPlan::fixed(1, 4096).unwrap();
    let mut c = Ctx::new(&power_of_two_steps(4096), 8);
    let models: Vec<Vec<f64>> = (0..10).map(|_| c.values(61_706, 0.05)).collect();
    let packed: Vec<PackedWeights> = models.iter().map(|m| pack(&mut c, m)).collect();
    let cfg = DistanceConfig { mode: MatrixMode::PerPair, lazy: true, reduce: Some(plan) };
    c.eval.reset_counts();
    let m = build_distance_matrix(&c.eval, &packed, &c.keys.relin, &c.keys.galois, &cfg, &Sequential).unwrap();
    assert_eq!(m.entries().len(), 45);
    assert_eq!(c.eval.counts().relinearizations, 45);
    let got = m.decrypt_values(&c.params, &c.keys.secret).unwrap();
    let mut k = 0;
    for i in 0..10 {
        for j in i + 1..10 {
            assert!(rel(got[k], plain_distance(&models[i], &models[j])) < 1e-3);
            k += 1;
        }
    }
}
