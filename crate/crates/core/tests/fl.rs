//! Federated rounds end to end.

use lancelot_core::agg::{Rule, RuleConfig};
use lancelot_core::agg::DecryptedDistances;
use lancelot_core::ckks::ParamSpec;
use lancelot_core::distance::HoistPlan;
use lancelot_core::exec::Sequential;
use lancelot_core::fl::{
    run_experiment, AttackConfig, AttackKind, ExperimentConfig, FederatedData, Federation, Hoisting, MixtureSpec, Model,
    NoClock, Reduction, Pipeline, Role, ServerMessage, ServerSafe,
};
use lancelot_core::rns::Security;
use lancelot_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const DIM: usize = 20;

fn toy_params() -> ParamSpec {
    ParamSpec { security: Security::Unchecked, ..ParamSpec::default().with_degree(1024) }
}

fn data(clients: usize, seed: u64) -> FederatedData {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    FederatedData::synthetic(&MixtureSpec::two_gaussians(DIM), clients, 100, 500, &mut rng).unwrap()
}

fn config(rule: RuleConfig, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Model::Logistic { dim: DIM, classes: 2 }, rule);
    cfg.seed = seed;
    cfg
}

fn untargeted(byzantine: usize) -> Option<AttackConfig> {
    Some(AttackConfig { kind: AttackKind::Untargeted { lambda: 10.0 }, byzantine })
}

#[test]
fn honest_krum_round_matches_plaintext_pipeline() {
    let mut cfg = config(RuleConfig::new(Rule::Krum, 1, 1), 1);
    cfg.twin = true;
    let mut fed = Federation::new(cfg, data(10, 1)).unwrap();
    for _ in 0..3 {
        let t = fed.run_round(&Sequential, &NoClock).unwrap();
        assert_eq!(t.selected, t.plain_selected);
        assert!(t.divergence.unwrap() < 1e-3);
        assert_eq!(t.server_ciphertexts, 10 + 100);
        assert_eq!(t.ops.relinearizations, 45 + 1);
    }
}

#[test]
fn krum_never_selects_the_scaled_attacker() {
    for seed in 0..100 {
        let mut cfg = config(RuleConfig::new(Rule::Krum, 1, 1), seed);
        cfg.params = toy_params();
        cfg.attack = untargeted(1);
        let mut fed = Federation::new(cfg, data(10, seed)).unwrap();
        let bad = fed.malicious().to_vec();
        assert_eq!(bad.len(), 1);
        let t = fed.run_round(&Sequential, &NoClock).unwrap();
        assert_ne!(t.selected.unwrap(), bad, "seed {seed}");
    }
}

#[test]
fn depth_failure_leaves_state_untouched() {
    let mut cfg = config(RuleConfig::new(Rule::MultiKrum, 1, 3), 2);
    cfg.params = ParamSpec { depth: 1, ..toy_params() };
    let mut fed = Federation::new(cfg, data(10, 2)).unwrap();
    let before = fed.global().clone();
    assert_eq!(fed.run_round(&Sequential, &NoClock).unwrap_err(), Error::DepthExhausted);
    assert_eq!(fed.round(), 0);
    assert_eq!(fed.global(), &before);
    assert_eq!(fed.server().unwrap().received(), 0);
}

#[test]
fn rule_preconditions_are_typed_errors() {
    let cfg = config(RuleConfig::new(Rule::Krum, 4, 1), 0);
    assert!(matches!(Federation::new(cfg, data(10, 0)), Err(Error::Rule(_))));
    let cfg = config(RuleConfig::new(Rule::MultiKrum, 2, 2), 0);
    assert!(matches!(Federation::new(cfg, data(8, 0)), Err(Error::Rule(_))));
    let cfg = config(RuleConfig::new(Rule::MultiKrum, 1, 5), 0);
    assert!(Federation::new(cfg, data(10, 0)).is_ok());
}

#[test]
fn clean_training_converges_and_label_flip_is_contained() {
    let clean = run_experiment(config(RuleConfig::new(Rule::Krum, 1, 1), 3), data(10, 3), &Sequential, &NoClock).unwrap();
    assert!(clean.final_accuracy >= 0.95, "{}", clean.final_accuracy);
    let mut cfg = config(RuleConfig::new(Rule::Krum, 1, 1), 3);
    cfg.attack = Some(AttackConfig { kind: AttackKind::LabelFlip, byzantine: 1 });
    let flipped = run_experiment(cfg, data(10, 3), &Sequential, &NoClock).unwrap();
    assert!((flipped.final_accuracy - clean.final_accuracy).abs() <= 0.02);
}

#[test]
fn plaintext_pipeline_baseline() {
    let mut cfg = config(RuleConfig::new(Rule::Krum, 1, 1), 4);
    cfg.pipeline = Pipeline::Plaintext;
    let plain = run_experiment(cfg.clone(), data(10, 4), &Sequential, &NoClock).unwrap();
    assert!(plain.final_accuracy >= 0.95);
    assert!(plain.transcripts.iter().all(|t| t.server_ciphertexts == 0 && t.selected.as_ref().unwrap().len() == 1));
    // deterministic given the seed
    let again = run_experiment(cfg, data(10, 4), &Sequential, &NoClock).unwrap();
    assert_eq!(plain, again);
}

#[test]
fn encrypted_runs_are_deterministic() {
    let mut cfg = config(RuleConfig::new(Rule::Median, 1, 1), 5);
    cfg.params = toy_params();
    cfg.rounds = 3;
    let a = run_experiment(cfg.clone(), data(6, 5), &Sequential, &NoClock).unwrap();
    let b = run_experiment(cfg, data(6, 5), &Sequential, &NoClock).unwrap();
    assert_eq!(a, b);
}

#[test]
fn untargeted_update_dwarfs_honest_ones() {
    let mut cfg = config(RuleConfig::new(Rule::Mean, 1, 1), 6);
    cfg.pipeline = Pipeline::Plaintext;
    cfg.attack = untargeted(1);
    let d = data(10, 6);
    let fed = Federation::new(cfg.clone(), d).unwrap();
    let g = fed.global();
    let mut honest = Vec::new();
    let mut attacker = 0.0;
    for c in fed.clients() {
        let mut rng = ChaCha20Rng::seed_from_u64(c.id as u64);
        let w = c.local_update(&cfg.model, g, &cfg.sgd, &mut rng).unwrap();
        let norm: f64 = w.as_slice().iter().zip(g.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        match c.role() {
            Role::Honest => honest.push(norm),
            Role::Malicious(_) => attacker = norm,
        }
    }
    honest.sort_by(f64::total_cmp);
    assert!(attacker >= 5.0 * honest[honest.len() / 2]);
}

#[test]
fn mean_rule_is_fedavg() {
    let mut cfg = config(RuleConfig::new(Rule::Mean, 1, 1), 7);
    cfg.params = toy_params();
    cfg.twin = true;
    cfg.rounds = 2;
    let r = run_experiment(cfg, data(5, 7), &Sequential, &NoClock).unwrap();
    for t in &r.transcripts {
        assert_eq!(t.selected.as_deref(), Some(&[0, 1, 2, 3, 4][..]));
        assert!(t.divergence.unwrap() < 1e-3);
        assert_eq!(t.ops.relinearizations, 1);
    }
}

#[test]
fn redaction_hides_the_key_holder_view() {
    let mut cfg = config(RuleConfig::new(Rule::Krum, 1, 1), 8);
    cfg.params = toy_params();
    cfg.redact_kgc = true;
    let mut fed = Federation::new(cfg, data(5, 8)).unwrap();
    let t = fed.run_round(&Sequential, &NoClock).unwrap();
    assert!(t.selected.is_none() && t.distances.is_none());
}

fn server_safe<T: ServerSafe>() {}

#[test]
fn server_sees_only_ciphertexts() {
    server_safe::<ServerMessage>();
    server_safe::<lancelot_core::fl::ServerState>();
    let mut cfg = config(RuleConfig::new(Rule::MultiKrum, 1, 3), 9);
    cfg.params = toy_params();
    let mut fed = Federation::new(cfg, data(10, 9)).unwrap();
    let (t, seen) = fed.run_round_observed(&Sequential, &NoClock).unwrap();
    let count: usize = seen.iter().map(|m| m.ciphertexts().len()).sum();
    assert_eq!(count, t.server_ciphertexts);
    assert!(seen.iter().any(|m| matches!(m, ServerMessage::Mask(_))));
}

#[test]
fn reduction_placement_does_not_change_selection() {
    let mut views = Vec::new();
    for reduction in [
        Reduction::AtKgc,
        Reduction::Server(Hoisting::Off),
        Reduction::Server(Hoisting::Full),
        Reduction::Server(Hoisting::Planned(HoistPlan::fixed(3, 64).unwrap())),
    ] {
        let mut cfg = config(RuleConfig::new(Rule::Krum, 1, 1), 3);
        cfg.params = toy_params();
        cfg.reduction = reduction;
        let mut fed = Federation::new(cfg, data(6, 3)).unwrap();
        let t = fed.run_round(&Sequential, &NoClock).unwrap();
        let Some(DecryptedDistances::Pairwise(table)) = t.distances else { panic!("expected pairwise distances") };
        views.push((t.selected.unwrap(), table, t.ops.rotations));
    }
    let (sel, table, _) = &views[0];
    for (s, other, _) in &views[1..] {
        assert_eq!(s, sel);
        for i in 0..6 {
            for j in 0..6 {
                assert!((table.get(i, j) - other.get(i, j)).abs() <= 1e-6 * table.get(i, j).abs().max(1.0));
            }
        }
    }
    // 15 pairs; log2(64) = 6 levels
    let rotations: Vec<u64> = views.iter().map(|v| v.2).collect();
    assert_eq!(rotations, [0, 15 * 6, 15 * 63, 15 * (3 + 4)]);
}

#[test]
fn plan_for_another_width_is_rejected() {
    let mut cfg = config(RuleConfig::new(Rule::Krum, 1, 1), 4);
    cfg.params = toy_params();
    cfg.reduction = Reduction::Server(Hoisting::Planned(HoistPlan::fixed(2, 128).unwrap()));
    assert_eq!(Federation::new(cfg, data(6, 4)).unwrap_err(), Error::Width(128));
}
