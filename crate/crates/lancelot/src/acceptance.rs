//! End-to-end acceptance checks, shared by `selftest` and the acceptance
//! test target. Every check compares against an oracle written here,
//! independently of the code under test.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use lancelot_core::agg::{decrypt_mask, masked_sort_round, Rule, RuleConfig};
use lancelot_core::ckks::{decrypt, encrypt, Ciphertext, Evaluator, KeySet, ParamSpec, Params, SecretKey};
use lancelot_core::distance::{
    build_distance_matrix, chunk_count, encrypted_pairwise_distance, pack_and_encrypt, plan_unfold, slot_reduce,
    DistanceConfig, HoistPlan, MatrixMode, WeightVector,
};
use lancelot_core::exec::Executor;
use lancelot_core::fl::{
    AttackConfig, AttackKind, ExperimentConfig, FederatedData, Federation, MixtureSpec, Model, NoClock, Reduction,
    ServerMessage, ServerSafe,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;

pub const CRITERIA: [(u8, &str); 8] = [
    (1, "ckks-correctness"),
    (2, "lazy-relinearization"),
    (3, "dynamic-hoisting"),
    (4, "selection-equivalence"),
    (5, "model-equivalence"),
    (6, "byzantine-robustness"),
    (7, "packing-structure"),
    (8, "server-privacy"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {:<22} {verdict}  {} ({:.1}s)", self.id, self.name, self.detail, self.seconds)
    }
}

/// Runs one criterion; errors count as failures.
pub fn run<E: Executor>(id: u8, exec: &E) -> Outcome {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let result = match id {
        1 => ckks_correctness(),
        2 => lazy_relinearization(),
        3 => dynamic_hoisting(),
        4 => selection_equivalence(exec),
        5 => model_equivalence(exec),
        6 => byzantine_robustness(exec),
        7 => packing_structure(),
        8 => server_privacy(exec),
        _ => Ok((false, "no such criterion".into())),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs the listed criteria in order, reporting each as it finishes.
pub fn run_all<E: Executor>(ids: &[u8], exec: &E, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    ids.iter()
        .map(|&id| {
            let o = run(id, exec);
            report(&o);
            o
        })
        .collect()
}

fn uniform(rng: &mut ChaCha20Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    max_diff(got, want) / max_abs(want).max(f64::MIN_POSITIVE)
}

fn open(params: &Params, sk: &SecretKey, ct: &Ciphertext) -> Result<Vec<f64>> {
    Ok(params.decode(&decrypt(sk, ct)?)?)
}

fn log2(x: f64) -> f64 {
    x.log2()
}

fn ckks_correctness() -> Result<(bool, String)> {
    let params = Params::new(ParamSpec::default())?;
    let slots = params.slot_count();
    let mut rng = ChaCha20Rng::seed_from_u64(0xC0FFEE);
    let steps: Vec<usize> = (0..10).map(|_| rng.random_range(1..slots)).collect();
    let keys = KeySet::generate(&params, &steps, &mut rng)?;
    let eval = Evaluator::new(&params);
    let sk = &keys.secret;
    // roundtrip, add, sub, mul, square, rotate, depth-3 chain
    let mut worst = [0.0f64; 7];
    for trial in 0..100 {
        let v: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut rng, slots, 1.0)).collect();
        let ct = v
            .iter()
            .map(|x| encrypt(&params, &keys.public, &params.encode(x)?, &mut rng))
            .collect::<lancelot_core::Result<Vec<_>>>()?;
        let (a, b) = (&v[0], &v[1]);
        let zip = |f: fn(f64, f64) -> f64| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect::<Vec<f64>>();
        worst[0] = worst[0].max(max_diff(&open(&params, sk, &ct[0])?, a));
        worst[1] = worst[1].max(rel_err(&open(&params, sk, &eval.add(&ct[0], &ct[1])?)?, &zip(|x, y| x + y)));
        worst[2] = worst[2].max(rel_err(&open(&params, sk, &eval.sub(&ct[0], &ct[1])?)?, &zip(|x, y| x - y)));
        let ab = eval.mul_relin_rescale(&ct[0], &ct[1], &keys.relin)?;
        worst[3] = worst[3].max(rel_err(&open(&params, sk, &ab)?, &zip(|x, y| x * y)));
        let sq = eval.rescale(&eval.relinearize(&eval.square(&ct[0])?, &keys.relin)?)?;
        worst[4] = worst[4].max(rel_err(&open(&params, sk, &sq)?, &a.iter().map(|x| x * x).collect::<Vec<_>>()));
        let k = steps[trial % steps.len()];
        let mut rotated = a.clone();
        rotated.rotate_left(k);
        worst[5] = worst[5].max(rel_err(&open(&params, sk, &eval.rotate(&ct[0], k, &keys.galois)?)?, &rotated));
        let c = eval.drop_to_level(&ct[2], ab.level())?;
        let abc = eval.mul_relin_rescale(&ab, &c, &keys.relin)?;
        let d = eval.drop_to_level(&ct[3], abc.level())?;
        let abcd = eval.mul_relin_rescale(&abc, &d, &keys.relin)?;
        let want: Vec<f64> = (0..slots).map(|i| v[0][i] * v[1][i] * v[2][i] * v[3][i]).collect();
        worst[6] = worst[6].max(max_diff(&open(&params, sk, &abcd)?, &want));
    }
    let bounds = [-25.0, -20.0, -20.0, -20.0, -20.0, -20.0, -15.0];
    let passed = worst.iter().zip(bounds).all(|(&w, b)| w < 2f64.powf(b));
    let names = ["roundtrip", "add", "sub", "mul", "square", "rotate", "depth3"];
    let detail = names
        .iter()
        .zip(worst)
        .map(|(n, w)| format!("{n} 2^{:.1}", log2(w)))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((passed, format!("100 trials, worst: {detail}")))
}

fn lazy_relinearization() -> Result<(bool, String)> {
    const P: usize = 61_706;
    let params = Params::new(ParamSpec::default())?;
    let mut rng = ChaCha20Rng::seed_from_u64(0x1A2F);
    let keys = KeySet::generate(&params, &[], &mut rng)?;
    let eval = Evaluator::new(&params);
    let a = WeightVector::new(uniform(&mut rng, P, 0.1))?;
    let b = WeightVector::new(uniform(&mut rng, P, 0.1))?;
    let want = a.squared_distance(&b);
    let pa = pack_and_encrypt(&a, &keys.public, &params, &mut rng)?;
    let pb = pack_and_encrypt(&b, &keys.public, &params, &mut rng)?;
    let mut relins = [0u64; 2];
    let mut values = [0.0f64; 2];
    let mut times = [f64::INFINITY; 2];
    for (i, lazy) in [false, true].into_iter().enumerate() {
        for _ in 0..3 {
            let before = eval.counts();
            let t = Instant::now();
            let d = encrypted_pairwise_distance(&eval, &pa, &pb, &keys.relin, lazy)?;
            times[i] = times[i].min(t.elapsed().as_secs_f64());
            relins[i] = (eval.counts() - before).relinearizations;
            values[i] = open(&params, &keys.secret, &d)?.iter().sum();
        }
    }
    let agree = (values[1] - values[0]).abs() / values[0].abs();
    let exact = (values[1] - want).abs() / want;
    let passed = pa.chunk_count() == 16 && relins == [16, 1] && agree < 1e-4 && exact < 1e-4;
    Ok((
        passed,
        format!(
            "{} chunks, relins eager {} lazy {}, lazy/eager rel diff {:.1e}, vs plaintext {:.1e}, eager/lazy time {:.2}x",
            pa.chunk_count(),
            relins[0],
            relins[1],
            agree,
            exact,
            times[0] / times[1]
        ),
    ))
}

/// Exhaustive search over every feasible unfold factor.
fn enumerate_plan(t_h: f64, t_d: f64, m_c: u64, m_b: u64, n: usize) -> Option<usize> {
    let log_n = n.trailing_zeros() as usize;
    let mut best: Option<(f64, usize)> = None;
    for k in 1..=log_n + 1 {
        if (k as u128) * (m_c as u128) > m_b as u128 {
            continue;
        }
        let cost = (log_n + 1 - k) as f64 * t_h + (k - 1) as f64 * t_d;
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, k));
        }
    }
    best.map(|b| b.1)
}

/// The objective is linear in `k` with slope `T_D - T_H`.
fn slope_plan(t_h: f64, t_d: f64, m_c: u64, m_b: u64, n: usize) -> Option<usize> {
    if m_c > m_b {
        return None;
    }
    let k_max = ((m_b / m_c) as usize).min(n.trailing_zeros() as usize + 1);
    Some(if t_d < t_h { k_max } else { 1 })
}

fn dynamic_hoisting() -> Result<(bool, String)> {
    const WIDTH: usize = 64;
    let params = Params::new(ParamSpec::default())?;
    let mut rng = ChaCha20Rng::seed_from_u64(0x40157);
    let full = HoistPlan::fixed(7, WIDTH)?;
    let keys = KeySet::generate(&params, &full.rotation_steps(), &mut rng)?;
    let eval = Evaluator::new(&params);
    let x = uniform(&mut rng, params.slot_count(), 1.0);
    let fresh = encrypt(&params, &keys.public, &params.encode(&x)?, &mut rng)?;
    let ct = eval.drop_to_level(&fresh, params.max_level() - 1)?;

    let steps: Vec<usize> = (1..WIDTH).collect();
    let hoisted = eval.hoisted_rotations(&ct, &steps, &keys.galois)?;
    let mut worst = 0.0f64;
    for (h, &k) in hoisted.iter().zip(&steps) {
        let seq = eval.rotate(&ct, k, &keys.galois)?;
        worst = worst.max(max_diff(&open(&params, &keys.secret, h)?, &open(&params, &keys.secret, &seq)?));
    }

    let want: f64 = x[..WIDTH].iter().sum();
    let mut modups = Vec::new();
    let mut sums = Vec::new();
    for plan in [full, HoistPlan::fixed(1, WIDTH)?] {
        let before = eval.counts();
        let y = slot_reduce(&eval, &ct, &plan, &keys.galois)?;
        modups.push((eval.counts() - before).modups);
        sums.push(open(&params, &keys.secret, &y)?[0]);
    }
    let sums_ok = sums.iter().all(|s| (s - want).abs() < 1e-4);

    let mut mismatches = 0;
    let mut feasible = 0;
    for _ in 0..1000 {
        let t_h = 10f64.powf(rng.random_range(-6.0..0.0));
        let t_d = 10f64.powf(rng.random_range(-6.0..0.0));
        let m_c = rng.random_range(1u64..10_000_000);
        let m_b = (m_c as f64 * rng.random_range(0.5..20.0)) as u64;
        let n = 1usize << rng.random_range(0..18);
        let got = match plan_unfold(t_h, t_d, m_c, m_b, n) {
            Ok(p) => Some(p.k),
            Err(lancelot_core::Error::Infeasible) => None,
            Err(e) => return Err(e.into()),
        };
        feasible += usize::from(got.is_some());
        let (e, s) = (enumerate_plan(t_h, t_d, m_c, m_b, n), slope_plan(t_h, t_d, m_c, m_b, n));
        mismatches += usize::from(got != e || got != s);
    }
    let log_n = WIDTH.trailing_zeros() as u64;
    let passed = worst < 2f64.powi(-22) && modups == [1, log_n] && sums_ok && mismatches == 0;
    Ok((
        passed,
        format!(
            "hoisted vs sequential 2^{:.1}, modups {} vs {}, planner mismatches {mismatches}/1000 ({feasible} feasible)",
            log2(worst),
            modups[0],
            modups[1]
        ),
    ))
}

/// Brute-force selection oracles over plaintext distances.
mod oracle {
    pub fn distances(models: &[Vec<f64>]) -> Vec<Vec<f64>> {
        models
            .iter()
            .map(|a| models.iter().map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()).collect())
            .collect()
    }

    /// Krum score of each member of `alive` within `alive`.
    pub fn scores(d: &[Vec<f64>], alive: &[usize], c: usize) -> Vec<f64> {
        alive
            .iter()
            .map(|&i| {
                let mut near: Vec<f64> = alive.iter().filter(|&&j| j != i).map(|&j| d[i][j]).collect();
                near.sort_by(|a, b| a.partial_cmp(b).unwrap());
                near.iter().take(alive.len() - c - 2).sum()
            })
            .collect()
    }

    fn position_of_min(v: &[f64]) -> usize {
        (0..v.len()).fold(0, |best, i| if v[i] < v[best] { i } else { best })
    }

    pub fn krum(d: &[Vec<f64>], c: usize) -> Vec<usize> {
        let all: Vec<usize> = (0..d.len()).collect();
        vec![position_of_min(&scores(d, &all, c))]
    }

    pub fn multi_krum(d: &[Vec<f64>], c: usize, l: usize) -> Vec<usize> {
        let mut alive: Vec<usize> = (0..d.len()).collect();
        let mut out = Vec::new();
        for _ in 0..l {
            let s = scores(d, &alive, c);
            out.push(alive.remove(position_of_min(&s)));
        }
        out
    }

    /// The lower median by total distance.
    pub fn median(d: &[Vec<f64>]) -> Vec<usize> {
        let totals: Vec<f64> = d.iter().map(|row| row.iter().sum()).collect();
        let mut sorted = totals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let target = sorted[d.len().div_ceil(2) - 1];
        vec![totals.iter().position(|&t| t == target).unwrap()]
    }

    /// Smallest relative gap between consecutive sorted values.
    pub fn min_gap(v: &[f64]) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.windows(2).map(|w| (w[1] - w[0]) / w[1].abs().max(1e-12)).fold(f64::INFINITY, f64::min)
    }

    /// Every decision any of the three rules makes has a relative margin of
    /// at least `margin`.
    pub fn tie_free(d: &[Vec<f64>], c: usize, l: usize, margin: f64) -> bool {
        let n = d.len();
        let totals: Vec<f64> = d.iter().map(|row| row.iter().sum()).collect();
        if min_gap(&totals) < margin {
            return false;
        }
        let mut alive: Vec<usize> = (0..n).collect();
        for _ in 0..l.max(1) {
            let s = scores(d, &alive, c);
            if min_gap(&s) < margin {
                return false;
            }
            alive.remove(position_of_min(&s));
        }
        true
    }
}

pub struct Case {
    pub models: Vec<Vec<f64>>,
    pub c: usize,
    pub l: usize,
}

/// The fixed selection corpus: clustered honest models plus outliers,
/// regenerated until every rule decision has a clear margin.
pub fn selection_corpus(cases: usize) -> Vec<Case> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5E1EC7);
    let mut out = Vec::with_capacity(cases);
    while out.len() < cases {
        let n = rng.random_range(5..=9);
        let c = rng.random_range(0..=(n - 4) / 2);
        let l = rng.random_range(1..=n - 2 * c - 3);
        let dim = 8;
        let centre = uniform(&mut rng, dim, 1.0);
        let models: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let spread = if i < c { 3.0 } else { 0.5 };
                centre.iter().map(|x| x + rng.random_range(-spread..spread)).collect()
            })
            .collect();
        if oracle::tie_free(&oracle::distances(&models), c, l, 1e-3) {
            out.push(Case { models, c, l });
        }
    }
    out
}

fn selection_equivalence<E: Executor>(exec: &E) -> Result<(bool, String)> {
    // a 105-bit chain within the N = 4096 bound: one level for the squares
    let spec = ParamSpec { degree: 4096, depth: 1, scale_bits: 30, first_bits: 40, special_bits: 35, ..ParamSpec::default() };
    let params = Params::new(spec)?;
    let mut rng = ChaCha20Rng::seed_from_u64(0xC0);
    let keys = KeySet::generate(&params, &[], &mut rng)?;
    let eval = Evaluator::new(&params);
    let cfg = DistanceConfig { mode: MatrixMode::PerPair, lazy: true, reduce: None };
    let mut matched = [0usize; 3];
    let corpus = selection_corpus(100);
    for case in &corpus {
        let n = case.models.len();
        let packed = case
            .models
            .iter()
            .map(|m| pack_and_encrypt(&WeightVector::new(m.clone())?, &keys.public, &params, &mut rng))
            .collect::<lancelot_core::Result<Vec<_>>>()?;
        let matrix = build_distance_matrix(&eval, &packed, &keys.relin, &keys.galois, &cfg, exec)?;
        let d = oracle::distances(&case.models);
        let rules = [
            (RuleConfig::new(Rule::Krum, case.c, 1), oracle::krum(&d, case.c)),
            (RuleConfig::new(Rule::MultiKrum, case.c, case.l), oracle::multi_krum(&d, case.c, case.l)),
            (RuleConfig::new(Rule::Median, case.c, 1), oracle::median(&d)),
        ];
        for (i, (rule, want)) in rules.iter().enumerate() {
            let (mask, _) = masked_sort_round(&params, &matrix, &keys.secret, rule, &mut rng)?;
            let rows = decrypt_mask(&params, &keys.secret, &mask)?;
            let got: Vec<usize> = rows
                .iter()
                .filter_map(|row| row.iter().position(|&v| v > 0.5))
                .collect();
            let clean = rows.iter().flatten().all(|&v| v.abs() < 1e-3 || (v - 1.0).abs() < 1e-3);
            matched[i] += usize::from(clean && &got == want && got.len() == rule.selection_size(n));
        }
    }
    let total = corpus.len();
    Ok((
        matched.iter().all(|&m| m == total),
        format!("matched krum {}/{total}, multi-krum {}/{total}, median {}/{total}", matched[0], matched[1], matched[2]),
    ))
}

fn model_equivalence<E: Executor>(exec: &E) -> Result<(bool, String)> {
    let dim = 6199;
    let model = Model::Logistic { dim, classes: 10 };
    let mut cfg = ExperimentConfig::new(model, RuleConfig::new(Rule::Krum, 1, 1));
    cfg.rounds = 20;
    cfg.patience = None;
    cfg.twin = true;
    cfg.seed = 5;
    let spec = MixtureSpec { dim, classes: 10, separation: 3.0, noise: 1.0 };
    let data = FederatedData::synthetic(&spec, 10, 60, 200, &mut ChaCha20Rng::seed_from_u64(5))?;
    let p = cfg.model.param_count();
    let mut fed = Federation::new(cfg, data)?;
    let mut worst = 0.0f64;
    let mut agree = true;
    while fed.round() < 20 {
        let t = fed.run_round(exec, &NoClock)?;
        worst = worst.max(t.divergence.unwrap_or(f64::INFINITY));
        agree &= t.selected == t.plain_selected;
    }
    let last = max_diff(fed.global().as_slice(), fed.plain_global().expect("twin").as_slice());
    Ok((
        last < 1e-3 && agree,
        format!("P = {p}, final max-norm gap {last:.2e}, worst round {worst:.2e}, selections agree: {agree}"),
    ))
}

fn robustness_config(rule: RuleConfig, attack: bool, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Model::Logistic { dim: 20, classes: 2 }, rule);
    cfg.rounds = 5;
    cfg.patience = None;
    cfg.seed = seed;
    cfg.reduction = Reduction::AtKgc;
    if attack {
        cfg.attack = Some(AttackConfig { kind: AttackKind::Untargeted { lambda: 10.0 }, byzantine: 1 });
    }
    cfg
}

fn byzantine_robustness<E: Executor>(exec: &E) -> Result<(bool, String)> {
    const SEEDS: u64 = 20;
    let krum = RuleConfig::new(Rule::Krum, 1, 1);
    let mean = RuleConfig::new(Rule::Mean, 1, 10);
    let mut acc = [0.0f64; 3];
    let mut worst_gap = 0.0f64;
    for seed in 0..SEEDS {
        let data = FederatedData::synthetic(&MixtureSpec::two_gaussians(20), 10, 100, 500, &mut ChaCha20Rng::seed_from_u64(seed))?;
        let mut finals = [0.0; 3];
        for (i, (rule, attack)) in [(krum, false), (krum, true), (mean, true)].into_iter().enumerate() {
            let r = lancelot_core::fl::run_experiment(robustness_config(rule, attack, seed), data.clone(), exec, &NoClock)?;
            finals[i] = r.final_accuracy;
            acc[i] += r.final_accuracy / SEEDS as f64;
        }
        worst_gap = worst_gap.max((finals[1] - finals[0]).abs());
    }
    let passed = (acc[1] - acc[0]).abs() <= 0.02 && acc[1] - acc[2] >= 0.15;
    Ok((
        passed,
        format!(
            "mean accuracy over {SEEDS} seeds: clean krum {:.4}, attacked krum {:.4}, attacked mean {:.4} (worst seed gap {:.4})",
            acc[0], acc[1], acc[2], worst_gap
        ),
    ))
}

fn packing_structure() -> Result<(bool, String)> {
    const P: usize = 61_706;
    const CLIENTS: usize = 10;
    let mut rng = ChaCha20Rng::seed_from_u64(0x9AC);
    let w = WeightVector::new(uniform(&mut rng, P, 1.0))?;
    let mut totals = Vec::new();
    let mut ok = true;
    for log_n in [13u32, 14, 15] {
        let params = Params::new(ParamSpec::default().with_degree(1 << log_n))?;
        let sk = SecretKey::generate(&params, &mut rng);
        let pk = sk.public_key(&params, &mut rng);
        let packed = pack_and_encrypt(&w, &pk, &params, &mut rng)?;
        let half = 1usize << (log_n - 1);
        let ceil = (P + half - 1) / half;
        ok &= packed.chunk_count() == ceil && chunk_count(P, params.slot_count()) == ceil;
        let back = lancelot_core::distance::decrypt_packed(&params, &sk, &packed)?;
        ok &= max_diff(&back, w.as_slice()) < 2f64.powi(-20);
        totals.push(CLIENTS * packed.chunk_count());
    }
    ok &= totals == [160, 80, 40] && totals.windows(2).all(|t| t[0] > t[1]);
    Ok((ok, format!("P = {P}: ciphertexts for {CLIENTS} clients at N = 2^13, 2^14, 2^15: {totals:?}")))
}

fn server_safe<T: ServerSafe>() {}

fn server_privacy<E: Executor>(exec: &E) -> Result<(bool, String)> {
    server_safe::<ServerMessage>();
    server_safe::<lancelot_core::fl::ServerState>();
    server_safe::<lancelot_core::fl::DistanceReport>();
    server_safe::<lancelot_core::fl::AggregateMessage>();
    let mut cfg = ExperimentConfig::new(Model::Logistic { dim: 20, classes: 2 }, RuleConfig::new(Rule::MultiKrum, 1, 3));
    cfg.twin = true;
    cfg.seed = 8;
    let data = FederatedData::synthetic(&MixtureSpec::two_gaussians(20), 10, 100, 200, &mut ChaCha20Rng::seed_from_u64(8))?;
    let mut fed = Federation::new(cfg, data)?;
    let (t, seen) = fed.run_round_observed(exec, &NoClock)?;
    let count: usize = seen.iter().map(|m| m.ciphertexts().len()).sum();
    let mut forbidden: HashSet<u64> = HashSet::new();
    for w in [fed.global(), fed.plain_global().expect("twin")] {
        forbidden.extend(w.as_slice().iter().map(|v| v.to_bits()));
    }
    let selected = t.selected.clone().unwrap_or_default();
    forbidden.extend(selected.iter().map(|&i| i as u64));
    let mut words = 0usize;
    let mut hits = 0usize;
    for ct in seen.iter().flat_map(|m| m.ciphertexts()) {
        let bytes = ct.to_bytes();
        // fixed 21-byte header, then little-endian residues
        for w in bytes[21..].chunks_exact(8) {
            words += 1;
            hits += usize::from(forbidden.contains(&u64::from_le_bytes(w.try_into().unwrap())));
        }
    }
    let uploads = seen.iter().filter(|m| matches!(m, ServerMessage::Upload(_))).count();
    let passed = count == t.server_ciphertexts && hits == 0 && uploads == 10;
    Ok((
        passed,
        format!("{} messages, {count} ciphertexts ({} in transcript), {words} residue words scanned, {hits} plaintext matches", seen.len(), t.server_ciphertexts),
    ))
}
