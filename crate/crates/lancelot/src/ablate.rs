//! The `ablate` subcommand: the distance phase under one toggled setting
//! at a time.

use lancelot_core::agg::{Rule, RuleConfig, ScoreMode};
use lancelot_core::ckks::{Evaluator, KeySet, ParamSpec, Params};
use lancelot_core::distance::{
    build_distance_matrix, chunk_count, pack_and_encrypt, pairs, reduction_width, DistanceConfig, HoistPlan,
    MatrixMode, WeightVector,
};
use lancelot_core::exec::Executor;
use lancelot_core::fl::Clock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::HoistingMode;
use crate::error::{Error, Result};
use crate::exec::median;
use crate::report::{set_speedups, Fingerprint, ReportRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Toggle {
    LazyRelin,
    Hoisting,
    RingDegree,
}

/// Smallest and largest ring degree an ablation may sweep.
pub const DEGREE_RANGE: (usize, usize) = (1 << 13, 1 << 17);

#[derive(Clone, Debug, PartialEq)]
pub struct AblationSpec {
    pub toggle: Toggle,
    pub clients: usize,
    pub rule: RuleConfig,
    /// Model length `P`.
    pub params: usize,
    /// Parameters of the non-swept dimensions.
    pub base: ParamSpec,
    /// Ring degrees for the sweep.
    pub degrees: Vec<usize>,
    pub lazy_relin: bool,
    pub hoisting: HoistingMode,
    pub slot_sum_at_kgc: bool,
    pub memory_budget: u64,
    pub repetitions: usize,
    pub seed: u64,
}

impl AblationSpec {
    pub fn new(toggle: Toggle) -> Self {
        AblationSpec {
            toggle,
            clients: 10,
            rule: RuleConfig::new(Rule::Krum, 1, 1),
            params: 61_706,
            base: ParamSpec::default(),
            degrees: vec![1 << 13, 1 << 14, 1 << 15],
            lazy_relin: true,
            hoisting: HoistingMode::Off,
            slot_sum_at_kgc: false,
            memory_budget: 2 << 20,
            repetitions: 3,
            seed: 0,
        }
    }

    fn mode(&self) -> MatrixMode {
        let pairwise = self.rule.score == ScoreMode::Neighbours && matches!(self.rule.rule, Rule::Krum | Rule::MultiKrum);
        if pairwise {
            MatrixMode::PerPair
        } else {
            MatrixMode::RowSums
        }
    }

    /// The settings each row runs with, baseline first.
    pub fn variants(&self) -> Result<Vec<Variant>> {
        let base = Variant { spec: self.base, lazy: self.lazy_relin, hoisting: self.hoisting };
        if self.slot_sum_at_kgc && self.toggle == Toggle::Hoisting {
            return Err(Error::Config("the hoisting toggle needs server-side slot sums".into()));
        }
        Ok(match self.toggle {
            Toggle::LazyRelin => vec![Variant { lazy: false, ..base }, Variant { lazy: true, ..base }],
            Toggle::Hoisting => [HoistingMode::Off, HoistingMode::Full, HoistingMode::Dynamic]
                .into_iter()
                .map(|hoisting| Variant { hoisting, ..base })
                .collect(),
            Toggle::RingDegree => {
                if self.degrees.is_empty() {
                    return Err(Error::Config("no ring degrees to sweep".into()));
                }
                for &d in &self.degrees {
                    if !d.is_power_of_two() || d < DEGREE_RANGE.0 || d > DEGREE_RANGE.1 {
                        return Err(Error::Config(format!("ring degree {d} is not a power of two in [2^13, 2^17]")));
                    }
                }
                self.degrees.iter().map(|&d| Variant { spec: self.base.with_degree(d), ..base }).collect()
            }
        })
    }

    pub fn fingerprint(&self, v: &Variant) -> Fingerprint {
        Fingerprint::new()
            .with("clients", self.clients)
            .with("rule", format!("{:?}", self.rule.rule).to_lowercase())
            .with("c", self.rule.c)
            .with("l", self.rule.l)
            .with("score", format!("{:?}", self.rule.score).to_lowercase())
            .with("params", self.params)
            .with("ring_degree", v.spec.degree)
            .with("depth", v.spec.depth)
            .with("scale_bits", v.spec.scale_bits)
            .with("lazy_relin", if v.lazy { "on" } else { "off" })
            .with("hoisting", if self.slot_sum_at_kgc { "kgc".into() } else { v.hoisting.label() })
            .with("memory_budget", self.memory_budget)
            .with("repetitions", self.repetitions)
            .with("seed", self.seed)
    }
}

impl HoistingMode {
    pub fn label(&self) -> String {
        format!("{self:?}").to_lowercase()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variant {
    pub spec: ParamSpec,
    pub lazy: bool,
    pub hoisting: HoistingMode,
}

impl Variant {
    fn label(&self, toggle: Toggle) -> String {
        match toggle {
            Toggle::LazyRelin => format!("lazy_relin={}", if self.lazy { "on" } else { "off" }),
            Toggle::Hoisting => format!("hoisting={}", self.hoisting.label()),
            Toggle::RingDegree => format!("ring_degree={}", self.spec.degree),
        }
    }
}

/// Resolves a hoisting mode to a plan for `width`; `calibrate` supplies
/// host constants for the dynamic mode.
pub fn resolve_plan(
    mode: HoistingMode,
    spec: &ParamSpec,
    width: usize,
    budget: u64,
    calibrate: &mut dyn FnMut(&ParamSpec) -> Result<crate::calibrate::Calibration>,
) -> Result<HoistPlan> {
    Ok(match mode {
        HoistingMode::Off => HoistPlan::fixed(1, width)?,
        HoistingMode::Full => HoistPlan::fixed(width.trailing_zeros() as usize + 1, width)?,
        HoistingMode::Dynamic => calibrate(spec)?.plan(budget, width)?,
    })
}

/// One row per variant, with speedups against the first.
pub fn run_ablation<E: Executor, C: Clock>(
    spec: &AblationSpec,
    calibrate: &mut dyn FnMut(&ParamSpec) -> Result<crate::calibrate::Calibration>,
    exec: &E,
    clock: &C,
) -> Result<Vec<ReportRow>> {
    spec.rule.validate(spec.clients)?;
    if spec.params == 0 || spec.repetitions == 0 {
        return Err(Error::Config("params and repetitions must be positive".into()));
    }
    let mut rows = Vec::new();
    for v in spec.variants()? {
        rows.push(run_variant(spec, &v, calibrate, exec, clock)?);
    }
    set_speedups(&mut rows, 0);
    Ok(rows)
}

fn run_variant<E: Executor, C: Clock>(
    spec: &AblationSpec,
    v: &Variant,
    calibrate: &mut dyn FnMut(&ParamSpec) -> Result<crate::calibrate::Calibration>,
    exec: &E,
    clock: &C,
) -> Result<ReportRow> {
    let params = Params::new(v.spec)?;
    let width = reduction_width(spec.params, params.slot_count());
    let plan = match spec.slot_sum_at_kgc {
        true => None,
        false => Some(resolve_plan(v.hoisting, &v.spec, width, spec.memory_budget, calibrate)?),
    };
    let steps = plan.map(|p| p.rotation_steps()).unwrap_or_default();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let models: Vec<WeightVector> = (0..spec.clients)
        .map(|_| WeightVector::new((0..spec.params).map(|_| rng.random_range(-0.1..0.1)).collect()))
        .collect::<lancelot_core::Result<_>>()?;
    let keys = KeySet::generate(&params, &steps, &mut rng)?;
    let packed = models
        .iter()
        .map(|w| pack_and_encrypt(w, &keys.public, &params, &mut rng))
        .collect::<lancelot_core::Result<Vec<_>>>()?;
    let eval = Evaluator::new(&params);
    let cfg = DistanceConfig { mode: spec.mode(), lazy: v.lazy, reduce: plan };
    let mut times = Vec::with_capacity(spec.repetitions);
    let mut counts = None;
    let mut matrix = None;
    for _ in 0..spec.repetitions {
        let before = eval.counts();
        let t0 = clock.now();
        let m = build_distance_matrix(&eval, &packed, &keys.relin, &keys.galois, &cfg, exec)?;
        times.push(clock.now() - t0);
        let ops = eval.counts() - before;
        if counts.is_some_and(|c| c != ops) {
            return Err(Error::Config("operation counters changed between repetitions".into()));
        }
        counts = Some(ops);
        matrix = Some(m);
    }
    let ops = counts.expect("at least one repetition");
    let got = matrix.expect("at least one repetition").decrypt_values(&params, &keys.secret)?;
    let want = plain_entries(&models, spec.mode());
    let scale = want.iter().fold(0.0f64, |a, w| a.max(w.abs())).max(f64::MIN_POSITIVE);
    let divergence = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0f64, f64::max) / scale;
    let chunks = chunk_count(spec.params, params.slot_count());
    let t = median(&times);
    Ok(ReportRow {
        fingerprint: spec.fingerprint(v).to_string(),
        variant: v.label(spec.toggle),
        repetitions: spec.repetitions,
        time_distance: Some(t),
        time_total: Some(t),
        relinearizations: ops.relinearizations,
        modups: ops.modups,
        rotations: ops.rotations,
        multiplications: ops.multiplications,
        unfold: plan.map(|p| p.k),
        chunks,
        ciphertexts: chunks * spec.clients,
        divergence: Some(divergence),
        ..Default::default()
    })
}

/// Plaintext values of the matrix entries, in the encrypted layout.
fn plain_entries(models: &[WeightVector], mode: MatrixMode) -> Vec<f64> {
    let n = models.len();
    let per_pair: Vec<f64> = pairs(n).iter().map(|&(i, j)| models[i].squared_distance(&models[j])).collect();
    match mode {
        MatrixMode::PerPair => per_pair,
        MatrixMode::RowSums => {
            let mut rows = vec![0.0; n];
            for (&(i, j), d) in pairs(n).iter().zip(&per_pair) {
                rows[i] += d;
                rows[j] += d;
            }
            rows
        }
    }
}
