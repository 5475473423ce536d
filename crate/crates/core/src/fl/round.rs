use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::attack::AttackConfig;
use super::data::{Dataset, FederatedData};
use super::entity::{ClientState, KgcState, ModelUpload, Role, ServerMessage, ServerState};
use super::model::{Model, SgdConfig};
use crate::agg::{aggregation_depth, plaintext_aggregate, select, DecryptedDistances, DistanceTable, Rule, RuleConfig, ScoreMode};
use crate::ckks::{OpCount, ParamSpec, Params};
use crate::distance::{reduction_width, DistanceConfig, HoistPlan, MatrixMode, WeightVector};
use crate::error::{Error, Result};
use crate::exec::Executor;

/// Seconds since an arbitrary origin.
pub trait Clock: Sync {
    fn now(&self) -> f64;
}

/// A clock that never advances, for reproducible transcripts.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Wall time per workflow phase, in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseTimes {
    pub local: f64,
    pub encrypt: f64,
    pub distance: f64,
    pub select: f64,
    pub aggregate: f64,
    pub decrypt: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.local + self.encrypt + self.distance + self.select + self.aggregate + self.decrypt
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundTranscript {
    pub round: usize,
    /// Key-holder view, absent when redacted.
    pub selected: Option<Vec<usize>>,
    pub distances: Option<DecryptedDistances>,
    /// What the plaintext twin would have selected on its own models.
    pub plain_selected: Option<Vec<usize>>,
    pub times: PhaseTimes,
    pub ops: OpCount,
    pub accuracy: f64,
    pub plain_accuracy: Option<f64>,
    /// `‖W_enc - W_plain‖_∞` after the round.
    pub divergence: Option<f64>,
    /// Ciphertexts and bytes the server received.
    pub server_ciphertexts: usize,
    pub server_bytes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pipeline {
    Encrypted,
    Plaintext,
}

/// Unfold factor of the server-side slot sum.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Hoisting {
    /// `k = 1`: every tree level is a rotate-and-add.
    Off,
    /// `k = log2(width) + 1`: one hoisted batch covers the tree.
    Full,
    /// A plan made for this model's reduction width.
    Planned(HoistPlan),
}

/// Where slot sums of distance ciphertexts are taken.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Reduction {
    AtKgc,
    Server(Hoisting),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub params: ParamSpec,
    pub model: Model,
    pub rule: RuleConfig,
    pub attack: Option<AttackConfig>,
    pub sgd: SgdConfig,
    pub rounds: usize,
    /// Stop after this many rounds without a validation improvement.
    pub patience: Option<usize>,
    pub seed: u64,
    pub lazy_relin: bool,
    pub reduction: Reduction,
    pub pipeline: Pipeline,
    /// Run the plaintext pipeline alongside and report divergence.
    pub twin: bool,
    pub redact_kgc: bool,
}

impl ExperimentConfig {
    pub fn new(model: Model, rule: RuleConfig) -> Self {
        ExperimentConfig {
            params: ParamSpec::default(),
            model,
            rule,
            attack: None,
            sgd: SgdConfig::default(),
            rounds: 20,
            patience: Some(8),
            seed: 0,
            lazy_relin: true,
            reduction: Reduction::Server(Hoisting::Off),
            pipeline: Pipeline::Encrypted,
            twin: false,
            redact_kgc: false,
        }
    }

    /// Per-pair distances when the rule scores neighbours, row sums
    /// otherwise.
    pub fn matrix_mode(&self) -> MatrixMode {
        let pairwise = self.rule.score == ScoreMode::Neighbours && matches!(self.rule.rule, Rule::Krum | Rule::MultiKrum);
        if pairwise {
            MatrixMode::PerPair
        } else {
            MatrixMode::RowSums
        }
    }

    /// Slots summed per distance ciphertext.
    pub fn reduction_width(&self) -> usize {
        reduction_width(self.model.param_count(), self.params.degree / 2)
    }

    /// The server's slot-sum plan, if it reduces at all.
    pub fn hoist_plan(&self) -> Result<Option<HoistPlan>> {
        let width = self.reduction_width();
        match self.reduction {
            Reduction::AtKgc => Ok(None),
            Reduction::Server(Hoisting::Off) => HoistPlan::fixed(1, width).map(Some),
            Reduction::Server(Hoisting::Full) => HoistPlan::fixed(width.trailing_zeros() as usize + 1, width).map(Some),
            Reduction::Server(Hoisting::Planned(plan)) if plan.width == width => Ok(Some(plan)),
            Reduction::Server(Hoisting::Planned(plan)) => Err(Error::Width(plan.width)),
        }
    }

    pub fn distance_config(&self) -> Result<DistanceConfig> {
        Ok(DistanceConfig { mode: self.matrix_mode(), lazy: self.lazy_relin, reduce: self.hoist_plan()? })
    }

    /// Checks every round precondition that does not depend on data.
    pub fn preflight(&self, clients: usize, params: Option<&Params>) -> Result<()> {
        self.rule.validate(clients)?;
        if let Some(a) = &self.attack {
            a.validate(clients)?;
        }
        if let Some(p) = params {
            let need = aggregation_depth(self.rule.averages(clients));
            if p.max_level() < need {
                return Err(Error::DepthExhausted);
            }
        }
        Ok(())
    }
}

mod purpose {
    pub const INIT: u64 = 1;
    pub const KEYS: u64 = 2;
    pub const ROLES: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const ENCRYPT: u64 = 5;
    pub const MASK: u64 = 6;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one (round, purpose, party) triple.
fn stream(seed: u64, round: usize, purpose: u64, index: usize) -> ChaCha20Rng {
    let s = splitmix(splitmix(splitmix(seed ^ purpose.rotate_left(48)) ^ round as u64) ^ index as u64);
    ChaCha20Rng::seed_from_u64(s)
}

fn max_abs_diff(a: &WeightVector, b: &WeightVector) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A configured federation between rounds.
#[derive(Debug)]
pub struct Federation {
    cfg: ExperimentConfig,
    clients: Vec<ClientState>,
    server: Option<ServerState>,
    kgc: Option<KgcState>,
    validation: Dataset,
    global: WeightVector,
    plain_global: Option<WeightVector>,
    malicious: Vec<usize>,
    round: usize,
}

impl Federation {
    pub fn new(cfg: ExperimentConfig, data: FederatedData) -> Result<Self> {
        let n = data.clients.len();
        let params = match cfg.pipeline {
            Pipeline::Encrypted => Some(Params::new(cfg.params)?),
            Pipeline::Plaintext => None,
        };
        cfg.preflight(n, None)?;
        let malicious = cfg.attack.map(|a| a.choose(n, &mut stream(cfg.seed, 0, purpose::ROLES, 0))).unwrap_or_default();
        let mut clients: Vec<ClientState> = data
            .clients
            .into_iter()
            .enumerate()
            .map(|(id, d)| {
                let role = match &cfg.attack {
                    Some(a) if malicious.contains(&id) => Role::Malicious(a.kind),
                    _ => Role::Honest,
                };
                ClientState::new(id, d, role)
            })
            .collect();
        let (server, kgc) = match &params {
            Some(p) => {
                let dcfg = cfg.distance_config()?;
                let steps = dcfg.reduce.map(|plan| plan.rotation_steps()).unwrap_or_default();
                let kgc = KgcState::new(p, cfg.rule, &steps, &mut stream(cfg.seed, 0, purpose::KEYS, 0))?;
                let pk = kgc.public_key();
                clients = clients.into_iter().map(|c| c.with_public_key(p, pk.clone())).collect();
                (Some(ServerState::new(p, kgc.server_keys(), dcfg)), Some(kgc))
            }
            None => (None, None),
        };
        let global = cfg.model.init(&mut stream(cfg.seed, 0, purpose::INIT, 0));
        let plain_global = (cfg.twin && cfg.pipeline == Pipeline::Encrypted).then(|| global.clone());
        Ok(Federation {
            cfg,
            clients,
            server,
            kgc,
            validation: data.validation,
            global,
            plain_global,
            malicious,
            round: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn global(&self) -> &WeightVector {
        &self.global
    }

    pub fn plain_global(&self) -> Option<&WeightVector> {
        self.plain_global.as_ref()
    }

    pub fn malicious(&self) -> &[usize] {
        &self.malicious
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn server(&self) -> Option<&ServerState> {
        self.server.as_ref()
    }

    pub fn kgc(&self) -> Option<&KgcState> {
        self.kgc.as_ref()
    }

    fn local_updates<E: Executor>(&self, start: &WeightVector, exec: &E) -> Result<Vec<WeightVector>> {
        let (seed, round) = (self.cfg.seed, self.round);
        exec.map(&self.clients, |c| {
            c.local_update(&self.cfg.model, start, &self.cfg.sgd, &mut stream(seed, round, purpose::TRAIN, c.id))
        })
        .into_iter()
        .collect()
    }

    fn plain_select(&self, models: &[WeightVector]) -> Result<(DecryptedDistances, Vec<usize>)> {
        let table = DistanceTable::from_weights(models)?;
        let d = match self.cfg.matrix_mode() {
            MatrixMode::PerPair => DecryptedDistances::Pairwise(table),
            MatrixMode::RowSums => DecryptedDistances::Totals(table.totals()),
        };
        let sel = select(&d, &self.cfg.rule)?;
        Ok((d, sel.selected))
    }

    /// One training round. On error nothing observable changes.
    pub fn run_round<E: Executor, C: Clock>(&mut self, exec: &E, clock: &C) -> Result<RoundTranscript> {
        self.step(exec, clock, None)
    }

    /// [`Self::run_round`] that also returns every message the server
    /// received.
    pub fn run_round_observed<E: Executor, C: Clock>(&mut self, exec: &E, clock: &C) -> Result<(RoundTranscript, Vec<ServerMessage>)> {
        let mut seen = Vec::new();
        let t = self.step(exec, clock, Some(&mut seen))?;
        Ok((t, seen))
    }

    fn step<E: Executor, C: Clock>(
        &mut self,
        exec: &E,
        clock: &C,
        seen: Option<&mut Vec<ServerMessage>>,
    ) -> Result<RoundTranscript> {
        let result = match self.cfg.pipeline {
            Pipeline::Encrypted => self.encrypted_round(exec, clock, seen),
            Pipeline::Plaintext => self.plaintext_round(exec, clock),
        };
        if let Some(s) = self.server.as_mut() {
            s.clear();
        }
        let (t, global, plain) = result?;
        self.global = global;
        if plain.is_some() {
            self.plain_global = plain;
        }
        self.round += 1;
        Ok(t)
    }

    fn plaintext_round<E: Executor, C: Clock>(&self, exec: &E, clock: &C) -> Result<(RoundTranscript, WeightVector, Option<WeightVector>)> {
        let n = self.clients.len();
        self.cfg.preflight(n, None)?;
        let mut times = PhaseTimes::default();
        let t0 = clock.now();
        let models = self.local_updates(&self.global, exec)?;
        let t1 = clock.now();
        let (distances, selected) = self.plain_select(&models)?;
        let sel = crate::agg::SelectionResult { rule: self.cfg.rule.rule, selected };
        let global = plaintext_aggregate(&models, &sel)?;
        let t2 = clock.now();
        times.local = t1 - t0;
        times.select = t2 - t1;
        let accuracy = self.cfg.model.evaluate(&global, &self.validation)?;
        let redact = self.cfg.redact_kgc;
        let t = RoundTranscript {
            round: self.round,
            selected: (!redact).then(|| sel.selected.clone()),
            distances: (!redact).then_some(distances),
            plain_selected: None,
            times,
            ops: OpCount::default(),
            accuracy,
            plain_accuracy: None,
            divergence: None,
            server_ciphertexts: 0,
            server_bytes: 0,
        };
        Ok((t, global, None))
    }

    fn encrypted_round<E: Executor, C: Clock>(
        &mut self,
        exec: &E,
        clock: &C,
        mut seen: Option<&mut Vec<ServerMessage>>,
    ) -> Result<(RoundTranscript, WeightVector, Option<WeightVector>)> {
        let n = self.clients.len();
        let kgc = self.kgc.as_ref().ok_or(Error::Key("no key holder"))?;
        self.cfg.preflight(n, Some(kgc.params()))?;
        let (seed, round) = (self.cfg.seed, self.round);
        let mut times = PhaseTimes::default();

        // (1) local training
        let t0 = clock.now();
        let models = self.local_updates(&self.global, exec)?;
        let t1 = clock.now();
        // (2) encrypt and upload
        let uploads: Vec<ModelUpload> = exec
            .map(&self.clients, |c| c.upload(&models[c.id], &mut stream(seed, round, purpose::ENCRYPT, c.id)))
            .into_iter()
            .collect::<Result<_>>()?;
        let t2 = clock.now();
        let server = self.server.as_mut().ok_or(Error::Key("no server"))?;
        let before = server.evaluator().counts();
        let mut server_ciphertexts = 0;
        let mut server_bytes = 0;
        for u in uploads {
            server_ciphertexts += u.weights.chunk_count();
            server_bytes += u.weights.size_bytes();
            if let Some(s) = seen.as_deref_mut() {
                s.push(ServerMessage::Upload(u.clone()));
            }
            server.receive(u);
        }
        // (3) encrypted distances
        let report = match self.cfg.rule.rule {
            Rule::Mean => None,
            _ => Some(server.distance_phase(exec)?),
        };
        let t3 = clock.now();
        // (4-6) key holder decrypts, selects and masks
        let (mask, record) = kgc.select(report.as_ref(), n, &mut stream(seed, round, purpose::MASK, 0))?;
        let t4 = clock.now();
        server_ciphertexts += n * n;
        server_bytes += mask.mask.rows().iter().flatten().map(|c| c.size_bytes()).sum::<usize>();
        if let Some(s) = seen.as_deref_mut() {
            s.push(ServerMessage::Mask(mask.clone()));
        }
        // (7-8) masked aggregation
        let l = record.selection.l();
        let average = (l > 1).then_some(l);
        let agg = server.aggregate(&mask, average, exec)?;
        let ops = server.evaluator().counts() - before;
        let t5 = clock.now();
        // (9) decrypt and broadcast
        let global = kgc.open(&agg)?.weights;
        let t6 = clock.now();
        times.local = t1 - t0;
        times.encrypt = t2 - t1;
        times.distance = t3 - t2;
        times.select = t4 - t3;
        times.aggregate = t5 - t4;
        times.decrypt = t6 - t5;

        let accuracy = self.cfg.model.evaluate(&global, &self.validation)?;
        let (mut plain_selected, mut plain_accuracy, mut divergence, mut plain_next) = (None, None, None, None);
        if let Some(pg) = &self.plain_global {
            let plain_models = self.local_updates(pg, exec)?;
            let (_, own) = self.plain_select(&plain_models)?;
            let next = plaintext_aggregate(&plain_models, &record.selection)?;
            divergence = Some(max_abs_diff(&global, &next));
            plain_accuracy = Some(self.cfg.model.evaluate(&next, &self.validation)?);
            plain_selected = Some(own);
            plain_next = Some(next);
        }
        let redact = self.cfg.redact_kgc;
        let t = RoundTranscript {
            round,
            selected: (!redact).then(|| record.selection.selected.clone()),
            distances: (!redact).then_some(record.distances),
            plain_selected,
            times,
            ops,
            accuracy,
            plain_accuracy,
            divergence,
            server_ciphertexts,
            server_bytes,
        };
        Ok((t, global, plain_next))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub transcripts: Vec<RoundTranscript>,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    /// Final `‖W_enc - W_plain‖_∞` when the twin ran.
    pub divergence: Option<f64>,
    pub global: WeightVector,
    pub malicious: Vec<usize>,
    pub stopped_early: bool,
}

/// Rounds until `cfg.rounds` or until validation accuracy stalls for
/// `cfg.patience` rounds.
pub fn run_experiment<E: Executor, C: Clock>(
    cfg: ExperimentConfig,
    data: FederatedData,
    exec: &E,
    clock: &C,
) -> Result<ExperimentResult> {
    let mut fed = Federation::new(cfg, data)?;
    let mut transcripts = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;
    while fed.round() < fed.config().rounds {
        let t = fed.run_round(exec, clock)?;
        if t.accuracy > best {
            best = t.accuracy;
            stale = 0;
        } else {
            stale += 1;
        }
        transcripts.push(t);
        if fed.config().patience.is_some_and(|p| stale >= p) {
            stopped_early = true;
            break;
        }
    }
    let final_accuracy = transcripts.last().map(|t| t.accuracy).unwrap_or(f64::NAN);
    let divergence = transcripts.last().and_then(|t| t.divergence);
    Ok(ExperimentResult {
        transcripts,
        final_accuracy,
        best_accuracy: best,
        divergence,
        global: fed.global().clone(),
        malicious: fed.malicious().to_vec(),
        stopped_early,
    })
}
