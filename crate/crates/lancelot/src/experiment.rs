//! The `experiment` subcommand: one federated run with transcripts,
//! optional ciphertext dumps and a summary report row.

use std::io::Write;
use std::path::Path;

use lancelot_core::ckks::{OpCount, ParamSpec};
use lancelot_core::distance::{chunk_count, HoistPlan};
use lancelot_core::exec::Executor;
use lancelot_core::fl::{
    partition, quantity_skew, Clock, ExperimentConfig, FederatedData, Federation, MixtureSpec, Pipeline, Reduction,
    RoundTranscript, ServerMessage, ServerSafe,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::exec::median;
use crate::report::{Fingerprint, ReportRow};

/// Client shards and validation set for the settings: synthetic unless
/// IDX files are given.
pub fn load_data(s: &Settings) -> Result<FederatedData> {
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed ^ 0xDA7A);
    let d = &s.data;
    match (&d.train_images, &d.train_labels) {
        (Some(images), Some(labels)) => {
            let train = crate::idx::load_pair(images, labels)?;
            let (train, validation) = match (&d.test_images, &d.test_labels) {
                (Some(ti), Some(tl)) => (train, crate::idx::load_pair(ti, tl)?),
                (None, None) => {
                    let held = d.validation.min(train.len() / 5);
                    let mut parts = partition(&train, &[train.len() - held, held], &mut rng)?;
                    let v = parts.pop().unwrap();
                    (parts.pop().unwrap(), v)
                }
                _ => return Err(Error::Config("test_images and test_labels go together".into())),
            };
            let min = train.len() / (4 * s.clients.max(1)) + 1;
            let sizes = quantity_skew(train.len(), s.clients, d.skew, min, &mut rng)?;
            Ok(FederatedData { clients: partition(&train, &sizes, &mut rng)?, validation })
        }
        (None, None) => {
            let spec = MixtureSpec { dim: d.dim, classes: d.classes, separation: d.separation, noise: d.noise };
            Ok(FederatedData::synthetic(&spec, s.clients, d.per_client, d.validation, &mut rng)?)
        }
        _ => Err(Error::Config("train_images and train_labels go together".into())),
    }
}

/// Identity of an experiment run.
pub fn fingerprint(s: &Settings, cfg: &ExperimentConfig) -> Fingerprint {
    let r = &cfg.rule;
    let reduction = match cfg.reduction {
        Reduction::AtKgc => "kgc".to_string(),
        Reduction::Server(_) => format!("{:?}", s.crypto.hoisting).to_lowercase(),
    };
    Fingerprint::new()
        .with("clients", s.clients)
        .with("rule", format!("{:?}", r.rule).to_lowercase())
        .with("c", r.c)
        .with("l", r.l)
        .with("score", format!("{:?}", r.score).to_lowercase())
        .with("attack", format!("{:?}", cfg.attack.map(|a| a.kind)))
        .with("model", format!("{:?}", cfg.model))
        .with("ring_degree", cfg.params.degree)
        .with("depth", cfg.params.depth)
        .with("scale_bits", cfg.params.scale_bits)
        .with("lazy_relin", if cfg.lazy_relin { "on" } else { "off" })
        .with("hoisting", reduction)
        .with("pipeline", format!("{:?}", cfg.pipeline).to_lowercase())
        .with("rounds", cfg.rounds)
        .with("seed", cfg.seed)
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub transcripts: Vec<RoundTranscript>,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub divergence: Option<f64>,
    pub malicious: Vec<usize>,
    pub stopped_early: bool,
    pub row: ReportRow,
}

/// Writes every server-visible ciphertext of one round in the binary
/// ciphertext format, one file each.
pub fn dump_messages(dir: &Path, round: usize, messages: &[ServerMessage]) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = 0;
    let mut uploads = 0;
    for m in messages {
        let (stem, cts) = match m {
            ServerMessage::Upload(u) => {
                uploads += 1;
                (format!("round{round:03}_upload{:03}", uploads - 1), u.ciphertexts())
            }
            ServerMessage::Mask(mask) => (format!("round{round:03}_mask"), mask.ciphertexts()),
        };
        for (i, ct) in cts.iter().enumerate() {
            let path = dir.join(format!("{stem}_{i:04}.lclt"));
            std::fs::write(&path, ct.to_bytes()).map_err(|e| Error::io(&path, e))?;
            written += 1;
        }
    }
    Ok(written)
}

pub struct RunOptions<'a> {
    /// One JSON record per round.
    pub transcript: Option<&'a Path>,
    /// Directory for the first round's server-visible ciphertexts.
    pub dump: Option<&'a Path>,
    pub variant: String,
}

pub fn run<E: Executor, C: Clock>(
    s: &Settings,
    planner: impl FnOnce(&ParamSpec, usize) -> Result<HoistPlan>,
    opts: &RunOptions,
    exec: &E,
    clock: &C,
) -> Result<ExperimentOutcome> {
    let data = load_data(s)?;
    let first = data.clients.first().ok_or(lancelot_core::Error::EmptyData)?;
    let cfg = s.experiment_config(first.dim(), first.classes(), planner)?;
    let mut fed = Federation::new(cfg.clone(), data)?;
    let mut log = match opts.transcript {
        Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?)),
        None => None,
    };
    let mut transcripts = Vec::new();
    let (mut best, mut stale, mut stopped_early) = (f64::NEG_INFINITY, 0, false);
    while fed.round() < cfg.rounds {
        let t = if fed.round() == 0 && cfg.pipeline == Pipeline::Encrypted && opts.dump.is_some() {
            let (t, seen) = fed.run_round_observed(exec, clock)?;
            dump_messages(opts.dump.unwrap(), t.round, &seen)?;
            t
        } else {
            fed.run_round(exec, clock)?
        };
        if let (Some(w), Some(p)) = (log.as_mut(), opts.transcript) {
            serde_json::to_writer(&mut *w, &t).map_err(|e| Error::Encode(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(p, e))?;
        }
        if t.accuracy > best {
            (best, stale) = (t.accuracy, 0);
        } else {
            stale += 1;
        }
        transcripts.push(t);
        if cfg.patience.is_some_and(|p| stale >= p) {
            stopped_early = true;
            break;
        }
    }
    if let (Some(w), Some(p)) = (log.as_mut(), opts.transcript) {
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    let phase = |f: fn(&RoundTranscript) -> f64| Some(median(&transcripts.iter().map(f).collect::<Vec<_>>()));
    let ops = transcripts.iter().fold(OpCount::default(), |acc, t| acc + t.ops);
    let last = transcripts.last();
    let chunks = match cfg.pipeline {
        Pipeline::Encrypted => chunk_count(cfg.model.param_count(), cfg.params.degree / 2),
        Pipeline::Plaintext => 0,
    };
    let row = ReportRow {
        fingerprint: fingerprint(s, &cfg).to_string(),
        variant: opts.variant.clone(),
        repetitions: transcripts.len(),
        time_local: phase(|t| t.times.local),
        time_encrypt: phase(|t| t.times.encrypt),
        time_distance: phase(|t| t.times.distance),
        time_select: phase(|t| t.times.select),
        time_aggregate: phase(|t| t.times.aggregate),
        time_decrypt: phase(|t| t.times.decrypt),
        time_total: phase(|t| t.times.total()),
        relinearizations: ops.relinearizations,
        modups: ops.modups,
        rotations: ops.rotations,
        multiplications: ops.multiplications,
        speedup: None,
        unfold: cfg.hoist_plan()?.filter(|_| cfg.pipeline == Pipeline::Encrypted).map(|p| p.k),
        chunks,
        ciphertexts: chunks * s.clients,
        accuracy: last.map(|t| t.accuracy),
        divergence: last.and_then(|t| t.divergence),
    };
    Ok(ExperimentOutcome {
        final_accuracy: last.map_or(f64::NAN, |t| t.accuracy),
        best_accuracy: best,
        divergence: last.and_then(|t| t.divergence),
        malicious: fed.malicious().to_vec(),
        transcripts,
        stopped_early,
        row,
        config: cfg,
    })
}
