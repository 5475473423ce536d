//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lancelot_core::agg::{Rule, RuleConfig, ScoreMode};
use lancelot_core::ckks::ParamSpec;

use crate::ablate::{run_ablation, AblationSpec, Toggle};
use crate::acceptance::{self, CRITERIA};
use crate::calibrate::{self, Calibration, RUNS};
use crate::config::{AttackName, HoistingMode, RuleName, Settings};
use crate::error::{Error, Result};
use crate::exec::{RayonExecutor, StdClock};
use crate::experiment::{self, RunOptions};
use crate::report::{emit_report, render, Format, ReportRow};

pub const DEFAULT_CALIBRATION: &str = ".lancelot/calibration.json";

#[derive(Debug, Parser)]
#[command(name = "lancelot", version, about = "Encrypted Byzantine-robust federated learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a federation and report per-phase timings and accuracy.
    Experiment(ExperimentArgs),
    /// Time the distance phase with one setting toggled.
    Ablate(AblateArgs),
    /// Measure and cache the hoisting cost constants for a parameter set.
    Calibrate(CalibrateArgs),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl From<OnOff> for bool {
    fn from(v: OnOff) -> bool {
        v == OnOff::On
    }
}

#[derive(Debug, Default, Args)]
pub struct CryptoArgs {
    #[arg(long)]
    pub ring_degree: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub scale_bits: Option<u32>,
    #[arg(long, value_enum)]
    pub lazy_relin: Option<OnOff>,
    #[arg(long, value_enum)]
    pub hoisting: Option<HoistingMode>,
    /// Bytes available to one hoisted rotation batch.
    #[arg(long)]
    pub memory_budget: Option<u64>,
    /// Leave slot sums of distances to the key holder.
    #[arg(long)]
    pub slot_sum_at_kgc: bool,
    /// Calibration cache used by dynamic hoisting.
    #[arg(long, default_value = DEFAULT_CALIBRATION)]
    pub calibration: PathBuf,
}

#[derive(Debug, Default, Args)]
pub struct RuleArgs {
    #[arg(long, value_enum)]
    pub rule: Option<RuleName>,
    #[arg(long)]
    pub clients: Option<usize>,
    /// Assumed compromised clients; also the attacker count.
    #[arg(long)]
    pub byzantine: Option<usize>,
    /// Multi-Krum selection size.
    #[arg(long)]
    pub l: Option<usize>,
    /// Rank by total distance instead of nearest-neighbour scores.
    #[arg(long)]
    pub sumdis_score: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args)]
pub struct ReportArgs {
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Defaults to the report file's extension, else csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Default, Args)]
pub struct ExperimentArgs {
    /// TOML settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[command(flatten)]
    pub crypto: CryptoArgs,
    #[arg(long, value_enum)]
    pub attack: Option<AttackName>,
    /// Scale of the untargeted attack.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Withhold selections and distances from the transcript.
    #[arg(long)]
    pub redact_kgc: bool,
    /// Also run the plaintext pipeline and report divergence.
    #[arg(long)]
    pub twin: bool,
    /// Run the plaintext pipeline only.
    #[arg(long)]
    pub plaintext: bool,
    /// Write the first round's server-visible ciphertexts here.
    #[arg(long)]
    pub dump_ciphertexts: Option<PathBuf>,
    /// Per-round JSON lines.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    pub output: ReportArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub toggle: Toggle,
    /// Model length; 61706 by default, 64 for the hoisting toggle.
    #[arg(long)]
    pub params: Option<usize>,
    /// Ring degrees for the sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub degrees: Vec<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[command(flatten)]
    pub crypto: CryptoArgs,
    #[command(flatten)]
    pub output: ReportArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub ring_degree: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub scale_bits: Option<u32>,
    #[arg(long, default_value_t = RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = DEFAULT_CALIBRATION)]
    pub calibration: PathBuf,
    /// Also print the plan for a model of this length.
    #[arg(long)]
    pub params: Option<usize>,
    #[arg(long, default_value_t = 2 << 20)]
    pub memory_budget: u64,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Criteria to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

fn spec_from(base: ParamSpec, degree: Option<usize>, depth: Option<usize>, scale: Option<u32>) -> ParamSpec {
    ParamSpec {
        degree: degree.unwrap_or(base.degree),
        depth: depth.unwrap_or(base.depth),
        scale_bits: scale.unwrap_or(base.scale_bits),
        ..base
    }
}

/// Flags layered over a settings file.
pub fn settings(args: &ExperimentArgs) -> Result<Settings> {
    let mut s = match &args.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let r = &args.rule;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v.into();
            }
        };
    }
    set!(s.rule, r.rule);
    set!(s.clients, r.clients);
    set!(s.byzantine, r.byzantine);
    if r.l.is_some() {
        s.l = r.l;
    }
    set!(s.seed, r.seed);
    s.sumdis_score |= r.sumdis_score;
    let c = &args.crypto;
    set!(s.crypto.ring_degree, c.ring_degree);
    set!(s.crypto.depth, c.depth);
    set!(s.crypto.scale_bits, c.scale_bits);
    set!(s.crypto.lazy_relin, c.lazy_relin);
    set!(s.crypto.hoisting, c.hoisting);
    set!(s.crypto.memory_budget, c.memory_budget);
    s.crypto.slot_sum_at_kgc |= c.slot_sum_at_kgc;
    s.crypto.twin |= args.twin;
    s.crypto.plaintext |= args.plaintext;
    set!(s.attack, args.attack);
    set!(s.lambda, args.lambda);
    set!(s.training.rounds, args.rounds);
    s.redact_kgc |= args.redact_kgc;
    Ok(s)
}

pub fn ablation_spec(args: &AblateArgs) -> Result<AblationSpec> {
    let mut spec = AblationSpec::new(args.toggle);
    let r = &args.rule;
    spec.clients = r.clients.unwrap_or(spec.clients);
    spec.seed = r.seed.unwrap_or(spec.seed);
    let c = r.byzantine.unwrap_or(spec.rule.c);
    let rule = match r.rule.unwrap_or(RuleName::Krum) {
        RuleName::Krum => Rule::Krum,
        RuleName::MultiKrum => Rule::MultiKrum,
        RuleName::Median => Rule::Median,
        RuleName::Mean => Rule::Mean,
    };
    let l = match rule {
        Rule::MultiKrum => r.l.unwrap_or(spec.clients.saturating_sub(2 * c + 3).max(1)),
        Rule::Mean => spec.clients,
        _ => 1,
    };
    spec.rule = RuleConfig { score: if r.sumdis_score { ScoreMode::SumDis } else { ScoreMode::Neighbours }, ..RuleConfig::new(rule, c, l) };
    spec.params = args.params.unwrap_or(if args.toggle == Toggle::Hoisting { 64 } else { spec.params });
    if !args.degrees.is_empty() {
        spec.degrees = args.degrees.clone();
    }
    spec.repetitions = args.repetitions.unwrap_or(spec.repetitions);
    let c = &args.crypto;
    spec.base = spec_from(spec.base, c.ring_degree, c.depth, c.scale_bits);
    spec.lazy_relin = c.lazy_relin.map_or(spec.lazy_relin, bool::from);
    spec.hoisting = c.hoisting.unwrap_or(spec.hoisting);
    spec.memory_budget = c.memory_budget.unwrap_or(spec.memory_budget);
    spec.slot_sum_at_kgc = c.slot_sum_at_kgc;
    Ok(spec)
}

fn write_rows(rows: &[ReportRow], args: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let format = args.format.or(args.report.as_deref().map(Format::from_path)).unwrap_or(Format::Csv);
    match &args.report {
        Some(path) => emit_report(rows, format, path),
        None => {
            let bytes = render(rows, format)?;
            out.write_all(&bytes).map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

fn cached(path: &Path) -> impl FnMut(&ParamSpec) -> Result<Calibration> + '_ {
    move |spec| calibrate::load_or_measure(path, *spec)
}

fn line(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

/// Runs a parsed command. `Ok(false)` means a selftest criterion failed.
pub fn execute(cli: &Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<bool> {
    let exec = RayonExecutor::from_env();
    match &cli.command {
        Command::Experiment(args) => {
            let s = settings(args)?;
            let mut cal = cached(&args.crypto.calibration);
            let budget = s.crypto.memory_budget;
            let planner = |spec: &ParamSpec, width: usize| cal(spec)?.plan(budget, width);
            let opts = RunOptions {
                transcript: args.transcript.as_deref(),
                dump: args.dump_ciphertexts.as_deref(),
                variant: "experiment".into(),
            };
            let o = experiment::run(&s, planner, &opts, &exec, &StdClock)?;
            let _ = writeln!(
                log,
                "{} rounds, final accuracy {:.4}, best {:.4}{}",
                o.transcripts.len(),
                o.final_accuracy,
                o.best_accuracy,
                o.divergence.map(|d| format!(", divergence {d:.3e}")).unwrap_or_default()
            );
            write_rows(&[o.row], &args.output, out)?;
            Ok(true)
        }
        Command::Ablate(args) => {
            let spec = ablation_spec(args)?;
            let mut cal = cached(&args.crypto.calibration);
            let rows = run_ablation(&spec, &mut cal, &exec, &StdClock)?;
            write_rows(&rows, &args.output, out)?;
            Ok(true)
        }
        Command::Calibrate(args) => {
            let spec = spec_from(ParamSpec::default(), args.ring_degree, args.depth, args.scale_bits);
            let cal = calibrate::measure(spec, args.runs, args.seed)?;
            calibrate::store(&args.calibration, cal)?;
            line(
                out,
                &format!(
                    "N = {}: T_H {:.3e} s, T_D {:.3e} s, M_c {} bytes ({} runs) -> {}",
                    spec.degree,
                    cal.t_hoist,
                    cal.t_decompose,
                    cal.m_cipher,
                    cal.runs,
                    args.calibration.display()
                ),
            )?;
            if let Some(p) = args.params {
                let width = lancelot_core::distance::reduction_width(p, spec.degree / 2);
                let plan = cal.plan(args.memory_budget, width)?;
                line(out, &format!("width {width}, budget {} bytes: k = {}", args.memory_budget, plan.k))?;
            }
            Ok(true)
        }
        Command::Selftest(args) => {
            let ids: Vec<u8> = if args.only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { args.only.clone() };
            let mut io_err = None;
            let outcomes = acceptance::run_all(&ids, &exec, |o| {
                if let Err(e) = writeln!(out, "{o}").and_then(|_| out.flush()) {
                    io_err.get_or_insert(e);
                }
            });
            if let Some(e) = io_err {
                return Err(Error::io(Path::new("<stdout>"), e));
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            line(out, &format!("{} passed, {failed} failed", outcomes.len() - failed))?;
            Ok(failed == 0)
        }
    }
}
