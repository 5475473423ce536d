//! Experiment settings: TOML schema, CLI overlay, and conversion to the
//! core configuration.

use std::path::{Path, PathBuf};

use lancelot_core::agg::{Rule, RuleConfig, ScoreMode};
use lancelot_core::ckks::ParamSpec;
use lancelot_core::distance::HoistPlan;
use lancelot_core::fl::{AttackConfig, AttackKind, ExperimentConfig, Hoisting, Model, Pipeline, Reduction, SgdConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Krum,
    MultiKrum,
    Median,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AttackName {
    None,
    LabelFlip,
    Untargeted,
    Targeted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum HoistingMode {
    Off,
    Full,
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logistic,
    Mlp,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryptoSettings {
    pub ring_degree: usize,
    pub depth: usize,
    pub scale_bits: u32,
    pub lazy_relin: bool,
    pub hoisting: HoistingMode,
    /// Bytes available to the hoisted rotation batch.
    pub memory_budget: u64,
    pub slot_sum_at_kgc: bool,
    /// Skip encryption entirely: the plaintext baseline.
    pub plaintext: bool,
    /// Also run the plaintext pipeline and report divergence.
    pub twin: bool,
}

impl Default for CryptoSettings {
    fn default() -> Self {
        let p = ParamSpec::default();
        CryptoSettings {
            ring_degree: p.degree,
            depth: p.depth,
            scale_bits: p.scale_bits,
            lazy_relin: true,
            hoisting: HoistingMode::Dynamic,
            memory_budget: 2 << 20,
            slot_sum_at_kgc: false,
            plaintext: false,
            twin: false,
        }
    }
}

impl CryptoSettings {
    pub fn param_spec(&self) -> ParamSpec {
        ParamSpec { degree: self.ring_degree, depth: self.depth, scale_bits: self.scale_bits, ..ParamSpec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    /// Synthetic feature dimension.
    pub dim: usize,
    pub classes: usize,
    pub per_client: usize,
    pub validation: usize,
    pub separation: f64,
    pub noise: f64,
    /// IDX image/label files replacing the synthetic task.
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Log-normal sigma of client dataset sizes.
    pub skew: f64,
}

impl Default for DataSettings {
    fn default() -> Self {
        DataSettings {
            dim: 20,
            classes: 2,
            per_client: 100,
            validation: 500,
            separation: 2.0,
            noise: 1.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            skew: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub model: ModelKind,
    pub hidden: usize,
    pub rounds: usize,
    /// Rounds without improvement before stopping; 0 disables.
    pub patience: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        let sgd = SgdConfig::default();
        TrainingSettings {
            model: ModelKind::Logistic,
            hidden: 32,
            rounds: 20,
            patience: 8,
            lr: sgd.lr,
            batch: sgd.batch,
            epochs: sgd.epochs,
        }
    }
}

/// Everything an experiment needs. Every field has a default, so a config
/// file may set any subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub clients: usize,
    /// Both the rule's assumed compromised count `c` and, under an attack,
    /// the number of malicious clients.
    pub byzantine: usize,
    /// Multi-Krum selection size; defaults to the largest valid value.
    pub l: Option<usize>,
    pub rule: RuleName,
    pub sumdis_score: bool,
    pub attack: AttackName,
    pub lambda: f64,
    pub source: usize,
    pub target: usize,
    pub seed: u64,
    pub redact_kgc: bool,
    pub crypto: CryptoSettings,
    pub data: DataSettings,
    pub training: TrainingSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            clients: 10,
            byzantine: 1,
            l: None,
            rule: RuleName::Krum,
            sumdis_score: false,
            attack: AttackName::None,
            lambda: 10.0,
            source: 0,
            target: 1,
            seed: 0,
            redact_kgc: false,
            crypto: CryptoSettings::default(),
            data: DataSettings::default(),
            training: TrainingSettings::default(),
        }
    }
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Encode(e.to_string()))
    }

    pub fn rule_config(&self) -> RuleConfig {
        let n = self.clients;
        let c = self.byzantine;
        let (rule, l) = match self.rule {
            RuleName::Krum => (Rule::Krum, 1),
            RuleName::Median => (Rule::Median, 1),
            RuleName::Mean => (Rule::Mean, n),
            RuleName::MultiKrum => (Rule::MultiKrum, self.l.unwrap_or(n.saturating_sub(2 * c + 3).max(1))),
        };
        let score = if self.sumdis_score { ScoreMode::SumDis } else { ScoreMode::Neighbours };
        RuleConfig { rule, c, l, score }
    }

    pub fn attack_config(&self) -> Option<AttackConfig> {
        let kind = match self.attack {
            AttackName::None => return None,
            AttackName::LabelFlip => AttackKind::LabelFlip,
            AttackName::Untargeted => AttackKind::Untargeted { lambda: self.lambda },
            AttackName::Targeted => AttackKind::Targeted { source: self.source, target: self.target },
        };
        Some(AttackConfig { kind, byzantine: self.byzantine })
    }

    pub fn model(&self, dim: usize, classes: usize) -> Model {
        match self.training.model {
            ModelKind::Logistic => Model::Logistic { dim, classes },
            ModelKind::Mlp => Model::Mlp { dim, hidden: self.training.hidden, classes },
            ModelKind::Linear => Model::Linear { dim },
        }
    }

    /// Core configuration for a model over `dim` features and `classes`
    /// labels. `planner` supplies the dynamic hoisting plan for a
    /// reduction width.
    pub fn experiment_config(
        &self,
        dim: usize,
        classes: usize,
        planner: impl FnOnce(&ParamSpec, usize) -> Result<HoistPlan>,
    ) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(self.model(dim, classes), self.rule_config());
        cfg.params = self.crypto.param_spec();
        cfg.attack = self.attack_config();
        cfg.sgd = SgdConfig { lr: self.training.lr, batch: self.training.batch, epochs: self.training.epochs };
        cfg.rounds = self.training.rounds;
        cfg.patience = (self.training.patience > 0).then_some(self.training.patience);
        cfg.seed = self.seed;
        cfg.lazy_relin = self.crypto.lazy_relin;
        cfg.pipeline = if self.crypto.plaintext { Pipeline::Plaintext } else { Pipeline::Encrypted };
        cfg.twin = self.crypto.twin;
        cfg.redact_kgc = self.redact_kgc;
        // reject bad rule settings before paying for calibration
        cfg.preflight(self.clients, None)?;
        cfg.reduction = if self.crypto.slot_sum_at_kgc {
            Reduction::AtKgc
        } else {
            Reduction::Server(match self.crypto.hoisting {
                HoistingMode::Off => Hoisting::Off,
                HoistingMode::Full => Hoisting::Full,
                HoistingMode::Dynamic if cfg.pipeline == Pipeline::Plaintext => Hoisting::Off,
                HoistingMode::Dynamic => Hoisting::Planned(planner(&cfg.params, cfg.reduction_width())?),
            })
        };
        cfg.preflight(self.clients, None)?;
        Ok(cfg)
    }
}
