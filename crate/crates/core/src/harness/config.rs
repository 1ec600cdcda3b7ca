//! Scenario configuration (TOML).
//!
//! ```toml
//! experiment = "bandit"        # bler_sweep | llr_stats | bandit
//! snr_db = [24.0]
//! jnr_db = [7.2]
//! lambda = [0.05, 0.1, 0.15]
//! steps = 500
//! replications = 20
//!
//! [slot]
//! frames_per_step = 1
//! codewords_per_slot = 16
//! ```
//!
//! Missing keys take the defaults of [`ScenarioConfig::default`]; unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::FeedbackModel;
use crate::grid::ModulationScheme;
use crate::jammer::JammingMethod;
use crate::victim5g::SlotConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    BlerSweep,
    LlrStats,
    Bandit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::BlerSweep => "bler_sweep",
            Experiment::LlrStats => "llr_stats",
            Experiment::Bandit => "bandit",
        }
    }
}

/// Which link a sweep runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// BPSK coded OFDM, two 162-bit codewords per symbol.
    CodedOfdm,
    /// 16QAM PDSCH-like slot with DMRS.
    NrSlot,
}

/// How the coded-OFDM receiver scales LLRs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Thermal noise variance only; the receiver is blind to the jammer.
    Thermal,
    /// Per-symbol noise variance estimated from the received samples.
    #[default]
    PerSymbol,
}

/// Which LLRs the statistics experiment collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlrSource {
    /// Demapper output, sign-corrected so positive means correct.
    Channel,
    /// Decoder posteriors, sign-corrected.
    #[default]
    Decoded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub max_iters: usize,
    /// Optional alist file replacing the built-in code of the link.
    pub code_file: Option<PathBuf>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            max_iters: crate::fec::DEFAULT_MAX_ITERS,
            code_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditConfig {
    pub obs_noise_var: f64,
    pub bler_target: f64,
    /// Also run a perfect-feedback agent as reference.
    pub baseline: bool,
    pub feedback_model: FeedbackModel,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig {
            obs_noise_var: 1.0,
            bler_target: 0.0,
            baseline: true,
            feedback_model: FeedbackModel::Flip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub link: LinkKind,
    pub snr_db: Vec<f64>,
    pub jnr_db: Vec<f64>,
    /// Sweep grid; bandit runs use `m` instead.
    pub rho: Vec<f64>,
    pub methods: Vec<JammingMethod>,
    pub schemes: Vec<ModulationScheme>,
    pub lambda: Vec<f64>,
    pub tau: f64,
    pub m: usize,
    pub steps: usize,
    pub replications: usize,
    pub seed: u64,
    pub blocks_per_point: usize,
    /// Include an unjammed reference point in sweeps.
    pub include_unjammed: bool,
    /// `None` picks coherent for sweeps and non-coherent for bandit runs.
    pub coherent: Option<bool>,
    pub noise_model: NoiseModel,
    pub llr_source: LlrSource,
    pub output: PathBuf,
    pub slot: SlotConfig,
    pub decoder: DecoderConfig,
    pub bandit: BanditConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            experiment: Experiment::BlerSweep,
            link: LinkKind::CodedOfdm,
            snr_db: vec![10.0, 12.0, 14.0],
            jnr_db: vec![10.0],
            rho: (1..=10).map(|i| i as f64 / 10.0).collect(),
            methods: JammingMethod::CODED_OFDM.to_vec(),
            schemes: vec![ModulationScheme::Awgn],
            lambda: vec![0.05, 0.1, 0.15],
            tau: 0.5,
            m: 10,
            steps: 1000,
            replications: 20,
            seed: 1,
            blocks_per_point: 500,
            include_unjammed: true,
            coherent: None,
            noise_model: NoiseModel::PerSymbol,
            llr_source: LlrSource::Decoded,
            output: PathBuf::from("out"),
            slot: SlotConfig::default(),
            decoder: DecoderConfig::default(),
            bandit: BanditConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Defaults for an experiment family.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let base = ScenarioConfig {
            experiment,
            ..ScenarioConfig::default()
        };
        match experiment {
            Experiment::BlerSweep => base,
            Experiment::LlrStats => ScenarioConfig {
                snr_db: vec![15.0],
                rho: vec![0.1, 0.5, 1.0],
                methods: vec![JammingMethod::Subcarrier, JammingMethod::Symbol],
                blocks_per_point: 700,
                ..base
            },
            Experiment::Bandit => ScenarioConfig {
                link: LinkKind::NrSlot,
                snr_db: vec![24.0],
                jnr_db: vec![7.2],
                methods: JammingMethod::SLOT.to_vec(),
                schemes: ModulationScheme::JAMMING.to_vec(),
                ..base
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ScenarioConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Desk-check profile: 100 blocks per point, 200 steps, 5 replications.
    pub fn quick(mut self) -> Self {
        self.blocks_per_point = 100;
        self.steps = 200;
        self.replications = 5;
        self
    }

    pub fn is_coherent(&self) -> bool {
        self.coherent.unwrap_or(self.experiment != Experiment::Bandit)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replications == 0 || self.steps == 0 || self.blocks_per_point == 0 {
            return fail("replications, steps and blocks_per_point must be at least 1".into());
        }
        if self.m == 0 {
            return fail("m must be at least 1".into());
        }
        if let Some(r) = self.rho.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
            return fail(format!("rho {r} outside (0, 1]"));
        }
        if let Some(l) = self.lambda.iter().find(|&&l| !(0.0..=1.0).contains(&l)) {
            return fail(format!("lambda {l} outside [0, 1]"));
        }
        if self.tau < 0.0 {
            return fail("tau must be nonnegative".into());
        }
        if self.snr_db.is_empty() || self.jnr_db.is_empty() {
            return fail("snr_db and jnr_db need at least one value".into());
        }
        if self.methods.is_empty() || self.schemes.is_empty() {
            return fail("methods and schemes need at least one entry".into());
        }
        if self.experiment == Experiment::Bandit && self.link != LinkKind::NrSlot {
            return fail("bandit runs use the nr_slot link".into());
        }
        if self.bandit.obs_noise_var.is_nan() || self.bandit.obs_noise_var <= 0.0 {
            return fail("bandit.obs_noise_var must be positive".into());
        }
        if self.decoder.max_iters == 0 {
            return fail("decoder.max_iters must be positive".into());
        }
        self.slot.validate().map_err(|e| Error::Config(e.to_string()))
    }
}
