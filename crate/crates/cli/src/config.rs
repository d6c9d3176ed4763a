//! Experiment config files.
//!
//! ```toml
//! [sim]              # desk-scale cell, any SimConfig field may be overridden
//! num_ues = 5
//! num_rbgs = 1
//!
//! [scenario]
//! scheduler = "pf"   # pf | maxci | rr | drl (baseline mode)
//! num_deployments = 20
//! window = 500
//! warmup = 100
//! master_seed = 1
//!
//! [preference]       # weights of THP, JFI and PDR
//! alpha = 1.0
//!
//! [a2c]              # or [ga] or [pla]; exactly the one the mode needs
//! iterations = 4000
//! ```
//!
//! Unknown keys anywhere are errors.

use std::path::PathBuf;

use schedlab::a2c::A2cConfig;
use schedlab::genie::{GaConfig, PlaConfig};
use schedlab::scenario::Scenario;
use schedlab::score::Preference;
use schedlab::sim::{stable_hash, McsEntry, SimConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("mode `{mode}` needs a [{section}] section")]
    MissingSection { mode: &'static str, section: &'static str },
    #[error("section [{section}] is not used by mode `{mode}`")]
    ExtraSection { mode: &'static str, section: &'static str },
}

fn field(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// `[sim]`: the desk-scale cell for `num_ues` x `num_rbgs`, with overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub num_ues: usize,
    pub num_rbgs: usize,
    pub arrival_rate: Option<f64>,
    pub packet_size: Option<u32>,
    pub buffer_capacity: Option<usize>,
    pub max_delay: Option<u32>,
    pub target_bler: Option<f64>,
    pub olla_step_up: Option<f64>,
    pub olla_step_down: Option<f64>,
    pub ema_time_constant: Option<f64>,
    pub tti_duration: Option<f64>,
    pub mcs_table: Option<Vec<McsEntry>>,
    pub rbg_symbols: Option<f64>,
    pub bler_slope: Option<f64>,
    pub mean_snr_per_ue: Option<Vec<f64>>,
    /// 0 selects a static channel.
    pub doppler_block_len: Option<u32>,
}

impl SimSection {
    pub fn build(&self) -> Result<SimConfig, ConfigError> {
        let mut c = SimConfig::desk_scale(self.num_ues, self.num_rbgs);
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        set!(
            arrival_rate, packet_size, buffer_capacity, max_delay, target_bler, olla_step_up,
            ema_time_constant, tti_duration, mcs_table, rbg_symbols, bler_slope, mean_snr_per_ue
        );
        if self.olla_step_down.is_some() {
            c.olla_step_down = self.olla_step_down;
        }
        if let Some(d) = self.doppler_block_len {
            c.doppler_block_len = (d > 0).then_some(d);
        }
        c.validate().map_err(|e| match e {
            schedlab::sim::SimError::InvalidConfig { field: f, reason } => field(&format!("sim.{f}"), reason),
            other => ConfigError::Parse(other.to_string()),
        })?;
        Ok(c)
    }
}

fn default_scheduler() -> String {
    "pf".into()
}
fn default_deployments() -> u32 {
    20
}
fn default_window() -> u32 {
    500
}
fn default_warmup() -> u32 {
    100
}
fn default_snr() -> Option<[f64; 2]> {
    Some([0.0, 20.0])
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "default_scheduler")]
    pub scheduler: String,
    #[serde(default = "default_deployments")]
    pub num_deployments: u32,
    /// KPI window (and genie horizon), TTIs.
    #[serde(default = "default_window")]
    pub window: u32,
    #[serde(default = "default_warmup")]
    pub warmup: u32,
    #[serde(default)]
    pub master_seed: u64,
    /// Range each deployment draws its UE mean SNRs from, dB. Set
    /// `randomize_snr = false` to keep the `[sim]` SNRs for every deployment.
    #[serde(default = "default_snr")]
    pub deployment_snr_db: Option<[f64; 2]>,
    #[serde(default = "yes")]
    pub randomize_snr: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn yes() -> bool {
    true
}

/// `[a2c]`: [`A2cConfig`] without the seed (derived from the master seed)
/// and the reward weights (taken from `[preference]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cSection {
    pub gamma: f64,
    pub n_steps: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub num_envs: usize,
    pub iterations: u64,
    pub lr: f64,
    pub lr_decay_at: Option<u64>,
    pub lr_decay_factor: f64,
    pub hidden: Vec<usize>,
    pub eval_every: u64,
    pub eval_seeds: u32,
}

impl Default for A2cSection {
    fn default() -> Self {
        let d = A2cConfig::default();
        Self {
            gamma: d.gamma,
            n_steps: d.n_steps,
            entropy_coef: d.entropy_coef,
            value_coef: d.value_coef,
            num_envs: d.num_envs,
            iterations: d.iterations,
            lr: d.lr,
            lr_decay_at: d.lr_decay_at,
            lr_decay_factor: d.lr_decay_factor,
            hidden: d.hidden,
            eval_every: d.eval_every,
            eval_seeds: d.eval_seeds,
        }
    }
}

impl A2cSection {
    pub fn build(&self, reward: Preference, rng_seed: u64) -> A2cConfig {
        A2cConfig {
            gamma: self.gamma,
            n_steps: self.n_steps,
            reward,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            num_envs: self.num_envs,
            iterations: self.iterations,
            lr: self.lr,
            lr_decay_at: self.lr_decay_at,
            lr_decay_factor: self.lr_decay_factor,
            hidden: self.hidden.clone(),
            eval_every: self.eval_every,
            eval_seeds: self.eval_seeds,
            rng_seed,
        }
    }
}

/// `[ga]`: [`GaConfig`] without the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population: usize,
    pub generations: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    /// Put the PF, max C/I and round-robin schedules into the initial population.
    pub seed_baselines: bool,
}

impl Default for GaSection {
    fn default() -> Self {
        let d = GaConfig::default();
        Self {
            population: d.population,
            generations: d.generations,
            p_c: d.p_c,
            p_m: d.p_m,
            eta_c: d.eta_c,
            eta_m: d.eta_m,
            seed_baselines: false,
        }
    }
}

impl GaSection {
    pub fn build(&self, rng_seed: u64) -> GaConfig {
        GaConfig {
            population: self.population,
            generations: self.generations,
            p_c: self.p_c,
            p_m: self.p_m,
            eta_c: self.eta_c,
            eta_m: self.eta_m,
            rng_seed,
        }
    }
}

/// `[pla]`: list size; selection uses `[preference]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaSection {
    pub list_size: usize,
}

impl Default for PlaSection {
    fn default() -> Self {
        Self {
            list_size: PlaConfig::default().list_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub preference: Preference,
    pub a2c: Option<A2cSection>,
    pub ga: Option<GaSection>,
    pub pla: Option<PlaSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    GenieGa,
    GeniePla,
    Baseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
            Mode::GenieGa => "genie-ga",
            Mode::GeniePla => "genie-pla",
            Mode::Baseline => "baseline",
        }
    }

    fn section(self) -> Option<&'static str> {
        match self {
            Mode::Train | Mode::Eval => Some("a2c"),
            Mode::GenieGa => Some("ga"),
            Mode::GeniePla => Some("pla"),
            Mode::Baseline => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.sim.build()?;
        cfg.check_scenario()?;
        Ok(cfg)
    }

    fn check_scenario(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if !matches!(s.scheduler.as_str(), "pf" | "maxci" | "rr" | "drl") {
            return Err(field("scenario.scheduler", "expected pf, maxci, rr or drl"));
        }
        if s.num_deployments == 0 {
            return Err(field("scenario.num_deployments", "must be at least 1"));
        }
        if s.window == 0 {
            return Err(field("scenario.window", "must be at least 1"));
        }
        if let Some([lo, hi]) = s.deployment_snr_db {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(field("scenario.deployment_snr_db", "needs finite [low, high] with low <= high"));
            }
        }
        let p = &self.preference;
        if ![p.alpha, p.beta, p.delta].iter().all(|v| v.is_finite()) {
            return Err(field("preference", "weights must be finite"));
        }
        Ok(())
    }

    /// Exactly the solver section `mode` needs may be present.
    pub fn check_mode(&self, mode: Mode) -> Result<(), ConfigError> {
        let present = [
            ("a2c", self.a2c.is_some()),
            ("ga", self.ga.is_some()),
            ("pla", self.pla.is_some()),
        ];
        let want = mode.section();
        for (name, is) in present {
            if is && Some(name) != want {
                return Err(ConfigError::ExtraSection {
                    mode: mode.name(),
                    section: name,
                });
            }
            if !is && Some(name) == want {
                return Err(ConfigError::MissingSection {
                    mode: mode.name(),
                    section: name,
                });
            }
        }
        Ok(())
    }

    /// The scenario for a cell with `num_rbgs` RBGs (defaults to `[sim]`).
    /// A changed RBG count scales the arrival rate with it, keeping the
    /// per-RBG load constant.
    pub fn scenario(&self, num_rbgs: Option<usize>) -> Result<Scenario, ConfigError> {
        let mut base = self.sim.build()?;
        if let Some(b) = num_rbgs {
            if b == 0 {
                return Err(field("transfer-rbgs", "must be at least 1"));
            }
            base.arrival_rate *= b as f64 / base.num_rbgs as f64;
            base.num_rbgs = b;
        }
        let s = &self.scenario;
        let mut sc = Scenario::new(base);
        sc.snr_range_db = if s.randomize_snr {
            s.deployment_snr_db.map(|[a, b]| (a, b))
        } else {
            None
        };
        sc.window = s.window;
        sc.warmup = s.warmup;
        Ok(sc)
    }

    /// Identity of the experimental setup that results are comparable on:
    /// the cell, the scenario protocol and the master seed.
    pub fn sim_hash(&self, scenario: &Scenario, master_seed: u64) -> String {
        let mut bytes = scenario.base.fingerprint().to_le_bytes().to_vec();
        bytes.extend_from_slice(&scenario.window.to_le_bytes());
        bytes.extend_from_slice(&scenario.warmup.to_le_bytes());
        match scenario.snr_range_db {
            Some((a, b)) => {
                bytes.push(1);
                bytes.extend_from_slice(&a.to_le_bytes());
                bytes.extend_from_slice(&b.to_le_bytes());
            }
            None => bytes.push(0),
        }
        bytes.extend_from_slice(&self.scenario.num_deployments.to_le_bytes());
        bytes.extend_from_slice(&master_seed.to_le_bytes());
        format!("{:016x}", stable_hash(&bytes))
    }
}
