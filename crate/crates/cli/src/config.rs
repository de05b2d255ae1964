//! Experiment configuration and the scenario presets.

use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use wiretap_core::channel::{ChannelFamily, Dmc, StateGenerator, TapStrategy};
use wiretap_core::codec::{Design, Link};
use wiretap_core::polar::{ProfileMode, SampleMode, SourceSpec};

use crate::CliError;

/// The six threat models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Degraded-free wiretap channel, no tapping.
    Wyner,
    /// Noiseless main channel, eavesdropper reads `alpha N` inputs only.
    Type2,
    /// Noisy main channel, eavesdropper reads `alpha N` inputs only.
    Type2Noisy,
    /// Noisy eavesdropper channel plus `alpha N` tapped inputs.
    Hybrid,
    /// Several possible main channels, fixed during a session.
    Compound,
    /// Eavesdropper channel state varies per use; a best channel is declared.
    AvcEve,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Wyner => "wyner",
            Scenario::Type2 => "type2",
            Scenario::Type2Noisy => "type2_noisy",
            Scenario::Hybrid => "hybrid",
            Scenario::Compound => "compound",
            Scenario::AvcEve => "avc_eve",
        }
    }
}

/// A channel given inline, by preset, or by a JSON file holding `{"rows": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSpec {
    Noiseless,
    PureNoise,
    Bsc(f64),
    Bec(f64),
    Table(Vec<Vec<f64>>),
    File(PathBuf),
}

impl ChannelSpec {
    pub fn resolve(&self, base: Option<&Path>) -> Result<Dmc, CliError> {
        let field = |e: String| CliError::Config(format!("channel {self:?}: {e}"));
        let check_p = |p: f64| if (0.0..=1.0).contains(&p) { Ok(p) } else { Err(field(format!("parameter {p} outside [0, 1]"))) };
        match self {
            ChannelSpec::Noiseless => Ok(Dmc::noiseless()),
            ChannelSpec::PureNoise => Ok(Dmc::pure_noise()),
            ChannelSpec::Bsc(p) => Ok(Dmc::bsc(check_p(*p)?)),
            ChannelSpec::Bec(e) => Ok(Dmc::bec(check_p(*e)?)),
            ChannelSpec::Table(rows) => Dmc::new(rows.clone()).map_err(|e| field(e.to_string())),
            ChannelSpec::File(path) => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full).map_err(|e| field(format!("{}: {e}", full.display())))?;
                serde_json::from_str(&text).map_err(|e| field(e.to_string()))
            }
        }
    }
}

fn default_l() -> usize {
    1
}
fn default_b() -> usize {
    1
}
fn default_beta() -> f64 {
    0.3
}
fn default_xi() -> f64 {
    0.01
}
fn default_aux_rate() -> f64 {
    0.5
}
fn default_profile() -> ProfileMode {
    ProfileMode::MonteCarlo { samples: 20_000, seed: 1 }
}
fn default_source() -> SourceSpec {
    SourceSpec::uniform()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Joint law of the auxiliary input and the channel input.
    #[serde(default = "default_source")]
    pub source: SourceSpec,
    /// Main channels; exactly one except in the compound scenario.
    #[serde(default)]
    pub mains: Vec<ChannelSpec>,
    /// Eavesdropper channels; several only in the varying-state scenario.
    #[serde(default)]
    pub eves: Vec<ChannelSpec>,
    /// Mixing weights over `eves` defining the declared best channel.
    #[serde(default)]
    pub best_eve: Option<Vec<f64>>,
    /// Per-use eavesdropper state pattern (indices into `eves`).
    #[serde(default)]
    pub eve_states: Option<Vec<usize>>,
    #[serde(default)]
    pub eve_state_weights: Option<Vec<f64>>,
    /// Which main channels carry the trial sessions (default: all).
    #[serde(default)]
    pub active_mains: Option<Vec<usize>>,
    #[serde(default = "default_tap")]
    pub tap: TapStrategy,
    pub k: usize,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default)]
    pub b0: Option<usize>,
    /// Tap fraction; `alpha N` must be an integer.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub backoff: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub key_len: Option<usize>,
    /// Chain multipliers for the compound scenario (default all ones).
    #[serde(default)]
    pub multipliers: Option<Vec<usize>>,
    #[serde(default)]
    pub sample_mode: SampleMode,
    #[serde(default = "default_aux_rate")]
    pub aux_rate: f64,
    #[serde(default)]
    pub aux_k: Option<usize>,
    #[serde(default = "default_profile")]
    pub profile: ProfileMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trials: usize,
    /// Run the exact leakage checks when the configuration is small enough.
    #[serde(default = "default_true")]
    pub leakage: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory that relative channel files are read from.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_tap() -> TapStrategy {
    TapStrategy::First
}

/// Everything a run needs, after the preset rules are applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub family: ChannelFamily,
    pub design: Design,
    pub link: Link,
    pub mains: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, k: usize) -> Self {
        ExperimentConfig {
            scenario,
            source: default_source(),
            mains: Vec::new(),
            eves: Vec::new(),
            best_eve: None,
            eve_states: None,
            eve_state_weights: None,
            active_mains: None,
            tap: TapStrategy::First,
            k,
            l: 1,
            b: 1,
            b0: None,
            alpha: 0.0,
            beta: default_beta(),
            backoff: 0.0,
            xi: default_xi(),
            r: None,
            key_len: None,
            multipliers: None,
            sample_mode: SampleMode::Random,
            aux_rate: default_aux_rate(),
            aux_k: None,
            profile: default_profile(),
            seed: 0,
            trials: 0,
            leakage: true,
            output: None,
            base_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Sets a numeric field by name, for sweeps.
    pub fn set_numeric(&mut self, axis: &str, value: f64) -> Result<(), CliError> {
        let whole = || -> Result<usize, CliError> {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(CliError::Config(format!("{axis} needs a non-negative integer, got {value}")));
            }
            Ok(value as usize)
        };
        match axis {
            "k" => self.k = whole()?,
            "l" => self.l = whole()?,
            "b" => self.b = whole()?,
            "b0" => self.b0 = Some(whole()?),
            "r" => self.r = Some(whole()?),
            "key_len" => self.key_len = Some(whole()?),
            "trials" => self.trials = whole()?,
            "seed" => self.seed = whole()? as u64,
            "alpha" => self.alpha = value,
            "beta" => self.beta = value,
            "backoff" => self.backoff = value,
            "xi" => self.xi = value,
            "aux_rate" => self.aux_rate = value,
            other => return Err(CliError::Config(format!("axis {other:?} is not a numeric configuration field"))),
        }
        Ok(())
    }

    fn channels(&self, specs: &[ChannelSpec]) -> Result<Vec<Dmc>, CliError> {
        specs.iter().map(|c| c.resolve(self.base_dir.as_deref())).collect()
    }

    /// Applies the scenario rules and builds the channel family, design and
    /// link.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{}: {field}: {msg}", self.scenario.name())));
        let mut mains = self.channels(&self.mains)?;
        let mut eves = self.channels(&self.eves)?;
        match self.scenario {
            Scenario::Type2 => {
                if mains.is_empty() {
                    mains.push(Dmc::noiseless());
                }
                if mains != [Dmc::noiseless()] {
                    return bad("mains", "the main channel is noiseless in this scenario".into());
                }
                if eves.is_empty() {
                    eves.push(Dmc::pure_noise());
                }
                if eves != [Dmc::pure_noise()] {
                    return bad("eves", "the eavesdropper only taps inputs; its channel is pure noise".into());
                }
            }
            Scenario::Type2Noisy => {
                if eves.is_empty() {
                    eves.push(Dmc::pure_noise());
                }
                if eves != [Dmc::pure_noise()] {
                    return bad("eves", "the eavesdropper only taps inputs; its channel is pure noise".into());
                }
            }
            Scenario::Wyner => {
                if self.alpha != 0.0 {
                    return bad("alpha", format!("no tapping in this scenario, got {}", self.alpha));
                }
            }
            Scenario::Hybrid | Scenario::Compound | Scenario::AvcEve => {}
        }
        if mains.is_empty() {
            return bad("mains", "at least one main channel is needed".into());
        }
        if eves.is_empty() {
            return bad("eves", "at least one eavesdropper channel is needed".into());
        }
        if self.scenario != Scenario::Compound && mains.len() != 1 {
            return bad("mains", format!("exactly one main channel, got {}", mains.len()));
        }
        if self.scenario != Scenario::AvcEve && eves.len() != 1 {
            return bad("eves", format!("exactly one eavesdropper channel, got {}", eves.len()));
        }
        if self.scenario != Scenario::AvcEve && (self.best_eve.is_some() || self.eve_states.is_some() || self.eve_state_weights.is_some()) {
            return bad("best_eve", "eavesdropper states only vary in the avc_eve scenario".into());
        }
        if self.scenario != Scenario::Compound && (self.multipliers.is_some() || self.active_mains.is_some()) {
            return bad("multipliers", "chain multipliers belong to the compound scenario".into());
        }
        let mut family = ChannelFamily::new(mains, eves).map_err(|e| CliError::Config(e.to_string()))?;
        if self.scenario == Scenario::AvcEve {
            let Some(w) = &self.best_eve else {
                return bad("best_eve", "a best eavesdropper channel must be declared".into());
            };
            family = family.with_best_eve(w.clone()).map_err(|e| CliError::Config(format!("avc_eve: best_eve: {e}")))?;
        }
        let multipliers = match self.scenario {
            Scenario::Compound => Some(self.multipliers.clone().unwrap_or_else(|| vec![1; family.mains.len()])),
            _ => None,
        };
        let group: usize = multipliers.as_ref().map_or(1, |m| m.iter().product());
        let n = (self.k * self.l * group) as u64;
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", format!("{} outside [0, 1]", self.alpha));
        }
        let taps = (self.alpha * n as f64).round();
        if (taps - self.alpha * n as f64).abs() > 1e-9 {
            return bad("alpha", format!("alpha N = {} is not an integer (N = {n})", self.alpha * n as f64));
        }
        let alpha = Ratio::new(taps as u64, n.max(1));
        let design = Design {
            k: self.k,
            l: self.l,
            b: self.b,
            alpha,
            beta: self.beta,
            xi: self.xi,
            backoff: self.backoff,
            b0: self.b0,
            r: self.r,
            key_len: self.key_len,
            multipliers,
            mode: self.sample_mode,
            aux_rate: self.aux_rate,
            aux_k: self.aux_k,
        };
        let eve_states = match (self.scenario, &self.eve_states, &self.eve_state_weights) {
            (Scenario::AvcEve, Some(_), Some(_)) => return bad("eve_states", "give a pattern or weights, not both".into()),
            (Scenario::AvcEve, _, Some(w)) => StateGenerator::Iid { main: vec![1.0], eve: w.clone() },
            (Scenario::AvcEve, Some(p), None) => StateGenerator::Explicit { main: vec![0], eve: p.clone() },
            (Scenario::AvcEve, None, None) => StateGenerator::Explicit { main: vec![0], eve: (0..family.eves.len()).collect() },
            _ => StateGenerator::Constant { main: 0, eve: 0 },
        };
        let active = self.active_mains.clone().unwrap_or_else(|| (0..family.mains.len()).collect());
        if let Some(&t) = active.iter().find(|&&t| t >= family.mains.len()) {
            return bad("active_mains", format!("index {t} outside the {} main channels", family.mains.len()));
        }
        let link = Link { family: family.clone(), states: eve_states, tap: self.tap.clone() };
        Ok(Resolved { family, design, link, mains: active })
    }
}
