//! Experiment configuration files.
//!
//! A config is a JSON object with a `kind` discriminator. Every other field
//! is optional and defaults to the reference operating point (γ = 0.5,
//! ζ = 0.5, P_S = 0.9, P_CNOT = 0.25, P_QND = 0.125, η = 0.8; all channel
//! angles uniform over the full circle). Any string of the form `"deg:<x>"`
//! in the document is read as `x` degrees and converted to radians.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use timebin::montecarlo::{ChannelDistribution, Experiment, ParamDistribution};
use timebin::RepeaterParams;

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 0x7B1_5EED;
pub const DEFAULT_ETA_POINTS: [f64; 2] = [0.3, 0.8];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad angle {0:?}: expected \"deg:<number>\"")]
    Angle(String),
    #[error("config kind {found} does not match subcommand {expected}")]
    KindMismatch { expected: Kind, found: Kind },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] timebin::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Distribute,
    Repeater,
    Sweep,
    CompareKwd,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Distribute => "distribute",
            Kind::Repeater => "repeater",
            Kind::Sweep => "sweep",
            Kind::CompareKwd => "compare-kwd",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// θ of every channel, pinned to the sweep value.
    Theta,
    Theta1,
    Theta2,
    Eta,
    Zeta,
    PSource,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    /// Experiment evaluated at every point.
    #[serde(default = "default_target")]
    pub target: Kind,
}

fn default_target() -> Kind {
    Kind::Distribute
}

impl SweepAxis {
    pub fn points(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * k as f64 / last
                }
            })
            .collect()
    }
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_eta_points() -> Vec<f64> {
    DEFAULT_ETA_POINTS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// One entry applies to every channel; otherwise one per photon.
    #[serde(default)]
    pub channels: Vec<ChannelDistribution>,
    #[serde(default)]
    pub repeater: RepeaterParams,
    /// Require the outer photons to be detected too (η each).
    #[serde(default)]
    pub detect_endpoints: bool,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
    /// Detector efficiencies tabulated by `compare-kwd`.
    #[serde(default = "default_eta_points")]
    pub eta_points: Vec<f64>,
    #[serde(default)]
    pub format: Format,
}

impl ExperimentConfig {
    pub fn defaults(kind: Kind) -> Self {
        let sweep = (kind == Kind::Sweep).then_some(SweepAxis {
            param: SweepParam::Theta,
            lo: 0.0,
            hi: FRAC_PI_2,
            steps: 5,
            target: Kind::Distribute,
        });
        ExperimentConfig {
            kind,
            channels: Vec::new(),
            repeater: RepeaterParams::default(),
            detect_endpoints: false,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            sweep,
            eta_points: default_eta_points(),
            format: Format::Csv,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials < 1 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        match (&self.sweep, self.kind) {
            (None, Kind::Sweep) => return Err(ConfigError::Invalid("sweep config needs a `sweep` axis".into())),
            (Some(_), k) if k != Kind::Sweep => {
                return Err(ConfigError::Invalid(format!("`sweep` axis given for kind {k}")))
            }
            (Some(axis), _) => {
                if axis.steps < 2 {
                    return Err(ConfigError::Invalid("sweep needs at least 2 steps".into()));
                }
                if axis.target == Kind::Sweep {
                    return Err(ConfigError::Invalid("sweep target cannot itself be a sweep".into()));
                }
                if !(axis.lo.is_finite() && axis.hi.is_finite()) {
                    return Err(ConfigError::Invalid("sweep bounds must be finite".into()));
                }
                for value in axis.points() {
                    let point = self.at_point(axis.param, value);
                    point.repeater.validate()?;
                    for c in &point.channels {
                        c.validate()?;
                    }
                }
            }
            (None, _) => {}
        }
        if !matches!(self.channels.len(), 0 | 1 | 2 | 4) {
            return Err(ConfigError::Invalid(format!(
                "expected 1, 2 or 4 channel entries, got {}",
                self.channels.len()
            )));
        }
        if self.effective_kind() == Kind::Repeater && self.channels.len() == 2 {
            return Err(ConfigError::Invalid("repeater experiments need 1 or 4 channel entries".into()));
        }
        if self.eta_points.is_empty() {
            return Err(ConfigError::Invalid("eta_points must not be empty".into()));
        }
        for c in &self.channels {
            c.validate()?;
        }
        self.repeater.validate()?;
        for &eta in &self.eta_points {
            RepeaterParams { eta, ..self.repeater }.validate()?;
        }
        Ok(())
    }

    /// The experiment actually run: the sweep target for sweeps.
    pub fn effective_kind(&self) -> Kind {
        match (&self.sweep, self.kind) {
            (Some(axis), Kind::Sweep) => axis.target,
            (_, k) => k,
        }
    }

    /// Channel distribution for photon `k` (0-based).
    pub fn channel(&self, k: usize) -> ChannelDistribution {
        match self.channels.len() {
            0 => ChannelDistribution::default(),
            1 => self.channels[0],
            _ => self.channels.get(k).copied().unwrap_or_default(),
        }
    }

    pub fn distribution_experiment(&self) -> Experiment {
        Experiment::Distribution {
            channels: [self.channel(0), self.channel(1)],
        }
    }

    pub fn repeater_experiment(&self) -> Experiment {
        Experiment::Repeater {
            channels: [0, 1, 2, 3].map(|k| self.channel(k)),
            params: self.repeater,
            detect_endpoints: self.detect_endpoints,
        }
    }

    /// Copy with the swept parameter set to `value`.
    pub fn at_point(&self, param: SweepParam, value: f64) -> ExperimentConfig {
        let mut out = self.clone();
        let pin = |c: &mut ChannelDistribution| c.theta = ParamDistribution::Fixed(value);
        let mut channels: Vec<ChannelDistribution> = (0..4).map(|k| self.channel(k)).collect();
        match param {
            SweepParam::Theta => channels.iter_mut().for_each(pin),
            SweepParam::Theta1 => pin(&mut channels[0]),
            SweepParam::Theta2 => pin(&mut channels[1]),
            SweepParam::Eta => out.repeater.eta = value,
            SweepParam::Zeta => out.repeater.zeta = value,
            SweepParam::PSource => out.repeater.p_source = value,
            SweepParam::Gamma => out.repeater.gamma = value,
        }
        out.channels = channels;
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut value: Value = serde_json::from_str(text)?;
        convert_degrees(&mut value)?;
        let config: ExperimentConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }
}

fn convert_degrees(value: &mut Value) -> Result<(), ConfigError> {
    match value {
        Value::String(s) => {
            if let Some(deg) = s.strip_prefix("deg:") {
                let x: f64 = deg.trim().parse().map_err(|_| ConfigError::Angle(s.clone()))?;
                let rad = x.to_radians();
                *value = serde_json::Number::from_f64(rad)
                    .map(Value::Number)
                    .ok_or_else(|| ConfigError::Angle(s.clone()))?;
            }
        }
        Value::Array(items) => items.iter_mut().try_for_each(convert_degrees)?,
        Value::Object(map) => map.values_mut().try_for_each(convert_degrees)?,
        _ => {}
    }
    Ok(())
}

/// `E[cos²θ]` of channel `k`.
pub fn mean_cos2(config: &ExperimentConfig, k: usize) -> f64 {
    config.channel(k).theta.mean_cos2()
}
