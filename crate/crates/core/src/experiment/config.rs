use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{BanditEnv, RewardKind};
use crate::error::{Error, Result};

/// Reward family name as written in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Gaussian,
    Bernoulli,
    PointMass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Shared(f64),
    PerArm(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub means: Vec<f64>,
    pub kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Sigma>,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_r_max() -> f64 {
    1.0
}

impl EnvConfig {
    pub fn build(&self) -> Result<BanditEnv> {
        let kind = match self.kind {
            KindName::Gaussian => {
                let sigma = match &self.sigma {
                    Some(Sigma::Shared(s)) => vec![*s; self.means.len()],
                    Some(Sigma::PerArm(v)) => v.clone(),
                    None => return Err(Error::Config("gaussian arms need sigma".into())),
                };
                RewardKind::Gaussian { sigma }
            }
            KindName::Bernoulli => RewardKind::Bernoulli,
            KindName::PointMass => RewardKind::PointMass,
        };
        BanditEnv::new(self.means.clone(), kind, self.r_max)
    }
}

/// How much diagnostic state a run keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagLevel {
    #[default]
    Off,
    /// Accumulated every step, stored at checkpoints.
    Checkpointed,
    /// Accumulated and stored at every step.
    PerStep,
}

impl std::str::FromStr for DiagLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Self::Off),
            "ckpt" | "checkpointed" => Ok(Self::Checkpointed),
            "step" | "per_step" => Ok(Self::PerStep),
            other => Err(Error::Config(format!(
                "unknown diagnostics level {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub etas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    #[serde(default = "default_ratio")]
    pub checkpoint_ratio: f64,
    #[serde(default)]
    pub diagnostics: DiagLevel,
    /// Initial logits; all zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_init: Option<Vec<f64>>,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_ratio() -> f64 {
    1.1
}

pub(crate) const DEFAULT_MEANS: [f64; 4] = [0.2, 0.05, -0.1, -0.4];
pub(crate) const TWO_ACTION_MEANS: [f64; 2] = [-0.05, -0.25];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let env = self.env.build()?;
        if self.etas.is_empty() {
            return Err(Error::Config("no learning rates".into()));
        }
        if let Some(eta) = self.etas.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!(
                "learning rate {eta} is not positive"
            )));
        }
        for (i, a) in self.etas.iter().enumerate() {
            if self.etas[..i].contains(a) {
                return Err(Error::Config(format!("learning rate {a} listed twice")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(Error::Config(format!("seed {s} listed twice")));
            }
        }
        if !(self.checkpoint_ratio.is_finite() && self.checkpoint_ratio > 1.0) {
            return Err(Error::Config("checkpoint_ratio must exceed 1".into()));
        }
        if let Some(theta) = &self.theta_init {
            if theta.len() != env.k() {
                return Err(Error::Config(format!(
                    "theta_init has {} entries for {} arms",
                    theta.len(),
                    env.k()
                )));
            }
            if theta.iter().any(|t| !t.is_finite()) {
                return Err(Error::Config("theta_init must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn theta_init(&self) -> Vec<f64> {
        self.theta_init
            .clone()
            .unwrap_or_else(|| vec![0.0; self.env.means.len()])
    }
}

/// The four-arm Gaussian setup: means (0.2, 0.05, -0.1, -0.4), sigma 0.1,
/// learning rates {1, 10, 100, 1000}, seeds 0..10, 10^6 steps, zero logits.
pub fn paper_default_config() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig {
            means: DEFAULT_MEANS.to_vec(),
            kind: KindName::Gaussian,
            sigma: Some(Sigma::Shared(0.1)),
            r_max: 1.0,
        },
        etas: vec![1.0, 10.0, 100.0, 1000.0],
        seeds: (0..10).collect(),
        horizon: 1_000_000,
        checkpoint_ratio: default_ratio(),
        diagnostics: DiagLevel::Off,
        theta_init: None,
        master_seed: 0,
    }
}

/// Two Gaussian arms with means (-0.05, -0.25); everything else as in
/// [`paper_default_config`].
pub fn two_action_config() -> ExperimentConfig {
    let mut config = paper_default_config();
    config.env.means = TWO_ACTION_MEANS.to_vec();
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_values() {
        let config = paper_default_config();
        config.validate().unwrap();
        let env = config.env.build().unwrap();
        assert_eq!(env.means(), &[0.2, 0.05, -0.1, -0.4]);
        assert!((env.gap() - 0.15).abs() < 1e-15);
        assert_eq!(env.optimal_arm(), 0);
        assert_eq!(config.etas, vec![1.0, 10.0, 100.0, 1000.0]);
        assert_eq!(config.seeds.len(), 10);
        assert_eq!(config.horizon, 1_000_000);
        assert_eq!(config.theta_init(), vec![0.0; 4]);
    }

    #[test]
    fn two_action_values() {
        let env = two_action_config().env.build().unwrap();
        assert_eq!(env.means(), &[-0.05, -0.25]);
        assert!((env.gap() - 0.2).abs() < 1e-15);
        assert_eq!(env.optimal_arm(), 0);
        assert!(!env.bounded_support());
    }

    #[test]
    fn toml_round_trip() {
        let config = paper_default_config();
        let back = ExperimentConfig::from_toml_str(&config.to_toml_string()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn parses_minimal_file() {
        let text = r#"
            etas = [1.0]
            seeds = [3, 4]
            horizon = 100
            diagnostics = "per_step"

            [env]
            means = [0.5, -0.5]
            kind = "bernoulli"
        "#;
        let config = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(config.diagnostics, DiagLevel::PerStep);
        assert_eq!(config.env.r_max, 1.0);
        assert_eq!(config.checkpoint_ratio, 1.1);
    }

    #[test]
    fn rejects_invalid_configs() {
        let mut c = paper_default_config();
        c.seeds = vec![1, 1];
        assert!(c.validate().is_err());
        let mut c = paper_default_config();
        c.etas = vec![-1.0];
        assert!(c.validate().is_err());
        let mut c = paper_default_config();
        c.theta_init = Some(vec![0.0; 3]);
        assert!(c.validate().is_err());
        let mut c = paper_default_config();
        c.env.means = vec![0.1, 0.1, 0.0, -0.1];
        assert!(c.validate().is_err());
        let mut c = paper_default_config();
        c.env.sigma = None;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml_str("horizon = 'x'").is_err());
    }

    #[test]
    fn diag_level_names() {
        assert_eq!("off".parse::<DiagLevel>().unwrap(), DiagLevel::Off);
        assert_eq!(
            "ckpt".parse::<DiagLevel>().unwrap(),
            DiagLevel::Checkpointed
        );
        assert_eq!("step".parse::<DiagLevel>().unwrap(), DiagLevel::PerStep);
        assert!("all".parse::<DiagLevel>().is_err());
    }
}
