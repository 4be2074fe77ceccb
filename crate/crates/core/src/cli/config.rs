//! Experiment configuration files.
//!
//! ```toml
//! version = 1
//! algorithm = "symm-pmd"        # symm-pmd | ipmd | td-eval | exact-pmd
//! seed = 7
//! output_dir = "runs/arps"      # optional; --out overrides
//!
//! [env]                          # inline environment spec, or
//! kind = "arps"                  # env_file = "env.toml"
//! n_agents = 200
//! horizon = 10
//!
//! [pmd]                          # symm-pmd and ipmd
//! epochs = 200
//! tau = 0.1
//! [pmd.td]
//! epochs = 100
//!
//! [eval]
//! mfg_every = 5
//! [eval.nplayer]
//! episodes = 2000
//! ```
//!
//! Unknown keys are errors. Relative paths are resolved against the
//! directory of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{toml_error, EnvFile, EnvSpec};
use crate::error::{Error, Result};
use crate::learn::{EvalConfig, PmdConfig, TdConfig};
use crate::mfg::{ExactPmdConfig, Schedule};
use crate::symmetry::AlphaBetaMode;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SymmPmd,
    Ipmd,
    TdEval,
    ExactPmd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactPmdSection {
    pub epochs: usize,
    pub tau: f64,
    #[serde(default = "Schedule::default_learning_rate")]
    pub lr_schedule: Schedule,
    #[serde(default = "Schedule::default_mixing")]
    pub mixing_schedule: Schedule,
    /// Run on the companion with rewards mapped onto `[0, 1]`.
    #[serde(default = "yes")]
    pub normalize_rewards: bool,
}

fn yes() -> bool {
    true
}

impl ExactPmdSection {
    pub fn to_config(&self) -> ExactPmdConfig {
        ExactPmdConfig {
            epochs: self.epochs,
            tau: self.tau,
            lr_schedule: self.lr_schedule,
            mixing_schedule: self.mixing_schedule,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_beta: Option<AlphaBetaMode>,
    #[serde(default)]
    pub dump_trajectories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmd: Option<PmdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td: Option<TdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_pmd: Option<ExactPmdSection>,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    /// Parses and validates a configuration. `base` resolves relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        for path in [&mut cfg.env_file, &mut cfg.policy_file, &mut cfg.output_dir]
            .into_iter()
            .flatten()
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.env, &self.env_file) {
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("give either [env] or env_file, not both".into())),
            (None, None) => return Err(Error::InvalidConfig("missing [env] or env_file".into())),
            (None, Some(p)) if !p.exists() => {
                return Err(Error::InvalidConfig(format!("env_file {} does not exist", p.display())))
            }
            _ => {}
        }
        if let Some(p) = &self.policy_file {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("policy_file {} does not exist", p.display())));
            }
        }
        let missing = |section: &str| Error::InvalidConfig(format!("algorithm {:?} needs a [{section}] block", self.algorithm));
        match self.algorithm {
            Algorithm::SymmPmd | Algorithm::Ipmd => self.pmd.as_ref().ok_or_else(|| missing("pmd"))?.validate()?,
            Algorithm::TdEval => self.td.as_ref().ok_or_else(|| missing("td"))?.validate()?,
            Algorithm::ExactPmd => {
                self.exact_pmd.as_ref().ok_or_else(|| missing("exact_pmd"))?;
            }
        }
        if self.eval.nplayer.episodes == 0 {
            return Err(Error::InvalidConfig("eval.nplayer.episodes must be positive".into()));
        }
        Ok(())
    }

    /// The environment file this config refers to (inline spec or loaded file).
    pub fn env_file_contents(&self) -> Result<EnvFile> {
        match (&self.env, &self.env_file) {
            (Some(spec), None) => Ok(EnvFile {
                version: crate::envs::ENV_FILE_VERSION,
                spec: Some(spec.clone()),
                description: None,
            }),
            (None, Some(path)) => EnvFile::parse(&std::fs::read_to_string(path)?),
            _ => Err(Error::InvalidConfig("give exactly one of [env] or env_file".into())),
        }
    }

    pub fn pmd_config(&self) -> Option<PmdConfig> {
        self.pmd.clone().map(|mut p| {
            p.eval = self.eval.clone();
            p
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
algorithm = "symm-pmd"
seed = 3

[env]
kind = "symmetric-test"
n_agents = 10

[pmd]
epochs = 0
tau = 0.1
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::SymmPmd);
        assert_eq!(cfg.pmd.unwrap().td.epochs, 500);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = MINIMAL.replace("tau = 0.1", "tau = 0.1\nlearning_rate = 2");
        match ExperimentConfig::parse(&text, Path::new(".")) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 13, "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_block_is_rejected() {
        let text = MINIMAL.replace("algorithm = \"symm-pmd\"", "algorithm = \"td-eval\"");
        assert!(matches!(ExperimentConfig::parse(&text, Path::new(".")), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        let back = ExperimentConfig::parse(&cfg.to_toml().unwrap(), Path::new(".")).unwrap();
        assert_eq!(back, cfg);
    }
}
