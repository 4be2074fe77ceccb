//! Benchmark environments. Each one yields an N-player [`DynamicGame`]
//! together with its analytic mean-field companion.
//!
//! Environments are described in two layers: an [`EnvSpec`] holds the
//! user-facing configuration (sizes, parameter ranges, seed) and an
//! [`EnvDescription`] holds every drawn per-agent parameter. Descriptions
//! serialize to TOML and rebuild a bit-identical game.

pub mod arps;
pub mod asis;
pub mod congestion;
pub mod tabular;

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame};

pub use arps::{make_arps, ArpsConfig, ArpsGame, ArpsMfg, ArpsParams};
pub use asis::{make_asis, AsisConfig, AsisGame, AsisMfg, AsisParams};
pub use congestion::{make_congestion, CongestionConfig, CongestionGame, CongestionMfg, CongestionParams, CurveSpec};
pub use tabular::{make_symmetric_test, SymmetricGame, SymmetricTestConfig, TabularMfg, TabularParams};

/// Version written into environment description files.
pub const ENV_FILE_VERSION: u32 = 1;

/// Closed interval `[lo, hi]` from which a per-agent parameter is drawn
/// uniformly. `lo == hi` yields a constant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn constant(value: f64) -> Self {
        Self { lo: value, hi: value }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::InvalidConfig(format!(
                "{name}: expected finite lo <= hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// User-facing environment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSpec {
    Arps(ArpsConfig),
    Asis(AsisConfig),
    Congestion(CongestionConfig),
    SymmetricTest(SymmetricTestConfig),
}

/// Fully drawn environment: everything needed to rebuild the game exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvDescription {
    Arps(ArpsParams),
    Asis(AsisParams),
    Congestion(CongestionParams),
    SymmetricTest(SymmetricDescription),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricDescription {
    pub n_agents: usize,
    pub params: TabularParams,
}

/// A built environment.
#[derive(Clone)]
pub struct BuiltEnv {
    pub game: Arc<dyn DynamicGame>,
    pub mfg: Arc<dyn MeanFieldGame>,
    pub description: EnvDescription,
}

impl std::fmt::Debug for BuiltEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltEnv").field("kind", &self.description.kind()).finish()
    }
}

impl EnvSpec {
    pub fn draw(&self) -> Result<EnvDescription> {
        Ok(match self {
            EnvSpec::Arps(c) => EnvDescription::Arps(c.draw()?),
            EnvSpec::Asis(c) => EnvDescription::Asis(c.draw()?),
            EnvSpec::Congestion(c) => EnvDescription::Congestion(c.draw()?),
            EnvSpec::SymmetricTest(c) => EnvDescription::SymmetricTest(SymmetricDescription {
                n_agents: c.n_agents,
                params: c.draw()?,
            }),
        })
    }

    pub fn build(&self) -> Result<BuiltEnv> {
        self.draw()?.build()
    }
}

impl EnvDescription {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvDescription::Arps(_) => "arps",
            EnvDescription::Asis(_) => "asis",
            EnvDescription::Congestion(_) => "congestion",
            EnvDescription::SymmetricTest(_) => "symmetric-test",
        }
    }

    pub fn build(&self) -> Result<BuiltEnv> {
        let (game, mfg): (Arc<dyn DynamicGame>, Arc<dyn MeanFieldGame>) = match self {
            EnvDescription::Arps(p) => {
                let (g, m) = make_arps(p.clone())?;
                (g, m)
            }
            EnvDescription::Asis(p) => {
                let (g, m) = make_asis(p.clone())?;
                (g, m)
            }
            EnvDescription::Congestion(p) => {
                let (g, m) = make_congestion(p.clone())?;
                (g, m)
            }
            EnvDescription::SymmetricTest(d) => {
                let (g, m) = make_symmetric_test(d.params.clone(), d.n_agents)?;
                (g, m)
            }
        };
        Ok(BuiltEnv {
            game,
            mfg,
            description: self.clone(),
        })
    }
}

/// On-disk environment file: either a spec to be drawn or a fully drawn
/// description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<EnvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<EnvDescription>,
}

impl EnvFile {
    pub fn from_description(description: EnvDescription) -> Self {
        Self {
            version: ENV_FILE_VERSION,
            spec: None,
            description: Some(description),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: EnvFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        if file.version != ENV_FILE_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported environment file version {} (expected {ENV_FILE_VERSION})",
                file.version
            )));
        }
        if file.spec.is_some() == file.description.is_some() {
            return Err(Error::InvalidConfig(
                "environment file needs exactly one of [spec] or [description]".into(),
            ));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn build(&self) -> Result<BuiltEnv> {
        match (&self.spec, &self.description) {
            (Some(spec), None) => spec.build(),
            (None, Some(desc)) => desc.build(),
            _ => Err(Error::InvalidConfig(
                "environment file needs exactly one of [spec] or [description]".into(),
            )),
        }
    }
}

pub fn load_env(path: &Path) -> Result<BuiltEnv> {
    EnvFile::parse(&std::fs::read_to_string(path)?)?.build()
}

pub fn dump_env(env: &BuiltEnv, path: &Path) -> Result<()> {
    std::fs::write(path, EnvFile::from_description(env.description.clone()).to_toml()?)?;
    Ok(())
}

/// Converts a TOML error into a line-anchored parse error.
///
/// Errors inside tagged tables carry the span of the whole table; for an
/// unknown key the line is narrowed to the key itself.
pub(crate) fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let start = e.span().map(|span| span.start.min(text.len()));
    let mut line = start.map(|start| text[..start].matches('\n').count() + 1).unwrap_or(0);
    if let (Some(start), Some(key)) = (start, unknown_key(&msg)) {
        let offset = text[start..].lines().position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        });
        if let Some(offset) = offset {
            line += offset;
        }
    }
    Error::Parse { line, msg }
}

fn unknown_key(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("unknown field `")?;
    rest.split('`').next()
}
