//! The in-memory form of one invocation. Everything the command line can
//! express lives here, so `--dump-config` output can be replayed with
//! `--config`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bellcom_core::classical::MessageFamily;
use bellcom_core::config::{InequalityConfig, StrategyConfig};
use bellcom_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Bound,
    Optimize,
    Eval,
    Simulate,
    Verify,
    Report,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// A named preset or an inline strategy file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategySource {
    Preset { preset: String },
    Inline(StrategyConfig),
}

/// Where simulated inputs come from. Serialized as the `--randomness` string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RandomnessSpec {
    Prng,
    BitFile(PathBuf),
    /// A file of hex records, or an http(s) endpoint.
    Beacon(String),
}

impl FromStr for RandomnessSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "prng" {
            return Ok(RandomnessSpec::Prng);
        }
        match s.split_once(':') {
            Some(("file", path)) if !path.is_empty() => Ok(RandomnessSpec::BitFile(path.into())),
            Some(("beacon", target)) if !target.is_empty() => Ok(RandomnessSpec::Beacon(target.into())),
            _ => Err(Error::Config(format!("randomness '{s}' is not prng, file:PATH or beacon:URL"))),
        }
    }
}

impl TryFrom<String> for RandomnessSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RandomnessSpec> for String {
    fn from(r: RandomnessSpec) -> Self {
        r.to_string()
    }
}

impl fmt::Display for RandomnessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RandomnessSpec::Prng => f.write_str("prng"),
            RandomnessSpec::BitFile(p) => write!(f, "file:{}", p.display()),
            RandomnessSpec::Beacon(t) => write!(f, "beacon:{t}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcpConfig {
    pub family: MessageFamily,
    #[serde(default)]
    pub long_running: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequality: Option<InequalityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optimize_state: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub randomness: Option<RandomnessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beacon_cache: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccp: Option<CcpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        Self {
            command,
            inequality: None,
            strategy: None,
            rounds: None,
            seed: None,
            restarts: None,
            tol: None,
            max_sweeps: None,
            optimize_state: false,
            noise_v: None,
            randomness: None,
            beacon_cache: None,
            ccp: None,
            count: None,
            threads: None,
            format: Format::Json,
            out: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        use CommandKind::*;
        let needs_inequality = matches!(self.command, Bound | Optimize | Eval | Simulate);
        let needs_strategy = matches!(self.command, Eval | Simulate);
        let needs_seed = matches!(self.command, Optimize | Simulate | Verify);

        if needs_inequality && self.inequality.is_none() {
            return Err(Error::Config(format!("{} needs --ineq", self.command_name())));
        }
        if self.command == Report && self.inequality.is_some() {
            return Err(Error::Config("report takes no --ineq".into()));
        }
        if needs_strategy && self.strategy.is_none() {
            return Err(Error::Config(format!("{} needs --strategy", self.command_name())));
        }
        if !needs_strategy && self.strategy.is_some() {
            return Err(Error::Config(format!("{} takes no --strategy", self.command_name())));
        }
        if needs_seed && self.seed.is_none() {
            return Err(Error::Config(format!(
                "{} is randomized and needs an explicit --seed",
                self.command_name()
            )));
        }
        if self.command == Simulate {
            match self.rounds {
                None => return Err(Error::Config("simulate needs --rounds".into())),
                Some(0) => return Err(Error::Config("--rounds must be at least 1".into())),
                Some(_) => {}
            }
        }
        if let Some(v) = self.noise_v {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::NoiseVisibility(v));
            }
        }
        if let Some(StrategySource::Inline(s)) = &self.strategy {
            if s.visibility_v.is_some() && self.noise_v.is_some() {
                return Err(Error::Config("strategy file already sets visibility_v; drop --noise-v".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        if self.restarts == Some(0) {
            return Err(Error::Config("--restarts must be at least 1".into()));
        }
        if self.count == Some(0) {
            return Err(Error::Config("--count must be at least 1".into()));
        }
        if let Some(tol) = self.tol {
            if tol.is_nan() || tol <= 0.0 {
                return Err(Error::Config(format!("--tol {tol} must be positive")));
            }
        }
        if self.ccp.is_some() && self.command != Bound {
            return Err(Error::Config("--ccp only applies to bound".into()));
        }
        Ok(())
    }

    pub fn command_name(&self) -> &'static str {
        match self.command {
            CommandKind::Bound => "bound",
            CommandKind::Optimize => "optimize",
            CommandKind::Eval => "eval",
            CommandKind::Simulate => "simulate",
            CommandKind::Verify => "verify",
            CommandKind::Report => "report",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn randomness_strings_round_trip() {
        for s in ["prng", "file:/tmp/bits.bin", "beacon:https://example.org/beacon", "beacon:records.txt"] {
            assert_eq!(s.parse::<RandomnessSpec>().unwrap().to_string(), s);
        }
        assert!("file:".parse::<RandomnessSpec>().is_err());
        assert!("urandom".parse::<RandomnessSpec>().is_err());
    }

    #[test]
    fn randomized_commands_need_a_seed() {
        let mut cfg = RunConfig::new(CommandKind::Optimize);
        cfg.inequality = Some(InequalityConfig::named("gyni"));
        assert!(cfg.validate().is_err());
        cfg.seed = Some(1);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn defaults_are_omitted_from_json() {
        let mut cfg = RunConfig::new(CommandKind::Bound);
        cfg.inequality = Some(InequalityConfig::named("gyni"));
        assert_eq!(
            serde_json::to_string(&cfg).unwrap(),
            r#"{"command":"bound","inequality":{"name":"gyni"},"format":"json"}"#
        );
    }
}
