use std::path::{Path, PathBuf};

use bellcom_core::classical::MessageFamily;
use bellcom_core::config::{InequalityConfig, StrategyConfig};
use bellcom_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::run_config::{CcpConfig, CommandKind, Format, RunConfig, StrategySource};

#[derive(Debug, Parser)]
#[command(name = "bellcom", version, about = "Bell inequalities with communication: bounds, optimization and protocol simulation")]
pub struct Cli {
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,

    /// Write results here instead of stdout. For `simulate` this receives
    /// the round log and the summary still goes to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Run the invocation stored in a config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact classical bound by enumerating deterministic strategies.
    Bound(BoundArgs),
    /// See-saw maximization of the quantum value.
    Optimize(OptimizeArgs),
    /// Bell value and protocol success of a given strategy.
    Eval(EvalArgs),
    /// Play the communication protocol round by round.
    Simulate(SimulateArgs),
    /// Check success = 1/2 + B/(2Γ) on random quantum strategies.
    Verify(VerifyArgs),
    /// Recompute the reference numbers for the built-in inequalities.
    Report,
}

#[derive(Debug, Args)]
pub struct IneqArg {
    /// Built-in name (gyni, svetlichny, chsh) or path to an inequality file.
    #[arg(long, value_name = "NAME|PATH")]
    pub ineq: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    General,
    ProductForm,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub ineq: IneqArg,
    /// Also search every one-bit classical protocol.
    #[arg(long)]
    pub ccp: bool,
    #[arg(long, value_enum, default_value = "general", requires = "ccp")]
    pub family: FamilyArg,
    /// Lift the size guard on the protocol search.
    #[arg(long, requires = "ccp")]
    pub long_running: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub ineq: IneqArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Alternate observable sweeps with state updates.
    #[arg(long)]
    pub optimize_state: bool,
}

#[derive(Debug, Args)]
pub struct StrategyArgs {
    /// Preset (gyni-paper, svetlichny-paper, experiment-like) or path to a
    /// strategy file.
    #[arg(long, value_name = "NAME|PATH")]
    pub strategy: String,
    /// Depolarize the strategy's state to visibility V.
    #[arg(long, value_name = "V")]
    pub noise_v: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub ineq: IneqArg,
    #[command(flatten)]
    pub strategy: StrategyArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub ineq: IneqArg,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// prng, file:PATH (raw bits) or beacon:PATH|URL (hex records).
    #[arg(long, value_name = "SOURCE", default_value = "prng")]
    pub randomness: String,
    /// Where fetched beacon records are cached.
    #[arg(long, value_name = "PATH")]
    pub beacon_cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Defaults to both gyni and svetlichny.
    #[arg(long, value_name = "NAME|PATH")]
    pub ineq: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random strategies per inequality.
    #[arg(long)]
    pub count: Option<usize>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// A path if one exists under that name, a built-in name otherwise.
fn inequality_source(arg: &str) -> Result<InequalityConfig> {
    let path = Path::new(arg);
    if path.is_file() {
        read_json(path)
    } else {
        Ok(InequalityConfig::named(arg))
    }
}

fn strategy_source(arg: &str) -> Result<StrategySource> {
    let path = Path::new(arg);
    if path.is_file() {
        Ok(StrategySource::Inline(read_json::<StrategyConfig>(path)?))
    } else {
        Ok(StrategySource::Preset { preset: arg.to_string() })
    }
}

impl Cli {
    /// Resolves files and flags into a validated [`RunConfig`].
    pub fn into_run_config(self) -> Result<RunConfig> {
        let mut cfg = match (self.config, self.command) {
            (Some(path), None) => RunConfig::load(&path)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either --config or a subcommand, not both".into()));
            }
            (None, None) => return Err(Error::Config("missing subcommand (see --help)".into())),
            (None, Some(command)) => command.into_run_config()?,
        };
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(out) = self.out {
            cfg.out = Some(out);
        }
        if let Some(format) = self.format {
            cfg.format = format;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Command {
    fn into_run_config(self) -> Result<RunConfig> {
        let cfg = match self {
            Command::Bound(a) => RunConfig {
                inequality: Some(inequality_source(&a.ineq.ineq)?),
                ccp: a.ccp.then_some(CcpConfig {
                    family: match a.family {
                        FamilyArg::General => MessageFamily::General,
                        FamilyArg::ProductForm => MessageFamily::ProductForm,
                    },
                    long_running: a.long_running,
                }),
                ..RunConfig::new(CommandKind::Bound)
            },
            Command::Optimize(a) => RunConfig {
                inequality: Some(inequality_source(&a.ineq.ineq)?),
                seed: a.seed,
                restarts: a.restarts,
                tol: a.tol,
                max_sweeps: a.max_sweeps,
                optimize_state: a.optimize_state,
                ..RunConfig::new(CommandKind::Optimize)
            },
            Command::Eval(a) => RunConfig {
                inequality: Some(inequality_source(&a.ineq.ineq)?),
                strategy: Some(strategy_source(&a.strategy.strategy)?),
                noise_v: a.strategy.noise_v,
                ..RunConfig::new(CommandKind::Eval)
            },
            Command::Simulate(a) => RunConfig {
                inequality: Some(inequality_source(&a.ineq.ineq)?),
                strategy: Some(strategy_source(&a.strategy.strategy)?),
                noise_v: a.strategy.noise_v,
                rounds: a.rounds,
                seed: a.seed,
                randomness: Some(a.randomness.parse()?),
                beacon_cache: a.beacon_cache,
                ..RunConfig::new(CommandKind::Simulate)
            },
            Command::Verify(a) => RunConfig {
                inequality: a.ineq.as_deref().map(inequality_source).transpose()?,
                seed: a.seed,
                count: a.count,
                ..RunConfig::new(CommandKind::Verify)
            },
            Command::Report => RunConfig::new(CommandKind::Report),
        };
        Ok(cfg)
    }
}
