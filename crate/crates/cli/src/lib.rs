//! Experiment driver: every model component as a subcommand writing
//! seed-stamped CSV files plus a manifest of the resolved inputs.

pub mod commands;
pub mod error;
pub mod output;
pub mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sysrisk::model::RawConfig;
use sysrisk::ExperimentConfig;

pub use error::{CliError, Result};
use output::{config_hash, Outputs};
use sweep::Sweep;

#[derive(Debug, Parser)]
#[command(name = "sysrisk", version, about = "Systemic risk experiments: simulation, fluctuations, transition paths, control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// `key=value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Uniform parameter sweep `name:start:end:count`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub sweep: Option<String>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweep points (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Euler-Maruyama run with stationary statistics and transition counts.
    Simulate {
        /// Keep every k-th step in the path file (must divide T/dt).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Stationary covariance of the Gaussian fluctuations and its limits.
    Fluctuations,
    /// Most probable transition path at the configured h0.
    LdpPath {
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Rate infimum along an h0 schedule (or another swept parameter).
    LdpSweep {
        #[command(flatten)]
        solver: SolverArgs,
        /// Comma separated increasing h0 values.
        #[arg(long, value_name = "LIST")]
        h0: Option<String>,
    },
    /// Riccati trajectory and steady state of the control problem.
    Riccati {
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Uncontrolled and controlled runs driven by the same noise.
    ControlDemo {
        #[arg(long)]
        stride: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SolverArgs {
    /// Collocation mesh points.
    #[arg(long, default_value_t = 2000)]
    pub mesh: usize,
    /// Newton iteration cap per solve.
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Fluctuations => "fluctuations",
            Command::LdpPath { .. } => "ldp-path",
            Command::LdpSweep { .. } => "ldp-sweep",
            Command::Riccati { .. } => "riccati",
            Command::ControlDemo { .. } => "control-demo",
        }
    }

    /// Options that change the output, in a fixed textual form.
    fn options(&self) -> String {
        match self {
            Command::Simulate { stride } | Command::Riccati { stride } | Command::ControlDemo { stride } => {
                format!("stride={}\n", stride.map_or("auto".to_string(), |s| s.to_string()))
            }
            Command::Fluctuations => String::new(),
            Command::LdpPath { solver } => solver.describe(),
            Command::LdpSweep { solver, h0 } => {
                format!("{}h0_list={}\n", solver.describe(), h0.as_deref().unwrap_or(""))
            }
        }
    }
}

impl SolverArgs {
    fn describe(&self) -> String {
        format!("mesh={}\nmax_iterations={}\n", self.mesh, self.max_iterations)
    }
}

/// Resolved inputs shared by all commands.
pub struct Context {
    pub raw: RawConfig,
    pub config: ExperimentConfig,
    pub sweep: Option<Sweep>,
}

fn load(common: &Common) -> Result<Context> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut raw = RawConfig::parse(&text)?;
    for o in &common.overrides {
        raw.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        raw.set("seed", &seed.to_string())?;
    }
    let config = raw.validate()?;
    let sweep = common.sweep.as_deref().map(str::parse::<Sweep>).transpose()?;
    Ok(Context { raw, config, sweep })
}

/// Runs one command and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let ctx = load(&cli.common)?;
    let command = cli.command.name();
    let mut inputs = format!("command={command}\n");
    inputs.push_str(&ctx.config.to_config_string());
    if let Some(s) = &ctx.sweep {
        let _ = writeln!(inputs, "sweep={}", s.describe());
    }
    inputs.push_str(&cli.command.options());
    let hash = config_hash(&inputs);
    let mut out = Outputs::new(&cli.common.out, command, &hash, ctx.config.sim.seed)?;
    let manifest_inputs = format!(
        "{inputs}config_hash={hash}\njobs={}\n",
        cli.common.jobs.map_or("auto".to_string(), |j| j.to_string())
    );

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.common.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    let result = pool.install(|| commands::dispatch(&cli.command, &ctx, &mut out));
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) if e.exit_code() == 3 => "nonconverged".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.manifest(&manifest_inputs, &status)?;
    result.map(|()| out.written().to_vec())
}
