//! Command-line arguments, the JSON run file, and their merge into a
//! validated [`RunConfig`].
//!
//! Precedence, highest first: command-line flag, `EVENTUM_SEED` (seed
//! only), run file, built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use eventum::models::builtin::BUILTIN_NAMES;
use eventum::models::BuiltinParams;

use crate::CliError;

pub const SEED_ENV: &str = "EVENTUM_SEED";

#[derive(Debug, Parser)]
#[command(name = "eventum", version, about = "Sample event histories of hybrid classical-quantum systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample trajectories; writes events.jsonl and summary.csv.
    Simulate(RunArgs),
    /// Integrate the master equation; writes timeseries.csv.
    Integrate(RunArgs),
    /// Compare trajectory ensembles with the master equation; writes report.json.
    Verify(RunArgs),
    /// Run one of the built-in reference checks and print a pass/fail table.
    Demo {
        #[arg(value_enum)]
        which: DemoKind,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    Detector,
    Clock,
}

#[derive(Clone, Debug, Default, Args)]
#[command(allow_negative_numbers = true)]
pub struct RunArgs {
    /// Builtin model name or path to a model JSON file.
    #[arg(long)]
    pub model: Option<String>,
    /// JSON run file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectory count; `verify` takes a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Master-equation step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Outer step of the trajectory flow.
    #[arg(long)]
    pub base_step: Option<f64>,
    #[arg(long)]
    pub root_tol: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    /// Independent batches per sample size in `verify`.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long = "grid.N")]
    pub grid_n: Option<usize>,
    #[arg(long = "grid.L")]
    pub grid_l: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub i_max: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Quantum dimension of the clock.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Omit post-jump vectors from the event log.
    #[arg(long)]
    pub compact: bool,
    #[arg(long)]
    pub verbose: bool,
}

impl RunArgs {
    fn params(&self) -> BuiltinParams {
        BuiltinParams {
            kappa: self.kappa,
            width: self.width,
            grid_n: self.grid_n,
            grid_l: self.grid_l,
            a: self.a,
            i_max: self.i_max,
            horizon: self.horizon,
            dim: self.dim,
            ..Default::default()
        }
    }
}

/// Run file layout. Every field is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub model: Option<String>,
    #[serde(default)]
    pub params: BuiltinParams,
    pub seed: Option<u64>,
    pub n: Option<Vec<u64>>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub base_step: Option<f64>,
    pub root_tol: Option<f64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<Vec<f64>>,
    pub replicates: Option<usize>,
    pub compact: Option<bool>,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read run file {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("run file {}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Integrate,
    Verify,
    Demo(DemoKind),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelRef {
    Builtin(String),
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: ModelRef,
    pub params: BuiltinParams,
    pub t_start: f64,
    /// `None` uses the model's horizon.
    pub t_end: Option<f64>,
    pub n: Vec<u64>,
    pub master_seed: u64,
    pub base_step: Option<f64>,
    pub root_tol: f64,
    pub dt: Option<f64>,
    /// Empty means the command's default.
    pub checkpoints: Vec<f64>,
    pub output_dir: PathBuf,
    pub log_compact: bool,
    pub jobs: Option<usize>,
    pub replicates: usize,
    pub verbose: bool,
}

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
pub const DEFAULT_REPLICATES: usize = 8;

fn default_n(command: CommandKind) -> Vec<u64> {
    match command {
        CommandKind::Simulate => vec![1000],
        CommandKind::Integrate => vec![1],
        CommandKind::Verify => vec![100, 1000, 10_000],
        CommandKind::Demo(_) => vec![10_000],
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0) => Err(CliError::Usage(format!("--{name} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

pub fn parse_and_validate(cli: Cli, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig, CliError> {
    let (command, args) = match cli.command {
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Integrate(a) => (CommandKind::Integrate, a),
        Command::Verify(a) => (CommandKind::Verify, a),
        Command::Demo { which, args } => (CommandKind::Demo(which), args),
    };
    let file = match &args.config {
        Some(path) => RunFile::load(path)?,
        None => RunFile::default(),
    };

    let model_name = match command {
        CommandKind::Demo(kind) => {
            if args.model.is_some() || file.model.is_some() {
                return Err(CliError::Usage("demo runs a fixed model; drop --model".into()));
            }
            Some(match kind {
                DemoKind::Detector => "detector1d".to_string(),
                DemoKind::Clock => "clock".to_string(),
            })
        }
        _ => args.model.clone().or(file.model.clone()),
    };
    let Some(model_name) = model_name else {
        return Err(CliError::Usage(format!(
            "--model is required: a builtin ({}) or a model JSON file",
            BUILTIN_NAMES.join(", ")
        )));
    };
    let model = if BUILTIN_NAMES.contains(&model_name.as_str()) {
        ModelRef::Builtin(model_name)
    } else {
        let path = PathBuf::from(&model_name);
        if !path.is_file() {
            return Err(CliError::Usage(format!(
                "'{model_name}' is neither a builtin ({}) nor a readable file",
                BUILTIN_NAMES.join(", ")
            )));
        }
        ModelRef::File(path)
    };

    let env_seed = match env(SEED_ENV) {
        Some(s) => Some(
            s.trim().parse::<u64>().map_err(|_| CliError::Usage(format!("{SEED_ENV}='{s}' is not an unsigned 64-bit integer")))?,
        ),
        None => None,
    };
    let master_seed = args.seed.or(env_seed).or(file.seed).unwrap_or(0);

    let t_start = args.t_start.or(file.t_start).unwrap_or(0.0);
    let t_end = args.t_end.or(file.t_end);
    if let Some(t_end) = t_end {
        if !(t_end > t_start) {
            return Err(CliError::Usage(format!("--t-end ({t_end}) must exceed --t-start ({t_start})")));
        }
    }
    let n = args.n.clone().or(file.n.clone()).unwrap_or_else(|| default_n(command));
    if n.is_empty() || n.contains(&0) {
        return Err(CliError::Usage("--n needs positive trajectory counts".into()));
    }
    if command == CommandKind::Simulate && n.len() != 1 {
        return Err(CliError::Usage("simulate takes a single --n".into()));
    }
    let base_step = args.base_step.or(file.base_step);
    let root_tol = args.root_tol.or(file.root_tol).unwrap_or(DEFAULT_ROOT_TOL);
    let dt = args.dt.or(file.dt);
    positive("base-step", base_step)?;
    positive("root-tol", Some(root_tol))?;
    positive("dt", dt)?;
    let checkpoints = args.checkpoints.clone().or(file.checkpoints.clone()).unwrap_or_default();
    if let Some(bad) = checkpoints.iter().find(|&&c| !(c > t_start)) {
        return Err(CliError::Usage(format!("checkpoint {bad} is not after --t-start")));
    }
    let jobs = args.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let replicates = args.replicates.or(file.replicates).unwrap_or(DEFAULT_REPLICATES);
    if replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }

    Ok(RunConfig {
        command,
        model,
        params: file.params.merged(&args.params()),
        t_start,
        t_end,
        n,
        master_seed,
        base_step,
        root_tol,
        dt,
        checkpoints,
        output_dir: args.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        log_compact: args.compact || file.compact.unwrap_or(false),
        jobs,
        replicates,
        verbose: args.verbose,
    })
}
