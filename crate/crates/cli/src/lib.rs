//! Command-line front end for the shared instruction cache simulator.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sharecache::metrics::{self, SweepRow};
use sharecache::workload::{self, FetchStream};
use sharecache::{EngineConfig, SimError};
use thiserror::Error;

use crate::config::{parse_config, RunConfig, SweepMethod, TopologyKey, Workload};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    /// 1 for bad configuration or input, 2 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Sim(SimError::Io(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sharecache", version, about = "Shared instruction cache simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration and print a summary.
    Run {
        config: PathBuf,
        /// Write every retired fetch to this CSV file.
        #[arg(long, value_name = "PATH")]
        log_accesses: Option<PathBuf>,
        /// Override synthetic.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configured sharing-degree sweep and write its CSV to `out`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the synthetic workload as a trace file.
    GenTrace {
        config: PathBuf,
        #[arg(short = 'o', long = "output", value_name = "PATH")]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let text = read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut config = parse_config(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .relative_to(dir);
    if let (Some(seed), Workload::Synthetic(spec)) = (seed, &mut config.workload) {
        spec.seed = seed;
    }
    Ok(config)
}

pub fn load_streams(config: &RunConfig) -> Result<Vec<FetchStream>, CliError> {
    match &config.workload {
        Workload::Trace(path) => {
            let text = read(path)?;
            let streams = workload::parse_trace(&text).map_err(|e| match e {
                SimError::Parse { .. } => CliError::Config(format!("{}: {e}", path.display())),
                other => other.into(),
            })?;
            Ok(workload::streams_by_core(streams, config.num_cores)?)
        }
        Workload::Synthetic(spec) => Ok(workload::generate(spec)?),
    }
}

fn engine_config(config: &RunConfig) -> Result<EngineConfig, CliError> {
    let mut engine = EngineConfig::new(config.cache, config.topology()?);
    engine.max_cycles = config.max_cycles;
    Ok(engine)
}

fn cmd_run(
    config: &RunConfig,
    log_accesses: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let streams = load_streams(config)?;
    let mut engine = engine_config(config)?;
    engine.record_accesses = log_accesses.is_some();
    let out = sharecache::run(&engine, &streams)?;
    let t = out.stats.total;
    let io = |e| CliError::Io { path: "<stdout>".into(), source: e };
    writeln!(stdout, "accesses: {}", t.accesses).map_err(io)?;
    writeln!(stdout, "misses: {}", t.misses).map_err(io)?;
    writeln!(stdout, "miss_rate: {:.6}", t.miss_rate()).map_err(io)?;
    writeln!(stdout, "stall_rate: {:.6}", t.stall_rate()).map_err(io)?;
    writeln!(stdout, "cycles: {}", t.total_cycles).map_err(io)?;
    if let Some(path) = log_accesses {
        write(path, &metrics::records_csv(&out.records))?;
    }
    if let Some(path) = &config.out {
        let topology = engine.topology;
        let degree = match &config.topology {
            TopologyKey::Degree(d) => *d,
            TopologyKey::Groups(g) => g.iter().map(Vec::len).max().unwrap_or(1),
        };
        let row = SweepRow::new(degree, &config.cache, topology.num_caches(), &out.stats);
        write(path, &metrics::sweep_csv(&[row]))?;
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig) -> Result<PathBuf, CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs sweep.degrees in the config".into()))?;
    let out = config
        .out
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs out = <path> in the config".into()))?;
    let streams = load_streams(config)?;
    let mut base = engine_config(config)?;
    base.topology = sharecache::Topology::uniform(config.num_cores, 1)?;
    let rows = match sweep.method {
        SweepMethod::ConstantTotal => metrics::sweep_method1(&base, &streams, &sweep.degrees)?,
        SweepMethod::ConstantPerCache => metrics::sweep_method2(&base, &streams, &sweep.degrees)?,
    };
    write(out, &metrics::sweep_csv(&rows))?;
    Ok(out.clone())
}

fn cmd_gen_trace(config: &RunConfig, output: &Path) -> Result<(), CliError> {
    let Workload::Synthetic(spec) = &config.workload else {
        return Err(CliError::Config(
            "gen-trace needs a synthetic workload (synthetic.* keys)".into(),
        ));
    };
    write(output, &workload::write_trace(&workload::generate(spec)?))
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, log_accesses, seed } => {
            let config = load_config(&config, seed)?;
            cmd_run(&config, log_accesses.as_deref(), stdout)
        }
        Command::Sweep { config, seed } => {
            let config = load_config(&config, seed)?;
            let out = cmd_sweep(&config)?;
            writeln!(stdout, "wrote {}", out.display())
                .map_err(|e| CliError::Io { path: "<stdout>".into(), source: e })
        }
        Command::GenTrace { config, output, seed } => {
            let config = load_config(&config, seed)?;
            cmd_gen_trace(&config, &output)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
