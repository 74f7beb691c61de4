//! `vpmcf`: runs, refinement sweeps, the sphere oracle and snapshot checks.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical
//! failure during a run (the failing step goes to standard error).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod check;
mod config;
mod pipeline;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vpmcf_core::oracle::{ac_radius, oracle_integrate, uniform_times, volume_sum};
use vpmcf_core::Error;

use crate::config::RunConfig;

/// Overrides the directory that relative `run.output` paths live under.
pub const OUTPUT_ROOT_VAR: &str = "VPMCF_OUTPUT_ROOT";
/// Worker threads for the parallel kernels.
pub const THREADS_VAR: &str = "VPMCF_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure at step {step}: {message}")]
    Numerical { step: usize, message: String },
    #[error("numerical failure: {0}")]
    NumericalSetup(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical { .. } | Failure::NumericalSetup(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::AtStep { step, source } => match *source {
                Error::Io(io) => Failure::Io(io.to_string()),
                other => Failure::Numerical {
                    step,
                    message: other.to_string(),
                },
            },
            Error::Degenerate { .. } | Error::RootNotConverged { .. } | Error::Extinct { .. } => {
                Failure::NumericalSetup(e.to_string())
            }
            Error::Io(io) => Failure::Io(io.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "vpmcf",
    version,
    about = "Volume-preserving mean curvature flow by the nonlocal Allen-Cahn equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run { config: PathBuf },
    /// Repeat a run over scaled values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: sweep::Param,
        /// Comma-separated multipliers, e.g. `1,0.5,0.25`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        factors: Vec<f64>,
    },
    /// Integrate the sphere radii ODE and print `t,R…,volume_sum` rows.
    Oracle {
        /// Comma-separated initial radii.
        #[arg(value_delimiter = ',', num_args = 1..)]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long = "T")]
        t_final: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Plain mean curvature flow instead of the volume-preserving law.
        #[arg(long)]
        plain: bool,
    },
    /// Recompute diagnostics from the snapshots of a finished run.
    Check { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Validation(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Failure::Validation(format!("{THREADS_VAR} must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from)
}

fn config_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = pipeline::output_dir(&cfg, output_root().as_deref());
            let s = pipeline::execute(&cfg, &config_base(&config), &out)?;
            println!(
                "{}: {} steps, volume drift {:e}, dissipation residual {:e}, max discrepancy {:e}",
                out.display(),
                s.steps,
                s.volume_drift,
                s.final_residual,
                s.max_discrepancy
            );
            Ok(())
        }
        Command::Sweep { config, param, factors } => {
            let cfg = RunConfig::load(&config)?;
            let out = pipeline::output_dir(&cfg, output_root().as_deref());
            sweep::sweep(&cfg, &config_base(&config), &out, param, &factors)
        }
        Command::Oracle {
            radii,
            d,
            t_final,
            samples,
            plain,
        } => oracle(&radii, d, t_final, samples, plain),
        Command::Check { dir } => check::check(&dir),
    }
}

fn oracle(radii: &[f64], d: usize, t_final: f64, samples: usize, plain: bool) -> Result<(), Failure> {
    if !(1..=3).contains(&d) {
        return Err(Failure::Validation(format!("d must be 1, 2 or 3, got {d}")));
    }
    if d == 1 {
        log::warn!("d = 1 is outside the dimensions the flow is analysed in");
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Failure::Validation("radii must be positive".into()));
    }
    if !(t_final >= 0.0) || samples == 0 {
        return Err(Failure::Validation("need T >= 0 and at least one sample".into()));
    }
    let times = uniform_times(t_final, samples);
    let header: Vec<String> = (0..radii.len()).map(|i| format!("R{i}")).collect();
    println!("t,{},volume_sum", header.join(","));
    if plain {
        for &t in &times {
            let r: Vec<Option<f64>> = radii.iter().map(|&r0| ac_radius(r0, d, t)).collect();
            if r.iter().any(Option::is_none) {
                eprintln!("extinction before t = {t:e}");
                break;
            }
            let r: Vec<f64> = r.into_iter().flatten().collect();
            print_row(t, &r, d);
        }
        return Ok(());
    }
    let traj = oracle_integrate(radii, d, &times)?;
    for (t, r) in traj.times.iter().zip(&traj.radii) {
        print_row(*t, r, d);
    }
    if let Some((index, t)) = traj.extinction {
        eprintln!("extinction: sphere {index} vanishes at t = {t:e}; trajectory truncated");
    }
    Ok(())
}

fn print_row(t: f64, r: &[f64], d: usize) {
    let cols: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
    println!("{t:e},{},{:e}", cols.join(","), volume_sum(r, d));
}
