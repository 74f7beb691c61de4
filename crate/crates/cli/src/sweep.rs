//! Refinement sweeps over `dt`, `ε` or `n`.
//!
//! * `dt`: the time step (explicit or the stability bound) times the factor.
//! * `eps`: `ε` times the factor with `n` divided by it, so `ε/h` is kept;
//!   the time step follows the config's own rule at the new `ε`.
//! * `n`: nodes per axis times the factor, `ε` as configured.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use vpmcf_core::dynamics::StepperSpec;
use vpmcf_core::GridSpec;

use crate::config::RunConfig;
use crate::pipeline::{self, RunSummary};
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    Dt,
    Eps,
    N,
}

impl Param {
    fn name(&self) -> &'static str {
        match self {
            Param::Dt => "dt",
            Param::Eps => "eps",
            Param::N => "n",
        }
    }
}

pub const SUMMARY_HEADER: &str = "run,factor,n,eps,dt,steps,volume_drift,final_residual,max_discrepancy,oracle_error,\
density_growth,order_volume_drift,order_residual,order_oracle_error";

/// The config for one factor.
pub fn scaled(base: &RunConfig, param: Param, factor: f64) -> Result<RunConfig, Failure> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Failure::Validation(format!(
            "sweep factors must be positive, got {factor}"
        )));
    }
    let mut c = base.clone();
    match param {
        Param::Dt => {
            let dt = match base.stepper.dt {
                Some(dt) => dt,
                None => {
                    let grid = GridSpec::new(base.grid.d, base.grid.n)?;
                    StepperSpec::bound_for(base.stepper.scheme, base.stepper.safety, &grid, base.eps()?)
                }
            };
            c.stepper.dt = Some(dt * factor);
        }
        Param::Eps => {
            let n = base.grid.n as f64 / factor;
            if (n - n.round()).abs() > 1e-9 || n < 1.0 {
                return Err(Failure::Validation(format!(
                    "eps factor {factor} does not give an integer node count from n = {}",
                    base.grid.n
                )));
            }
            c.grid.n = n.round() as usize;
            if let Some(e) = base.model.eps {
                c.model.eps = Some(e * factor);
            }
            if let Some(dt) = base.stepper.dt {
                c.stepper.dt = Some(dt * factor * factor);
            }
        }
        Param::N => {
            let n = base.grid.n as f64 * factor;
            if (n - n.round()).abs() > 1e-9 || n < 1.0 {
                return Err(Failure::Validation(format!(
                    "n factor {factor} does not give an integer node count"
                )));
            }
            c.grid.n = n.round() as usize;
        }
    }
    Ok(c)
}

/// The quantity whose refinement the orders refer to.
fn size(param: Param, s: &RunSummary) -> f64 {
    match param {
        Param::Dt => s.dt,
        Param::Eps => s.eps,
        Param::N => 1.0 / s.n as f64,
    }
}

/// `log(e_prev/e)/log(size_prev/size)`, or `NA`.
fn order(prev: Option<(f64, f64)>, cur: (f64, f64)) -> String {
    match prev {
        Some((e0, s0)) if e0 > 0.0 && cur.0 > 0.0 && s0 != cur.1 && e0.is_finite() && cur.0.is_finite() => {
            format!("{:.4}", (e0 / cur.0).ln() / (s0 / cur.1).ln())
        }
        _ => "NA".into(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:e}"))
}

pub fn sweep(base: &RunConfig, config_dir: &Path, out: &Path, param: Param, factors: &[f64]) -> Result<(), Failure> {
    if factors.is_empty() {
        return Err(Failure::Validation("sweep needs at least one factor".into()));
    }
    if factors.len() < 2 {
        log::warn!("a single factor gives no convergence order");
    }
    // validate every member before running any
    let configs = factors
        .iter()
        .map(|&f| scaled(base, param, f))
        .collect::<Result<Vec<_>, _>>()?;
    for c in &configs {
        c.resolve(config_dir)?;
    }
    fs::create_dir_all(out)?;
    let path = out.join("sweep_summary.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "{SUMMARY_HEADER}")?;
    w.flush()?;
    let mut prev: Option<RunSummary> = None;
    for (i, (c, &f)) in configs.iter().zip(factors).enumerate() {
        let dir = out.join(format!("{}_{i}", param.name()));
        let s = pipeline::execute(c, config_dir, &dir)?;
        let sz = size(param, &s);
        let p = prev.as_ref();
        let order_oracle = match (
            p.and_then(|p| p.oracle_error.map(|e| (e, size(param, p)))),
            s.oracle_error,
        ) {
            (prev, Some(e)) => order(prev, (e, sz)),
            _ => "NA".into(),
        };
        writeln!(
            w,
            "{},{f},{},{:e},{:e},{},{:e},{:e},{:e},{},{:e},{},{},{}",
            dir.file_name().unwrap().to_string_lossy(),
            s.n,
            s.eps,
            s.dt,
            s.steps,
            s.volume_drift,
            s.final_residual,
            s.max_discrepancy,
            opt(s.oracle_error),
            s.density_growth,
            order(p.map(|p| (p.volume_drift, size(param, p))), (s.volume_drift, sz)),
            order(p.map(|p| (p.final_residual, size(param, p))), (s.final_residual, sz)),
            order_oracle,
        )?;
        // keep finished rows even if a later run fails
        w.flush()?;
        prev = Some(s);
    }
    println!("{}", path.display());
    Ok(())
}
