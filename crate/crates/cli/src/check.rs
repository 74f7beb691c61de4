//! Re-runs the diagnostics on stored snapshots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use vpmcf_core::dynamics::EvolutionState;
use vpmcf_core::Snapshot;

use crate::config::RunConfig;
use crate::Failure;

pub const CHECK_HEADER: &str = "step,t,energy,volume,lambda,max_discrepancy,curvature_l2,max_abs_phi,interface_measure";

fn snapshot_paths(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let snaps = dir.join("snapshots");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&snaps)
        .map_err(|e| Failure::Validation(format!("{}: {e}", snaps.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vpmf"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Writes `check.csv` into `dir` from `dir/snapshots/*.vpmf`, using the
/// variant and discretization in `dir/config.toml`.
pub fn check(dir: &Path) -> Result<(), Failure> {
    let config = RunConfig::load(&dir.join("config.toml"))?;
    let disc = config.grid.discretization.into();
    let variant = config.model.variant;
    let paths = snapshot_paths(dir)?;
    if paths.is_empty() {
        return Err(Failure::Validation(format!("no snapshots under {}", dir.display())));
    }
    let out = dir.join("check.csv");
    let mut w = BufWriter::new(File::create(&out)?);
    writeln!(w, "{CHECK_HEADER}")?;
    let mut energies = Vec::new();
    for p in &paths {
        let snap = Snapshot::load(p).map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?;
        let mut state = EvolutionState::new(snap.field, snap.eps, variant, disc)?;
        state.t = snap.t;
        state.step = snap.step;
        let r = state.record(disc)?;
        energies.push(r.energy);
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            snap.step,
            r.t,
            r.energy,
            r.volume,
            r.lambda,
            r.max_discrepancy,
            r.curvature_l2,
            r.max_abs_phi,
            r.interface_measure
        )?;
    }
    w.flush()?;
    let rises = energies.windows(2).filter(|e| e[1] > e[0] + 1e-12).count();
    if rises > 0 {
        log::warn!("energy increased between {rises} consecutive snapshots");
    }
    println!("{}: {} snapshots, {rises} energy increases", out.display(), paths.len());
    Ok(())
}
