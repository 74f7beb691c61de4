//! One experiment: initial data, evolution, diagnostics and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpmcf_core::diagnostics::density::{dyadic_radii, DensityCenters};
use vpmcf_core::diagnostics::CSV_HEADER;
use vpmcf_core::dynamics::{run_with_observer, EvolutionState};
use vpmcf_core::oracle::{min_gap, oracle_integrate};
use vpmcf_core::{
    check_well_prepared, density_scan, monotonicity_check, HistoryFrame, InterfaceMesh, MonotonicityKernel, ShapeSpec,
    Snapshot,
};

use crate::config::{initial_field, Resolved, RunConfig};
use crate::Failure;

/// Headline numbers of a finished run, used by sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub n: usize,
    pub eps: f64,
    pub dt: f64,
    pub steps: u64,
    /// `max |∫k(φ) - V₀|` over the recorded rows.
    pub volume_drift: f64,
    pub final_residual: f64,
    pub max_discrepancy: f64,
    /// Largest relative radius error against the sphere oracle.
    pub oracle_error: Option<f64>,
    /// Largest sup density ratio over its initial value.
    pub density_growth: f64,
    /// Smallest `slack / rhs` over the monotonicity samples.
    pub monotonicity_margin: Option<f64>,
}

struct RadiiRow {
    t: f64,
    radii: Vec<f64>,
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io(path, e))
}

/// Runs `config` and writes its outputs into `out`. `base` resolves
/// relative paths inside the config.
pub fn execute(config: &RunConfig, base: &Path, out: &Path) -> Result<RunSummary, Failure> {
    let r = config.resolve(base)?;
    let phi0 = initial_field(&r)?;
    let report = check_well_prepared(&phi0, r.eps, r.disc)?;
    for w in &report.warnings {
        log::warn!("initial data: {w}");
    }
    if report.fatal {
        return Err(Failure::Validation(format!(
            "initial data: volume margin omega = {:e} leaves no room for the multiplier",
            report.omega
        )));
    }
    log::info!(
        "initial data: max discrepancy {:e}, density ratio {:.4}, omega {:.4}",
        report.max_discrepancy,
        report.density_ratio,
        report.omega
    );

    let snapshots = out.join("snapshots");
    fs::create_dir_all(&snapshots).map_err(|e| io(&snapshots, e))?;
    fs::write(out.join("config.toml"), config.to_toml()).map_err(|e| io(out, e))?;

    let t_final = config.run.t_final;
    let dt = r.stepper.dt;
    let steps = if t_final <= 0.0 {
        0
    } else {
        ((t_final / dt) - 1e-9).ceil().max(1.0) as u64
    };
    let frame_stride = (steps / config.diagnostics.history_frames as u64).max(1);
    let snap_every = config.run.snapshot_cadence as u64;

    let ts_path = out.join("timeseries.csv");
    let mut ts = create(&ts_path)?;
    writeln!(ts, "{CSV_HEADER}").map_err(|e| io(&ts_path, e))?;

    let tracked = sphere_radii(&r);
    let mut radii_rows = Vec::new();
    let mut frames: Vec<HistoryFrame> = Vec::new();
    let mut records = Vec::new();
    let state = EvolutionState::new(phi0, r.eps, r.variant, r.disc)?;
    let result = run_with_observer(state, &r.stepper, r.disc, t_final, config.run.cadence, |s, rec| {
        if let Some(rec) = rec {
            writeln!(ts, "{}", rec.csv_row())?;
            records.push(rec.clone());
            if tracked.is_some() {
                radii_rows.push(RadiiRow {
                    t: s.t,
                    radii: fitted_radii(s),
                });
            }
        }
        let last = s.step == steps;
        if s.step % frame_stride == 0 || last {
            frames.push(HistoryFrame {
                t: s.t,
                phi: s.phi.clone(),
                lambda_sq_accum: s.lambda_sq_accum,
            });
        }
        if s.step == 0 || last || (snap_every > 0 && s.step % snap_every == 0) {
            let snap = Snapshot {
                field: s.phi.clone(),
                eps: s.eps,
                t: s.t,
                step: s.step,
            };
            snap.save(snapshots.join(format!("step_{:08}.vpmf", s.step)))?;
        }
        Ok(())
    });
    ts.flush().map_err(|e| io(&ts_path, e))?;
    let state = match result {
        Ok((state, _)) => state,
        Err(e) => {
            // keep whatever radii were measured before the failure
            if let Some(r0) = &tracked {
                let _ = write_radii(&out.join("radii.csv"), r.grid.d(), r0, &radii_rows);
            }
            return Err(e.into());
        }
    };
    if state.overshoot_events > 0 {
        log::warn!("max |phi| exceeded 1 + 1e-6 in {} steps", state.overshoot_events);
    }

    let oracle_error = match &tracked {
        Some(r0) => write_radii(&out.join("radii.csv"), r.grid.d(), r0, &radii_rows)?,
        None => None,
    };
    let density_growth = write_density(&out.join("density.csv"), config, &r, &frames)?;
    let monotonicity_margin = write_monotonicity(&out.join("monotonicity.csv"), config, &r, &frames)?;

    let v0 = state.v0;
    Ok(RunSummary {
        n: r.grid.n(),
        eps: r.eps,
        dt,
        steps: state.step,
        volume_drift: records.iter().map(|x| (x.volume - v0).abs()).fold(0.0, f64::max),
        final_residual: records.last().map_or(0.0, |x| x.dissipation_residual),
        max_discrepancy: records
            .iter()
            .map(|x| x.max_discrepancy)
            .fold(f64::NEG_INFINITY, f64::max),
        oracle_error,
        density_growth,
        monotonicity_margin,
    })
}

/// Initial radii when the shape is a ball or a union of balls.
fn sphere_radii(r: &Resolved) -> Option<Vec<f64>> {
    if r.grid.d() < 2 {
        return None;
    }
    let balls = match &r.shape {
        ShapeSpec::Ball(_) | ShapeSpec::Union(_) => r.shape.balls()?,
        _ => return None,
    };
    let centers: Vec<_> = balls.iter().map(|b| b.center).collect();
    let radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
    let gap = min_gap(&r.grid, &centers, &radii);
    if gap < 4.0 * r.eps {
        log::warn!("spheres are {gap:.4} apart; the oracle ignores interaction");
    }
    Some(radii)
}

fn fitted_radii(s: &EvolutionState) -> Vec<f64> {
    let mut radii: Vec<f64> = InterfaceMesh::extract(&s.phi)
        .fit_spheres()
        .iter()
        .map(|f| f.radius)
        .collect();
    radii.sort_by(f64::total_cmp);
    radii
}

/// Writes `t,component,radius,oracle_radius,rel_error` and returns the
/// largest relative error over rows whose component count matches.
fn write_radii(path: &Path, d: usize, r0: &[f64], rows: &[RadiiRow]) -> Result<Option<f64>, Failure> {
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let oracle = oracle_integrate(r0, d, &times)?;
    if let Some((index, t)) = oracle.extinction {
        log::warn!("oracle: sphere {index} vanishes at t = {t:.6}; later rows have no reference");
    }
    let mut w = create(path)?;
    let mut worst: Option<f64> = None;
    let mut diverged = false;
    let mut put = |line: String| writeln!(w, "{line}").map_err(|e| io(path, e));
    put("t,component,radius,oracle_radius,rel_error".into())?;
    for (i, row) in rows.iter().enumerate() {
        // sorted the same way as the fits
        let reference = oracle.radii.get(i).filter(|_| row.radii.len() == r0.len()).map(|o| {
            let mut o = o.clone();
            o.sort_by(f64::total_cmp);
            o
        });
        if reference.is_none() && !diverged {
            diverged = true;
            log::warn!(
                "t = {:.6}: phase field has {} interfaces, oracle has {}",
                row.t,
                row.radii.len(),
                r0.len()
            );
        }
        for (k, radius) in row.radii.iter().enumerate() {
            match &reference {
                Some(o) => {
                    let exact = o[k];
                    let err = (radius - exact).abs() / exact;
                    worst = Some(worst.map_or(err, |w: f64| w.max(err)));
                    put(format!("{:e},{k},{radius:e},{exact:e},{err:e}", row.t))?;
                }
                None => put(format!("{:e},{k},{radius:e},,", row.t))?,
            }
        }
    }
    w.flush().map_err(|e| io(path, e))?;
    Ok(worst)
}

fn write_density(path: &Path, config: &RunConfig, r: &Resolved, frames: &[HistoryFrame]) -> Result<f64, Failure> {
    let radii = if config.diagnostics.density_radii.is_empty() {
        dyadic_radii(&r.grid)
    } else {
        config.diagnostics.density_radii.clone()
    };
    let centers = DensityCenters::Lattice {
        per_axis: config.diagnostics.density_per_axis.min(r.grid.n()),
    };
    let mut w = create(path)?;
    writeln!(w, "t,sup_ratio,center_x,center_y,center_z,radius,growth").map_err(|e| io(path, e))?;
    let mut initial = None;
    let mut growth: f64 = 1.0;
    for f in frames {
        let scan = density_scan(&f.phi, r.eps, r.disc, &radii, &centers)?;
        let base = *initial.get_or_insert(scan.sup_ratio);
        let g = scan.sup_ratio / base;
        growth = growth.max(g);
        let (c, radius) = scan.argsup;
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{radius:e},{g:e}",
            f.t, scan.sup_ratio, c[0], c[1], c[2]
        )
        .map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))?;
    Ok(growth)
}

fn write_monotonicity(
    path: &Path,
    config: &RunConfig,
    r: &Resolved,
    frames: &[HistoryFrame],
) -> Result<Option<f64>, Failure> {
    let mut w = create(path)?;
    writeln!(w, "y_x,y_y,y_z,s,t1,t2,lhs,rhs,slack").map_err(|e| io(path, e))?;
    if frames.len() < 2 {
        w.flush().map_err(|e| io(path, e))?;
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.diagnostics.seed);
    let span = frames.last().unwrap().t - frames[0].t;
    let mut margin: Option<f64> = None;
    for _ in 0..config.diagnostics.monotonicity_samples {
        let i1 = rng.gen_range(0..frames.len() - 1);
        let i2 = rng.gen_range(i1 + 1..frames.len());
        let (t1, t2) = (frames[i1].t, frames[i2].t);
        let s = t2 + span.max(1e-3) * rng.gen_range(0.01..1.0);
        let mut y = [0.0; 3];
        for c in y.iter_mut().take(r.grid.d()) {
            *c = rng.gen_range(0.0..1.0);
        }
        let kernel = MonotonicityKernel { y, s };
        let m = monotonicity_check(frames, &kernel, t1, t2, config.diagnostics.c5, r.eps, r.disc)?;
        if m.rhs > 0.0 {
            let ratio = m.slack / m.rhs;
            margin = Some(margin.map_or(ratio, |x: f64| x.min(ratio)));
        }
        writeln!(
            w,
            "{:e},{:e},{:e},{s:e},{t1:e},{t2:e},{:e},{:e},{:e}",
            y[0], y[1], y[2], m.lhs, m.rhs, m.slack
        )
        .map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))?;
    Ok(margin)
}

/// Output directory for a config: `run.output`, below `root` when given.
pub fn output_dir(config: &RunConfig, root: Option<&Path>) -> PathBuf {
    match root {
        Some(root) if config.run.output.is_relative() => root.join(&config.run.output),
        _ => config.run.output.clone(),
    }
}
