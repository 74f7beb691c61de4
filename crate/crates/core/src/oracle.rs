//! Sharp-interface reference: radii of disjoint spheres under
//! volume-preserving mean curvature flow,
//!
//! `dR_i/dt = -(d-1)/R_i + (d-1)·Σ_j R_j^{d-2} / Σ_j R_j^{d-1}`,
//!
//! and the plain mean-curvature comparator `R² = R₀² - 2(d-1)t`.

use crate::error::{Error, Result};
use crate::field::{GridSpec, Point};

/// Per-step error targets of the adaptive integrator.
const RK_RTOL: f64 = 1e-13;
const RK_ATOL: f64 = 1e-16;
/// Truncate once a radius falls below this fraction of the largest initial radius.
const EXTINCTION_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSystem {
    pub radii: Vec<f64>,
    pub d: usize,
}

pub fn oracle_rhs(radii: &[f64], d: usize) -> Result<Vec<f64>> {
    if let Some((index, &radius)) = radii.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::Extinct { index, radius });
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let k = (d - 1) as f64;
    let num: f64 = radii.iter().map(|r| r.powi(d as i32 - 2)).sum();
    let den: f64 = radii.iter().map(|r| r.powi(d as i32 - 1)).sum();
    let mean = num / den;
    Ok(radii.iter().map(|r| k * (mean - 1.0 / r)).collect())
}

/// `Σ R_i^d`, proportional to the enclosed volume.
pub fn volume_sum(radii: &[f64], d: usize) -> f64 {
    radii.iter().map(|r| r.powi(d as i32)).sum()
}

/// Radius of a sphere under plain mean curvature flow, `None` after extinction.
pub fn ac_radius(r0: f64, d: usize, t: f64) -> Option<f64> {
    let s = r0 * r0 - 2.0 * (d as f64 - 1.0) * t;
    (s > 0.0).then(|| s.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    pub d: usize,
    /// Output times actually reached.
    pub times: Vec<f64>,
    pub radii: Vec<Vec<f64>>,
    /// `(index, time)` of the first sphere to vanish.
    pub extinction: Option<(usize, f64)>,
}

impl OracleTrajectory {
    /// Largest relative deviation of `Σ R^d` from its initial value.
    pub fn volume_drift(&self) -> f64 {
        let v0 = volume_sum(&self.radii[0], self.d);
        self.radii
            .iter()
            .map(|r| ((volume_sum(r, self.d) - v0) / v0).abs())
            .fold(0.0, f64::max)
    }
}

fn rk4(y: &[f64], h: f64, d: usize) -> Result<Vec<f64>> {
    let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
    let k1 = oracle_rhs(y, d)?;
    let k2 = oracle_rhs(&add(y, &k1, h / 2.0), d)?;
    let k3 = oracle_rhs(&add(y, &k2, h / 2.0), d)?;
    let k4 = oracle_rhs(&add(y, &k3, h), d)?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Classical RK4 with step-doubling error control, landing exactly on each
/// of the (sorted, nonnegative) `output_times`.
pub fn oracle_integrate(r0: &[f64], d: usize, output_times: &[f64]) -> Result<OracleTrajectory> {
    if r0.is_empty() {
        return Err(Error::InvalidParameter("no spheres".into()));
    }
    oracle_rhs(r0, d)?;
    if output_times.iter().any(|t| !(*t >= 0.0)) || output_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "output times must be sorted and nonnegative".into(),
        ));
    }
    let floor = EXTINCTION_FRACTION * r0.iter().cloned().fold(0.0, f64::max);
    let mut y = r0.to_vec();
    let mut t = 0.0;
    let mut h: f64 = 1e-4;
    let mut out = OracleTrajectory {
        d,
        times: Vec::new(),
        radii: Vec::new(),
        extinction: None,
    };
    'outer: for &target in output_times {
        while t < target {
            let step = h.min(target - t);
            let full = rk4(&y, step, d);
            let half = rk4(&y, step / 2.0, d).and_then(|m| rk4(&m, step / 2.0, d));
            let accepted = match (full, half) {
                (Ok(f), Ok(s)) if s.iter().all(|r| *r > floor) => {
                    // error relative to a mixed absolute/relative scale
                    let err = f
                        .iter()
                        .zip(&s)
                        .map(|(a, b)| (a - b).abs() / 15.0 / (RK_ATOL + RK_RTOL * b.abs()))
                        .fold(0.0, f64::max);
                    let factor = if err == 0.0 { 4.0 } else { 0.9 * err.powf(-0.2) };
                    h = step * factor.clamp(0.1, 4.0);
                    (err <= 1.0).then(|| s.iter().zip(&f).map(|(s, f)| s + (s - f) / 15.0).collect::<Vec<_>>())
                }
                _ => {
                    h = step / 4.0;
                    None
                }
            };
            match accepted {
                Some(next) => {
                    y = next;
                    t = if step == target - t { target } else { t + step };
                }
                None if step <= 1e-15 * t.max(1e-3) => {
                    // the step size collapsed: a radius is vanishing
                    let index = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
                    out.extinction = Some((index, t));
                    break 'outer;
                }
                None => {}
            }
            if let Some(index) = y.iter().position(|r| *r <= floor) {
                out.extinction = Some((index, t));
                break 'outer;
            }
        }
        out.times.push(t);
        out.radii.push(y.clone());
    }
    Ok(out)
}

/// `n + 1` equally spaced output times on `[0, t_final]`.
pub fn uniform_times(t_final: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_final * i as f64 / n.max(1) as f64).collect()
}

/// Smallest gap `|c_i - c_j| - R_i - R_j` between spheres on the torus.
pub fn min_gap(grid: &GridSpec, centers: &[Point], radii: &[f64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            gap = gap.min(grid.distance(&centers[i], &centers[j]) - radii[i] - radii[j]);
        }
    }
    gap
}
