//! Density ratios `μ^ε(B_R(x)) / (ω_{d-1} R^{d-1})` over a sampled set of
//! centres and radii. Balls use the minimum-image metric and plain node
//! masking.

use rayon::prelude::*;

use super::energy_density_unchecked;
use crate::calculus::Discretization;
use crate::error::{Error, Result};
use crate::field::{pairwise_sum, GridSpec, Point, ScalarField};
use crate::interface::is_interface_node;
use crate::shape::unit_ball_volume;

/// Largest admissible scan radius.
pub const MAX_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub enum DensityCenters {
    /// Every `n / per_axis`-th node along each axis.
    Lattice { per_axis: usize },
    /// Nodes adjacent to a sign change, thinned to at most `max` entries.
    Interface { max: usize },
    /// Explicit flat node indices.
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySample {
    pub center: Point,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityScanReport {
    pub samples: Vec<DensitySample>,
    pub sup_ratio: f64,
    /// `(centre, radius)` attaining the sup.
    pub argsup: (Point, f64),
}

/// `2h, 4h, 8h, …` up to and including `1/4`.
pub fn dyadic_radii(grid: &GridSpec) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = 2.0 * grid.h();
    while r <= MAX_RADIUS * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out
}

/// Integer node offsets within distance `radius` of the origin.
fn ball_stencil(grid: &GridSpec, radius: f64) -> Vec<[isize; 3]> {
    let h = grid.h();
    let m = (radius / h).floor() as isize;
    let span = |axis: usize| if axis < grid.d() { -m..=m } else { 0..=0 };
    let mut out = Vec::new();
    for a in span(0) {
        for b in span(1) {
            for c in span(2) {
                let r2 = ((a * a + b * b + c * c) as f64) * h * h;
                if r2 <= radius * radius {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

fn offset_node(grid: &GridSpec, flat: usize, off: &[isize; 3]) -> usize {
    let mut j = flat;
    for axis in 0..grid.d() {
        if off[axis] != 0 {
            j = grid.shifted(j, axis, off[axis]);
        }
    }
    j
}

fn resolve_centers(phi: &ScalarField, centers: &DensityCenters) -> Result<Vec<usize>> {
    let grid = phi.grid();
    Ok(match centers {
        DensityCenters::Lattice { per_axis } => {
            if *per_axis == 0 {
                return Err(Error::InvalidParameter(
                    "lattice needs at least one centre per axis".into(),
                ));
            }
            let stride = (grid.n() / per_axis).max(1);
            (0..grid.len())
                .filter(|&i| {
                    let idx = grid.multi_index(i);
                    (0..grid.d()).all(|a| idx[a].is_multiple_of(stride))
                })
                .collect()
        }
        DensityCenters::Interface { max } => {
            let all: Vec<usize> = (0..grid.len()).filter(|&i| is_interface_node(phi, i)).collect();
            let step = all.len().div_ceil((*max).max(1)).max(1);
            all.into_iter().step_by(step).collect()
        }
        DensityCenters::Nodes(v) => {
            if let Some(&bad) = v.iter().find(|&&i| i >= grid.len()) {
                return Err(Error::InvalidParameter(format!("centre node {bad} is out of range")));
            }
            v.clone()
        }
    })
}

pub fn density_scan(
    phi: &ScalarField,
    eps: f64,
    disc: Discretization,
    radii: &[f64],
    centers: &DensityCenters,
) -> Result<DensityScanReport> {
    phi.check_finite()?;
    disc.check(phi.grid())?;
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0 && r <= MAX_RADIUS * (1.0 + 1e-12))) {
        return Err(Error::InvalidParameter(format!("scan radius {r} outside (0, 1/4]")));
    }
    if radii.is_empty() {
        return Err(Error::InvalidParameter("no scan radii".into()));
    }
    let grid = *phi.grid();
    let density = energy_density_unchecked(phi, eps, disc);
    let nodes = resolve_centers(phi, centers)?;
    let d = grid.d();
    let mut samples = Vec::with_capacity(nodes.len() * radii.len());
    for &r in radii {
        let stencil = ball_stencil(&grid, r);
        let norm = unit_ball_volume(d - 1) * r.powi(d as i32 - 1);
        let ratios: Vec<f64> = nodes
            .par_iter()
            .map(|&c| {
                let vals: Vec<f64> = stencil
                    .iter()
                    .map(|o| density.values()[offset_node(&grid, c, o)])
                    .collect();
                grid.cell_volume() * pairwise_sum(&vals) / norm
            })
            .collect();
        for (&c, ratio) in nodes.iter().zip(ratios) {
            samples.push(DensitySample {
                center: grid.node(c),
                radius: r,
                ratio,
            });
        }
    }
    // first maximum in scan order, so ties resolve deterministically
    let best = samples
        .iter()
        .fold(None::<&DensitySample>, |acc, s| match acc {
            Some(a) if a.ratio >= s.ratio => Some(a),
            _ => Some(s),
        })
        .copied()
        .unwrap_or(DensitySample {
            center: [0.0; 3],
            radius: radii[0],
            ratio: 0.0,
        });
    Ok(DensityScanReport {
        samples,
        sup_ratio: best.ratio,
        argsup: (best.center, best.radius),
    })
}

/// `μ(B_R(y))` for an arbitrary centre `y` by node masking.
pub fn ball_measure(density: &ScalarField, y: &Point, radius: f64) -> f64 {
    let grid = density.grid();
    let vals: Vec<f64> = (0..grid.len())
        .map(|i| {
            if grid.distance(&grid.node(i), y) <= radius {
                density.values()[i]
            } else {
                0.0
            }
        })
        .collect();
    grid.cell_volume() * pairwise_sum(&vals)
}
