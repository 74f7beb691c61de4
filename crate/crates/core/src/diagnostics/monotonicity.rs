//! Localized backward heat kernel `ρ̃_{y,s}` and the monotonicity inequality
//!
//! `∫ρ̃ dμ_{t₂} ≤ (∫ρ̃ dμ_{t₁} + c₅∫_{t₁}^{t₂} e^{-1/(128(s-t))} μ_t(B_{1/2}(y)) dt)·e^{∫_{t₁}^{t₂} λ²}`.

use std::f64::consts::PI;

use super::density::ball_measure;
use super::energy_density_unchecked;
use crate::calculus::Discretization;
use crate::error::{Error, Result};
use crate::field::{pairwise_sum, Point, ScalarField};

pub const DEFAULT_C5: f64 = 1e3;

/// Radial cut-off: 1 on `[0, 1/4]`, 0 on `[1/2, ∞)`, quintic smoothstep
/// between (C² and nonincreasing).
pub fn eta(r: f64) -> f64 {
    if r <= 0.25 {
        1.0
    } else if r >= 0.5 {
        0.0
    } else {
        let u = (r - 0.25) * 4.0;
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityKernel {
    pub y: Point,
    pub s: f64,
}

impl MonotonicityKernel {
    /// `ρ̃_{y,s}(x, t)` in dimension `d`; requires `t < s`.
    pub fn rho_tilde(&self, d: usize, x: &Point, t: f64) -> f64 {
        let tau = self.s - t;
        let mut r2 = 0.0;
        for axis in 0..d {
            let dx = crate::field::min_image(x[axis] - self.y[axis]);
            r2 += dx * dx;
        }
        let r = r2.sqrt();
        let eta = eta(r);
        if eta == 0.0 {
            return 0.0;
        }
        (4.0 * PI * tau).powf(-(d as f64 - 1.0) / 2.0) * (-r2 / (4.0 * tau)).exp() * eta
    }

    fn weights(&self, phi: &ScalarField, t: f64) -> Vec<f64> {
        let grid = phi.grid();
        (0..grid.len())
            .map(|i| self.rho_tilde(grid.d(), &grid.node(i), t))
            .collect()
    }

    /// `∫ρ̃(·, t) dμ` as one weighted sum over all nodes.
    pub fn weighted_measure(&self, phi: &ScalarField, eps: f64, disc: Discretization, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let dens = energy_density_unchecked(phi, eps, disc);
        let w = self.weights(phi, t);
        let vals: Vec<f64> = dens.values().iter().zip(&w).map(|(a, b)| a * b).collect();
        Ok(phi.grid().cell_volume() * pairwise_sum(&vals))
    }

    /// Same integral, restricting to the support `|x - y| < 1/2` first and
    /// summing only the retained nodes.
    pub fn weighted_measure_masked(&self, phi: &ScalarField, eps: f64, disc: Discretization, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let grid = phi.grid();
        let dens = energy_density_unchecked(phi, eps, disc);
        let vals: Vec<f64> = (0..grid.len())
            .filter(|&i| grid.distance(&grid.node(i), &self.y) < 0.5)
            .map(|i| dens.values()[i] * self.rho_tilde(grid.d(), &grid.node(i), t))
            .collect();
        Ok(grid.cell_volume() * pairwise_sum(&vals))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t < self.s) {
            return Err(Error::InvalidParameter(format!(
                "kernel is singular: need t < s, got t = {t}, s = {}",
                self.s
            )));
        }
        Ok(())
    }
}

/// A stored state together with the multiplier history up to it.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFrame {
    pub t: f64,
    pub phi: ScalarField,
    /// `∫₀ᵗ λ² dτ` with the multipliers actually applied.
    pub lambda_sq_accum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityResult {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

fn frame_at(history: &[HistoryFrame], t: f64) -> Result<usize> {
    history
        .iter()
        .position(|f| (f.t - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or_else(|| Error::InvalidParameter(format!("no history frame at t = {t}")))
}

/// Evaluates both sides of the inequality. `t₁` and `t₂` must be frame
/// times; the time integral uses the trapezoid rule over the frames between.
pub fn monotonicity_check(
    history: &[HistoryFrame],
    kernel: &MonotonicityKernel,
    t1: f64,
    t2: f64,
    c5: f64,
    eps: f64,
    disc: Discretization,
) -> Result<MonotonicityResult> {
    if !(t1 < t2) {
        return Err(Error::InvalidParameter(format!("need t1 < t2, got {t1} and {t2}")));
    }
    if !(kernel.s > t2) {
        return Err(Error::InvalidParameter(format!(
            "kernel time s = {} must exceed t2 = {t2}",
            kernel.s
        )));
    }
    let i1 = frame_at(history, t1)?;
    let i2 = frame_at(history, t2)?;
    if i2 <= i1 {
        return Err(Error::InvalidParameter("history is not ordered in time".into()));
    }
    let lhs = kernel.weighted_measure(&history[i2].phi, eps, disc, history[i2].t)?;
    let start = kernel.weighted_measure(&history[i1].phi, eps, disc, history[i1].t)?;
    let integrand: Vec<(f64, f64)> = history[i1..=i2]
        .iter()
        .map(|f| {
            let dens = energy_density_unchecked(&f.phi, eps, disc);
            let w = (-1.0 / (128.0 * (kernel.s - f.t))).exp();
            (f.t, w * ball_measure(&dens, &kernel.y, 0.5))
        })
        .collect();
    let integral: f64 = integrand
        .windows(2)
        .map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1))
        .sum();
    let growth = (history[i2].lambda_sq_accum - history[i1].lambda_sq_accum).exp();
    let rhs = (start + c5 * integral) * growth;
    Ok(MonotonicityResult {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}
