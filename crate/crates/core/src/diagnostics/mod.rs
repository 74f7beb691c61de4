//! Functionals evaluated on discrete states: energy, phase volume,
//! discrepancy, curvature, normal velocity, plus the per-step record and its
//! CSV form.

pub mod density;
pub mod monotonicity;

use std::io::Write;

use crate::calculus::{grad_norm_sq_unchecked, gradient_unchecked, laplacian_unchecked, Discretization};
use crate::error::{Error, Result};
use crate::field::{integrate_map, integrate_unchecked, ScalarField, VectorField};
use crate::interface::InterfaceMesh;
use crate::potential::{eval_dw, eval_k, eval_w, SIGMA};

fn check(phi: &ScalarField, eps: f64, disc: Discretization) -> Result<()> {
    phi.check_finite()?;
    disc.check(phi.grid())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Density of the energy measure, `(ε|∇φ|²/2 + W(φ)/ε)/σ`.
pub fn energy_density(phi: &ScalarField, eps: f64, disc: Discretization) -> Result<ScalarField> {
    check(phi, eps, disc)?;
    Ok(energy_density_unchecked(phi, eps, disc))
}

pub(crate) fn energy_density_unchecked(phi: &ScalarField, eps: f64, disc: Discretization) -> ScalarField {
    let g2 = grad_norm_sq_unchecked(phi, disc);
    phi.zip_map(&g2, |p, q| (0.5 * eps * q + eval_w(p) / eps) / SIGMA)
        .expect("same grid")
}

/// Total energy `μ^ε(Ω)`.
pub fn energy(phi: &ScalarField, eps: f64, disc: Discretization) -> Result<f64> {
    Ok(integrate_unchecked(&energy_density(phi, eps, disc)?))
}

/// Phase volume `∫k(φ)`.
pub fn volume(phi: &ScalarField) -> Result<f64> {
    phi.check_finite()?;
    Ok(integrate_map(phi, eval_k))
}

/// Pointwise `ξ = ε|∇φ|²/2 - W(φ)/ε` using the discretization's gradient.
pub fn discrepancy_field(phi: &ScalarField, eps: f64, disc: Discretization) -> ScalarField {
    let g2 = gradient_unchecked(phi, disc).norm_sq();
    phi.zip_map(&g2, |p, q| 0.5 * eps * q - eval_w(p) / eps)
        .expect("same grid")
}

pub fn discrepancy_max(phi: &ScalarField, eps: f64, disc: Discretization) -> Result<f64> {
    check(phi, eps, disc)?;
    Ok(discrepancy_field(phi, eps, disc)
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `∫ε(φ_{n+1} - φ_n)²/dt`, the dissipation over one step.
pub fn step_dissipation(prev: &ScalarField, next: &ScalarField, eps: f64, dt: f64) -> Result<f64> {
    let sq = prev.zip_map(next, |a, b| (b - a) * (b - a))?;
    Ok(eps * integrate_unchecked(&sq) / dt)
}

/// `|E_{n+1} - E_n + (dt/σ)∫ε((φ_{n+1} - φ_n)/dt)²|` for one step.
pub fn dissipation_residual(
    prev: &ScalarField,
    next: &ScalarField,
    eps: f64,
    dt: f64,
    disc: Discretization,
) -> Result<f64> {
    check(prev, eps, disc)?;
    check(next, eps, disc)?;
    let e0 = energy(prev, eps, disc)?;
    let e1 = energy(next, eps, disc)?;
    Ok((e1 - e0 + step_dissipation(prev, next, eps, dt)? / SIGMA).abs())
}

/// `(1/σ)∫ε(Δφ - W'(φ)/ε²)²`. For a resolved disc of radius `R` this is
/// close to `∫h² dH¹ = 2π/R`.
pub fn curvature_l2(phi: &ScalarField, eps: f64, disc: Discretization) -> Result<f64> {
    check(phi, eps, disc)?;
    let lap = laplacian_unchecked(phi, disc);
    let inv = 1.0 / (eps * eps);
    let f = phi.zip_map(&lap, |p, l| {
        let r = l - eval_dw(p) * inv;
        eps * r * r / SIGMA
    })?;
    Ok(integrate_unchecked(&f))
}

/// Nodal normal velocity `v = -(φ_t/|∇φ|)(∇φ/|∇φ|)`, zero where
/// `|∇φ| < 1e-8/h`. The gradient is taken at the midpoint state.
pub fn velocity_field(prev: &ScalarField, next: &ScalarField, dt: f64, disc: Discretization) -> Result<VectorField> {
    if prev.grid() != next.grid() {
        return Err(Error::GridMismatch);
    }
    prev.check_finite()?;
    next.check_finite()?;
    disc.check(prev.grid())?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let grid = *prev.grid();
    let mid = prev.zip_map(next, |a, b| 0.5 * (a + b))?;
    let grad = gradient_unchecked(&mid, disc);
    let g2 = grad.norm_sq();
    let floor = 1e-8 / grid.h();
    let scale: Vec<f64> = (0..grid.len())
        .map(|i| {
            let gn = g2.values()[i];
            if gn.sqrt() < floor {
                0.0
            } else {
                let phi_t = (next.values()[i] - prev.values()[i]) / dt;
                -phi_t / gn
            }
        })
        .collect();
    let comps = grad
        .components()
        .iter()
        .map(|c| ScalarField::from_raw(grid, c.values().iter().zip(&scale).map(|(g, s)| g * s).collect()))
        .collect();
    VectorField::new(grid, comps)
}

/// Length (area) of the extracted zero level set.
pub fn interface_measure(phi: &ScalarField) -> f64 {
    InterfaceMesh::extract(phi).measure()
}

/// One row of the time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub energy: f64,
    pub volume: f64,
    /// The variant's multiplier evaluated at this state.
    pub lambda: f64,
    pub lambda_sq_accum: f64,
    pub max_discrepancy: f64,
    /// `|E(t) - E(0) + (1/σ)∫₀ᵗ∫ε φ_t²|` with the discrete dissipation.
    pub dissipation_residual: f64,
    pub curvature_l2: f64,
    pub max_abs_phi: f64,
    pub interface_measure: f64,
}

pub const CSV_HEADER: &str = "t,energy,volume,lambda,lambda_sq_accum,max_discrepancy,dissipation_residual,curvature_l2,max_abs_phi,interface_measure";

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.energy,
            self.volume,
            self.lambda,
            self.lambda_sq_accum,
            self.max_discrepancy,
            self.dissipation_residual,
            self.curvature_l2,
            self.max_abs_phi,
            self.interface_measure,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// Comma-separated row; floats use the shortest round-trip formatting.
    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.energy,
            self.volume,
            self.lambda,
            self.lambda_sq_accum,
            self.max_discrepancy,
            self.dissipation_residual,
            self.curvature_l2,
            self.max_abs_phi,
            self.interface_measure
        )
    }
}

pub fn write_csv(mut w: impl Write, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    /// Two interfaces of a centred interval of half-width 1/4.
    fn interval(n: usize, eps: f64) -> ScalarField {
        let g = GridSpec::new(1, n).unwrap();
        ScalarField::from_fn(g, |x| {
            let r = 0.25 - (x[0] - 0.5).abs();
            (r / eps).tanh()
        })
        .unwrap()
    }

    #[test]
    fn constant_energies() {
        let g = GridSpec::new(2, 16).unwrap();
        let eps = 0.1;
        for disc in [Discretization::Central2, Discretization::Spectral] {
            let zero = ScalarField::constant(g, 0.0).unwrap();
            assert!((energy(&zero, eps, disc).unwrap() - 3.0 / (8.0 * eps)).abs() < 1e-12);
            for c in [1.0, -1.0] {
                let f = ScalarField::constant(g, c).unwrap();
                assert_eq!(energy(&f, eps, disc).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn two_interface_energy_is_two() {
        let n = 512;
        let eps = 8.0 / n as f64;
        let phi = interval(n, eps);
        let e = energy(&phi, eps, Discretization::Spectral).unwrap();
        assert!((e - 2.0).abs() < 1e-4, "{e}");
        // central differences carry an O((h/ε)²) bias
        let coarse = energy(&phi, eps, Discretization::Central2).unwrap();
        let fine = energy(&interval(2 * n, eps), eps, Discretization::Central2).unwrap();
        assert!((coarse - 2.0).abs() < 2e-3);
        let ratio = (coarse - 2.0) / (fine - 2.0);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn energy_is_additive_over_far_interface_pairs() {
        let n = 1024;
        let eps = 8.0 / n as f64;
        let g = GridSpec::new(1, n).unwrap();
        let pair = |x: f64, c: f64| ((0.1 - (x - c).abs()) / eps).tanh();
        let one = ScalarField::from_fn(g, |x| pair(x[0], 0.25)).unwrap();
        let two = ScalarField::from_fn(g, |x| {
            let a = pair(x[0], 0.25);
            let b = pair(x[0], 0.75);
            if a > b {
                a
            } else {
                b
            }
        })
        .unwrap();
        let e1 = energy(&one, eps, Discretization::Spectral).unwrap();
        let e2 = energy(&two, eps, Discretization::Spectral).unwrap();
        assert!((e2 - 2.0 * e1).abs() < 1e-6, "{e2} vs {e1}");
    }

    #[test]
    fn volume_values() {
        let g = GridSpec::new(2, 16).unwrap();
        assert!((volume(&ScalarField::constant(g, 1.0).unwrap()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(volume(&ScalarField::constant(g, 0.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn discrepancy_of_profiles() {
        let n = 4096;
        let eps = 32.0 / n as f64;
        let phi = interval(n, eps);
        // the kinks of |x - 1/2| sit 0.25 = 8 eps away, where W is ~1e-14
        let m = discrepancy_max(&phi, eps, Discretization::Spectral).unwrap();
        assert!(m <= 1e-8, "{m}");
        let g = GridSpec::new(2, 16).unwrap();
        let c = ScalarField::constant(g, 0.3).unwrap();
        let m = discrepancy_max(&c, 0.1, Discretization::Central2).unwrap();
        assert!((m + eval_w(0.3) / 0.1).abs() < 1e-14);
    }

    #[test]
    fn curvature_of_flat_profile_and_zero() {
        let n = 512;
        let eps = 8.0 / n as f64;
        let phi = interval(n, eps);
        let c = curvature_l2(&phi, eps, Discretization::Spectral).unwrap();
        assert!(c <= 1e-6, "{c}");
        let g = GridSpec::new(2, 16).unwrap();
        assert_eq!(
            curvature_l2(&ScalarField::constant(g, 0.0).unwrap(), 0.1, Discretization::Central2).unwrap(),
            0.0
        );
    }

    #[test]
    fn curvature_of_a_disc() {
        let n = 256;
        let g = GridSpec::new(2, n).unwrap();
        let eps = 4.0 / n as f64;
        let phi = ScalarField::from_fn(g, |x| {
            let r = 0.25 - ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            (r / eps).tanh()
        })
        .unwrap();
        let c = curvature_l2(&phi, eps, Discretization::Spectral).unwrap();
        let expect = 2.0 * std::f64::consts::PI / 0.25;
        assert!((c - expect).abs() < 0.1 * expect, "{c}");
    }

    #[test]
    fn stationary_velocity_is_zero() {
        let phi = interval(64, 4.0 / 64.0);
        let v = velocity_field(&phi, &phi, 1e-3, Discretization::Central2).unwrap();
        assert_eq!(v.component(0).max_abs(), 0.0);
        let g = GridSpec::new(1, 64).unwrap();
        let flat = ScalarField::constant(g, 0.5).unwrap();
        let moved = ScalarField::constant(g, 0.6).unwrap();
        let v = velocity_field(&flat, &moved, 1e-3, Discretization::Central2).unwrap();
        assert_eq!(v.component(0).max_abs(), 0.0);
    }

    #[test]
    fn record_csv_round_trips() {
        let r = DiagnosticsRecord {
            step: 3,
            t: 0.1,
            energy: 1.0 / 3.0,
            volume: -0.2,
            lambda: 1e-300,
            lambda_sq_accum: 0.0,
            max_discrepancy: -5.5,
            dissipation_residual: 1e-13,
            curvature_l2: 25.0,
            max_abs_phi: 0.99,
            interface_measure: 1.57,
        };
        let row = r.csv_row();
        let parsed: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed[1], 1.0 / 3.0);
        assert_eq!(parsed[3], 1e-300);
        assert_eq!(parsed.len(), CSV_HEADER.split(',').count());
    }
}
