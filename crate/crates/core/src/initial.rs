//! Well-prepared initial data `φ₀ = q^ε(r̄)` built from a saturated signed
//! distance, and the checks that go with it.

use crate::calculus::{gradient_unchecked, Discretization};
use crate::diagnostics::density::{density_scan, dyadic_radii, DensityCenters};
use crate::diagnostics::discrepancy_field;
use crate::error::{Error, Result};
use crate::field::{GridSpec, Point, ScalarField};
use crate::potential::{eval_k, eval_w};
use crate::shape::{signed_distance, ShapeSpec, SignedDistanceField};

/// At ε = 4h with central differences, K = 8 lets the difference quotient of
/// the profile overshoot the saturation slope near r ≈ ε; 6 keeps the
/// discrete discrepancy negative there.
pub const DEFAULT_K: f64 = 6.0;
pub const MIN_K: f64 = 5.0;
/// Interface width must satisfy `ε ≥ RESOLUTION·h`.
pub const RESOLUTION: f64 = 3.0;
/// Shapes must stay `CLEARANCE·ε` away from the periodic seam.
pub const CLEARANCE: f64 = 4.0;
/// Volume margins at or below this are reported as a warning.
pub const OMEGA_WARNING: f64 = 0.01;
/// Margins this close to zero are summation round-off of a pure phase.
const OMEGA_ROUNDOFF: f64 = 1e-13;
/// Relative tolerance on the initial discrepancy sign.
pub const DISCREPANCY_TOL: f64 = 1e-10;

/// `r̄ = Kε·tanh(r/(Kε))`.
pub fn smooth_saturate(r: &SignedDistanceField, eps: f64, k: f64) -> Result<SignedDistanceField> {
    if !(k >= MIN_K) {
        return Err(Error::InvalidParameter(format!(
            "saturation K must be at least {MIN_K}, got {k}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let band = k * eps;
    Ok(SignedDistanceField {
        field: r.field.map(|v| band * (v / band).tanh()),
        band: Some(band),
    })
}

/// Rejects `ε` outside `(0, 1)` or below the resolution guard `3h`.
pub fn check_resolution(grid: &GridSpec, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    let min = RESOLUTION * grid.h();
    if eps < min * (1.0 - 1e-12) {
        return Err(Error::Unresolved { eps, min });
    }
    Ok(())
}

/// `φ₀ = tanh(r̄/ε)` on the nodes of `grid`.
pub fn make_initial(shape: &ShapeSpec, eps: f64, grid: &GridSpec, k: f64) -> Result<ScalarField> {
    check_resolution(grid, eps)?;
    shape.validate(grid.d())?;
    if !matches!(shape, ShapeSpec::Implicit(_)) {
        shape.check_clearance(grid.d(), CLEARANCE * eps)?;
    }
    let r = signed_distance(shape, grid)?;
    let rbar = smooth_saturate(&r, eps, k)?;
    Ok(rbar.field.map(|v| (v / eps).tanh()))
}

/// Discrete `max |∇r̄|` using central differences, over nodes whose whole
/// stencil lies in `mask`.
pub fn max_gradient_norm(r: &ScalarField, mask: impl Fn(usize) -> bool) -> f64 {
    let grid = *r.grid();
    let grad = gradient_unchecked(r, Discretization::Central2);
    let norm_sq = grad.norm_sq();
    let mut best: f64 = 0.0;
    for i in 0..grid.len() {
        let inside =
            mask(i) && (0..grid.d()).all(|axis| mask(grid.shifted(i, axis, 1)) && mask(grid.shifted(i, axis, -1)));
        if inside {
            best = best.max(norm_sq.values()[i].sqrt());
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellPreparednessReport {
    /// `max ε|∇φ₀|²/2 - W(φ₀)/ε`.
    pub max_discrepancy: f64,
    /// `max (ε|∇φ₀|²/2 - W(φ₀)/ε) / (W(φ₀)/ε + 1)`.
    pub max_relative_discrepancy: f64,
    /// Sup of the density ratio over the scan.
    pub density_ratio: f64,
    pub density_argmax: (Point, f64),
    /// `2/3 - |∫k(φ₀)|`.
    pub omega: f64,
    /// `max |∇r̄|` with `r̄ = ε·atanh(φ₀)` on `|φ₀| ≤ 0.99`.
    pub max_grad_rbar: f64,
    pub fatal: bool,
    pub warnings: Vec<String>,
}

impl WellPreparednessReport {
    pub fn passes(&self) -> bool {
        !self.fatal && self.max_relative_discrepancy <= DISCREPANCY_TOL && self.density_ratio.is_finite()
    }
}

/// Evaluates the initial-data hypotheses on `φ₀`. Never fails on a bad
/// state; problems are reported through `fatal` and `warnings`.
pub fn check_well_prepared(phi: &ScalarField, eps: f64, disc: Discretization) -> Result<WellPreparednessReport> {
    phi.check_finite()?;
    disc.check(phi.grid())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let grid = *phi.grid();
    let xi = discrepancy_field(phi, eps, disc);
    let mut max_discrepancy = f64::NEG_INFINITY;
    let mut max_rel = f64::NEG_INFINITY;
    for (x, &p) in xi.values().iter().zip(phi.values()) {
        max_discrepancy = max_discrepancy.max(*x);
        max_rel = max_rel.max(x / (eval_w(p) / eps + 1.0));
    }

    let radii = dyadic_radii(&grid);
    let per_axis = match grid.d() {
        1 => grid.n(),
        2 => 32,
        _ => 8,
    }
    .min(grid.n());
    let scan = density_scan(phi, eps, disc, &radii, &DensityCenters::Lattice { per_axis })?;

    let v = crate::field::integrate_map(phi, eval_k);
    let mut omega = 2.0 / 3.0 - v.abs();
    if omega.abs() <= OMEGA_ROUNDOFF {
        omega = 0.0;
    }

    let limit = 0.99;
    let rbar = phi.map(|p| eps * p.clamp(-limit, limit).atanh());
    let max_grad_rbar = max_gradient_norm(&rbar, |i| phi.values()[i].abs() <= limit);

    let mut warnings = Vec::new();
    let fatal = omega <= 0.0;
    if fatal {
        warnings.push(format!("volume margin omega = {omega:e} is not positive"));
    } else if omega <= OMEGA_WARNING {
        warnings.push(format!("volume margin omega = {omega:e} is small"));
    }
    if max_rel > DISCREPANCY_TOL {
        warnings.push(format!(
            "positive discrepancy {max_discrepancy:e} (relative {max_rel:e})"
        ));
    }
    Ok(WellPreparednessReport {
        max_discrepancy,
        max_relative_discrepancy: max_rel,
        density_ratio: scan.sup_ratio,
        density_argmax: (scan.argsup.0, scan.argsup.1),
        omega,
        max_grad_rbar,
        fatal,
        warnings,
    })
}
