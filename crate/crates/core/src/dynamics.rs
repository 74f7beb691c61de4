//! Time stepping for the nonlocal Allen–Cahn family
//!
//! `φ_t = Δφ - W'(φ)/ε² + λ g(φ)`
//!
//! with `g = √(2W)/ε` (Golovaty, Brassel–Bretin), `g = 1/ε`
//! (Rubinstein–Sternberg) or no multiplier (plain Allen–Cahn).

use std::collections::HashMap;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{laplacian_symbol, laplacian_unchecked, Discretization};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::field::{integrate_map, pairwise_sum, pairwise_sum_by, GridSpec, ScalarField};
use crate::potential::{eval_dw, eval_k, eval_k_counted, eval_sqrt2w, eval_w, SIGMA};
use crate::spectral;

/// Multiplier denominators below this abort the step.
pub const DENOMINATOR_GUARD: f64 = 1e-14;
pub const DEFAULT_CONSERVATIVE_TOL: f64 = 1e-12;
pub const DEFAULT_SAFETY: f64 = 0.2;
pub const MAX_ROOT_ITERATIONS: usize = 50;
/// `max |φ|` above `1 + OVERSHOOT_TOL` counts as an overshoot event.
pub const OVERSHOOT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquationVariant {
    Golovaty,
    RubinsteinSternberg,
    BrasselBretin,
    PlainAllenCahn,
}

impl EquationVariant {
    pub const ALL: [EquationVariant; 4] = [
        EquationVariant::Golovaty,
        EquationVariant::RubinsteinSternberg,
        EquationVariant::BrasselBretin,
        EquationVariant::PlainAllenCahn,
    ];

    pub fn has_multiplier(&self) -> bool {
        *self != EquationVariant::PlainAllenCahn
    }

    pub fn name(&self) -> &'static str {
        match self {
            EquationVariant::Golovaty => "golovaty",
            EquationVariant::RubinsteinSternberg => "rubinstein-sternberg",
            EquationVariant::BrasselBretin => "brassel-bretin",
            EquationVariant::PlainAllenCahn => "plain-allen-cahn",
        }
    }

    /// The forcing `g(φ)` multiplying `λ`.
    fn forcing(&self, p: f64, eps: f64) -> f64 {
        match self {
            EquationVariant::Golovaty | EquationVariant::BrasselBretin => eval_sqrt2w(p) / eps,
            EquationVariant::RubinsteinSternberg => 1.0 / eps,
            EquationVariant::PlainAllenCahn => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitEuler,
    SemiImplicitSpectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierMode {
    /// `λ` from its closed form at time level `n`.
    Analytic,
    /// `λ` chosen so that `∫k(φ^{n+1})` equals the initial phase volume.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub multiplier_mode: MultiplierMode,
    #[serde(default = "default_tol")]
    pub conservative_tol: f64,
    /// Fraction of the raw stability limit that `dt` may use.
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_tol() -> f64 {
    DEFAULT_CONSERVATIVE_TOL
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

impl StepperSpec {
    pub fn new(scheme: Scheme, dt: f64, multiplier_mode: MultiplierMode) -> Self {
        StepperSpec {
            scheme,
            dt,
            multiplier_mode,
            conservative_tol: DEFAULT_CONSERVATIVE_TOL,
            safety: DEFAULT_SAFETY,
        }
    }

    /// Largest admissible `dt`: `safety·min(h²/(2d), ε²/2)` for the
    /// explicit scheme, `safety·ε²/2` for the semi-implicit one.
    pub fn stability_bound(&self, grid: &GridSpec, eps: f64) -> f64 {
        Self::bound_for(self.scheme, self.safety, grid, eps)
    }

    pub fn bound_for(scheme: Scheme, safety: f64, grid: &GridSpec, eps: f64) -> f64 {
        let reaction = eps * eps / 2.0;
        match scheme {
            Scheme::ExplicitEuler => {
                let h = grid.h();
                safety * reaction.min(h * h / (2.0 * grid.d() as f64))
            }
            Scheme::SemiImplicitSpectral => safety * reaction,
        }
    }

    pub fn validate(&self, grid: &GridSpec, eps: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "stability safety factor must lie in (0, 1], got {}",
                self.safety
            )));
        }
        if !(self.conservative_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "conservative tolerance must be positive".into(),
            ));
        }
        let bound = self.stability_bound(grid, eps);
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Unstable { dt: self.dt, bound });
        }
        Ok(())
    }
}

/// `(form A, form B)` of the Golovaty multiplier:
/// A = `-∫√(2W)(εΔφ - W'/ε) / (2∫W)`,
/// B = `-2∫φ(ε|∇φ|²/2 + W/ε) / ∫W`.
///
/// Under the spectral discretization both integrals are taken exactly over
/// the trigonometric interpolant (sampled on a grid twice as fine, where the
/// cubic terms do not alias), so the integration by parts linking the two
/// forms holds to round-off. The stepper itself uses the nodal form A.
pub fn lambda_golovaty(phi: &ScalarField, eps: f64, disc: Discretization) -> Result<(f64, f64)> {
    phi.check_finite()?;
    disc.check(phi.grid())?;
    if disc == Discretization::Spectral {
        return lambda_golovaty_interpolant(phi, eps);
    }
    let lap = laplacian_unchecked(phi, disc);
    let a = golovaty_form_a(phi, &lap, eps)?;
    let g2 = crate::calculus::grad_norm_sq_unchecked(phi, disc);
    let w_int = integrate_map(phi, eval_w);
    let num = phi.zip_map(&g2, |p, q| p * (0.5 * eps * q + eval_w(p) / eps))?;
    let b = -2.0 * crate::field::integrate_unchecked(&num) / w_int;
    Ok((a, b))
}

fn lambda_golovaty_interpolant(phi: &ScalarField, eps: f64) -> Result<(f64, f64)> {
    let grid = *phi.grid();
    let d = grid.d();
    let fine = GridSpec::new(d, 2 * grid.n())?;
    let spec = crate::spectral::forward(&grid, phi.values());
    let two_pi = 2.0 * std::f64::consts::PI;
    let p = crate::spectral::resample(&grid, &spec, &fine, |_| Complex64::new(1.0, 0.0));
    let lap = crate::spectral::resample(&grid, &spec, &fine, |k| {
        let k2: i64 = k[..d].iter().map(|k| k * k).sum();
        Complex64::new(-two_pi * two_pi * k2 as f64, 0.0)
    });
    let mut g2 = vec![0.0; fine.len()];
    for axis in 0..d {
        let da = crate::spectral::resample(&grid, &spec, &fine, |k| Complex64::new(0.0, two_pi * k[axis] as f64));
        for (g, v) in g2.iter_mut().zip(da) {
            *g += v * v;
        }
    }
    let dv = fine.cell_volume();
    let w_int = dv * pairwise_sum(&p.iter().map(|&v| eval_w(v)).collect::<Vec<_>>());
    if !(w_int > DENOMINATOR_GUARD) {
        return Err(Error::Degenerate {
            value: w_int,
            guard: DENOMINATOR_GUARD,
        });
    }
    let num_a: Vec<f64> = p
        .iter()
        .zip(&lap)
        .map(|(&v, &l)| eval_sqrt2w(v) * (eps * l - eval_dw(v) / eps))
        .collect();
    let num_b: Vec<f64> = p
        .iter()
        .zip(&g2)
        .map(|(&v, &q)| v * (0.5 * eps * q + eval_w(v) / eps))
        .collect();
    let a = -dv * pairwise_sum(&num_a) / (2.0 * w_int);
    let b = -2.0 * dv * pairwise_sum(&num_b) / w_int;
    Ok((a, b))
}

fn golovaty_form_a(phi: &ScalarField, lap: &ScalarField, eps: f64) -> Result<f64> {
    let v = phi.values();
    let l = lap.values();
    let sqrt2w_lap = phi.grid().cell_volume() * pairwise_sum_by(v.len(), &|i| eval_sqrt2w(v[i]) * l[i]);
    golovaty_form_a_from(phi, sqrt2w_lap, eps)
}

/// Form A given `∫√(2W(φ))Δφ`.
fn golovaty_form_a_from(phi: &ScalarField, sqrt2w_lap: f64, eps: f64) -> Result<f64> {
    let w_int = integrate_map(phi, eval_w);
    if !(w_int > DENOMINATOR_GUARD) {
        return Err(Error::Degenerate {
            value: w_int,
            guard: DENOMINATOR_GUARD,
        });
    }
    let reaction = integrate_map(phi, |p| eval_sqrt2w(p) * eval_dw(p)) / eps;
    Ok(-(eps * sqrt2w_lap - reaction) / (2.0 * w_int))
}

/// `λ₁ = ⨍ W'(φ)/ε`.
pub fn lambda_rs(phi: &ScalarField, eps: f64) -> Result<f64> {
    phi.check_finite()?;
    Ok(integrate_map(phi, eval_dw) / eps)
}

/// `λ₂ = ∫W'(φ)/ε / ∫√(2W(φ))`.
pub fn lambda_bb(phi: &ScalarField, eps: f64) -> Result<f64> {
    phi.check_finite()?;
    let den = integrate_map(phi, eval_sqrt2w);
    if !(den > DENOMINATOR_GUARD) {
        return Err(Error::Degenerate {
            value: den,
            guard: DENOMINATOR_GUARD,
        });
    }
    Ok(integrate_map(phi, eval_dw) / eps / den)
}

/// The analytic multiplier of `variant` at `phi` (0 for plain Allen–Cahn).
pub fn analytic_lambda(variant: EquationVariant, phi: &ScalarField, eps: f64, disc: Discretization) -> Result<f64> {
    match variant {
        EquationVariant::Golovaty => {
            phi.check_finite()?;
            disc.check(phi.grid())?;
            golovaty_form_a(phi, &laplacian_unchecked(phi, disc), eps)
        }
        EquationVariant::RubinsteinSternberg => lambda_rs(phi, eps),
        EquationVariant::BrasselBretin => lambda_bb(phi, eps),
        EquationVariant::PlainAllenCahn => Ok(0.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub phi: ScalarField,
    pub t: f64,
    pub step: u64,
    pub eps: f64,
    pub variant: EquationVariant,
    /// `∫k(φ)` at the start of the run.
    pub v0: f64,
    /// Energy at the start of the run.
    pub e0: f64,
    /// `∫λ² dτ` over the multipliers actually applied.
    pub lambda_sq_accum: f64,
    /// `∫∫ε φ_t² dx dτ` with the difference quotient for `φ_t`.
    pub dissipation: f64,
    /// Multiplier applied in the most recent step.
    pub last_lambda: f64,
    pub k_clamp_events: u64,
    pub overshoot_events: u64,
}

impl EvolutionState {
    pub fn new(phi: ScalarField, eps: f64, variant: EquationVariant, disc: Discretization) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
        }
        phi.check_finite()?;
        disc.check(phi.grid())?;
        let mut clamps = 0;
        let v0 = phi.grid().cell_volume()
            * pairwise_sum(
                &phi.values()
                    .iter()
                    .map(|&p| eval_k_counted(p, &mut clamps))
                    .collect::<Vec<_>>(),
            );
        let e0 = diagnostics::energy(&phi, eps, disc)?;
        Ok(EvolutionState {
            phi,
            t: 0.0,
            step: 0,
            eps,
            variant,
            v0,
            e0,
            lambda_sq_accum: 0.0,
            dissipation: 0.0,
            last_lambda: 0.0,
            k_clamp_events: clamps,
            overshoot_events: 0,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    /// Diagnostics of the current state.
    pub fn record(&self, disc: Discretization) -> Result<DiagnosticsRecord> {
        let phi = &self.phi;
        let energy = diagnostics::energy(phi, self.eps, disc)?;
        let lambda = match analytic_lambda(self.variant, phi, self.eps, disc) {
            Ok(l) => l,
            Err(Error::Degenerate { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(DiagnosticsRecord {
            step: self.step,
            t: self.t,
            energy,
            volume: diagnostics::volume(phi)?,
            lambda,
            lambda_sq_accum: self.lambda_sq_accum,
            max_discrepancy: diagnostics::discrepancy_max(phi, self.eps, disc)?,
            dissipation_residual: (energy - self.e0 + self.dissipation / SIGMA).abs(),
            curvature_l2: diagnostics::curvature_l2(phi, self.eps, disc)?,
            max_abs_phi: phi.max_abs(),
            interface_measure: diagnostics::interface_measure(phi),
        })
    }
}

/// A stepper bound to one grid, discretization and `ε`, caching the
/// Laplacian symbol and the semi-implicit resolvents.
pub struct Stepper {
    grid: GridSpec,
    disc: Discretization,
    spec: StepperSpec,
    eps: f64,
    symbol: Vec<f64>,
    resolvents: HashMap<u64, Vec<f64>>,
    /// Last state produced by the semi-implicit scheme with its spectrum.
    spectrum_cache: Option<(Vec<f64>, Vec<Complex64>)>,
}

impl Stepper {
    pub fn new(grid: GridSpec, disc: Discretization, spec: StepperSpec, eps: f64) -> Result<Self> {
        disc.check(&grid)?;
        spec.validate(&grid, eps)?;
        let symbol = if spec.scheme == Scheme::SemiImplicitSpectral || disc == Discretization::Spectral {
            (0..grid.len()).map(|i| laplacian_symbol(&grid, disc, i)).collect()
        } else {
            Vec::new()
        };
        Ok(Stepper {
            grid,
            disc,
            spec,
            eps,
            symbol,
            resolvents: HashMap::new(),
            spectrum_cache: None,
        })
    }

    pub fn spec(&self) -> &StepperSpec {
        &self.spec
    }

    fn resolvent(&mut self, dt: f64) -> &[f64] {
        let symbol = &self.symbol;
        self.resolvents
            .entry(dt.to_bits())
            .or_insert_with(|| symbol.iter().map(|s| 1.0 / (1.0 - dt * s)).collect())
    }

    /// Advances `state` by the configured `dt`.
    pub fn step(&mut self, state: &mut EvolutionState) -> Result<()> {
        let dt = self.spec.dt;
        self.step_dt(state, dt).map_err(|e| e.at_step(state.step as usize + 1))
    }

    fn laplacian_values(&self, phi: &ScalarField) -> Vec<f64> {
        match self.disc {
            Discretization::Central2 => laplacian_unchecked(phi, self.disc).into_values(),
            Discretization::Spectral => spectral::apply_multiplier(&self.grid, phi.values(), |i| self.symbol[i]),
        }
    }

    fn step_dt(&mut self, state: &mut EvolutionState, dt: f64) -> Result<()> {
        if state.phi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if state.eps != self.eps {
            return Err(Error::InvalidParameter("state and stepper disagree on eps".into()));
        }
        let grid = self.grid;
        let eps = self.eps;
        let variant = state.variant;
        let phi = state.phi.values();
        let inv_eps2 = 1.0 / (eps * eps);
        let reaction: Vec<f64> = phi.iter().map(|&p| -eval_dw(p) * inv_eps2).collect();
        let forcing: Vec<f64> = phi.iter().map(|&p| variant.forcing(p, eps)).collect();

        let conservative = self.spec.multiplier_mode == MultiplierMode::Conservative && variant.has_multiplier();
        let (next, lambda, next_hat) = match self.spec.scheme {
            Scheme::ExplicitEuler => {
                let lap = ScalarField::from_raw(grid, self.laplacian_values(&state.phi));
                let seed = match variant {
                    EquationVariant::Golovaty => golovaty_form_a(&state.phi, &lap, eps)?,
                    _ => analytic_lambda(variant, &state.phi, eps, self.disc)?,
                };
                let lap = lap.values();
                if conservative {
                    // φ^{n+1}(λ) = A + λB
                    let a: Vec<f64> = (0..phi.len()).map(|i| phi[i] + dt * (lap[i] + reaction[i])).collect();
                    let b: Vec<f64> = forcing.iter().map(|g| dt * g).collect();
                    let lambda = solve_volume(&a, &b, grid.cell_volume(), state.v0, seed, self.spec.conservative_tol)?;
                    (a.iter().zip(&b).map(|(x, y)| x + lambda * y).collect(), lambda, None)
                } else {
                    let next = (0..phi.len())
                        .map(|i| phi[i] + dt * (lap[i] + reaction[i] + seed * forcing[i]))
                        .collect();
                    (next, seed, None)
                }
            }
            Scheme::SemiImplicitSpectral => {
                let phi_hat = self.spectrum_of(phi);
                let (reaction_hat, forcing_hat) = spectral::forward_pair(&grid, &reaction, &forcing);
                let seed = match variant {
                    EquationVariant::Golovaty => {
                        // ∫√(2W)Δφ by Parseval; the forcing is √(2W)/ε
                        let pairing: f64 = (0..phi_hat.len())
                            .map(|i| (forcing_hat[i].conj() * phi_hat[i]).re * self.symbol[i])
                            .sum();
                        let sqrt2w_lap = eps * pairing * grid.cell_volume() / grid.len() as f64;
                        golovaty_form_a_from(&state.phi, sqrt2w_lap, eps)?
                    }
                    _ => analytic_lambda(variant, &state.phi, eps, self.disc)?,
                };
                let res = self.resolvent(dt);
                let a_hat: Vec<Complex64> = (0..phi_hat.len())
                    .map(|i| (phi_hat[i] + reaction_hat[i] * dt) * res[i])
                    .collect();
                let b_hat: Vec<Complex64> = (0..phi_hat.len()).map(|i| forcing_hat[i] * (dt * res[i])).collect();
                if conservative {
                    let (a, b) = spectral::inverse_pair(&grid, &a_hat, &b_hat);
                    let lambda = solve_volume(&a, &b, grid.cell_volume(), state.v0, seed, self.spec.conservative_tol)?;
                    let next = a.iter().zip(&b).map(|(x, y)| x + lambda * y).collect();
                    let hat = a_hat.iter().zip(&b_hat).map(|(x, y)| x + y * lambda).collect();
                    (next, lambda, Some(hat))
                } else {
                    let hat: Vec<Complex64> = a_hat.iter().zip(&b_hat).map(|(x, y)| x + y * seed).collect();
                    (spectral::inverse_real(&grid, hat.clone()), seed, Some(hat))
                }
            }
        };

        if let Some(index) = next.iter().position(|v: &f64| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                value: next[index],
            });
        }
        let next = ScalarField::from_raw(grid, next);
        let mut clamps = 0u64;
        for &p in next.values() {
            eval_k_counted(p, &mut clamps);
        }
        state.k_clamp_events += clamps;
        if next.max_abs() > 1.0 + OVERSHOOT_TOL {
            state.overshoot_events += 1;
        }
        state.dissipation += diagnostics::step_dissipation(&state.phi, &next, eps, dt)?;
        state.lambda_sq_accum += dt * lambda * lambda;
        state.last_lambda = lambda;
        self.spectrum_cache = next_hat.map(|hat| (next.values().to_vec(), hat));
        state.phi = next;
        state.step += 1;
        state.t += dt;
        Ok(())
    }

    /// Spectrum of `phi`, reusing the one carried over from the previous
    /// step when `phi` is bitwise the state that step produced.
    fn spectrum_of(&mut self, phi: &[f64]) -> Vec<Complex64> {
        match self.spectrum_cache.take() {
            Some((values, hat))
                if values.len() == phi.len() && values.iter().zip(phi).all(|(a, b)| a.to_bits() == b.to_bits()) =>
            {
                hat
            }
            _ => spectral::forward(&self.grid, phi),
        }
    }
}

/// Solves `Q(λ) = ∫k(a + λb) - target = 0` by secant iteration from `seed`
/// (second iterate from a Newton step), falling back to bisection once a
/// sign change has been bracketed.
fn solve_volume(a: &[f64], b: &[f64], cell: f64, target: f64, seed: f64, tol: f64) -> Result<f64> {
    let q = |lam: f64| -> f64 { cell * pairwise_sum_by(a.len(), &|i| eval_k(a[i] + lam * b[i])) - target };
    let dq = |lam: f64| -> f64 {
        cell * pairwise_sum_by(a.len(), &|i| {
            let p = a[i] + lam * b[i];
            if p.abs() >= 1.0 {
                0.0
            } else {
                eval_sqrt2w(p) * b[i]
            }
        })
    };
    // Q is nondecreasing in λ when b ≥ 0, so track the bracket by sign.
    let mut lo = (f64::NEG_INFINITY, f64::NAN);
    let mut hi = (f64::INFINITY, f64::NAN);
    let note = |lam: f64, val: f64, lo: &mut (f64, f64), hi: &mut (f64, f64)| {
        if val < 0.0 && (lo.0 == f64::NEG_INFINITY || lam > lo.0) {
            *lo = (lam, val);
        }
        if val > 0.0 && (hi.0 == f64::INFINITY || lam < hi.0) {
            *hi = (lam, val);
        }
    };
    let mut x0 = seed;
    let mut q0 = q(x0);
    if q0.abs() <= tol {
        return Ok(x0);
    }
    note(x0, q0, &mut lo, &mut hi);
    let slope = dq(x0);
    let scale = seed.abs().max(1.0);
    let mut x1 = if slope > 0.0 && slope.is_finite() {
        x0 - q0 / slope
    } else {
        x0 - q0.signum() * scale
    };
    for iteration in 1..=MAX_ROOT_ITERATIONS {
        let q1 = q(x1);
        if q1.abs() <= tol {
            return Ok(x1);
        }
        note(x1, q1, &mut lo, &mut hi);
        let bracketed = lo.0.is_finite() && hi.0.is_finite();
        if bracketed && hi.0 - lo.0 <= 4.0 * f64::EPSILON * lo.0.abs().max(hi.0.abs()) {
            return Err(Error::RootNotConverged {
                iterations: iteration,
                lo: lo.0,
                hi: hi.0,
                q_lo: lo.1,
                q_hi: hi.1,
            });
        }
        let secant = if q1 != q0 {
            x1 - q1 * (x1 - x0) / (q1 - q0)
        } else {
            f64::NAN
        };
        let next = if bracketed {
            if secant.is_finite() && secant > lo.0 && secant < hi.0 {
                secant
            } else {
                0.5 * (lo.0 + hi.0)
            }
        } else if secant.is_finite() && (secant - x1).signum() == -q1.signum() {
            secant
        } else {
            // expand outward until the root is bracketed
            x1 - q1.signum() * 2.0 * (x1 - x0).abs().max(scale)
        };
        x0 = x1;
        q0 = q1;
        x1 = next;
    }
    Err(Error::RootNotConverged {
        iterations: MAX_ROOT_ITERATIONS,
        lo: lo.0,
        hi: hi.0,
        q_lo: lo.1,
        q_hi: hi.1,
    })
}

/// One step of the state, leaving the input untouched.
pub fn step(state: &EvolutionState, stepper: &StepperSpec, disc: Discretization) -> Result<EvolutionState> {
    let mut s = Stepper::new(*state.grid(), disc, *stepper, state.eps)?;
    let mut next = state.clone();
    s.step(&mut next)?;
    Ok(next)
}

/// Runs to `t_final`, recording diagnostics every `cadence` steps and at
/// the end. The last step is shortened to land on `t_final` exactly.
pub fn run(
    state: EvolutionState,
    stepper: &StepperSpec,
    disc: Discretization,
    t_final: f64,
    cadence: usize,
) -> Result<(EvolutionState, Vec<DiagnosticsRecord>)> {
    run_with_observer(state, stepper, disc, t_final, cadence, |_, _| Ok(()))
}

/// Like [`run`], calling `observer` after every step (and once for the
/// initial state) with the record when one was taken.
pub fn run_with_observer(
    mut state: EvolutionState,
    stepper: &StepperSpec,
    disc: Discretization,
    t_final: f64,
    cadence: usize,
    mut observer: impl FnMut(&EvolutionState, Option<&DiagnosticsRecord>) -> Result<()>,
) -> Result<(EvolutionState, Vec<DiagnosticsRecord>)> {
    if cadence == 0 {
        return Err(Error::InvalidParameter("cadence must be at least 1".into()));
    }
    if !(t_final >= state.t) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} precedes the state time {}",
            state.t
        )));
    }
    let mut s = Stepper::new(*state.grid(), disc, *stepper, state.eps)?;
    let dt = stepper.dt;
    let t0 = state.t;
    let span = t_final - t0;
    let steps = if span <= 0.0 {
        0
    } else {
        ((span / dt) - 1e-9).ceil().max(1.0) as u64
    };

    let mut records = vec![state.record(disc)?];
    observer(&state, records.last())?;
    for i in 1..=steps {
        let this_dt = if i == steps {
            t_final - (t0 + (steps - 1) as f64 * dt)
        } else {
            dt
        };
        let index = state.step as usize + 1;
        s.step_dt(&mut state, this_dt).map_err(|e| e.at_step(index))?;
        if i == steps {
            state.t = t_final;
        } else {
            state.t = t0 + i as f64 * dt;
        }
        let take = i % cadence as u64 == 0 || i == steps;
        if take {
            records.push(state.record(disc).map_err(|e| e.at_step(index))?);
            observer(&state, records.last())?;
        } else {
            observer(&state, None)?;
        }
    }
    Ok((state, records))
}
