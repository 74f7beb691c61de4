//! Shared run drivers for the integration tests.
#![allow(dead_code)]

use vpmcf_core::diagnostics::density::{dyadic_radii, DensityCenters};
use vpmcf_core::dynamics::*;
use vpmcf_core::initial::DEFAULT_K;
use vpmcf_core::*;

pub const ELLIPSE: ([f64; 2], [f64; 2]) = ([0.5, 0.5], [0.3, 0.18]);

pub fn ellipse() -> ShapeSpec {
    ShapeSpec::ellipse(&ELLIPSE.0, &ELLIPSE.1)
}

pub fn disc(r: f64) -> ShapeSpec {
    ShapeSpec::ball(&[0.5, 0.5], r)
}

pub fn two_discs() -> ShapeSpec {
    ShapeSpec::union(&[(&[0.26, 0.26], 0.15), (&[0.65, 0.65], 0.25)])
}

pub fn initial(shape: &ShapeSpec, n: usize, eps: f64) -> ScalarField {
    let g = GridSpec::new(2, n).unwrap();
    make_initial(shape, eps, &g, DEFAULT_K).unwrap()
}

/// A stepper using `frac` of the stability bound at the given safety.
pub fn spec(scheme: Scheme, mode: MultiplierMode, safety: f64, frac: f64, grid: &GridSpec, eps: f64) -> StepperSpec {
    let mut s = StepperSpec::new(scheme, frac * StepperSpec::bound_for(scheme, safety, grid, eps), mode);
    s.safety = safety;
    s
}

pub fn semi(mode: MultiplierMode, frac: f64, grid: &GridSpec, eps: f64) -> StepperSpec {
    spec(
        Scheme::SemiImplicitSpectral,
        mode,
        dynamics::DEFAULT_SAFETY,
        frac,
        grid,
        eps,
    )
}

/// Sup density ratio over the same lattice the well-preparedness check uses.
pub fn density_sup(phi: &ScalarField, eps: f64, disc: Discretization) -> f64 {
    let g = *phi.grid();
    let per_axis = if g.d() == 2 { 32 } else { 8 };
    density_scan(phi, eps, disc, &dyadic_radii(&g), &DensityCenters::Lattice { per_axis })
        .unwrap()
        .sup_ratio
}

/// Fitted radii of the zero level set, ascending.
pub fn radii(phi: &ScalarField) -> Vec<f64> {
    let mut r: Vec<f64> = InterfaceMesh::extract(phi)
        .fit_spheres()
        .iter()
        .map(|f| f.radius)
        .collect();
    r.sort_by(f64::total_cmp);
    r
}

pub struct RunOutput {
    pub name: String,
    pub dt: f64,
    pub records: Vec<DiagnosticsRecord>,
    pub frames: Vec<HistoryFrame>,
    pub state: EvolutionState,
    pub density0: f64,
    /// Largest sup density ratio over the stored frames.
    pub density_max: f64,
    pub overshoot_events: u64,
}

impl RunOutput {
    pub fn max_abs_phi(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.max_abs_phi)
            .chain(self.frames.iter().map(|f| f.phi.max_abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.max_discrepancy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn volume_drift(&self) -> f64 {
        self.records
            .iter()
            .map(|r| (r.volume - self.state.v0).abs())
            .fold(0.0, f64::max)
    }
}

pub struct RunPlan {
    pub name: String,
    pub phi: ScalarField,
    pub eps: f64,
    pub variant: EquationVariant,
    pub disc: Discretization,
    pub spec: StepperSpec,
    pub t_final: f64,
    pub cadence: usize,
    /// Number of stored frames after the initial one (density scans run on each).
    pub frames: usize,
}

pub fn execute(plan: RunPlan) -> RunOutput {
    let RunPlan {
        name,
        phi,
        eps,
        variant,
        disc,
        spec,
        t_final,
        cadence,
        frames,
    } = plan;
    let steps = (t_final / spec.dt - 1e-9).ceil().max(1.0) as u64;
    let stride = (steps / frames.max(1) as u64).max(1);
    let state = EvolutionState::new(phi, eps, variant, disc).unwrap();
    let mut stored = Vec::new();
    let (state, records) = run_with_observer(state, &spec, disc, t_final, cadence, |s, _| {
        if s.step % stride == 0 || s.step == steps {
            stored.push(HistoryFrame {
                t: s.t,
                phi: s.phi.clone(),
                lambda_sq_accum: s.lambda_sq_accum,
            });
        }
        Ok(())
    })
    .unwrap_or_else(|e| panic!("{name}: {e}"));
    let density0 = density_sup(&stored[0].phi, eps, disc);
    let density_max = stored
        .iter()
        .map(|f| density_sup(&f.phi, eps, disc))
        .fold(0.0, f64::max);
    RunOutput {
        name,
        dt: spec.dt,
        overshoot_events: state.overshoot_events,
        records,
        frames: stored,
        state,
        density0,
        density_max,
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
