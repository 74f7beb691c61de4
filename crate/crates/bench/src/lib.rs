//! Fixtures shared by the kernel benchmarks in `benches/`.

use vpmcf_core::dynamics::{EquationVariant, EvolutionState, MultiplierMode, Scheme, StepperSpec, DEFAULT_SAFETY};
use vpmcf_core::initial::DEFAULT_K;
use vpmcf_core::{make_initial, Discretization, GridSpec, ScalarField, ShapeSpec};

/// Saturated disc of radius 0.25 on an `n²` grid with `ε = 4h`.
pub fn disc_field(n: usize) -> (ScalarField, f64) {
    let grid = GridSpec::new(2, n).expect("valid grid");
    let eps = 4.0 * grid.h();
    let phi = make_initial(&ShapeSpec::ball(&[0.5, 0.5], 0.25), eps, &grid, DEFAULT_K).expect("disc fits");
    (phi, eps)
}

/// Golovaty state on the disc with a semi-implicit stepper at the default bound.
pub fn disc_state(n: usize, mode: MultiplierMode, disc: Discretization) -> (EvolutionState, StepperSpec) {
    let (phi, eps) = disc_field(n);
    let grid = *phi.grid();
    let scheme = Scheme::SemiImplicitSpectral;
    let spec = StepperSpec::new(scheme, StepperSpec::bound_for(scheme, DEFAULT_SAFETY, &grid, eps), mode);
    let state = EvolutionState::new(phi, eps, EquationVariant::Golovaty, disc).expect("valid state");
    (state, spec)
}
