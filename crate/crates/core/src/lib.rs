//! Phase-field simulation of volume-preserving mean curvature flow on the
//! periodic unit torus, with the diagnostics needed to check its conserved
//! quantities, dissipation identity and a priori estimates numerically.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calculus;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod initial;
pub mod interface;
pub mod oracle;
pub mod potential;
pub mod shape;
pub mod snapshot;
pub mod spectral;

pub use calculus::{dirichlet_form, grad_norm_sq, gradient, laplacian, Discretization};
pub use diagnostics::density::{density_scan, DensityCenters, DensityScanReport};
pub use diagnostics::monotonicity::{monotonicity_check, HistoryFrame, MonotonicityKernel, MonotonicityResult};
pub use diagnostics::{
    curvature_l2, discrepancy_max, dissipation_residual, energy, velocity_field, volume, DiagnosticsRecord,
};
pub use dynamics::{
    lambda_bb, lambda_golovaty, lambda_rs, run, run_with_observer, step, EquationVariant, EvolutionState,
    MultiplierMode, Scheme, Stepper, StepperSpec,
};
pub use error::{Error, Result};
pub use field::{integrate, GridSpec, Point, ScalarField, VectorField};
pub use initial::{check_well_prepared, make_initial, smooth_saturate, WellPreparednessReport};
pub use interface::{InterfaceMesh, SphereFit};
pub use oracle::{oracle_integrate, oracle_rhs, OracleSystem, OracleTrajectory};
pub use shape::{signed_distance, Ball, ShapeSpec, SignedDistanceField};
pub use snapshot::Snapshot;
