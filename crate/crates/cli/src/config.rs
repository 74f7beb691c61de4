//! Run configuration: a TOML file with `[grid]`, `[model]`, `[shape]`,
//! `[stepper]`, `[run]` and `[diagnostics]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vpmcf_core::dynamics::{
    EquationVariant, MultiplierMode, Scheme, StepperSpec, DEFAULT_CONSERVATIVE_TOL, DEFAULT_SAFETY,
};
use vpmcf_core::initial::{check_resolution, CLEARANCE, DEFAULT_K};
use vpmcf_core::{Discretization, GridSpec, ScalarField, ShapeSpec, Snapshot};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub shape: ShapeSection,
    pub stepper: StepperSection,
    pub run: RunSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
    pub discretization: DiscretizationName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscretizationName {
    Central2,
    Spectral,
}

impl From<DiscretizationName> for Discretization {
    fn from(d: DiscretizationName) -> Self {
        match d {
            DiscretizationName::Central2 => Discretization::Central2,
            DiscretizationName::Spectral => Discretization::Spectral,
        }
    }
}

/// Exactly one of `eps` (torus units) and `eps_cells` (multiples of `h`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_cells: Option<f64>,
    pub variant: EquationVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallEntry {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeKind {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Union {
        balls: Vec<BallEntry>,
    },
    Ellipse {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
    /// Level-set function read from a snapshot file, positive inside.
    Implicit {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSection {
    #[serde(flatten)]
    pub kind: ShapeKind,
    /// Saturation width in units of `ε`.
    #[serde(default = "default_k")]
    pub saturation: f64,
}

fn default_k() -> f64 {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub scheme: Scheme,
    /// Defaults to the stability bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub multiplier_mode: MultiplierMode,
    #[serde(default = "default_tol")]
    pub conservative_tol: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_tol() -> f64 {
    DEFAULT_CONSERVATIVE_TOL
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    /// Steps between time-series rows.
    #[serde(default = "one")]
    pub cadence: usize,
    /// Steps between snapshots; 0 writes only the first and last state.
    #[serde(default)]
    pub snapshot_cadence: usize,
    /// Output directory, relative to the output root when one is set.
    pub output: PathBuf,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Ball radii for the density scan; empty means dyadic `2h … 1/4`.
    #[serde(default)]
    pub density_radii: Vec<f64>,
    /// Scan centres per axis.
    #[serde(default = "default_per_axis")]
    pub density_per_axis: usize,
    /// States kept in memory for the density and monotonicity checks.
    #[serde(default = "default_frames")]
    pub history_frames: usize,
    #[serde(default = "default_samples")]
    pub monotonicity_samples: usize,
    #[serde(default = "default_c5")]
    pub c5: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_per_axis() -> usize {
    32
}

fn default_frames() -> usize {
    16
}

fn default_samples() -> usize {
    20
}

fn default_c5() -> f64 {
    vpmcf_core::diagnostics::monotonicity::DEFAULT_C5
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            density_radii: Vec::new(),
            density_per_axis: default_per_axis(),
            history_frames: default_frames(),
            monotonicity_samples: default_samples(),
            c5: default_c5(),
            seed: 0,
        }
    }
}

/// Everything a run needs, checked against the library's preconditions.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: GridSpec,
    pub disc: Discretization,
    pub eps: f64,
    pub variant: EquationVariant,
    pub shape: ShapeSpec,
    pub saturation: f64,
    pub stepper: StepperSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eps(&self) -> Result<f64, Failure> {
        match (self.model.eps, self.model.eps_cells) {
            (Some(e), None) => Ok(e),
            (None, Some(c)) => Ok(c / self.grid.n as f64),
            _ => Err(Failure::Validation(
                "model: give exactly one of eps and eps_cells".into(),
            )),
        }
    }

    /// Validates every section; nothing grid-sized is allocated except an
    /// implicit shape's level set.
    pub fn resolve(&self, base: &Path) -> Result<Resolved, Failure> {
        if !(1..=3).contains(&self.grid.d) {
            return Err(Failure::Validation(format!(
                "grid: d must be 1, 2 or 3, got {}",
                self.grid.d
            )));
        }
        if self.grid.d == 1 {
            log::warn!("d = 1 lies outside the dimensions the flow is analysed in; treat results as extrapolation");
        }
        let grid = GridSpec::new(self.grid.d, self.grid.n)?;
        let disc: Discretization = self.grid.discretization.into();
        disc.check(&grid)?;
        let eps = self.eps()?;
        check_resolution(&grid, eps)?;
        let shape = self.shape_spec(base, &grid)?;
        let bound = StepperSpec::bound_for(self.stepper.scheme, self.stepper.safety, &grid, eps);
        let stepper = StepperSpec {
            scheme: self.stepper.scheme,
            dt: self.stepper.dt.unwrap_or(bound),
            multiplier_mode: self.stepper.multiplier_mode,
            conservative_tol: self.stepper.conservative_tol,
            safety: self.stepper.safety,
        };
        stepper.validate(&grid, eps)?;
        if !(self.run.t_final >= 0.0 && self.run.t_final.is_finite()) {
            return Err(Failure::Validation(format!(
                "run: t_final must be nonnegative, got {}",
                self.run.t_final
            )));
        }
        if self.run.cadence == 0 {
            return Err(Failure::Validation("run: cadence must be at least 1".into()));
        }
        let diag = &self.diagnostics;
        if diag.density_radii.iter().any(|r| !(*r > 0.0 && *r <= 0.25)) {
            return Err(Failure::Validation(
                "diagnostics: density radii must lie in (0, 1/4]".into(),
            ));
        }
        if diag.density_per_axis == 0 || diag.history_frames == 0 {
            return Err(Failure::Validation(
                "diagnostics: density_per_axis and history_frames must be positive".into(),
            ));
        }
        if !(diag.c5 >= 0.0) {
            return Err(Failure::Validation("diagnostics: c5 must be nonnegative".into()));
        }
        Ok(Resolved {
            grid,
            disc,
            eps,
            variant: self.model.variant,
            shape,
            saturation: self.shape.saturation,
            stepper,
        })
    }

    fn shape_spec(&self, base: &Path, grid: &GridSpec) -> Result<ShapeSpec, Failure> {
        let d = grid.d();
        let shape = match &self.shape.kind {
            ShapeKind::Ball { center, radius } => ShapeSpec::ball(center, *radius),
            ShapeKind::Union { balls } => {
                let list: Vec<(&[f64], f64)> = balls.iter().map(|b| (b.center.as_slice(), b.radius)).collect();
                ShapeSpec::union(&list)
            }
            ShapeKind::Ellipse { center, semi_axes } => ShapeSpec::ellipse(center, semi_axes),
            ShapeKind::Implicit { path } => {
                let path = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let snap = Snapshot::load(&path)?;
                if snap.field.grid() != grid {
                    return Err(Failure::Validation(format!(
                        "shape: level set in {} is not on the configured grid",
                        path.display()
                    )));
                }
                ShapeSpec::Implicit(snap.field)
            }
        };
        let lengths = match &self.shape.kind {
            ShapeKind::Ball { center, .. } | ShapeKind::Ellipse { center, .. } => vec![center.len()],
            ShapeKind::Union { balls } => balls.iter().map(|b| b.center.len()).collect(),
            ShapeKind::Implicit { .. } => vec![d],
        };
        if let Some(l) = lengths.iter().find(|&&l| l != d) {
            return Err(Failure::Validation(format!(
                "shape: centre has {l} coordinates, grid has d = {d}"
            )));
        }
        if let ShapeKind::Ellipse { semi_axes, .. } = &self.shape.kind {
            if semi_axes.len() != d {
                return Err(Failure::Validation(format!(
                    "shape: {} semi-axes for d = {d}",
                    semi_axes.len()
                )));
            }
        }
        shape.validate(d)?;
        if !matches!(shape, ShapeSpec::Implicit(_)) {
            shape.check_clearance(d, CLEARANCE * self.eps()?)?;
        }
        Ok(shape)
    }
}

/// The initial field of a resolved configuration.
pub fn initial_field(r: &Resolved) -> Result<ScalarField, Failure> {
    Ok(vpmcf_core::make_initial(&r.shape, r.eps, &r.grid, r.saturation)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const DISC: &str = r#"
[grid]
d = 2
n = 64
discretization = "spectral"

[model]
eps_cells = 4.0
variant = "golovaty"

[shape]
kind = "ball"
center = [0.5, 0.5]
radius = 0.25

[stepper]
scheme = "semi-implicit-spectral"
multiplier_mode = "conservative"

[run]
t_final = 0.001
cadence = 2
output = "disc"
"#;

    #[test]
    fn parses_and_resolves() {
        let c = RunConfig::parse(DISC).unwrap();
        assert_eq!(c.shape.saturation, DEFAULT_K);
        assert_eq!(c.diagnostics, DiagnosticsSection::default());
        let r = c.resolve(Path::new(".")).unwrap();
        assert_eq!(r.eps, 4.0 / 64.0);
        assert_eq!(
            r.stepper.dt,
            StepperSpec::bound_for(r.stepper.scheme, r.stepper.safety, &r.grid, r.eps)
        );
    }

    #[test]
    fn round_trip_is_identity() {
        let c = RunConfig::parse(DISC).unwrap();
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        let mut u = c.clone();
        u.shape.kind = ShapeKind::Union {
            balls: vec![
                BallEntry {
                    center: vec![0.3, 0.3],
                    radius: 0.1,
                },
                BallEntry {
                    center: vec![0.7, 0.7],
                    radius: 0.15,
                },
            ],
        };
        u.stepper.dt = Some(1e-5);
        assert_eq!(RunConfig::parse(&u.to_toml()).unwrap(), u);
    }

    #[test]
    fn validation_failures() {
        let bad = DISC.replace("eps_cells = 4.0", "eps_cells = 2.0");
        let err = RunConfig::parse(&bad).unwrap().resolve(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("resolution guard"), "{err}");
        let both = DISC.replace("eps_cells = 4.0", "eps_cells = 4.0\neps = 0.1");
        assert!(RunConfig::parse(&both).unwrap().resolve(Path::new(".")).is_err());
        let unknown = DISC.replace("cadence = 2", "cadence = 2\nbogus = 1");
        assert!(RunConfig::parse(&unknown).is_err());
        let wrong_d = DISC.replace("center = [0.5, 0.5]", "center = [0.5, 0.5, 0.5]");
        assert!(RunConfig::parse(&wrong_d).unwrap().resolve(Path::new(".")).is_err());
    }
}
