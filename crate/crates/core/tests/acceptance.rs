//! End-to-end acceptance checks. Each test prints one `[PASS]`/`[FAIL]`
//! line to stderr, visible without `--nocapture`.
//! Shared runs are computed once per process.
#![allow(clippy::needless_range_loop)]

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpmcf_core::diagnostics::monotonicity::DEFAULT_C5;
use vpmcf_core::dynamics::*;
use vpmcf_core::oracle::{ac_radius, uniform_times};
use vpmcf_core::shape::ellipsoid_signed_distance;
use vpmcf_core::*;

// Tolerances.
const VOLUME_TOL: f64 = 1e-10;
const ORDER_RANGE: (f64, f64) = (1.7, 2.3);
const ENERGY_STEP_TOL: f64 = 1e-12;
const FORM_TOL: f64 = 1e-10;
/// Multipliers below this are compared in absolute terms (curvature scale).
const FORM_FLOOR: f64 = 1.0;
const FIXED_POINT_TOL: f64 = 1e-14;
const DISCREPANCY_REL_TOL: f64 = 1e-10;
/// `τ(h, dt) = TAU_C·((h/ε)² + dt/ε²)/ε`.
const TAU_C: f64 = 0.03;
const STATIONARY_TOL: f64 = 0.02;
const AC_TOL: f64 = 0.03;
const TRACKING_TOL: f64 = 0.05;
const MONO_REL_TOL: f64 = 1e-6;
const MONO_DRAWS: usize = 20;
const DENSITY_GROWTH: f64 = 3.0;
const SLOPE_TOL: f64 = 0.2;
const OVERSHOOT: f64 = 1e-6;

fn report(criterion: &str, pass: bool, detail: String) {
    let line = format!("[{}] {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
    // straight to the handle: the harness captures `println!` of passing tests
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(pass, "{line}");
}

fn in_range(r: f64) -> bool {
    r >= ORDER_RANGE.0 && r <= ORDER_RANGE.1
}

// ---------------------------------------------------------------- shared runs

const ELLIPSE_N: usize = 128;
const ELLIPSE_T: f64 = 0.02;
const FRACTIONS: [f64; 3] = [1.0, 0.5, 0.25];

struct EllipseRuns {
    conservative: Vec<RunOutput>,
    analytic: Vec<RunOutput>,
}

fn ellipse_runs() -> &'static EllipseRuns {
    static RUNS: OnceLock<EllipseRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let g = GridSpec::new(2, ELLIPSE_N).unwrap();
        let eps = 4.0 * g.h();
        let phi = initial(&ellipse(), ELLIPSE_N, eps);
        let batch = |mode: MultiplierMode| {
            FRACTIONS
                .iter()
                .map(|&f| {
                    execute(RunPlan {
                        name: format!("ellipse n=128 {mode:?} dt=b*{f}"),
                        phi: phi.clone(),
                        eps,
                        variant: EquationVariant::Golovaty,
                        disc: Discretization::Spectral,
                        spec: semi(mode, f, &g, eps),
                        t_final: ELLIPSE_T,
                        cadence: 1,
                        frames: 4,
                    })
                })
                .collect()
        };
        EllipseRuns {
            conservative: batch(MultiplierMode::Conservative),
            analytic: batch(MultiplierMode::Analytic),
        }
    })
}

const DISC_N: usize = 256;
const DISC_R0: f64 = 0.3;

/// Time at which the plain mean-curvature radius has lost 20%.
fn t_star() -> f64 {
    (DISC_R0 * DISC_R0 - (0.8 * DISC_R0).powi(2)) / 2.0
}

struct DiscRuns {
    golovaty: RunOutput,
    plain: RunOutput,
}

fn disc_runs() -> &'static DiscRuns {
    static RUNS: OnceLock<DiscRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let g = GridSpec::new(2, DISC_N).unwrap();
        let eps = 4.0 * g.h();
        let phi = initial(&disc(DISC_R0), DISC_N, eps);
        let plan = |variant: EquationVariant, mode: MultiplierMode| RunPlan {
            name: format!("disc n=256 {}", variant.name()),
            phi: phi.clone(),
            eps,
            variant,
            disc: Discretization::Spectral,
            spec: semi(mode, 1.0, &g, eps),
            t_final: t_star(),
            cadence: 1,
            frames: 24,
        };
        DiscRuns {
            golovaty: execute(plan(EquationVariant::Golovaty, MultiplierMode::Conservative)),
            plain: execute(plan(EquationVariant::PlainAllenCahn, MultiplierMode::Analytic)),
        }
    })
}

struct Tracking {
    worst: f64,
    run: RunOutput,
}

/// Two-disc run against the oracle at ten equally spaced times up to the
/// moment the smaller radius has halved.
fn tracking(n: usize, safety: f64) -> Tracking {
    let g = GridSpec::new(2, n).unwrap();
    let eps = 4.0 * g.h();
    let r0 = [0.15, 0.25];
    let dense = oracle_integrate(&r0, 2, &uniform_times(0.1, 20_000)).unwrap();
    let t_end = dense.times[dense.radii.iter().position(|r| r[0] <= 0.5 * r0[0]).unwrap()];
    let times = uniform_times(t_end, 10);
    let oracle = oracle_integrate(&r0, 2, &times).unwrap();
    let disc = Discretization::Spectral;
    let spec = spec(
        Scheme::SemiImplicitSpectral,
        MultiplierMode::Conservative,
        safety,
        1.0,
        &g,
        eps,
    );
    let phi = initial(&two_discs(), n, eps);
    let mut state = EvolutionState::new(phi.clone(), eps, EquationVariant::Golovaty, disc).unwrap();
    let mut records = vec![state.record(disc).unwrap()];
    let mut frames = vec![HistoryFrame {
        t: 0.0,
        phi,
        lambda_sq_accum: 0.0,
    }];
    let mut worst: f64 = 0.0;
    for (i, &t) in times.iter().enumerate().skip(1) {
        let (next, recs) = run(state, &spec, disc, t, usize::MAX).unwrap();
        state = next;
        records.push(recs.last().unwrap().clone());
        let r = radii(&state.phi);
        assert_eq!(r.len(), 2, "two interfaces expected at t = {t}");
        for k in 0..2 {
            worst = worst.max((r[k] - oracle.radii[i][k]).abs() / oracle.radii[i][k]);
        }
        frames.push(HistoryFrame {
            t: state.t,
            phi: state.phi.clone(),
            lambda_sq_accum: state.lambda_sq_accum,
        });
    }
    let density0 = density_sup(&frames[0].phi, eps, disc);
    let density_max = frames
        .iter()
        .map(|f| density_sup(&f.phi, eps, disc))
        .fold(0.0, f64::max);
    Tracking {
        worst,
        run: RunOutput {
            name: format!("two discs n={n} safety={safety}"),
            dt: spec.dt,
            overshoot_events: state.overshoot_events,
            records,
            frames,
            state,
            density0,
            density_max,
        },
    }
}

/// Safety factors for the two resolutions: the semi-implicit splitting error
/// in the interface velocity scales with `dt/ε²`, so it is refined with `h`.
const TRACKING_RUNS: [(usize, f64); 2] = [(256, 0.05), (512, 0.025)];

fn tracking_runs() -> &'static Vec<Tracking> {
    static RUNS: OnceLock<Vec<Tracking>> = OnceLock::new();
    RUNS.get_or_init(|| TRACKING_RUNS.iter().map(|&(n, s)| tracking(n, s)).collect())
}

const REFINE_EPS: f64 = 1.0 / 32.0;
const REFINEMENT: [(usize, f64); 3] = [(128, 1.0), (256, 0.5), (512, 0.25)];

/// Fixed-ε ellipse runs under simultaneous `(h, dt)` refinement, for both
/// discretizations.
fn refinement_runs() -> &'static Vec<(Discretization, Vec<RunOutput>)> {
    static RUNS: OnceLock<Vec<(Discretization, Vec<RunOutput>)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [Discretization::Spectral, Discretization::Central2]
            .into_iter()
            .map(|disc| {
                let runs = REFINEMENT
                    .iter()
                    .map(|&(n, f)| {
                        let g = GridSpec::new(2, n).unwrap();
                        execute(RunPlan {
                            name: format!("ellipse eps=1/32 n={n} {}", disc.name()),
                            phi: initial(&ellipse(), n, REFINE_EPS),
                            eps: REFINE_EPS,
                            variant: EquationVariant::Golovaty,
                            disc,
                            spec: semi(MultiplierMode::Conservative, f, &g, REFINE_EPS),
                            t_final: ELLIPSE_T,
                            cadence: 1,
                            frames: 4,
                        })
                    })
                    .collect();
                (disc, runs)
            })
            .collect()
    })
}

fn tau(n: usize, dt: f64, eps: f64) -> f64 {
    let h = 1.0 / n as f64;
    TAU_C * ((h / eps).powi(2) + dt / (eps * eps)) / eps
}

/// Every regression run, for the checks that apply to all of them.
fn all_runs() -> Vec<&'static RunOutput> {
    let e = ellipse_runs();
    let d = disc_runs();
    let mut v: Vec<&RunOutput> = e.conservative.iter().chain(&e.analytic).collect();
    v.push(&d.golovaty);
    v.push(&d.plain);
    v.extend(tracking_runs().iter().map(|t| &t.run));
    for (_, runs) in refinement_runs() {
        v.extend(runs);
    }
    v
}

// ----------------------------------------------------------------- criteria

#[test]
fn c01_volume_conservation() {
    let runs = ellipse_runs();
    let drift_cons = runs.conservative.iter().map(|r| r.volume_drift()).fold(0.0, f64::max);
    let drifts: Vec<f64> = runs.analytic.iter().map(|r| r.volume_drift()).collect();
    let ratios = [drifts[0] / drifts[1], drifts[1] / drifts[2]];
    let pass = drift_cons <= VOLUME_TOL && ratios.iter().all(|r| in_range(*r));
    report(
        "C1 volume conservation",
        pass,
        format!(
            "conservative max drift {drift_cons:.2e} (tol {VOLUME_TOL:.0e}); analytic drifts {:.3e}, {:.3e}, {:.3e}, ratios {:.3}, {:.3}",
            drifts[0], drifts[1], drifts[2], ratios[0], ratios[1]
        ),
    );
}

#[test]
fn c02_dissipation_identity() {
    let runs = ellipse_runs();
    let mut worst_rise = f64::NEG_INFINITY;
    for r in runs.conservative.iter().chain(&runs.analytic) {
        for w in r.records.windows(2) {
            worst_rise = worst_rise.max(w[1].energy - w[0].energy);
        }
    }
    let residuals: Vec<f64> = runs
        .conservative
        .iter()
        .map(|r| r.records.last().unwrap().dissipation_residual)
        .collect();
    let ratios = [residuals[0] / residuals[1], residuals[1] / residuals[2]];
    let pass = worst_rise <= ENERGY_STEP_TOL && ratios.iter().all(|r| in_range(*r));
    report(
        "C2 dissipation identity",
        pass,
        format!(
            "largest per-step energy change {worst_rise:.2e}; final residuals {:.3e}, {:.3e}, {:.3e}, ratios {:.3}, {:.3}",
            residuals[0], residuals[1], residuals[2], ratios[0], ratios[1]
        ),
    );
}

fn random_smooth_field(rng: &mut ChaCha8Rng, grid: GridSpec) -> ScalarField {
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-4..=4) as f64,
                rng.gen_range(-4..=4) as f64,
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();
    let amp = rng.gen_range(0.5..0.95);
    ScalarField::from_fn(grid, |x| {
        let s: f64 = modes
            .iter()
            .map(|(a, b, p, c)| c * (2.0 * PI * (a * x[0] + b * x[1]) + p).cos())
            .sum();
        amp * (s / 2.0).tanh()
    })
    .unwrap()
}

#[test]
fn c03_multiplier_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = GridSpec::new(2, 64).unwrap();
    let mut floored = 0;
    let mut rel = |phi: &ScalarField, eps: f64| {
        let (a, b) = lambda_golovaty(phi, eps, Discretization::Spectral).unwrap();
        // symmetric random fields have multipliers at round-off level, where a
        // ratio to |A| measures nothing
        if a.abs() < FORM_FLOOR {
            floored += 1;
        }
        (a - b).abs() / a.abs().max(FORM_FLOOR)
    };
    let random = (0..100)
        .map(|_| rel(&random_smooth_field(&mut rng, g), rng.gen_range(3.0..8.0) * g.h()))
        .fold(0.0, f64::max);
    let mut states = 0;
    let mut regression: f64 = 0.0;
    for r in all_runs()
        .into_iter()
        .filter(|r| r.state.variant == EquationVariant::Golovaty)
    {
        for f in &r.frames {
            regression = regression.max(rel(&f.phi, r.state.eps));
            states += 1;
        }
    }
    report(
        "C3 multiplier form equivalence",
        random <= FORM_TOL && regression <= FORM_TOL,
        format!(
            "max relative gap {random:.2e} on 100 random fields, {regression:.2e} on {states} regression states \
             ({floored} with |A| < {FORM_FLOOR} compared absolutely)"
        ),
    );
}

#[test]
fn c04_constant_fixed_points() {
    let g = GridSpec::new(2, 32).unwrap();
    let eps = 4.0 * g.h();
    let mut worst_by_variant = Vec::new();
    for variant in EquationVariant::ALL {
        let mut worst: f64 = 0.0;
        for c in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let phi = ScalarField::constant(g, c).unwrap();
            let configs = [
                (Scheme::ExplicitEuler, Discretization::Central2),
                (Scheme::SemiImplicitSpectral, Discretization::Spectral),
            ];
            for (scheme, disc) in configs {
                for mode in [MultiplierMode::Analytic, MultiplierMode::Conservative] {
                    let spec = spec(scheme, mode, DEFAULT_SAFETY, 1.0, &g, eps);
                    let state = EvolutionState::new(phi.clone(), eps, variant, disc).unwrap();
                    let next = step(&state, &spec, disc).unwrap();
                    let change = next.phi.values().iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
                    worst = worst.max(change);
                }
            }
        }
        worst_by_variant.push((variant, worst));
    }
    let pass = worst_by_variant.iter().all(|(_, w)| *w <= FIXED_POINT_TOL);
    let detail = worst_by_variant
        .iter()
        .map(|(v, w)| format!("{} {w:.1e}", v.name()))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        "C4 constant fixed points",
        pass,
        format!("max one-step change: {detail} (tol {FIXED_POINT_TOL:.0e})"),
    );
}

/// Largest distance from a zero-set vertex to the exact boundary.
fn zero_set_offset(shape: &ShapeSpec, phi: &ScalarField) -> f64 {
    let mesh = InterfaceMesh::extract(phi);
    mesh.vertices()
        .iter()
        .map(|x| match shape {
            ShapeSpec::Ellipse { center, semi_axes } => {
                let y = [x[0] - center[0], x[1] - center[1]];
                ellipsoid_signed_distance(&semi_axes[..2], &y).abs()
            }
            _ => {
                let b = &shape.balls().unwrap()[0];
                ((x[0] - b.center[0]).hypot(x[1] - b.center[1]) - b.radius).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn c05_initial_data_well_prepared() {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [128, 256] {
        let g = GridSpec::new(2, n).unwrap();
        let eps = 4.0 * g.h();
        for (name, shape) in [("disc", disc(0.25)), ("ellipse", ellipse())] {
            let phi = initial(&shape, n, eps);
            let rep = check_well_prepared(&phi, eps, Discretization::Central2).unwrap();
            let offset = zero_set_offset(&shape, &phi);
            let ok = rep.max_relative_discrepancy <= DISCREPANCY_REL_TOL
                && rep.density_ratio.is_finite()
                && !rep.fatal
                && offset <= g.h();
            pass &= ok;
            parts.push(format!(
                "{name} n={n}: rel discrepancy {:.1e}, density {:.3}, zero set within {:.2}h",
                rep.max_relative_discrepancy,
                rep.density_ratio,
                offset / g.h()
            ));
        }
    }
    report("C5 well-prepared initial data", pass, parts.join("; "));
}

#[test]
fn c06_discrepancy_sign() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (disc, runs) in refinement_runs() {
        let mut excess = Vec::new();
        let mut line = Vec::new();
        for (run, &(n, _)) in runs.iter().zip(&REFINEMENT) {
            let xi = run.max_discrepancy();
            let t = tau(n, run.dt, REFINE_EPS);
            excess.push((xi - t).max(0.0));
            line.push(format!("n={n} max xi {xi:.2e} / tau {t:.2e}"));
        }
        // beyond τ is tolerated only while it does not grow under refinement
        let ok = excess.windows(2).all(|w| w[1] <= w[0]);
        pass &= ok;
        parts.push(format!("{}: {}", disc.name(), line.join(", ")));
    }
    report("C6 discrepancy sign under refinement", pass, parts.join("; "));
}

#[test]
fn c07_stationary_disc() {
    let runs = disc_runs();
    let rg = radii(&runs.golovaty.state.phi);
    let rp = radii(&runs.plain.state.phi);
    let oracle = ac_radius(DISC_R0, 2, t_star()).unwrap();
    let dev_g = (rg[0] - DISC_R0).abs() / DISC_R0;
    let dev_p = (rp[0] - oracle).abs() / oracle;
    report(
        "C7 stationary disc vs plain Allen-Cahn",
        dev_g <= STATIONARY_TOL && dev_p <= AC_TOL,
        format!(
            "T*={:.4e}: golovaty radius {:.5} (deviation {:.2}%), plain AC radius {:.5} vs {oracle:.5} ({:.2}%)",
            t_star(),
            rg[0],
            100.0 * dev_g,
            rp[0],
            100.0 * dev_p
        ),
    );
}

#[test]
fn c08_two_disc_tracking() {
    let runs = tracking_runs();
    let pass = runs[0].worst <= TRACKING_TOL && runs[1].worst < runs[0].worst;
    let detail = runs
        .iter()
        .zip(&TRACKING_RUNS)
        .map(|(t, (n, _))| format!("n={n} worst {:.2}%", 100.0 * t.worst))
        .collect::<Vec<_>>()
        .join(", ");
    report("C8 two-disc oracle tracking", pass, detail);
}

#[test]
fn c09_monotonicity() {
    let run = &disc_runs().golovaty;
    let frames = &run.frames;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::INFINITY;
    for draw in 0..MONO_DRAWS {
        let i1 = rng.gen_range(0..frames.len() - 1);
        let i2 = rng.gen_range(i1 + 1..frames.len());
        let (t1, t2) = (frames[i1].t, frames[i2].t);
        let s = t2 + rng.gen_range(1e-4..0.05);
        // half the centres near the interface
        let y = if draw % 2 == 0 {
            let a = rng.gen_range(0.0..2.0 * PI);
            let r = DISC_R0 + rng.gen_range(-0.02..0.02);
            [0.5 + r * a.cos(), 0.5 + r * a.sin(), 0.0]
        } else {
            [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0]
        };
        let kernel = MonotonicityKernel { y, s };
        let m = monotonicity_check(
            frames,
            &kernel,
            t1,
            t2,
            DEFAULT_C5,
            run.state.eps,
            Discretization::Spectral,
        )
        .unwrap();
        worst = worst.min(m.slack / m.rhs);
    }
    report(
        "C9 monotonicity inequality",
        worst >= -MONO_REL_TOL,
        format!("smallest slack/rhs over {MONO_DRAWS} draws: {worst:.3e}"),
    );
}

#[test]
fn c10_density_bounded() {
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for r in all_runs() {
        let growth = r.density_max / r.density0;
        if growth > worst {
            worst = growth;
            at = r.name.clone();
        }
    }
    report(
        "C10 density boundedness",
        worst <= DENSITY_GROWTH,
        format!("largest sup-ratio growth {worst:.4} ({at})"),
    );
}

#[test]
fn c11_lambda_accumulation() {
    let recs = &disc_runs().golovaty.records;
    let t = recs.last().unwrap().t;
    let window = |a: f64, b: f64| {
        slope(
            &recs
                .iter()
                .filter(|r| r.t >= a * t && r.t <= b * t)
                .map(|r| (r.t, r.lambda_sq_accum))
                .collect::<Vec<_>>(),
        )
    };
    let late = window(0.5, 1.0);
    let early = window(0.25, 0.5);
    let rel = (late - early).abs() / early;
    report(
        "C11 lambda accumulation",
        rel <= SLOPE_TOL,
        format!(
            "slope over [T/2,T] {late:.4}, over [T/4,T/2] {early:.4} (difference {:.2}%), total {:.4}",
            100.0 * rel,
            recs.last().unwrap().lambda_sq_accum
        ),
    );
}

#[test]
fn c12_maximum_principle() {
    let mut worst: f64 = 0.0;
    let mut events = 0;
    for r in all_runs() {
        worst = worst.max(r.max_abs_phi());
        events += r.overshoot_events;
    }
    report(
        "C12 maximum principle",
        worst <= 1.0 + OVERSHOOT && events == 0,
        format!("max |phi| {worst:.10} over all regression runs, {events} overshoot steps"),
    );
}
