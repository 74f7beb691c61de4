//! Geometric descriptions of the initial set `U₀` and exact signed distances
//! to its boundary (positive inside) on the periodic torus.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{GridSpec, Point, ScalarField};
use crate::interface::{distance_to_simplex, InterfaceMesh};

/// Root tolerance of the ellipse projection solve.
const ELLIPSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Ball(Ball),
    /// Union of balls. The signed distance is the maximum of the
    /// per-ball signed distances, which is exact for disjoint balls.
    Union(Vec<Ball>),
    /// Axis-aligned ellipse (ellipsoid in 3-D).
    Ellipse {
        center: Point,
        semi_axes: Point,
    },
    /// Sampled level-set function, positive inside.
    Implicit(ScalarField),
}

impl ShapeSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        ShapeSpec::Ball(Ball {
            center: to_point(center),
            radius,
        })
    }

    pub fn union(balls: &[(&[f64], f64)]) -> Self {
        ShapeSpec::Union(
            balls
                .iter()
                .map(|(c, r)| Ball {
                    center: to_point(c),
                    radius: *r,
                })
                .collect(),
        )
    }

    pub fn ellipse(center: &[f64], semi_axes: &[f64]) -> Self {
        ShapeSpec::Ellipse {
            center: to_point(center),
            semi_axes: to_point(semi_axes),
        }
    }

    /// The balls making up this shape, if it is a ball or union of balls.
    pub fn balls(&self) -> Option<Vec<Ball>> {
        match self {
            ShapeSpec::Ball(b) => Some(vec![*b]),
            ShapeSpec::Union(bs) => Some(bs.clone()),
            _ => None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let positive = |r: f64, what: &str| {
            if r > 0.0 && r.is_finite() {
                Ok(())
            } else {
                Err(Error::ShapeRejected(format!("{what} must be positive, got {r}")))
            }
        };
        match self {
            ShapeSpec::Ball(b) => positive(b.radius, "radius"),
            ShapeSpec::Union(bs) => {
                if bs.is_empty() {
                    return Err(Error::ShapeRejected("union of zero balls".into()));
                }
                bs.iter().try_for_each(|b| positive(b.radius, "radius"))
            }
            ShapeSpec::Ellipse { semi_axes, .. } => semi_axes[..d].iter().try_for_each(|&a| positive(a, "semi-axis")),
            ShapeSpec::Implicit(f) => {
                if f.grid().d() != d {
                    return Err(Error::ShapeRejected("implicit field has the wrong dimension".into()));
                }
                if !f.values().iter().any(|&v| v > 0.0) {
                    return Err(Error::ShapeRejected("implicit field has no interior".into()));
                }
                Ok(())
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` of the closed set.
    pub fn bounding_box(&self, d: usize) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut grow = |c: &Point, r: &Point| {
            for axis in 0..d {
                lo[axis] = lo[axis].min(c[axis] - r[axis]);
                hi[axis] = hi[axis].max(c[axis] + r[axis]);
            }
        };
        match self {
            ShapeSpec::Ball(b) => grow(&b.center, &[b.radius; 3]),
            ShapeSpec::Union(bs) => bs.iter().for_each(|b| grow(&b.center, &[b.radius; 3])),
            ShapeSpec::Ellipse { center, semi_axes } => grow(center, semi_axes),
            ShapeSpec::Implicit(f) => {
                let g = f.grid();
                for (i, &v) in f.values().iter().enumerate() {
                    if v > 0.0 {
                        grow(&g.node(i), &[g.h(); 3]);
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Checks that the bounding box keeps at least `clearance` from the
    /// periodic seam, i.e. lies in `[clearance, 1 - clearance]^d`.
    pub fn check_clearance(&self, d: usize, clearance: f64) -> Result<()> {
        let (lo, hi) = self.bounding_box(d);
        for axis in 0..d {
            if lo[axis] < clearance || hi[axis] > 1.0 - clearance {
                return Err(Error::ShapeRejected(format!(
                    "shape spans [{:.4}, {:.4}] along axis {axis}; it must stay inside [{clearance:.4}, {:.4}]",
                    lo[axis],
                    hi[axis],
                    1.0 - clearance
                )));
            }
        }
        Ok(())
    }

    /// Lebesgue measure of the set (analytic shapes only).
    pub fn volume(&self, d: usize) -> Option<f64> {
        match self {
            ShapeSpec::Ball(b) => Some(ball_volume(d, b.radius)),
            ShapeSpec::Union(bs) => Some(bs.iter().map(|b| ball_volume(d, b.radius)).sum()),
            ShapeSpec::Ellipse { semi_axes, .. } => Some(ball_volume(d, 1.0) * semi_axes[..d].iter().product::<f64>()),
            ShapeSpec::Implicit(_) => None,
        }
    }

    /// Signed distance at `x` for the analytic shapes, including periodic images.
    fn analytic_distance(&self, d: usize, x: &Point) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for image in periodic_images(d) {
            let y = [x[0] + image[0], x[1] + image[1], x[2] + image[2]];
            let v = match self {
                ShapeSpec::Ball(b) => ball_distance(d, b, &y),
                ShapeSpec::Union(bs) => bs
                    .iter()
                    .map(|b| ball_distance(d, b, &y))
                    .fold(f64::NEG_INFINITY, f64::max),
                ShapeSpec::Ellipse { center, semi_axes } => {
                    let mut rel = [0.0; 3];
                    for axis in 0..d {
                        rel[axis] = y[axis] - center[axis];
                    }
                    ellipsoid_signed_distance(&semi_axes[..d], &rel[..d])
                }
                ShapeSpec::Implicit(_) => unreachable!("implicit shapes are handled separately"),
            };
            best = best.max(v);
        }
        best
    }
}

fn to_point(v: &[f64]) -> Point {
    let mut p = [0.0; 3];
    p[..v.len().min(3)].copy_from_slice(&v[..v.len().min(3)]);
    p
}

/// Volume of the `d`-ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

/// `ω_d`: 2 for d = 1, π for d = 2, 4π/3 for d = 3; `ω_0 = 1`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(d as f64 / 2.0) / gamma_half_int(d + 2),
    }
}

/// Γ(m/2) for a positive integer m.
fn gamma_half_int(m: usize) -> f64 {
    if m == 1 {
        PI.sqrt()
    } else if m == 2 {
        1.0
    } else {
        (m as f64 / 2.0 - 1.0) * gamma_half_int(m - 2)
    }
}

fn periodic_images(d: usize) -> Vec<Point> {
    let mut out = Vec::new();
    let range = |axis: usize| if axis < d { -1..=1 } else { 0..=0 };
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                out.push([a as f64, b as f64, c as f64]);
            }
        }
    }
    out
}

fn ball_distance(d: usize, b: &Ball, x: &Point) -> f64 {
    let r2: f64 = (0..d).map(|a| (x[a] - b.center[a]).powi(2)).sum();
    b.radius - r2.sqrt()
}

/// Signed distance from `y` (relative to the centre) to the axis-aligned
/// ellipsoid with the given semi-axes; positive inside.
pub fn ellipsoid_signed_distance(semi_axes: &[f64], y: &[f64]) -> f64 {
    let inside = semi_axes.iter().zip(y).map(|(e, v)| (v / e).powi(2)).sum::<f64>() < 1.0;
    // Reduce to the first orthant with axes sorted in decreasing order.
    let mut pairs: Vec<(f64, f64)> = semi_axes.iter().zip(y).map(|(e, v)| (*e, v.abs())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let e: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let z: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let dist = ellipsoid_distance_sorted(&e, &z);
    if inside {
        dist
    } else {
        -dist
    }
}

/// Unsigned distance from `y ≥ 0` to the ellipsoid with semi-axes `e`
/// sorted in non-increasing order.
fn ellipsoid_distance_sorted(e: &[f64], y: &[f64]) -> f64 {
    let m = e.len();
    if m == 1 {
        return (y[0] - e[0]).abs();
    }
    let e_min = e[m - 1];
    let minimal: Vec<usize> = (0..m).filter(|&i| e[i] == e_min).collect();
    if minimal.iter().any(|&i| y[i] > 0.0) {
        // Regular case: the projection is x_i = e_i² y_i / (t + e_i²) with
        // t the unique root of F(t) = Σ (e_i y_i / (t + e_i²))² - 1 on
        // (-e_min², ∞).
        let t = projection_root(e, y);
        return e
            .iter()
            .zip(y)
            .map(|(&ei, &yi)| {
                let xi = ei * ei * yi / (t + ei * ei);
                (xi - yi).powi(2)
            })
            .sum::<f64>()
            .sqrt();
    }
    // The query lies in the hyperplane(s) of the shortest axes.
    let others: Vec<usize> = (0..m).filter(|&i| e[i] > e_min).collect();
    let mut s = 0.0;
    let mut x = vec![0.0; m];
    for &i in &others {
        let denom = e[i] * e[i] - e_min * e_min;
        let xde = e[i] * y[i] / denom;
        x[i] = e[i] * xde;
        s += xde * xde;
    }
    if s < 1.0 {
        let off: f64 = others.iter().map(|&i| (x[i] - y[i]).powi(2)).sum();
        return (off + e_min * e_min * (1.0 - s)).sqrt();
    }
    let e_sub: Vec<f64> = others.iter().map(|&i| e[i]).collect();
    let y_sub: Vec<f64> = others.iter().map(|&i| y[i]).collect();
    if e_sub.is_empty() {
        // all axes equal: a sphere
        let r: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        return (r - e_min).abs();
    }
    ellipsoid_distance_sorted(&e_sub, &y_sub)
}

/// Newton iteration on the monotone convex function F, with bisection
/// whenever a Newton step leaves the current bracket.
fn projection_root(e: &[f64], y: &[f64]) -> f64 {
    let e_min = e[e.len() - 1];
    let f = |t: f64| -> (f64, f64) {
        let mut val = -1.0;
        let mut der = 0.0;
        for (&ei, &yi) in e.iter().zip(y) {
            let r = ei * yi / (t + ei * ei);
            val += r * r;
            der -= 2.0 * r * r / (t + ei * ei);
        }
        (val, der)
    };
    let y_min = e
        .iter()
        .zip(y)
        .filter(|(&ei, _)| ei == e_min)
        .map(|(_, &yi)| yi)
        .fold(0.0, f64::max);
    let mut lo = -e_min * e_min + e_min * y_min;
    let mut hi = -e_min * e_min + e.iter().zip(y).map(|(ei, yi)| (ei * yi).powi(2)).sum::<f64>().sqrt();
    if hi <= lo {
        return lo;
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (val, der) = f(t);
        if val == 0.0 {
            return t;
        }
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - val / der;
        let next = if der < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= ELLIPSE_TOL * (1.0 + t.abs()) || hi - lo <= ELLIPSE_TOL * (1.0 + t.abs()) {
            return next;
        }
        t = next;
    }
    t
}

/// Signed distance field `r` sampled at the grid nodes, optionally saturated.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceField {
    pub field: ScalarField,
    /// `K·ε` once the field has been saturated.
    pub band: Option<f64>,
}

/// Exact signed distance to `∂U₀` (positive inside) at every node.
pub fn signed_distance(shape: &ShapeSpec, grid: &GridSpec) -> Result<SignedDistanceField> {
    let d = grid.d();
    shape.validate(d)?;
    let (lo, hi) = shape.bounding_box(d);
    if (0..d).any(|a| lo[a] <= 0.0 || hi[a] >= 1.0) {
        return Err(Error::ShapeRejected(
            "shape must be compactly contained in the open unit cube".into(),
        ));
    }
    let field = match shape {
        ShapeSpec::Implicit(f) => {
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
            implicit_distance(f)
        }
        _ => ScalarField::from_fn(*grid, |x| shape.analytic_distance(d, x))?,
    };
    Ok(SignedDistanceField { field, band: None })
}

/// Distance to the extracted zero level set, with the sign of the sampled
/// function. Simplices are binned into a coarse periodic bucket grid and
/// each node searches outward ring by ring.
fn implicit_distance(f: &ScalarField) -> ScalarField {
    let grid = *f.grid();
    let d = grid.d();
    let mesh = InterfaceMesh::extract(f);
    let simplices: Vec<Vec<Point>> = (0..mesh.simplex_count()).map(|i| mesh.simplex(i)).collect();
    let m = (grid.n() / 4).max(1);
    let size = 1.0 / m as f64;
    let bucket_of = |x: f64| ((x.rem_euclid(1.0) / size) as isize).min(m as isize - 1);
    let mut buckets: HashMap<[isize; 3], Vec<usize>> = HashMap::new();
    for (si, s) in simplices.iter().enumerate() {
        let mut lo = [0isize; 3];
        let mut hi = [0isize; 3];
        for axis in 0..d {
            let (a, b) = s
                .iter()
                .map(|p| p[axis])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            lo[axis] = (a / size).floor() as isize;
            hi[axis] = (b / size).floor() as isize;
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let key = [i, j, k].map(|v| v.rem_euclid(m as isize));
                    buckets.entry(key).or_default().push(si);
                }
            }
        }
    }
    let values = (0..grid.len())
        .map(|node| {
            let v = f.values()[node];
            if v == 0.0 || simplices.is_empty() {
                return 0.0;
            }
            let x = grid.node(node);
            let mut home = [0isize; 3];
            for axis in 0..d {
                home[axis] = bucket_of(x[axis]);
            }
            let mut best = f64::INFINITY;
            let max_ring = m as isize / 2 + 1;
            for ring in 0..=max_ring {
                if 2 * ring + 1 >= m as isize {
                    // the ring covers the whole torus
                    best = simplices
                        .iter()
                        .map(|s| distance_to_simplex(&grid, &x, s))
                        .fold(best, f64::min);
                    break;
                }
                let span = |axis: usize| if axis < d { -ring..=ring } else { 0..=0 };
                for a in span(0) {
                    for b in span(1) {
                        for c in span(2) {
                            let off = [a, b, c];
                            if (0..d).all(|ax| off[ax].abs() < ring) {
                                continue;
                            }
                            let key = [0, 1, 2].map(|ax| (home[ax] + off[ax]).rem_euclid(m as isize));
                            if let Some(list) = buckets.get(&key) {
                                for &si in list {
                                    best = best.min(distance_to_simplex(&grid, &x, &simplices[si]));
                                }
                            }
                        }
                    }
                }
                if best <= ring as f64 * size {
                    break;
                }
            }
            if v > 0.0 {
                best
            } else {
                -best
            }
        })
        .collect();
    ScalarField::from_raw(grid, values)
}
