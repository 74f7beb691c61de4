//! Zero-level-set extraction on the periodic grid and least-squares
//! circle/sphere fits of the extracted components.
//!
//! Crossings are placed on grid edges by linear interpolation. In 2-D the
//! cells are contoured with marching squares (saddles resolved by the cell
//! average); in 3-D every cube is split into six tetrahedra around its main
//! diagonal and each tetrahedron is contoured separately.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::field::{GridSpec, Point, ScalarField};

/// Six tetrahedra sharing the diagonal 0-7 of a cube whose corners are
/// numbered `x + 2y + 4z`.
const CUBE_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 3, 2, 7],
    [0, 2, 6, 7],
    [0, 6, 4, 7],
    [0, 4, 5, 7],
    [0, 5, 1, 7],
];

#[derive(Debug, Clone)]
pub struct InterfaceMesh {
    grid: GridSpec,
    /// Crossing points wrapped into `[0,1)^d`.
    vertices: Vec<Point>,
    /// `d` vertex indices per simplex (points, segments or triangles).
    simplices: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereFit {
    pub center: Point,
    pub radius: f64,
    /// Root-mean-square of `|x - c| - R` over the component's vertices.
    pub rms_residual: f64,
    pub vertex_count: usize,
}

struct VertexTable<'a> {
    field: &'a ScalarField,
    by_edge: HashMap<(usize, usize), usize>,
    vertices: Vec<Point>,
}

impl<'a> VertexTable<'a> {
    fn crossing(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&i) = self.by_edge.get(&key) {
            return i;
        }
        let grid = self.field.grid();
        let (p, q) = (key.0, key.1);
        let (fp, fq) = (self.field.values()[p], self.field.values()[q]);
        let s = fp / (fp - fq);
        let xp = grid.node(p);
        let dx = grid.displacement(&grid.node(q), &xp);
        let mut x = [0.0; 3];
        for axis in 0..grid.d() {
            x[axis] = (xp[axis] + s * dx[axis]).rem_euclid(1.0);
        }
        let i = self.vertices.len();
        self.vertices.push(x);
        self.by_edge.insert(key, i);
        i
    }
}

fn inside(v: f64) -> bool {
    v > 0.0
}

impl InterfaceMesh {
    /// Extracts the zero level set of `f`; nodes with `f > 0` count as inside.
    pub fn extract(f: &ScalarField) -> InterfaceMesh {
        let grid = *f.grid();
        let mut table = VertexTable {
            field: f,
            by_edge: HashMap::new(),
            vertices: Vec::new(),
        };
        let mut simplices = Vec::new();
        let v = f.values();
        match grid.d() {
            1 => {
                for i in 0..grid.len() {
                    let j = grid.shifted(i, 0, 1);
                    if inside(v[i]) != inside(v[j]) {
                        simplices.push([table.crossing(i, j), 0, 0]);
                    }
                }
            }
            2 => {
                for c0 in 0..grid.len() {
                    let c1 = grid.shifted(c0, 0, 1);
                    let c2 = grid.shifted(c1, 1, 1);
                    let c3 = grid.shifted(c0, 1, 1);
                    let corners = [c0, c1, c2, c3];
                    let signs = corners.map(|c| inside(v[c]));
                    let mut crossed = Vec::with_capacity(4);
                    for e in 0..4 {
                        let (a, b) = (corners[e], corners[(e + 1) % 4]);
                        if signs[e] != signs[(e + 1) % 4] {
                            crossed.push((e, a, b));
                        }
                    }
                    match crossed.len() {
                        2 => {
                            let p = table.crossing(crossed[0].1, crossed[0].2);
                            let q = table.crossing(crossed[1].1, crossed[1].2);
                            simplices.push([p, q, 0]);
                        }
                        4 => {
                            let centre = corners.iter().map(|&c| v[c]).sum::<f64>() / 4.0;
                            let pairs = if inside(centre) == signs[0] {
                                [(0, 1), (2, 3)]
                            } else {
                                [(3, 0), (1, 2)]
                            };
                            for (e, g) in pairs {
                                let p = table.crossing(corners[e], corners[(e + 1) % 4]);
                                let q = table.crossing(corners[g], corners[(g + 1) % 4]);
                                simplices.push([p, q, 0]);
                            }
                        }
                        _ => {}
                    }
                }
            }
            _ => {
                for base in 0..grid.len() {
                    let mut corner = [0usize; 8];
                    for (bits, c) in corner.iter_mut().enumerate() {
                        let mut idx = base;
                        for axis in 0..3 {
                            if bits >> axis & 1 == 1 {
                                idx = grid.shifted(idx, axis, 1);
                            }
                        }
                        *c = idx;
                    }
                    for tet in CUBE_TETS {
                        let nodes = tet.map(|k| corner[k]);
                        let ins: Vec<usize> = (0..4).filter(|&k| inside(v[nodes[k]])).collect();
                        let outs: Vec<usize> = (0..4).filter(|&k| !inside(v[nodes[k]])).collect();
                        match ins.len() {
                            1 | 3 => {
                                let (lone, rest) = if ins.len() == 1 {
                                    (ins[0], &outs)
                                } else {
                                    (outs[0], &ins)
                                };
                                let t = [0, 1, 2].map(|m| table.crossing(nodes[lone], nodes[rest[m]]));
                                simplices.push(t);
                            }
                            2 => {
                                let (a, b) = (nodes[ins[0]], nodes[ins[1]]);
                                let (c, d) = (nodes[outs[0]], nodes[outs[1]]);
                                let ac = table.crossing(a, c);
                                let ad = table.crossing(a, d);
                                let bc = table.crossing(b, c);
                                let bd = table.crossing(b, d);
                                simplices.push([ac, ad, bd]);
                                simplices.push([ac, bd, bc]);
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        InterfaceMesh {
            grid,
            vertices: table.vertices,
            simplices,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn simplex_count(&self) -> usize {
        self.simplices.len()
    }

    /// Vertices of simplex `i`, unwrapped so they are contiguous in space.
    pub fn simplex(&self, i: usize) -> Vec<Point> {
        let k = self.grid.d();
        let s = &self.simplices[i];
        let x0 = self.vertices[s[0]];
        let mut out = vec![x0];
        for &vi in &s[1..k] {
            let dx = self.grid.displacement(&self.vertices[vi], &x0);
            out.push([x0[0] + dx[0], x0[1] + dx[1], x0[2] + dx[2]]);
        }
        out
    }

    /// Total `(d-1)`-dimensional measure: number of crossings in 1-D,
    /// length in 2-D, area in 3-D.
    pub fn measure(&self) -> f64 {
        (0..self.simplices.len())
            .map(|i| simplex_measure(&self.simplex(i)))
            .sum()
    }

    /// Vertex index sets of the connected components, ordered by their
    /// smallest vertex index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let k = self.grid.d();
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for s in &self.simplices {
            for &v in &s[1..k] {
                let (a, b) = (find(&mut parent, s[0]), find(&mut parent, v));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for v in 0..self.vertices.len() {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    /// Unwraps a component's vertices into a contiguous point cloud by
    /// walking the simplex adjacency.
    fn unwrap_component(&self, members: &[usize]) -> Vec<Point> {
        let k = self.grid.d();
        let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
        for s in &self.simplices {
            for a in 0..k {
                for b in 0..k {
                    if a != b {
                        adjacency.entry(s[a]).or_default().push(s[b]);
                    }
                }
            }
        }
        let mut placed: HashMap<usize, Point> = HashMap::new();
        let mut queue = std::collections::VecDeque::new();
        placed.insert(members[0], self.vertices[members[0]]);
        queue.push_back(members[0]);
        while let Some(v) = queue.pop_front() {
            let pv = placed[&v];
            for &w in adjacency.get(&v).map(|x| x.as_slice()).unwrap_or(&[]) {
                if placed.contains_key(&w) {
                    continue;
                }
                let dx = self.grid.displacement(&self.vertices[w], &self.vertices[v]);
                placed.insert(w, [pv[0] + dx[0], pv[1] + dx[1], pv[2] + dx[2]]);
                queue.push_back(w);
            }
        }
        members
            .iter()
            .map(|m| placed.get(m).copied().unwrap_or(self.vertices[*m]))
            .collect()
    }

    /// Least-squares circle (2-D) or sphere (3-D) fit per connected component.
    /// Components with fewer than `d + 2` vertices are skipped; in 1-D there
    /// is nothing to fit and the result is empty.
    pub fn fit_spheres(&self) -> Vec<SphereFit> {
        let d = self.grid.d();
        if d < 2 {
            return Vec::new();
        }
        self.components()
            .iter()
            .filter(|c| c.len() >= d + 2)
            .filter_map(|c| fit_sphere(&self.unwrap_component(c), d))
            .map(|mut fit| {
                for axis in 0..d {
                    fit.center[axis] = fit.center[axis].rem_euclid(1.0);
                }
                fit
            })
            .collect()
    }
}

fn simplex_measure(p: &[Point]) -> f64 {
    match p.len() {
        1 => 1.0,
        2 => {
            let d = sub(&p[1], &p[0]);
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        }
        _ => {
            let a = sub(&p[1], &p[0]);
            let b = sub(&p[2], &p[0]);
            let c = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
        }
    }
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Algebraic (Kåsa) fit: minimise `Σ (|x|² + a·x + c)²`, then
/// `centre = -a/2`, `R² = |centre|² - c`. Coordinates are shifted to the
/// cloud's mean first for conditioning.
pub fn fit_sphere(points: &[Point], d: usize) -> Option<SphereFit> {
    if points.len() < d + 1 {
        return None;
    }
    let m = points.len();
    let mut mean = [0.0; 3];
    for p in points {
        for axis in 0..d {
            mean[axis] += p[axis] / m as f64;
        }
    }
    let mut a = DMatrix::zeros(m, d + 1);
    let mut b = DVector::zeros(m);
    for (row, p) in points.iter().enumerate() {
        let mut r2 = 0.0;
        for axis in 0..d {
            let x = p[axis] - mean[axis];
            a[(row, axis)] = x;
            r2 += x * x;
        }
        a[(row, d)] = 1.0;
        b[row] = -r2;
    }
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    let mut center = [0.0; 3];
    let mut c2 = 0.0;
    for axis in 0..d {
        center[axis] = -sol[axis] / 2.0;
        c2 += center[axis] * center[axis];
    }
    let r2 = c2 - sol[d];
    if !(r2 > 0.0) {
        return None;
    }
    let radius = r2.sqrt();
    let mut ss = 0.0;
    for p in points {
        let mut dist2 = 0.0;
        for axis in 0..d {
            let x = p[axis] - mean[axis] - center[axis];
            dist2 += x * x;
        }
        ss += (dist2.sqrt() - radius).powi(2);
    }
    for axis in 0..d {
        center[axis] += mean[axis];
    }
    Some(SphereFit {
        center,
        radius,
        rms_residual: (ss / m as f64).sqrt(),
        vertex_count: m,
    })
}

/// Whether node `i` has an axis neighbour on the other side of the zero level.
pub fn is_interface_node(f: &ScalarField, i: usize) -> bool {
    let g = f.grid();
    let s = inside(f.values()[i]);
    (0..g.d()).any(|axis| inside(f.values()[g.shifted(i, axis, 1)]) != s)
}

/// Distance from `x` to a simplex with vertices `s` (already contiguous),
/// with periodic wrapping applied between `x` and the simplex.
pub fn distance_to_simplex(grid: &GridSpec, x: &Point, s: &[Point]) -> f64 {
    let d = grid.d();
    // bring the query point next to the simplex
    let dx = grid.displacement(x, &s[0]);
    let q = [s[0][0] + dx[0], s[0][1] + dx[1], s[0][2] + dx[2]];
    let mut q3 = [0.0; 3];
    q3[..d].copy_from_slice(&q[..d]);
    let closest = match s.len() {
        1 => s[0],
        2 => closest_on_segment(&q3, &s[0], &s[1]),
        _ => closest_on_triangle(&q3, &s[0], &s[1], &s[2]),
    };
    let r = sub(&q3, &closest);
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lerp(a: &Point, d: &Point, t: f64) -> Point {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}

fn closest_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return *a;
    }
    let t = (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0);
    lerp(a, &ab, t)
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
fn closest_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return lerp(a, &ab, d1 / (d1 - d3));
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return lerp(a, &ac, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let bc = sub(c, b);
        return lerp(b, &bc, (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ]
}
