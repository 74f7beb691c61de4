//! The periodic unit torus `[0,1)^d` sampled on a node-centred grid, and the
//! nodal fields that live on it.
//!
//! Storage is row-major with the last axis fastest; node `(i_0, .., i_{d-1})`
//! sits at `x = (i_0 h, .., i_{d-1} h)`, so axis 0 is the `x_1` direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this many terms a block is summed left to right.
const PAIRWISE_BLOCK: usize = 64;
/// Above this many terms the two halves are summed on separate workers.
/// The tree shape does not depend on this, only the scheduling does.
const PARALLEL_CUTOFF: usize = 1 << 15;

/// A point of the torus. Only the first `d` coordinates are meaningful.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} is not in 1..=3")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n = {n} is below the minimum of 8")));
        }
        if n.checked_pow(d as u32).is_none() {
            return Err(Error::InvalidGrid(format!("n^d overflows for n = {n}, d = {d}")));
        }
        Ok(GridSpec { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Volume of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance between consecutive nodes along `axis` in flat storage.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    pub fn is_power_of_two(&self) -> bool {
        self.n.is_power_of_two()
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for axis in (0..self.d).rev() {
            idx[axis] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Flat index of the node reached by moving `offset` nodes along `axis`,
    /// wrapping periodically.
    pub fn shifted(&self, flat: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let i = (flat / stride) % self.n;
        let j = (i as isize + offset).rem_euclid(self.n as isize) as usize;
        flat - i * stride + j * stride
    }

    /// Calls `f(i, i₊, i₋)` for every node `i` and its periodic neighbours
    /// along `axis`, walking memory in order.
    pub(crate) fn for_each_neighbours(&self, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
        let n = self.n;
        let s = self.stride(axis);
        for base in (0..self.len()).step_by(n * s) {
            for k in 0..n {
                let kp = if k + 1 == n { 0 } else { k + 1 };
                let km = if k == 0 { n - 1 } else { k - 1 };
                let (c, p, m) = (base + k * s, base + kp * s, base + km * s);
                for inner in 0..s {
                    f(c + inner, p + inner, m + inner);
                }
            }
        }
    }

    pub fn node(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let h = self.h();
        let mut p = [0.0; 3];
        for axis in 0..self.d {
            p[axis] = idx[axis] as f64 * h;
        }
        p
    }

    /// Minimum-image displacement `x - y` on the unit torus.
    pub fn displacement(&self, x: &Point, y: &Point) -> Point {
        let mut out = [0.0; 3];
        for axis in 0..self.d {
            out[axis] = min_image(x[axis] - y[axis]);
        }
        out
    }

    /// Minimum-image distance on the unit torus.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        norm(&self.displacement(x, y))
    }
}

/// Wraps a coordinate difference into `[-1/2, 1/2)`.
pub fn min_image(dx: f64) -> f64 {
    dx - (dx + 0.5).floor()
}

pub fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for the grid, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    /// Caller guarantees the length matches; finiteness is checked by the
    /// operations that need it.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.values)
    }

    /// Shifts the field by `offset` nodes along `axis`: `out[i] = self[i - offset]`.
    pub fn translated(&self, axis: usize, offset: isize) -> ScalarField {
        let mut out = vec![0.0; self.values.len()];
        for (i, v) in self.values.iter().enumerate() {
            out[self.grid.shifted(i, axis, offset)] = *v;
        }
        ScalarField::from_raw(self.grid, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(grid: GridSpec, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != grid.d() {
            return Err(Error::InvalidParameter(format!(
                "expected {} components, got {}",
                grid.d(),
                components.len()
            )));
        }
        if components.iter().any(|c| *c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { grid, components })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        VectorField {
            grid,
            components: (0..grid.d())
                .map(|_| ScalarField::from_raw(grid, vec![0.0; grid.len()]))
                .collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    /// Pointwise `|v|^2`.
    pub fn norm_sq(&self) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (o, v) in out.iter_mut().zip(c.values()) {
                *o += v * v;
            }
        }
        ScalarField::from_raw(self.grid, out)
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![0.0; self.grid.len()];
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((o, x), y) in out.iter_mut().zip(a.values()).zip(b.values()) {
                *o += x * y;
            }
        }
        Ok(ScalarField::from_raw(self.grid, out))
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Pairwise (tree) summation with a fixed split: the result depends only on
/// the input order, never on how many workers evaluate the halves.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), &|i| values[i])
}

/// [`pairwise_sum`] of `f(0), …, f(len - 1)` without materialising them.
/// Bitwise identical to summing the collected values.
pub fn pairwise_sum_by(len: usize, f: &(impl Fn(usize) -> f64 + Sync)) -> f64 {
    fn rec(lo: usize, hi: usize, f: &(impl Fn(usize) -> f64 + Sync)) -> f64 {
        let len = hi - lo;
        if len <= PAIRWISE_BLOCK {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + len / 2;
        if len >= PARALLEL_CUTOFF {
            let (a, b) = rayon::join(|| rec(lo, mid, f), || rec(mid, hi, f));
            a + b
        } else {
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, len, f)
}

/// `∫_Ω f dx = h^d Σ f_i`.
pub fn integrate(f: &ScalarField) -> Result<f64> {
    f.check_finite()?;
    Ok(integrate_unchecked(f))
}

pub(crate) fn integrate_unchecked(f: &ScalarField) -> f64 {
    f.grid().cell_volume() * pairwise_sum(f.values())
}

/// `∫_Ω g(f) dx` without materialising `g(f)` as a field.
pub(crate) fn integrate_map(f: &ScalarField, g: impl Fn(f64) -> f64 + Sync) -> f64 {
    let v = f.values();
    f.grid().cell_volume() * pairwise_sum_by(v.len(), &|i| g(v[i]))
}
