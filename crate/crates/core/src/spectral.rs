//! d-dimensional complex FFTs on the torus grid, built from 1-D transforms
//! applied axis by axis. Plans are cached per axis length.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::GridSpec;

/// Lines gathered per batch when transforming a strided axis.
const GATHER_LINES: usize = 64;

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Plan, Plan)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Signed integer wavenumber of index `j` on an `n`-point axis. The Nyquist
/// index `n/2` maps to `-n/2`.
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub fn is_nyquist(j: usize, n: usize) -> bool {
    n.is_multiple_of(2) && j == n / 2
}

fn transform(grid: &GridSpec, data: &mut [Complex64], plan: &Plan) {
    let n = grid.n();
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    for axis in 0..grid.d() {
        let stride = grid.stride(axis);
        if stride == 1 {
            plan.process_with_scratch(data, &mut scratch);
            continue;
        }
        // Lines along `axis` are indexed by (outer, inner) with
        // flat = outer * n * stride + k * stride + inner.
        let outer_count = data.len() / (n * stride);
        let mut buf = vec![Complex64::default(); GATHER_LINES * n];
        for outer in 0..outer_count {
            let base = outer * n * stride;
            let mut inner = 0;
            while inner < stride {
                let lines = GATHER_LINES.min(stride - inner);
                for k in 0..n {
                    let row = &data[base + k * stride + inner..base + k * stride + inner + lines];
                    for (l, v) in row.iter().enumerate() {
                        buf[l * n + k] = *v;
                    }
                }
                plan.process_with_scratch(&mut buf[..lines * n], &mut scratch);
                for k in 0..n {
                    let row = &mut data[base + k * stride + inner..base + k * stride + inner + lines];
                    for (l, v) in row.iter_mut().enumerate() {
                        *v = buf[l * n + k];
                    }
                }
                inner += lines;
            }
        }
    }
}

/// Unnormalised forward transform of a real field.
pub fn forward(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let (fwd, _) = plans(grid.n());
    transform(grid, &mut data, &fwd);
    data
}

/// Inverse transform (including the `1/N` factor), keeping the real part.
pub fn inverse_real(grid: &GridSpec, mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let (_, inv) = plans(grid.n());
    transform(grid, &mut spectrum, &inv);
    let scale = 1.0 / spectrum.len() as f64;
    spectrum.into_iter().map(|c| c.re * scale).collect()
}

/// Flat index of `-k` for every flat spectral index `k`.
fn mirror_indices(grid: &GridSpec) -> Vec<usize> {
    let n = grid.n();
    let mut out = vec![0usize];
    for _ in 0..grid.d() {
        // append one more (slowest-varying becomes this) axis in front
        let inner = out.len();
        let mut next = Vec::with_capacity(inner * n);
        for i in 0..n {
            let mi = (n - i) % n;
            next.extend(out.iter().map(|&m| mi * inner + m));
        }
        out = next;
    }
    out
}

/// Forward transforms of two real fields with one complex transform.
pub fn forward_pair(grid: &GridSpec, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    let (fwd, _) = plans(grid.n());
    transform(grid, &mut z, &fwd);
    let mirror = mirror_indices(grid);
    let mut fa = Vec::with_capacity(z.len());
    let mut fb = Vec::with_capacity(z.len());
    for (zk, &m) in z.iter().zip(&mirror) {
        let zm = z[m].conj();
        fa.push((zk + zm) * 0.5);
        // (z_k - conj z_{-k}) / 2i
        let d = zk - zm;
        fb.push(Complex64::new(0.5 * d.im, -0.5 * d.re));
    }
    (fa, fb)
}

/// Inverse transforms of two spectra of real fields with one complex transform.
pub fn inverse_pair(grid: &GridSpec, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut z: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + Complex64::new(-y.im, y.re)).collect();
    let (_, inv) = plans(grid.n());
    transform(grid, &mut z, &inv);
    let scale = 1.0 / z.len() as f64;
    let mut ra = Vec::with_capacity(z.len());
    let mut rb = Vec::with_capacity(z.len());
    for c in z {
        ra.push(c.re * scale);
        rb.push(c.im * scale);
    }
    (ra, rb)
}

/// Applies a real multiplier `m(k)` (given per flat spectral index) to a
/// real field and returns the real result.
pub fn apply_multiplier(grid: &GridSpec, values: &[f64], m: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut spec = forward(grid, values);
    for (i, c) in spec.iter_mut().enumerate() {
        *c *= m(i);
    }
    inverse_real(grid, spec)
}

/// Samples the trigonometric interpolant of a spectrum given on `grid` onto
/// the finer grid `fine` (same dimension, `fine.n() >= grid.n()`), after
/// applying `m(k)` with `k` the integer wavevector. Nyquist coefficients are
/// split evenly between `±n/2` so the interpolant stays real.
pub fn resample(
    grid: &GridSpec,
    spectrum: &[Complex64],
    fine: &GridSpec,
    m: impl Fn(&[i64; 3]) -> Complex64,
) -> Vec<f64> {
    let (n, nf, d) = (grid.n(), fine.n(), grid.d());
    let mut out = vec![Complex64::default(); fine.len()];
    let scale = (nf as f64 / n as f64).powi(d as i32);
    for (flat, c) in spectrum.iter().enumerate() {
        let idx = grid.multi_index(flat);
        let mut images: Vec<([i64; 3], f64)> = vec![([0; 3], scale)];
        for axis in 0..d {
            let k = wavenumber(idx[axis], n);
            let split: &[(i64, f64)] = if is_nyquist(idx[axis], n) {
                &[(k, 0.5), (-k, 0.5)]
            } else {
                &[(k, 1.0)]
            };
            images = images
                .iter()
                .flat_map(|(kv, w)| {
                    split.iter().map(move |(k, s)| {
                        let mut kv = *kv;
                        kv[axis] = *k;
                        (kv, w * s)
                    })
                })
                .collect();
        }
        for (kv, w) in images {
            let mut pos = [0usize; 3];
            for axis in 0..d {
                pos[axis] = kv[axis].rem_euclid(nf as i64) as usize;
            }
            out[fine.flat_index(&pos[..d])] += c * w * m(&kv);
        }
    }
    inverse_real(fine, out)
}
