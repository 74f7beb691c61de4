//! Discrete gradient and Laplacian on the torus, in a second-order central
//! flavour and a Fourier-spectral flavour.
//!
//! Each flavour also supplies an energy-consistent squared gradient
//! ([`grad_norm_sq`]) and bilinear form ([`dirichlet_form`]) satisfying
//! `∫ u Δv = -⟨∇u, ∇v⟩` exactly. For the central flavour that partner is the
//! mean of the forward and backward one-sided differences, since the
//! compact `(2d+1)`-point Laplacian is the composition of those, not of the
//! wide central difference.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, GridSpec, ScalarField, VectorField};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    #[serde(rename = "central-2nd-order", alias = "central")]
    Central2,
    #[serde(rename = "fourier-spectral", alias = "spectral")]
    Spectral,
}

impl Discretization {
    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        if *self == Discretization::Spectral && !grid.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "spectral discretization needs a power-of-two n, got {}",
                grid.n()
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Discretization::Central2 => "central-2nd-order",
            Discretization::Spectral => "fourier-spectral",
        }
    }
}

/// Eigenvalue of the discrete Laplacian at flat spectral index `flat`
/// (always `<= 0`).
pub fn laplacian_symbol(grid: &GridSpec, disc: Discretization, flat: usize) -> f64 {
    let idx = grid.multi_index(flat);
    let n = grid.n();
    let h = grid.h();
    (0..grid.d())
        .map(|axis| {
            let k = spectral::wavenumber(idx[axis], n) as f64;
            match disc {
                Discretization::Spectral => -4.0 * PI * PI * k * k,
                Discretization::Central2 => {
                    let s = (PI * k * h).sin();
                    -4.0 * s * s / (h * h)
                }
            }
        })
        .sum()
}

pub fn gradient(f: &ScalarField, disc: Discretization) -> Result<VectorField> {
    f.check_finite()?;
    disc.check(f.grid())?;
    Ok(gradient_unchecked(f, disc))
}

pub(crate) fn gradient_unchecked(f: &ScalarField, disc: Discretization) -> VectorField {
    let grid = *f.grid();
    let comps = match disc {
        Discretization::Central2 => (0..grid.d())
            .map(|axis| {
                let inv = 0.5 / grid.h();
                let v = f.values();
                let mut out = vec![0.0; grid.len()];
                grid.for_each_neighbours(axis, |i, p, m| out[i] = (v[p] - v[m]) * inv);
                ScalarField::from_raw(grid, out)
            })
            .collect(),
        Discretization::Spectral => {
            let spec = spectral::forward(&grid, f.values());
            (0..grid.d())
                .map(|axis| {
                    let s: Vec<Complex64> = spec
                        .iter()
                        .enumerate()
                        .map(|(flat, c)| {
                            let j = grid.multi_index(flat)[axis];
                            if spectral::is_nyquist(j, grid.n()) {
                                Complex64::default()
                            } else {
                                let k = spectral::wavenumber(j, grid.n()) as f64;
                                c * Complex64::new(0.0, 2.0 * PI * k)
                            }
                        })
                        .collect();
                    ScalarField::from_raw(grid, spectral::inverse_real(&grid, s))
                })
                .collect()
        }
    };
    VectorField::new(grid, comps).expect("component count matches grid")
}

pub fn laplacian(f: &ScalarField, disc: Discretization) -> Result<ScalarField> {
    f.check_finite()?;
    disc.check(f.grid())?;
    Ok(laplacian_unchecked(f, disc))
}

pub(crate) fn laplacian_unchecked(f: &ScalarField, disc: Discretization) -> ScalarField {
    let grid = *f.grid();
    match disc {
        Discretization::Central2 => {
            let v = f.values();
            let inv_h2 = 1.0 / (grid.h() * grid.h());
            let centre = -2.0 * grid.d() as f64;
            let mut out: Vec<f64> = v.iter().map(|x| centre * x).collect();
            for axis in 0..grid.d() {
                grid.for_each_neighbours(axis, |i, p, m| out[i] += v[p] + v[m]);
            }
            for o in &mut out {
                *o *= inv_h2;
            }
            ScalarField::from_raw(grid, out)
        }
        Discretization::Spectral => ScalarField::from_raw(
            grid,
            spectral::apply_multiplier(&grid, f.values(), |flat| laplacian_symbol(&grid, disc, flat)),
        ),
    }
}

/// Pointwise squared gradient used in energy densities. Its integral equals
/// `-∫ f Δf` for the same discretization.
pub fn grad_norm_sq(f: &ScalarField, disc: Discretization) -> Result<ScalarField> {
    f.check_finite()?;
    disc.check(f.grid())?;
    Ok(grad_norm_sq_unchecked(f, disc))
}

pub(crate) fn grad_norm_sq_unchecked(f: &ScalarField, disc: Discretization) -> ScalarField {
    match disc {
        Discretization::Spectral => gradient_unchecked(f, disc).norm_sq(),
        Discretization::Central2 => {
            let grid = *f.grid();
            let v = f.values();
            let inv_h = 1.0 / grid.h();
            let mut out = vec![0.0; grid.len()];
            for axis in 0..grid.d() {
                grid.for_each_neighbours(axis, |i, p, m| {
                    let fwd = (v[p] - v[i]) * inv_h;
                    let bwd = (v[i] - v[m]) * inv_h;
                    out[i] += 0.5 * (fwd * fwd + bwd * bwd);
                });
            }
            ScalarField::from_raw(grid, out)
        }
    }
}

/// `⟨∇u, ∇v⟩`, the bilinear form paired with [`laplacian`] by summation by parts.
pub fn dirichlet_form(u: &ScalarField, v: &ScalarField, disc: Discretization) -> Result<f64> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    u.check_finite()?;
    v.check_finite()?;
    disc.check(u.grid())?;
    let grid = *u.grid();
    Ok(match disc {
        // over the trigonometric interpolant, so Nyquist modes (which the
        // nodal spectral gradient drops) are counted as the Laplacian counts them
        Discretization::Spectral => {
            let (fu, fv) = spectral::forward_pair(&grid, u.values(), v.values());
            let terms: Vec<f64> = (0..grid.len())
                .map(|k| -laplacian_symbol(&grid, disc, k) * (fu[k] * fv[k].conj()).re)
                .collect();
            let len = grid.len() as f64;
            pairwise_sum(&terms) / (len * len)
        }
        Discretization::Central2 => {
            let (a, b) = (u.values(), v.values());
            let inv_h = 1.0 / grid.h();
            let terms: Vec<f64> = (0..grid.len())
                .map(|i| {
                    (0..grid.d())
                        .map(|axis| {
                            let j = grid.shifted(i, axis, 1);
                            (a[j] - a[i]) * (b[j] - b[i]) * inv_h * inv_h
                        })
                        .sum::<f64>()
                })
                .collect();
            grid.cell_volume() * pairwise_sum(&terms)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::integrate;

    fn sin_field(d: usize, n: usize) -> ScalarField {
        let g = GridSpec::new(d, n).unwrap();
        ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap()
    }

    #[test]
    fn constants_have_zero_derivatives() {
        let g = GridSpec::new(2, 16).unwrap();
        let c = ScalarField::constant(g, 0.7).unwrap();
        for disc in [Discretization::Central2, Discretization::Spectral] {
            assert!(laplacian(&c, disc).unwrap().max_abs() < 1e-12);
            for comp in gradient(&c, disc).unwrap().components() {
                assert!(comp.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_is_exact_on_a_resolved_mode() {
        let f = sin_field(2, 32);
        let g = *f.grid();
        let grad = gradient(&f, Discretization::Spectral).unwrap();
        let lap = laplacian(&f, Discretization::Spectral).unwrap();
        for i in 0..g.len() {
            let x = g.node(i);
            assert!((grad.component(0).values()[i] - 2.0 * PI * (2.0 * PI * x[0]).cos()).abs() < 1e-12);
            assert!(grad.component(1).values()[i].abs() < 1e-12);
            assert!((lap.values()[i] + 4.0 * PI * PI * (2.0 * PI * x[0]).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn central_symbols_match_analytic_values() {
        let f = sin_field(1, 64);
        let g = *f.grid();
        let h = g.h();
        let grad = gradient(&f, Discretization::Central2).unwrap();
        let lap = laplacian(&f, Discretization::Central2).unwrap();
        let gsym = (2.0 * PI * h).sin() / h;
        let lsym = -(2.0 / (h * h)) * (1.0 - (2.0 * PI * h).cos());
        for i in 0..g.len() {
            let x = g.node(i)[0];
            assert!((grad.component(0).values()[i] - gsym * (2.0 * PI * x).cos()).abs() < 1e-12);
            assert!((lap.values()[i] - lsym * (2.0 * PI * x).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn symbol_matches_operator() {
        let g = GridSpec::new(2, 16).unwrap();
        // mode (3, -2)
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * (3.0 * x[0] - 2.0 * x[1])).cos()).unwrap();
        for disc in [Discretization::Central2, Discretization::Spectral] {
            let lap = laplacian(&f, disc).unwrap();
            let sym = laplacian_symbol(&g, disc, g.flat_index(&[3, 14]));
            for (l, v) in lap.values().iter().zip(f.values()) {
                assert!((l - sym * v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spectral_rejects_non_power_of_two() {
        let g = GridSpec::new(1, 12).unwrap();
        let f = ScalarField::constant(g, 0.0).unwrap();
        assert!(laplacian(&f, Discretization::Spectral).is_err());
        assert!(laplacian(&f, Discretization::Central2).is_ok());
    }

    #[test]
    fn grad_norm_sq_integrates_to_dirichlet_energy() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + 0.3 * (2.0 * PI * x[1]).sin()
        })
        .unwrap();
        for disc in [Discretization::Central2, Discretization::Spectral] {
            let a = integrate(&grad_norm_sq(&f, disc).unwrap()).unwrap();
            let b = dirichlet_form(&f, &f, disc).unwrap();
            let lap = laplacian(&f, disc).unwrap();
            let c = -integrate(&f.zip_map(&lap, |u, l| u * l).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-10 * b.abs(), "{disc:?}");
            assert!((a - c).abs() < 1e-10 * c.abs(), "{disc:?}");
        }
    }
}
