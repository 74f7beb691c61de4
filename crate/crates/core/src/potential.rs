//! The double-well potential `W(s) = (1 - s²)²/2` and the quantities derived
//! from it.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Surface tension `∫_{-1}^{1} √(2W(s)) ds`.
pub const SIGMA: f64 = 4.0 / 3.0;

static K_CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

pub fn eval_w(s: f64) -> f64 {
    let a = 1.0 - s * s;
    0.5 * a * a
}

pub fn eval_dw(s: f64) -> f64 {
    -2.0 * s * (1.0 - s * s)
}

/// `√(2W(s)) = |1 - s²|`.
pub fn eval_sqrt2w(s: f64) -> f64 {
    (1.0 - s * s).abs()
}

/// `k(s) = ∫_0^s √(2W) = s - s³/3`, with the argument clamped to `[-1, 1]`.
/// Each clamp is tallied in a process-wide counter, see [`k_clamp_events`].
pub fn eval_k(s: f64) -> f64 {
    let c = clamp_unit(s);
    if c != s {
        K_CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
    cubic_k(c)
}

/// Same as [`eval_k`] but records clamping in a caller-owned tally.
pub fn eval_k_counted(s: f64, clamps: &mut u64) -> f64 {
    let c = clamp_unit(s);
    if c != s {
        *clamps += 1;
    }
    cubic_k(c)
}

/// `s(3 - s²)/3`, which rounds `k(±1)` to the nearest double of `±2/3`.
fn cubic_k(s: f64) -> f64 {
    s * (3.0 - s * s) / 3.0
}

fn clamp_unit(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

pub fn k_clamp_events() -> u64 {
    K_CLAMP_EVENTS.load(Ordering::Relaxed)
}

pub fn sigma() -> f64 {
    SIGMA
}

/// Composite Simpson approximation of `∫_{-1}^{1} √(2W)` with `panels`
/// (rounded up to even) subintervals.
pub fn sigma_quadrature(panels: usize) -> f64 {
    let m = panels.max(2) + panels % 2;
    let h = 2.0 / m as f64;
    let mut acc = eval_sqrt2w(-1.0) + eval_sqrt2w(1.0);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * eval_sqrt2w(-1.0 + i as f64 * h);
    }
    acc * h / 3.0
}

/// Standing-wave profile `q^ε(r) = tanh(r/ε)`.
pub fn profile_q(r: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok((r / eps).tanh())
}

/// `∂_r q^ε = (1 - q²)/ε`.
pub fn profile_dq(r: f64, eps: f64) -> Result<f64> {
    let q = profile_q(r, eps)?;
    Ok((1.0 - q * q) / eps)
}

/// `∂_rr q^ε = -2 q (1 - q²)/ε²`.
pub fn profile_ddq(r: f64, eps: f64) -> Result<f64> {
    let q = profile_q(r, eps)?;
    Ok(-2.0 * q * (1.0 - q * q) / (eps * eps))
}
