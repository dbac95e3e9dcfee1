//! Relative entropies, Bregman divergences of `F`, and auxiliary diagnostics.
//!
//! Divergences return `f64` where `+inf` marks an absolute-continuity failure;
//! NaN is never produced. Terms with zero weight contribute zero.
//!
//! The Bregman divergence of the conjugate `F*` is never evaluated through an
//! explicit conjugate: for potentials `φ₁, φ₂` with induced couplings
//! `π₁, π₂`, it equals the coupling-level relative entropy `H(π₁|π₂)`, which
//! is what [`kl_coupling`] computes.

use crate::error::{Error, Result};
use crate::measures::{Coupling, DiscreteMeasure, LogKernel, Potential};
use crate::transforms::{f_value, y_marginal_of, TransformContext};

/// `H(p|q) = Σ_{p_i>0} p_i ln(p_i/q_i)`; `+inf` if `p` charges a zero of `q`.
pub fn kl(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    Ok(kl_slices(p.weights(), q.weights()))
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    acc
}

/// Entrywise `H(π̃|π)` over couplings, using stored log-entries so that
/// entries which underflow linearly keep their ratio.
pub fn kl_coupling(pt: &Coupling, p: &Coupling) -> Result<f64> {
    if pt.shape() != p.shape() {
        return Err(Error::ShapeMismatch(pt.shape(), p.shape()));
    }
    let mut acc = 0.0;
    for ((&w, &lt), &l) in pt.entries().iter().zip(pt.log_entries()).zip(p.log_entries()) {
        if w > 0.0 {
            if l == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            acc += w * (lt - l);
        }
    }
    Ok(acc)
}

/// `H(π|R) = Σ π ln(π/R)` against an unnormalized log-kernel; `+inf` if `π`
/// charges a zero of `R`.
pub fn entropy_wrt_kernel(pi: &Coupling, kernel: &LogKernel) -> Result<f64> {
    if pi.shape() != kernel.shape() {
        return Err(Error::ShapeMismatch(pi.shape(), kernel.shape()));
    }
    let m = kernel.n_cols();
    let mut acc = 0.0;
    for i in 0..kernel.n_rows() {
        let (cols, vals) = kernel.row(i);
        let mut k = 0;
        for j in 0..m {
            let w = pi.entries()[i * m + j];
            while k < cols.len() && cols[k] < j {
                k += 1;
            }
            if w > 0.0 {
                if k >= cols.len() || cols[k] != j {
                    return Ok(f64::INFINITY);
                }
                acc += w * (pi.log_entries()[i * m + j] - vals[k]);
            }
        }
    }
    Ok(acc)
}

/// `F(φ₂|φ₁) = F(φ₂) - F(φ₁) - ⟨F'(φ₁), φ₂ - φ₁⟩`.
pub fn bregman_f(phi2: &Potential, phi1: &Potential, ctx: &TransformContext) -> Result<f64> {
    let rho1 = y_marginal_of(phi1, ctx)?;
    let step: Vec<f64> = phi2.values().iter().zip(phi1.values()).map(|(a, b)| a - b).collect();
    Ok(f_value(phi2, ctx)? - f_value(phi1, ctx)? - rho1.integrate(&step))
}

/// Bregman divergence of the tilted functional `F_a(φ) = F(φ|a)`.
///
/// Uses `F_a'(φ) = F'(φ) - F'(a)`; it agrees with `F(φ₂|φ₁)` for every `a`.
pub fn bregman_tilted(
    phi2: &Potential,
    phi1: &Potential,
    a: &Potential,
    ctx: &TransformContext,
) -> Result<f64> {
    let fa = |phi: &Potential| bregman_f(phi, a, ctx);
    let rho1 = y_marginal_of(phi1, ctx)?;
    let rho_a = y_marginal_of(a, ctx)?;
    let inner: f64 = rho1
        .weights()
        .iter()
        .zip(rho_a.weights())
        .zip(phi2.values().iter().zip(phi1.values()))
        .map(|((r1, ra), (p2, p1))| (r1 - ra) * (p2 - p1))
        .sum();
    Ok(fa(phi2)? - fa(phi1)? - inner)
}

/// Hilbert projective distance `max(u - v) - min(u - v)`.
pub fn hilbert_distance(u: &Potential, v: &Potential) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    Ok(hilbert_slices(u.values(), v.values()))
}

pub(crate) fn hilbert_slices(u: &[f64], v: &[f64]) -> f64 {
    let (lo, hi) = u
        .iter()
        .zip(v)
        .map(|(a, b)| a - b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

/// `M₂ = Σ w_i |x_i|²`.
pub fn second_moment(points: &[Vec<f64>], weights: &DiscreteMeasure) -> Result<f64> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch(points.len(), weights.len()));
    }
    let sq: Vec<f64> = points.iter().map(|x| x.iter().map(|c| c * c).sum()).collect();
    Ok(weights.integrate(&sq))
}
