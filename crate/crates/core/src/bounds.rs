//! Closed-form constants of the `O(1/n)` Sinkhorn rate.
//!
//! Everything here is arithmetic on given inputs; `H*` is always supplied
//! by the caller (normally from [`crate::oracle::solve_certified`]).

use serde::{Deserialize, Serialize};

use crate::divergences::kl;
use crate::error::{Error, Result};
use crate::measures::kernel_marginals;
use crate::transforms::TransformContext;

fn per_step(c: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroIterations);
    }
    Ok(c / n as f64)
}

/// `H*/n`, valid for kernels of unit mass.
pub fn bound_basic(h_star: f64, n: usize) -> Result<f64> {
    per_step(h_star, n)
}

/// `(H* + ln ∬R)/n`, valid for kernels of any mass.
pub fn bound_general(h_star: f64, mass: f64, n: usize) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("kernel mass must be positive, got {mass}")));
    }
    per_step(h_star + mass.ln(), n)
}

/// `(H* - H(μ|μ̄))/n`. `H(μ|μ̄)` may be negative when `μ̄` has mass above one.
pub fn bound_strong(h_star: f64, kl_mu_mubar: f64, n: usize) -> Result<f64> {
    per_step(h_star - kl_mu_mubar, n)
}

/// `(M₂(μ) + M₂(ν)) / (n ε)` for the quadratic-cost kernel
/// `R = e^{-|x-y|²/2ε} μ⊗ν`.
pub fn bound_quadratic(m2_mu: f64, m2_nu: f64, eps: f64, n: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::NonpositiveEps(eps));
    }
    if n == 0 {
        return Err(Error::ZeroIterations);
    }
    Ok((m2_mu + m2_nu) / (n as f64 * eps))
}

/// `(H(μ|m) + H(ν|m)) / (1 - e^{-λT})`: an upper bound on `H*` itself for
/// the joint law at times `0, T` of a `λ`-convex Langevin diffusion with
/// stationary law `m`. Divide by `n` for the rate.
pub fn bound_talagrand(kl_mu_m: f64, kl_nu_m: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonpositiveLambda(lambda));
    }
    if !(t > 0.0) {
        return Err(Error::NonpositiveTime(t));
    }
    Ok((kl_mu_m + kl_nu_m) / -(-lambda * t).exp_m1())
}

/// All rate constants for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub h_star: f64,
    pub log_mass: f64,
    pub kl_mu_mubar: f64,
    pub c_basic: f64,
    pub c_general: f64,
    pub c_strong: f64,
    pub c_exact: f64,
    pub c_quadratic: Option<f64>,
    pub c_talagrand: Option<f64>,
}

/// Optional family-specific inputs for a [`BoundReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FamilyConstants {
    /// `(M₂(μ), M₂(ν), ε)`.
    pub quadratic: Option<(f64, f64, f64)>,
    /// `(H(μ|m), H(ν|m), λ, T)`.
    pub talagrand: Option<(f64, f64, f64, f64)>,
}

impl BoundReport {
    /// `c_exact` is `H(π*|π₀)`; pass `None` to use its value at `φ₀ = 0`,
    /// namely `H* - H(μ|μ̄)`.
    pub fn new(
        ctx: &TransformContext,
        h_star: f64,
        c_exact: Option<f64>,
        family: FamilyConstants,
    ) -> Result<Self> {
        let (mu_bar, _) = kernel_marginals(ctx.kernel());
        let kl_mu_mubar = kl(ctx.mu(), &mu_bar)?;
        let log_mass = ctx.kernel().log_mass();
        let c_quadratic = match family.quadratic {
            Some((a, b, eps)) => Some(bound_quadratic(a, b, eps, 1)?),
            None => None,
        };
        let c_talagrand = match family.talagrand {
            Some((a, b, lambda, t)) => Some(bound_talagrand(a, b, lambda, t)?),
            None => None,
        };
        Ok(Self {
            h_star,
            log_mass,
            kl_mu_mubar,
            c_basic: h_star,
            c_general: h_star + log_mass,
            c_strong: h_star - kl_mu_mubar,
            c_exact: c_exact.unwrap_or(h_star - kl_mu_mubar),
            c_quadratic,
            c_talagrand,
        })
    }
}
