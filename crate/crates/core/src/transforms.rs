//! Soft transforms between potentials on Y and on X, the couplings they
//! induce, and the functionals `F`, `D` built from them.
//!
//! With `R` the reference kernel and `(μ, ν)` the target marginals:
//!
//! ```text
//! φ⁺(x) = ln( Σ_y e^{φ(y)} R(x,y) / μ(x) )
//! ψ⁻(y) = -ln( Σ_x e^{-ψ(x)} R(x,y) / ν(y) )
//! π(φ,ψ) = Z⁻¹ e^{φ(y) - ψ(x)} R(x,y)
//! F(φ)   = ⟨φ⁺, μ⟩
//! D(φ,ψ) = ⟨φ,ν⟩ - ⟨ψ,μ⟩ - ln Σ e^{φ(y) - ψ(x)} R(x,y)
//! ```
//!
//! Rows with `μ(x) = 0` are outside the domain of `φ⁺`: the transform is
//! reported as 0 there and those rows carry no coupling mass (the limit
//! `ψ(x) → +∞`). Columns with `ν(y) = 0` get `ψ⁻(y) = 0` likewise.

use crate::error::{Error, Result};
use crate::measures::{Coupling, DiscreteMeasure, LogKernel, Potential, Side};

/// `ln Σ exp(x_k)` with max extraction, summing in ascending index order.
///
/// Returns `-inf` iff every input is `-inf` (or the input is empty).
pub fn logsumexp(xs: &[f64]) -> f64 {
    lse(xs.iter().copied())
}

#[inline]
fn lse<I>(xs: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// The triple `(R, μ, ν)` on which all transforms act.
#[derive(Debug, Clone)]
pub struct TransformContext {
    kernel: LogKernel,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    ln_mu: Vec<f64>,
    ln_nu: Vec<f64>,
}

impl TransformContext {
    /// Validates dimensions, that `μ` and `ν` are probability measures, and
    /// that every charged row/column has a positive kernel entry.
    pub fn new(kernel: LogKernel, mu: DiscreteMeasure, nu: DiscreteMeasure) -> Result<Self> {
        if kernel.n_rows() != mu.len() || kernel.n_cols() != nu.len() {
            return Err(Error::DimensionMismatch(format!(
                "kernel is {}x{}, marginals have lengths {} and {}",
                kernel.n_rows(),
                kernel.n_cols(),
                mu.len(),
                nu.len()
            )));
        }
        for m in [&mu, &nu] {
            if (m.mass() - 1.0).abs() > crate::measures::MASS_TOL {
                return Err(Error::NotProbability { mass: m.mass() });
            }
        }
        for (i, &w) in mu.weights().iter().enumerate() {
            if w > 0.0 && kernel.row(i).0.is_empty() {
                return Err(Error::EmptyRow { row: i });
            }
        }
        for (j, &w) in nu.weights().iter().enumerate() {
            let charged = kernel.col(j).0.iter().any(|&i| mu.weights()[i] > 0.0);
            if w > 0.0 && !charged {
                return Err(Error::EmptyColumn { col: j });
            }
        }
        let ln_mu = mu.weights().iter().map(|w| w.ln()).collect();
        let ln_nu = nu.weights().iter().map(|w| w.ln()).collect();
        Ok(Self {
            kernel,
            mu,
            nu,
            ln_mu,
            ln_nu,
        })
    }

    pub fn kernel(&self) -> &LogKernel {
        &self.kernel
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn n_rows(&self) -> usize {
        self.kernel.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.kernel.n_cols()
    }

    #[inline]
    fn row_active(&self, i: usize) -> bool {
        self.mu.weights()[i] > 0.0
    }

    fn check(&self, p: &Potential, side: Side) -> Result<()> {
        let n = match side {
            Side::X => self.n_rows(),
            Side::Y => self.n_cols(),
        };
        if p.side() != side || p.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected a potential on {side:?} of length {n}, got {:?} of length {}",
                p.side(),
                p.len()
            )));
        }
        Ok(())
    }

    /// Raw `φ⁺` into `out`.
    pub(crate) fn plus_into(&self, phi: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, o) in out.iter_mut().enumerate() {
            if !self.row_active(i) {
                *o = 0.0;
                continue;
            }
            let (cols, vals) = self.kernel.row(i);
            let s = lse(cols.iter().zip(vals).map(|(&j, &v)| phi[j] + v));
            if s == f64::NEG_INFINITY {
                return Err(Error::EmptyRow { row: i });
            }
            *o = s - self.ln_mu[i];
        }
        Ok(())
    }

    /// Raw `ψ⁻` into `out`.
    pub(crate) fn minus_into(&self, psi: &[f64], out: &mut [f64]) -> Result<()> {
        for (j, o) in out.iter_mut().enumerate() {
            if self.nu.weights()[j] <= 0.0 {
                *o = 0.0;
                continue;
            }
            let s = self.col_lse(j, psi);
            if s == f64::NEG_INFINITY {
                return Err(Error::EmptyColumn { col: j });
            }
            *o = self.ln_nu[j] - s;
        }
        Ok(())
    }

    /// `ln Σ_{x: μ(x)>0} e^{-ψ(x)} R(x, y_j)`.
    #[inline]
    pub(crate) fn col_lse(&self, j: usize, psi: &[f64]) -> f64 {
        let (rows, vals) = self.kernel.col(j);
        lse(rows
            .iter()
            .zip(vals)
            .filter(|(&i, _)| self.row_active(i))
            .map(|(&i, &v)| v - psi[i]))
    }

    /// Raw Y-marginal of `π(φ, ψ)` assuming `ψ = φ⁺` (so that `Z = 1`).
    pub(crate) fn y_marginal_into(&self, phi: &[f64], psi: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (phi[j] + self.col_lse(j, psi)).exp();
        }
    }
}

/// `φ ↦ φ⁺`, a potential on X.
pub fn plus_transform(phi: &Potential, ctx: &TransformContext) -> Result<Potential> {
    ctx.check(phi, Side::Y)?;
    let mut out = vec![0.0; ctx.n_rows()];
    ctx.plus_into(phi.values(), &mut out)?;
    Ok(Potential::from_raw(Side::X, out))
}

/// `ψ ↦ ψ⁻`, a potential on Y.
pub fn minus_transform(psi: &Potential, ctx: &TransformContext) -> Result<Potential> {
    ctx.check(psi, Side::X)?;
    let mut out = vec![0.0; ctx.n_cols()];
    ctx.minus_into(psi.values(), &mut out)?;
    Ok(Potential::from_raw(Side::Y, out))
}

/// `π(φ, ψ)`, normalized by a global log-sum-exp.
pub fn make_coupling(phi: &Potential, psi: &Potential, ctx: &TransformContext) -> Result<Coupling> {
    ctx.check(phi, Side::Y)?;
    ctx.check(psi, Side::X)?;
    let (n, m) = ctx.kernel.shape();
    let mut logs = vec![f64::NEG_INFINITY; n * m];
    for i in (0..n).filter(|&i| ctx.row_active(i)) {
        let (cols, vals) = ctx.kernel.row(i);
        let shift = psi.values()[i];
        for (&j, &v) in cols.iter().zip(vals) {
            logs[i * m + j] = phi.values()[j] - shift + v;
        }
    }
    let log_z = logsumexp(&logs);
    if !log_z.is_finite() {
        return Err(Error::DegenerateZ);
    }
    for l in logs.iter_mut() {
        *l -= log_z;
    }
    Ok(Coupling::from_log_entries(n, m, logs, log_z))
}

/// `π(φ, φ⁺)`: the coupling induced by a single potential on Y. Its
/// X-marginal is `μ` and `Z = 1` up to rounding.
pub fn induced_coupling(phi: &Potential, ctx: &TransformContext) -> Result<Coupling> {
    let psi = plus_transform(phi, ctx)?;
    make_coupling(phi, &psi, ctx)
}

/// `F'(φ)`: the Y-marginal of `π(φ, φ⁺)`.
pub fn y_marginal_of(phi: &Potential, ctx: &TransformContext) -> Result<DiscreteMeasure> {
    let psi = plus_transform(phi, ctx)?;
    let mut rho = vec![0.0; ctx.n_cols()];
    ctx.y_marginal_into(phi.values(), psi.values(), &mut rho);
    Ok(DiscreteMeasure::from_nonnegative(rho))
}

/// `F(φ) = ⟨φ⁺, μ⟩`.
pub fn f_value(phi: &Potential, ctx: &TransformContext) -> Result<f64> {
    let psi = plus_transform(phi, ctx)?;
    Ok(ctx.mu.integrate(psi.values()))
}

/// The dual functional `D(φ, ψ)`.
pub fn dual_value(phi: &Potential, psi: &Potential, ctx: &TransformContext) -> Result<f64> {
    ctx.check(phi, Side::Y)?;
    ctx.check(psi, Side::X)?;
    Ok(dual_raw(ctx, phi.values(), psi.values()))
}

pub(crate) fn dual_raw(ctx: &TransformContext, phi: &[f64], psi: &[f64]) -> f64 {
    let log_z = lse((0..ctx.n_rows()).filter(|&i| ctx.row_active(i)).map(|i| {
        let (cols, vals) = ctx.kernel.row(i);
        lse(cols.iter().zip(vals).map(|(&j, &v)| phi[j] + v)) - psi[i]
    }));
    ctx.nu.integrate(phi) - ctx.mu.integrate(psi) - log_z
}

/// Semi-dual `J(φ) = D(φ, φ⁺) = ⟨φ,ν⟩ - F(φ)`.
pub fn semi_dual(phi: &Potential, ctx: &TransformContext) -> Result<f64> {
    let psi = plus_transform(phi, ctx)?;
    dual_value(phi, &psi, ctx)
}

/// Subtracts the `ν`-mean of `φ`. Display only; nothing downstream needs it.
pub fn normalize_gauge(phi: &Potential, nu: &DiscreteMeasure) -> Potential {
    let mean = nu.integrate(phi.values()) / nu.mass();
    phi.shifted(-mean)
}
