//! The Sinkhorn iteration `φ_{n+1} = (φ_n)^{+-}` with a per-step trace.
//!
//! One iteration is a full round trip through both transforms, so every
//! recorded coupling `π_n = π(φ_n, φ_n⁺)` has X-marginal `μ` and its
//! Y-marginal `ρ_n` converges to `ν`. Read as mirror descent on
//! `ρ ↦ H(ρ|ν)` with movement limiter `F*`, each step satisfies
//!
//! ```text
//! φ_{n+1} - φ_n = -ln(ρ_n / ν)
//! H(ρ_{n+1}|ν) <= H(ρ_n|ν) - H(π_n|π_{n+1})
//! n H(ρ_n|ν)   <= H(π*|π_0)
//! ```
//!
//! and the trace records both sides of each relation.

use std::io::Write;

use crate::bounds;
use crate::divergences::{hilbert_slices, kl, kl_coupling, kl_slices, entropy_wrt_kernel};
use crate::error::{Error, Result};
use crate::measures::{Coupling, DiscreteMeasure, Potential, Side};
use crate::oracle::round_to_feasible;
use crate::transforms::{dual_raw, make_coupling, TransformContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once `H(ρ_n|ν)` is at most this.
    pub kl_tolerance: f64,
    /// Abort when `max|φ_n|` exceeds this.
    pub divergence_guard: f64,
    pub record_every: usize,
    /// Record `H(π_n|π_{n+1})` and the entropy decrement; costs two
    /// couplings per recorded row.
    pub descent_diagnostics: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            kl_tolerance: 1e-12,
            divergence_guard: 1e6,
            record_every: 1,
            descent_diagnostics: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.kl_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("kl_tolerance must be nonnegative".into()));
        }
        if !(self.divergence_guard > 0.0) {
            return Err(Error::InvalidParameter("divergence_guard must be positive".into()));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Diverged,
    Infeasible,
}

/// Diagnostics for one recorded iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    /// `H(ρ_n|ν)`.
    pub kl_rho_nu: f64,
    /// `H(ρ_n|ν) - H(ρ_{n+1}|ν)`.
    pub kl_decrement_lhs: Option<f64>,
    /// `H(π_n|π_{n+1})`.
    pub descent_rhs: Option<f64>,
    /// `D(φ_n, ψ_n)`.
    pub dual: f64,
    /// `H(π̂_n|R)` for the feasible rounding `π̂_n` of `π_n`.
    pub primal_rounded: Option<f64>,
    /// Best primal bound minus best dual bound seen so far.
    pub gap: Option<f64>,
    pub hilbert: Option<f64>,
    /// `(H* + ln ∬R) / n`.
    pub bound_general: Option<f64>,
    /// `H(π*|π_0) / n`.
    pub bound_exact: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "n,kl_rho_nu,descent_rhs,dual,primal_rounded,gap,hilbert,bound_general,bound_exact";

fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

impl IterateTrace {
    /// Writes the trace as CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                fmt17(r.kl_rho_nu),
                fmt_opt(r.descent_rhs),
                fmt17(r.dual),
                fmt_opt(r.primal_rounded),
                fmt_opt(r.gap),
                fmt_opt(r.hilbert),
                fmt_opt(r.bound_general),
                fmt_opt(r.bound_exact),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Result of one Sinkhorn step from `φ_n`.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub phi_next: Potential,
    /// `ρ_n = F'(φ_n)`.
    pub rho: DiscreteMeasure,
    /// `ψ_n = φ_n⁺`.
    pub psi: Potential,
}

impl StepOutput {
    /// `max_j |φ_{n+1} - φ_n + ln(ρ_n/ν)|` over `ν_j > 0`.
    pub fn identity_residual(&self, phi_n: &Potential, nu: &DiscreteMeasure) -> f64 {
        identity_residual(phi_n.values(), self.phi_next.values(), self.rho.weights(), nu.weights())
    }
}

pub(crate) fn identity_residual(phi: &[f64], next: &[f64], rho: &[f64], nu: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..phi.len() {
        if nu[j] > 0.0 {
            let r = next[j] - phi[j] + (rho[j] / nu[j]).ln();
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Buffers for iterating without per-step allocation.
pub(crate) struct Engine<'a> {
    ctx: &'a TransformContext,
    pub(crate) phi: Vec<f64>,
    pub(crate) psi: Vec<f64>,
    pub(crate) rho: Vec<f64>,
    col: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(ctx: &'a TransformContext, phi0: &[f64]) -> Result<Self> {
        let mut e = Self {
            ctx,
            phi: phi0.to_vec(),
            psi: vec![0.0; ctx.n_rows()],
            rho: vec![0.0; ctx.n_cols()],
            col: vec![0.0; ctx.n_cols()],
            scratch: vec![0.0; ctx.n_cols()],
        };
        e.refresh()?;
        Ok(e)
    }

    /// Recomputes `ψ = φ⁺`, the column log-sums and `ρ = F'(φ)`.
    fn refresh(&mut self) -> Result<()> {
        self.ctx.plus_into(&self.phi, &mut self.psi)?;
        for j in 0..self.phi.len() {
            self.col[j] = self.ctx.col_lse(j, &self.psi);
            self.rho[j] = (self.phi[j] + self.col[j]).exp();
        }
        let nu = self.ctx.nu().weights();
        if let Some(j) = (0..nu.len()).find(|&j| nu[j] <= 0.0 && self.rho[j] > 0.0) {
            return Err(Error::NonAbsolutelyContinuous { col: j });
        }
        Ok(())
    }

    pub(crate) fn kl(&self) -> f64 {
        kl_slices(&self.rho, self.ctx.nu().weights())
    }

    pub(crate) fn dual(&self) -> f64 {
        dual_raw(self.ctx, &self.phi, &self.psi)
    }

    /// `φ_{n+1} = (ψ_n)⁻` into the scratch buffer.
    fn next_phi(&mut self) -> Result<()> {
        let nu = self.ctx.nu().weights();
        for j in 0..self.phi.len() {
            if nu[j] <= 0.0 {
                self.scratch[j] = 0.0;
            } else if self.col[j] == f64::NEG_INFINITY {
                return Err(Error::EmptyColumn { col: j });
            } else {
                self.scratch[j] = nu[j].ln() - self.col[j];
            }
        }
        Ok(())
    }

    pub(crate) fn advance(&mut self) -> Result<()> {
        self.next_phi()?;
        std::mem::swap(&mut self.phi, &mut self.scratch);
        self.refresh()
    }

    pub(crate) fn max_abs_phi(&self) -> f64 {
        self.phi.iter().fold(0.0, |m: f64, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY })
    }

    pub(crate) fn phi_potential(&self) -> Potential {
        Potential::from_raw(Side::Y, self.phi.clone())
    }

    pub(crate) fn psi_potential(&self) -> Potential {
        Potential::from_raw(Side::X, self.psi.clone())
    }
}

/// One Sinkhorn step: `ψ_n = φ_n⁺`, `φ_{n+1} = ψ_n⁻`, `ρ_n = F'(φ_n)`.
pub fn sinkhorn_step(phi_n: &Potential, ctx: &TransformContext) -> Result<StepOutput> {
    if phi_n.side() != Side::Y || phi_n.len() != ctx.n_cols() {
        return Err(Error::DimensionMismatch("phi must be a potential on Y".into()));
    }
    let mut e = Engine::new(ctx, phi_n.values())?;
    let rho = DiscreteMeasure::from_nonnegative(e.rho.clone());
    let psi = e.psi_potential();
    e.next_phi()?;
    let phi_next = Potential::new(Side::Y, e.scratch.clone())?;
    Ok(StepOutput { phi_next, rho, psi })
}

/// Optimum data that unlocks the bound and certificate columns of a trace.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    pub h_star: f64,
    /// A plan in `Π(μ, ν)` whose entropy relative to `R` is (close to) `H*`.
    pub pi_star: &'a Coupling,
    pub phi_star: &'a Potential,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub phi: Potential,
    pub trace: IterateTrace,
    pub status: SolveStatus,
    /// Number of completed steps.
    pub iterations: usize,
    pub final_kl: f64,
    /// `H(π*|π_0)` when a reference was supplied.
    pub c_exact: Option<f64>,
    /// Set when the run stopped on an error (status `Infeasible` or `Diverged`).
    pub failure: Option<String>,
}

/// Runs Sinkhorn from `phi0` (zero when `None`).
pub fn solve(ctx: &TransformContext, phi0: Option<&Potential>, opts: &SolveOptions) -> Result<SolveResult> {
    solve_with_reference(ctx, phi0, opts, None)
}

/// Runs Sinkhorn and, given a reference optimum, fills the bound, rounding,
/// gap and Hilbert-distance columns of the trace.
pub fn solve_with_reference(
    ctx: &TransformContext,
    phi0: Option<&Potential>,
    opts: &SolveOptions,
    reference: Option<Reference<'_>>,
) -> Result<SolveResult> {
    opts.validate()?;
    let phi0 = match phi0 {
        Some(p) if p.side() == Side::Y && p.len() == ctx.n_cols() => p.clone(),
        Some(_) => return Err(Error::DimensionMismatch("phi0 must be a potential on Y".into())),
        None => Potential::zeros(Side::Y, ctx.n_cols()),
    };

    let mut trace = IterateTrace::default();
    let mut engine = match Engine::new(ctx, phi0.values()) {
        Ok(e) => e,
        Err(err) => return Ok(failed(phi0, trace, SolveStatus::Infeasible, 0, err)),
    };

    let log_mass = ctx.kernel().log_mass();
    let c_exact = match reference {
        Some(r) => {
            let pi0 = make_coupling(&phi0, &engine.psi_potential(), ctx)?;
            Some(kl_coupling(r.pi_star, &pi0)?)
        }
        None => None,
    };
    let mut best_primal = f64::INFINITY;
    let mut best_dual = f64::NEG_INFINITY;

    let mut n = 0usize;
    loop {
        let kl_n = engine.kl();
        let converged = kl_n <= opts.kl_tolerance;
        let last = converged || n >= opts.max_iters;
        let record = n % opts.record_every == 0 || last;

        let mut row = if record {
            let dual = engine.dual();
            let mut row = TraceRow {
                n,
                kl_rho_nu: kl_n,
                kl_decrement_lhs: None,
                descent_rhs: None,
                dual,
                primal_rounded: None,
                gap: None,
                hilbert: None,
                bound_general: None,
                bound_exact: None,
            };
            if let Some(r) = reference {
                best_dual = best_dual.max(dual);
                let pi_n = make_coupling(&engine.phi_potential(), &engine.psi_potential(), ctx)?;
                if let Ok(rounded) = round_to_feasible(&pi_n, ctx.mu(), ctx.nu()) {
                    let p = entropy_wrt_kernel(&rounded, ctx.kernel())?;
                    row.primal_rounded = Some(p);
                    best_primal = best_primal.min(p);
                }
                if best_primal.is_finite() {
                    row.gap = Some(best_primal - best_dual);
                }
                row.hilbert = Some(hilbert_slices(&engine.phi, r.phi_star.values()));
                if n >= 1 {
                    row.bound_general = bounds::bound_general(r.h_star, log_mass.exp(), n).ok();
                    row.bound_exact = c_exact.map(|c| c / n as f64);
                }
            }
            Some(row)
        } else {
            None
        };

        if last {
            if let Some(row) = row.take() {
                trace.rows.push(row);
            }
            let status = if converged { SolveStatus::Converged } else { SolveStatus::MaxIters };
            return Ok(SolveResult {
                phi: engine.phi_potential(),
                trace,
                status,
                iterations: n,
                final_kl: kl_n,
                c_exact,
                failure: None,
            });
        }

        let pi_n = match (&row, opts.descent_diagnostics) {
            (Some(_), true) => Some(make_coupling(&engine.phi_potential(), &engine.psi_potential(), ctx)?),
            _ => None,
        };

        let prev_phi = engine.phi_potential();
        if let Err(err) = engine.advance() {
            if let Some(row) = row.take() {
                trace.rows.push(row);
            }
            let status = match err {
                Error::NonAbsolutelyContinuous { .. } | Error::EmptyRow { .. } | Error::EmptyColumn { .. } => {
                    SolveStatus::Infeasible
                }
                _ => SolveStatus::Diverged,
            };
            return Ok(failed(prev_phi, trace, status, n, err));
        }
        if engine.max_abs_phi() > opts.divergence_guard {
            if let Some(row) = row.take() {
                trace.rows.push(row);
            }
            let err = Error::InvalidParameter(format!(
                "potential magnitude {} exceeds guard {}",
                engine.max_abs_phi(),
                opts.divergence_guard
            ));
            return Ok(failed(prev_phi, trace, SolveStatus::Diverged, n + 1, err));
        }

        if let (Some(row), Some(pi_n)) = (row.as_mut(), pi_n) {
            let pi_next = make_coupling(&engine.phi_potential(), &engine.psi_potential(), ctx)?;
            row.descent_rhs = Some(kl_coupling(&pi_n, &pi_next)?);
            row.kl_decrement_lhs = Some(kl_n - engine.kl());
        }
        if let Some(row) = row {
            trace.rows.push(row);
        }
        n += 1;
    }
}

fn failed(phi: Potential, trace: IterateTrace, status: SolveStatus, iterations: usize, err: Error) -> SolveResult {
    let final_kl = trace.rows.last().map_or(f64::NAN, |r| r.kl_rho_nu);
    SolveResult {
        phi,
        trace,
        status,
        iterations,
        final_kl,
        c_exact: None,
        failure: Some(err.to_string()),
    }
}

/// `H(ρ_n|ν)` for `n = 0..=steps` starting from `phi0`, without diagnostics.
pub fn kl_sequence(ctx: &TransformContext, phi0: &Potential, steps: usize) -> Result<Vec<f64>> {
    let mut e = Engine::new(ctx, phi0.values())?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(e.kl());
    for _ in 0..steps {
        e.advance()?;
        out.push(e.kl());
    }
    Ok(out)
}

/// `H(ρ|ν)` for a single potential; convenience for tests and checks.
pub fn kl_of_potential(phi: &Potential, ctx: &TransformContext) -> Result<f64> {
    let rho = crate::transforms::y_marginal_of(phi, ctx)?;
    kl(&rho, ctx.nu())
}
