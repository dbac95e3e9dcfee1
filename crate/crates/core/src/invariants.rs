//! Invariant suite run by `sinkhorn check` on a single instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{BoundReport, FamilyConstants};
use crate::divergences::{bregman_f, kl, kl_coupling};
use crate::error::{Error, Result};
use crate::measures::{kernel_mass, kernel_marginals, validate_coupling, LogKernel, Potential, Side};
use crate::oracle::{grad_check_f_floored, solve_certified};
use crate::problem::Problem;
use crate::solver::{identity_residual, Engine};
use crate::transforms::{induced_coupling, make_coupling, minus_transform, plus_transform, TransformContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    /// Steps for the per-iteration relations.
    pub steps: usize,
    /// Horizon for the rate bounds.
    pub rate_horizon: usize,
    pub gap_tolerance: f64,
    pub certify_iters: usize,
    pub pairs: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { steps: 100, rate_horizon: 500, gap_tolerance: 1e-6, certify_iters: 10_000_000, pairs: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn worst<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
}

fn random_potential(rng: &mut ChaCha8Rng, side: Side, n: usize) -> Potential {
    Potential::from_raw(side, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Runs every invariant on `problem`. Errors from the numerics are reported
/// as failures of the invariant that triggered them.
pub fn run_checks(problem: &Problem, cfg: &CheckConfig) -> Vec<CheckOutcome> {
    let ctx = &problem.ctx;
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<(bool, String)>| {
        out.push(match r {
            Ok((p, d)) => outcome(name, p, d),
            Err(e) => outcome(name, false, e.to_string()),
        })
    };

    push("kernel_marginal_masses", marginal_masses(ctx.kernel()));
    push("log_round_trip", log_round_trip(ctx.kernel()));
    push("shift_covariance", shift_covariance(ctx));
    push("induced_coupling_valid", coupling_valid(ctx));
    push("gradient_finite_difference", grad_check_f_floored(&Potential::zeros(Side::Y, ctx.n_cols()), ctx, 1e-6, 1e-2).map(|e| (e <= 1e-6, format!("relative error {e:e}"))));
    push("step_identity_and_descent", step_relations(ctx, cfg.steps));
    push("bregman_coupling_identity", bregman_pairs(ctx, cfg.pairs));

    match solve_certified(ctx, cfg.gap_tolerance, cfg.certify_iters) {
        Err(e) => push("certificate", Err(e)),
        Ok(cert) => {
            push(
                "certificate",
                Ok((
                    cert.gap <= cfg.gap_tolerance && cert.gap >= -1e-12 && cert.dual_lb <= cert.primal_ub,
                    format!("h* = {:e}, gap = {:e}", cert.h_star, cert.gap),
                )),
            );
            push("rate_bounds", rate_bounds(ctx, cert.h_star, cert.gap, &cert.pi_star, cfg.rate_horizon));
            push("bound_ordering", bound_ordering(ctx, cert.h_star));
            if let Some(r) = family_check(problem, cert.h_star, cert.gap) {
                push(r.0, r.1);
            }
        }
    }
    out
}

fn marginal_masses(k: &LogKernel) -> Result<(bool, String)> {
    let (a, b) = kernel_marginals(k);
    let m = kernel_mass(k);
    let err = (a.mass() - m).abs().max((b.mass() - m).abs()) / m;
    Ok((err <= 1e-12, format!("relative mass mismatch {err:e}")))
}

fn log_round_trip(k: &LogKernel) -> Result<(bool, String)> {
    let again = LogKernel::from_log_triplets(k.n_rows(), k.n_cols(), &k.log_triplets())?;
    Ok((again.log_triplets() == k.log_triplets(), String::new()))
}

fn shift_covariance(ctx: &TransformContext) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let phi = random_potential(&mut rng, Side::Y, ctx.n_cols());
    let psi = random_potential(&mut rng, Side::X, ctx.n_rows());
    let c = 0.75;
    let active: Vec<bool> = ctx.mu().weights().iter().map(|&w| w > 0.0).collect();
    let p0 = plus_transform(&phi, ctx)?;
    let p1 = plus_transform(&phi.shifted(c), ctx)?;
    let e1 = worst(p0.values().iter().zip(p1.values()).zip(&active).filter(|(_, &a)| a).map(|((a, b), _)| (b - a - c).abs()));
    let m0 = minus_transform(&psi, ctx)?;
    let m1 = minus_transform(&psi.shifted(c), ctx)?;
    let live: Vec<bool> = ctx.nu().weights().iter().map(|&w| w > 0.0).collect();
    let e2 = worst(m0.values().iter().zip(m1.values()).zip(&live).filter(|(_, &a)| a).map(|((a, b), _)| (b - a - c).abs()));
    let e = e1.max(e2);
    Ok((e <= 1e-12, format!("max deviation {e:e}")))
}

fn coupling_valid(ctx: &TransformContext) -> Result<(bool, String)> {
    let pi = induced_coupling(&Potential::zeros(Side::Y, ctx.n_cols()), ctx)?;
    validate_coupling(&pi, ctx.kernel())?;
    let e = worst(pi.x_marginal().weights().iter().zip(ctx.mu().weights()).map(|(a, b)| (a - b).abs()));
    Ok((e <= 1e-12, format!("X-marginal deviation {e:e}")))
}

fn step_relations(ctx: &TransformContext, steps: usize) -> Result<(bool, String)> {
    let mut e = Engine::new(ctx, &vec![0.0; ctx.n_cols()])?;
    let nu = ctx.nu().weights();
    for n in 0..steps {
        let phi = e.phi.clone();
        let rho = e.rho.clone();
        let kl_n = e.kl();
        let pi_n = make_coupling(&e.phi_potential(), &e.psi_potential(), ctx)?;
        e.advance()?;
        let res = identity_residual(&phi, &e.phi, &rho, nu);
        if res > 1e-10 {
            return Ok((false, format!("step identity residual {res:e} at n = {n}")));
        }
        let kl_next = e.kl();
        if kl_next > kl_n + 1e-12 {
            return Ok((false, format!("entropy increased from {kl_n:e} to {kl_next:e} at n = {n}")));
        }
        let pi_next = make_coupling(&e.phi_potential(), &e.psi_potential(), ctx)?;
        let rhs = kl_coupling(&pi_n, &pi_next)?;
        if kl_n - kl_next < rhs - 1e-10 {
            return Ok((false, format!("descent {:e} below movement {rhs:e} at n = {n}", kl_n - kl_next)));
        }
    }
    Ok((true, format!("{steps} steps")))
}

fn bregman_pairs(ctx: &TransformContext, pairs: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut eq: f64 = 0.0;
    let mut dp: f64 = 0.0;
    for _ in 0..pairs {
        let phi1 = random_potential(&mut rng, Side::Y, ctx.n_cols());
        let phi2 = random_potential(&mut rng, Side::Y, ctx.n_cols());
        let pi1 = induced_coupling(&phi1, ctx)?;
        let pi2 = induced_coupling(&phi2, ctx)?;
        let h = kl_coupling(&pi1, &pi2)?;
        eq = eq.max((bregman_f(&phi2, &phi1, ctx)? - h).abs());
        dp = dp.max(kl(pi1.y_marginal(), pi2.y_marginal())? - h);
    }
    Ok((eq <= 1e-10 && dp <= 1e-12, format!("identity error {eq:e}, data processing excess {dp:e}")))
}

fn rate_bounds(
    ctx: &TransformContext,
    h_star: f64,
    gap: f64,
    pi_star: &crate::measures::Coupling,
    horizon: usize,
) -> Result<(bool, String)> {
    let general = h_star + ctx.kernel().log_mass() + 2.0 * gap;
    let mut e = Engine::new(ctx, &vec![0.0; ctx.n_cols()])?;
    let pi0 = make_coupling(&e.phi_potential(), &e.psi_potential(), ctx)?;
    let exact = kl_coupling(pi_star, &pi0)? + 2.0 * gap;
    for n in 1..=horizon {
        e.advance()?;
        let v = n as f64 * e.kl();
        if v > general || v > exact {
            return Ok((false, format!("n H(rho_n|nu) = {v:e} exceeds {general:e} or {exact:e} at n = {n}")));
        }
    }
    Ok((true, format!("n <= {horizon}")))
}

fn bound_ordering(ctx: &TransformContext, h_star: f64) -> Result<(bool, String)> {
    if ctx.kernel().log_mass().abs() > 1e-12 {
        return Ok((true, "skipped: kernel mass differs from one".into()));
    }
    let r = BoundReport::new(ctx, h_star, None, FamilyConstants::default())?;
    let ok = r.c_exact <= r.c_strong + 1e-10 && r.c_strong <= r.c_basic + 1e-10;
    Ok((ok, format!("c_exact {:e}, c_strong {:e}, c_basic {:e}", r.c_exact, r.c_strong, r.c_basic)))
}

type FamilyCheck = (&'static str, Result<(bool, String)>);

fn family_check(problem: &Problem, h_star: f64, gap: f64) -> Option<FamilyCheck> {
    let lm = problem.ctx.kernel().log_mass();
    match problem.family()? {
        "quadratic" => {
            let need = |k| problem.meta_f64(k).ok_or_else(|| Error::InvalidParameter(format!("meta lacks {k}")));
            let r = (|| {
                let c = (need("m2_mu")? + need("m2_nu")?) / need("eps")?;
                Ok((h_star - gap / 2.0 + lm <= c + 1e-8, format!("H* + ln mass = {:e}, constant {c:e}", h_star + lm)))
            })();
            Some(("quadratic_constant", r))
        }
        "ou" => {
            let r = problem
                .meta_f64("talagrand")
                .ok_or_else(|| Error::InvalidParameter("meta lacks talagrand".into()))
                .map(|t| (h_star <= 1.05 * t + 0.01, format!("H* = {h_star:e}, constant {t:e}")));
            Some(("talagrand_approximate", r))
        }
        _ => None,
    }
}
