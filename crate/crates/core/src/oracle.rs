//! Certified optimum `H*` and feasible rounding of approximate plans.
//!
//! The certificate brackets `H* = min{H(π|R) : π ∈ Π(μ,ν)}` between the best
//! dual value `D(φ_n, φ_n⁺)` seen along the Sinkhorn path (a lower bound for
//! any kernel mass) and the best entropy of a feasible rounding of `π_n`.

use serde::{Deserialize, Serialize};

use crate::divergences::entropy_wrt_kernel;
use crate::error::{Error, Result};
use crate::measures::{Coupling, DiscreteMeasure, Potential};
use crate::solver::Engine;
use crate::transforms::{f_value, make_coupling, y_marginal_of, TransformContext};

/// Certified bracket around `H*`.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// Midpoint of `[dual_lb, primal_ub]`.
    pub h_star: f64,
    /// Feasible plan attaining `primal_ub`.
    pub pi_star: Coupling,
    /// Potential of the last iterate.
    pub phi_star: Potential,
    pub dual_lb: f64,
    pub primal_ub: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// The serialized part of a [`Certificate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub h_star: f64,
    pub dual_lb: f64,
    pub primal_ub: f64,
    pub gap: f64,
}

impl Certificate {
    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            h_star: self.h_star,
            dual_lb: self.dual_lb,
            primal_ub: self.primal_ub,
            gap: self.gap,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("four floats serialize")
    }
}

/// Runs Sinkhorn from `φ = 0` until the primal-dual gap is at most
/// `gap_tolerance`.
///
/// Bounds are checked on a geometric schedule, so the run may overshoot the
/// first qualifying iteration by about 10%.
pub fn solve_certified(ctx: &TransformContext, gap_tolerance: f64, max_iters: usize) -> Result<Certificate> {
    if !(gap_tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!("gap tolerance must be positive, got {gap_tolerance}")));
    }
    let mut engine = Engine::new(ctx, &vec![0.0; ctx.n_cols()])?;
    let mut dual_lb = f64::NEG_INFINITY;
    let mut primal_ub = f64::INFINITY;
    let mut best_plan: Option<Coupling> = None;
    let mut next_check = 0usize;
    let mut n = 0usize;
    loop {
        let last = n >= max_iters;
        if n >= next_check || last {
            dual_lb = dual_lb.max(engine.dual());
            let pi = make_coupling(&engine.phi_potential(), &engine.psi_potential(), ctx)?;
            if let Ok(rounded) = round_to_feasible(&pi, ctx.mu(), ctx.nu()) {
                let p = entropy_wrt_kernel(&rounded, ctx.kernel())?;
                if p < primal_ub {
                    primal_ub = p;
                    best_plan = Some(rounded);
                }
            }
            let gap = primal_ub - dual_lb;
            if gap <= gap_tolerance {
                return Ok(Certificate {
                    h_star: 0.5 * (primal_ub + dual_lb),
                    pi_star: best_plan.expect("finite primal bound has a plan"),
                    phi_star: engine.phi_potential(),
                    dual_lb,
                    primal_ub,
                    gap,
                    iterations: n,
                });
            }
            if last {
                return Err(Error::NoCertificate { iterations: n, dual_lb, primal_ub });
            }
            next_check = n + 1 + n / 10;
        }
        engine.advance()?;
        n += 1;
    }
}

const FLOW_EPS: f64 = 1e-15;

/// Projects an approximate plan onto `Π(μ, ν)`: rows are rescaled to `μ`,
/// then column excess is routed to column deficit by moving mass within
/// rows, never leaving the support of `pi`.
///
/// The mass moved is a maximum flow on the bipartite row/column graph
/// (Edmonds-Karp), so the output stays close to `pi` in `ℓ¹`.
pub fn round_to_feasible(pi: &Coupling, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Coupling> {
    let (nr, nc) = pi.shape();
    if (mu.len(), nu.len()) != (nr, nc) {
        return Err(Error::ShapeMismatch(pi.shape(), (mu.len(), nu.len())));
    }
    let mut q = pi.entries().to_vec();
    for i in 0..nr {
        let row = &mut q[i * nc..(i + 1) * nc];
        let s: f64 = row.iter().sum();
        let target = mu.weights()[i];
        if target <= 0.0 {
            row.iter_mut().for_each(|v| *v = 0.0);
        } else if s <= 0.0 {
            return Err(Error::CannotRepair { residual: target });
        } else {
            let scale = target / s;
            row.iter_mut().for_each(|v| *v *= scale);
        }
    }

    let mut col_sum = vec![0.0; nc];
    for i in 0..nr {
        for j in 0..nc {
            col_sum[j] += q[i * nc + j];
        }
    }
    let mut supply: Vec<f64> = (0..nc).map(|j| (col_sum[j] - nu.weights()[j]).max(0.0)).collect();
    let mut demand: Vec<f64> = (0..nc).map(|j| (nu.weights()[j] - col_sum[j]).max(0.0)).collect();

    // Rows adjacent to each column and columns adjacent to each row, over the support.
    let support: Vec<bool> = q.iter().map(|&v| v > 0.0).collect();
    let row_cols: Vec<Vec<usize>> = (0..nr).map(|i| (0..nc).filter(|&j| support[i * nc + j]).collect()).collect();
    let col_rows: Vec<Vec<usize>> = (0..nc).map(|j| (0..nr).filter(|&i| support[i * nc + j]).collect()).collect();

    // Direct moves inside a row first; they settle most of the excess at the
    // cost of one pass.
    let mut sup_cols: Vec<usize> = (0..nc).filter(|&j| supply[j] > 0.0).collect();
    let mut dem_cols: Vec<usize> = (0..nc).filter(|&j| demand[j] > 0.0).collect();
    for i in 0..nr {
        let (mut a, mut b) = (0, 0);
        while a < sup_cols.len() && b < dem_cols.len() {
            let (c, k) = (sup_cols[a], dem_cols[b]);
            let cell = q[i * nc + c];
            if supply[c] <= 0.0 || cell <= 0.0 {
                a += 1;
                continue;
            }
            if demand[k] <= 0.0 || !support[i * nc + k] {
                b += 1;
                continue;
            }
            let m = supply[c].min(demand[k]).min(cell);
            q[i * nc + c] = if cell == m { 0.0 } else { cell - m };
            q[i * nc + k] += m;
            supply[c] = if supply[c] == m { 0.0 } else { supply[c] - m };
            demand[k] = if demand[k] == m { 0.0 } else { demand[k] - m };
        }
        sup_cols.retain(|&j| supply[j] > 0.0);
        dem_cols.retain(|&j| demand[j] > 0.0);
    }

    // Nodes: columns 0..nc, rows nc..nc+nr. Capacity scaling: a phase only
    // routes through entries holding at least `delta`, which keeps paths
    // through negligible entries from dominating the augmentation count.
    let mut parent = vec![usize::MAX; nc + nr];
    let mut queue = std::collections::VecDeque::new();
    let top = supply.iter().cloned().fold(0.0, f64::max);
    let mut delta = top;
    loop {
        let phase_delta = if delta < 1e-30 { 0.0 } else { delta };
        while let Some((start, end)) = augmenting_path(&q, nc, &supply, &demand, &col_rows, &row_cols, phase_delta, &mut parent, &mut queue) {
            // Bottleneck over removable entries along the path.
            let mut b = demand[end].min(supply[start]);
            let mut v = end;
            while parent[v] != v {
                let r = parent[v];
                let c = parent[r];
                b = b.min(q[(r - nc) * nc + c]);
                v = c;
            }
            let mut v = end;
            while parent[v] != v {
                let r = parent[v];
                let c = parent[r];
                let i = r - nc;
                q[i * nc + v] += b;
                let cell = &mut q[i * nc + c];
                *cell = if *cell == b { 0.0 } else { (*cell - b).max(0.0) };
                v = c;
            }
            supply[start] = if supply[start] == b { 0.0 } else { supply[start] - b };
            demand[end] = if demand[end] == b { 0.0 } else { demand[end] - b };
        }
        if phase_delta == 0.0 {
            break;
        }
        delta /= 16.0;
    }

    let residual: f64 = supply.iter().sum::<f64>().max(demand.iter().sum());
    if residual > 1e-13 {
        return Err(Error::CannotRepair { residual });
    }
    Coupling::from_entries(nr, nc, q)
}

/// Breadth-first search from all columns with supply to the nearest column
/// with demand, through entries of at least `delta`. Returns the source and
/// sink columns; the path is left in `parent`.
#[allow(clippy::too_many_arguments)]
fn augmenting_path(
    q: &[f64],
    nc: usize,
    supply: &[f64],
    demand: &[f64],
    col_rows: &[Vec<usize>],
    row_cols: &[Vec<usize>],
    delta: f64,
    parent: &mut [usize],
    queue: &mut std::collections::VecDeque<usize>,
) -> Option<(usize, usize)> {
    parent.iter_mut().for_each(|p| *p = usize::MAX);
    queue.clear();
    for j in 0..nc {
        if supply[j] > FLOW_EPS {
            parent[j] = j;
            queue.push_back(j);
        }
    }
    while let Some(u) = queue.pop_front() {
        if u < nc {
            if demand[u] > FLOW_EPS {
                let mut v = u;
                while parent[v] != v {
                    v = parent[parent[v]];
                }
                return Some((v, u));
            }
            for &i in &col_rows[u] {
                let r = nc + i;
                let cap = q[i * nc + u];
                if parent[r] == usize::MAX && cap > 0.0 && cap >= delta {
                    parent[r] = u;
                    queue.push_back(r);
                }
            }
        } else {
            for &k in &row_cols[u - nc] {
                if parent[k] == usize::MAX {
                    parent[k] = u;
                    queue.push_back(k);
                }
            }
        }
    }
    None
}

/// Largest relative error between central finite differences of `F` and
/// `F'(φ) = ρ`, over the coordinates of `φ`.
pub fn grad_check_f(phi: &Potential, ctx: &TransformContext, step: f64) -> Result<f64> {
    grad_check_f_floored(phi, ctx, step, 0.0)
}

/// As [`grad_check_f`], with errors on coordinates where `ρ_j` is below
/// `floor · max ρ` measured relative to that floor instead of `ρ_j`.
pub fn grad_check_f_floored(phi: &Potential, ctx: &TransformContext, step: f64, floor: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let rho = y_marginal_of(phi, ctx)?;
    let scale = floor * rho.weights().iter().cloned().fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut v = phi.values().to_vec();
    for j in 0..v.len() {
        let x = v[j];
        v[j] = x + step;
        let up = f_value(&Potential::new(phi.side(), v.clone())?, ctx)?;
        v[j] = x - step;
        let down = f_value(&Potential::new(phi.side(), v.clone())?, ctx)?;
        v[j] = x;
        let fd = (up - down) / (2.0 * step);
        let g = rho.weights()[j];
        let denom = g.abs().max(scale);
        let err = if denom > 1e-300 { (fd - g).abs() / denom } else { (fd - g).abs() };
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::kl;
    use crate::measures::{kernel_marginals, LogKernel, Side};
    use crate::transforms::induced_coupling;

    fn prob(w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::probability(w.to_vec()).unwrap()
    }

    fn ctx(r: &[Vec<f64>], mu: &[f64], nu: &[f64]) -> TransformContext {
        TransformContext::new(LogKernel::from_dense(r).unwrap(), prob(mu), prob(nu)).unwrap()
    }

    fn marginals_ok(c: &Coupling, mu: &[f64], nu: &[f64]) {
        for (a, b) in c.x_marginal().weights().iter().zip(mu) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        for (a, b) in c.y_marginal().weights().iter().zip(nu) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn product_kernel_certifies_zero() {
        let mu = [0.3, 0.7];
        let nu = [0.2, 0.5, 0.3];
        let r: Vec<Vec<f64>> = mu.iter().map(|a| nu.iter().map(|b| a * b).collect()).collect();
        let cert = solve_certified(&ctx(&r, &mu, &nu), 1e-10, 10).unwrap();
        assert!(cert.h_star.abs() < 1e-12);
        assert!(cert.gap <= 1e-10);
    }

    #[test]
    fn instance_a_certificate() {
        let c = ctx(&[vec![0.5, 0.25], vec![0.125, 0.125]], &[0.5, 0.5], &[0.5, 0.5]);
        let cert = solve_certified(&c, 1e-12, 100_000).unwrap();
        assert!(cert.gap <= 1e-12 && cert.gap >= -1e-12);
        assert!(cert.dual_lb <= cert.primal_ub + 1e-12);
        assert!((cert.h_star - 0.158_347_183_820_374_94).abs() < 1e-11, "{}", cert.h_star);
        marginals_ok(&cert.pi_star, &[0.5, 0.5], &[0.5, 0.5]);
        // H(π*|π₀) = H* - H(μ|μ̄) at φ₀ = 0 and unit mass
        let pi0 = induced_coupling(&Potential::zeros(Side::Y, 2), &c).unwrap();
        let (mu_bar, _) = kernel_marginals(c.kernel());
        let lhs = crate::divergences::kl_coupling(&cert.pi_star, &pi0).unwrap();
        let rhs = cert.h_star - kl(c.mu(), &mu_bar).unwrap();
        assert!((lhs - rhs).abs() <= 2e-12);
        assert!((kl(c.mu(), &mu_bar).unwrap() - 0.143_841_036_225_890_46).abs() < 1e-15);
    }

    #[test]
    fn instance_z_certificate() {
        let c = ctx(&[vec![0.4, 0.1], vec![0.0, 0.5]], &[0.5, 0.5], &[0.5, 0.5]);
        let cert = solve_certified(&c, 1e-6, 10_000_000).unwrap();
        assert!((cert.h_star - 0.5 * 1.25f64.ln()).abs() <= 1e-6);
        assert!(matches!(solve_certified(&c, 1e-9, 1000), Err(Error::NoCertificate { .. })));
    }

    #[test]
    fn summary_json_has_four_fields() {
        let c = ctx(&[vec![0.5, 0.25], vec![0.125, 0.125]], &[0.5, 0.5], &[0.5, 0.5]);
        let cert = solve_certified(&c, 1e-10, 100_000).unwrap();
        let v: serde_json::Value = serde_json::from_str(&cert.to_json()).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["dual_lb", "gap", "h_star", "primal_ub"]);
    }

    #[test]
    fn rounding_feasible_plan_is_identity() {
        let pi = Coupling::from_entries(2, 2, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let out = round_to_feasible(&pi, &prob(&[0.5, 0.5]), &prob(&[0.5, 0.5])).unwrap();
        for (a, b) in out.entries().iter().zip(pi.entries()) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn rounding_transposition_moves_little_mass() {
        let delta = 0.01;
        let pi = Coupling::from_entries(2, 3, vec![0.2 + delta, 0.1 - delta, 0.2, 0.1, 0.2, 0.2]).unwrap();
        let mu = [0.5, 0.5];
        let nu = [0.3, 0.3, 0.4];
        let out = round_to_feasible(&pi, &prob(&mu), &prob(&nu)).unwrap();
        marginals_ok(&out, &mu, &nu);
        let l1: f64 = out.entries().iter().zip(pi.entries()).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 <= 2.0 * delta + 1e-15, "{l1}");
    }

    #[test]
    fn rounding_needs_long_paths() {
        // excess in column 0 reaches column 2 only through row 0 -> col 1 -> row 1
        let pi = Coupling::from_entries(2, 3, vec![0.3, 0.2, 0.0, 0.0, 0.3, 0.2]).unwrap();
        let mu = [0.5, 0.5];
        let nu = [0.2, 0.5, 0.3];
        let out = round_to_feasible(&pi, &prob(&mu), &prob(&nu)).unwrap();
        marginals_ok(&out, &mu, &nu);
        assert_eq!(out.entry(0, 2), 0.0);
        assert_eq!(out.entry(1, 0), 0.0);
    }

    #[test]
    fn rounding_outside_support_fails() {
        let pi = Coupling::from_entries(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(matches!(
            round_to_feasible(&pi, &prob(&[0.5, 0.5]), &prob(&[0.6, 0.4])),
            Err(Error::CannotRepair { .. })
        ));
        assert!(round_to_feasible(&pi, &prob(&[1.0]), &prob(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = ctx(&[vec![0.5, 0.25], vec![0.125, 0.125]], &[0.5, 0.5], &[0.5, 0.5]);
        let phi = Potential::new(Side::Y, vec![0.3, -0.8]).unwrap();
        assert!(grad_check_f(&phi, &c, 1e-5).unwrap() < 1e-8);
        assert!(grad_check_f(&phi, &c, 0.0).is_err());
    }
}
