//! Seeded generators for random, quadratic-cost and Ornstein-Uhlenbeck
//! instances.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)` and split by stream id:
//!
//! | stream | use |
//! |---|---|
//! | 0 | `μ` weights |
//! | 1 | `ν` weights |
//! | 2 | kernel entries |
//! | 3 | zero pattern |
//! | 4 | `x` points |
//! | 5 | `y` points |
//!
//! Uniform doubles are `(next_u64 >> 11) · 2⁻⁵³`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::bound_talagrand;
use crate::divergences::{kl, second_moment};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, LogKernel};
use crate::problem::Problem;
use crate::transforms::{logsumexp, TransformContext};

const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.9) seed_from_u64; streams 0 mu, 1 nu, 2 kernel, 3 zero pattern, 4 x points, 5 y points";

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub ctx: TransformContext,
    pub meta: Value,
    pub points_x: Option<Vec<Vec<f64>>>,
    pub points_y: Option<Vec<Vec<f64>>>,
}

impl ProblemInstance {
    pub fn to_problem(&self) -> Problem {
        Problem { ctx: self.ctx.clone(), meta: self.meta.clone() }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Weights `1/(4n) + 0.75 u_i / Σu`, so every entry is at least `1/(4n)`.
fn random_weights(rng: &mut ChaCha20Rng, n: usize) -> Result<DiscreteMeasure> {
    let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let s: f64 = u.iter().sum();
    let floor = 0.25 / n as f64;
    let w = if s > 0.0 {
        u.iter().map(|v| floor + 0.75 * v / s).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    DiscreteMeasure::probability(w)
}

/// Support of the northwest-corner plan of `(μ, ν)` under the given row and
/// column orders: a staircase of at most `nx + ny - 1` cells carrying a
/// feasible plan.
fn northwest_support(mu: &[f64], nu: &[f64], rows: &[usize], cols: &[usize]) -> Vec<(usize, usize)> {
    let (mut a, mut b) = (0, 0);
    let mut ra = mu[rows[0]];
    let mut cb = nu[cols[0]];
    let mut out = Vec::new();
    loop {
        out.push((rows[a], cols[b]));
        let m = ra.min(cb);
        ra -= m;
        cb -= m;
        let row_done = ra <= cb;
        if row_done && a + 1 < rows.len() {
            a += 1;
            ra = mu[rows[a]];
        } else if b + 1 < cols.len() {
            b += 1;
            cb = nu[cols[b]];
        } else if a + 1 < rows.len() {
            a += 1;
            ra = mu[rows[a]];
        } else {
            break;
        }
    }
    out
}

/// Random marginals and uniform `(0, 1]` kernel entries, with
/// `⌊zero_fraction · nx · ny⌋` entries set to zero. Zeros avoid the support
/// of a northwest-corner plan taken under random row and column orders, so a
/// feasible plan always survives. The kernel is normalized to mass one.
pub fn gen_random(seed: u64, nx: usize, ny: usize, zero_fraction: f64) -> Result<ProblemInstance> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(format!("sizes must be positive, got {nx}x{ny}")));
    }
    if !(0.0..1.0).contains(&zero_fraction) {
        return Err(Error::InvalidParameter(format!("zero_fraction must lie in [0, 1), got {zero_fraction}")));
    }
    let mu = random_weights(&mut stream(seed, 0), nx)?;
    let nu = random_weights(&mut stream(seed, 1), ny)?;
    let mut krng = stream(seed, 2);
    let r: Vec<f64> = (0..nx * ny).map(|_| 1.0 - krng.random::<f64>()).collect();

    let requested = (zero_fraction * (nx * ny) as f64).floor() as usize;
    let mut zero = vec![false; nx * ny];
    if requested > 0 {
        let mut zrng = stream(seed, 3);
        let mut rows: Vec<usize> = (0..nx).collect();
        let mut cols: Vec<usize> = (0..ny).collect();
        rows.shuffle(&mut zrng);
        cols.shuffle(&mut zrng);
        let mut protected = vec![false; nx * ny];
        for (i, j) in northwest_support(mu.weights(), nu.weights(), &rows, &cols) {
            protected[i * ny + j] = true;
        }
        let mut free: Vec<usize> = (0..nx * ny).filter(|&k| !protected[k]).collect();
        if requested > free.len() {
            return Err(Error::InfeasiblePattern { requested, admissible: free.len() });
        }
        free.shuffle(&mut zrng);
        for &k in &free[..requested] {
            zero[k] = true;
        }
    }

    let log_mass = logsumexp(
        &r.iter().zip(&zero).filter(|(_, &z)| !z).map(|(v, _)| v.ln()).collect::<Vec<f64>>(),
    );
    let kernel = if requested > 0 {
        let trip: Vec<(usize, usize, f64)> = (0..nx * ny)
            .filter(|&k| !zero[k])
            .map(|k| (k / ny, k % ny, r[k].ln() - log_mass))
            .collect();
        LogKernel::from_log_triplets(nx, ny, &trip)?
    } else {
        let dense: Vec<Vec<f64>> =
            (0..nx).map(|i| (0..ny).map(|j| r[i * ny + j].ln() - log_mass).collect()).collect();
        LogKernel::from_log_dense(&dense)?
    };
    let meta = json!({
        "family": "random",
        "seed": seed,
        "nx": nx,
        "ny": ny,
        "zero_fraction": zero_fraction,
        "zeros": requested,
        "rng": RNG_NAME,
    });
    Ok(ProblemInstance { ctx: TransformContext::new(kernel, mu, nu)?, meta, points_x: None, points_y: None })
}

fn normal_points(seed: u64, id: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, id);
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// `R = e^{-|x-y|²/2ε} μ⊗ν` for i.i.d. standard normal points and uniform
/// weights, built in the log domain.
pub fn gen_quadratic(seed: u64, nx: usize, ny: usize, d: usize, eps: f64) -> Result<ProblemInstance> {
    if !(eps > 0.0) {
        return Err(Error::NonpositiveEps(eps));
    }
    if nx == 0 || ny == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!("sizes and dimension must be positive, got {nx}x{ny}, d = {d}")));
    }
    let px = normal_points(seed, 4, nx, d);
    let py = normal_points(seed, 5, ny, d);
    let mu = DiscreteMeasure::uniform(nx)?;
    let nu = DiscreteMeasure::uniform(ny)?;
    let ln_mu = -(nx as f64).ln();
    let ln_nu = -(ny as f64).ln();
    let dense: Vec<Vec<f64>> = px
        .iter()
        .map(|x| {
            py.iter()
                .map(|y| {
                    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                    -sq / (2.0 * eps) + ln_mu + ln_nu
                })
                .collect()
        })
        .collect();
    let m2_mu = second_moment(&px, &mu)?;
    let m2_nu = second_moment(&py, &nu)?;
    let meta = json!({
        "family": "quadratic",
        "seed": seed,
        "nx": nx,
        "ny": ny,
        "dim": d,
        "eps": eps,
        "m2_mu": m2_mu,
        "m2_nu": m2_nu,
        "rng": RNG_NAME,
    });
    let ctx = TransformContext::new(LogKernel::from_log_dense(&dense)?, mu, nu)?;
    Ok(ProblemInstance { ctx, meta, points_x: Some(px), points_y: Some(py) })
}

/// Marginal density on the OU grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DensitySpec {
    Gaussian { mean: f64, var: f64 },
    /// The stationary law of the diffusion.
    Stationary,
}

/// Parameters of an OU grid instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuGridSpec {
    pub lambda: f64,
    pub t: f64,
    pub half_width: f64,
    pub points: usize,
    pub mu: DensitySpec,
    pub nu: DensitySpec,
    /// Variance of the stationary law `m`; `None` means `1/(2λ)`, the
    /// stationary variance of `dX = -λX dt + dW`.
    pub stationary_variance: Option<f64>,
}

fn log_gauss(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean) * (x - mean) / var + (2.0 * std::f64::consts::PI * var).ln())
}

fn grid_measure(log_density: &[f64]) -> Result<DiscreteMeasure> {
    let l = logsumexp(log_density);
    DiscreteMeasure::probability(log_density.iter().map(|v| (v - l).exp()).collect())
}

/// `gen_ou_grid_with` using the default stationary variance.
pub fn gen_ou_grid(
    lambda: f64,
    t: f64,
    grid_half_width: f64,
    grid_points: usize,
    mu_spec: DensitySpec,
    nu_spec: DensitySpec,
) -> Result<ProblemInstance> {
    gen_ou_grid_with(&OuGridSpec {
        lambda,
        t,
        half_width: grid_half_width,
        points: grid_points,
        mu: mu_spec,
        nu: nu_spec,
        stationary_variance: None,
    })
}

/// Joint law at times `0` and `T` of a stationary OU process on a uniform
/// grid: `R_ij = m(x_i) p_T(x_i, x_j) Δ²` with `p_T(x, ·) = N(x e^{-λT},
/// (1 - e^{-2λT})/(2λ))`. `μ, ν` are the given densities evaluated on the grid
/// and renormalized; `R` is not renormalized.
pub fn gen_ou_grid_with(spec: &OuGridSpec) -> Result<ProblemInstance> {
    let OuGridSpec { lambda, t, half_width, points, mu, nu, stationary_variance } = *spec;
    if !(lambda > 0.0) {
        return Err(Error::NonpositiveLambda(lambda));
    }
    if !(t > 0.0) {
        return Err(Error::NonpositiveTime(t));
    }
    if points < 2 || !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2 points and a positive half width, got {points} and {half_width}"
        )));
    }
    let s2 = stationary_variance.unwrap_or(0.5 / lambda);
    if !(s2 > 0.0) || !s2.is_finite() {
        return Err(Error::InvalidParameter(format!("stationary variance must be positive, got {s2}")));
    }
    for d in [mu, nu] {
        if let DensitySpec::Gaussian { mean, var } = d {
            if !(var > 0.0) || !mean.is_finite() || !var.is_finite() {
                return Err(Error::InvalidParameter(format!("invalid Gaussian N({mean}, {var})")));
            }
        }
    }

    let dx = 2.0 * half_width / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|k| -half_width + k as f64 * dx).collect();
    let decay = (-lambda * t).exp();
    let vt = -(-2.0 * lambda * t).exp_m1() / (2.0 * lambda);
    let log_m: Vec<f64> = grid.iter().map(|&x| log_gauss(x, 0.0, s2)).collect();
    let log_dx2 = 2.0 * dx.ln();
    let dense: Vec<Vec<f64>> = grid
        .iter()
        .zip(&log_m)
        .map(|(&x, &lm)| grid.iter().map(|&y| lm + log_gauss(y, x * decay, vt) + log_dx2).collect())
        .collect();

    let density = |d: DensitySpec| -> Vec<f64> {
        match d {
            DensitySpec::Gaussian { mean, var } => grid.iter().map(|&x| log_gauss(x, mean, var)).collect(),
            DensitySpec::Stationary => log_m.clone(),
        }
    };
    let m_grid = grid_measure(&log_m)?;
    let mu_m = grid_measure(&density(mu))?;
    let nu_m = grid_measure(&density(nu))?;
    let kl_mu_m = kl(&mu_m, &m_grid)?;
    let kl_nu_m = kl(&nu_m, &m_grid)?;
    let talagrand = bound_talagrand(kl_mu_m, kl_nu_m, lambda, t)?;

    let meta = json!({
        "family": "ou",
        "lambda": lambda,
        "t": t,
        "grid_half_width": half_width,
        "grid_points": points,
        "spacing": dx,
        "stationary_variance": s2,
        "transition_variance": vt,
        "mu_spec": mu,
        "nu_spec": nu,
        "kl_mu_m": kl_mu_m,
        "kl_nu_m": kl_nu_m,
        "talagrand": talagrand,
    });
    let ctx = TransformContext::new(LogKernel::from_log_dense(&dense)?, mu_m, nu_m)?;
    let pts: Vec<Vec<f64>> = grid.iter().map(|&x| vec![x]).collect();
    Ok(ProblemInstance { ctx, meta, points_x: Some(pts.clone()), points_y: Some(pts) })
}
