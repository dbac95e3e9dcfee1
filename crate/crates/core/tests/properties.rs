use proptest::prelude::*;

use sinkhorn_mirror::divergences::{bregman_f, entropy_wrt_kernel, kl, kl_coupling};
use sinkhorn_mirror::generate::{gen_quadratic, gen_random};
use sinkhorn_mirror::measures::{kernel_marginals, kernel_mass, DiscreteMeasure, LogKernel, Potential, Side};
use sinkhorn_mirror::oracle::{round_to_feasible, solve_certified};
use sinkhorn_mirror::solver::{kl_sequence, sinkhorn_step, solve, SolveOptions};
use sinkhorn_mirror::transforms::{
    dual_value, f_value, induced_coupling, minus_transform, plus_transform, semi_dual, TransformContext,
};

fn instance() -> impl Strategy<Value = TransformContext> {
    (any::<u64>(), 2usize..9, 2usize..9, prop_oneof![Just(0.0), Just(0.2), Just(0.4)]).prop_filter_map(
        "pattern must be attainable",
        |(seed, nx, ny, f)| gen_random(seed, nx, ny, f).ok().map(|p| p.ctx),
    )
}

fn with_potential() -> impl Strategy<Value = (TransformContext, Vec<f64>)> {
    instance().prop_flat_map(|c| {
        let m = c.n_cols();
        (Just(c), prop::collection::vec(-3.0f64..3.0, m))
    })
}

fn y(v: &[f64]) -> Potential {
    Potential::new(Side::Y, v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_commute_with_constants((c, v) in with_potential(), s in -10.0f64..10.0) {
        let phi = y(&v);
        let p0 = plus_transform(&phi, &c).unwrap();
        let p1 = plus_transform(&phi.shifted(s), &c).unwrap();
        for (a, b) in p0.values().iter().zip(p1.values()) {
            prop_assert!((b - a - s).abs() < 1e-12);
        }
        let m0 = minus_transform(&p0, &c).unwrap();
        let m1 = minus_transform(&p0.shifted(s), &c).unwrap();
        for (a, b) in m0.values().iter().zip(m1.values()) {
            prop_assert!((b - a - s).abs() < 1e-12);
        }
        prop_assert!((f_value(&phi.shifted(s), &c).unwrap() - f_value(&phi, &c).unwrap() - s).abs() < 1e-11);
        prop_assert!((semi_dual(&phi.shifted(s), &c).unwrap() - semi_dual(&phi, &c).unwrap()).abs() < 1e-11);
    }

    #[test]
    fn induced_coupling_has_x_marginal_mu((c, v) in with_potential()) {
        let pi = induced_coupling(&y(&v), &c).unwrap();
        prop_assert!((pi.entries().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in pi.x_marginal().weights().iter().zip(c.mu().weights()) {
            prop_assert!((a - b).abs() < 1e-13);
        }
        prop_assert!(pi.log_z().abs() < 1e-12);
    }

    #[test]
    fn divergences_are_nonnegative((c, v) in with_potential(), w in prop::collection::vec(-3.0f64..3.0, 8)) {
        let phi1 = y(&v);
        let phi2 = y(&w[..v.len().min(8)].iter().chain(std::iter::repeat(&0.0)).take(v.len()).cloned().collect::<Vec<_>>());
        let pi1 = induced_coupling(&phi1, &c).unwrap();
        let pi2 = induced_coupling(&phi2, &c).unwrap();
        prop_assert!(kl(pi1.y_marginal(), pi2.y_marginal()).unwrap() >= -1e-15);
        prop_assert!(kl_coupling(&pi1, &pi2).unwrap() >= -1e-14);
        prop_assert!(bregman_f(&phi2, &phi1, &c).unwrap() >= -1e-13);
    }

    #[test]
    fn step_identity_holds((c, v) in with_potential()) {
        let phi = y(&v);
        let out = sinkhorn_step(&phi, &c).unwrap();
        prop_assert!(out.identity_residual(&phi, c.nu()) < 1e-10);
        // the next iterate's coupling has Y-marginal ν up to rounding
        let next = induced_coupling(&out.phi_next, &c).unwrap();
        let pushed = minus_transform(&out.psi, &c).unwrap();
        prop_assert_eq!(pushed.values(), out.phi_next.values());
        prop_assert!(next.entries().iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn weak_duality((c, v) in with_potential()) {
        let phi = y(&v);
        let psi = plus_transform(&phi, &c).unwrap();
        let d = dual_value(&phi, &psi, &c).unwrap();
        let pi = induced_coupling(&phi, &c).unwrap();
        let feasible = round_to_feasible(&pi, c.mu(), c.nu()).unwrap();
        for (a, b) in feasible.y_marginal().weights().iter().zip(c.nu().weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in feasible.x_marginal().weights().iter().zip(c.mu().weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(d <= entropy_wrt_kernel(&feasible, c.kernel()).unwrap() + 1e-12);
    }

    #[test]
    fn entropy_sequence_is_nonincreasing(c in instance()) {
        let seq = kl_sequence(&c, &Potential::zeros(Side::Y, c.n_cols()), 50).unwrap();
        for w in seq.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn kernel_round_trip(c in instance()) {
        let k = c.kernel();
        let again = LogKernel::from_log_triplets(k.n_rows(), k.n_cols(), &k.log_triplets()).unwrap();
        prop_assert_eq!(again.log_triplets(), k.log_triplets());
        let dense = LogKernel::from_log_dense(&k.to_log_dense()).unwrap();
        prop_assert_eq!(dense.log_triplets(), k.log_triplets());
        let (a, b) = kernel_marginals(k);
        let m = kernel_mass(k);
        prop_assert!((a.mass() - m).abs() < 1e-12 && (b.mass() - m).abs() < 1e-12);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), nx in 4usize..12, ny in 4usize..12) {
        let a = gen_random(seed, nx, ny, 0.3).unwrap().to_problem().to_json_string();
        let b = gen_random(seed, nx, ny, 0.3).unwrap().to_problem().to_json_string();
        prop_assert_eq!(a, b);
        let q1 = gen_quadratic(seed, nx, ny, 3, 0.5).unwrap();
        let q2 = gen_quadratic(seed, nx, ny, 3, 0.5).unwrap();
        prop_assert_eq!(q1.points_x, q2.points_x);
        prop_assert!(q1.ctx.kernel().log_mass() <= 1e-12);
    }

    #[test]
    fn random_marginals_respect_floor(seed in any::<u64>(), nx in 1usize..30, ny in 1usize..30) {
        let p = gen_random(seed, nx, ny, 0.0).unwrap();
        prop_assert!(p.ctx.mu().weights().iter().all(|&w| w >= 0.25 / nx as f64));
        prop_assert!(p.ctx.nu().weights().iter().all(|&w| w >= 0.25 / ny as f64));
    }
}

#[test]
fn early_iterate_rounding_bounds_optimum() {
    let c = TransformContext::new(
        LogKernel::from_dense(&[vec![0.5, 0.25], vec![0.125, 0.125]]).unwrap(),
        DiscreteMeasure::probability(vec![0.5, 0.5]).unwrap(),
        DiscreteMeasure::probability(vec![0.5, 0.5]).unwrap(),
    )
    .unwrap();
    let opts = SolveOptions { max_iters: 5, kl_tolerance: 0.0, ..Default::default() };
    let res = solve(&c, None, &opts).unwrap();
    assert_eq!(res.iterations, 5);
    let pi5 = induced_coupling(&res.phi, &c).unwrap();
    let rounded = round_to_feasible(&pi5, c.mu(), c.nu()).unwrap();
    let cert = solve_certified(&c, 1e-10, 100_000).unwrap();
    assert!(entropy_wrt_kernel(&rounded, c.kernel()).unwrap() >= cert.dual_lb);
    // frozen from a certified run: the closed form a = 0.5 √2/(1+√2)
    assert!((cert.h_star - 0.158_347_183_820_374_94).abs() <= cert.gap / 2.0 + 1e-15);
}
