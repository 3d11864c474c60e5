//! Cross-module property tests: algebraic identities of the pool
//! expectations, derivative consistency across loss families, and structural
//! invariants of recorded trajectories.

use std::sync::Arc;

use proptest::prelude::*;

use maml_ode::datagen::{gen_random_quadratic_pool, initial_point};
use maml_ode::diagnostics::{
    estimate_constants, grad_norm_transfer_bwd, grad_norm_transfer_fwd, Region,
};
use maml_ode::losses::{
    counterexample_pool, finite_diff_grad, finite_diff_grad_of, finite_diff_hess_of,
    quadratic_pair_pool, smoothed_hinge, QuadraticLoss, SinusoidalQuadraticLoss,
};
use maml_ode::meta_grad::{probe_maml_grad, probe_maml_loss};
use maml_ode::optimizers::{run_bi_maml, run_maml};
use maml_ode::task_model::{Integrator, Loss, MamlConfig, Matrix, Phase, TaskPool, Vector};

fn scalar(v: f64) -> Vector {
    Vector::from_element(1, v)
}

fn pair_kernels() -> Vec<Arc<dyn Loss>> {
    vec![
        Arc::new(QuadraticLoss::shifted_isotropic(&scalar(1.0), 1.0)),
        Arc::new(QuadraticLoss::shifted_isotropic(&scalar(-1.0), 1.0)),
    ]
}

proptest! {
    /// Pool expectations are linear in the weights: evaluating with the
    /// average of two weight vectors equals the average of the evaluations.
    #[test]
    fn expectations_linear_in_weights(
        p in 0.0f64..1.0,
        q in 0.0f64..1.0,
        w in -5.0f64..5.0,
    ) {
        let pool_p = TaskPool::new(pair_kernels(), vec![p, 1.0 - p]).unwrap();
        let pool_q = TaskPool::new(pair_kernels(), vec![q, 1.0 - q]).unwrap();
        let mid = 0.5 * (p + q);
        let pool_mid = TaskPool::new(pair_kernels(), vec![mid, 1.0 - mid]).unwrap();
        let w = scalar(w);

        let avg_loss = 0.5
            * (pool_p.probe_expected_loss(&w).unwrap()
                + pool_q.probe_expected_loss(&w).unwrap());
        let mid_loss = pool_mid.probe_expected_loss(&w).unwrap();
        prop_assert!((avg_loss - mid_loss).abs() <= 1e-12 * (1.0 + avg_loss.abs()));

        let avg_grad = 0.5
            * (pool_p.probe_expected_grad(&w).unwrap()
                + pool_q.probe_expected_grad(&w).unwrap());
        let mid_grad = pool_mid.probe_expected_grad(&w).unwrap();
        let grad_scale = 1.0 + avg_grad.norm();
        prop_assert!((avg_grad - mid_grad).norm() <= 1e-12 * grad_scale);
    }

    /// The expected gradient matches central differences of the expected
    /// loss.
    #[test]
    fn expected_grad_matches_fd(w in -3.0f64..3.0, seed in 0u64..50) {
        let pool = gen_random_quadratic_pool(3, 2, 0.5, 2.0, seed).unwrap();
        let w = Vector::from_vec(vec![w, -0.3 * w + 0.1]);
        let g = pool.probe_expected_grad(&w).unwrap();
        let fd = finite_diff_grad(
            &|u: &Vector| pool.probe_expected_loss(u).unwrap(),
            &w,
            1e-5 * w.amax().max(1.0),
        )
        .unwrap();
        let scale = g.norm().max(1.0);
        prop_assert!((g - fd).norm() / scale <= 1e-5);
    }

    /// With a zero inner step the meta objects all collapse onto the plain
    /// expected loss.
    #[test]
    fn alpha_zero_identities(w in -4.0f64..4.0, seed in 0u64..20) {
        let pool = gen_random_quadratic_pool(4, 3, 0.5, 2.0, seed).unwrap();
        let w = Vector::from_vec(vec![w, 0.5 * w, -w]);
        let f = pool.probe_expected_loss(&w).unwrap();
        let g = pool.probe_expected_grad(&w).unwrap();
        let big_f = probe_maml_loss(&pool, 0.0, &w).unwrap();
        let big_g = probe_maml_grad(&pool, 0.0, &w).unwrap();
        prop_assert!((f - big_f).abs() <= 1e-14 * (1.0 + f.abs()));
        prop_assert!((&g - &big_g).norm() <= 1e-14 * (1.0 + g.norm()));
    }

    /// Shared-curvature pools admit the closed form
    /// `∇F(w) = (I − αH)²∇f(w)`.
    #[test]
    fn shared_hessian_closed_form(alpha in 0.0f64..0.45, w in -4.0f64..4.0) {
        let pool = quadratic_pair_pool();
        let w = scalar(w);
        let g = probe_maml_grad(&pool, alpha, &w).unwrap();
        let gf = pool.probe_expected_grad(&w).unwrap();
        let factor = (1.0 - alpha) * (1.0 - alpha);
        prop_assert!((g[0] - factor * gf[0]).abs() <= 1e-12 * (1.0 + g[0].abs()));
    }

    /// The forward/backward norm-transfer pair is a relaxation, never a
    /// contraction.
    #[test]
    fn transfer_round_trip_never_contracts(
        g in 0.0f64..20.0,
        alpha_frac in 0.0f64..0.99,
    ) {
        let pool = quadratic_pair_pool();
        let region = Region::cube(&Vector::zeros(1), 3.0).unwrap();
        let c = estimate_constants(&pool, &region, 64).unwrap();
        let alpha = alpha_frac * 1.0 / (4.0 * c.l);
        let fwd = grad_norm_transfer_fwd(g, &c, alpha);
        let back = grad_norm_transfer_bwd(fwd, &c, alpha).unwrap();
        prop_assert!(back >= g - 1e-12);
    }

    /// Trajectory structure: time and counters never decrease, the phase
    /// sequence is a clean prefix, and phase-one samples carry no Hessians.
    #[test]
    fn biphasic_trajectory_structure(
        eps0 in 1e-3f64..2.0,
        beta in 0.05f64..0.9,
        w0 in -6.0f64..6.0,
    ) {
        let pool = quadratic_pair_pool();
        let config = MamlConfig {
            alpha: 0.3,
            beta,
            eps: 1e-8,
            eps0,
            max_iters: 400,
            max_time: 1e9,
            integrator: Integrator::Euler,
        };
        let traj = run_bi_maml(&pool, &config, &scalar(w0)).unwrap();
        let mut seen_maml = false;
        for pair in traj.samples.windows(2) {
            prop_assert!(pair[1].t >= pair[0].t);
            prop_assert!(pair[1].hess_evals_cum >= pair[0].hess_evals_cum);
            prop_assert!(pair[1].grad_evals_cum >= pair[0].grad_evals_cum);
        }
        for s in &traj.samples {
            match s.phase {
                Phase::Maml => seen_maml = true,
                Phase::ExpectedLoss => {
                    prop_assert!(!seen_maml, "phase interleaved at iter {}", s.iter);
                    prop_assert_eq!(s.hess_evals_cum, 0);
                }
            }
        }
    }
}

#[test]
fn analytic_derivatives_match_finite_differences_across_families() {
    // 50 deterministic probes per loss family in [−3, 3]^d, checked to
    // relative 1e−5 as gradients and Hessians.
    let probes_1d: Vec<Vector> = (1..=50)
        .map(|i| scalar(-3.0 + 6.0 * maml_ode::diagnostics::halton(i, 2)))
        .collect();

    let families_1d: Vec<(&str, Arc<dyn Loss>)> = vec![
        (
            "quadratic",
            Arc::new(QuadraticLoss::shifted_isotropic(&scalar(0.7), 1.3)),
        ),
        (
            "sinusoidal",
            Arc::new(SinusoidalQuadraticLoss::new(0.505, -1.0, 1.0)),
        ),
        (
            "sinusoidal-fast",
            Arc::new(SinusoidalQuadraticLoss::new(0.505, -0.0001, 100.0)),
        ),
    ];
    for (name, loss) in &families_1d {
        for w in &probes_1d {
            let g = loss.grad(w);
            let fd = finite_diff_grad_of(&**loss, w, 1e-6 * w.amax().max(1.0)).unwrap();
            let scale = g.norm().max(1.0);
            assert!(
                (g - fd).norm() / scale < 1e-5,
                "{name}: gradient mismatch at w = {}",
                w[0]
            );
            let h = loss.hess(w);
            // The fast sinusoid oscillates at wavelength ~0.06; the Hessian
            // stencil must sit well inside it.
            let fdh = finite_diff_hess_of(&**loss, w, 1e-5 * w.amax().max(1.0)).unwrap();
            let hscale = h.amax().max(1.0);
            assert!(
                (h - fdh).amax() / hscale < 1e-5,
                "{name}: Hessian mismatch at w = {}",
                w[0]
            );
        }
    }

    // Smoothed hinge in d = 3 on its own deterministic probes.
    let x = Matrix::from_fn(40, 3, |i, j| {
        maml_ode::diagnostics::halton(i as u64 + 1, [2, 3, 5][j]) * 4.0 - 2.0
    });
    let y: Vec<f64> = (0..40)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let hinge = smoothed_hinge(x, y, 0.25).unwrap();
    for i in 1..=50u64 {
        let w = Vector::from_vec(vec![
            -3.0 + 6.0 * maml_ode::diagnostics::halton(i, 2),
            -3.0 + 6.0 * maml_ode::diagnostics::halton(i, 3),
            -3.0 + 6.0 * maml_ode::diagnostics::halton(i, 5),
        ]);
        let g = hinge.grad(&w);
        let fd = finite_diff_grad_of(&hinge, &w, 1e-6).unwrap();
        let scale = g.norm().max(1.0);
        assert!(
            (g - fd).norm() / scale < 1e-5,
            "hinge gradient mismatch at probe {i}"
        );
    }
}

#[test]
fn quadratic_pools_have_position_independent_hessians() {
    let pool = gen_random_quadratic_pool(3, 4, 0.5, 2.0, 17).unwrap();
    let a = initial_point(4, 1);
    let b = initial_point(4, 2);
    for t in pool.tasks() {
        let diff = t.probe_hess(&a) - t.probe_hess(&b);
        assert_eq!(diff.amax(), 0.0, "quadratic Hessians are constant in w");
    }
}

#[test]
fn counterexample_satisfies_certified_curvature_on_dense_grid() {
    let pool = counterexample_pool();
    let (lo, hi) = (
        maml_ode::losses::COUNTEREXAMPLE_MU,
        maml_ode::losses::COUNTEREXAMPLE_L,
    );
    for k in 0..=6000 {
        let w = scalar(-3.0 + 0.001 * k as f64);
        for t in pool.tasks() {
            let h = t.probe_hess(&w)[(0, 0)];
            assert!(h >= lo - 1e-12 && h <= hi + 1e-12);
        }
    }
}

#[test]
fn maml_counter_contract_per_call() {
    let pool = gen_random_quadratic_pool(4, 3, 0.5, 2.0, 5).unwrap();
    let w = initial_point(3, 5);
    let m = pool.num_tasks() as u64;

    maml_ode::meta_grad::maml_grad(&pool, 0.2, &w).unwrap();
    let after_exact = pool.counts();
    assert_eq!(after_exact.hess_evals, m);
    assert_eq!(after_exact.grad_evals, 2 * m);

    maml_ode::meta_grad::fo_maml_grad(&pool, 0.2, &w).unwrap();
    let after_fo = pool.counts();
    assert_eq!(after_fo.hess_evals, m, "first-order path adds no Hessians");
    assert_eq!(after_fo.grad_evals, 4 * m);
}

#[test]
fn converged_meta_run_ends_below_tolerance() {
    let pool = quadratic_pair_pool();
    let config = MamlConfig {
        alpha: 0.25,
        beta: 0.6,
        eps: 1e-7,
        eps0: 0.1,
        max_iters: 10_000,
        max_time: 1e9,
        integrator: Integrator::Euler,
    };
    let traj = run_maml(&pool, &config, &scalar(3.0)).unwrap();
    assert_eq!(
        traj.termination,
        maml_ode::task_model::Termination::Converged
    );
    assert!(traj.last().maml_grad_norm <= config.eps);
}
