//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Run with `cargo test -p maml-ode-cli --test acceptance`
//! (add `-- --nocapture` to see the lines for passing criteria too).

use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use maml_ode::datagen::{
    gen_random_quadratic_pool, gen_regression_suite, initial_point, RegressionSuiteSpec,
};
use maml_ode::diagnostics::{
    alpha_bound_maml_flow, alpha_bound_strong_convexity, check_lyapunov,
    constants_for_trajectories, envelope, estimate_constants, grad_norm_transfer_bwd,
    grad_norm_transfer_fwd, hess_window_check, meta_curvature_scan, time_bound_biphasic_flow,
    time_bound_maml_flow, uniqueness_probe, ProbeStatus, Region, SmoothnessConstants,
    UniquenessOpts,
};
use maml_ode::flow::{bi_maml_field, euler_integrate, maml_ode_field, rk4_integrate, StopRule};
use maml_ode::losses::{counterexample_pool, finite_diff_grad, quadratic_pair_pool};
use maml_ode::meta_grad::{probe_maml_grad, probe_maml_loss};
use maml_ode::optimizers::{run_bi_maml, run_maml};
use maml_ode::task_model::{Integrator, MamlConfig, TaskPool, Trajectory, Vector};

fn report(n: u32, title: &str, ok: bool, details: &str) {
    println!(
        "ACCEPTANCE {n} ({title}): {} | {details}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "ACCEPTANCE {n} ({title}) FAILED: {details}");
}

fn scalar(v: f64) -> Vector {
    Vector::from_element(1, v)
}

// ---------------------------------------------------------------------------
// Shared reference flows (built once; several criteria walk the same window)
// ---------------------------------------------------------------------------

struct FlowFixture {
    traj: Trajectory,
    constants: SmoothnessConstants,
    alpha: f64,
}

fn window_flow(pool: TaskPool, alpha: f64, w0: &Vector) -> FlowFixture {
    let beta = 1e-3f64;
    let window = 10.0f64;
    let steps = (window / beta).round() as usize + 1;
    let traj = {
        let field = maml_ode_field(&pool, alpha).expect("field");
        rk4_integrate(&field, w0, beta, &StopRule::new(0.0, steps, window)).expect("flow")
    };
    let constants = constants_for_trajectories(&pool, &[&traj], 4096).expect("constants");
    FlowFixture {
        traj,
        constants,
        alpha,
    }
}

fn pair_fixture() -> &'static FlowFixture {
    static FIX: OnceLock<FlowFixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let pool = quadratic_pair_pool();
        let region = Region::cube(&Vector::zeros(1), 3.0).unwrap();
        let c0 = estimate_constants(&pool, &region, 256).unwrap();
        let alpha = 0.3f64.min(0.9 * alpha_bound_maml_flow(&c0));
        window_flow(pool, alpha, &scalar(2.0))
    })
}

fn regression_fixture() -> &'static FlowFixture {
    static FIX: OnceLock<FlowFixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let spec = RegressionSuiteSpec {
            m: 10,
            d: 20,
            n: 100,
            noise: 1.0,
            seed: 42,
        };
        let pool = gen_regression_suite(&spec).unwrap();
        let w0 = initial_point(20, 42);
        let region = Region::cube(&w0, 1.0).unwrap();
        let c0 = estimate_constants(&pool, &region, 512).unwrap();
        let alpha = 0.3f64.min(0.9 * alpha_bound_maml_flow(&c0));
        window_flow(pool, alpha, &w0)
    })
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_counterexample_reproduction() {
    let pool = counterexample_pool();
    let start = Instant::now();
    let scan = meta_curvature_scan(&pool, 0.4, -3.0, 3.0, 1e-3).unwrap();
    let elapsed = start.elapsed();
    let ok =
        scan.min_hess < 0.0 && scan.grad_slope_sign_changes >= 3 && elapsed.as_secs_f64() < 1.0;
    report(
        1,
        "counterexample reproduction",
        ok,
        &format!(
            "min F'' = {:.4} at w = {:.4}, {} slope sign changes of F', scan took {:.3}s",
            scan.min_hess,
            scan.argmin_hess,
            scan.grad_slope_sign_changes,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn acceptance_02_gradient_correctness() {
    // Independent oracle: central differences of the meta-loss value. The
    // meta-loss of a quadratic pool is itself quadratic, so the centered
    // stencil is exact there up to roundoff and a coarse step is the
    // accurate one.
    let mut worst_quadratic = 0.0f64;
    for seed in 0..20u64 {
        let m = (seed as usize % 5) + 1;
        let d = (seed as usize % 10) + 1;
        let pool = gen_random_quadratic_pool(m, d, 0.5, 2.0, 1000 + seed).unwrap();
        let alpha = 0.2;
        let probe_box = Region::cube(&Vector::zeros(d), 3.0).unwrap();
        let mut used = 0usize;
        let mut index = 1u64;
        while used < 50 && index < 1000 {
            let w = probe_box.halton_point(index);
            index += 1;
            let g = probe_maml_grad(&pool, alpha, &w).unwrap();
            if g.norm() < 1e-2 {
                continue;
            }
            let fd = finite_diff_grad(
                &|u: &Vector| probe_maml_loss(&pool, alpha, u).unwrap(),
                &w,
                1e-3 * w.amax().max(1.0),
            )
            .unwrap();
            worst_quadratic = worst_quadratic.max((&fd - &g).norm() / g.norm());
            used += 1;
        }
        assert!(used == 50, "pool {seed}: only {used} usable probes");
    }

    let pool = counterexample_pool();
    let mut worst_sin = 0.0f64;
    let mut used = 0usize;
    let mut index = 1u64;
    let probe_box = Region::cube(&Vector::zeros(1), 3.0).unwrap();
    while used < 50 && index < 2000 {
        let w = probe_box.halton_point(index);
        index += 1;
        let g = probe_maml_grad(&pool, 0.4, &w).unwrap();
        if g.norm() < 5e-2 {
            continue;
        }
        let fd = finite_diff_grad(
            &|u: &Vector| probe_maml_loss(&pool, 0.4, u).unwrap(),
            &w,
            1e-5 * w.amax().max(1.0),
        )
        .unwrap();
        worst_sin = worst_sin.max((&fd - &g).norm() / g.norm());
        used += 1;
    }
    assert_eq!(used, 50);

    let ok = worst_quadratic < 1e-6 && worst_sin < 1e-4;
    report(
        2,
        "gradient correctness",
        ok,
        &format!(
            "worst relative error {worst_quadratic:.3e} on 20 quadratic pools (tol 1e-6), \
             {worst_sin:.3e} on the sinusoidal pool (tol 1e-4)"
        ),
    );
}

#[test]
fn acceptance_03_euler_maml_equivalence() {
    let cases: Vec<(TaskPool, f64, f64)> = vec![
        (quadratic_pair_pool(), 0.4, 0.5),
        (
            gen_random_quadratic_pool(3, 4, 0.5, 2.0, 9).unwrap(),
            0.2,
            0.1,
        ),
        (counterexample_pool(), 0.4, 0.05),
    ];
    let mut worst = 0.0f64;
    for (pool, alpha, beta) in &cases {
        for i in 1..=3u64 {
            let w0 = Region::cube(&Vector::from_element(pool.dim(), 0.4), 2.0)
                .unwrap()
                .halton_point(i);
            let fork_a = pool.fork_counters();
            let field = maml_ode_field(&fork_a, *alpha).unwrap();
            let euler =
                euler_integrate(&field, &w0, *beta, &StopRule::new(0.0, 1, f64::MAX)).unwrap();
            let fork_b = pool.fork_counters();
            let config = MamlConfig {
                alpha: *alpha,
                beta: *beta,
                eps: 0.0,
                eps0: 0.1,
                max_iters: 1,
                max_time: f64::MAX,
                integrator: Integrator::Euler,
            };
            let discrete = run_maml(&fork_b, &config, &w0).unwrap();
            let rel = (&euler.samples[1].w - &discrete.samples[1].w).norm()
                / (1.0 + discrete.samples[1].w.norm());
            worst = worst.max(rel);
        }
    }
    report(
        3,
        "Euler/meta-step equivalence",
        worst <= 1e-15,
        &format!(
            "max relative one-step difference {worst:.3e} over {} cases",
            cases.len() * 3
        ),
    );
}

#[test]
fn acceptance_04_lyapunov_inequality() {
    let mut details = String::new();
    let mut ok = true;
    for (label, fix) in [
        ("pair", pair_fixture()),
        ("regression", regression_fixture()),
    ] {
        let rep = check_lyapunov(&fix.traj, &fix.constants, fix.alpha, 0.0).unwrap();
        let frac = rep.violations as f64 / rep.checked as f64;
        let clean = frac < 0.01 && rep.max_scaled_margin <= 1e-5;
        ok &= clean;
        details.push_str(&format!(
            "[{label}: alpha = {:.4}, {}/{} violations ({:.2}%), worst scaled margin {:.3e}] ",
            fix.alpha,
            rep.violations,
            rep.checked,
            100.0 * frac,
            rep.max_scaled_margin
        ));
    }
    report(4, "descent inequality along the flow", ok, details.trim());
}

#[test]
fn acceptance_05_envelope() {
    let mut details = String::new();
    let mut ok = true;
    for (label, fix) in [
        ("pair", pair_fixture()),
        ("regression", regression_fixture()),
    ] {
        let c = &fix.constants;
        let y0 = fix.traj.samples[0].expected_grad_norm.powi(2);
        let env = envelope(c, fix.alpha, y0).unwrap();
        let mut violations = 0usize;
        for s in &fix.traj.samples {
            let e = s.expected_grad_norm * s.expected_grad_norm;
            if e > env.eval(s.t) * (1.0 + 1e-6) {
                violations += 1;
            }
        }
        let limit = c.sigma * c.sigma / c.mu;
        let clean = violations == 0 && env.asymptote() < limit;
        ok &= clean;
        details.push_str(&format!(
            "[{label}: {violations} violations over {} samples, asymptote {:.4} < sigma^2/mu {:.4}] ",
            fix.traj.samples.len(),
            env.asymptote(),
            limit
        ));
    }
    report(5, "gradient-norm envelope", ok, details.trim());
}

#[test]
fn acceptance_06_norm_transfers() {
    let mut details = String::new();
    let mut ok = true;
    for (label, fix) in [
        ("pair", pair_fixture()),
        ("regression", regression_fixture()),
    ] {
        let c = &fix.constants;
        assert!(
            fix.alpha < 1.0 / (4.0 * c.l),
            "{label}: fixture alpha must sit inside the backward-transfer window"
        );
        let mut fwd_violations = 0usize;
        let mut bwd_violations = 0usize;
        for s in &fix.traj.samples {
            if s.maml_grad_norm > grad_norm_transfer_fwd(s.expected_grad_norm, c, fix.alpha) + 1e-12
            {
                fwd_violations += 1;
            }
            let back = grad_norm_transfer_bwd(s.maml_grad_norm, c, fix.alpha).unwrap();
            if s.expected_grad_norm > back + 1e-12 {
                bwd_violations += 1;
            }
        }
        ok &= fwd_violations == 0 && bwd_violations == 0;
        details.push_str(&format!(
            "[{label}: {fwd_violations} forward and {bwd_violations} backward violations over {} samples] ",
            fix.traj.samples.len()
        ));
    }
    report(6, "norm transfer bounds", ok, details.trim());
}

#[test]
fn acceptance_07_strong_convexity_window() {
    let pool = quadratic_pair_pool();
    let region = Region::cube(&Vector::zeros(1), 3.0).unwrap();
    let c = estimate_constants(&pool, &region, 256).unwrap();
    let k = (1.0 + (c.l / c.mu).sqrt()) * c.sigma + 0.01 * (1.0 + c.sigma);
    let alpha = 0.1;
    assert!(alpha <= alpha_bound_strong_convexity(&c, k));
    let rep = hess_window_check(&pool, alpha, &c, k, 100).unwrap();
    let lo = c.mu / 8.0 - 1e-6;
    let hi = 9.0 * c.l / 8.0 + 1e-6;
    let ok = rep.status == ProbeStatus::Pass
        && rep.probes_used >= 100
        && rep.min_eig >= lo
        && rep.max_eig <= hi;
    report(
        7,
        "curvature window",
        ok,
        &format!(
            "{} probes with eigenvalues in [{:.6}, {:.6}] against [{lo:.6}, {hi:.6}]",
            rep.probes_used, rep.min_eig, rep.max_eig
        ),
    );
}

#[test]
fn acceptance_08_unique_global_minimum() {
    let opts = UniquenessOpts {
        beta: 1e-2,
        eps: 1e-8,
        max_time: 2000.0,
        constant_probes: 2048,
    };
    let mut details = String::new();
    let mut ok = true;
    let pair = quadratic_pair_pool();
    let five = gen_random_quadratic_pool(5, 5, 0.5, 2.0, 7).unwrap();
    for (label, pool, alpha) in [("pair", &pair, 0.1), ("random5", &five, 0.1)] {
        let start_box = Region::cube(&Vector::zeros(pool.dim()), 10.0).unwrap();
        let rep = uniqueness_probe(pool, alpha, 20, &start_box, 1e-4, &opts).unwrap();
        let clean = rep.status == ProbeStatus::Pass
            && alpha <= rep.alpha_bound
            && rep.max_pairwise_dist < 1e-4
            && rep.terminals_in_sublevel;
        ok &= clean;
        details.push_str(&format!(
            "[{label}: {}/{} converged, max pairwise {:.3e}, in sublevel set: {}, alpha {alpha} <= bound {:.4}] ",
            rep.n_converged,
            rep.n_starts,
            rep.max_pairwise_dist,
            rep.terminals_in_sublevel,
            rep.alpha_bound
        ));
    }
    report(8, "unique global minimum", ok, details.trim());
}

#[test]
fn acceptance_09_time_bounds() {
    let pool = quadratic_pair_pool();
    let region = Region::cube(&Vector::zeros(1), 3.0).unwrap();
    let c = estimate_constants(&pool, &region, 256).unwrap();
    let (alpha, eps, eps0) = (0.1, 0.01, 0.1);
    let w0 = scalar(2.0);
    let gradf0 = pool.probe_expected_grad(&w0).unwrap().norm();

    // Longhand recomputation of the bound values, kept independent of the
    // library path.
    let zeta: f64 = 1.0 - 1.25 * alpha * (alpha * alpha + 2.0 * alpha + 2.0);
    let iota = zeta - 0.5;
    let expect_maml = 2.0 * ((4.0f64 - 0.5) / iota).ln() + 16.0 * (14.0f64 / 0.04).ln();
    let expect_bi = 2.0 * 400f64.ln() + 16.0 * (5.9f64 / 0.04).ln();

    let bound_maml = time_bound_maml_flow(&c, alpha, gradf0, eps)
        .unwrap()
        .expect("bound applicable");
    let bound_bi = time_bound_biphasic_flow(&c, alpha, eps0, gradf0, eps).unwrap();
    assert!((bound_maml - expect_maml).abs() < 1e-9 * expect_maml);
    assert!((bound_bi - expect_bi).abs() < 1e-9 * expect_bi);
    assert!(
        (bound_maml - 99.227).abs() < 0.01,
        "bound drifted: {bound_maml}"
    );
    assert!(
        (bound_bi - 91.884).abs() < 0.01,
        "bound drifted: {bound_bi}"
    );

    let field = maml_ode_field(&pool, alpha).unwrap();
    let traj = rk4_integrate(&field, &w0, 1e-3, &StopRule::new(eps, 200_000, 120.0)).unwrap();
    let observed_maml = traj
        .first_time_maml_grad_below(eps)
        .expect("flow converged");

    let bi_pool = pool.fork_counters();
    let bi_field = bi_maml_field(&bi_pool, alpha, eps0).unwrap();
    let bi_traj = rk4_integrate(&bi_field, &w0, 1e-3, &StopRule::new(eps, 200_000, 120.0)).unwrap();
    let observed_bi = bi_traj
        .first_time_maml_grad_below(eps)
        .expect("biphasic flow converged");

    let ok = observed_maml <= bound_maml && observed_bi <= bound_bi;
    report(
        9,
        "time bounds (one-sided)",
        ok,
        &format!(
            "meta flow {observed_maml:.3} <= {bound_maml:.3}; biphasic {observed_bi:.3} <= {bound_bi:.3} (switch at {:?})",
            bi_field.switch_time()
        ),
    );
}

#[test]
fn acceptance_10_biphasic_efficiency() {
    let spec = RegressionSuiteSpec {
        m: 10,
        d: 20,
        n: 100,
        noise: 1.0,
        seed: 42,
    };
    let pool = gen_regression_suite(&spec).unwrap();
    let w0 = initial_point(20, 42);
    let config = MamlConfig {
        alpha: 0.3,
        beta: 0.05,
        eps: 1e-12,
        eps0: 1.0,
        max_iters: 50,
        max_time: 1e9,
        integrator: Integrator::Euler,
    };
    let m = pool.num_tasks() as u64;

    let maml_pool = pool.fork_counters();
    let maml_traj = run_maml(&maml_pool, &config, &w0).unwrap();
    let bi_pool = pool.fork_counters();
    let bi_traj = run_bi_maml(&bi_pool, &config, &w0).unwrap();

    let maml_50 = &maml_traj.samples[50];
    let bi_25 = &bi_traj.samples[25];
    let bi_50 = &bi_traj.samples[50];

    let ok = bi_25.maml_grad_norm < maml_50.maml_grad_norm
        && maml_50.hess_evals_cum == 50 * m
        && bi_50.hess_evals_cum < maml_50.hess_evals_cum;
    // Wall time is machine-dependent: reported, not asserted.
    let wall_ratio = bi_50.wall_ns as f64 / maml_50.wall_ns as f64;
    report(
        10,
        "biphasic efficiency",
        ok,
        &format!(
            "biphasic ||gradF||@25 = {:.4} < meta ||gradF||@50 = {:.4}; Hessians {} < {} (= 50M); wall ratio {:.2} (reported only)",
            bi_25.maml_grad_norm,
            maml_50.maml_grad_norm,
            bi_50.hess_evals_cum,
            maml_50.hess_evals_cum,
            wall_ratio
        ),
    );
}

#[test]
fn acceptance_11_hypothesis_violation_handling() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("counterexample.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &config_path,
        r#"{
  "pool": {"kind": "counterexample"},
  "maml": {"alpha": 0.4, "beta": 0.1, "eps": 0.0001, "eps0": 0.1},
  "w0": [2.0]
}"#,
    )
    .unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_maml-ode"))
        .args([
            "verify",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .expect("binary runs");
    let report_text =
        std::fs::read_to_string(out_dir.join("verify_report.json")).expect("report written");
    let entries: Vec<serde_json::Value> = serde_json::from_str(&report_text).unwrap();
    let window_status = entries
        .iter()
        .find(|e| e["check"] == "strong_convexity_window")
        .map(|e| e["status"].as_str().unwrap().to_string())
        .expect("window check present");
    let ok = output.status.code() == Some(0) && window_status == "hypothesis-violated";
    report(
        11,
        "hypothesis-violation handling",
        ok,
        &format!(
            "exit code {:?}, strong_convexity_window status `{window_status}`",
            output.status.code()
        ),
    );
}
