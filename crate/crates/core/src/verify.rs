//! The verification suite: one named check per convergence result, each
//! reporting pass, fail, hypothesis-violated, or inconclusive with a margin.
//!
//! A check only ever reports `Fail` when its hypotheses hold; outside them it
//! reports `HypothesisViolated` (the results say nothing there, and the
//! non-convex example pool must not be scored as a failure).

use serde::Serialize;

use crate::diagnostics::{
    self, alpha_bound_strong_convexity, check_lyapunov, descent_rate, envelope,
    estimate_constants_raw, grad_norm_transfer_bwd, grad_norm_transfer_fwd, hess_window_check,
    meta_curvature_scan, region_membership, time_bound_biphasic_flow, time_bound_maml_flow,
    uniqueness_probe, ProbeStatus, Region, SmoothnessConstants, UniquenessOpts,
};
use crate::error::{Error, Result};
use crate::flow::{bi_maml_field, euler_integrate, maml_ode_field, rk4_integrate, StopRule};
use crate::losses::finite_diff_grad;
use crate::meta_grad::{probe_maml_grad, probe_maml_loss};
use crate::optimizers::{run_bi_maml, run_maml};
use crate::task_model::{Integrator, MamlConfig, Phase, TaskPool, Termination, Trajectory, Vector};

/// Status of one check.
pub type CheckStatus = ProbeStatus;

/// Outcome record for one check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub status: CheckStatus,
    /// Positive slack when the check holds; negative when violated; NaN when
    /// not evaluated.
    pub margin: f64,
    /// The hypothesis the result needs, and whether it held here.
    pub hypothesis: String,
    pub details: String,
}

impl CheckResult {
    fn new(
        check: &str,
        status: CheckStatus,
        margin: f64,
        hypothesis: String,
        details: String,
    ) -> Self {
        CheckResult {
            check: check.to_string(),
            status,
            margin,
            hypothesis,
            details,
        }
    }
}

/// Every check the suite knows, in report order.
pub const CHECK_NAMES: [&str; 14] = [
    "maml_grad_matches_loss_fd",
    "euler_step_equivalence",
    "biphasic_latch_discrete",
    "biphasic_latch_flow",
    "lyapunov_descent",
    "gradient_envelope",
    "norm_transfer_forward",
    "norm_transfer_backward",
    "strong_convexity_window",
    "region_inclusions",
    "unique_global_minimum",
    "time_bound_maml_flow",
    "time_bound_biphasic_flow",
    "nonconvex_counterexample",
];

/// Checks run when no explicit list is given. The non-convexity scan is
/// opt-in: it asserts that the pool's meta-loss *is* non-convex, which only
/// holds for pools built to show that.
pub const DEFAULT_CHECK_NAMES: [&str; 13] = [
    "maml_grad_matches_loss_fd",
    "euler_step_equivalence",
    "biphasic_latch_discrete",
    "biphasic_latch_flow",
    "lyapunov_descent",
    "gradient_envelope",
    "norm_transfer_forward",
    "norm_transfer_backward",
    "strong_convexity_window",
    "region_inclusions",
    "unique_global_minimum",
    "time_bound_maml_flow",
    "time_bound_biphasic_flow",
];

/// Checks that need certified constants and a reference flow trajectory.
const THEORY_CHECKS: [&str; 9] = [
    "lyapunov_descent",
    "gradient_envelope",
    "norm_transfer_forward",
    "norm_transfer_backward",
    "strong_convexity_window",
    "region_inclusions",
    "unique_global_minimum",
    "time_bound_maml_flow",
    "time_bound_biphasic_flow",
];

/// Inputs of a verification run.
#[derive(Debug, Clone)]
pub struct VerifySpec {
    pub alpha: f64,
    /// Discrete step for the mechanism checks.
    pub beta: f64,
    /// Stationarity tolerance on `‖∇F‖`.
    pub eps: f64,
    /// Phase-switch tolerance on `‖∇f‖`.
    pub eps0: f64,
    pub w0: Vector,
    /// Subset of [`CHECK_NAMES`] to run; empty runs everything.
    pub checks: Vec<String>,
    /// RK4 step for the reference flows.
    pub flow_beta: f64,
    /// Length of the descent-check window.
    pub flow_window: f64,
    /// Probe count for constant estimation.
    pub probes: usize,
}

impl VerifySpec {
    pub fn new(alpha: f64, beta: f64, eps: f64, eps0: f64, w0: Vector) -> Self {
        VerifySpec {
            alpha,
            beta,
            eps,
            eps0,
            w0,
            checks: Vec::new(),
            flow_beta: 1e-3,
            flow_window: 10.0,
            probes: 4096,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eps", self.eps),
            ("eps0", self.eps0),
            ("flow_beta", self.flow_beta),
            ("flow_window", self.flow_window),
        ] {
            // Alpha may be zero (the meta objects degenerate gracefully);
            // steps and tolerances must be strictly positive.
            let in_range = if name == "alpha" { v >= 0.0 } else { v > 0.0 };
            if !v.is_finite() || !in_range {
                return Err(Error::InvalidArgument {
                    name: name.to_string(),
                    reason: format!("must be finite and positive (got {v})"),
                });
            }
        }
        for c in &self.checks {
            if !CHECK_NAMES.contains(&c.as_str()) {
                return Err(Error::InvalidArgument {
                    name: "checks".to_string(),
                    reason: format!("unknown check `{c}`"),
                });
            }
        }
        Ok(())
    }
}

struct TheoryCtx {
    traj: Trajectory,
    constants: SmoothnessConstants,
}

/// True when some check whose hypotheses held reported a failure.
pub fn any_true_failure(results: &[CheckResult]) -> bool {
    results.iter().any(|r| r.status == CheckStatus::Fail)
}

/// Runs the requested checks (all of them when the list is empty) against the
/// pool.
pub fn run_checks(pool: &TaskPool, spec: &VerifySpec) -> Result<Vec<CheckResult>> {
    spec.validate()?;
    pool.check_dim(&spec.w0)?;
    let requested: Vec<&str> = if spec.checks.is_empty() {
        DEFAULT_CHECK_NAMES.to_vec()
    } else {
        CHECK_NAMES
            .iter()
            .copied()
            .filter(|n| spec.checks.iter().any(|c| c == n))
            .collect()
    };

    let needs_theory = requested.iter().any(|n| THEORY_CHECKS.contains(n));
    let ctx = if needs_theory {
        let quick_region = Region::cube(&spec.w0, 2.0 + spec.w0.amax())?;
        let quick = estimate_constants_raw(pool, &quick_region, spec.probes.min(2048))?;
        if quick.mu > 1e-9 {
            let field = maml_ode_field(pool, spec.alpha)?;
            let steps = (spec.flow_window / spec.flow_beta).round() as usize + 1;
            let traj = rk4_integrate(
                &field,
                &spec.w0,
                spec.flow_beta,
                &StopRule::new(0.0, steps, spec.flow_window),
            )?;
            let constants = diagnostics::constants_for_trajectories(pool, &[&traj], spec.probes)?;
            Some(TheoryCtx { traj, constants })
        } else {
            // No strong convexity: every theorem check is outside its
            // hypotheses; keep the raw constants for reporting.
            Some(TheoryCtx {
                traj: empty_window(pool, spec)?,
                constants: quick,
            })
        }
    } else {
        None
    };

    let mut results = Vec::with_capacity(requested.len());
    for name in requested {
        let result = match name {
            "maml_grad_matches_loss_fd" => check_grad_fd(pool, spec),
            "euler_step_equivalence" => check_euler_equivalence(pool, spec),
            "biphasic_latch_discrete" => check_latch_discrete(pool, spec),
            "biphasic_latch_flow" => check_latch_flow(pool, spec),
            "lyapunov_descent" => check_lyapunov_descent(spec, ctx.as_ref().unwrap()),
            "gradient_envelope" => check_envelope(spec, ctx.as_ref().unwrap()),
            "norm_transfer_forward" => check_transfer_fwd(spec, ctx.as_ref().unwrap()),
            "norm_transfer_backward" => check_transfer_bwd(spec, ctx.as_ref().unwrap()),
            "strong_convexity_window" => check_window(pool, spec, ctx.as_ref().unwrap()),
            "region_inclusions" => check_inclusions(pool, spec, ctx.as_ref().unwrap()),
            "unique_global_minimum" => check_uniqueness(pool, spec, ctx.as_ref().unwrap()),
            "time_bound_maml_flow" => check_time_bound_maml(pool, spec, ctx.as_ref().unwrap()),
            "time_bound_biphasic_flow" => {
                check_time_bound_biphasic(pool, spec, ctx.as_ref().unwrap())
            }
            "nonconvex_counterexample" => check_nonconvexity(pool, spec),
            other => unreachable!("unknown check {other}"),
        };
        results.push(result?);
    }
    Ok(results)
}

/// A minimal single-sample trajectory for the degenerate not-strongly-convex
/// path (theorem checks short-circuit before using it in anger).
fn empty_window(pool: &TaskPool, spec: &VerifySpec) -> Result<Trajectory> {
    let field = maml_ode_field(pool, spec.alpha)?;
    euler_integrate(
        &field,
        &spec.w0,
        spec.flow_beta,
        &StopRule::new(0.0, 0, f64::MAX),
    )
}

fn hypothesis_mu(c: &SmoothnessConstants) -> Option<String> {
    if c.mu <= 0.0 {
        Some(format!(
            "tasks strongly convex on the region: violated (mu = {})",
            c.mu
        ))
    } else {
        None
    }
}

// -- mechanism checks -------------------------------------------------------

fn check_grad_fd(pool: &TaskPool, spec: &VerifySpec) -> Result<CheckResult> {
    let name = "maml_grad_matches_loss_fd";
    let all_quadratic = pool
        .tasks()
        .iter()
        .all(|t| t.kernel().as_quadratic().is_some());
    let tol = if all_quadratic { 1e-6 } else { 1e-4 };
    let probe_box = Region::cube(&Vector::zeros(pool.dim()), 3.0)?;
    let mut max_rel = 0.0f64;
    let mut used = 0usize;
    let mut index = 1u64;
    while used < 20 && index < 500 {
        let w = probe_box.halton_point(index);
        index += 1;
        let g = probe_maml_grad(pool, spec.alpha, &w)?;
        let scale = g.norm();
        if scale < 1e-2 {
            continue;
        }
        let fd = finite_diff_grad(
            &|u: &Vector| probe_maml_loss(pool, spec.alpha, u).unwrap_or(f64::NAN),
            &w,
            1e-5 * w.amax().max(1.0),
        )?;
        max_rel = max_rel.max((&fd - &g).norm() / scale);
        used += 1;
    }
    let status = if used == 0 {
        CheckStatus::Inconclusive
    } else if max_rel <= tol {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        tol - max_rel,
        "meta-gradient is the derivative of the meta-loss (chain rule); holds unconditionally"
            .to_string(),
        format!("max relative error {max_rel:.3e} over {used} probes, tol {tol:.0e}"),
    ))
}

fn check_euler_equivalence(pool: &TaskPool, spec: &VerifySpec) -> Result<CheckResult> {
    let name = "euler_step_equivalence";
    let probe_box = Region::cube(&Vector::from_element(pool.dim(), 0.3), 2.0)?;
    let mut worst = 0.0f64;
    for i in 1..=5u64 {
        let w0 = probe_box.halton_point(i);
        let pool_a = pool.fork_counters();
        let field = maml_ode_field(&pool_a, spec.alpha)?;
        let euler = euler_integrate(&field, &w0, spec.beta, &StopRule::new(0.0, 1, f64::MAX))?;
        let pool_b = pool.fork_counters();
        let config = MamlConfig {
            alpha: spec.alpha,
            beta: spec.beta,
            eps: 0.0,
            eps0: spec.eps0,
            max_iters: 1,
            max_time: f64::MAX,
            integrator: Integrator::Euler,
        };
        let discrete = run_maml(&pool_b, &config, &w0)?;
        if euler.samples.len() < 2 || discrete.samples.len() < 2 {
            // Probe sat exactly on a critical point; nothing to compare.
            continue;
        }
        let diff = (&euler.samples[1].w - &discrete.samples[1].w).norm();
        let rel = diff / (1.0 + discrete.samples[1].w.norm());
        worst = worst.max(rel);
    }
    let tol = 1e-15;
    let status = if worst <= tol {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        tol - worst,
        "one forward-Euler step of the meta-loss flow is one discrete meta step; definitional"
            .to_string(),
        format!("max relative step difference {worst:.3e}"),
    ))
}

fn check_latch_discrete(pool: &TaskPool, spec: &VerifySpec) -> Result<CheckResult> {
    let name = "biphasic_latch_discrete";
    let local = pool.fork_counters();
    let config = MamlConfig {
        alpha: spec.alpha,
        beta: spec.beta,
        eps: spec.eps,
        eps0: spec.eps0,
        max_iters: 100_000,
        max_time: 1e9,
        integrator: Integrator::Euler,
    };
    let traj = run_bi_maml(&local, &config, &spec.w0)?;
    let m = local.num_tasks() as u64;
    let mut seen_maml = false;
    let mut ok = true;
    let mut detail = String::new();
    let mut last_maml_cum: Option<u64> = None;
    for s in &traj.samples {
        match s.phase {
            Phase::Maml => {
                if let Some(prev) = last_maml_cum {
                    if s.hess_evals_cum != prev + m {
                        ok = false;
                        detail = format!(
                            "meta-phase Hessian count stepped by {} instead of {m} at iter {}",
                            s.hess_evals_cum - prev,
                            s.iter
                        );
                    }
                }
                last_maml_cum = Some(s.hess_evals_cum);
                seen_maml = true;
            }
            Phase::ExpectedLoss => {
                if seen_maml {
                    ok = false;
                    detail = format!("phase fell back to the expected loss at iter {}", s.iter);
                }
                if s.hess_evals_cum != 0 {
                    ok = false;
                    detail = format!("phase-one sample at iter {} carries Hessian work", s.iter);
                }
            }
        }
    }
    if traj.termination == Termination::Diverged {
        ok = false;
        detail = "run diverged".to_string();
    }
    let status = if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        if ok { 0.0 } else { -1.0 },
        "one-way phase latch with Hessian-free first phase; definitional".to_string(),
        if ok {
            format!(
                "{} samples, switch at iter {:?}, termination {}",
                traj.samples.len(),
                traj.samples.iter().position(|s| s.phase == Phase::Maml),
                traj.termination.as_str()
            )
        } else {
            detail
        },
    ))
}

fn check_latch_flow(pool: &TaskPool, spec: &VerifySpec) -> Result<CheckResult> {
    let name = "biphasic_latch_flow";
    let local = pool.fork_counters();
    let field = bi_maml_field(&local, spec.alpha, spec.eps0)?;
    let beta = spec.flow_beta.max(1e-3);
    let traj = rk4_integrate(
        &field,
        &spec.w0,
        beta,
        &StopRule::new(spec.eps, 2_000_000, 100.0),
    )?;
    let mut ok = traj.termination != Termination::Diverged;
    let mut detail = String::new();
    let mut seen_maml = false;
    for s in &traj.samples {
        match s.phase {
            Phase::Maml => seen_maml = true,
            Phase::ExpectedLoss => {
                if seen_maml {
                    ok = false;
                    detail = format!("flow phase fell back at t = {}", s.t);
                }
                if s.hess_evals_cum != 0 {
                    ok = false;
                    detail = format!("Hessian evaluated before the latch at t = {}", s.t);
                }
            }
        }
    }
    let status = if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        if ok { 0.0 } else { -1.0 },
        "two-stage flow latches once and is Hessian-free before the latch; definitional"
            .to_string(),
        if ok {
            format!(
                "switch time {:?}, termination {}",
                field.switch_time(),
                traj.termination.as_str()
            )
        } else {
            detail
        },
    ))
}

// -- theorem checks ---------------------------------------------------------

fn check_lyapunov_descent(spec: &VerifySpec, ctx: &TheoryCtx) -> Result<CheckResult> {
    let name = "lyapunov_descent";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let half_l = 1.0 / (2.0 * c.l);
    if spec.alpha >= half_l {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            format!("alpha < 1/(2L): violated ({} >= {half_l})", spec.alpha),
            String::new(),
        ));
    }
    let tol = 1e-6;
    let report = check_lyapunov(&ctx.traj, c, spec.alpha, tol)?;
    let status = if report.violations == 0 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        tol - report.max_scaled_margin,
        format!("alpha < 1/(2L) = {half_l}: holds (alpha = {})", spec.alpha),
        format!(
            "{} of {} samples violate; worst scaled margin {:.3e}",
            report.violations, report.checked, report.max_scaled_margin
        ),
    ))
}

fn check_envelope(spec: &VerifySpec, ctx: &TheoryCtx) -> Result<CheckResult> {
    let name = "gradient_envelope";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let zeta = descent_rate(c, spec.alpha);
    let iota = zeta - 0.5 * c.mu;
    if spec.alpha >= 1.0 / (2.0 * c.l) || iota <= 0.0 {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            format!(
                "alpha < 1/(2L) and descent rate zeta > mu/2: violated (zeta = {zeta}, iota = {iota})"
            ),
            String::new(),
        ));
    }
    let y0 = ctx.traj.samples[0].expected_grad_norm.powi(2);
    let env = envelope(c, spec.alpha, y0)?;
    let tol = 1e-6;
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    for s in &ctx.traj.samples {
        let e = s.expected_grad_norm * s.expected_grad_norm;
        let y = env.eval(s.t);
        let slack = (y * (1.0 + tol) - e) / (1.0 + e);
        worst = worst.min(slack);
        if e > y * (1.0 + tol) {
            violations += 1;
        }
    }
    let asymptote_ok = env.asymptote() < c.sigma * c.sigma / c.mu || c.sigma == 0.0;
    let status = if violations == 0 && asymptote_ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        worst,
        format!("zeta = {zeta} > mu/2 = {}: holds", 0.5 * c.mu),
        format!(
            "{} envelope violations over {} samples; asymptote {:.6} vs sigma^2/mu {:.6}",
            violations,
            ctx.traj.samples.len(),
            env.asymptote(),
            c.sigma * c.sigma / c.mu
        ),
    ))
}

fn check_transfer_fwd(spec: &VerifySpec, ctx: &TheoryCtx) -> Result<CheckResult> {
    let name = "norm_transfer_forward";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    for s in &ctx.traj.samples {
        let bound = grad_norm_transfer_fwd(s.expected_grad_norm, c, spec.alpha);
        let slack = (bound - s.maml_grad_norm) / (1.0 + s.maml_grad_norm);
        worst = worst.min(slack);
        if s.maml_grad_norm > bound * (1.0 + 1e-9) + 1e-12 {
            violations += 1;
        }
    }
    let status = if violations == 0 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        worst,
        "smoothness and bounded gradient variance on the certified region; holds for any alpha"
            .to_string(),
        format!(
            "{} violations over {} samples; worst scaled slack {:.3e}",
            violations,
            ctx.traj.samples.len(),
            worst
        ),
    ))
}

fn check_transfer_bwd(spec: &VerifySpec, ctx: &TheoryCtx) -> Result<CheckResult> {
    let name = "norm_transfer_backward";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let quarter = 1.0 / (4.0 * c.l);
    if spec.alpha >= quarter {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            format!("alpha < 1/(4L): violated ({} >= {quarter})", spec.alpha),
            String::new(),
        ));
    }
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    for s in &ctx.traj.samples {
        let bound = grad_norm_transfer_bwd(s.maml_grad_norm, c, spec.alpha)?;
        let slack = (bound - s.expected_grad_norm) / (1.0 + s.expected_grad_norm);
        worst = worst.min(slack);
        if s.expected_grad_norm > bound * (1.0 + 1e-9) + 1e-12 {
            violations += 1;
        }
    }
    let status = if violations == 0 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        worst,
        format!("alpha < 1/(4L) = {quarter}: holds (alpha = {})", spec.alpha),
        format!(
            "{} violations over {} samples; worst scaled slack {:.3e}",
            violations,
            ctx.traj.samples.len(),
            worst
        ),
    ))
}

fn reference_k(c: &SmoothnessConstants) -> f64 {
    (1.0 + (c.l / c.mu).sqrt()) * c.sigma + 0.01 * (1.0 + c.sigma)
}

fn check_window(pool: &TaskPool, spec: &VerifySpec, ctx: &TheoryCtx) -> Result<CheckResult> {
    let name = "strong_convexity_window";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let k = reference_k(c);
    let report = hess_window_check(pool, spec.alpha, c, k, 100)?;
    let margin = (report.min_eig - report.window_lo).min(report.window_hi - report.max_eig);
    let bound = alpha_bound_strong_convexity(c, k);
    Ok(CheckResult::new(
        name,
        report.status,
        margin,
        format!(
            "alpha <= min{{1/(2L), mu/(8 kappa (2K+sigma))}} = {bound}: {} (alpha = {})",
            if spec.alpha <= bound {
                "holds"
            } else {
                "violated"
            },
            spec.alpha
        ),
        format!(
            "eigenvalues in [{:.6}, {:.6}] vs window [{:.6}, {:.6}] on {} probes (K = {k:.4})",
            report.min_eig, report.max_eig, report.window_lo, report.window_hi, report.probes_used
        ),
    ))
}

fn check_inclusions(pool: &TaskPool, spec: &VerifySpec, ctx: &TheoryCtx) -> Result<CheckResult> {
    let name = "region_inclusions";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let quarter = 1.0 / (4.0 * c.l);
    if spec.alpha >= quarter {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            format!("alpha < 1/(4L): violated ({} >= {quarter})", spec.alpha),
            String::new(),
        ));
    }
    if c.f_star.is_none() {
        return Ok(CheckResult::new(
            name,
            CheckStatus::Inconclusive,
            f64::NAN,
            "needs the minimum of the expected loss".to_string(),
            "f_star unavailable".to_string(),
        ));
    }
    let k = reference_k(c);
    let u_to_v_level = (2.0 * k + c.sigma).powi(2) / (2.0 * c.mu);
    let v_to_u_level = (k - c.sigma).powi(2) / (2.0 * c.l);
    // Sample a box twice as wide as the certified region.
    let widths: Vec<f64> = (0..c.region.dim())
        .map(|i| (c.region.hi[i] - c.region.lo[i]).max(1.0))
        .collect();
    let lo = Vector::from_fn(c.region.dim(), |i, _| c.region.lo[i] - widths[i] * 0.5);
    let hi = Vector::from_fn(c.region.dim(), |i, _| c.region.hi[i] + widths[i] * 0.5);
    let sample_box = Region::new(lo, hi)?;
    let mut u_hits = 0usize;
    let mut v_hits = 0usize;
    let mut violations = 0usize;
    for i in 1..=1000u64 {
        let w = sample_box.halton_point(i);
        let m_u = region_membership(pool, c, spec.alpha, &w, k, u_to_v_level)?;
        if m_u.in_u {
            u_hits += 1;
            if !m_u.in_v {
                violations += 1;
            }
        }
        let m_v = region_membership(pool, c, spec.alpha, &w, k, v_to_u_level)?;
        if m_v.in_v {
            v_hits += 1;
            if !m_v.in_u {
                violations += 1;
            }
        }
    }
    let status = if u_hits == 0 && v_hits == 0 {
        CheckStatus::Inconclusive
    } else if violations == 0 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        if violations == 0 { 0.0 } else { -(violations as f64) },
        format!("alpha < 1/(4L) = {quarter}: holds (alpha = {})", spec.alpha),
        format!(
            "{violations} inclusion violations; {u_hits} samples in the stationarity region, {v_hits} in the sublevel set (K = {k:.4})"
        ),
    ))
}

fn check_uniqueness(pool: &TaskPool, spec: &VerifySpec, ctx: &TheoryCtx) -> Result<CheckResult> {
    let name = "unique_global_minimum";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let start_box = Region::cube(&spec.w0, 5.0)?;
    let tol = 1e-4;
    let opts = UniquenessOpts {
        beta: spec.flow_beta.max(1e-2),
        eps: 1e-8,
        max_time: 2000.0,
        constant_probes: spec.probes,
    };
    let report = uniqueness_probe(pool, spec.alpha, 12, &start_box, tol, &opts)?;
    Ok(CheckResult::new(
        name,
        report.status,
        tol - report.max_pairwise_dist,
        format!(
            "alpha <= min{{1/(4L), mu/(8 kappa (2K+sigma))}} = {}: {} (alpha = {})",
            report.alpha_bound,
            if spec.alpha <= report.alpha_bound {
                "holds"
            } else {
                "violated"
            },
            spec.alpha
        ),
        format!(
            "{}/{} runs converged; max pairwise distance {:.3e}; terminals in sublevel set: {}",
            report.n_converged,
            report.n_starts,
            report.max_pairwise_dist,
            report.terminals_in_sublevel
        ),
    ))
}

fn check_time_bound_maml(
    pool: &TaskPool,
    spec: &VerifySpec,
    ctx: &TheoryCtx,
) -> Result<CheckResult> {
    let name = "time_bound_maml_flow";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let gradf0 = ctx.traj.samples[0].expected_grad_norm;
    let bound = match time_bound_maml_flow(c, spec.alpha, gradf0, spec.eps)? {
        Some(b) => b,
        None => {
            return Ok(CheckResult::new(
                name,
                CheckStatus::Inconclusive,
                f64::NAN,
                "needs sigma > 0 and descent rate past mu/2".to_string(),
                "bound not applicable for these constants".to_string(),
            ));
        }
    };
    let observed = match ctx.traj.first_time_maml_grad_below(spec.eps) {
        Some(t) => Some(t),
        None => {
            let field = maml_ode_field(pool, spec.alpha)?;
            let budget = bound * 1.05;
            let steps = (budget / spec.flow_beta).ceil() as usize + 1;
            let traj = rk4_integrate(
                &field,
                &spec.w0,
                spec.flow_beta,
                &StopRule::new(spec.eps, steps, budget),
            )?;
            traj.first_time_maml_grad_below(spec.eps)
        }
    };
    match observed {
        Some(t) => {
            let status = if t <= bound {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            Ok(CheckResult::new(
                name,
                status,
                bound - t,
                format!(
                    "descent rate past mu/2 (iota > 0): holds at alpha = {}",
                    spec.alpha
                ),
                format!("observed time {t:.4} vs bound {bound:.4}"),
            ))
        }
        None => Ok(CheckResult::new(
            name,
            CheckStatus::Fail,
            f64::NEG_INFINITY,
            "descent rate past mu/2 (iota > 0): holds".to_string(),
            format!("flow did not reach eps within 1.05x the bound {bound:.4}"),
        )),
    }
}

fn check_time_bound_biphasic(
    pool: &TaskPool,
    spec: &VerifySpec,
    ctx: &TheoryCtx,
) -> Result<CheckResult> {
    let name = "time_bound_biphasic_flow";
    let c = &ctx.constants;
    if let Some(h) = hypothesis_mu(c) {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            h,
            String::new(),
        ));
    }
    let bound_alpha = diagnostics::alpha_bound_biphasic_flow(c, spec.eps0);
    let gradf0 = pool.probe_expected_grad(&spec.w0)?.norm();
    let bound = time_bound_biphasic_flow(c, spec.alpha, spec.eps0, gradf0, spec.eps)?;
    let local = pool.fork_counters();
    let field = bi_maml_field(&local, spec.alpha, spec.eps0)?;
    let budget = bound * 1.05;
    let steps = (budget / spec.flow_beta).ceil() as usize + 1;
    let traj = rk4_integrate(
        &field,
        &spec.w0,
        spec.flow_beta,
        &StopRule::new(spec.eps, steps, budget),
    )?;
    let observed = traj.first_time_maml_grad_below(spec.eps);
    let hypothesis = format!(
        "alpha <= biphasic bound {bound_alpha}: {} (alpha = {})",
        if spec.alpha <= bound_alpha {
            "holds"
        } else {
            "violated"
        },
        spec.alpha
    );
    if spec.alpha > bound_alpha {
        return Ok(CheckResult::new(
            name,
            CheckStatus::HypothesisViolated,
            f64::NAN,
            hypothesis,
            String::new(),
        ));
    }
    match observed {
        Some(t) => {
            let status = if t <= bound {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            Ok(CheckResult::new(
                name,
                status,
                bound - t,
                hypothesis,
                format!(
                    "observed switch-plus-convergence time {t:.4} vs bound {bound:.4} (switch at {:?})",
                    field.switch_time()
                ),
            ))
        }
        None => Ok(CheckResult::new(
            name,
            CheckStatus::Fail,
            f64::NEG_INFINITY,
            hypothesis,
            format!("flow did not reach eps within 1.05x the bound {bound:.4}"),
        )),
    }
}

fn check_nonconvexity(pool: &TaskPool, spec: &VerifySpec) -> Result<CheckResult> {
    let name = "nonconvex_counterexample";
    if pool.dim() != 1 {
        return Ok(CheckResult::new(
            name,
            CheckStatus::Inconclusive,
            f64::NAN,
            "defined for one-dimensional pools".to_string(),
            format!("pool dimension is {}", pool.dim()),
        ));
    }
    let scan = meta_curvature_scan(pool, spec.alpha, -3.0, 3.0, 1e-3)?;
    let nonconvex = scan.min_hess < 0.0 && scan.grad_slope_sign_changes >= 3;
    let status = if nonconvex {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckResult::new(
        name,
        status,
        -scan.min_hess,
        "scalar pool scan; holds unconditionally".to_string(),
        format!(
            "min F'' = {:.6} at w = {:.4}; {} slope sign changes of F'",
            scan.min_hess, scan.argmin_hess, scan.grad_slope_sign_changes
        ),
    ))
}
