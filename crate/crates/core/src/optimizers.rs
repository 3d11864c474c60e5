//! Discrete-time training loops: gradient descent on the expected loss,
//! meta-gradient descent (exact and first-order), and the biphasic scheme
//! that descends the expected loss first and the meta-loss second.
//!
//! Every loop records one sample per visited iterate. Counter snapshots are
//! taken before the step gradient, so the cumulative columns of sample `k`
//! reflect exactly the work spent to reach iterate `k`; the gradient-norm
//! columns are filled from the step's own gradient when the algorithm already
//! computed it and from uncounted probes otherwise.

use crate::error::Result;
use crate::meta_grad::{fo_maml_grad, maml_grad, probe_maml_grad, probe_maml_loss};
use crate::recorder::{diverged, Recorder};
use crate::task_model::{MamlConfig, Phase, TaskPool, Termination, Trajectory, Vector};

fn vector_ok(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// What to do after recording a sample.
enum Verdict {
    Continue,
    Stop(Termination),
}

fn budget_verdict(k: usize, t: f64, config: &MamlConfig) -> Verdict {
    if k >= config.max_iters {
        Verdict::Stop(Termination::IterBudget)
    } else if t >= config.max_time {
        Verdict::Stop(Termination::TimeBudget)
    } else {
        Verdict::Continue
    }
}

/// Gradient descent on the expected loss `f`: `w ← w − β∇f(w)` until
/// `‖∇f(w)‖ ≤ eps0` or a budget runs out.
pub fn run_gd_f(pool: &TaskPool, config: &MamlConfig, w0: &Vector) -> Result<Trajectory> {
    config.check_runnable()?;
    pool.check_dim(w0)?;
    let mut rec = Recorder::new(pool);
    let mut w = w0.clone();
    let mut k = 0usize;
    let termination = loop {
        let t = k as f64 * config.beta;
        let cum = rec.counts_since_start(pool);
        rec.clock_on();
        let g = pool
            .expected_grad(&w)
            .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
        rec.clock_off();
        let gf = g.norm();
        let big_f = probe_maml_loss(pool, config.alpha, &w).unwrap_or(f64::NAN);
        let g_big_f = probe_maml_grad(pool, config.alpha, &w)
            .map(|v| v.norm())
            .unwrap_or(f64::NAN);
        rec.push(k, t, &w, Phase::ExpectedLoss, big_f, g_big_f, gf, cum);

        if diverged(&w) || !vector_ok(&g) {
            break Termination::Diverged;
        }
        if gf <= config.eps0 {
            break Termination::Converged;
        }
        match budget_verdict(k, t, config) {
            Verdict::Stop(t) => break t,
            Verdict::Continue => {}
        }
        rec.clock_on();
        w.axpy(-config.beta, &g, 1.0);
        rec.clock_off();
        k += 1;
    };
    Ok(rec.finish(termination, config.clone()))
}

/// Meta-gradient descent `w ← w − β∇F(w)` until `‖∇F(w)‖ ≤ eps`.
pub fn run_maml(pool: &TaskPool, config: &MamlConfig, w0: &Vector) -> Result<Trajectory> {
    config.check_runnable()?;
    pool.check_dim(w0)?;
    let mut rec = Recorder::new(pool);
    let mut w = w0.clone();
    let mut k = 0usize;
    let termination = loop {
        let t = k as f64 * config.beta;
        let cum = rec.counts_since_start(pool);
        rec.clock_on();
        let g = maml_grad(pool, config.alpha, &w)
            .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
        rec.clock_off();
        let g_big_f = g.norm();
        let big_f = probe_maml_loss(pool, config.alpha, &w).unwrap_or(f64::NAN);
        let gf = pool
            .probe_expected_grad(&w)
            .map(|v| v.norm())
            .unwrap_or(f64::NAN);
        rec.push(k, t, &w, Phase::Maml, big_f, g_big_f, gf, cum);

        if diverged(&w) || !vector_ok(&g) {
            break Termination::Diverged;
        }
        if g_big_f <= config.eps {
            break Termination::Converged;
        }
        match budget_verdict(k, t, config) {
            Verdict::Stop(t) => break t,
            Verdict::Continue => {}
        }
        rec.clock_on();
        w.axpy(-config.beta, &g, 1.0);
        rec.clock_off();
        k += 1;
    };
    Ok(rec.finish(termination, config.clone()))
}

/// First-order variant: descends `E_i[∇f_i(w − α∇f_i(w))]`, never touching a
/// Hessian. The stop check and the recorded `‖∇F‖` come from uncounted
/// probes; convergence of the true meta-gradient is not guaranteed.
pub fn run_fo_maml(pool: &TaskPool, config: &MamlConfig, w0: &Vector) -> Result<Trajectory> {
    config.check_runnable()?;
    pool.check_dim(w0)?;
    let mut rec = Recorder::new(pool);
    let mut w = w0.clone();
    let mut k = 0usize;
    let termination = loop {
        let t = k as f64 * config.beta;
        let cum = rec.counts_since_start(pool);
        rec.clock_on();
        let g = fo_maml_grad(pool, config.alpha, &w)
            .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
        rec.clock_off();
        let g_big_f = probe_maml_grad(pool, config.alpha, &w)
            .map(|v| v.norm())
            .unwrap_or(f64::NAN);
        let big_f = probe_maml_loss(pool, config.alpha, &w).unwrap_or(f64::NAN);
        let gf = pool
            .probe_expected_grad(&w)
            .map(|v| v.norm())
            .unwrap_or(f64::NAN);
        rec.push(k, t, &w, Phase::Maml, big_f, g_big_f, gf, cum);

        if diverged(&w) || !vector_ok(&g) {
            break Termination::Diverged;
        }
        if g_big_f <= config.eps {
            break Termination::Converged;
        }
        match budget_verdict(k, t, config) {
            Verdict::Stop(t) => break t,
            Verdict::Continue => {}
        }
        rec.clock_on();
        w.axpy(-config.beta, &g, 1.0);
        rec.clock_off();
        k += 1;
    };
    Ok(rec.finish(termination, config.clone()))
}

/// Biphasic meta-training.
///
/// Phase one descends the expected loss (`w ← w − β∇f(w)`, no Hessians) while
/// `‖∇f(w)‖ > eps0`. The first time `‖∇f(w)‖ ≤ eps0` the run latches
/// permanently into phase two, meta-gradient descent, and stops when
/// `‖∇F(w)‖ ≤ eps`. The stationarity check on `∇F` only runs in phase two;
/// phase one charges zero Hessian evaluations.
pub fn run_bi_maml(pool: &TaskPool, config: &MamlConfig, w0: &Vector) -> Result<Trajectory> {
    config.check_runnable()?;
    pool.check_dim(w0)?;
    let mut rec = Recorder::new(pool);
    let mut w = w0.clone();
    let mut k = 0usize;
    let mut latched = false;
    let termination = loop {
        let t = k as f64 * config.beta;
        let cum = rec.counts_since_start(pool);

        let (g, phase, gf) = if latched {
            rec.clock_on();
            let g = maml_grad(pool, config.alpha, &w)
                .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
            rec.clock_off();
            let gf = pool
                .probe_expected_grad(&w)
                .map(|v| v.norm())
                .unwrap_or(f64::NAN);
            (g, Phase::Maml, gf)
        } else {
            rec.clock_on();
            let gf_vec = pool
                .expected_grad(&w)
                .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
            let gf = gf_vec.norm();
            let fire = gf <= config.eps0 && vector_ok(&gf_vec);
            let pick = if fire {
                // One-way switch; this iterate already steps on F.
                latched = true;
                let g = maml_grad(pool, config.alpha, &w)
                    .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
                (g, Phase::Maml, gf)
            } else {
                (gf_vec, Phase::ExpectedLoss, gf)
            };
            rec.clock_off();
            pick
        };
        let g_big_f = match phase {
            Phase::Maml => g.norm(),
            Phase::ExpectedLoss => probe_maml_grad(pool, config.alpha, &w)
                .map(|v| v.norm())
                .unwrap_or(f64::NAN),
        };
        let big_f = probe_maml_loss(pool, config.alpha, &w).unwrap_or(f64::NAN);
        rec.push(k, t, &w, phase, big_f, g_big_f, gf, cum);

        if diverged(&w) || !vector_ok(&g) {
            break Termination::Diverged;
        }
        if phase == Phase::Maml && g_big_f <= config.eps {
            break Termination::Converged;
        }
        match budget_verdict(k, t, config) {
            Verdict::Stop(t) => break t,
            Verdict::Continue => {}
        }
        rec.clock_on();
        w.axpy(-config.beta, &g, 1.0);
        rec.clock_off();
        k += 1;
    };
    Ok(rec.finish(termination, config.clone()))
}

/// Biphasic loop with the branch condition applied in the opposite sense:
/// steps on `f` when `‖∇f(w)‖ ≤ eps0` and on `F` otherwise, re-evaluating the
/// condition every iteration (no latch). Kept for side-by-side comparison;
/// none of the convergence checks apply to it.
pub fn run_bi_maml_inverted_branch(
    pool: &TaskPool,
    config: &MamlConfig,
    w0: &Vector,
) -> Result<Trajectory> {
    config.check_runnable()?;
    pool.check_dim(w0)?;
    let mut rec = Recorder::new(pool);
    let mut w = w0.clone();
    let mut k = 0usize;
    let termination = loop {
        let t = k as f64 * config.beta;
        let cum = rec.counts_since_start(pool);
        rec.clock_on();
        let gf_vec = pool
            .expected_grad(&w)
            .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
        let gf = gf_vec.norm();
        let g_big_f_vec = maml_grad(pool, config.alpha, &w)
            .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
        let g_big_f = g_big_f_vec.norm();
        rec.clock_off();
        let (g, phase) = if gf <= config.eps0 {
            (gf_vec, Phase::ExpectedLoss)
        } else {
            (g_big_f_vec, Phase::Maml)
        };
        let big_f = probe_maml_loss(pool, config.alpha, &w).unwrap_or(f64::NAN);
        rec.push(k, t, &w, phase, big_f, g_big_f, gf, cum);

        if diverged(&w) || !vector_ok(&g) {
            break Termination::Diverged;
        }
        if g_big_f <= config.eps {
            break Termination::Converged;
        }
        match budget_verdict(k, t, config) {
            Verdict::Stop(t) => break t,
            Verdict::Continue => {}
        }
        rec.clock_on();
        w.axpy(-config.beta, &g, 1.0);
        rec.clock_off();
        k += 1;
    };
    Ok(rec.finish(termination, config.clone()))
}
