//! Continuous-time limits of the training loops: gradient flows on the
//! meta-loss and the expected loss, and the two-stage field that switches
//! between them, integrated with fixed-step forward Euler or classical RK4.
//!
//! Forward Euler on the meta-loss field with step `β` reproduces the discrete
//! meta-descent iterates exactly (same arithmetic); RK4 serves as the
//! high-accuracy reference for the continuous-time checks.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::meta_grad::{probe_maml_grad, probe_maml_loss};
use crate::recorder::{diverged, Recorder};
use crate::task_model::{Integrator, MamlConfig, Phase, TaskPool, Termination, Trajectory, Vector};

/// Which dynamics a [`VectorField`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// `ẇ = −∇F(w)`.
    MamlOde,
    /// `ẇ = −∇f(w)`.
    ExpectedLossFlow,
    /// `−∇f(w)` until `‖∇f‖ ≤ eps0` first holds, then permanently `−∇F(w)`.
    BiMamlOde,
}

/// A right-hand side for the integrators, borrowing the pool it flows on.
///
/// Field evaluations are charged to the pool counters: they are the
/// algorithm's work. The biphasic field keeps its one-way latch in interior
/// state; the latch condition is evaluated once per accepted step (at the
/// step's start), never inside RK4 stages, so the switch-time error is
/// `O(β)`.
pub struct VectorField<'p> {
    pool: &'p TaskPool,
    alpha: f64,
    eps0: f64,
    kind: FieldKind,
    latch: Cell<Option<f64>>,
}

impl<'p> VectorField<'p> {
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pool(&self) -> &'p TaskPool {
        self.pool
    }

    /// Time at which the biphasic latch fired, if it has.
    pub fn switch_time(&self) -> Option<f64> {
        self.latch.get()
    }

    /// Phase the field currently reports samples under.
    pub fn phase(&self) -> Phase {
        match self.kind {
            FieldKind::MamlOde => Phase::Maml,
            FieldKind::ExpectedLossFlow => Phase::ExpectedLoss,
            FieldKind::BiMamlOde => {
                if self.latch.get().is_some() {
                    Phase::Maml
                } else {
                    Phase::ExpectedLoss
                }
            }
        }
    }

    /// Called once at the start of each accepted step; updates the biphasic
    /// latch. The `‖∇f‖` test is first-order work and is charged as such.
    pub fn begin_step(&self, w: &Vector, t: f64) -> Result<()> {
        if self.kind == FieldKind::BiMamlOde && self.latch.get().is_none() {
            let gf = self.pool.expected_grad(w)?;
            if gf.norm() <= self.eps0 {
                self.latch.set(Some(t));
            }
        }
        Ok(())
    }

    /// Field value at `w` under the current latch state.
    pub fn eval(&self, w: &Vector) -> Result<Vector> {
        let v = match (self.kind, self.latch.get()) {
            (FieldKind::MamlOde, _) | (FieldKind::BiMamlOde, Some(_)) => {
                crate::meta_grad::maml_grad(self.pool, self.alpha, w)?
            }
            (FieldKind::ExpectedLossFlow, _) | (FieldKind::BiMamlOde, None) => {
                self.pool.expected_grad(w)?
            }
        };
        Ok(-v)
    }

    /// Norm the stop rule's `eps` applies to, given `‖k1‖` at the step start:
    /// `‖∇F‖` for the meta-loss field (and the biphasic field once latched),
    /// `‖∇f‖` for the plain expected-loss flow. The biphasic field never
    /// stops on `eps` before the latch.
    fn stop_norm(&self, k1_norm: f64) -> f64 {
        match (self.kind, self.latch.get()) {
            (FieldKind::BiMamlOde, None) => f64::INFINITY,
            _ => k1_norm,
        }
    }
}

/// Field of the meta-loss gradient flow `ẇ = −∇F(w)`.
pub fn maml_ode_field(pool: &TaskPool, alpha: f64) -> Result<VectorField<'_>> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidArgument {
            name: "alpha".to_string(),
            reason: format!("must be finite and non-negative (got {alpha})"),
        });
    }
    Ok(VectorField {
        pool,
        alpha,
        eps0: 0.0,
        kind: FieldKind::MamlOde,
        latch: Cell::new(None),
    })
}

/// Field of the expected-loss gradient flow `ẇ = −∇f(w)`.
pub fn expected_loss_flow(pool: &TaskPool) -> VectorField<'_> {
    VectorField {
        pool,
        alpha: 0.0,
        eps0: 0.0,
        kind: FieldKind::ExpectedLossFlow,
        latch: Cell::new(None),
    }
}

/// Two-stage field: expected-loss flow until `‖∇f(w)‖ ≤ eps0` first holds,
/// then permanently the meta-loss flow. The switch time is recorded on the
/// field.
pub fn bi_maml_field(pool: &TaskPool, alpha: f64, eps0: f64) -> Result<VectorField<'_>> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidArgument {
            name: "alpha".to_string(),
            reason: format!("must be finite and non-negative (got {alpha})"),
        });
    }
    if !eps0.is_finite() || eps0 <= 0.0 {
        return Err(Error::InvalidArgument {
            name: "eps0".to_string(),
            reason: format!("must be finite and positive (got {eps0})"),
        });
    }
    Ok(VectorField {
        pool,
        alpha,
        eps0,
        kind: FieldKind::BiMamlOde,
        latch: Cell::new(None),
    })
}

/// Stopping rule for the integrators.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    /// Tolerance on the field's stationarity norm (see
    /// `VectorField::stop_norm`). Zero disables the check.
    pub eps: f64,
    pub max_iters: usize,
    pub max_time: f64,
}

impl StopRule {
    pub fn new(eps: f64, max_iters: usize, max_time: f64) -> Self {
        StopRule {
            eps,
            max_iters,
            max_time,
        }
    }
}

enum Method {
    Euler,
    Rk4,
}

fn integrate(
    field: &VectorField<'_>,
    w0: &Vector,
    beta: f64,
    stop: &StopRule,
    method: Method,
) -> Result<Trajectory> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidArgument {
            name: "beta".to_string(),
            reason: format!("integration step must be positive (got {beta})"),
        });
    }
    let pool = field.pool;
    pool.check_dim(w0)?;
    let mut rec = Recorder::new(pool);
    let mut w = w0.clone();
    let mut k = 0usize;
    let termination = loop {
        let t = k as f64 * beta;
        let cum = rec.counts_since_start(pool);
        rec.clock_on();
        field.begin_step(&w, t)?;
        let phase = field.phase();
        let k1 = field
            .eval(&w)
            .unwrap_or_else(|_| Vector::from_element(pool.dim(), f64::NAN));
        rec.clock_off();
        let k1_norm = k1.norm();

        // Fill the record, reusing k1 where it already is the wanted norm.
        let g_big_f = match (field.kind, phase) {
            (FieldKind::MamlOde, _) | (FieldKind::BiMamlOde, Phase::Maml) => k1_norm,
            _ => probe_maml_grad(pool, field.alpha, &w)
                .map(|v| v.norm())
                .unwrap_or(f64::NAN),
        };
        let gf = match (field.kind, phase) {
            (FieldKind::ExpectedLossFlow, _) | (FieldKind::BiMamlOde, Phase::ExpectedLoss) => {
                k1_norm
            }
            _ => pool
                .probe_expected_grad(&w)
                .map(|v| v.norm())
                .unwrap_or(f64::NAN),
        };
        let big_f = probe_maml_loss(pool, field.alpha, &w).unwrap_or(f64::NAN);
        rec.push(k, t, &w, phase, big_f, g_big_f, gf, cum);

        if diverged(&w) || k1.iter().any(|x| !x.is_finite()) {
            break Termination::Diverged;
        }
        if stop.eps > 0.0 && field.stop_norm(k1_norm) <= stop.eps {
            break Termination::Converged;
        }
        if k >= stop.max_iters {
            break Termination::IterBudget;
        }
        if t >= stop.max_time {
            break Termination::TimeBudget;
        }

        rec.clock_on();
        match method {
            Method::Euler => {
                w.axpy(beta, &k1, 1.0);
            }
            Method::Rk4 => {
                let half = 0.5 * beta;
                let k2 = field.eval(&(&w + &k1 * half))?;
                let k3 = field.eval(&(&w + &k2 * half))?;
                let k4 = field.eval(&(&w + &k3 * beta))?;
                let incr = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (beta / 6.0);
                w += incr;
            }
        }
        rec.clock_off();
        k += 1;
    };

    let config = MamlConfig {
        alpha: field.alpha,
        beta,
        eps: stop.eps,
        eps0: field.eps0,
        max_iters: stop.max_iters,
        max_time: stop.max_time,
        integrator: match method {
            Method::Euler => Integrator::Euler,
            Method::Rk4 => Integrator::Rk4,
        },
    };
    Ok(rec.finish(termination, config))
}

/// Forward Euler: `w_{k+1} = w_k + β·field(w_k)`, `t_k = kβ`.
pub fn euler_integrate(
    field: &VectorField<'_>,
    w0: &Vector,
    beta: f64,
    stop: &StopRule,
) -> Result<Trajectory> {
    integrate(field, w0, beta, stop, Method::Euler)
}

/// Classical fourth-order Runge–Kutta with fixed step `β`.
pub fn rk4_integrate(
    field: &VectorField<'_>,
    w0: &Vector,
    beta: f64,
    stop: &StopRule,
) -> Result<Trajectory> {
    integrate(field, w0, beta, stop, Method::Rk4)
}

/// Integrates with the method named in `config` and its budgets.
pub fn integrate_with_config(
    field: &VectorField<'_>,
    w0: &Vector,
    config: &MamlConfig,
) -> Result<Trajectory> {
    let stop = StopRule::new(config.eps, config.max_iters, config.max_time);
    match config.integrator {
        Integrator::Euler => euler_integrate(field, w0, config.beta, &stop),
        Integrator::Rk4 => rk4_integrate(field, w0, config.beta, &stop),
    }
}
