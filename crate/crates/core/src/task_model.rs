//! Task losses, weighted task pools, run configuration, and trajectory records.
//!
//! A [`TaskPool`] holds `M` weighted tasks over a shared parameter space and
//! embodies the expected loss `f(w) = E_i f_i(w)`. Every evaluation routed
//! through a [`Task`] is tallied in per-task counters, which is what makes
//! Hessian-avoidance claims measurable; instrumentation and diagnostics use
//! the `probe_*` variants instead, which leave the counters untouched.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter vector in the shared task space.
pub type Vector = DVector<f64>;
/// Dense square matrix (Hessians, correction terms).
pub type Matrix = DMatrix<f64>;

/// A single task risk `f_i` with value, gradient, and Hessian oracles.
///
/// Implementations must be pure: two calls with the same `w` return the same
/// result. All bookkeeping lives outside the kernel, in [`Task`].
pub trait Loss: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &Vector) -> f64;
    fn grad(&self, w: &Vector) -> Vector;
    fn hess(&self, w: &Vector) -> Matrix;

    /// False when `hess` is a finite-difference stand-in rather than exact.
    fn analytic_hessian(&self) -> bool {
        true
    }

    /// Downcast hook; quadratic pools admit closed-form treatment in several
    /// places (meta-loss Hessians, smoothness constants).
    fn as_quadratic(&self) -> Option<&crate::losses::QuadraticLoss> {
        None
    }

    /// Downcast hook for the smoothed hinge.
    fn as_hinge(&self) -> Option<&crate::losses::SmoothedHingeLoss> {
        None
    }
}

/// Monotone evaluation counters, safe for concurrent increments.
#[derive(Debug, Default)]
pub struct EvalCounters {
    value: AtomicU64,
    grad: AtomicU64,
    hess: AtomicU64,
}

/// A snapshot of evaluation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub value_evals: u64,
    pub grad_evals: u64,
    pub hess_evals: u64,
}

impl EvalCounts {
    /// Counts accumulated since `earlier`.
    pub fn since(&self, earlier: &EvalCounts) -> EvalCounts {
        EvalCounts {
            value_evals: self.value_evals - earlier.value_evals,
            grad_evals: self.grad_evals - earlier.grad_evals,
            hess_evals: self.hess_evals - earlier.hess_evals,
        }
    }
}

/// One task of the pool: an immutable loss kernel plus its counters.
pub struct Task {
    kernel: Arc<dyn Loss>,
    counters: EvalCounters,
}

impl Task {
    pub fn new(kernel: Arc<dyn Loss>) -> Self {
        Task {
            kernel,
            counters: EvalCounters::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn kernel(&self) -> &Arc<dyn Loss> {
        &self.kernel
    }

    /// Same kernel, fresh counters. Used to give concurrent runs independent
    /// tallies.
    pub fn fork(&self) -> Task {
        Task::new(Arc::clone(&self.kernel))
    }

    /// Loss value at `w`; charges one value evaluation.
    pub fn value(&self, w: &Vector) -> f64 {
        self.counters.value.fetch_add(1, Ordering::Relaxed);
        self.kernel.value(w)
    }

    /// Gradient at `w`; charges one gradient evaluation.
    pub fn grad(&self, w: &Vector) -> Vector {
        self.counters.grad.fetch_add(1, Ordering::Relaxed);
        self.kernel.grad(w)
    }

    /// Hessian at `w`; charges one Hessian evaluation.
    pub fn hess(&self, w: &Vector) -> Matrix {
        self.counters.hess.fetch_add(1, Ordering::Relaxed);
        self.kernel.hess(w)
    }

    /// Uncounted value, for instrumentation and diagnostics.
    pub fn probe_value(&self, w: &Vector) -> f64 {
        self.kernel.value(w)
    }

    /// Uncounted gradient.
    pub fn probe_grad(&self, w: &Vector) -> Vector {
        self.kernel.grad(w)
    }

    /// Uncounted Hessian.
    pub fn probe_hess(&self, w: &Vector) -> Matrix {
        self.kernel.hess(w)
    }

    pub(crate) fn value_c(&self, w: &Vector, count: bool) -> f64 {
        if count {
            self.value(w)
        } else {
            self.probe_value(w)
        }
    }

    pub(crate) fn grad_c(&self, w: &Vector, count: bool) -> Vector {
        if count {
            self.grad(w)
        } else {
            self.probe_grad(w)
        }
    }

    pub(crate) fn hess_c(&self, w: &Vector, count: bool) -> Matrix {
        if count {
            self.hess(w)
        } else {
            self.probe_hess(w)
        }
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts {
            value_evals: self.counters.value.load(Ordering::Relaxed),
            grad_evals: self.counters.grad.load(Ordering::Relaxed),
            hess_evals: self.counters.hess.load(Ordering::Relaxed),
        }
    }
}

/// Tolerance on the weight normalization check.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `M` weighted tasks sharing one parameter space.
///
/// Weights are the sampling probabilities of the task distribution; the pool
/// computes exact expectations (full weighted sums), never subsampled ones.
pub struct TaskPool {
    tasks: Vec<Task>,
    weights: Vec<f64>,
    dim: usize,
}

impl std::fmt::Debug for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Task")
            .field("dim", &self.dim())
            .field("counts", &self.counts())
            .finish_non_exhaustive()
    }
}

impl std::fmt::Debug for TaskPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskPool")
            .field("num_tasks", &self.tasks.len())
            .field("dim", &self.dim)
            .field("weights", &self.weights)
            .finish_non_exhaustive()
    }
}

/// Checks pool invariants on raw parts; returns one message per violation.
pub fn validate_pool_parts(kernels: &[Arc<dyn Loss>], weights: &[f64]) -> Vec<String> {
    let mut violations = Vec::new();
    if kernels.is_empty() {
        violations.push("pool must contain at least one task".to_string());
        return violations;
    }
    if kernels.len() != weights.len() {
        violations.push(format!(
            "task/weight count mismatch: {} tasks, {} weights",
            kernels.len(),
            weights.len()
        ));
    }
    let dim = kernels[0].dim();
    if dim == 0 {
        violations.push("task dimension must be at least 1".to_string());
    }
    for (i, k) in kernels.iter().enumerate() {
        if k.dim() != dim {
            violations.push(format!(
                "dimension mismatch: task 0 has dim {dim}, task {i} has dim {}",
                k.dim()
            ));
        }
    }
    if weights.iter().any(|p| *p < 0.0) {
        violations.push("weights must be non-negative".to_string());
    }
    if weights.iter().any(|p| !p.is_finite()) {
        violations.push("weights must be finite".to_string());
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        violations.push(format!("weights must sum to 1 (got {sum})"));
    }
    violations
}

impl TaskPool {
    /// Builds a pool, enforcing the weight and dimension invariants.
    pub fn new(kernels: Vec<Arc<dyn Loss>>, weights: Vec<f64>) -> Result<Self> {
        let violations = validate_pool_parts(&kernels, &weights);
        if !violations.is_empty() {
            return Err(Error::InvalidPool(violations));
        }
        let dim = kernels[0].dim();
        Ok(TaskPool {
            tasks: kernels.into_iter().map(Task::new).collect(),
            weights,
            dim,
        })
    }

    /// Builds a uniformly weighted pool.
    pub fn uniform(kernels: Vec<Arc<dyn Loss>>) -> Result<Self> {
        let m = kernels.len();
        if m == 0 {
            return Err(Error::InvalidPool(vec![
                "pool must contain at least one task".to_string(),
            ]));
        }
        let w = 1.0 / m as f64;
        TaskPool::new(kernels, vec![w; m])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of tasks `M`.
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &Task {
        &self.tasks[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same kernels and weights, fresh counters on every task.
    pub fn fork_counters(&self) -> TaskPool {
        TaskPool {
            tasks: self.tasks.iter().map(Task::fork).collect(),
            weights: self.weights.clone(),
            dim: self.dim,
        }
    }

    /// Pool-wide counter totals.
    pub fn counts(&self) -> EvalCounts {
        let mut total = EvalCounts::default();
        for t in &self.tasks {
            let c = t.counts();
            total.value_evals += c.value_evals;
            total.grad_evals += c.grad_evals;
            total.hess_evals += c.hess_evals;
        }
        total
    }

    pub(crate) fn check_dim(&self, w: &Vector) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn expected_loss_c(&self, w: &Vector, count: bool) -> Result<f64> {
        self.check_dim(w)?;
        let values = crate::parallel::map_collect(&self.tasks, |t| t.value_c(w, count));
        let mut acc = 0.0;
        for (p, v) in self.weights.iter().zip(&values) {
            acc += p * v;
        }
        if !acc.is_finite() {
            return Err(Error::NonFinite {
                context: "expected_loss".to_string(),
            });
        }
        Ok(acc)
    }

    pub(crate) fn expected_grad_c(&self, w: &Vector, count: bool) -> Result<Vector> {
        self.check_dim(w)?;
        let grads = crate::parallel::map_collect(&self.tasks, |t| t.grad_c(w, count));
        let mut acc = Vector::zeros(self.dim);
        for (p, g) in self.weights.iter().zip(&grads) {
            acc.axpy(*p, g, 1.0);
        }
        if acc.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "expected_grad".to_string(),
            });
        }
        Ok(acc)
    }

    /// Expected loss `f(w)`; charges one value evaluation per task.
    pub fn expected_loss(&self, w: &Vector) -> Result<f64> {
        self.expected_loss_c(w, true)
    }

    /// Expected gradient `∇f(w)`; charges one gradient evaluation per task.
    pub fn expected_grad(&self, w: &Vector) -> Result<Vector> {
        self.expected_grad_c(w, true)
    }

    /// Uncounted expected loss.
    pub fn probe_expected_loss(&self, w: &Vector) -> Result<f64> {
        self.expected_loss_c(w, false)
    }

    /// Uncounted expected gradient.
    pub fn probe_expected_grad(&self, w: &Vector) -> Result<Vector> {
        self.expected_grad_c(w, false)
    }

    /// Uncounted pool Hessian `∇²f(w) = Σ_i p_i ∇²f_i(w)`.
    pub fn probe_expected_hess(&self, w: &Vector) -> Result<Matrix> {
        self.check_dim(w)?;
        let hessians = crate::parallel::map_collect(&self.tasks, |t| t.probe_hess(w));
        let mut acc = Matrix::zeros(self.dim, self.dim);
        for (p, h) in self.weights.iter().zip(&hessians) {
            acc += h * *p;
        }
        Ok(acc)
    }

    /// Re-checks the construction invariants plus finite probe evaluations at
    /// the origin. Returns one message per violation.
    pub fn validate(&self) -> Vec<String> {
        let kernels: Vec<Arc<dyn Loss>> =
            self.tasks.iter().map(|t| Arc::clone(&t.kernel)).collect();
        let mut violations = validate_pool_parts(&kernels, &self.weights);
        let origin = Vector::zeros(self.dim);
        for (i, t) in self.tasks.iter().enumerate() {
            if !t.probe_value(&origin).is_finite() {
                violations.push(format!("task {i}: non-finite value at the origin"));
            }
            if t.probe_grad(&origin).iter().any(|x| !x.is_finite()) {
                violations.push(format!("task {i}: non-finite gradient at the origin"));
            }
        }
        violations
    }
}

/// Validates a pool; `Err` carries the list of violated invariants.
pub fn validate_pool(pool: &TaskPool) -> std::result::Result<(), Vec<String>> {
    let violations = pool.validate();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Fixed-step integrator choice for the continuous-time runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

/// Run configuration shared by the discrete optimizers and the flow
/// integrators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MamlConfig {
    /// Inner (task-adaptation) step size.
    pub alpha: f64,
    /// Outer step size; doubles as the integration step for the flows.
    pub beta: f64,
    /// Stationarity tolerance on `‖∇F‖`.
    pub eps: f64,
    /// Phase-switch tolerance on `‖∇f‖`.
    pub eps0: f64,
    pub max_iters: usize,
    /// Continuous-time budget; iterate `k` lives at `t = k·beta`.
    pub max_time: f64,
    pub integrator: Integrator,
}

impl MamlConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        MamlConfig {
            alpha,
            beta,
            eps: 1e-6,
            eps0: 0.1,
            max_iters: 10_000,
            max_time: 1e6,
            integrator: Integrator::Rk4,
        }
    }

    /// Strict validation used at configuration boundaries (CLI).
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, f64); 4] = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eps", self.eps),
            ("eps0", self.eps0),
        ];
        for (name, v) in checks {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument {
                    name: name.to_string(),
                    reason: format!("must be finite and positive (got {v})"),
                });
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument {
                name: "max_iters".to_string(),
                reason: "must be at least 1".to_string(),
            });
        }
        if !self.max_time.is_finite() || self.max_time <= 0.0 {
            return Err(Error::InvalidArgument {
                name: "max_time".to_string(),
                reason: format!("must be finite and positive (got {})", self.max_time),
            });
        }
        Ok(())
    }

    /// Looser check used by the run loops themselves: zero step sizes are
    /// allowed (the iterate just stays put), negative or non-finite ones are
    /// not.
    pub(crate) fn check_runnable(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eps", self.eps),
            ("eps0", self.eps0),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument {
                    name: name.to_string(),
                    reason: format!("must be finite and non-negative (got {v})"),
                });
            }
        }
        Ok(())
    }
}

/// Which objective the optimizer is descending at a given iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ExpectedLoss,
    Maml,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::ExpectedLoss => "expected_loss",
            Phase::Maml => "maml",
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterBudget,
    TimeBudget,
    Diverged,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::IterBudget => "iter_budget",
            Termination::TimeBudget => "time_budget",
            Termination::Diverged => "diverged",
        }
    }
}

/// State recorded at one iterate.
///
/// The cumulative counters snapshot the work done to *reach* this iterate;
/// the gradient used to leave it is not yet included. Loss values and
/// off-objective gradient norms are instrumented through the probe paths and
/// never show up in the counters.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub iter: usize,
    /// Continuous time `iter·beta`.
    pub t: f64,
    pub w: Vector,
    /// Meta-loss `F(w)`.
    pub maml_loss: f64,
    /// `‖∇F(w)‖`.
    pub maml_grad_norm: f64,
    /// `‖∇f(w)‖`.
    pub expected_grad_norm: f64,
    pub phase: Phase,
    pub hess_evals_cum: u64,
    pub grad_evals_cum: u64,
    /// Cumulative wall-clock nanoseconds of algorithm work (instrumentation
    /// probes for the record columns are not billed).
    pub wall_ns: u64,
}

/// A completed run: samples at every visited iterate plus the stop reason.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub termination: Termination,
    pub config: MamlConfig,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory is never empty")
    }

    /// First recorded time with `‖∇F‖ ≤ eps`, if any.
    pub fn first_time_maml_grad_below(&self, eps: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| s.maml_grad_norm <= eps)
            .map(|s| s.t)
    }

    /// Time of the first sample recorded in the meta-descent phase, if any.
    pub fn phase_switch_time(&self) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| s.phase == Phase::Maml)
            .map(|s| s.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::QuadraticLoss;

    fn half_square() -> Arc<dyn Loss> {
        Arc::new(QuadraticLoss::isotropic(1, 1.0))
    }

    #[test]
    fn pool_rejects_bad_weight_sum() {
        let err = TaskPool::new(vec![half_square(), half_square()], vec![0.5, 0.499]).unwrap_err();
        match err {
            Error::InvalidPool(v) => {
                assert!(v.iter().any(|m| m.contains("sum to 1")), "{v:?}")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pool_rejects_negative_weight() {
        let err = TaskPool::new(vec![half_square(), half_square()], vec![1.5, -0.5]).unwrap_err();
        match err {
            Error::InvalidPool(v) => {
                assert!(v.iter().any(|m| m.contains("non-negative")), "{v:?}")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validate_parts_reports_mixed_dims() {
        let kernels: Vec<Arc<dyn Loss>> = vec![
            Arc::new(QuadraticLoss::isotropic(2, 1.0)),
            Arc::new(QuadraticLoss::isotropic(3, 1.0)),
        ];
        let violations = validate_pool_parts(&kernels, &[0.5, 0.5]);
        assert!(violations.iter().any(|m| m.contains("dimension mismatch")));
    }

    #[test]
    fn counters_track_pool_evaluations() {
        let pool = TaskPool::uniform(vec![half_square(), half_square()]).unwrap();
        let w = Vector::from_element(1, 2.0);
        let v = pool.expected_loss(&w).unwrap();
        assert_eq!(v, 2.0);
        let g = pool.expected_grad(&w).unwrap();
        assert_eq!(g[0], 2.0);
        let c = pool.counts();
        assert_eq!(c.value_evals, 2);
        assert_eq!(c.grad_evals, 2);
        assert_eq!(c.hess_evals, 0);

        // Probes leave the tallies alone.
        pool.probe_expected_loss(&w).unwrap();
        pool.probe_expected_grad(&w).unwrap();
        pool.probe_expected_hess(&w).unwrap();
        assert_eq!(pool.counts(), c);

        // Forked pools start from zero.
        let fork = pool.fork_counters();
        assert_eq!(fork.counts(), EvalCounts::default());
        assert_eq!(pool.counts(), c);
    }

    #[test]
    fn expected_values_on_the_offset_pair() {
        let pool = crate::losses::quadratic_pair_pool();
        // f(w) = ½(w²+1).
        assert_eq!(
            pool.expected_loss(&Vector::from_element(1, 0.0)).unwrap(),
            0.5
        );
        assert_eq!(
            pool.expected_grad(&Vector::from_element(1, 2.0)).unwrap()[0],
            2.0
        );
        assert_eq!(
            pool.expected_grad(&Vector::from_element(1, 0.0)).unwrap()[0],
            0.0
        );
    }

    #[test]
    fn expected_grad_dimension_check() {
        let pool = TaskPool::uniform(vec![half_square()]).unwrap();
        let w = Vector::zeros(3);
        match pool.expected_grad(&w) {
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 3,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
