//! The meta-loss `F(w) = E_i f_i(w − α∇f_i(w))`, its exact gradient via the
//! chain rule with the Hessian correction, the first-order approximation that
//! drops the correction, and the Hessian of `F`.
//!
//! Per-task terms are independent and evaluated through [`crate::parallel`];
//! the weighted reduction runs in a fixed order, so results are
//! bit-reproducible regardless of thread count.

use crate::error::{Error, Result};
use crate::losses::QuadraticLoss;
use crate::task_model::{Matrix, Task, TaskPool, Vector};

/// The Hessian correction factor `A_i(w) = I − α∇²f_i(w)`.
///
/// For an `L`-smooth, `μ`-strongly convex task and `α ≤ 1/(2L)` its
/// eigenvalues lie in `[1−αL, 1−αμ] ⊂ (0, 1)`.
pub struct CorrectionMatrix {
    a: Matrix,
}

impl CorrectionMatrix {
    /// Counted construction (charges one Hessian evaluation on the task).
    pub fn new(task: &Task, alpha: f64, w: &Vector) -> Self {
        Self::build(task.hess(w), alpha)
    }

    /// Uncounted construction.
    pub fn probe(task: &Task, alpha: f64, w: &Vector) -> Self {
        Self::build(task.probe_hess(w), alpha)
    }

    fn build(hess: Matrix, alpha: f64) -> Self {
        let d = hess.nrows();
        let mut a = hess * (-alpha);
        for i in 0..d {
            a[(i, i)] += 1.0;
        }
        CorrectionMatrix { a }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        nalgebra::SymmetricEigen::new(self.a.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect()
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.a * v
    }
}

fn ensure_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidArgument {
            name: "alpha".to_string(),
            reason: format!("must be finite and non-negative (got {alpha})"),
        });
    }
    Ok(())
}

fn ensure_finite_vec(v: &Vector, context: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: context.to_string(),
        });
    }
    Ok(())
}

pub(crate) fn inner_step_c(task: &Task, alpha: f64, w: &Vector, count: bool) -> Result<Vector> {
    ensure_alpha(alpha)?;
    let g = task.grad_c(w, count);
    ensure_finite_vec(&g, "inner_step gradient")?;
    Ok(w - g * alpha)
}

/// One task-adaptation step `w − α∇f_i(w)`; charges one gradient evaluation.
pub fn inner_step(task: &Task, alpha: f64, w: &Vector) -> Result<Vector> {
    inner_step_c(task, alpha, w, true)
}

fn maml_task_loss_c(task: &Task, alpha: f64, w: &Vector, count: bool) -> Result<f64> {
    let inner = inner_step_c(task, alpha, w, count)?;
    let v = task.value_c(&inner, count);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            context: "maml_task_loss".to_string(),
        });
    }
    Ok(v)
}

/// Per-task meta-loss `F_i(w) = f_i(w − α∇f_i(w))`.
pub fn maml_task_loss(task: &Task, alpha: f64, w: &Vector) -> Result<f64> {
    maml_task_loss_c(task, alpha, w, true)
}

fn maml_task_grad_c(task: &Task, alpha: f64, w: &Vector, count: bool) -> Result<Vector> {
    let correction = if count {
        CorrectionMatrix::new(task, alpha, w)
    } else {
        CorrectionMatrix::probe(task, alpha, w)
    };
    let inner = inner_step_c(task, alpha, w, count)?;
    let g_inner = task.grad_c(&inner, count);
    let g = correction.apply(&g_inner);
    ensure_finite_vec(&g, "maml_task_grad")?;
    Ok(g)
}

/// Per-task meta-gradient `∇F_i(w) = A_i(w)·∇f_i(w − α∇f_i(w))`.
///
/// Charges one Hessian evaluation (at `w`) and two gradient evaluations (at
/// `w` and at the adapted point).
pub fn maml_task_grad(task: &Task, alpha: f64, w: &Vector) -> Result<Vector> {
    maml_task_grad_c(task, alpha, w, true)
}

fn fo_maml_task_grad_c(task: &Task, alpha: f64, w: &Vector, count: bool) -> Result<Vector> {
    let inner = inner_step_c(task, alpha, w, count)?;
    let g = task.grad_c(&inner, count);
    ensure_finite_vec(&g, "fo_maml_task_grad")?;
    Ok(g)
}

fn weighted_vector_sum(pool: &TaskPool, terms: Vec<Result<Vector>>) -> Result<Vector> {
    let mut acc = Vector::zeros(pool.dim());
    for (p, term) in pool.weights().iter().zip(terms) {
        acc.axpy(*p, &term?, 1.0);
    }
    Ok(acc)
}

pub(crate) fn maml_loss_c(pool: &TaskPool, alpha: f64, w: &Vector, count: bool) -> Result<f64> {
    pool.check_dim(w)?;
    ensure_alpha(alpha)?;
    let terms =
        crate::parallel::map_collect(pool.tasks(), |t| maml_task_loss_c(t, alpha, w, count));
    let mut acc = 0.0;
    for (p, term) in pool.weights().iter().zip(terms) {
        acc += p * term?;
    }
    Ok(acc)
}

/// Meta-loss `F(w)`, the weighted sum of per-task meta-losses.
pub fn maml_loss(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<f64> {
    maml_loss_c(pool, alpha, w, true)
}

/// Uncounted meta-loss, for instrumentation and diagnostics.
pub fn probe_maml_loss(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<f64> {
    maml_loss_c(pool, alpha, w, false)
}

pub(crate) fn maml_grad_c(pool: &TaskPool, alpha: f64, w: &Vector, count: bool) -> Result<Vector> {
    pool.check_dim(w)?;
    ensure_alpha(alpha)?;
    let terms =
        crate::parallel::map_collect(pool.tasks(), |t| maml_task_grad_c(t, alpha, w, count));
    weighted_vector_sum(pool, terms)
}

/// Meta-gradient `∇F(w) = E_i[A_i(w)·∇f_i(w − α∇f_i(w))]`.
///
/// Charges, per task, one Hessian evaluation and two gradient evaluations.
pub fn maml_grad(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<Vector> {
    maml_grad_c(pool, alpha, w, true)
}

/// Uncounted meta-gradient.
pub fn probe_maml_grad(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<Vector> {
    maml_grad_c(pool, alpha, w, false)
}

pub(crate) fn fo_maml_grad_c(
    pool: &TaskPool,
    alpha: f64,
    w: &Vector,
    count: bool,
) -> Result<Vector> {
    pool.check_dim(w)?;
    ensure_alpha(alpha)?;
    let terms =
        crate::parallel::map_collect(pool.tasks(), |t| fo_maml_task_grad_c(t, alpha, w, count));
    weighted_vector_sum(pool, terms)
}

/// First-order meta-gradient `E_i[∇f_i(w − α∇f_i(w))]`: the correction
/// `I − α∇²f_i` is replaced by the identity, so no Hessians are evaluated.
pub fn fo_maml_grad(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<Vector> {
    fo_maml_grad_c(pool, alpha, w, true)
}

/// Uncounted first-order meta-gradient.
pub fn probe_fo_maml_grad(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<Vector> {
    fo_maml_grad_c(pool, alpha, w, false)
}

fn all_quadratic(pool: &TaskPool) -> Option<Vec<&QuadraticLoss>> {
    pool.tasks()
        .iter()
        .map(|t| t.kernel().as_quadratic())
        .collect()
}

fn maml_hess_c(pool: &TaskPool, alpha: f64, w: &Vector, count: bool) -> Result<Matrix> {
    pool.check_dim(w)?;
    ensure_alpha(alpha)?;
    let d = pool.dim();
    if all_quadratic(pool).is_some() {
        // F_i is itself quadratic: Hess F_i = (I − αH_i)² H_i, exactly and
        // independently of w.
        let mut acc = Matrix::zeros(d, d);
        for (p, task) in pool.weights().iter().zip(pool.tasks()) {
            let h = task.hess_c(w, count);
            let mut a = &h * (-alpha);
            for i in 0..d {
                a[(i, i)] += 1.0;
            }
            acc += (&a * &a) * &h * *p;
        }
        return Ok(acc);
    }
    // General case: centered differences of ∇F, symmetrized. The exact Hess F
    // would need third derivatives of the task losses.
    let h = crate::losses::FD_HESS_STEP * w.norm().max(1.0);
    let mut a = Matrix::zeros(d, d);
    let mut probe = w.clone();
    for j in 0..d {
        let wj = w[j];
        probe[j] = wj + h;
        let gp = maml_grad_c(pool, alpha, &probe, count)?;
        probe[j] = wj - h;
        let gm = maml_grad_c(pool, alpha, &probe, count)?;
        probe[j] = wj;
        let col = (gp - gm) / (2.0 * h);
        a.set_column(j, &col);
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "maml_hess".to_string(),
        });
    }
    Ok((&a + a.transpose()) * 0.5)
}

/// Hessian of the meta-loss.
///
/// Exact for all-quadratic pools (`Σ p_i (I−αH_i)² H_i`); centered
/// differences of [`maml_grad`] otherwise.
pub fn maml_hess(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<Matrix> {
    maml_hess_c(pool, alpha, w, true)
}

/// Uncounted meta-loss Hessian.
pub fn probe_maml_hess(pool: &TaskPool, alpha: f64, w: &Vector) -> Result<Matrix> {
    maml_hess_c(pool, alpha, w, false)
}
