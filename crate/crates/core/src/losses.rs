//! Concrete task losses: quadratics from linear regression, the scalar
//! sinusoidal-quadratic family, the smoothed hinge, and a finite-difference
//! fallback for value-only losses.

use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::task_model::{Loss, Matrix, TaskPool, Vector};

/// Base scale for central-difference gradients; multiplied by `max(1, ‖w‖∞)`.
pub const FD_GRAD_STEP: f64 = 1e-5;
/// Base scale for central-difference Hessians; multiplied by `max(1, ‖w‖∞)`.
pub const FD_HESS_STEP: f64 = 1e-4;

/// Strong-convexity modulus certified for [`counterexample_pool`].
pub const COUNTEREXAMPLE_MU: f64 = 0.01;
/// Smoothness constant certified for [`counterexample_pool`].
pub const COUNTEREXAMPLE_L: f64 = 2.01;

/// `f(w) = ½ wᵀHw + bᵀw + c` with symmetric positive semidefinite `H`.
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    h: Matrix,
    b: Vector,
    c: f64,
}

impl QuadraticLoss {
    /// Builds a quadratic, enforcing symmetry and (approximate) positive
    /// semidefiniteness of `H`.
    pub fn new(h: Matrix, b: Vector, c: f64) -> Result<Self> {
        let d = b.len();
        if h.nrows() != d || h.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: h.nrows(),
            });
        }
        if d == 0 {
            return Err(Error::InvalidArgument {
                name: "b".to_string(),
                reason: "dimension must be at least 1".to_string(),
            });
        }
        if h.iter().any(|x| !x.is_finite()) || b.iter().any(|x| !x.is_finite()) || !c.is_finite() {
            return Err(Error::NonFinite {
                context: "quadratic loss coefficients".to_string(),
            });
        }
        let scale = h.amax().max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (h[(i, j)] - h[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidArgument {
                        name: "H".to_string(),
                        reason: "matrix must be symmetric".to_string(),
                    });
                }
            }
        }
        let min_eig = SymmetricEigen::new(h.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 * scale {
            return Err(Error::InvalidArgument {
                name: "H".to_string(),
                reason: format!("matrix must be positive semidefinite (min eigenvalue {min_eig})"),
            });
        }
        Ok(QuadraticLoss { h, b, c })
    }

    /// `½ s ‖w‖²` in dimension `d`.
    pub fn isotropic(d: usize, s: f64) -> Self {
        QuadraticLoss {
            h: Matrix::identity(d, d) * s,
            b: Vector::zeros(d),
            c: 0.0,
        }
    }

    /// `½ s ‖w − center‖²`.
    pub fn shifted_isotropic(center: &Vector, s: f64) -> Self {
        let d = center.len();
        QuadraticLoss {
            h: Matrix::identity(d, d) * s,
            b: center * (-s),
            c: 0.5 * s * center.dot(center),
        }
    }

    pub fn hessian(&self) -> &Matrix {
        &self.h
    }

    pub fn linear(&self) -> &Vector {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    /// Solves `Hw = -b`; `None` when `H` is singular.
    pub fn minimizer(&self) -> Option<Vector> {
        self.h.clone().cholesky().map(|ch| ch.solve(&(-&self.b)))
    }

    /// Extreme eigenvalues of `H` as `(min, max)`.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.h.clone()).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

impl Loss for QuadraticLoss {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, w: &Vector) -> f64 {
        0.5 * (&self.h * w).dot(w) + self.b.dot(w) + self.c
    }

    fn grad(&self, w: &Vector) -> Vector {
        &self.h * w + &self.b
    }

    fn hess(&self, _w: &Vector) -> Matrix {
        self.h.clone()
    }

    fn as_quadratic(&self) -> Option<&QuadraticLoss> {
        Some(self)
    }
}

/// Mean-squared linear-regression loss `f(γ) = (1/(2n)) ‖y − Xγ‖²` as a
/// quadratic with `H = XᵀX/n`, `b = −Xᵀy/n`, `c = yᵀy/(2n)`.
///
/// The 1/n scaling keeps the smoothness constant of order one for
/// standard-normal designs, so order-one step sizes stay stable.
pub fn quadratic_from_regression(x: &Matrix, y: &Vector) -> Result<QuadraticLoss> {
    let n = x.nrows();
    if n == 0 || n != y.len() {
        return Err(Error::InvalidArgument {
            name: "X".to_string(),
            reason: format!(
                "need rows(X) = len(y) >= 1 (got {} rows, {} labels)",
                n,
                y.len()
            ),
        });
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "regression data".to_string(),
        });
    }
    let nf = n as f64;
    let h = x.transpose() * x / nf;
    let b = -(x.transpose() * y) / nf;
    let c = y.dot(y) / (2.0 * nf);
    QuadraticLoss::new(h, b, c)
}

/// Scalar `f(w) = a·w² + amp·sin(freq·w)`.
#[derive(Debug, Clone, Copy)]
pub struct SinusoidalQuadraticLoss {
    pub a: f64,
    pub amp: f64,
    pub freq: f64,
}

impl SinusoidalQuadraticLoss {
    pub fn new(a: f64, amp: f64, freq: f64) -> Self {
        SinusoidalQuadraticLoss { a, amp, freq }
    }

    /// Range of `f''(w) = 2a − amp·freq²·sin(freq·w)` over all of ℝ.
    pub fn curvature_range(&self) -> (f64, f64) {
        let swing = (self.amp * self.freq * self.freq).abs();
        (2.0 * self.a - swing, 2.0 * self.a + swing)
    }
}

impl Loss for SinusoidalQuadraticLoss {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, w: &Vector) -> f64 {
        let x = w[0];
        self.a * x * x + self.amp * (self.freq * x).sin()
    }

    fn grad(&self, w: &Vector) -> Vector {
        let x = w[0];
        Vector::from_element(
            1,
            2.0 * self.a * x + self.amp * self.freq * (self.freq * x).cos(),
        )
    }

    fn hess(&self, w: &Vector) -> Matrix {
        let x = w[0];
        Matrix::from_element(
            1,
            1,
            2.0 * self.a - self.amp * self.freq * self.freq * (self.freq * x).sin(),
        )
    }
}

/// The two-task scalar pool whose meta-loss is non-convex at `α = 0.4`:
/// `f₁(w) = 0.505w² − sin(w)` and `f₂(w) = 0.505w² − 0.0001·sin(100w)`,
/// uniformly weighted. Both tasks are 0.01-strongly convex and 2.01-smooth
/// ([`COUNTEREXAMPLE_MU`], [`COUNTEREXAMPLE_L`]).
pub fn counterexample_pool() -> TaskPool {
    let f1 = SinusoidalQuadraticLoss::new(0.505, -1.0, 1.0);
    let f2 = SinusoidalQuadraticLoss::new(0.505, -0.0001, 100.0);
    TaskPool::uniform(vec![Arc::new(f1), Arc::new(f2)]).expect("fixed pool is valid")
}

/// Uniform two-task pool `{½(w−1)², ½(w+1)²}` in one dimension. The expected
/// loss is `½(w²+1)`, with `L = μ = σ = 1` and a meta-loss critical point at
/// the origin; most closed-form checks use it.
pub fn quadratic_pair_pool() -> TaskPool {
    let plus = QuadraticLoss::shifted_isotropic(&Vector::from_element(1, 1.0), 1.0);
    let minus = QuadraticLoss::shifted_isotropic(&Vector::from_element(1, -1.0), 1.0);
    TaskPool::uniform(vec![Arc::new(plus), Arc::new(minus)]).expect("fixed pool is valid")
}

/// Quadratically smoothed hinge classification loss
/// `f(w) = (1/n) Σ_j φ_δ(1 − y_j·x_jᵀw)` with
/// `φ_δ(z) = 0` for `z ≤ 0`, `z²/(2δ)` for `0 < z < δ`, and `z − δ/2` above.
///
/// The smoothing width `δ` makes the Hessian exist everywhere; `δ → 0`
/// recovers the plain hinge pointwise.
#[derive(Debug, Clone)]
pub struct SmoothedHingeLoss {
    x: Matrix,
    y: Vec<f64>,
    delta: f64,
}

fn phi(z: f64, delta: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z < delta {
        z * z / (2.0 * delta)
    } else {
        z - delta / 2.0
    }
}

fn phi_prime(z: f64, delta: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z < delta {
        z / delta
    } else {
        1.0
    }
}

fn phi_second(z: f64, delta: f64) -> f64 {
    if z > 0.0 && z < delta {
        1.0 / delta
    } else {
        0.0
    }
}

/// Builds the smoothed hinge, validating the `±1` labels and `δ > 0`.
pub fn smoothed_hinge(x: Matrix, y: Vec<f64>, delta: f64) -> Result<SmoothedHingeLoss> {
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::InvalidArgument {
            name: "X".to_string(),
            reason: format!(
                "need rows(X) = len(y) >= 1 (got {} rows, {} labels)",
                x.nrows(),
                y.len()
            ),
        });
    }
    if y.iter().any(|v| *v != 1.0 && *v != -1.0) {
        return Err(Error::InvalidArgument {
            name: "y".to_string(),
            reason: "labels must be +1 or -1".to_string(),
        });
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument {
            name: "delta".to_string(),
            reason: format!("smoothing width must be positive (got {delta})"),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "hinge data".to_string(),
        });
    }
    Ok(SmoothedHingeLoss { x, y, delta })
}

impl SmoothedHingeLoss {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn num_samples(&self) -> usize {
        self.x.nrows()
    }

    /// `(positive, negative)` label counts.
    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|v| **v == 1.0).count();
        (pos, self.y.len() - pos)
    }
}

impl Loss for SmoothedHingeLoss {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, w: &Vector) -> f64 {
        let n = self.x.nrows();
        let margins = &self.x * w;
        let mut acc = 0.0;
        for j in 0..n {
            acc += phi(1.0 - self.y[j] * margins[j], self.delta);
        }
        acc / n as f64
    }

    fn grad(&self, w: &Vector) -> Vector {
        let n = self.x.nrows();
        let margins = &self.x * w;
        let mut acc = Vector::zeros(self.dim());
        for j in 0..n {
            let z = 1.0 - self.y[j] * margins[j];
            let dp = phi_prime(z, self.delta);
            if dp != 0.0 {
                acc.axpy(-dp * self.y[j], &self.x.row(j).transpose(), 1.0);
            }
        }
        acc / n as f64
    }

    fn hess(&self, w: &Vector) -> Matrix {
        let n = self.x.nrows();
        let d = self.dim();
        let margins = &self.x * w;
        let mut acc = Matrix::zeros(d, d);
        for j in 0..n {
            let z = 1.0 - self.y[j] * margins[j];
            let ddp = phi_second(z, self.delta);
            if ddp != 0.0 {
                let xj = self.x.row(j).transpose();
                // y_j² = 1, so the label drops out of the outer product.
                acc.ger(ddp, &xj, &xj, 1.0);
            }
        }
        acc / n as f64
    }

    fn as_hinge(&self) -> Option<&SmoothedHingeLoss> {
        Some(self)
    }
}

/// Value-only loss with central-difference gradient and Hessian.
pub struct FiniteDiffLoss {
    value_fn: Box<dyn Fn(&Vector) -> f64 + Send + Sync>,
    dim: usize,
    /// Base gradient step, scaled by `max(1, ‖w‖∞)` at evaluation.
    pub h_grad: f64,
    /// Base Hessian step, scaled the same way.
    pub h_hess: f64,
}

impl FiniteDiffLoss {
    pub fn new(dim: usize, value_fn: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        FiniteDiffLoss {
            value_fn: Box::new(value_fn),
            dim,
            h_grad: FD_GRAD_STEP,
            h_hess: FD_HESS_STEP,
        }
    }

    pub fn with_steps(mut self, h_grad: f64, h_hess: f64) -> Self {
        self.h_grad = h_grad;
        self.h_hess = h_hess;
        self
    }
}

fn step_scale(w: &Vector) -> f64 {
    w.amax().max(1.0)
}

impl Loss for FiniteDiffLoss {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &Vector) -> f64 {
        (self.value_fn)(w)
    }

    fn grad(&self, w: &Vector) -> Vector {
        finite_diff_grad(&*self.value_fn, w, self.h_grad * step_scale(w))
            .expect("finite-difference gradient overflowed")
    }

    fn hess(&self, w: &Vector) -> Matrix {
        finite_diff_hess(&*self.value_fn, w, self.h_hess * step_scale(w))
            .expect("finite-difference Hessian overflowed")
    }

    fn analytic_hessian(&self) -> bool {
        false
    }
}

/// Central-difference gradient of `f` at `w` with absolute step `h`.
pub fn finite_diff_grad(f: &dyn Fn(&Vector) -> f64, w: &Vector, h: f64) -> Result<Vector> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument {
            name: "h".to_string(),
            reason: format!("step must be positive (got {h})"),
        });
    }
    let d = w.len();
    let mut g = Vector::zeros(d);
    let mut probe = w.clone();
    for i in 0..d {
        let wi = w[i];
        probe[i] = wi + h;
        let fp = f(&probe);
        probe[i] = wi - h;
        let fm = f(&probe);
        probe[i] = wi;
        g[i] = (fp - fm) / (2.0 * h);
        if !g[i].is_finite() {
            return Err(Error::NonFinite {
                context: format!("finite-difference gradient, coordinate {i}"),
            });
        }
    }
    Ok(g)
}

/// Central-difference Hessian of `f` at `w`, symmetrized as `(A + Aᵀ)/2`.
pub fn finite_diff_hess(f: &dyn Fn(&Vector) -> f64, w: &Vector, h: f64) -> Result<Matrix> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument {
            name: "h".to_string(),
            reason: format!("step must be positive (got {h})"),
        });
    }
    let d = w.len();
    let mut a = Matrix::zeros(d, d);
    let mut probe = w.clone();
    let f0 = f(w);
    for i in 0..d {
        // Diagonal: (f(w+h e_i) - 2 f(w) + f(w-h e_i)) / h².
        let wi = w[i];
        probe[i] = wi + h;
        let fp = f(&probe);
        probe[i] = wi - h;
        let fm = f(&probe);
        probe[i] = wi;
        a[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..d {
            let wj = w[j];
            probe[i] = wi + h;
            probe[j] = wj + h;
            let fpp = f(&probe);
            probe[j] = wj - h;
            let fpm = f(&probe);
            probe[i] = wi - h;
            probe[j] = wj + h;
            let fmp = f(&probe);
            probe[j] = wj - h;
            let fmm = f(&probe);
            probe[i] = wi;
            probe[j] = wj;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "finite-difference Hessian".to_string(),
        });
    }
    // Already symmetric by construction here, but keep the contract explicit
    // for future stencils.
    let sym = (&a + a.transpose()) * 0.5;
    Ok(sym)
}

/// Convenience: central-difference gradient of a task kernel's value.
pub fn finite_diff_grad_of(loss: &dyn Loss, w: &Vector, h: f64) -> Result<Vector> {
    finite_diff_grad(&|u: &Vector| loss.value(u), w, h)
}

/// Convenience: central-difference Hessian of a task kernel's value.
pub fn finite_diff_hess_of(loss: &dyn Loss, w: &Vector, h: f64) -> Result<Matrix> {
    finite_diff_hess(&|u: &Vector| loss.value(u), w, h)
}
