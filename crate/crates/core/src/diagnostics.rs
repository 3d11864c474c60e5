//! Smoothness-constant estimation and every closed-form convergence bound,
//! verified numerically along trajectories and over regions.
//!
//! Constants (`L`, `μ`, `κ`, `σ`) are certified on an explicit box region:
//! the gradient-variance bound depends on where the iterates live whenever
//! task curvatures differ, so a global certificate may not exist. Checks that
//! walk a trajectory therefore certify on the box hull of its iterates plus a
//! margin.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{maml_ode_field, rk4_integrate, StopRule};
use crate::meta_grad::{probe_maml_grad, probe_maml_hess};
use crate::task_model::{Matrix, TaskPool, Termination, Trajectory, Vector};

// ---------------------------------------------------------------------------
// Regions and deterministic probing
// ---------------------------------------------------------------------------

const PRIMES: [u64; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311,
];

/// Radical-inverse (Halton) coordinate for 1-based `index` in the given base.
pub fn halton(index: u64, base: u64) -> f64 {
    let mut i = index;
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Axis-aligned box region.
#[derive(Debug, Clone, Serialize)]
pub struct Region {
    pub lo: Vector,
    pub hi: Vector,
}

impl Region {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let coords_ok = lo
            .iter()
            .zip(hi.iter())
            .all(|(a, b)| a.is_finite() && b.is_finite() && a <= b);
        if lo.is_empty() || !coords_ok {
            return Err(Error::InvalidArgument {
                name: "region".to_string(),
                reason: "need finite lo <= hi in every coordinate".to_string(),
            });
        }
        if lo.len() > PRIMES.len() {
            return Err(Error::InvalidArgument {
                name: "region".to_string(),
                reason: format!("probing supports dimension up to {}", PRIMES.len()),
            });
        }
        Ok(Region { lo, hi })
    }

    /// Cube `[center − h, center + h]^d`.
    pub fn cube(center: &Vector, half_width: f64) -> Result<Self> {
        Region::new(
            center.map(|x| x - half_width),
            center.map(|x| x + half_width),
        )
    }

    /// Bounding box of `points`, padded per coordinate by
    /// `margin · max(width, 1)`.
    pub fn hull<'a>(points: impl IntoIterator<Item = &'a Vector>, margin: f64) -> Result<Self> {
        let mut iter = points.into_iter();
        let first = iter.next().ok_or_else(|| Error::InvalidArgument {
            name: "points".to_string(),
            reason: "hull needs at least one point".to_string(),
        })?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in iter {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        for i in 0..lo.len() {
            let pad = margin * (hi[i] - lo[i]).max(1.0);
            lo[i] -= pad;
            hi[i] += pad;
        }
        Region::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vector {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn contains(&self, w: &Vector, tol: f64) -> bool {
        w.len() == self.dim()
            && (0..w.len()).all(|i| w[i] >= self.lo[i] - tol && w[i] <= self.hi[i] + tol)
    }

    /// The `index`-th point of the Halton sequence mapped into the box
    /// (1-based index; deterministic).
    pub fn halton_point(&self, index: u64) -> Vector {
        let d = self.dim();
        Vector::from_fn(d, |i, _| {
            self.lo[i] + halton(index, PRIMES[i]) * (self.hi[i] - self.lo[i])
        })
    }

    /// Vertex selected by the sign pattern `signs` (true picks `hi`).
    fn vertex(&self, signs: &[bool]) -> Vector {
        Vector::from_fn(
            self.dim(),
            |i, _| if signs[i] { self.hi[i] } else { self.lo[i] },
        )
    }
}

fn spectral_norm_sym(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn eigen_range_sym(m: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Gradient variance `E_i ‖∇f_i(w) − ∇f(w)‖²` at a point (uncounted).
pub fn variance_at(pool: &TaskPool, w: &Vector) -> Result<f64> {
    pool.check_dim(w)?;
    let grads = crate::parallel::map_collect(pool.tasks(), |t| t.probe_grad(w));
    let mut mean = Vector::zeros(pool.dim());
    for (p, g) in pool.weights().iter().zip(&grads) {
        mean.axpy(*p, g, 1.0);
    }
    let mut var = 0.0;
    for (p, g) in pool.weights().iter().zip(&grads) {
        var += p * (g - &mean).norm_squared();
    }
    Ok(var)
}

// ---------------------------------------------------------------------------
// Smoothness constants
// ---------------------------------------------------------------------------

/// Certified constants on a region: `L`-smoothness, `μ`-strong convexity,
/// `κ`-Hessian-Lipschitz, and the gradient-variance bound `σ`.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessConstants {
    pub l: f64,
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    /// Box the certificate covers.
    pub region: Region,
    /// Minimum of the expected loss, when it was computable.
    pub f_star: Option<f64>,
    /// Argmin of the expected loss, when computable.
    pub w_star: Option<Vector>,
    /// True when every constant came from a closed form rather than sampling.
    pub exact: bool,
}

impl SmoothnessConstants {
    /// Errors unless `μ > 0`.
    pub fn require_strongly_convex(&self) -> Result<&Self> {
        if self.mu <= 0.0 {
            return Err(Error::NotStronglyConvex { mu: self.mu });
        }
        Ok(self)
    }
}

/// Exact sup over a box of the convex quadratic
/// `g(w) = wᵀPw + 2qᵀw + r` by enumerating all vertices. Only used for
/// small dimension.
fn quadratic_box_sup_exact(p: &Matrix, q: &Vector, r: f64, region: &Region) -> f64 {
    let d = region.dim();
    let mut best = f64::NEG_INFINITY;
    let mut signs = vec![false; d];
    for mask in 0u64..(1u64 << d) {
        for (i, s) in signs.iter_mut().enumerate() {
            *s = (mask >> i) & 1 == 1;
        }
        let w = region.vertex(&signs);
        let val = (p * &w).dot(&w) + 2.0 * q.dot(&w) + r;
        best = best.max(val);
    }
    best
}

/// Greedy sign-flip ascent over box vertices from seeded random starts; the
/// maximum of a convex function over a box sits at a vertex, so this is a
/// strong heuristic when full enumeration is too wide.
fn quadratic_box_sup_ascent(
    p: &Matrix,
    q: &Vector,
    r: f64,
    region: &Region,
    restarts: usize,
) -> f64 {
    let d = region.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(0x5157_5550);
    let mut best = f64::NEG_INFINITY;
    let eval = |signs: &[bool]| {
        let w = region.vertex(signs);
        (p * &w).dot(&w) + 2.0 * q.dot(&w) + r
    };
    for _ in 0..restarts {
        let mut signs: Vec<bool> = (0..d).map(|_| rng.random::<bool>()).collect();
        let mut val = eval(&signs);
        loop {
            let mut improved = false;
            for i in 0..d {
                signs[i] = !signs[i];
                let cand = eval(&signs);
                if cand > val {
                    val = cand;
                    improved = true;
                } else {
                    signs[i] = !signs[i];
                }
            }
            if !improved {
                break;
            }
        }
        best = best.max(val);
    }
    best
}

/// Widest dimension for which the box-sup of the variance is enumerated
/// exactly.
const VERTEX_ENUM_MAX_DIM: usize = 16;

fn quadratic_constants(pool: &TaskPool, region: &Region) -> SmoothnessConstants {
    let d = pool.dim();
    let origin = Vector::zeros(d);
    let mut l = f64::NEG_INFINITY;
    let mut mu = f64::INFINITY;
    let mut h_mean = Matrix::zeros(d, d);
    let mut b_mean = Vector::zeros(d);
    for (p, task) in pool.weights().iter().zip(pool.tasks()) {
        let q = task
            .kernel()
            .as_quadratic()
            .expect("caller checked the pool is quadratic");
        let (lo, hi) = q.eigen_range();
        mu = mu.min(lo);
        l = l.max(hi);
        h_mean += q.hessian() * *p;
        b_mean.axpy(*p, q.linear(), 1.0);
    }
    let _ = origin;

    // Variance is itself a convex quadratic in w:
    //   E‖(H_i − H̄)w + (b_i − b̄)‖² = wᵀPw + 2qᵀw + r.
    let mut p_mat = Matrix::zeros(d, d);
    let mut q_vec = Vector::zeros(d);
    let mut r_const = 0.0;
    for (p, task) in pool.weights().iter().zip(pool.tasks()) {
        let q = task.kernel().as_quadratic().unwrap();
        let dh = q.hessian() - &h_mean;
        let db = q.linear() - &b_mean;
        p_mat += dh.transpose() * &dh * *p;
        q_vec.axpy(*p, &(dh.transpose() * &db), 1.0);
        r_const += p * db.norm_squared();
    }
    let exact_sup = d <= VERTEX_ENUM_MAX_DIM;
    let sigma_sq = if exact_sup {
        quadratic_box_sup_exact(&p_mat, &q_vec, r_const, region)
    } else {
        quadratic_box_sup_ascent(&p_mat, &q_vec, r_const, region, 128)
    };

    let w_star = h_mean.clone().cholesky().map(|ch| ch.solve(&(-&b_mean)));
    let f_star = w_star
        .as_ref()
        .and_then(|w| pool.probe_expected_loss(w).ok());

    SmoothnessConstants {
        l,
        mu,
        kappa: 0.0,
        sigma: sigma_sq.max(0.0).sqrt(),
        region: region.clone(),
        f_star,
        w_star,
        exact: exact_sup,
    }
}

fn sampled_constants(pool: &TaskPool, region: &Region, samples: usize) -> SmoothnessConstants {
    let n = samples.max(16);

    struct ProbeStats {
        mu: f64,
        l: f64,
        var: f64,
    }
    let stats = crate::parallel::map_range(n, |i| {
        let w = region.halton_point(i as u64 + 1);
        let mut mu = f64::INFINITY;
        let mut l = f64::NEG_INFINITY;
        for task in pool.tasks() {
            let (lo, hi) = eigen_range_sym(&task.probe_hess(&w));
            mu = mu.min(lo);
            l = l.max(hi);
        }
        let var = variance_at(pool, &w).unwrap_or(f64::NAN);
        ProbeStats { mu, l, var }
    });
    let mut mu = f64::INFINITY;
    let mut l = f64::NEG_INFINITY;
    let mut sigma_sq = 0.0f64;
    for s in &stats {
        mu = mu.min(s.mu);
        l = l.max(s.l);
        sigma_sq = sigma_sq.max(s.var);
    }

    // Hessian Lipschitz constant from difference quotients over random pairs,
    // with log-spaced separations so short-range oscillation is seen.
    let widths: Vec<f64> = (0..region.dim())
        .map(|i| region.hi[i] - region.lo[i])
        .collect();
    let max_width = widths.iter().cloned().fold(1e-8f64, f64::max);
    let pairs = 5000usize;
    let kappas = crate::parallel::map_range(pairs, |k| {
        let mut rng = ChaCha12Rng::seed_from_u64(0x6b61_7070 ^ k as u64);
        let w = region.halton_point(k as u64 + 1);
        let mut dir = Vector::from_fn(region.dim(), |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let norm = dir.norm();
        if norm == 0.0 {
            return 0.0;
        }
        dir /= norm;
        let exponent = rng.random_range(-4.0..0.0);
        let delta = max_width * 10f64.powf(exponent);
        let mut u = &w + dir * delta;
        for i in 0..u.len() {
            u[i] = u[i].clamp(region.lo[i], region.hi[i]);
        }
        let dist = (&u - &w).norm();
        if dist < 1e-12 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for task in pool.tasks() {
            let diff = task.probe_hess(&w) - task.probe_hess(&u);
            worst = worst.max(spectral_norm_sym(&diff) / dist);
        }
        worst
    });
    let kappa = kappas.into_iter().fold(0.0f64, f64::max);

    // Minimum of f by plain descent at step 1/L, when the pool is strongly
    // convex enough for it to converge.
    let (w_star, f_star) = if mu > 1e-9 && l.is_finite() && l > 0.0 {
        let mut w = region.center();
        let step = 1.0 / l;
        let mut converged = false;
        for _ in 0..500_000 {
            let g = match pool.probe_expected_grad(&w) {
                Ok(g) => g,
                Err(_) => break,
            };
            if g.norm() <= 1e-12 {
                converged = true;
                break;
            }
            w.axpy(-step, &g, 1.0);
        }
        if converged {
            let f = pool.probe_expected_loss(&w).ok();
            (Some(w), f)
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };

    SmoothnessConstants {
        l,
        mu,
        kappa,
        sigma: sigma_sq.max(0.0).sqrt(),
        region: region.clone(),
        f_star,
        w_star,
        exact: false,
    }
}

/// Estimates the constants on `region` without gating on strong convexity.
///
/// All-quadratic pools get exact `L`, `μ`, `κ = 0` from eigendecompositions
/// and the variance sup from its closed quadratic form (vertex enumeration up
/// to dimension 16, greedy vertex ascent above). Anything else is sampled on
/// `samples` Halton probes.
pub fn estimate_constants_raw(
    pool: &TaskPool,
    region: &Region,
    samples: usize,
) -> Result<SmoothnessConstants> {
    if region.dim() != pool.dim() {
        return Err(Error::DimensionMismatch {
            expected: pool.dim(),
            got: region.dim(),
        });
    }
    let all_quadratic = pool
        .tasks()
        .iter()
        .all(|t| t.kernel().as_quadratic().is_some());
    let c = if all_quadratic {
        quadratic_constants(pool, region)
    } else {
        sampled_constants(pool, region, samples)
    };
    if !c.l.is_finite() || !c.sigma.is_finite() {
        return Err(Error::NonFinite {
            context: "constant estimation".to_string(),
        });
    }
    Ok(c)
}

/// Estimates the constants on `region`; errors unless the pool is strongly
/// convex there.
pub fn estimate_constants(
    pool: &TaskPool,
    region: &Region,
    samples: usize,
) -> Result<SmoothnessConstants> {
    let c = estimate_constants_raw(pool, region, samples)?;
    c.require_strongly_convex()?;
    Ok(c)
}

/// Constants certified for a set of trajectories: the region is the box hull
/// of every iterate plus a 10% margin, and `σ` is additionally floored by the
/// exact per-sample variance, so trajectory-wise bound checks are sound even
/// when the box sup was sampled.
pub fn constants_for_trajectories(
    pool: &TaskPool,
    trajectories: &[&Trajectory],
    samples: usize,
) -> Result<SmoothnessConstants> {
    let points = trajectories
        .iter()
        .flat_map(|t| t.samples.iter().map(|s| &s.w));
    let region = Region::hull(points, 0.10)?;
    let mut c = estimate_constants_raw(pool, &region, samples)?;
    let mut sigma_sq = c.sigma * c.sigma;
    for traj in trajectories {
        for s in &traj.samples {
            sigma_sq = sigma_sq.max(variance_at(pool, &s.w)?);
        }
    }
    c.sigma = sigma_sq.sqrt();
    Ok(c)
}

// ---------------------------------------------------------------------------
// Step-size bounds
// ---------------------------------------------------------------------------

fn div_or_inf(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Descent rate of the candidate function `‖∇f‖²` along the meta-loss flow:
/// `ζ = μ − (5/4)L²α(L³α² + 2L²α + 2)`.
pub fn descent_rate(c: &SmoothnessConstants, alpha: f64) -> f64 {
    let l = c.l;
    c.mu - 1.25 * l * l * alpha * (l.powi(3) * alpha * alpha + 2.0 * l * l * alpha + 2.0)
}

/// Step-size hypothesis for linear convergence of the meta-loss flow: the
/// minimum of six terms. The first three control the correction and variance
/// interplay; the last three force the descent rate past `μ/2`
/// (`(5/4)L⁵α³ < μ/6`, `(5/2)L⁴α² < μ/6`, `(5/2)L²α < μ/6`).
pub fn alpha_bound_maml_flow(c: &SmoothnessConstants) -> f64 {
    let (l, mu, kappa, sigma) = (c.l, c.mu, c.kappa, c.sigma);
    let t1 = 1.0 / (2.0 * l);
    let t2 = div_or_inf(
        mu.powf(1.5),
        36.0 * kappa * sigma + 28.0 * kappa * mu.sqrt() * sigma,
    );
    let t3 = div_or_inf(
        mu.powf(1.5),
        16.0 * l.sqrt() * kappa * sigma + 24.0 * kappa * mu.sqrt() * sigma,
    );
    let t4 = (2.0 / 15.0f64).powf(1.0 / 3.0) * mu.powf(1.0 / 3.0) * l.powf(-5.0 / 3.0);
    let t5 = (1.0 / 15.0f64).sqrt() * mu.sqrt() / (l * l);
    let t6 = mu / (15.0 * l * l);
    [t1, t2, t3, t4, t5, t6]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Step-size hypothesis for the biphasic flow's convergence, given the
/// phase-switch tolerance.
pub fn alpha_bound_biphasic_flow(c: &SmoothnessConstants, eps0: f64) -> f64 {
    let (l, mu, kappa, sigma) = (c.l, c.mu, c.kappa, c.sigma);
    let t1 = 1.0 / (2.0 * l);
    let t2 = div_or_inf(mu, 36.0 * kappa * eps0 + 28.0 * kappa * sigma);
    let t3 = div_or_inf(
        mu.powf(1.5),
        16.0 * l.sqrt() * kappa * sigma + 24.0 * kappa * mu.sqrt() * sigma,
    );
    [t1, t2, t3].into_iter().fold(f64::INFINITY, f64::min)
}

/// Step-size hypothesis under which the meta-loss Hessian is pinned inside
/// `[μ/8, 9L/8]` on the region `‖∇F‖ ≤ K`.
pub fn alpha_bound_strong_convexity(c: &SmoothnessConstants, k: f64) -> f64 {
    let t1 = 1.0 / (2.0 * c.l);
    let t2 = div_or_inf(c.mu, 8.0 * c.kappa * (2.0 * k + c.sigma));
    t1.min(t2)
}

/// Variant with the tighter `1/(4L)` cap used by the unique-global-minimum
/// result.
pub fn alpha_bound_unique_minimum(c: &SmoothnessConstants, k: f64) -> f64 {
    let t1 = 1.0 / (4.0 * c.l);
    let t2 = div_or_inf(c.mu, 8.0 * c.kappa * (2.0 * k + c.sigma));
    t1.min(t2)
}

// ---------------------------------------------------------------------------
// Descent inequality and envelope
// ---------------------------------------------------------------------------

/// Right-hand side of the descent inequality for `d/dt ½‖∇f‖²` along the
/// meta-loss flow: `−ζ·‖∇f‖² + σ²/2`.
pub fn lyapunov_rhs(c: &SmoothnessConstants, alpha: f64, gradf_norm_sq: f64) -> f64 {
    -descent_rate(c, alpha) * gradf_norm_sq + 0.5 * c.sigma * c.sigma
}

/// Outcome of a sampled check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeStatus {
    Pass,
    Fail,
    HypothesisViolated,
    Inconclusive,
}

/// Result of checking the descent inequality along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    /// Interior samples differenced.
    pub checked: usize,
    /// Samples whose finite-difference derivative exceeded the bound by more
    /// than `tol·(1 + ‖∇f‖²)`.
    pub violations: usize,
    /// Largest `(lhs − rhs)/(1 + ‖∇f‖²)` seen (negative when the bound holds
    /// with slack everywhere).
    pub max_scaled_margin: f64,
    pub tol: f64,
}

/// Central-differences `d/dt ½‖∇f(w(t))‖²` at every interior sample of a
/// finely integrated trajectory, compared against [`lyapunov_rhs`].
pub fn check_lyapunov(
    traj: &Trajectory,
    c: &SmoothnessConstants,
    alpha: f64,
    tol: f64,
) -> Result<LyapunovReport> {
    let n = traj.samples.len();
    if n < 3 {
        return Err(Error::TrajectoryTooShort { len: n });
    }
    let mut violations = 0usize;
    let mut max_scaled = f64::NEG_INFINITY;
    for k in 1..n - 1 {
        let prev = &traj.samples[k - 1];
        let here = &traj.samples[k];
        let next = &traj.samples[k + 1];
        let dt = next.t - prev.t;
        if dt <= 0.0 {
            continue;
        }
        let e_prev = prev.expected_grad_norm * prev.expected_grad_norm;
        let e_here = here.expected_grad_norm * here.expected_grad_norm;
        let e_next = next.expected_grad_norm * next.expected_grad_norm;
        let lhs = 0.5 * (e_next - e_prev) / dt;
        let rhs = lyapunov_rhs(c, alpha, e_here);
        let margin = lhs - rhs;
        let scale = 1.0 + e_here;
        max_scaled = max_scaled.max(margin / scale);
        if margin > tol * scale {
            violations += 1;
        }
    }
    Ok(LyapunovReport {
        checked: n - 2,
        violations,
        max_scaled_margin: max_scaled,
        tol,
    })
}

/// Parameters of the closed-form envelope on `‖∇f(w(t))‖²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopeParams {
    /// Decay rate `ζ`.
    pub zeta: f64,
    /// Source term `γ = σ²/2`.
    pub gamma: f64,
    /// Integration constant fixed by `e^{−ζc₀} = ζ·y(0) − γ`; absent when the
    /// start value already sits at or below the asymptote.
    pub c0: Option<f64>,
    /// Slack over the half rate, `ι = ζ − μ/2`.
    pub iota: f64,
}

/// Exponential envelope `y(t) = (e^{−ζ(t+c₀)} + γ)/ζ` bounding `‖∇f(w(t))‖²`
/// along the meta-loss flow.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub params: EnvelopeParams,
    y0: f64,
    /// `ζ·y0 − γ` when positive.
    coef: Option<f64>,
}

impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.params;
        match self.coef {
            Some(coef) => (coef * (-p.zeta * t).exp() + p.gamma) / p.zeta,
            // Start at or below the asymptote: the constant level is still an
            // upper bound because γ/ζ is the fixed point of the comparison
            // dynamics.
            None => self.y0.max(p.gamma / p.zeta),
        }
    }

    /// Limit `γ/ζ` as `t → ∞`.
    pub fn asymptote(&self) -> f64 {
        self.params.gamma / self.params.zeta
    }

    pub fn start(&self) -> f64 {
        self.y0
    }
}

/// Builds the envelope from the constants, the inner step size, and the start
/// value `y0 = ‖∇f(w(0))‖²`.
pub fn envelope(c: &SmoothnessConstants, alpha: f64, y0: f64) -> Result<Envelope> {
    let zeta = descent_rate(c, alpha);
    if zeta <= 0.0 {
        return Err(Error::EnvelopeUndefined { zeta });
    }
    let gamma = 0.5 * c.sigma * c.sigma;
    let iota = zeta - 0.5 * c.mu;
    let coef = zeta * y0 - gamma;
    let (coef, c0) = if coef > 0.0 {
        (Some(coef), Some(-coef.ln() / zeta))
    } else {
        (None, None)
    };
    Ok(Envelope {
        params: EnvelopeParams {
            zeta,
            gamma,
            c0,
            iota,
        },
        y0,
        coef,
    })
}

// ---------------------------------------------------------------------------
// Norm transfers
// ---------------------------------------------------------------------------

/// From `‖∇f(w)‖ ≤ G` to a bound on `‖∇F(w)‖`:
/// `(1 + 2αL + α²L²)·G + (2αL + α²L²)·σ`.
pub fn grad_norm_transfer_fwd(g: f64, c: &SmoothnessConstants, alpha: f64) -> f64 {
    let al = alpha * c.l;
    let q = 2.0 * al + al * al;
    (1.0 + q) * g + q * c.sigma
}

/// From `‖∇F(w)‖` back to a bound on `‖∇f(w)‖`:
/// `‖∇F‖/(1 − 2αL) + 2αLσ/(1 − 2αL)`, valid for `α < 1/(4L)`.
pub fn grad_norm_transfer_bwd(f_norm: f64, c: &SmoothnessConstants, alpha: f64) -> Result<f64> {
    if alpha >= 1.0 / (4.0 * c.l) {
        return Err(Error::HypothesisViolated {
            what: format!(
                "backward norm transfer needs alpha < 1/(4L) = {}",
                1.0 / (4.0 * c.l)
            ),
        });
    }
    let denom = 1.0 - 2.0 * alpha * c.l;
    Ok((f_norm + 2.0 * alpha * c.l * c.sigma) / denom)
}

// ---------------------------------------------------------------------------
// Hessian window and region membership
// ---------------------------------------------------------------------------

/// Result of probing meta-loss Hessian eigenvalues on `‖∇F‖ ≤ K`.
#[derive(Debug, Clone, Serialize)]
pub struct HessWindowReport {
    pub status: ProbeStatus,
    pub probes_used: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub alpha_bound: f64,
}

/// Samples points with `‖∇F(w)‖ ≤ K` (rejection sampling in growing cubes
/// around the expected-loss minimizer) and checks every meta-loss Hessian
/// eigenvalue against the window `[μ/8 − tol, 9L/8 + tol]`, `tol = 1e−6·L`.
///
/// The scan still runs when `α` exceeds its hypothesis; the report is then
/// marked hypothesis-violated rather than pass/fail.
pub fn hess_window_check(
    pool: &TaskPool,
    alpha: f64,
    c: &SmoothnessConstants,
    k: f64,
    n_probes: usize,
) -> Result<HessWindowReport> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidArgument {
            name: "K".to_string(),
            reason: format!("must be positive (got {k})"),
        });
    }
    let alpha_bound = alpha_bound_strong_convexity(c, k);
    let hypothesis_ok = alpha <= alpha_bound;

    let center = c.w_star.clone().unwrap_or_else(|| c.region.center());
    let mut accepted: Vec<Vector> = Vec::with_capacity(n_probes);
    'outer: for radius_pow in 0..6 {
        let radius = (1 << radius_pow) as f64;
        let region = Region::cube(&center, radius)?;
        let candidates = crate::parallel::map_range(n_probes * 20, |i| {
            let w = region.halton_point(i as u64 + 1);
            let ok = probe_maml_grad(pool, alpha, &w)
                .map(|g| g.norm() <= k)
                .unwrap_or(false);
            (w, ok)
        });
        for (w, ok) in candidates {
            if ok {
                accepted.push(w);
                if accepted.len() >= n_probes {
                    break 'outer;
                }
            }
        }
    }

    if accepted.is_empty() {
        return Ok(HessWindowReport {
            status: ProbeStatus::Inconclusive,
            probes_used: 0,
            min_eig: f64::NAN,
            max_eig: f64::NAN,
            window_lo: c.mu / 8.0,
            window_hi: 9.0 * c.l / 8.0,
            alpha_bound,
        });
    }

    let ranges = crate::parallel::map_collect(&accepted, |w| {
        probe_maml_hess(pool, alpha, w).map(|h| eigen_range_sym(&h))
    });
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    for r in ranges {
        let (lo, hi) = r?;
        min_eig = min_eig.min(lo);
        max_eig = max_eig.max(hi);
    }

    let tol = 1e-6 * c.l;
    let window_lo = c.mu / 8.0;
    let window_hi = 9.0 * c.l / 8.0;
    let inside = min_eig >= window_lo - tol && max_eig <= window_hi + tol;
    let status = if !hypothesis_ok {
        ProbeStatus::HypothesisViolated
    } else if inside {
        ProbeStatus::Pass
    } else {
        ProbeStatus::Fail
    };
    Ok(HessWindowReport {
        status,
        probes_used: accepted.len(),
        min_eig,
        max_eig,
        window_lo,
        window_hi,
        alpha_bound,
    })
}

/// Membership in the stationarity region `U(K) = {‖∇F(w)‖ ≤ K}` and the
/// sublevel set `V(c) = {f(w) − f* ≤ c}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegionMembership {
    pub in_u: bool,
    pub in_v: bool,
}

pub fn region_membership(
    pool: &TaskPool,
    c: &SmoothnessConstants,
    alpha: f64,
    w: &Vector,
    k: f64,
    v_level: f64,
) -> Result<RegionMembership> {
    let f_star = c.f_star.ok_or_else(|| Error::Missing {
        what: "f_star in smoothness constants".to_string(),
    })?;
    let in_u = probe_maml_grad(pool, alpha, w)?.norm() <= k;
    let in_v = pool.probe_expected_loss(w)? - f_star <= v_level;
    Ok(RegionMembership { in_u, in_v })
}

// ---------------------------------------------------------------------------
// Time bounds
// ---------------------------------------------------------------------------

fn log_or_zero(arg: f64) -> f64 {
    if arg > 1.0 {
        arg.ln()
    } else {
        0.0
    }
}

/// Proof-level time bound for the meta-loss flow to reach `‖∇F‖ ≤ eps`:
/// a large-gradient phase `(2/μ)·log((μ²‖∇f(0)‖² − μσ²/2)/(ισ²))` (skipped
/// when `‖∇f(0)‖² ≤ σ²/μ`) plus `(16/μ)·log((5 + 9/√μ)σ/(4ε))`.
///
/// `None` when the expression degenerates: `σ = 0` (the log arguments lose
/// meaning) or `ι = ζ − μ/2 ≤ 0` (the envelope does not sink below `σ²/μ`).
pub fn time_bound_maml_flow(
    c: &SmoothnessConstants,
    alpha: f64,
    gradf0_norm: f64,
    eps: f64,
) -> Result<Option<f64>> {
    c.require_strongly_convex()?;
    let args_ok = eps.is_finite() && eps > 0.0 && alpha >= 0.0 && gradf0_norm >= 0.0;
    if !args_ok {
        return Err(Error::InvalidArgument {
            name: "eps/alpha/gradf0_norm".to_string(),
            reason: "need eps > 0, alpha >= 0, gradf0_norm >= 0".to_string(),
        });
    }
    let (mu, sigma) = (c.mu, c.sigma);
    if sigma <= 0.0 {
        return Ok(None);
    }
    let iota = descent_rate(c, alpha) - 0.5 * mu;
    if iota <= 0.0 {
        return Ok(None);
    }
    let y0 = gradf0_norm * gradf0_norm;
    let phase1 = if y0 > sigma * sigma / mu {
        let arg = (mu * mu * y0 - mu * sigma * sigma / 2.0) / (iota * sigma * sigma);
        (2.0 / mu) * log_or_zero(arg)
    } else {
        0.0
    };
    let phase2 = (16.0 / mu) * log_or_zero((5.0 + 9.0 / mu.sqrt()) * sigma / (4.0 * eps));
    Ok(Some(phase1 + phase2))
}

/// Proof-level time bound for the biphasic flow:
/// `(2/μ)·log(‖∇f(0)‖²/ε₀²) + (16/μ)·log((9ε₀ + 5σ)/(4ε))`.
pub fn time_bound_biphasic_flow(
    c: &SmoothnessConstants,
    alpha: f64,
    eps0: f64,
    gradf0_norm: f64,
    eps: f64,
) -> Result<f64> {
    c.require_strongly_convex()?;
    let args_ok = eps.is_finite() && eps > 0.0 && eps0.is_finite() && eps0 > 0.0 && alpha >= 0.0;
    if !args_ok {
        return Err(Error::InvalidArgument {
            name: "eps/eps0/alpha".to_string(),
            reason: "need eps > 0, eps0 > 0, alpha >= 0".to_string(),
        });
    }
    let mu = c.mu;
    let y0 = gradf0_norm * gradf0_norm;
    let phase1 = (2.0 / mu) * log_or_zero(y0 / (eps0 * eps0));
    let phase2 = (16.0 / mu) * log_or_zero((9.0 * eps0 + 5.0 * c.sigma) / (4.0 * eps));
    Ok(phase1 + phase2)
}

// ---------------------------------------------------------------------------
// Scalar landscape scan
// ---------------------------------------------------------------------------

/// Grid scan of a scalar pool's meta-loss derivatives.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureScan {
    /// `(w, F″(w))` on the grid.
    pub rows: Vec<(f64, f64)>,
    pub min_hess: f64,
    /// Grid point attaining `min_hess`.
    pub argmin_hess: f64,
    /// Bracketing intervals where `F′` changes sign.
    pub grad_zero_intervals: Vec<(f64, f64)>,
    /// Sign changes of the finite-difference slope of `F′`; more than one
    /// means `F′` is not monotone, i.e. the meta-loss is non-convex on the
    /// grid.
    pub grad_slope_sign_changes: usize,
}

/// Scans `F′` and `F″` of a one-dimensional pool over `[lo, hi]` with the
/// given step.
pub fn meta_curvature_scan(
    pool: &TaskPool,
    alpha: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<CurvatureScan> {
    if pool.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: pool.dim(),
        });
    }
    if !(step.is_finite() && step > 0.0) || !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument {
            name: "grid".to_string(),
            reason: format!("need lo < hi and step > 0 (got [{lo}, {hi}], step {step})"),
        });
    }
    let n = ((hi - lo) / step).floor() as usize + 1;
    let points = crate::parallel::map_range(n, |k| {
        let w = Vector::from_element(1, lo + k as f64 * step);
        let grad = probe_maml_grad(pool, alpha, &w).map(|g| g[0]);
        let hess = probe_maml_hess(pool, alpha, &w).map(|h| h[(0, 0)]);
        (w[0], grad, hess)
    });

    let mut rows = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    let mut min_hess = f64::INFINITY;
    let mut argmin_hess = lo;
    for (w, grad, hess) in points {
        let g = grad?;
        let h = hess?;
        if h < min_hess {
            min_hess = h;
            argmin_hess = w;
        }
        rows.push((w, h));
        grads.push((w, g));
    }

    let mut grad_zero_intervals = Vec::new();
    for pair in grads.windows(2) {
        let (w0, g0) = pair[0];
        let (w1, g1) = pair[1];
        if g0 == 0.0 || g0.signum() != g1.signum() {
            grad_zero_intervals.push((w0, w1));
        }
    }
    let mut grad_slope_sign_changes = 0usize;
    let mut last_sign = 0i8;
    for window in grads.windows(2) {
        let slope = window[1].1 - window[0].1;
        let sign = if slope > 0.0 {
            1i8
        } else if slope < 0.0 {
            -1i8
        } else {
            0i8
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                grad_slope_sign_changes += 1;
            }
            last_sign = sign;
        }
    }

    Ok(CurvatureScan {
        rows,
        min_hess,
        argmin_hess,
        grad_zero_intervals,
        grad_slope_sign_changes,
    })
}

// ---------------------------------------------------------------------------
// Multi-start uniqueness probe
// ---------------------------------------------------------------------------

/// Tunables for [`uniqueness_probe`].
#[derive(Debug, Clone, Copy)]
pub struct UniquenessOpts {
    /// RK4 step.
    pub beta: f64,
    /// Stationarity target on `‖∇F‖`.
    pub eps: f64,
    /// Continuous-time budget per start.
    pub max_time: f64,
    /// Probe count for the constants on the hull of the runs.
    pub constant_probes: usize,
}

impl Default for UniquenessOpts {
    fn default() -> Self {
        UniquenessOpts {
            beta: 1e-2,
            eps: 1e-8,
            max_time: 2000.0,
            constant_probes: 4096,
        }
    }
}

/// Result of the multi-start probe for a unique global minimum.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub status: ProbeStatus,
    pub n_starts: usize,
    pub n_converged: usize,
    pub max_pairwise_dist: f64,
    /// Whether every terminal point lies in the sublevel set
    /// `V((K−σ)²/(2L))`.
    pub terminals_in_sublevel: bool,
    pub k_used: f64,
    pub v_level: f64,
    pub alpha_bound: f64,
    #[serde(skip)]
    pub terminals: Vec<Vector>,
}

/// Integrates the meta-loss flow from `n_starts` deterministic points in
/// `start_box`, then checks that all terminals agree pairwise within `tol`
/// and sit inside the sublevel set where the meta-loss is strongly convex.
/// `K` is taken as `(1 + √(L/μ))σ` plus a small margin.
pub fn uniqueness_probe(
    pool: &TaskPool,
    alpha: f64,
    n_starts: usize,
    start_box: &Region,
    tol: f64,
    opts: &UniquenessOpts,
) -> Result<UniquenessReport> {
    if n_starts < 2 {
        return Err(Error::InvalidArgument {
            name: "n_starts".to_string(),
            reason: "need at least two starts".to_string(),
        });
    }
    let max_iters = (opts.max_time / opts.beta).ceil() as usize + 1;

    struct RunOutcome {
        terminal: Vector,
        converged: bool,
        lo: Vector,
        hi: Vector,
    }
    let runs: Vec<Result<RunOutcome>> = crate::parallel::map_range(n_starts, |i| {
        let w0 = start_box.halton_point(i as u64 + 1);
        let local = pool.fork_counters();
        let field = maml_ode_field(&local, alpha)?;
        let traj = rk4_integrate(
            &field,
            &w0,
            opts.beta,
            &StopRule::new(opts.eps, max_iters, opts.max_time),
        )?;
        let mut lo = traj.samples[0].w.clone();
        let mut hi = lo.clone();
        for s in &traj.samples {
            for j in 0..lo.len() {
                lo[j] = lo[j].min(s.w[j]);
                hi[j] = hi[j].max(s.w[j]);
            }
        }
        Ok(RunOutcome {
            terminal: traj.last().w.clone(),
            converged: traj.termination == Termination::Converged,
            lo,
            hi,
        })
    });

    let mut terminals = Vec::with_capacity(n_starts);
    let mut n_converged = 0usize;
    let mut hull_pts: Vec<Vector> = Vec::new();
    for r in runs {
        let r = r?;
        if r.converged {
            n_converged += 1;
        }
        hull_pts.push(r.lo);
        hull_pts.push(r.hi);
        terminals.push(r.terminal);
    }

    let mut max_pairwise: f64 = 0.0;
    for i in 0..terminals.len() {
        for j in (i + 1)..terminals.len() {
            max_pairwise = max_pairwise.max((&terminals[i] - &terminals[j]).norm());
        }
    }

    let hull = Region::hull(hull_pts.iter(), 0.10)?;
    let constants = estimate_constants_raw(pool, &hull, opts.constant_probes)?;
    if constants.mu <= 0.0 {
        return Ok(UniquenessReport {
            status: ProbeStatus::Inconclusive,
            n_starts,
            n_converged,
            max_pairwise_dist: max_pairwise,
            terminals_in_sublevel: false,
            k_used: f64::NAN,
            v_level: f64::NAN,
            alpha_bound: f64::NAN,
            terminals,
        });
    }
    let k = (1.0 + (constants.l / constants.mu).sqrt()) * constants.sigma
        + 0.01 * (1.0 + constants.sigma);
    let v_level = (k - constants.sigma).powi(2) / (2.0 * constants.l);
    let alpha_bound = alpha_bound_unique_minimum(&constants, k);

    let mut all_in_v = true;
    for term in &terminals {
        let m = region_membership(pool, &constants, alpha, term, k, v_level)?;
        if !m.in_v {
            all_in_v = false;
        }
    }

    let status = if n_converged < n_starts {
        ProbeStatus::Inconclusive
    } else if alpha > alpha_bound {
        ProbeStatus::HypothesisViolated
    } else if max_pairwise < tol && all_in_v {
        ProbeStatus::Pass
    } else {
        ProbeStatus::Fail
    };
    Ok(UniquenessReport {
        status,
        n_starts,
        n_converged,
        max_pairwise_dist: max_pairwise,
        terminals_in_sublevel: all_in_v,
        k_used: k,
        v_level,
        alpha_bound,
        terminals,
    })
}
