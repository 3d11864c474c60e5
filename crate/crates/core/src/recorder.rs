//! Crate-private trajectory recording shared by the discrete optimizers and
//! the flow integrators.

use std::time::Instant;

use crate::task_model::{
    EvalCounts, MamlConfig, Phase, TaskPool, Termination, Trajectory, TrajectorySample, Vector,
};

/// Infinity-norm threshold past which an iterate counts as diverged.
pub(crate) const DIVERGENCE_LIMIT: f64 = 1e12;

pub(crate) fn diverged(w: &Vector) -> bool {
    w.iter().any(|x| !x.is_finite()) || w.amax() > DIVERGENCE_LIMIT
}

pub(crate) struct Recorder {
    samples: Vec<TrajectorySample>,
    start: EvalCounts,
    /// Nanoseconds of algorithm work so far; instrumentation probes are not
    /// billed here, so wall comparisons across algorithms stay fair.
    algo_ns: u64,
    clock: Option<Instant>,
}

impl Recorder {
    pub fn new(pool: &TaskPool) -> Self {
        Recorder {
            samples: Vec::new(),
            start: pool.counts(),
            algo_ns: 0,
            clock: None,
        }
    }

    /// Counter totals accumulated since the run started. Taken *before* the
    /// step gradient is computed, so sample `k` reports the work done to
    /// reach iterate `k`.
    pub fn counts_since_start(&self, pool: &TaskPool) -> EvalCounts {
        pool.counts().since(&self.start)
    }

    /// Starts billing wall time to the algorithm.
    pub fn clock_on(&mut self) {
        debug_assert!(self.clock.is_none());
        self.clock = Some(Instant::now());
    }

    /// Stops billing wall time.
    pub fn clock_off(&mut self) {
        if let Some(t) = self.clock.take() {
            self.algo_ns += t.elapsed().as_nanos() as u64;
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        iter: usize,
        t: f64,
        w: &Vector,
        phase: Phase,
        maml_loss: f64,
        maml_grad_norm: f64,
        expected_grad_norm: f64,
        cum: EvalCounts,
    ) {
        self.samples.push(TrajectorySample {
            iter,
            t,
            w: w.clone(),
            maml_loss,
            maml_grad_norm,
            expected_grad_norm,
            phase,
            hess_evals_cum: cum.hess_evals,
            grad_evals_cum: cum.grad_evals,
            wall_ns: self.algo_ns,
        });
    }

    pub fn finish(mut self, termination: Termination, config: MamlConfig) -> Trajectory {
        self.clock_off();
        debug_assert!(!self.samples.is_empty());
        Trajectory {
            samples: self.samples,
            termination,
            config,
        }
    }
}
