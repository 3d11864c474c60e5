//! Meta-learning training dynamics on strongly convex task pools.
//!
//! The crate provides, at desk scale:
//!
//! - a task-loss abstraction with exact evaluation counters
//!   ([`task_model`]), and concrete losses for regression, classification,
//!   and a scalar family whose meta-loss turns non-convex ([`losses`]);
//! - the meta-loss `F(w) = E_i f_i(w − α∇f_i(w))`, its exact and
//!   first-order gradients, and its Hessian ([`meta_grad`]);
//! - discrete training loops and their gradient-flow limits with fixed-step
//!   Euler/RK4 integration ([`optimizers`], [`flow`]);
//! - estimation of smoothness/strong-convexity/variance constants and every
//!   closed-form convergence bound, with numeric verification along
//!   trajectories ([`diagnostics`], [`verify`]);
//! - synthetic suite generation and CSV ingestion ([`datagen`]);
//! - a registry tying each verified result to its operation and check
//!   ([`docs_map`]).
//!
//! Pool-wide sums, probe sweeps, and multi-start runs are data-parallel under
//! the `parallel` feature (on by default) and sequential without it; results
//! are bit-identical either way.

pub mod datagen;
pub mod diagnostics;
pub mod docs_map;
pub mod error;
pub mod flow;
pub mod losses;
pub mod meta_grad;
pub mod optimizers;
pub mod parallel;
pub mod task_model;
pub mod verify;

pub(crate) mod recorder;

pub use error::{Error, Result};
pub use task_model::{Matrix, TaskPool, Vector};
