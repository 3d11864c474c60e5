//! Experiment configuration: one JSON document per experiment describing the
//! pool, the algorithms, the step sizes and budgets, and (for verification)
//! the check list.

use std::path::Path;

use serde::Deserialize;

use maml_ode::datagen::{
    gen_classification_suite, gen_random_quadratic_pool, gen_regression_suite, load_csv_tasks,
    ClassificationSuiteSpec, CsvTaskSpec, RegressionSuiteSpec,
};
use maml_ode::losses::{counterexample_pool, quadratic_pair_pool};
use maml_ode::task_model::{Integrator, MamlConfig, TaskPool, Vector};

use crate::CliError;

/// Which pool an experiment runs on.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolSpec {
    /// The built-in pair `{½(w−1)², ½(w+1)²}`.
    QuadraticPair,
    /// The built-in scalar pool with a non-convex meta-loss.
    Counterexample,
    RegressionSuite {
        m: usize,
        d: usize,
        n: usize,
        noise: f64,
    },
    ClassificationSuite {
        m: usize,
        d: usize,
        n: usize,
        separation: f64,
        #[serde(default = "default_balance")]
        balance: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    RandomQuadratic {
        m: usize,
        d: usize,
        eig_lo: f64,
        eig_hi: f64,
    },
    Csv(CsvTaskSpec),
}

fn default_balance() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MamlParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
}

fn default_eps() -> f64 {
    1e-6
}

fn default_eps0() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
}

fn default_max_iters() -> usize {
    10_000
}

fn default_max_time() -> f64 {
    1e6
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_iters: default_max_iters(),
            max_time: default_max_time(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[serde(default = "default_flow_beta")]
    pub beta: f64,
    #[serde(default = "default_flow_window")]
    pub window: f64,
}

fn default_flow_beta() -> f64 {
    1e-3
}

fn default_flow_window() -> f64 {
    10.0
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            beta: default_flow_beta(),
            window: default_flow_window(),
        }
    }
}

/// The experiment document. Unknown keys are rejected with the key name.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub pool: PoolSpec,
    #[serde(default)]
    pub algorithms: Vec<String>,
    pub maml: MamlParams,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub integrator: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub w0: Option<Vec<f64>>,
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    #[serde(default)]
    pub flow: Option<FlowParams>,
    #[serde(default)]
    pub probes: Option<usize>,
    /// Half-width of the probing cube for `constants` (centered at `w0`).
    #[serde(default)]
    pub region_half_width: Option<f64>,
}

/// Algorithms `run` understands.
pub const ALGORITHMS: [&str; 6] = [
    "gd_f",
    "maml",
    "fo_maml",
    "bi_maml",
    "maml_ode",
    "bi_maml_ode",
];

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let maml = MamlConfig {
            alpha: self.maml.alpha,
            beta: self.maml.beta,
            eps: self.maml.eps,
            eps0: self.maml.eps0,
            max_iters: self.budgets.max_iters,
            max_time: self.budgets.max_time,
            integrator: Integrator::Rk4,
        };
        maml.validate().map_err(CliError::from)?;
        for a in &self.algorithms {
            if !ALGORITHMS.contains(&a.as_str()) {
                return Err(CliError::usage(format!(
                    "unknown algorithm `{a}` (expected one of {})",
                    ALGORITHMS.join(", ")
                )));
            }
        }
        if let Some(i) = &self.integrator {
            if i != "euler" && i != "rk4" {
                return Err(CliError::usage(format!(
                    "unknown integrator `{i}` (expected euler or rk4)"
                )));
            }
        }
        Ok(())
    }

    /// Effective seed after the command-line override.
    pub fn seed_with(&self, override_seed: Option<u64>) -> u64 {
        override_seed.unwrap_or(self.seed)
    }

    pub fn build_pool(&self, seed: u64) -> Result<(TaskPool, Vec<String>), CliError> {
        let mut warnings = Vec::new();
        let pool = match &self.pool {
            PoolSpec::QuadraticPair => quadratic_pair_pool(),
            PoolSpec::Counterexample => counterexample_pool(),
            PoolSpec::RegressionSuite { m, d, n, noise } => {
                gen_regression_suite(&RegressionSuiteSpec {
                    m: *m,
                    d: *d,
                    n: *n,
                    noise: *noise,
                    seed,
                })?
            }
            PoolSpec::ClassificationSuite {
                m,
                d,
                n,
                separation,
                balance,
                delta,
            } => gen_classification_suite(&ClassificationSuiteSpec {
                m: *m,
                d: *d,
                n: *n,
                balance: *balance,
                separation: *separation,
                delta: *delta,
                seed,
            })?,
            PoolSpec::RandomQuadratic {
                m,
                d,
                eig_lo,
                eig_hi,
            } => gen_random_quadratic_pool(*m, *d, *eig_lo, *eig_hi, seed)?,
            PoolSpec::Csv(spec) => {
                let loaded = load_csv_tasks(spec)?;
                warnings = loaded.warnings;
                loaded.pool
            }
        };
        Ok((pool, warnings))
    }

    pub fn build_w0(&self, dim: usize, seed: u64) -> Result<Vector, CliError> {
        match &self.w0 {
            Some(values) => {
                if values.len() != dim {
                    return Err(CliError::usage(format!(
                        "w0 has {} entries but the pool dimension is {dim}",
                        values.len()
                    )));
                }
                Ok(Vector::from_vec(values.clone()))
            }
            None => Ok(maml_ode::datagen::initial_point(dim, seed)),
        }
    }

    pub fn maml_config(&self) -> MamlConfig {
        MamlConfig {
            alpha: self.maml.alpha,
            beta: self.maml.beta,
            eps: self.maml.eps,
            eps0: self.maml.eps0,
            max_iters: self.budgets.max_iters,
            max_time: self.budgets.max_time,
            integrator: match self.integrator.as_deref() {
                Some("euler") => Integrator::Euler,
                _ => Integrator::Rk4,
            },
        }
    }
}
