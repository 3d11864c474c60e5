//! Registry tying every verified convergence result to the operation that
//! implements it and the check that exercises it, plus the generated
//! result-to-code map document.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::verify::CHECK_NAMES;

/// One registry row: a named result, the operation implementing it, and the
/// verification check covering it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchorEntry {
    pub result: &'static str,
    pub operation: &'static str,
    pub check: &'static str,
}

/// Every result the library implements and verifies.
pub const REGISTRY: [AnchorEntry; 18] = [
    AnchorEntry {
        result: "maml-update-rule",
        operation: "meta_grad::maml_grad",
        check: "maml_grad_matches_loss_fd",
    },
    AnchorEntry {
        result: "gradient-flow-limit",
        operation: "flow::maml_ode_field",
        check: "euler_step_equivalence",
    },
    AnchorEntry {
        result: "biphasic-descent",
        operation: "optimizers::run_bi_maml",
        check: "biphasic_latch_discrete",
    },
    AnchorEntry {
        result: "biphasic-flow",
        operation: "flow::bi_maml_field",
        check: "biphasic_latch_flow",
    },
    AnchorEntry {
        result: "maml-flow-iteration-complexity",
        operation: "diagnostics::time_bound_maml_flow",
        check: "time_bound_maml_flow",
    },
    AnchorEntry {
        result: "biphasic-flow-iteration-complexity",
        operation: "diagnostics::time_bound_biphasic_flow",
        check: "time_bound_biphasic_flow",
    },
    AnchorEntry {
        result: "meta-loss-hessian-window",
        operation: "diagnostics::hess_window_check",
        check: "strong_convexity_window",
    },
    AnchorEntry {
        result: "unique-global-minimum",
        operation: "diagnostics::uniqueness_probe",
        check: "unique_global_minimum",
    },
    AnchorEntry {
        result: "descent-inequality",
        operation: "diagnostics::lyapunov_rhs",
        check: "lyapunov_descent",
    },
    AnchorEntry {
        result: "correction-term-bound",
        operation: "diagnostics::descent_rate",
        check: "lyapunov_descent",
    },
    AnchorEntry {
        result: "gradient-norm-envelope",
        operation: "diagnostics::envelope",
        check: "gradient_envelope",
    },
    AnchorEntry {
        result: "forward-norm-transfer",
        operation: "diagnostics::grad_norm_transfer_fwd",
        check: "norm_transfer_forward",
    },
    AnchorEntry {
        result: "backward-norm-transfer",
        operation: "diagnostics::grad_norm_transfer_bwd",
        check: "norm_transfer_backward",
    },
    AnchorEntry {
        result: "local-strong-convexity",
        operation: "diagnostics::hess_window_check",
        check: "strong_convexity_window",
    },
    AnchorEntry {
        result: "stationarity-to-sublevel-inclusion",
        operation: "diagnostics::region_membership",
        check: "region_inclusions",
    },
    AnchorEntry {
        result: "sublevel-to-stationarity-inclusion",
        operation: "diagnostics::region_membership",
        check: "region_inclusions",
    },
    AnchorEntry {
        result: "critical-point-existence",
        operation: "diagnostics::uniqueness_probe",
        check: "unique_global_minimum",
    },
    AnchorEntry {
        result: "nonconvex-meta-loss-example",
        operation: "losses::counterexample_pool",
        check: "nonconvex_counterexample",
    },
];

/// Renders the result-to-code map as a markdown table.
///
/// `statuses` maps check names to the status of their last verification run;
/// results whose check has no entry show as `not-run`. Fails when a registry
/// row names a missing operation or a check the suite does not know.
pub fn emit_theory_map(statuses: &BTreeMap<String, String>) -> Result<String> {
    let mut out = String::new();
    out.push_str("# Result-to-code map\n\n");
    out.push_str(
        "Each convergence result the library implements, the operation that\n\
         realizes it, and the verification check that exercises it. Statuses\n\
         come from the most recent `verify` run.\n\n",
    );
    out.push_str("| result | operation | check | last status |\n");
    out.push_str("|--------|-----------|-------|-------------|\n");
    for entry in &REGISTRY {
        if entry.operation.is_empty() {
            return Err(Error::Missing {
                what: format!("operation for result `{}`", entry.result),
            });
        }
        if !CHECK_NAMES.contains(&entry.check) {
            return Err(Error::Missing {
                what: format!(
                    "check `{}` for result `{}` (not in the verification suite)",
                    entry.check, entry.result
                ),
            });
        }
        let status = statuses
            .get(entry.check)
            .map(String::as_str)
            .unwrap_or("not-run");
        out.push_str(&format!(
            "| {} | `{}` | `{}` | {} |\n",
            entry.result, entry.operation, entry.check, status
        ));
    }
    Ok(out)
}
