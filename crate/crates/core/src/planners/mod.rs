//! Planner oracles: exact relative value iteration on the flattened model, or ALP.

pub mod alp;
pub mod lp;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::factored::FactoredMdp;
use crate::solve::{relative_value_iteration, RviOptions};

pub use alp::{build_alp, greedy_from_weights, solve_alp, AlpSolution, Basis};
pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus, VarBound};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Exact,
    Alp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerChoice {
    #[serde(default)]
    pub kind: PlannerKind,
    #[serde(default)]
    pub basis: Basis,
    /// Bellman residual span (exact) or optimality tolerance (ALP).
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    100_000
}

impl Default for PlannerChoice {
    fn default() -> Self {
        PlannerChoice {
            kind: PlannerKind::Exact,
            basis: Basis::Linear,
            tol: default_tol(),
            max_iters: default_max_iters(),
        }
    }
}

impl PlannerChoice {
    pub fn exact(tol: f64) -> Self {
        PlannerChoice {
            tol,
            ..Default::default()
        }
    }

    pub fn alp(basis: Basis) -> Self {
        PlannerChoice {
            kind: PlannerKind::Alp,
            basis,
            tol: 1e-9,
            ..Default::default()
        }
    }

    pub(crate) fn rvi_options(&self) -> RviOptions {
        RviOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            ..Default::default()
        }
    }
}

/// A planner's answer: a policy over flat states and the gain it reports.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub policy: Vec<usize>,
    /// Optimal gain (exact) or the ALP bound `lambda`.
    pub gain: f64,
    /// Bias on the original scale; exact planning only.
    pub bias: Option<Vec<f64>>,
    pub iterations: usize,
}

pub fn plan(m: &FactoredMdp, choice: &PlannerChoice) -> Result<Plan> {
    plan_warm(m, choice, None)
}

/// Like [`plan`], seeding exact planning with a previous bias.
pub fn plan_warm(m: &FactoredMdp, choice: &PlannerChoice, warm: Option<&[f64]>) -> Result<Plan> {
    match choice.kind {
        PlannerKind::Exact => {
            let flat = m.flatten()?;
            let report = relative_value_iteration(&flat, &choice.rvi_options(), warm)?;
            Ok(Plan {
                gain: report.gain(),
                policy: report.policy,
                bias: Some(report.gain_bias.bias),
                iterations: report.iterations,
            })
        }
        PlannerKind::Alp => {
            let sol = solve_alp(m, choice.basis, choice.tol)?;
            let policy = greedy_from_weights(m, &sol.weights, choice.basis)?;
            Ok(Plan {
                policy,
                gain: sol.gain,
                bias: None,
                iterations: 0,
            })
        }
    }
}
