//! Serializable report documents for the command-line tools.
//!
//! JSON cannot carry IEEE infinities, so every field that can be infinite
//! in the analytics (`separator`, `hardness`, derived budgets) is encoded
//! as an `Option`: `null` means "not finite / not defined". Arm indices are
//! 1-based in these documents, matching the CSV schemas and display output.

use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::instance::{GroundTruth, LowerBoundReport, ProblemInstance};
use crate::policy::{Policy, RunResult};

fn one_based(arms: &[usize]) -> Vec<usize> {
    arms.iter().map(|&a| a + 1).collect()
}

fn finite(value: f64) -> Option<f64> {
    value.is_finite().then_some(value)
}

/// Machine-readable form of [`LowerBoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundDoc {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub constant: f64,
    pub samples: f64,
    pub heuristic: bool,
    pub vacuous: bool,
}

impl LowerBoundDoc {
    #[must_use]
    pub fn from_report(report: &LowerBoundReport) -> Self {
        Self {
            c1: report.c1,
            c2: report.c2,
            c3: report.c3,
            constant: report.constant,
            samples: report.samples,
            heuristic: report.heuristic,
            vacuous: report.vacuous,
        }
    }
}

/// Full analysis document for one instance: ground truth, gaps, hardness,
/// and the sample-complexity envelope at a confidence level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n_arms: usize,
    pub n_attrs: usize,
    pub threshold: f64,
    pub reward_family: String,
    pub delta: f64,
    /// Feasible arms (1-based).
    pub feasible: Vec<usize>,
    pub feasibility_flag: bool,
    /// Best feasible arm (1-based).
    pub best_arm: Option<usize>,
    pub arm_means: Vec<f64>,
    /// Sub-optimal arms (1-based).
    pub suboptimal: Vec<usize>,
    /// Risky arms (1-based).
    pub risky: Vec<usize>,
    /// Best sub-optimal arm (1-based).
    pub second_best: Option<usize>,
    /// Per-arm mean gaps; `null` where undefined.
    pub mean_gaps: Vec<Option<f64>>,
    /// Per-pair distance to the threshold.
    pub attribute_gaps: Vec<Vec<f64>>,
    /// Per-arm feasibility margin.
    pub feasibility_margins: Vec<f64>,
    /// `null` when there is no feasible/sub-optimal pair to separate.
    pub separator: Option<f64>,
    /// `null` when the instance is degenerate (infinite hardness).
    pub hardness: Option<f64>,
    /// Termination budget in pulls; `null` when the hardness is infinite.
    pub termination_budget: Option<f64>,
    /// `null` for degenerate instances (the bound needs a finite hardness).
    pub lower_bound: Option<LowerBoundDoc>,
}

impl AnalysisReport {
    /// Assembles the document from an instance, its ground truth, and the
    /// lower bound computed at `delta` (absent for degenerate instances).
    #[must_use]
    pub fn build(
        instance: &ProblemInstance,
        truth: &GroundTruth,
        bound: Option<&LowerBoundReport>,
        delta: f64,
    ) -> Self {
        let budget = diagnostics::termination_budget(truth, delta)
            .ok()
            .map(|b| b.pulls);
        Self {
            n_arms: instance.n_arms(),
            n_attrs: instance.n_attrs(),
            threshold: instance.threshold(),
            reward_family: instance.reward_family().name().to_owned(),
            delta,
            feasible: one_based(&truth.feasible),
            feasibility_flag: truth.feasibility_flag,
            best_arm: truth.best_arm.map(|a| a + 1),
            arm_means: truth.arm_means.clone(),
            suboptimal: one_based(&truth.suboptimal),
            risky: one_based(&truth.risky),
            second_best: truth.second_best.map(|a| a + 1),
            mean_gaps: truth.gaps.clone(),
            attribute_gaps: truth.attr_gaps.clone(),
            feasibility_margins: truth.arm_attr_gaps.clone(),
            separator: finite(truth.separator),
            hardness: finite(truth.hardness),
            termination_budget: budget,
            lower_bound: bound.map(LowerBoundDoc::from_report),
        }
    }
}

/// Result document for a single policy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: String,
    pub seed: u64,
    pub delta: f64,
    pub budget_cap: u64,
    pub feasibility_flag: bool,
    /// Output arm (1-based).
    pub output_arm: Option<usize>,
    pub total_pulls: u64,
    pub rounds: u64,
    pub stopped_by_budget: bool,
    /// Whether the run reproduced the ground truth.
    pub correct: bool,
    /// Per-pair pull counts.
    pub pulls_matrix: Vec<Vec<u64>>,
}

impl RunReport {
    #[must_use]
    pub fn build(
        policy: Policy,
        seed: u64,
        delta: f64,
        budget_cap: u64,
        result: &RunResult,
        truth: &GroundTruth,
    ) -> Self {
        Self {
            policy: policy.name().to_owned(),
            seed,
            delta,
            budget_cap,
            feasibility_flag: result.feasibility_flag,
            output_arm: result.output_arm.map(|a| a + 1),
            total_pulls: result.total_pulls,
            rounds: result.rounds,
            stopped_by_budget: result.stopped_by_budget,
            correct: result.feasibility_flag == truth.feasibility_flag
                && result.output_arm == truth.best_arm,
            pulls_matrix: result.pulls_matrix.clone(),
        }
    }
}
