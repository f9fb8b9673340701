//! Identification policies and their shared run interface.
//!
//! Three policies solve the same task — find the best feasible arm or
//! declare the instance infeasible, with confidence `1 - delta`:
//!
//! - [`Policy::CssLucb`] — confidence-set sampling: each round pulls the
//!   empirical leader and its strongest competitor among plausible arms;
//! - [`Policy::GroupedElim`] — feasibility-aware action elimination over
//!   all active arms in round-robin;
//! - [`Policy::FeasThenBai`] — settles feasibility of every arm first, then
//!   runs action elimination on the survivors, splitting the confidence
//!   budget in half between the phases.
//!
//! All three share one confidence-radius code path and one trace format.
//! Policies receive only the instance dimensions and the threshold — never
//! the true means, which stay inside the [`Environment`].

mod css;
mod elimination;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Environment;
use crate::trace::TraceSink;

pub use css::run_css_lucb;
pub use elimination::{run_feas_then_bai, run_grouped_elim};

/// Default pull budget: generous enough that only degenerate instances
/// (for example an attribute mean exactly on the threshold) hit it.
pub const DEFAULT_BUDGET_CAP: u64 = 100_000_000;

/// Configuration errors detected before any sampling.
#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("delta is {0}, must lie strictly between 0 and 1")]
    InvalidDelta(f64),
    #[error("budget cap {cap} cannot cover the first round ({required} pulls needed)")]
    BudgetTooSmall { cap: u64, required: u64 },
}

/// Outcome of one identification run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    /// The feasibility verdict: `true` claims a best feasible arm exists.
    pub feasibility_flag: bool,
    /// The claimed best feasible arm (0-based); present iff the flag is set.
    pub output_arm: Option<usize>,
    /// Total reward draws.
    pub total_pulls: u64,
    /// Rounds elapsed, counting the bootstrap and the stopping round.
    pub rounds: u64,
    /// Per-pair pull counts, `n_arms x n_attrs`.
    pub pulls_matrix: Vec<Vec<u64>>,
    /// `true` when the run returned a best guess because the next round
    /// would have exceeded the budget cap.
    pub stopped_by_budget: bool,
}

/// The three identification policies, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    CssLucb,
    GroupedElim,
    FeasThenBai,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::CssLucb, Policy::GroupedElim, Policy::FeasThenBai];

    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            Policy::CssLucb => "css-lucb",
            Policy::GroupedElim => "grouped-elim",
            Policy::FeasThenBai => "feas-then-bai",
        }
    }

    #[must_use]
    pub fn from_name(name: &str) -> Option<Self> {
        Policy::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Runs the policy to completion (or budget cap) on a seeded
    /// environment, streaming one trace record per round into `sink`.
    pub fn run(
        self,
        n_arms: usize,
        n_attrs: usize,
        threshold: f64,
        delta: f64,
        env: &mut Environment,
        budget_cap: u64,
        sink: &mut dyn TraceSink,
    ) -> Result<RunResult, PolicyError> {
        match self {
            Policy::CssLucb => {
                run_css_lucb(n_arms, n_attrs, threshold, delta, env, budget_cap, sink)
            }
            Policy::GroupedElim => {
                run_grouped_elim(n_arms, n_attrs, threshold, delta, env, budget_cap, sink)
            }
            Policy::FeasThenBai => {
                run_feas_then_bai(n_arms, n_attrs, threshold, delta, env, budget_cap, sink)
            }
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::from_name(s).ok_or_else(|| {
            let names: Vec<&str> = Policy::ALL.iter().map(|p| p.name()).collect();
            format!("unknown policy {s:?}: expected one of {}", names.join(", "))
        })
    }
}

/// Shared pre-flight validation: `delta` in `(0, 1)` and a budget that at
/// least covers the mandatory first round (one pull of every pair).
fn validate_run_args(
    n_arms: usize,
    n_attrs: usize,
    delta: f64,
    budget_cap: u64,
) -> Result<(), PolicyError> {
    assert!(
        n_arms >= 1 && n_attrs >= 1,
        "instance validation guarantees dimensions"
    );
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PolicyError::InvalidDelta(delta));
    }
    let required = (n_arms * n_attrs) as u64;
    if budget_cap < required {
        return Err(PolicyError::BudgetTooSmall {
            cap: budget_cap,
            required,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for policy in Policy::ALL {
            assert_eq!(Policy::from_name(policy.name()), Some(policy));
            assert_eq!(policy.name().parse::<Policy>(), Ok(policy));
        }
        assert_eq!(Policy::from_name("lucb"), None);
        assert!("nope".parse::<Policy>().is_err());
    }

    #[test]
    fn argument_validation() {
        assert_eq!(
            validate_run_args(2, 3, 0.0, 100),
            Err(PolicyError::InvalidDelta(0.0))
        );
        assert_eq!(
            validate_run_args(2, 3, 1.0, 100),
            Err(PolicyError::InvalidDelta(1.0))
        );
        assert_eq!(
            validate_run_args(2, 3, 0.1, 5),
            Err(PolicyError::BudgetTooSmall {
                cap: 5,
                required: 6
            })
        );
        assert_eq!(validate_run_args(2, 3, 0.1, 6), Ok(()));
    }
}
