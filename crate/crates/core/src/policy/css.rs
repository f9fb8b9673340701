//! CSS-LUCB: confidence-set sampling for the best feasible arm.
//!
//! Round 1 pulls every arm-attribute pair once. Every later round first
//! reclassifies the empirical sets from fresh confidence bounds, then either
//! stops — no plausible arm left (declare infeasible), or a confirmed arm
//! with no plausible contender (declare it best) — or pulls all attributes
//! of the empirical leader and of its strongest competitor.
//!
//! Pulling whole arms keeps every attribute of an arm at the same pull
//! count, so arm-level radii and attribute-level radii shrink together.
//! Arms whose evidence rules out feasibility are excluded permanently with
//! frozen bounds and never pulled again.

use crate::env::Environment;
use crate::sets::{ConfidenceState, StopDecision};
use crate::trace::{PullRecord, SetSizes, TraceRecord, TraceSink};

use super::{validate_run_args, PolicyError, RunResult};

/// Runs CSS-LUCB to its stopping rule or the budget cap.
pub fn run_css_lucb(
    n_arms: usize,
    n_attrs: usize,
    threshold: f64,
    delta: f64,
    env: &mut Environment,
    budget_cap: u64,
    sink: &mut dyn TraceSink,
) -> Result<RunResult, PolicyError> {
    validate_run_args(n_arms, n_attrs, delta, budget_cap)?;
    let wants_pulls = sink.wants_records();
    let mut state = ConfidenceState::new(n_arms, n_attrs, threshold, delta);

    // Bootstrap round: one pull of every pair, ahead of any classification.
    let mut pulls = Vec::new();
    if wants_pulls {
        pulls.reserve(n_arms * n_attrs);
    }
    for arm in 0..n_arms {
        pull_arm(arm, n_attrs, env, &mut state, wants_pulls, &mut pulls);
    }
    sink.record(&TraceRecord {
        round: 1,
        pulls,
        sets: SetSizes::default(),
        confirmed_best: None,
        leader: None,
        competitor: None,
        removed: Vec::new(),
        stop: false,
    });

    let mut t: u64 = 2;
    loop {
        state.refresh(t);
        let removed = state.newly_removed().to_vec();
        let sets = state.classification.set_sizes();
        let confirmed_best = state.classification.confirmed_best;

        if let Some(decision) = state.classification.check_stop() {
            sink.record(&TraceRecord {
                round: t,
                pulls: Vec::new(),
                sets,
                confirmed_best,
                leader: None,
                competitor: None,
                removed,
                stop: true,
            });
            let output_arm = match decision {
                StopDecision::Infeasible => None,
                StopDecision::Winner(arm) => Some(arm),
            };
            return Ok(RunResult {
                feasibility_flag: output_arm.is_some(),
                output_arm,
                total_pulls: state.total_pulls(),
                rounds: t,
                pulls_matrix: state.pulls_matrix(),
                stopped_by_budget: false,
            });
        }

        let (leader, competitor) = state.classification.select(&state.view());
        let batch = (1 + u64::from(competitor.is_some())) * n_attrs as u64;
        if state.total_pulls() + batch > budget_cap {
            sink.record(&TraceRecord {
                round: t,
                pulls: Vec::new(),
                sets,
                confirmed_best,
                leader: Some(leader),
                competitor,
                removed,
                stop: true,
            });
            // Best guess: the confirmed leader when one exists, otherwise
            // the empirical leader among plausible arms.
            let guess = confirmed_best.unwrap_or(leader);
            return Ok(RunResult {
                feasibility_flag: true,
                output_arm: Some(guess),
                total_pulls: state.total_pulls(),
                rounds: t,
                pulls_matrix: state.pulls_matrix(),
                stopped_by_budget: true,
            });
        }

        let mut pulls = Vec::new();
        if wants_pulls {
            pulls.reserve(batch as usize);
        }
        pull_arm(leader, n_attrs, env, &mut state, wants_pulls, &mut pulls);
        if let Some(c) = competitor {
            pull_arm(c, n_attrs, env, &mut state, wants_pulls, &mut pulls);
        }
        sink.record(&TraceRecord {
            round: t,
            pulls,
            sets,
            confirmed_best,
            leader: Some(leader),
            competitor,
            removed,
            stop: false,
        });
        t += 1;
    }
}

fn pull_arm(
    arm: usize,
    n_attrs: usize,
    env: &mut Environment,
    state: &mut ConfidenceState,
    wants_pulls: bool,
    pulls: &mut Vec<PullRecord>,
) {
    for attr in 0..n_attrs {
        let reward = env.sample(arm, attr);
        state.record_reward(arm, attr, reward);
        if wants_pulls {
            pulls.push(PullRecord { arm, attr, reward });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ProblemInstance, RewardFamily};
    use crate::trace::{MemorySink, NullSink};

    fn run_on(
        inst: &ProblemInstance,
        delta: f64,
        seed: u64,
        budget_cap: u64,
        sink: &mut dyn TraceSink,
    ) -> RunResult {
        let mut env = Environment::new(inst, seed);
        run_css_lucb(
            inst.n_arms(),
            inst.n_attrs(),
            inst.threshold(),
            delta,
            &mut env,
            budget_cap,
            sink,
        )
        .unwrap()
    }

    fn table_one() -> ProblemInstance {
        ProblemInstance::new(
            vec![vec![0.6, 0.4], vec![0.2, 1.0], vec![0.4, 0.4]],
            0.3,
            RewardFamily::Bernoulli,
        )
        .unwrap()
    }

    #[test]
    fn single_easy_arm_always_identified() {
        let inst = ProblemInstance::new(vec![vec![0.9]], 0.1, RewardFamily::Bernoulli).unwrap();
        for seed in 0..50 {
            let result = run_on(&inst, 0.1, seed, u64::MAX, &mut NullSink);
            assert!(result.feasibility_flag);
            assert_eq!(result.output_arm, Some(0));
            assert!(!result.stopped_by_budget);
        }
    }

    #[test]
    fn hopeless_instance_mostly_declared_infeasible() {
        let inst = ProblemInstance::new(
            vec![vec![0.1, 0.1], vec![0.1, 0.1]],
            0.9,
            RewardFamily::Bernoulli,
        )
        .unwrap();
        let infeasible_verdicts = (0..200)
            .filter(|&seed| {
                let result = run_on(&inst, 0.1, seed, u64::MAX, &mut NullSink);
                !result.feasibility_flag
            })
            .count();
        assert!(
            infeasible_verdicts >= 180,
            "only {infeasible_verdicts}/200 runs declared infeasible"
        );
    }

    #[test]
    fn accounting_and_structure_on_a_traced_run() {
        let inst = table_one();
        let mut sink = MemorySink::default();
        let result = run_on(&inst, 0.1, 7, u64::MAX, &mut sink);

        // Pull accounting matches between the result and the trace.
        let traced_pulls: u64 = sink.records.iter().map(|r| r.pulls.len() as u64).sum();
        assert_eq!(traced_pulls, result.total_pulls);
        let matrix_total: u64 = result.pulls_matrix.iter().flatten().sum();
        assert_eq!(matrix_total, result.total_pulls);
        assert_eq!(sink.records.last().unwrap().round, result.rounds);
        assert!(sink.records.last().unwrap().stop);

        // Whole-arm pulling keeps attribute counts equal within every arm.
        for row in &result.pulls_matrix {
            assert!(row.iter().all(|&c| c == row[0]), "uneven pulls {row:?}");
        }

        // The bootstrap covers every pair exactly once.
        assert_eq!(sink.records[0].round, 1);
        assert_eq!(sink.records[0].pulls.len(), 6);

        // Each later working round pulls whole arms: the leader's attributes
        // and, when present, the competitor's.
        for rec in &sink.records[1..] {
            if rec.stop {
                assert!(rec.pulls.is_empty());
                continue;
            }
            let expected = 2 * (1 + usize::from(rec.competitor.is_some()));
            assert_eq!(rec.pulls.len(), expected, "round {}", rec.round);
            assert!(rec.leader.is_some());
        }

        // Permanent exclusion: once removed, never pulled again.
        let mut removed = vec![false; 3];
        for rec in &sink.records {
            for p in &rec.pulls {
                assert!(
                    !removed[p.arm],
                    "excluded arm {} pulled at round {}",
                    p.arm, rec.round
                );
            }
            for &arm in &rec.removed {
                removed[arm] = true;
            }
        }
        // The infeasible arm really does get excluded on this instance.
        assert!(removed[1]);
    }

    #[test]
    fn table_one_instance_identified_reliably() {
        let inst = table_one();
        let correct = (0..100)
            .filter(|&seed| {
                let result = run_on(&inst, 0.1, seed, u64::MAX, &mut NullSink);
                result.feasibility_flag && result.output_arm == Some(0)
            })
            .count();
        assert!(correct >= 90, "only {correct}/100 correct identifications");
    }

    #[test]
    fn budget_cap_returns_flagged_guess() {
        let inst = table_one();
        // Cap allows the bootstrap (6 pulls) but not the next round.
        let result = run_on(&inst, 0.1, 3, 6, &mut NullSink);
        assert!(result.stopped_by_budget);
        assert!(result.feasibility_flag);
        assert!(result.output_arm.is_some());
        assert_eq!(result.total_pulls, 6);
        assert_eq!(result.rounds, 2);

        // A roomier cap is never overshot.
        let result = run_on(&inst, 0.1, 3, 100, &mut NullSink);
        assert!(result.total_pulls <= 100);
        assert!(result.stopped_by_budget);
    }

    #[test]
    fn budget_smaller_than_bootstrap_is_rejected() {
        let inst = table_one();
        let mut env = Environment::new(&inst, 1);
        let err = run_css_lucb(3, 2, 0.3, 0.1, &mut env, 5, &mut NullSink).unwrap_err();
        assert_eq!(
            err,
            PolicyError::BudgetTooSmall {
                cap: 5,
                required: 6
            }
        );
        let err = run_css_lucb(3, 2, 0.3, -0.5, &mut env, 100, &mut NullSink).unwrap_err();
        assert_eq!(err, PolicyError::InvalidDelta(-0.5));
    }

    #[test]
    fn identical_seeds_replay_identically() {
        let inst = table_one();
        let a = run_on(&inst, 0.1, 42, u64::MAX, &mut NullSink);
        let b = run_on(&inst, 0.1, 42, u64::MAX, &mut NullSink);
        assert_eq!(a, b);
    }
}
