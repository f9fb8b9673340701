//! Analysis-only instruments for simulated runs.
//!
//! Everything here requires knowledge of the true means, so these functions
//! live outside the policies: they consume recorded traces (or explicit
//! statistics) after the fact, and the sampling code carries no test-only
//! branches.
//!
//! Provided tools:
//! - the good event `E` (every empirical mean within its confidence radius
//!   of the truth, at pair and arm level),
//! - the empirical partition of arms against the true separator value,
//! - per-arm pull thresholds implied by the gap analysis,
//! - the termination budget `159 * H * ln(H / delta)`,
//! - a streaming [`TraceVerifier`] that replays a recorded trace, folds the
//!   logged rewards independently, and checks both the statistical event
//!   and the structural protocol of the emitting policy.

use serde::{Deserialize, Serialize};

use crate::confidence::{log_term, radius_from_log_term};
use crate::instance::{AnalyticsError, GroundTruth, ProblemInstance};
use crate::sets::{Classification, ConfidenceState, StopDecision};
use crate::trace::{SetSizes, TraceRecord, TraceSink};

/// Rounds at which the verifier samples per-pair deviation frequencies for
/// calibration against the per-round failure bound.
pub const CALIBRATION_ROUNDS: [u64; 5] = [2, 10, 50, 200, 1000];

fn contains(sorted: &[usize], arm: usize) -> bool {
    sorted.binary_search(&arm).is_ok()
}

/// Whether every empirical mean lies within its confidence radius of the
/// truth at round `t`: `|mean_ij - mu_ij| <= alpha(t, T_ij)` for every pair
/// and `|mean_i - mu_i| <= alpha(t, T_i)` for every arm (with
/// `T_i = min_j T_ij`).
///
/// Requires every pair to have been pulled at least once (`t >= 2`).
#[must_use]
pub fn event_holds(state: &ConfidenceState, t: u64, instance: &ProblemInstance) -> bool {
    let (n, m) = (state.n_arms(), state.n_attrs());
    let lt = log_term(t, state.delta(), n, m);
    for arm in 0..n {
        let mut mean_sum = 0.0;
        let mut arm_pulls = u64::MAX;
        for attr in 0..m {
            let pulls = state.pair_pulls(arm, attr);
            debug_assert!(pulls >= 1, "event is defined once every pair is sampled");
            let mean = state.pair_mean(arm, attr);
            if (mean - instance.mean(arm, attr)).abs() > radius_from_log_term(lt, pulls) {
                return false;
            }
            mean_sum += mean;
            arm_pulls = arm_pulls.min(pulls);
        }
        let arm_mean = mean_sum / m as f64;
        let true_mean = instance.arm_mean(arm);
        if (arm_mean - true_mean).abs() > radius_from_log_term(lt, arm_pulls) {
            return false;
        }
    }
    true
}

/// The empirical partition of arms against the separator value: arms whose
/// upper bound is below the separator, arms whose lower bound is above it,
/// and the undecided remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Arms with `U_i < separator` (empirically sub-optimal).
    pub suboptimal: Vec<usize>,
    /// Arms with `L_i > separator` (empirically risky / leading).
    pub risky: Vec<usize>,
    /// Arms whose interval straddles the separator.
    pub neutral: Vec<usize>,
}

/// Splits arms by comparing their confidence intervals to the separator.
///
/// A separator of `-inf` (no feasible/sub-optimal pair to separate) puts
/// every arm in the risky class.
#[must_use]
pub fn empirical_partition(arm_lo: &[f64], arm_hi: &[f64], separator: f64) -> Partition {
    assert_eq!(arm_lo.len(), arm_hi.len());
    let n = arm_lo.len();
    let mut part = Partition {
        suboptimal: Vec::new(),
        risky: Vec::new(),
        neutral: Vec::new(),
    };
    if separator == f64::NEG_INFINITY {
        part.risky.extend(0..n);
        return part;
    }
    for i in 0..n {
        if arm_hi[i] < separator {
            part.suboptimal.push(i);
        } else if arm_lo[i] > separator {
            part.risky.push(i);
        } else {
            part.neutral.push(i);
        }
    }
    part
}

impl Partition {
    #[must_use]
    pub fn is_suboptimal(&self, arm: usize) -> bool {
        contains(&self.suboptimal, arm)
    }

    #[must_use]
    pub fn is_neutral(&self, arm: usize) -> bool {
        contains(&self.neutral, arm)
    }
}

/// Whether a selected arm still carries classification uncertainty: it is a
/// boundary arm not yet known sub-optimal, or a plausible arm whose interval
/// straddles the separator. While the leader or competitor is such an arm,
/// the round cannot be conclusive.
#[must_use]
pub fn selection_unsettled(class: &Classification, part: &Partition, arm: usize) -> bool {
    let boundary = class.is_plausible(arm) && !class.is_confirmed(arm);
    (boundary && !part.is_suboptimal(arm)) || (class.is_plausible(arm) && part.is_neutral(arm))
}

/// One analysis snapshot of a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosticSnapshot {
    pub round: u64,
    /// Whether the good event held at this round.
    pub event_holds: bool,
    /// Empirical partition against the true separator.
    pub partition: Partition,
    /// Whether the leader or competitor was still unsettled (expected on
    /// every round that does not stop, given the good event).
    pub selection_unsettled: bool,
}

/// Builds a snapshot from a refreshed state (classification current for
/// round `t`).
#[must_use]
pub fn snapshot(
    state: &ConfidenceState,
    t: u64,
    instance: &ProblemInstance,
    truth: &GroundTruth,
) -> DiagnosticSnapshot {
    let view = state.view();
    let partition = empirical_partition(view.arm_lo, view.arm_hi, truth.separator);
    let class = &state.classification;
    let unsettled = if class.plausible_arms.is_empty() {
        false
    } else {
        let (leader, competitor) = class.select(&view);
        selection_unsettled(class, &partition, leader)
            || competitor.is_some_and(|c| selection_unsettled(class, &partition, c))
    };
    DiagnosticSnapshot {
        round: t,
        event_holds: event_holds(state, t, instance),
        partition,
        selection_unsettled: unsettled,
    }
}

/// Pull counts after which round-`t` confidence intervals resolve an arm's
/// gaps: `ceil(lt / (2 gap^2))` with `lt = ln(4NM t^4 / delta)`, for the
/// arm-mean gap and for the attribute (feasibility-margin) gap.
///
/// `None` marks a gap that is undefined or zero for that arm; such arms are
/// excluded rather than clamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PullThresholds {
    pub arm: usize,
    /// Pulls resolving the arm-mean gap.
    pub mean_gap_pulls: Option<u64>,
    /// Pulls resolving the feasibility margin.
    pub attr_gap_pulls: Option<u64>,
}

/// Per-arm pull thresholds at round `t`.
#[must_use]
pub fn pull_thresholds(
    truth: &GroundTruth,
    delta: f64,
    n_arms: usize,
    n_attrs: usize,
    t: u64,
) -> Vec<PullThresholds> {
    let lt = log_term(t, delta, n_arms, n_attrs);
    let threshold_for = |gap: f64| -> Option<u64> {
        if gap > 0.0 {
            Some((lt / (2.0 * gap * gap)).ceil() as u64)
        } else {
            None
        }
    };
    (0..truth.arm_means.len())
        .map(|arm| PullThresholds {
            arm,
            mean_gap_pulls: truth.gaps[arm].and_then(threshold_for),
            attr_gap_pulls: threshold_for(truth.arm_attr_gaps[arm]),
        })
        .collect()
}

/// The termination budget `159 * H * ln(H / delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationBudget {
    /// Budget in pulls (0 when the logarithm is not positive).
    pub pulls: f64,
    /// True when `H / delta <= 1`, which makes the bound carry no
    /// information.
    pub vacuous: bool,
}

/// Computes the termination budget from the hardness index.
///
/// # Errors
///
/// Degenerate instances (infinite hardness) and `delta` outside `(0, 1)`.
pub fn termination_budget(
    truth: &GroundTruth,
    delta: f64,
) -> Result<TerminationBudget, AnalyticsError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AnalyticsError::InvalidDelta(delta));
    }
    let h = crate::instance::hardness_index(truth)?;
    let log = (h / delta).ln();
    if log <= 0.0 {
        Ok(TerminationBudget {
            pulls: 0.0,
            vacuous: true,
        })
    } else {
        Ok(TerminationBudget {
            pulls: 159.0 * h * log,
            vacuous: false,
        })
    }
}

/// Which policy's protocol a trace is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifierMode {
    /// Full protocol replay: set sizes, leader/competitor selection, stop
    /// logic, exclusions, and the per-round progress condition.
    CssLucb,
    /// Round-robin elimination protocols: structural and statistical checks
    /// that do not depend on the policy's latched classification state.
    Elimination,
}

/// Per-pair deviation frequencies sampled at one calibration round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub round: u64,
    /// Pairs whose empirical mean deviated beyond the round's radius.
    pub deviations: u64,
    /// Pairs examined (`N * M`).
    pub pairs: u64,
}

/// Outcome of replaying one trace: the per-run diagnostic summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    /// Rounds seen (index of the last record).
    pub rounds: u64,
    /// Rewards folded from the trace.
    pub total_pulls: u64,
    /// Whether a stop record terminated the trace.
    pub stopped: bool,
    /// Count of (pair or arm, round) confidence violations.
    pub event_violations: u64,
    /// Round of the first confidence violation, if any.
    pub first_violation_round: Option<u64>,
    /// Rounds on which the progress condition was evaluated (non-stop
    /// rounds with a clean event prefix; policy-replay mode only).
    pub progress_rounds: u64,
    /// Evaluated rounds where neither the leader nor the competitor was
    /// unsettled (expected 0 under the good event).
    pub progress_violations: u64,
    /// Per-pair deviation counts at the calibration rounds reached.
    pub calibration: Vec<CalibrationSample>,
    /// Structural protocol violations (empty for a conforming trace).
    pub structure_errors: Vec<String>,
}

impl TraceReport {
    /// Whether the good event held at every round of the trace.
    #[must_use]
    pub fn event_ok(&self) -> bool {
        self.event_violations == 0
    }

    /// Whether the trace obeyed the emitting policy's protocol.
    #[must_use]
    pub fn structure_ok(&self) -> bool {
        self.structure_errors.is_empty()
    }
}

const MAX_STRUCTURE_ERRORS: usize = 20;

/// Streaming trace checker. Feed it records (it is a [`TraceSink`], so it
/// can sit directly behind a policy run), then call
/// [`TraceVerifier::finish`].
///
/// The verifier folds the logged rewards into its own statistics and, in
/// [`VerifierMode::CssLucb`], replays the full decision protocol: recorded
/// set sizes, confirmed-best/leader/competitor choices, exclusions, and
/// stop decisions must all match its reconstruction. In both modes it
/// checks the good event exactly once per (pair, round-boundary) where the
/// radius binds — a pair pulled at round `t - 1` is checked at round `t`;
/// passing there implies the event holds until the pair is pulled again,
/// because the radius grows with `t` at fixed pull count.
pub struct TraceVerifier {
    instance: ProblemInstance,
    separator: f64,
    mode: VerifierMode,
    state: ConfidenceState,
    /// Pairs pulled in the previous record, awaiting their binding check.
    pending_pairs: Vec<(usize, usize)>,
    pending_arms: Vec<usize>,
    removed_ever: Vec<bool>,
    next_round: u64,
    finished: bool,
    event_prefix_ok: bool,
    report: TraceReport,
}

impl TraceVerifier {
    #[must_use]
    pub fn new(instance: &ProblemInstance, delta: f64, mode: VerifierMode) -> Self {
        let truth = crate::instance::analyze(instance);
        let (n, m) = (instance.n_arms(), instance.n_attrs());
        Self {
            instance: instance.clone(),
            separator: truth.separator,
            mode,
            state: ConfidenceState::new(n, m, instance.threshold(), delta),
            pending_pairs: Vec::with_capacity(n * m),
            pending_arms: Vec::with_capacity(n),
            removed_ever: vec![false; n],
            next_round: 1,
            finished: false,
            event_prefix_ok: true,
            report: TraceReport {
                rounds: 0,
                total_pulls: 0,
                stopped: false,
                event_violations: 0,
                first_violation_round: None,
                progress_rounds: 0,
                progress_violations: 0,
                calibration: Vec::new(),
                structure_errors: Vec::new(),
            },
        }
    }

    /// Consumes the verifier and returns its report.
    #[must_use]
    pub fn finish(mut self) -> TraceReport {
        if !self.finished {
            self.structure_error("trace ended without a stop record".to_owned());
        }
        self.report
    }

    fn structure_error(&mut self, message: String) {
        match self.report.structure_errors.len() {
            n if n < MAX_STRUCTURE_ERRORS => self.report.structure_errors.push(message),
            n if n == MAX_STRUCTURE_ERRORS => self
                .report
                .structure_errors
                .push("further structure errors suppressed".to_owned()),
            _ => {}
        }
    }

    fn note_violation(&mut self, t: u64) {
        self.report.event_violations += 1;
        self.report.first_violation_round.get_or_insert(t);
        self.event_prefix_ok = false;
    }

    /// Binding-round confidence checks for everything pulled last round.
    /// Consumes the pending buffers.
    fn check_pending(&mut self, t: u64, lt: f64) {
        let pairs = std::mem::take(&mut self.pending_pairs);
        for (arm, attr) in pairs {
            let deviation = (self.state.pair_mean(arm, attr) - self.instance.mean(arm, attr)).abs();
            if deviation > radius_from_log_term(lt, self.state.pair_pulls(arm, attr)) {
                self.note_violation(t);
            }
        }
        let arms = std::mem::take(&mut self.pending_arms);
        let m = self.instance.n_attrs();
        for arm in arms {
            let mut mean_sum = 0.0;
            let mut arm_pulls = u64::MAX;
            for attr in 0..m {
                mean_sum += self.state.pair_mean(arm, attr);
                arm_pulls = arm_pulls.min(self.state.pair_pulls(arm, attr));
            }
            let deviation = (mean_sum / m as f64 - self.instance.arm_mean(arm)).abs();
            if deviation > radius_from_log_term(lt, arm_pulls) {
                self.note_violation(t);
            }
        }
    }

    fn calibrate(&mut self, t: u64, lt: f64) {
        let (n, m) = (self.instance.n_arms(), self.instance.n_attrs());
        let mut deviations = 0;
        for arm in 0..n {
            for attr in 0..m {
                let gap = (self.state.pair_mean(arm, attr) - self.instance.mean(arm, attr)).abs();
                if gap > radius_from_log_term(lt, self.state.pair_pulls(arm, attr)) {
                    deviations += 1;
                }
            }
        }
        self.report.calibration.push(CalibrationSample {
            round: t,
            deviations,
            pairs: (n * m) as u64,
        });
    }

    fn check_bootstrap(&mut self, rec: &TraceRecord) {
        let (n, m) = (self.instance.n_arms(), self.instance.n_attrs());
        if rec.stop {
            self.structure_error("round 1 must not stop".to_owned());
        }
        if rec.sets != SetSizes::default()
            || rec.confirmed_best.is_some()
            || rec.leader.is_some()
            || rec.competitor.is_some()
            || !rec.removed.is_empty()
        {
            self.structure_error("round 1 must carry no classification".to_owned());
        }
        if rec.pulls.len() != n * m {
            self.structure_error(format!(
                "round 1 must pull every pair once: got {} pulls, want {}",
                rec.pulls.len(),
                n * m
            ));
        }
        let mut seen = vec![false; n * m];
        for p in &rec.pulls {
            if p.arm >= n || p.attr >= m {
                self.structure_error(format!(
                    "pull of out-of-range pair ({}, {})",
                    p.arm + 1,
                    p.attr + 1
                ));
            } else if std::mem::replace(&mut seen[p.arm * m + p.attr], true) {
                self.structure_error(format!(
                    "round 1 pulled pair ({}, {}) twice",
                    p.arm + 1,
                    p.attr + 1
                ));
            }
        }
    }

    /// Protocol replay for one working round (policy-replay mode).
    fn check_css_round(&mut self, rec: &TraceRecord) {
        let t = rec.round;
        let mut expected_removed = self.state.newly_removed().to_vec();
        expected_removed.sort_unstable();
        let mut recorded_removed = rec.removed.clone();
        recorded_removed.sort_unstable();
        if expected_removed != recorded_removed {
            self.structure_error(format!(
                "round {t}: recorded exclusions {recorded_removed:?} do not match replay {expected_removed:?}"
            ));
        }

        let sizes = self.state.classification.set_sizes();
        if sizes != rec.sets {
            self.structure_error(format!(
                "round {t}: recorded set sizes {:?} do not match replay {:?}",
                rec.sets, sizes
            ));
        }
        if rec.confirmed_best != self.state.classification.confirmed_best {
            self.structure_error(format!(
                "round {t}: recorded confirmed-best {:?} does not match replay {:?}",
                rec.confirmed_best, self.state.classification.confirmed_best
            ));
        }
        let class = &self.state.classification;
        let unplausible_confirmed: Vec<usize> = class
            .confirmed_arms
            .iter()
            .copied()
            .filter(|&arm| !class.is_plausible(arm))
            .collect();
        for arm in unplausible_confirmed {
            self.structure_error(format!(
                "round {t}: confirmed arm {} is not plausible",
                arm + 1
            ));
        }

        let stop_decision = self.state.classification.check_stop();
        if rec.stop && rec.leader.is_none() {
            // Converged stop: the replayed classification must agree.
            match (stop_decision, rec.sets.plausible_arms) {
                (Some(StopDecision::Infeasible), 0) | (Some(StopDecision::Winner(_)), _) => {}
                (decision, _) => self.structure_error(format!(
                    "round {t}: stop recorded but replay says {decision:?} with {} plausible arms",
                    rec.sets.plausible_arms
                )),
            }
            if !rec.pulls.is_empty() {
                self.structure_error(format!("round {t}: stop record must not pull"));
            }
            return;
        }

        // Budget stops record the selection they abandoned; regular rounds
        // record the selection they pulled. Either way the stop rule must
        // not have fired, and the selection must match the replay.
        if stop_decision.is_some() {
            self.structure_error(format!(
                "round {t}: replay stops with {stop_decision:?} but the trace continues"
            ));
            return;
        }
        let (leader, competitor) = self.state.classification.select(&self.state.view());
        if rec.leader != Some(leader) || rec.competitor != competitor {
            self.structure_error(format!(
                "round {t}: recorded selection ({:?}, {:?}) does not match replay ({leader}, {competitor:?})",
                rec.leader, rec.competitor
            ));
        }

        if self.event_prefix_ok && !rec.stop {
            let view = self.state.view();
            let part = empirical_partition(view.arm_lo, view.arm_hi, self.separator);
            let class = &self.state.classification;
            let unsettled = selection_unsettled(class, &part, leader)
                || competitor.is_some_and(|c| selection_unsettled(class, &part, c));
            self.report.progress_rounds += 1;
            if !unsettled {
                self.report.progress_violations += 1;
            }
        }

        if rec.stop {
            if !rec.pulls.is_empty() {
                self.structure_error(format!("round {t}: stop record must not pull"));
            }
            return;
        }

        // The pulls must cover exactly the selected arms, whole.
        let m = self.instance.n_attrs();
        let mut expected: Vec<usize> = Some(leader).into_iter().chain(competitor).collect();
        expected.sort_unstable();
        let mut pulled: Vec<usize> = rec.pulls.iter().map(|p| p.arm).collect();
        pulled.sort_unstable();
        pulled.dedup();
        if pulled != expected || rec.pulls.len() != expected.len() * m {
            self.structure_error(format!(
                "round {t}: pulled arms {:?} do not cover the selection {:?} wholly",
                pulled, expected
            ));
        }
    }

    /// Structural checks common to the elimination protocols.
    fn check_elimination_round(&mut self, rec: &TraceRecord) {
        let t = rec.round;
        let sizes = rec.sets;
        if sizes.plausible_pairs != sizes.confirmed_pairs + sizes.boundary_pairs
            || sizes.plausible_arms != sizes.confirmed_arms + sizes.boundary_arms
        {
            self.structure_error(format!("round {t}: inconsistent set sizes {sizes:?}"));
        }
        if rec.stop {
            if !rec.pulls.is_empty() {
                self.structure_error(format!("round {t}: stop record must not pull"));
            }
            return;
        }
        // Round-robin over whole arms: every pulled arm contributes each
        // attribute exactly once.
        let m = self.instance.n_attrs();
        let mut arms: Vec<usize> = rec.pulls.iter().map(|p| p.arm).collect();
        arms.sort_unstable();
        arms.dedup();
        if rec.pulls.len() != arms.len() * m {
            self.structure_error(format!(
                "round {t}: {} pulls do not cover {} arms wholly",
                rec.pulls.len(),
                arms.len()
            ));
        }
    }

    fn fold_pulls(&mut self, rec: &TraceRecord) {
        let (n, m) = (self.instance.n_arms(), self.instance.n_attrs());
        for p in &rec.pulls {
            if p.arm >= n || p.attr >= m {
                continue; // already reported by the bootstrap/round checks
            }
            if !(0.0..=1.0).contains(&p.reward) {
                self.structure_error(format!(
                    "round {}: reward {} outside [0, 1]",
                    rec.round, p.reward
                ));
                continue;
            }
            if self.removed_ever[p.arm] {
                self.structure_error(format!(
                    "round {}: pull of removed arm {}",
                    rec.round,
                    p.arm + 1
                ));
            }
            self.state.record_reward(p.arm, p.attr, p.reward);
            self.report.total_pulls += 1;
            if !self.pending_pairs.contains(&(p.arm, p.attr)) {
                self.pending_pairs.push((p.arm, p.attr));
            }
            if !self.pending_arms.contains(&p.arm) {
                self.pending_arms.push(p.arm);
            }
        }
        // Whole-arm pulling keeps pair counts equal within each arm.
        let uneven: Vec<usize> = self
            .pending_arms
            .iter()
            .copied()
            .filter(|&arm| {
                let first = self.state.pair_pulls(arm, 0);
                (1..m).any(|attr| self.state.pair_pulls(arm, attr) != first)
            })
            .collect();
        for arm in uneven {
            self.structure_error(format!(
                "round {}: uneven attribute pulls on arm {}",
                rec.round,
                arm + 1
            ));
        }
        for &arm in &rec.removed {
            if arm >= n {
                self.structure_error(format!(
                    "round {}: removed arm {} out of range",
                    rec.round,
                    arm + 1
                ));
            } else if std::mem::replace(&mut self.removed_ever[arm], true) {
                self.structure_error(format!(
                    "round {}: arm {} removed twice",
                    rec.round,
                    arm + 1
                ));
            }
        }
    }
}

impl TraceSink for TraceVerifier {
    fn record(&mut self, rec: &TraceRecord) {
        if self.finished {
            self.structure_error(format!("round {}: record after stop", rec.round));
            return;
        }
        if rec.round != self.next_round {
            self.structure_error(format!(
                "round {} out of order (expected {})",
                rec.round, self.next_round
            ));
        }
        self.next_round = rec.round + 1;
        self.report.rounds = rec.round;

        if rec.round == 1 {
            self.check_bootstrap(rec);
        } else {
            let t = rec.round;
            if self.mode == VerifierMode::CssLucb {
                self.state.refresh(t);
            }
            let lt = log_term(
                t,
                self.state.delta(),
                self.state.n_arms(),
                self.state.n_attrs(),
            );
            self.check_pending(t, lt);
            if CALIBRATION_ROUNDS.contains(&t) {
                self.calibrate(t, lt);
            }
            match self.mode {
                VerifierMode::CssLucb => self.check_css_round(rec),
                VerifierMode::Elimination => self.check_elimination_round(rec),
            }
        }

        self.fold_pulls(rec);
        if rec.stop {
            self.finished = true;
            self.report.stopped = true;
        }
    }
}

/// Replays a stored record sequence through a fresh verifier.
#[must_use]
pub fn verify_records<'a, I>(
    instance: &ProblemInstance,
    delta: f64,
    mode: VerifierMode,
    records: I,
) -> TraceReport
where
    I: IntoIterator<Item = &'a TraceRecord>,
{
    let mut verifier = TraceVerifier::new(instance, delta, mode);
    for rec in records {
        verifier.record(rec);
    }
    verifier.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Environment;
    use crate::instance::{analyze, RewardFamily};
    use crate::policy::Policy;
    use crate::sets::OwnedBounds;
    use crate::trace::MemorySink;

    fn table_one() -> ProblemInstance {
        ProblemInstance::new(
            vec![vec![0.6, 0.4], vec![0.2, 1.0], vec![0.4, 0.4]],
            0.3,
            RewardFamily::Bernoulli,
        )
        .unwrap()
    }

    fn state_with_per_pair_rewards(
        inst: &ProblemInstance,
        rewards: &[Vec<f64>],
        repeats: u64,
    ) -> ConfidenceState {
        let mut state = ConfidenceState::new(inst.n_arms(), inst.n_attrs(), inst.threshold(), 0.1);
        for _ in 0..repeats {
            for (arm, row) in rewards.iter().enumerate() {
                for (attr, &value) in row.iter().enumerate() {
                    state.record_reward(arm, attr, value);
                }
            }
        }
        state
    }

    #[test]
    fn event_holds_when_means_are_exact() {
        let inst = table_one();
        let rewards = vec![vec![0.6, 0.4], vec![0.2, 1.0], vec![0.4, 0.4]];
        let state = state_with_per_pair_rewards(&inst, &rewards, 3);
        assert!(event_holds(&state, 2, &inst));
    }

    #[test]
    fn event_fails_on_a_displaced_mean() {
        // One pair observed at 1.0 while its true mean is 0.0: with enough
        // pulls the radius shrinks below the displacement.
        let inst = ProblemInstance::new(
            vec![vec![0.0, 0.9], vec![0.8, 0.7]],
            0.5,
            RewardFamily::Bernoulli,
        )
        .unwrap();
        let rewards = vec![vec![1.0, 0.9], vec![0.8, 0.7]];
        let state = state_with_per_pair_rewards(&inst, &rewards, 40);
        assert!(!event_holds(&state, 2, &inst));
    }

    #[test]
    fn partition_matches_true_means_under_zero_radius() {
        let inst = table_one();
        let truth = analyze(&inst);
        let bounds = OwnedBounds::zero_radius(&inst);
        let part = empirical_partition(&bounds.arm_lo, &bounds.arm_hi, truth.separator);
        assert_eq!(part.suboptimal, vec![2]);
        assert_eq!(part.risky, vec![0, 1]);
        assert!(part.neutral.is_empty());
    }

    #[test]
    fn partition_with_no_separator_is_all_risky() {
        let part = empirical_partition(&[0.1, 0.2], &[0.3, 0.4], f64::NEG_INFINITY);
        assert!(part.suboptimal.is_empty());
        assert_eq!(part.risky, vec![0, 1]);
    }

    #[test]
    fn partition_with_wide_intervals_is_all_neutral() {
        let part = empirical_partition(&[-1.0, -1.0], &[2.0, 2.0], 0.45);
        assert_eq!(part.neutral, vec![0, 1]);
        assert_eq!(
            part.suboptimal.len() + part.risky.len() + part.neutral.len(),
            2
        );
    }

    #[test]
    fn pull_threshold_for_table_one_arm_three() {
        let inst = table_one();
        let truth = analyze(&inst);
        let thresholds = pull_thresholds(&truth, 0.1, 3, 2, 100);
        // Mean gap of arm 3 is 0.1; ln(4*2*3*100^4/0.1) / (2 * 0.01) rounds
        // up to 1196.
        assert_eq!(thresholds[2].mean_gap_pulls, Some(1196));
        // The feasibility margin of arm 3 is also 0.1, so both thresholds
        // coincide (gap substitution symmetry).
        assert_eq!(thresholds[2].attr_gap_pulls, Some(1196));
        // The best arm's mean gap matches arm 3's distance, same count.
        assert_eq!(thresholds[0].mean_gap_pulls, Some(1196));
    }

    #[test]
    fn pull_threshold_with_unit_gap_and_small_log() {
        // gap = 1 and lt = 2 gives ceil(1) = 1.
        let inst =
            ProblemInstance::new(vec![vec![1.0], vec![0.0]], 0.5, RewardFamily::Bernoulli).unwrap();
        let truth = analyze(&inst);
        assert_eq!(truth.gaps[1], Some(1.0));
        // Solve for delta making lt exactly 2 at t = 1: ln(4NM/delta) = 2.
        let delta = 4.0 * 2.0 / 2.0_f64.exp();
        let thresholds = pull_thresholds(&truth, delta, 2, 1, 1);
        assert_eq!(thresholds[1].mean_gap_pulls, Some(1));
    }

    #[test]
    fn zero_gap_arms_are_excluded_from_thresholds() {
        let inst =
            ProblemInstance::new(vec![vec![0.9], vec![0.5]], 0.5, RewardFamily::Bernoulli).unwrap();
        let truth = analyze(&inst);
        let thresholds = pull_thresholds(&truth, 0.1, 2, 1, 10);
        // Arm 2 sits exactly on the threshold: margin 0, excluded.
        assert_eq!(thresholds[1].attr_gap_pulls, None);
        assert!(thresholds[1].mean_gap_pulls.is_some());
    }

    #[test]
    fn termination_budget_frozen_value() {
        let truth = analyze(&table_one());
        let budget = termination_budget(&truth, 0.1).unwrap();
        assert!(!budget.vacuous);
        assert!((budget.pulls - 1_302_922.617_439_156_9).abs() < 1e-6);
    }

    #[test]
    fn termination_budget_is_monotone_in_hardness() {
        let easy = analyze(
            &ProblemInstance::new(vec![vec![0.9], vec![0.1]], 0.5, RewardFamily::Bernoulli)
                .unwrap(),
        );
        let hard = analyze(&table_one());
        let be = termination_budget(&easy, 0.9).unwrap();
        let bh = termination_budget(&hard, 0.9).unwrap();
        assert!(!be.vacuous && !bh.vacuous);
        assert!(bh.pulls > be.pulls);
    }

    #[test]
    fn termination_budget_vacuous_when_hardness_reaches_delta() {
        // A validated instance always has hardness >= 1 > delta, so the
        // vacuous clamp is exercised with a synthetic ground truth.
        let mut truth = analyze(&table_one());
        truth.hardness = 0.1;
        let budget = termination_budget(&truth, 0.1).unwrap();
        assert!(budget.vacuous);
        assert_eq!(budget.pulls, 0.0);
    }

    #[test]
    fn termination_budget_rejects_bad_inputs() {
        let truth = analyze(&table_one());
        assert_eq!(
            termination_budget(&truth, 0.0).unwrap_err(),
            AnalyticsError::InvalidDelta(0.0)
        );
        let degenerate =
            ProblemInstance::new(vec![vec![0.5], vec![0.2]], 0.5, RewardFamily::Bernoulli).unwrap();
        let truth = analyze(&degenerate);
        assert_eq!(
            termination_budget(&truth, 0.1).unwrap_err(),
            AnalyticsError::DegenerateInstance
        );
    }

    #[test]
    fn verifier_accepts_a_recorded_css_run() {
        let inst = table_one();
        let mut env = Environment::new(&inst, 7);
        let mut sink = MemorySink::default();
        let result = Policy::CssLucb
            .run(3, 2, 0.3, 0.1, &mut env, u64::MAX, &mut sink)
            .unwrap();
        let report = verify_records(&inst, 0.1, VerifierMode::CssLucb, &sink.records);
        assert!(report.structure_ok(), "{:?}", report.structure_errors);
        assert!(report.stopped);
        assert_eq!(report.rounds, result.rounds);
        assert_eq!(report.total_pulls, result.total_pulls);
        if report.event_ok() {
            assert_eq!(report.progress_violations, 0);
            assert!(report.progress_rounds > 0);
        }
        assert!(!report.calibration.is_empty());
        for sample in &report.calibration {
            assert_eq!(sample.pairs, 6);
        }
    }

    #[test]
    fn verifier_accepts_recorded_elimination_runs() {
        let inst = table_one();
        for policy in [Policy::GroupedElim, Policy::FeasThenBai] {
            let mut env = Environment::new(&inst, 8);
            let mut sink = MemorySink::default();
            let result = policy
                .run(3, 2, 0.3, 0.1, &mut env, u64::MAX, &mut sink)
                .unwrap();
            let report = verify_records(&inst, 0.1, VerifierMode::Elimination, &sink.records);
            assert!(
                report.structure_ok(),
                "{policy}: {:?}",
                report.structure_errors
            );
            assert!(report.stopped);
            assert_eq!(report.total_pulls, result.total_pulls);
        }
    }

    #[test]
    fn verifier_flags_tampered_traces() {
        let inst = table_one();
        let mut env = Environment::new(&inst, 9);
        let mut sink = MemorySink::default();
        Policy::CssLucb
            .run(3, 2, 0.3, 0.1, &mut env, u64::MAX, &mut sink)
            .unwrap();

        // Tamper 1: inflate a recorded set size.
        let mut tampered = sink.records.clone();
        tampered[2].sets.plausible_pairs += 1;
        let report = verify_records(&inst, 0.1, VerifierMode::CssLucb, &tampered);
        assert!(!report.structure_ok());

        // Tamper 2: drop the stop record.
        let mut truncated = sink.records.clone();
        truncated.pop();
        let report = verify_records(&inst, 0.1, VerifierMode::CssLucb, &truncated);
        assert!(report
            .structure_errors
            .iter()
            .any(|e| e.contains("without a stop")));

        // Tamper 3: move the recorded leader to a different arm.
        let mut swapped = sink.records.clone();
        if let Some(rec) = swapped.iter_mut().find(|r| r.leader.is_some()) {
            rec.leader = Some((rec.leader.unwrap() + 1) % 3);
        }
        let report = verify_records(&inst, 0.1, VerifierMode::CssLucb, &swapped);
        assert!(report
            .structure_errors
            .iter()
            .any(|e| e.contains("selection")));
    }

    #[test]
    fn verifier_flags_event_violations_in_doctored_rewards() {
        let inst = table_one();
        let mut env = Environment::new(&inst, 10);
        let mut sink = MemorySink::default();
        Policy::CssLucb
            .run(3, 2, 0.3, 0.1, &mut env, u64::MAX, &mut sink)
            .unwrap();
        // Re-fold with every reward of a heavily pulled pair forced to 1.0
        // while its true mean is 0.6: once the radius shrinks below the 0.4
        // displacement, the empirical mean leaves the confidence band.
        let mut doctored = sink.records.clone();
        for rec in &mut doctored {
            for p in &mut rec.pulls {
                if p.arm == 0 && p.attr == 0 {
                    p.reward = 1.0;
                }
            }
        }
        let report = verify_records(&inst, 0.1, VerifierMode::Elimination, &doctored);
        assert!(!report.event_ok());
        assert!(report.first_violation_round.is_some());
    }

    #[test]
    fn snapshot_reports_unsettled_selection_mid_run() {
        let inst = table_one();
        let truth = analyze(&inst);
        let rewards = vec![vec![0.6, 0.4], vec![0.2, 1.0], vec![0.4, 0.4]];
        let mut state = state_with_per_pair_rewards(&inst, &rewards, 2);
        state.refresh(2);
        let snap = snapshot(&state, 2, &inst, &truth);
        assert!(snap.event_holds);
        // At t = 2 the radii dwarf every gap: nothing is classified, and the
        // selection is necessarily unsettled.
        assert_eq!(snap.partition.neutral.len(), 3);
        assert!(snap.selection_unsettled);
    }
}
