//! Confidence-bound state and the empirical set classifier.
//!
//! The classifier is a pure function over a [`BoundsView`]: given per-pair
//! and per-arm confidence intervals it produces the empirical sets that
//! drive sampling and stopping — confirmed/boundary/plausible pairs and
//! arms, the confirmed-best arm, and the contender set. Keeping it pure
//! lets three consumers share one code path:
//!
//! - the CSS-LUCB policy, via the stateful [`ConfidenceState`];
//! - ground-truth oracle checks, via [`OwnedBounds::zero_radius`] (exact
//!   means, zero-width intervals);
//! - the trace verifier, which replays a recorded reward log through its
//!   own [`ConfidenceState`].
//!
//! Exclusion is monotone: once any attribute's upper bound falls below the
//! threshold the arm is removed permanently and its bounds freeze at that
//! round's values. A frozen upper bound would otherwise grow again with the
//! round index and could re-admit the arm.

use crate::confidence::{log_term, radius_from_log_term};
use crate::instance::ProblemInstance;
use crate::trace::SetSizes;

/// Borrowed view of one round's bounds, the classifier's only input.
///
/// Slices are row-major `n_arms x n_attrs` for pairs and length `n_arms`
/// for arms. `live[i]` is `false` for permanently excluded arms, whose
/// bounds are frozen at their exclusion round.
#[derive(Debug, Clone, Copy)]
pub struct BoundsView<'a> {
    pub n_arms: usize,
    pub n_attrs: usize,
    pub threshold: f64,
    pub attr_lo: &'a [f64],
    pub attr_hi: &'a [f64],
    pub arm_mean: &'a [f64],
    pub arm_lo: &'a [f64],
    pub arm_hi: &'a [f64],
    pub live: &'a [bool],
}

/// What the stopping rule decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// No arm remains plausible: declare the instance infeasible.
    Infeasible,
    /// A confirmed arm has no plausible contender left: declare it best.
    Winner(usize),
}

/// The empirical sets of one round. Arm lists are sorted ascending.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Classification {
    /// Pairs (over live arms) whose lower bound clears the threshold.
    pub confirmed_pairs: usize,
    /// Pairs (over live arms) whose interval straddles the threshold.
    pub boundary_pairs: usize,
    /// Pairs (over live arms) whose upper bound clears the threshold.
    pub plausible_pairs: usize,
    /// Arms with every attribute confirmed.
    pub confirmed_arms: Vec<usize>,
    /// Arms with every attribute plausible (the arms still in the running
    /// for feasibility).
    pub plausible_arms: Vec<usize>,
    /// Highest empirical mean among confirmed arms, lowest index on ties.
    pub confirmed_best: Option<usize>,
    /// Arms that could still beat the confirmed-best arm: live arms other
    /// than it whose upper bound reaches its lower bound. With no confirmed
    /// best, every arm is a contender.
    pub contenders: Vec<usize>,
}

impl Classification {
    /// Recomputes every set from the given bounds.
    pub fn classify(&mut self, view: &BoundsView<'_>) {
        let (n, m, th) = (view.n_arms, view.n_attrs, view.threshold);
        self.confirmed_pairs = 0;
        self.boundary_pairs = 0;
        self.plausible_pairs = 0;
        self.confirmed_arms.clear();
        self.plausible_arms.clear();
        self.contenders.clear();
        for i in 0..n {
            if !view.live[i] {
                continue;
            }
            let mut all_confirmed = true;
            let mut all_plausible = true;
            for j in 0..m {
                let lo = view.attr_lo[i * m + j];
                let hi = view.attr_hi[i * m + j];
                if lo >= th {
                    self.confirmed_pairs += 1;
                } else if hi >= th {
                    self.boundary_pairs += 1;
                    all_confirmed = false;
                } else {
                    all_confirmed = false;
                    all_plausible = false;
                }
            }
            if all_plausible {
                self.plausible_arms.push(i);
                if all_confirmed {
                    self.confirmed_arms.push(i);
                }
            }
        }
        self.plausible_pairs = self.confirmed_pairs + self.boundary_pairs;

        self.confirmed_best = self.confirmed_arms.iter().copied().reduce(|best, i| {
            if view.arm_mean[i] > view.arm_mean[best] {
                i
            } else {
                best
            }
        });

        match self.confirmed_best {
            Some(best) => {
                let floor = view.arm_lo[best];
                for i in 0..n {
                    if i != best && view.live[i] && view.arm_hi[i] >= floor {
                        self.contenders.push(i);
                    }
                }
            }
            None => self.contenders.extend(0..n),
        }
    }

    /// Set sizes for trace records.
    #[must_use]
    pub fn set_sizes(&self) -> SetSizes {
        SetSizes {
            confirmed_pairs: self.confirmed_pairs,
            boundary_pairs: self.boundary_pairs,
            plausible_pairs: self.plausible_pairs,
            confirmed_arms: self.confirmed_arms.len(),
            boundary_arms: self.plausible_arms.len() - self.confirmed_arms.len(),
            plausible_arms: self.plausible_arms.len(),
            contenders: self.contenders.len(),
        }
    }

    /// Whether the arm is plausible (still in the running for feasibility).
    #[must_use]
    pub fn is_plausible(&self, arm: usize) -> bool {
        self.plausible_arms.binary_search(&arm).is_ok()
    }

    /// Whether every attribute of the arm is confirmed.
    #[must_use]
    pub fn is_confirmed(&self, arm: usize) -> bool {
        self.confirmed_arms.binary_search(&arm).is_ok()
    }

    /// The stopping rule: infeasible when nothing is plausible; a winner
    /// when a confirmed arm has no plausible contender left.
    #[must_use]
    pub fn check_stop(&self) -> Option<StopDecision> {
        if self.plausible_arms.is_empty() {
            return Some(StopDecision::Infeasible);
        }
        if let Some(best) = self.confirmed_best {
            let plausible_contender = self.contenders.iter().any(|&i| self.is_plausible(i));
            if !plausible_contender {
                return Some(StopDecision::Winner(best));
            }
        }
        None
    }

    /// Sampling rule: the leader (highest empirical mean among plausible
    /// arms) and its competitor (highest upper bound among the remaining
    /// plausible arms), both lowest-index on ties.
    ///
    /// Callers must have checked the stopping rule first; at least one
    /// plausible arm is required.
    #[must_use]
    pub fn select(&self, view: &BoundsView<'_>) -> (usize, Option<usize>) {
        let leader = self
            .plausible_arms
            .iter()
            .copied()
            .reduce(|best, i| {
                if view.arm_mean[i] > view.arm_mean[best] {
                    i
                } else {
                    best
                }
            })
            .expect("selection requires a plausible arm");
        let competitor = self
            .plausible_arms
            .iter()
            .copied()
            .filter(|&i| i != leader)
            .reduce(|best, i| {
                if view.arm_hi[i] > view.arm_hi[best] {
                    i
                } else {
                    best
                }
            });
        (leader, competitor)
    }
}

/// Owned bound buffers, for constructing views without a sampling run.
#[derive(Debug, Clone)]
pub struct OwnedBounds {
    pub n_arms: usize,
    pub n_attrs: usize,
    pub threshold: f64,
    pub attr_lo: Vec<f64>,
    pub attr_hi: Vec<f64>,
    pub arm_mean: Vec<f64>,
    pub arm_lo: Vec<f64>,
    pub arm_hi: Vec<f64>,
    pub live: Vec<bool>,
}

impl OwnedBounds {
    /// The zero-radius oracle state: every interval collapsed onto the true
    /// means. Arms with any attribute below the threshold are excluded
    /// outright, exactly as the monotone-exclusion rule would with exact
    /// bounds.
    #[must_use]
    pub fn zero_radius(inst: &ProblemInstance) -> Self {
        let (n, m) = (inst.n_arms(), inst.n_attrs());
        let mut attr = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                attr.push(inst.mean(i, j));
            }
        }
        let arm_mean: Vec<f64> = (0..n).map(|i| inst.arm_mean(i)).collect();
        let live: Vec<bool> = (0..n).map(|i| inst.is_feasible(i)).collect();
        OwnedBounds {
            n_arms: n,
            n_attrs: m,
            threshold: inst.threshold(),
            attr_lo: attr.clone(),
            attr_hi: attr,
            arm_lo: arm_mean.clone(),
            arm_hi: arm_mean.clone(),
            arm_mean,
            live,
        }
    }

    #[must_use]
    pub fn view(&self) -> BoundsView<'_> {
        BoundsView {
            n_arms: self.n_arms,
            n_attrs: self.n_attrs,
            threshold: self.threshold,
            attr_lo: &self.attr_lo,
            attr_hi: &self.attr_hi,
            arm_mean: &self.arm_mean,
            arm_lo: &self.arm_lo,
            arm_hi: &self.arm_hi,
            live: &self.live,
        }
    }
}

/// Running statistics and bounds for one identification run.
///
/// `refresh(t)` recomputes live arms' bounds at round `t` (radii use pull
/// counts accumulated through round `t - 1`), applies monotone exclusion,
/// and reclassifies. Pair pull counts must be at least 1 for live arms by
/// then — the bootstrap round guarantees this.
#[derive(Debug, Clone)]
pub struct ConfidenceState {
    n_arms: usize,
    n_attrs: usize,
    threshold: f64,
    delta: f64,
    pulls: Vec<u64>,
    sums: Vec<f64>,
    total_pulls: u64,
    bounds: OwnedBounds,
    newly_removed: Vec<usize>,
    pub classification: Classification,
}

impl ConfidenceState {
    #[must_use]
    pub fn new(n_arms: usize, n_attrs: usize, threshold: f64, delta: f64) -> Self {
        Self {
            n_arms,
            n_attrs,
            threshold,
            delta,
            pulls: vec![0; n_arms * n_attrs],
            sums: vec![0.0; n_arms * n_attrs],
            total_pulls: 0,
            bounds: OwnedBounds {
                n_arms,
                n_attrs,
                threshold,
                attr_lo: vec![f64::NEG_INFINITY; n_arms * n_attrs],
                attr_hi: vec![f64::INFINITY; n_arms * n_attrs],
                arm_mean: vec![0.0; n_arms],
                arm_lo: vec![f64::NEG_INFINITY; n_arms],
                arm_hi: vec![f64::INFINITY; n_arms],
                live: vec![true; n_arms],
            },
            newly_removed: Vec::new(),
            classification: Classification::default(),
        }
    }

    /// Accumulates one reward.
    pub fn record_reward(&mut self, arm: usize, attr: usize, value: f64) {
        debug_assert!(
            (0.0..=1.0).contains(&value),
            "reward {value} outside [0, 1]"
        );
        let k = arm * self.n_attrs + attr;
        self.pulls[k] += 1;
        self.sums[k] += value;
        self.total_pulls += 1;
    }

    /// Recomputes bounds at round `t`, applies exclusion, reclassifies.
    pub fn refresh(&mut self, t: u64) {
        let (n, m) = (self.n_arms, self.n_attrs);
        let lt = log_term(t, self.delta, n, m);
        self.newly_removed.clear();
        for i in 0..n {
            if !self.bounds.live[i] {
                continue;
            }
            let mut arm_pulls = u64::MAX;
            let mut mean_sum = 0.0;
            let mut excluded = false;
            for j in 0..m {
                let k = i * m + j;
                let pulls = self.pulls[k];
                debug_assert!(pulls >= 1, "live arm must have been bootstrapped");
                let mean = self.sums[k] / pulls as f64;
                let radius = radius_from_log_term(lt, pulls);
                self.bounds.attr_lo[k] = mean - radius;
                self.bounds.attr_hi[k] = mean + radius;
                excluded |= mean + radius < self.threshold;
                arm_pulls = arm_pulls.min(pulls);
                mean_sum += mean;
            }
            let arm_mean = mean_sum / m as f64;
            let radius = radius_from_log_term(lt, arm_pulls);
            self.bounds.arm_mean[i] = arm_mean;
            self.bounds.arm_lo[i] = arm_mean - radius;
            self.bounds.arm_hi[i] = arm_mean + radius;
            if excluded {
                // Freeze this round's bounds and retire the arm.
                self.bounds.live[i] = false;
                self.newly_removed.push(i);
            }
        }
        let view = self.bounds.view();
        self.classification.classify(&view);
    }

    /// Arms excluded by the most recent `refresh`.
    #[must_use]
    pub fn newly_removed(&self) -> &[usize] {
        &self.newly_removed
    }

    /// Whether the arm is still live (never excluded).
    #[must_use]
    pub fn is_live(&self, arm: usize) -> bool {
        self.bounds.live[arm]
    }

    #[must_use]
    pub fn view(&self) -> BoundsView<'_> {
        self.bounds.view()
    }

    #[must_use]
    pub fn total_pulls(&self) -> u64 {
        self.total_pulls
    }

    /// Pull count of one pair.
    #[must_use]
    pub fn pair_pulls(&self, arm: usize, attr: usize) -> u64 {
        self.pulls[arm * self.n_attrs + attr]
    }

    /// Empirical mean of one pair (0 before any pull).
    #[must_use]
    pub fn pair_mean(&self, arm: usize, attr: usize) -> f64 {
        let k = arm * self.n_attrs + attr;
        if self.pulls[k] == 0 {
            0.0
        } else {
            self.sums[k] / self.pulls[k] as f64
        }
    }

    /// Pull counts as an `n_arms x n_attrs` matrix.
    #[must_use]
    pub fn pulls_matrix(&self) -> Vec<Vec<u64>> {
        (0..self.n_arms)
            .map(|i| self.pulls[i * self.n_attrs..(i + 1) * self.n_attrs].to_vec())
            .collect()
    }

    #[must_use]
    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    #[must_use]
    pub fn n_attrs(&self) -> usize {
        self.n_attrs
    }

    #[must_use]
    pub fn delta(&self) -> f64 {
        self.delta
    }
}
