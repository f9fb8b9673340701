//! Problem instances and exact ground-truth analytics.
//!
//! A [`ProblemInstance`] is an `N x M` matrix of attribute means in `[0, 1]`,
//! a feasibility threshold, and a reward family. [`analyze`] computes every
//! instance-dependent quantity the identification problem is governed by:
//!
//! - the feasible set `F` (arms whose minimum attribute mean clears the
//!   threshold) and the unique best feasible arm `i*`;
//! - the sub-optimal set `S` (arm mean below the best feasible mean) and the
//!   risky set `R` (the rest — arms at or above the best feasible mean,
//!   necessarily infeasible);
//! - mean gaps, attribute gaps, the separator (midpoint between the two best
//!   feasible-side means), and the **hardness index** — a sum of inverse
//!   squared gaps that governs sample complexity from both sides;
//! - an information-theoretic lower bound on expected sample complexity
//!   ([`lower_bound`]).
//!
//! Instances whose best feasible arm is tied are rejected at validation:
//! identification would be ill-posed, and silently breaking float ties would
//! hide that.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Reward distribution family for every attribute stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardFamily {
    /// Rewards in `{0, 1}` with the given mean.
    Bernoulli,
    /// `Beta(mu * kappa, (1 - mu) * kappa)` rewards: mean `mu`, one
    /// concentration knob `kappa` controlling variance. Attribute means of
    /// exactly 0 or 1 degrade to constant rewards.
    Beta {
        /// Concentration `kappa > 0`; larger means lower variance.
        concentration: f64,
    },
}

impl RewardFamily {
    /// Stable name used in files and reports.
    #[must_use]
    pub fn name(&self) -> &'static str {
        match self {
            RewardFamily::Bernoulli => "bernoulli",
            RewardFamily::Beta { .. } => "beta",
        }
    }
}

/// Validation and parse errors for instance files and matrices.
///
/// Row and column numbers in messages are 1-based, matching the file format.
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("failed to read instance file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("means matrix is empty: need at least one arm with one attribute")]
    EmptyMatrix,
    #[error("row {row} has {found} attributes, expected {expected} (rows must be equal length)")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("mean at row {row}, column {col} is {value}, outside [0, 1]")]
    MeanOutOfRange { row: usize, col: usize, value: f64 },
    #[error("threshold is {value}, outside [0, 1]")]
    ThresholdOutOfRange { value: f64 },
    #[error("unknown reward family {value:?}: expected \"bernoulli\" or \"beta\"")]
    UnknownRewardFamily { value: String },
    #[error("concentration is {value}, must be a positive finite number")]
    InvalidConcentration { value: f64 },
    #[error("concentration given but reward family is \"bernoulli\"")]
    SpuriousConcentration,
    #[error(
        "arms {first} and {second} are both feasible with equal mean {mean}: \
         the best feasible arm must be unique"
    )]
    TiedBestArm {
        first: usize,
        second: usize,
        mean: f64,
    },
}

/// An `N x M` grouped-bandit instance: attribute means, feasibility
/// threshold, and reward family.
///
/// Construction validates everything, including uniqueness of the best
/// feasible arm, so downstream analytics are infallible.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    means: Vec<Vec<f64>>,
    threshold: f64,
    reward_family: RewardFamily,
}

impl ProblemInstance {
    /// Validates and builds an instance.
    ///
    /// # Errors
    ///
    /// Any shape, range, family, or tied-best-arm violation, with 1-based
    /// row/column coordinates of the first offender.
    pub fn new(
        means: Vec<Vec<f64>>,
        threshold: f64,
        reward_family: RewardFamily,
    ) -> Result<Self, InstanceError> {
        if means.is_empty() || means[0].is_empty() {
            return Err(InstanceError::EmptyMatrix);
        }
        let m = means[0].len();
        for (i, row) in means.iter().enumerate() {
            if row.len() != m {
                return Err(InstanceError::RaggedRow {
                    row: i + 1,
                    expected: m,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(InstanceError::MeanOutOfRange {
                        row: i + 1,
                        col: j + 1,
                        value: v,
                    });
                }
            }
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(InstanceError::ThresholdOutOfRange { value: threshold });
        }
        if let RewardFamily::Beta { concentration } = reward_family {
            if !(concentration.is_finite() && concentration > 0.0) {
                return Err(InstanceError::InvalidConcentration {
                    value: concentration,
                });
            }
        }
        let inst = Self {
            means,
            threshold,
            reward_family,
        };
        // The best feasible arm, when it exists, must be unique: ties make
        // the identification target ill-posed.
        let feasible: Vec<usize> = (0..inst.n_arms())
            .filter(|&i| inst.is_feasible(i))
            .collect();
        if let Some((&first, rest)) = feasible.split_first() {
            let mut best = first;
            for &i in rest {
                let (a, b) = (inst.arm_mean(i), inst.arm_mean(best));
                if a > b {
                    best = i;
                } else if a == b {
                    return Err(InstanceError::TiedBestArm {
                        first: best + 1,
                        second: i + 1,
                        mean: a,
                    });
                }
            }
        }
        Ok(inst)
    }

    /// Parses an instance from its JSON document form.
    ///
    /// Schema: `{"threshold": 0.3, "reward_family": "bernoulli" | "beta",
    /// "concentration": 2.0, "means": [[...], ...]}` where `concentration`
    /// is beta-only and defaults to 2.
    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let family = match file.reward_family.as_str() {
            "bernoulli" => {
                if file.concentration.is_some() {
                    return Err(InstanceError::SpuriousConcentration);
                }
                RewardFamily::Bernoulli
            }
            "beta" => RewardFamily::Beta {
                concentration: file.concentration.unwrap_or(2.0),
            },
            other => {
                return Err(InstanceError::UnknownRewardFamily {
                    value: other.to_owned(),
                })
            }
        };
        Self::new(file.means, file.threshold, family)
    }

    /// Reads and parses an instance file.
    pub fn from_path(path: &Path) -> Result<Self, InstanceError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Number of arms `N`.
    #[must_use]
    pub fn n_arms(&self) -> usize {
        self.means.len()
    }

    /// Number of attributes per arm `M`.
    #[must_use]
    pub fn n_attrs(&self) -> usize {
        self.means[0].len()
    }

    /// True attribute mean (0-based indices).
    #[must_use]
    pub fn mean(&self, arm: usize, attr: usize) -> f64 {
        self.means[arm][attr]
    }

    /// True arm mean: average of the arm's attribute means.
    #[must_use]
    pub fn arm_mean(&self, arm: usize) -> f64 {
        let row = &self.means[arm];
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// Feasibility threshold.
    #[must_use]
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Reward family.
    #[must_use]
    pub fn reward_family(&self) -> RewardFamily {
        self.reward_family
    }

    /// Whether every attribute mean of `arm` clears the threshold.
    #[must_use]
    pub fn is_feasible(&self, arm: usize) -> bool {
        self.means[arm].iter().all(|&v| v >= self.threshold)
    }

    /// Copy with the beta concentration replaced; Bernoulli instances are
    /// returned unchanged.
    #[must_use]
    pub fn with_concentration(mut self, concentration: f64) -> Self {
        if let RewardFamily::Beta { .. } = self.reward_family {
            self.reward_family = RewardFamily::Beta { concentration };
        }
        self
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    threshold: f64,
    reward_family: String,
    #[serde(default)]
    concentration: Option<f64>,
    means: Vec<Vec<f64>>,
}

/// Errors from analytics that require finite gaps or a valid confidence
/// level.
#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error(
        "degenerate instance: a gap required by the hardness index is zero, \
         so the hardness index is infinite"
    )]
    DegenerateInstance,
    #[error("delta is {0}, must lie strictly between 0 and 1")]
    InvalidDelta(f64),
}

/// Everything the identification problem's difficulty depends on, computed
/// exactly from the true means. All indices 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Feasible arms `F`: every attribute mean clears the threshold.
    pub feasible: Vec<usize>,
    /// `true` iff at least one arm is feasible.
    pub feasibility_flag: bool,
    /// The unique best feasible arm `i*`, if any arm is feasible.
    pub best_arm: Option<usize>,
    /// True arm means.
    pub arm_means: Vec<f64>,
    /// Sub-optimal arms `S`: arm mean strictly below the best feasible mean.
    /// Empty when no arm is feasible.
    pub suboptimal: Vec<usize>,
    /// Risky arms `R`: everything that is neither `i*` nor sub-optimal.
    /// When a best arm exists these have means at or above it and are
    /// necessarily infeasible; when nothing is feasible, all arms are risky.
    pub risky: Vec<usize>,
    /// Best sub-optimal arm `i**` (highest mean in `S`), if `S` is
    /// non-empty.
    pub second_best: Option<usize>,
    /// Mean gaps: for `i` in `S`, distance to the best feasible mean; for
    /// `i*`, distance to the best sub-optimal mean (absent when `S` is
    /// empty). `None` where undefined.
    pub gaps: Vec<Option<f64>>,
    /// Per-attribute distance to the threshold, `|mean - threshold|`.
    pub attr_gaps: Vec<Vec<f64>>,
    /// Per-arm feasibility margin: `|min attribute mean - threshold|`.
    pub arm_attr_gaps: Vec<f64>,
    /// Separator: midpoint of the best feasible and best sub-optimal means,
    /// or `-inf` when either side is missing.
    pub separator: f64,
    /// Hardness index; `+inf` exactly when the best feasible arm sits on
    /// the threshold (zero feasibility margin).
    pub hardness: f64,
}

impl GroundTruth {
    /// Whether the arm is feasible (membership in `F`).
    #[must_use]
    pub fn is_feasible(&self, arm: usize) -> bool {
        self.feasible.binary_search(&arm).is_ok()
    }

    /// Whether the arm is sub-optimal (membership in `S`).
    #[must_use]
    pub fn is_suboptimal(&self, arm: usize) -> bool {
        self.suboptimal.binary_search(&arm).is_ok()
    }
}

/// Computes the full [`GroundTruth`] of a validated instance.
#[must_use]
pub fn analyze(inst: &ProblemInstance) -> GroundTruth {
    let n = inst.n_arms();
    let th = inst.threshold();
    let arm_means: Vec<f64> = (0..n).map(|i| inst.arm_mean(i)).collect();
    let feasible: Vec<usize> = (0..n).filter(|&i| inst.is_feasible(i)).collect();
    let attr_gaps: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..inst.n_attrs())
                .map(|j| (inst.mean(i, j) - th).abs())
                .collect()
        })
        .collect();
    let arm_attr_gaps: Vec<f64> = (0..n)
        .map(|i| {
            let min = inst.means[i].iter().copied().fold(f64::INFINITY, f64::min);
            (min - th).abs()
        })
        .collect();

    if feasible.is_empty() {
        // No feasible arm: every arm is risky, and the hardness index is
        // driven solely by how far each arm sits below the threshold.
        let hardness = arm_attr_gaps.iter().map(|g| 1.0 / (g * g)).sum();
        return GroundTruth {
            feasible,
            feasibility_flag: false,
            best_arm: None,
            arm_means,
            suboptimal: Vec::new(),
            risky: (0..n).collect(),
            second_best: None,
            gaps: vec![None; n],
            attr_gaps,
            arm_attr_gaps,
            separator: f64::NEG_INFINITY,
            hardness: f64::INFINITY.min(hardness),
        };
    }

    let best = *feasible
        .iter()
        .max_by(|&&a, &&b| {
            arm_means[a]
                .partial_cmp(&arm_means[b])
                .expect("means are finite")
        })
        .expect("feasible set is non-empty");
    let suboptimal: Vec<usize> = (0..n).filter(|&i| arm_means[i] < arm_means[best]).collect();
    let risky: Vec<usize> = (0..n)
        .filter(|&i| i != best && arm_means[i] >= arm_means[best])
        .collect();
    debug_assert!(
        risky.iter().all(|&i| !inst.is_feasible(i)),
        "a feasible arm at or above the best mean would have tied or won validation"
    );
    // Ties among sub-optimal means break to the lowest index, the same
    // convention every argmax in the library follows.
    let mut second_best: Option<usize> = None;
    for &i in &suboptimal {
        if second_best.is_none_or(|s| arm_means[i] > arm_means[s]) {
            second_best = Some(i);
        }
    }
    let mut gaps: Vec<Option<f64>> = vec![None; n];
    for &i in &suboptimal {
        gaps[i] = Some(arm_means[best] - arm_means[i]);
    }
    if let Some(ss) = second_best {
        gaps[best] = Some(arm_means[best] - arm_means[ss]);
    }
    let separator = match second_best {
        Some(ss) => (arm_means[best] + arm_means[ss]) / 2.0,
        None => f64::NEG_INFINITY,
    };

    // Hardness index: the best arm pays the tighter of half its mean gap
    // and its feasibility margin; feasible sub-optimal arms pay half their
    // mean gap; infeasible arms pay whichever of mean gap or feasibility
    // margin rules them out faster (risky arms only have the margin).
    let best_term = {
        let margin = arm_attr_gaps[best];
        let scale = match gaps[best] {
            Some(d) => (d / 2.0).min(margin),
            None => margin,
        };
        1.0 / (scale * scale)
    };
    let mut hardness = best_term;
    for &i in &suboptimal {
        let half_gap = gaps[i].expect("gap set for every sub-optimal arm") / 2.0;
        if inst.is_feasible(i) {
            hardness += 1.0 / (half_gap * half_gap);
        } else {
            let scale = half_gap.max(arm_attr_gaps[i]);
            hardness += 1.0 / (scale * scale);
        }
    }
    for &i in &risky {
        let g = arm_attr_gaps[i];
        hardness += 1.0 / (g * g);
    }

    GroundTruth {
        feasible,
        feasibility_flag: true,
        best_arm: Some(best),
        arm_means,
        suboptimal,
        risky,
        second_best,
        gaps,
        attr_gaps,
        arm_attr_gaps,
        separator,
        hardness,
    }
}

/// The hardness index, or an error when it is infinite.
///
/// The only degenerate source is a best feasible arm whose weakest attribute
/// sits exactly on the threshold: every other gap the index needs is
/// strictly positive by construction.
pub fn hardness_index(gt: &GroundTruth) -> Result<f64, AnalyticsError> {
    if gt.hardness.is_finite() {
        Ok(gt.hardness)
    } else {
        Err(AnalyticsError::DegenerateInstance)
    }
}

/// Lower bound on expected sample complexity for a `delta`-correct learner.
///
/// `samples = ln(1/(2.4 delta)) * constant * hardness`, where `constant` is
/// the minimum of up to three instance constants, each attached to a class
/// of arms and **omitted from the minimum when its class is empty**:
///
/// - `c1` — risky arms (infeasible, mean at or above the best feasible
///   mean);
/// - `c2` — feasible arms (the construction perturbs the best arm itself);
/// - `c3` — infeasible sub-optimal arms.
///
/// The value fields report every constant whose formula is computable
/// (`c2`/`c3` need only a best arm) even when its class is empty and it is
/// excluded from the minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    /// Risky-arm constant; `None` when no risky arm exists.
    pub c1: Option<f64>,
    /// Best-arm perturbation constant; `None` when no arm is feasible.
    pub c2: Option<f64>,
    /// Infeasible-sub-optimal constant; `None` when no arm is feasible.
    pub c3: Option<f64>,
    /// Minimum over the constants whose arm classes are non-empty.
    pub constant: f64,
    /// The bound itself, clamped at zero (vacuous for `delta >= 1/2.4`).
    pub samples: f64,
    /// `true` when the reward family is not Bernoulli: the argument behind
    /// the bound assumes Bernoulli rewards, so treat the number as a
    /// heuristic.
    pub heuristic: bool,
    /// `true` when the bound degenerates to zero (e.g. best feasible mean
    /// exactly 0 or 1).
    pub vacuous: bool,
}

/// Computes the [`LowerBoundReport`] at confidence `delta`.
///
/// # Errors
///
/// [`AnalyticsError::DegenerateInstance`] when the hardness index is
/// infinite; [`AnalyticsError::InvalidDelta`] outside `(0, 1)`.
pub fn lower_bound(
    inst: &ProblemInstance,
    gt: &GroundTruth,
    delta: f64,
) -> Result<LowerBoundReport, AnalyticsError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AnalyticsError::InvalidDelta(delta));
    }
    let hardness = hardness_index(gt)?;
    let m = inst.n_attrs() as f64;
    let th = inst.threshold();

    // c1: over risky arms, perturb the below-threshold attributes up to the
    // threshold; most conservative over the class.
    let c1 = if gt.risky.is_empty() {
        None
    } else {
        let mut worst_bias = f64::INFINITY;
        let mut max_low = 0usize;
        for &k in &gt.risky {
            let low: Vec<usize> = (0..inst.n_attrs())
                .filter(|&j| inst.mean(k, j) < th)
                .collect();
            debug_assert!(!low.is_empty(), "risky arms are infeasible");
            let kept: f64 = (0..inst.n_attrs())
                .filter(|j| !low.contains(j))
                .map(|j| inst.mean(k, j))
                .sum();
            let q = (kept + low.len() as f64 * th) / m;
            worst_bias = worst_bias.min(q.min(1.0 - q));
            max_low = max_low.max(low.len());
        }
        Some(m * m * worst_bias / (2.0 * (max_low * max_low) as f64))
    };

    // c2/c3 need the best feasible arm.
    let (c2, c3) = match gt.best_arm {
        None => (None, None),
        Some(best) => {
            let mu = gt.arm_means[best];
            let weakest = (0..inst.n_attrs())
                .min_by(|&a, &b| {
                    inst.mean(best, a)
                        .partial_cmp(&inst.mean(best, b))
                        .expect("means are finite")
                })
                .expect("at least one attribute");
            let q = mu - (inst.mean(best, weakest) - th) / m;
            let c2 = (m * m * q.min(1.0 - q) / 2.0).min(mu.min(1.0 - mu) / 16.0);
            let c3 = mu.min(1.0 - mu) / 8.0;
            (Some(c2), Some(c3))
        }
    };

    let infeasible_suboptimal = gt.suboptimal.iter().any(|&i| !gt.is_feasible(i));
    let mut constant = f64::INFINITY;
    if let Some(v) = c1 {
        constant = constant.min(v);
    }
    if gt.feasibility_flag {
        constant = constant.min(c2.expect("c2 computable when an arm is feasible"));
    }
    if infeasible_suboptimal {
        constant = constant.min(c3.expect("c3 computable when an arm is feasible"));
    }
    debug_assert!(constant.is_finite(), "at least one arm class is non-empty");

    let factor = (1.0 / (2.4 * delta)).ln().max(0.0);
    Ok(LowerBoundReport {
        c1,
        c2,
        c3,
        constant,
        samples: factor * constant * hardness,
        heuristic: !matches!(inst.reward_family(), RewardFamily::Bernoulli),
        vacuous: constant == 0.0,
    })
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arms = |set: &[usize]| -> String {
            if set.is_empty() {
                "{}".to_owned()
            } else {
                let inner: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
                format!("{{{}}}", inner.join(", "))
            }
        };
        writeln!(f, "feasible arms: {}", arms(&self.feasible))?;
        match self.best_arm {
            Some(b) => writeln!(f, "best feasible arm: {}", b + 1)?,
            None => writeln!(f, "best feasible arm: none")?,
        }
        writeln!(f, "sub-optimal arms: {}", arms(&self.suboptimal))?;
        writeln!(f, "risky arms: {}", arms(&self.risky))?;
        if self.separator.is_finite() {
            writeln!(f, "separator: {}", self.separator)?;
        }
        write!(f, "hardness index: {}", self.hardness)
    }
}
