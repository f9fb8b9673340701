//! Constrained best-arm identification in grouped bandits.
//!
//! A *grouped* bandit has `N` arms, each made of `M` attributes with
//! independent reward streams in `[0, 1]`. An arm is **feasible** when every
//! attribute mean clears a threshold `mu_th`; the goal is to find, with
//! fixed confidence `1 - delta`, the feasible arm with the highest mean of
//! attribute means — or to certify that no feasible arm exists.
//!
//! The crate provides:
//!
//! - [`instance`] — problem instances, validation, and exact ground-truth
//!   analytics: feasible/sub-optimal/risky sets, gaps, the hardness index,
//!   and an information-theoretic lower bound on expected sample complexity.
//! - [`confidence`] — the anytime confidence radius shared by every policy.
//! - [`env`] — a seeded, bit-exact-replayable reward environment
//!   (Bernoulli or beta rewards).
//! - [`policy`] — the CSS-LUCB identification policy and two
//!   action-elimination baselines, all emitting a per-round trace stream.
//! - [`diagnostics`] — analysis-only oracles over traces: the
//!   all-means-in-interval event, empirical separator partitions, pull
//!   thresholds, the termination budget, and a full trace verifier.
//! - [`harness`] — a deterministic Monte-Carlo experiment harness with a
//!   built-in instance catalog, seed derivation, and CSV persistence.
//! - [`report`] — serializable report types for machine-readable output.
//!
//! Arms and attributes are 1-based in every external artifact (files, CSV,
//! JSON, rendered text) and 0-based in every in-memory API.

pub mod confidence;
pub mod diagnostics;
pub mod env;
pub mod harness;
pub mod instance;
pub mod policy;
pub mod report;
pub mod sets;
pub mod trace;

pub use confidence::confidence_radius;
pub use diagnostics::{
    event_holds, termination_budget, verify_records, TraceReport, TraceVerifier, VerifierMode,
};
pub use env::Environment;
pub use harness::{
    aggregate, catalog, derive_seed, run_experiment, Experiment, ExperimentConfig,
    ExperimentRecord, HarnessError, SummaryDocument, SummaryRow,
};
pub use instance::{
    analyze, hardness_index, lower_bound, AnalyticsError, GroundTruth, InstanceError,
    LowerBoundReport, ProblemInstance, RewardFamily,
};
pub use policy::{Policy, PolicyError, RunResult};
pub use report::{AnalysisReport, RunReport};
pub use trace::{MemorySink, NullSink, TraceRecord, TraceSink};
