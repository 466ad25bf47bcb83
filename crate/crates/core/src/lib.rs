//! Conditional photon statistics of passive linear-optical networks.
//!
//! `N` modes are fed with independent vacuum/single-photon mixtures, pass
//! through an interferometer `Λ ∈ U(N)`, and modes `2..N` are measured with
//! ideal photon-number-resolving detectors. The crate computes the exact
//! photon-number distribution left in mode 1, checks it against the analytic
//! improvement bound `c₁/c₀ ≤ (M − D)·p_max/(1 − p_max)` and the associated
//! no-go results, and searches over interferometers for heralding schemes that
//! raise the single-photon probability.
//!
//! Module map:
//!
//! * [`unitary`]: interferometer matrices (explicit, DFT, Haar, Givens, ε-scheme).
//! * [`permanent`]: Ryser/Gray-code permanents and transition amplitudes.
//! * [`ensemble`]: input ensembles, occupation vectors and detection patterns.
//! * [`conditional`]: the heralded output distribution.
//! * [`oracle`]: an independent creation-operator expansion used for cross-checks.
//! * [`bounds`]: the improvement bound and no-go predicates.
//! * [`search`]: derivative-free multi-start search over `U(N)`.
//! * [`cli`]: the batch front-end behind the `photon-distill` binary.

pub mod bounds;
pub mod cli;
pub mod conditional;
pub mod ensemble;
mod error;
pub mod oracle;
pub mod permanent;
pub mod search;
pub mod unitary;

pub use error::{Error, Result};

pub use bounds::{check, check_exhaustive, general_bound, perfect_output_impossible, BoundReport, TheoremTag};
pub use conditional::{
    evaluate, improvement_verdict, unnormalized_coefficient, ConditionalDistribution, HeraldStatus, ImprovementVerdict,
};
pub use ensemble::{weight, DetectionPattern, InputEnsemble, OccupationVector};
pub use permanent::{compute_s, naive_permanent, permanent, stable_permanent};
pub use search::{optimize, sweep_epsilon_scheme, SearchProblem, SearchResult};
pub use unitary::{EpsilonSchemeSpec, GivensParameterization, Unitary};

/// Absolute slack used when comparing observed ratios against proved bounds.
pub const THEOREM_SLACK: f64 = 1e-9;
