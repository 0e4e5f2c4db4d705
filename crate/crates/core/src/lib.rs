//! Learning treatment-allocation policies with a certified cap on treatment risk.
//!
//! The library learns interpretable fast-and-frugal decision trees that decide,
//! per covariate vector `x`, whether to recommend a treatment (action 1) or not
//! (action 0). The learned policy minimizes an upper bound on the population
//! risk `P(L = 1)` subject to a *treatment risk* constraint
//! `P(L = 1 | A = 1) <= tau` that is certified to hold with probability at
//! least `1 - alpha` over the calibration data — even when the logged
//! assignment (or trial selection) probabilities are only known up to a
//! multiplicative odds band of width `gamma`.
//!
//! Pipeline, end to end:
//!
//! 1. [`data`] — datasets, schemas, deterministic splits, discretization.
//! 2. [`weights`] — odds-band importance weights and the risk estimators
//!    they induce.
//! 3. [`policy`] — fast-and-frugal trees, a greedy constrained learner, and an
//!    exhaustive reference learner.
//! 4. [`bounds`] — binomial tail machinery: a Bentkus-style upper confidence
//!    bound and a conformal quantile.
//! 5. [`calibrate`] — sweep a tolerance grid, bound each candidate's treatment
//!    risk on held-out data, and pick the working tolerance.
//! 6. [`genmodel`] — synthetic generative scenarios with known ground truth
//!    plus the replication harness.
//! 7. [`benchmark`] — miscalibration benchmarking: reliability diagrams and
//!    omitted-covariate odds ratios that suggest a plausible `gamma`.
//!
//! Randomness policy: every stochastic routine takes an explicit `u64` seed
//! and runs on `rand_chacha::ChaCha8Rng` (a counter-based stream cipher RNG).
//! Replications derive independent streams from `(seed, replication index)`,
//! so results are identical whether executed in parallel or serially. The
//! `parallel` feature (default on) runs replications and grid sweeps on rayon;
//! disabling it yields a dependency-free sequential build with byte-identical
//! output.

pub mod benchmark;
pub mod bounds;
pub mod calibrate;
pub mod data;
pub mod genmodel;
pub mod policy;
pub mod weights;

mod par;

pub use bounds::UcbInput;
pub use calibrate::{CalibrationResult, ToleranceGrid, TolerancePath};
pub use data::{CovariateKind, CovariateSchema, DataSource, Dataset, Sample, SplitSpec};
pub use genmodel::{McConfig, McTable, Method, Scenario, TruthReport};
pub use policy::{FrugalTree, LearnConfig, Predicate, PredicateTest, Rule};
pub use weights::{
    MiscalibrationConfig, NominalAssignmentModel, NominalModel, NominalSelectionModel, Regime,
};
