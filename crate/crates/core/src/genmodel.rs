//! Synthetic treatment-assignment scenarios with exact risk oracles and a
//! Monte Carlo harness for measuring how often calibrated policies keep the
//! true treatment risk under the requested cap.
//!
//! All scenarios share two continuous covariates `x1, x2 ~ Uniform(30, 80)`
//! and a nominal assignment curve
//!
//! ```text
//!     sigma_nom(x1) = logistic(0.5 - (x1 - 30) / 50),
//! ```
//!
//! an untreated loss probability of `0.8` everywhere, and treated loss
//! probabilities that grow linearly in `x1`:
//!
//! * [`Scenario::ObsClean`] — observational data whose assignment really
//!   follows `sigma_nom`, with `p(L=1 | A=1, x) = 0.01 (x1 - 30)`. The
//!   nominal model is exactly right, so `gamma = 1` weighting is unbiased.
//! * [`Scenario::ObsConfounded`] — a latent `U ~ Uniform(0,1)` splits the
//!   population in half. On `U < 0.5` the assignment odds are halved and the
//!   treated loss slope is `0.02`; on `U >= 0.5` the odds are doubled and the
//!   slope is `0.002`. Both branches sit exactly on the `gamma = 2` odds band
//!   around `sigma_nom`, and the mixed treated slope is `0.011`.
//! * [`Scenario::RctSelected`] — a randomized trial (`p(A=1) = 0.5`) whose
//!   enrollment probability is the same two-branch mixture, so the trial
//!   population is tilted away from the target population (`S = 0`). Trial
//!   draws come from rejection sampling on the enrollment probability;
//!   target-population evaluation rejects on its complement.
//!
//! The latent `U` is drawn internally and never appears in emitted datasets;
//! [`Scenario::sample_with_confounder`] is the one deliberate exception,
//! emitting the active half-space indicator `1{U < 0.5}` as a third column
//! for nominal-model benchmarking.
//!
//! # Truth oracles
//!
//! [`true_risks`] reports the true population risk `r`, treatment risk `t`,
//! and treated fraction `rho` of a policy, tied together by the exact
//! decomposition `r = rho * t + (1 - rho) * 0.8`. Policies that test only
//! `x1` through thresholds partition `[30, 80]` into intervals, so both
//! observational scenarios integrate the linear loss laws in closed form
//! (standard errors zero); every other case falls back to Monte Carlo over
//! fresh target-population draws, averaging conditional loss probabilities
//! rather than sampled losses and reporting standard errors.
//!
//! # Monte Carlo harness
//!
//! [`mc_experiment`] repeats draw → split → sweep → select → oracle for a
//! grid of caps `tau` and aggregates the true risks across replications into
//! an [`McTable`] (means, 10th/90th percentiles, and the empirical coverage
//! `P(t_true <= tau)`). Replications are data-parallel; each derives its own
//! ChaCha8 stream from `(seed, replication index)` — the documented random
//! source of this crate — so parallel and serial runs produce identical
//! tables.

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::ceil_snap;
use crate::calibrate::{self, CalibrateError, ToleranceGrid};
use crate::data::{CovariateKind, CovariateSchema, DataError, DataSource, Dataset, Sample};
use crate::par;
use crate::policy::{FrugalTree, PredicateTest};
use crate::weights::{
    MiscalibrationConfig, NominalAssignmentModel, NominalModel, NominalSelectionModel,
    WeightsError,
};

/// Lower edge of the covariate range.
const X_LO: f64 = 30.0;
/// Upper edge of the covariate range.
const X_HI: f64 = 80.0;
/// Width of the covariate range.
const X_SPAN: f64 = X_HI - X_LO;
/// Loss probability of the untreated action, identical in every scenario.
pub const UNTREATED_RISK: f64 = 0.8;
/// Treated loss slope per unit of `x1 - 30` in `ObsClean`.
const CLEAN_SLOPE: f64 = 0.01;
/// Treated loss slope on the `U < 0.5` branch of the confounded scenarios.
const CONF_SLOPE_LO: f64 = 0.02;
/// Treated loss slope on the `U >= 0.5` branch.
const CONF_SLOPE_HI: f64 = 0.002;
/// Mixed treated loss slope, `0.5 * 0.02 + 0.5 * 0.002`.
const CONF_SLOPE_MIX: f64 = 0.011;
/// Default number of fresh draws for Monte Carlo truth evaluation.
pub const DEFAULT_EVAL_SAMPLES: usize = 18_000;
/// Fixed stream seed used by [`true_risks`] so repeated oracle calls agree.
const TRUTH_SEED: u64 = 0x7455_7221;

/// Errors from scenario construction and the Monte Carlo harness.
#[derive(Debug, Error)]
pub enum GenError {
    /// A harness parameter is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    /// Table serialization failed.
    #[error("table serialization: {0}")]
    Csv(#[from] csv::Error),
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Nominal assignment probability `logistic(0.5 - (x1 - 30) / 50)`, shared
/// by every scenario's nominal model.
pub fn sigma_nom(x1: f64) -> f64 {
    logistic(0.5 - (x1 - X_LO) / X_SPAN)
}

/// Two-branch mixture probability used both as the confounded assignment
/// law and as the trial enrollment law: odds are halved on `u < 0.5` and
/// doubled on `u >= 0.5`, relative to `sigma_nom`.
fn mixture_prob(x1: f64, u: f64) -> f64 {
    let s = sigma_nom(x1);
    if u < 0.5 {
        s / (2.0 - s)
    } else {
        s / (0.5 + 0.5 * s)
    }
}

/// Mixture probability marginalized over the latent `u`.
fn marginal_mixture(x1: f64) -> f64 {
    let s = sigma_nom(x1);
    0.5 * (s / (2.0 - s)) + 0.5 * (s / (0.5 + 0.5 * s))
}

/// Treated loss probability at `(x1, u)` for the confounded scenarios.
fn confounded_loss_prob(x1: f64, u: f64) -> f64 {
    let slope = if u < 0.5 { CONF_SLOPE_LO } else { CONF_SLOPE_HI };
    slope * (x1 - X_LO)
}

/// Composite Simpson quadrature over `[lo, hi]` with `intervals` panels
/// (rounded up to the next even count).
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = if intervals % 2 == 0 {
        intervals.max(2)
    } else {
        intervals + 1
    };
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Marginal enrollment probability `p(S=1)` of the trial scenario over the
/// base population, by quadrature over `x1` (the mixture is flat in `x2`
/// and averages the two `u` branches).
fn trial_enrollment_rate() -> f64 {
    simpson(marginal_mixture, X_LO, X_HI, 4_000) / X_SPAN
}

/// The three synthetic generating laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Observational data whose assignment follows the nominal model exactly.
    ObsClean,
    /// Observational data with a latent half-space confounder sitting on the
    /// `gamma = 2` odds band.
    ObsConfounded,
    /// Randomized trial with latent, confounded enrollment; evaluation
    /// targets the unenrolled population.
    RctSelected,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scenario::ObsClean => "obs-clean",
            Scenario::ObsConfounded => "obs-confounded",
            Scenario::RctSelected => "rct-selected",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Scenario {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        match s {
            "obs-clean" => Ok(Scenario::ObsClean),
            "obs-confounded" => Ok(Scenario::ObsConfounded),
            "rct-selected" => Ok(Scenario::RctSelected),
            other => Err(GenError::Config(format!(
                "unknown scenario {other:?}; expected obs-clean, obs-confounded, or rct-selected"
            ))),
        }
    }
}

impl Scenario {
    /// The shared two-column covariate schema `(x1, x2)`.
    pub fn covariate_schema() -> CovariateSchema {
        CovariateSchema::new(vec![
            ("x1".to_string(), CovariateKind::Continuous),
            ("x2".to_string(), CovariateKind::Continuous),
        ])
        .expect("static schema is valid")
    }

    /// Source tag carried by datasets this scenario emits.
    pub fn source(self) -> DataSource {
        match self {
            Scenario::ObsClean | Scenario::ObsConfounded => DataSource::Observational,
            Scenario::RctSelected => DataSource::Trial,
        }
    }

    /// Draws `n` i.i.d. samples from the scenario. The latent `u` of the
    /// confounded laws is drawn internally and never emitted. Trial draws
    /// are rejection-sampled from the enrolled population.
    pub fn sample_dataset(self, n: usize, seed: u64) -> Result<Dataset, GenError> {
        if n == 0 {
            return Err(GenError::Config("sample count must be >= 1".to_string()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_with_rng(n, &mut rng))
    }

    /// Like [`Scenario::sample_dataset`] for `ObsConfounded`, but emits the
    /// active confounder indicator `1{u < 0.5}` as a third continuous
    /// column named `u`, for benchmarking nominal models against the truth.
    pub fn sample_with_confounder(self, n: usize, seed: u64) -> Result<Dataset, GenError> {
        if self != Scenario::ObsConfounded {
            return Err(GenError::Config(format!(
                "confounder materialization is only defined for obs-confounded, got {self}"
            )));
        }
        if n == 0 {
            return Err(GenError::Config("sample count must be >= 1".to_string()));
        }
        let schema = CovariateSchema::new(vec![
            ("x1".to_string(), CovariateKind::Continuous),
            ("x2".to_string(), CovariateKind::Continuous),
            ("u".to_string(), CovariateKind::Continuous),
        ])
        .expect("static schema is valid");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|_| {
                let (mut sample, u) = draw_confounded(&mut rng);
                sample.x.push(if u < 0.5 { 1.0 } else { 0.0 });
                sample
            })
            .collect();
        Ok(Dataset::new(schema, samples, DataSource::Observational)
            .expect("generated samples conform to the schema"))
    }

    /// Draws `n` samples using an already-positioned stream. Draw order per
    /// sample is fixed (`x1`, `x2`, then latent and outcome draws) so seeded
    /// runs are reproducible.
    fn sample_with_rng(self, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
        let samples: Vec<Sample> = (0..n)
            .map(|_| match self {
                Scenario::ObsClean => {
                    let x1 = rng.gen_range(X_LO..X_HI);
                    let x2 = rng.gen_range(X_LO..X_HI);
                    let action = rng.gen_bool(sigma_nom(x1));
                    let p_loss = if action {
                        CLEAN_SLOPE * (x1 - X_LO)
                    } else {
                        UNTREATED_RISK
                    };
                    let loss = rng.gen_bool(p_loss);
                    Sample {
                        x: vec![x1, x2],
                        action,
                        loss,
                    }
                }
                Scenario::ObsConfounded => draw_confounded(rng).0,
                Scenario::RctSelected => {
                    let (x1, x2, u) = draw_trial_covariates(rng);
                    let action = rng.gen_bool(0.5);
                    let p_loss = if action {
                        confounded_loss_prob(x1, u)
                    } else {
                        UNTREATED_RISK
                    };
                    let loss = rng.gen_bool(p_loss);
                    Sample {
                        x: vec![x1, x2],
                        action,
                        loss,
                    }
                }
            })
            .collect();
        Dataset::new(Self::covariate_schema(), samples, self.source())
            .expect("generated samples conform to the schema")
    }

    /// The nominal model an analyst would bring to this scenario: the
    /// assignment curve `sigma_nom` for the observational variants; for the
    /// trial, nominal non-enrollment odds `(1 - sigma_nom) / sigma_nom`, the
    /// true marginal enrollment ratio `p(S=1)/p(S=0)` (by quadrature), and
    /// the known trial assignment probability `0.5`.
    pub fn nominal_model(self) -> NominalModel {
        match self {
            Scenario::ObsClean | Scenario::ObsConfounded => NominalModel::Observational(
                NominalAssignmentModel::new(|x: &[f64]| sigma_nom(x[0])),
            ),
            Scenario::RctSelected => {
                let rate = trial_enrollment_rate();
                let selection = NominalSelectionModel::new(
                    |x: &[f64]| {
                        let s = sigma_nom(x[0]);
                        (1.0 - s) / s
                    },
                    rate / (1.0 - rate),
                    0.5,
                )
                .expect("static trial parameters are valid");
                NominalModel::Trial(selection)
            }
        }
    }
}

/// One confounded observational draw, returning the sample and the latent
/// `u` so callers that materialize the confounder can reuse it.
fn draw_confounded(rng: &mut ChaCha8Rng) -> (Sample, f64) {
    let x1 = rng.gen_range(X_LO..X_HI);
    let x2 = rng.gen_range(X_LO..X_HI);
    let u: f64 = rng.gen();
    let action = rng.gen_bool(mixture_prob(x1, u));
    let p_loss = if action {
        confounded_loss_prob(x1, u)
    } else {
        UNTREATED_RISK
    };
    let loss = rng.gen_bool(p_loss);
    (
        Sample {
            x: vec![x1, x2],
            action,
            loss,
        },
        u,
    )
}

/// Rejection-samples covariates (and latent `u`) from the enrolled trial
/// population: candidates come from the base law and are kept with
/// probability equal to the enrollment mixture.
fn draw_trial_covariates(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    loop {
        let x1 = rng.gen_range(X_LO..X_HI);
        let x2 = rng.gen_range(X_LO..X_HI);
        let u: f64 = rng.gen();
        if rng.gen_bool(mixture_prob(x1, u)) {
            return (x1, x2, u);
        }
    }
}

/// Ground-truth risks of one policy under one scenario.
///
/// The decomposition `r_true = rho_true * t_true + (1 - rho_true) *
/// untreated_risk` holds exactly by construction on both the closed-form
/// and the Monte Carlo path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthReport {
    /// True population risk `P(L=1)` under the policy.
    pub r_true: f64,
    /// True treatment risk `P(L=1 | A=1)` under the policy; 0 by convention
    /// when the policy treats nobody.
    pub t_true: f64,
    /// True treated fraction of the target population.
    pub rho_true: f64,
    /// Loss probability of the untreated action (0.8 in every scenario).
    pub untreated_risk: f64,
    /// Standard error of `r_true`; 0 on the closed-form path.
    pub se_r: f64,
    /// Standard error of `t_true`; 0 on the closed-form path.
    pub se_t: f64,
}

/// True risks of `policy` under `scenario`, with a fixed internal stream so
/// repeated calls agree bit-for-bit. Threshold policies on `x1` under the
/// observational scenarios are evaluated in closed form and ignore
/// `precision`; all other cases run Monte Carlo over `precision` fresh
/// target-population draws.
pub fn true_risks(scenario: Scenario, policy: &FrugalTree, precision: usize) -> TruthReport {
    true_risks_seeded(scenario, policy, precision, TRUTH_SEED)
}

/// [`true_risks`] with an explicit seed for the Monte Carlo path.
pub fn true_risks_seeded(
    scenario: Scenario,
    policy: &FrugalTree,
    precision: usize,
    seed: u64,
) -> TruthReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    truth_with_rng(scenario, policy, precision, &mut rng)
}

/// A policy is closed-form evaluable when every rule is a threshold test on
/// `x1`: its treated region is then a union of `x1` intervals and the
/// linear loss laws integrate exactly.
fn closed_form_eligible(scenario: Scenario, policy: &FrugalTree) -> bool {
    scenario != Scenario::RctSelected
        && policy.rules().iter().all(|rule| {
            rule.predicate.feature() == "x1"
                && matches!(rule.predicate.test(), PredicateTest::LessThan(_))
        })
}

fn truth_with_rng(
    scenario: Scenario,
    policy: &FrugalTree,
    precision: usize,
    rng: &mut ChaCha8Rng,
) -> TruthReport {
    if closed_form_eligible(scenario, policy) {
        return closed_form_truth(scenario, policy);
    }
    monte_carlo_truth(scenario, policy, precision.max(1), rng)
}

/// Exact truth for `x1`-threshold policies under the observational
/// scenarios: partition `[30, 80]` at the thresholds, classify each segment
/// by one apply call at its midpoint, and integrate the linear treated loss
/// over the treated segments.
fn closed_form_truth(scenario: Scenario, policy: &FrugalTree) -> TruthReport {
    let slope = match scenario {
        Scenario::ObsClean => CLEAN_SLOPE,
        Scenario::ObsConfounded => CONF_SLOPE_MIX,
        Scenario::RctSelected => unreachable!("trial truth is Monte Carlo only"),
    };
    let mut cuts = vec![X_LO, X_HI];
    for rule in policy.rules() {
        if let PredicateTest::LessThan(t) = rule.predicate.test() {
            if *t > X_LO && *t < X_HI {
                cuts.push(*t);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut treated_measure = 0.0;
    let mut treated_loss_integral = 0.0;
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        if policy.apply(&[mid, 0.5 * (X_LO + X_HI)]) {
            treated_measure += hi - lo;
            // integral of slope * (x - 30) over [lo, hi]
            treated_loss_integral +=
                slope * ((hi - X_LO).powi(2) - (lo - X_LO).powi(2)) / 2.0;
        }
    }
    let rho_true = treated_measure / X_SPAN;
    let t_true = if treated_measure > 0.0 {
        treated_loss_integral / treated_measure
    } else {
        0.0
    };
    let r_true = rho_true * t_true + (1.0 - rho_true) * UNTREATED_RISK;
    TruthReport {
        r_true,
        t_true,
        rho_true,
        untreated_risk: UNTREATED_RISK,
        se_r: 0.0,
        se_t: 0.0,
    }
}

/// Monte Carlo truth: average conditional loss probabilities (not sampled
/// losses) over fresh target-population draws — the trial scenario rejects
/// onto the unenrolled population — and report standard errors.
fn monte_carlo_truth(
    scenario: Scenario,
    policy: &FrugalTree,
    precision: usize,
    rng: &mut ChaCha8Rng,
) -> TruthReport {
    let mut sum_c = 0.0;
    let mut sumsq_c = 0.0;
    let mut sum_t = 0.0;
    let mut sumsq_t = 0.0;
    let mut treated: usize = 0;
    for _ in 0..precision {
        let (x1, x2, p_treated_loss) = match scenario {
            Scenario::ObsClean => {
                let x1 = rng.gen_range(X_LO..X_HI);
                let x2 = rng.gen_range(X_LO..X_HI);
                (x1, x2, CLEAN_SLOPE * (x1 - X_LO))
            }
            Scenario::ObsConfounded => {
                let x1 = rng.gen_range(X_LO..X_HI);
                let x2 = rng.gen_range(X_LO..X_HI);
                let u: f64 = rng.gen();
                (x1, x2, confounded_loss_prob(x1, u))
            }
            Scenario::RctSelected => loop {
                let x1 = rng.gen_range(X_LO..X_HI);
                let x2 = rng.gen_range(X_LO..X_HI);
                let u: f64 = rng.gen();
                // Keep draws from the unenrolled (target) population.
                if !rng.gen_bool(mixture_prob(x1, u)) {
                    break (x1, x2, confounded_loss_prob(x1, u));
                }
            },
        };
        let treat = policy.apply(&[x1, x2]);
        let c = if treat { p_treated_loss } else { UNTREATED_RISK };
        sum_c += c;
        sumsq_c += c * c;
        if treat {
            treated += 1;
            sum_t += p_treated_loss;
            sumsq_t += p_treated_loss * p_treated_loss;
        }
    }
    let n = precision as f64;
    let rho_true = treated as f64 / n;
    let t_true = if treated > 0 {
        sum_t / treated as f64
    } else {
        0.0
    };
    let r_true = rho_true * t_true + (1.0 - rho_true) * UNTREATED_RISK;
    let se_r = standard_error(sum_c, sumsq_c, precision);
    let se_t = standard_error(sum_t, sumsq_t, treated);
    TruthReport {
        r_true,
        t_true,
        rho_true,
        untreated_risk: UNTREATED_RISK,
        se_r,
        se_t,
    }
}

/// Standard error of a mean from raw sums; 0 when fewer than two values.
fn standard_error(sum: f64, sumsq: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n_f = n as f64;
    let var = ((sumsq - sum * sum / n_f) / (n_f - 1.0)).max(0.0);
    (var / n_f).sqrt()
}

/// Which selection rule the harness certifies with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// High-probability control: the cap holds with probability `1 - alpha`.
    HighProb,
    /// Average control via a split-conformal correction.
    Average,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::HighProb => write!(f, "high-prob"),
            Method::Average => write!(f, "average"),
        }
    }
}

impl FromStr for Method {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        match s {
            "high-prob" => Ok(Method::HighProb),
            "average" => Ok(Method::Average),
            other => Err(GenError::Config(format!(
                "unknown method {other:?}; expected high-prob or average"
            ))),
        }
    }
}

/// Configuration of one Monte Carlo coverage experiment.
///
/// `sizes` are the split sizes drawn fresh each replication: `[m, n]`
/// (learning, certification) for [`Method::HighProb`] and `[m, l, n]`
/// (learning, conformal, certification) for [`Method::Average`].
#[derive(Debug, Clone)]
pub struct McConfig {
    scenario: Scenario,
    tau_grid: Vec<f64>,
    method: Method,
    gamma: f64,
    alpha: f64,
    sizes: Vec<usize>,
    reps: usize,
    seed: u64,
    sweep_grid: ToleranceGrid,
    max_depth: usize,
    bins: usize,
    eval_precision: usize,
}

impl McConfig {
    /// Validates the harness parameters. Defaults: a 200-point tolerance
    /// sweep grid over `(0, 0.5]`, depth-1 trees, 200 threshold bins, and
    /// 18,000 oracle evaluation draws.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scenario: Scenario,
        tau_grid: Vec<f64>,
        method: Method,
        gamma: f64,
        alpha: f64,
        sizes: Vec<usize>,
        reps: usize,
        seed: u64,
    ) -> Result<Self, GenError> {
        if tau_grid.is_empty() {
            return Err(GenError::Config("tau grid must be nonempty".to_string()));
        }
        if let Some(&bad) = tau_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(GenError::Config(format!("tau = {bad} outside (0, 1)")));
        }
        MiscalibrationConfig::new(gamma)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(GenError::Config(format!("alpha = {alpha} outside (0, 1)")));
        }
        let expected = match method {
            Method::HighProb => 2,
            Method::Average => 3,
        };
        if sizes.len() != expected || sizes.iter().any(|&s| s == 0) {
            return Err(GenError::Config(format!(
                "method {method} needs {expected} positive split sizes, got {sizes:?}"
            )));
        }
        if reps == 0 {
            return Err(GenError::Config("reps must be >= 1".to_string()));
        }
        Ok(McConfig {
            scenario,
            tau_grid,
            method,
            gamma,
            alpha,
            sizes,
            reps,
            seed,
            sweep_grid: ToleranceGrid::equally_spaced(200, 0.5)?,
            max_depth: 1,
            bins: 200,
            eval_precision: DEFAULT_EVAL_SAMPLES,
        })
    }

    /// Replaces the tolerance sweep grid.
    pub fn with_sweep_grid(mut self, grid: ToleranceGrid) -> Self {
        self.sweep_grid = grid;
        self
    }

    /// Replaces the tree depth cap.
    pub fn with_max_depth(mut self, max_depth: usize) -> Result<Self, GenError> {
        if max_depth == 0 {
            return Err(GenError::Config("max_depth must be >= 1".to_string()));
        }
        self.max_depth = max_depth;
        Ok(self)
    }

    /// Replaces the threshold bin count.
    pub fn with_bins(mut self, bins: usize) -> Result<Self, GenError> {
        if bins == 0 {
            return Err(GenError::Config("bins must be >= 1".to_string()));
        }
        self.bins = bins;
        Ok(self)
    }

    /// Replaces the Monte Carlo oracle precision.
    pub fn with_eval_precision(mut self, precision: usize) -> Result<Self, GenError> {
        if precision == 0 {
            return Err(GenError::Config(
                "eval precision must be >= 1".to_string(),
            ));
        }
        self.eval_precision = precision;
        Ok(self)
    }

    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }
}

/// One aggregated row of an [`McTable`]: true-risk statistics across
/// replications at one cap `tau`. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McRow {
    /// Treatment-risk cap the policies were selected for.
    pub tau: f64,
    /// Mean true treatment risk across replications.
    pub mean_t_true: f64,
    /// 10th percentile (nearest-rank) of the true treatment risk.
    pub q10_t_true: f64,
    /// 90th percentile (nearest-rank) of the true treatment risk.
    pub q90_t_true: f64,
    /// Mean true population risk across replications.
    pub mean_r_true: f64,
    /// 10th percentile of the true population risk.
    pub q10_r_true: f64,
    /// 90th percentile of the true population risk.
    pub q90_r_true: f64,
    /// Fraction of replications with `t_true <= tau`.
    pub coverage: f64,
}

/// Aggregated Monte Carlo results, one row per `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct McTable {
    rows: Vec<McRow>,
}

impl McTable {
    pub fn rows(&self) -> &[McRow] {
        &self.rows
    }

    /// Writes the table as CSV with columns `tau, mean_t_true, q10_t_true,
    /// q90_t_true, mean_r_true, q10_r_true, q90_r_true, coverage`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), GenError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Runs the full coverage experiment: for every replication, draw fresh
/// data, split by the configured counts, sweep the tolerance grid once,
/// select a policy per `tau`, and score it with the truth oracle; then
/// aggregate per `tau` across replications. Replications run data-parallel
/// on per-replication ChaCha8 streams, so results are deterministic in the
/// seed regardless of thread count.
pub fn mc_experiment(config: &McConfig) -> Result<McTable, GenError> {
    let cfg = MiscalibrationConfig::new(config.gamma)?;
    let model = config.scenario.nominal_model();
    let per_rep = par::map_range(config.reps, |rep| replicate(config, &model, cfg, rep))
        .into_iter()
        .collect::<Result<Vec<Vec<(f64, f64)>>, GenError>>()?;
    let rows = config
        .tau_grid
        .iter()
        .enumerate()
        .map(|(j, &tau)| {
            let t_vals: Vec<f64> = per_rep.iter().map(|rep| rep[j].0).collect();
            let r_vals: Vec<f64> = per_rep.iter().map(|rep| rep[j].1).collect();
            let covered = t_vals.iter().filter(|&&t| t <= tau).count();
            McRow {
                tau,
                mean_t_true: mean(&t_vals),
                q10_t_true: nearest_rank(&t_vals, 0.10),
                q90_t_true: nearest_rank(&t_vals, 0.90),
                mean_r_true: mean(&r_vals),
                q10_r_true: nearest_rank(&r_vals, 0.10),
                q90_r_true: nearest_rank(&r_vals, 0.90),
                coverage: covered as f64 / t_vals.len() as f64,
            }
        })
        .collect();
    Ok(McTable { rows })
}

/// One replication: returns `(t_true, r_true)` per `tau` in grid order.
fn replicate(
    config: &McConfig,
    model: &NominalModel,
    cfg: MiscalibrationConfig,
    rep: usize,
) -> Result<Vec<(f64, f64)>, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep as u64);
    let total: usize = config.sizes.iter().sum();
    let data = config.scenario.sample_with_rng(total, &mut rng);
    let split_seed = rng.gen::<u64>();
    let parts = data.split_by_counts(&config.sizes, split_seed)?;
    let (d_m, d_l, d_n) = match config.method {
        Method::HighProb => (&parts[0], None, &parts[1]),
        Method::Average => (&parts[0], Some(&parts[1]), &parts[2]),
    };
    let swept = calibrate::sweep(
        d_m,
        &config.sweep_grid,
        model,
        cfg,
        config.max_depth,
        config.bins,
    )?;
    let path = calibrate::evaluate_path(&swept, d_n, model, cfg, config.alpha)?;
    let mut memo: Vec<(FrugalTree, TruthReport)> = Vec::new();
    let mut out = Vec::with_capacity(config.tau_grid.len());
    for &tau in &config.tau_grid {
        let result = match config.method {
            Method::HighProb => calibrate::select_high_prob(&path, tau),
            Method::Average => calibrate::select_average(
                &path,
                d_l.expect("average method carries a conformal split"),
                model,
                cfg,
                tau,
                config.alpha,
            )?,
        };
        let truth = match memo.iter().find(|(p, _)| *p == result.policy) {
            Some((_, t)) => *t,
            None => {
                let t = truth_with_rng(
                    config.scenario,
                    &result.policy,
                    config.eval_precision,
                    &mut rng,
                );
                memo.push((result.policy, t));
                t
            }
        };
        out.push((truth.t_true, truth.r_true));
    }
    Ok(out)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Nearest-rank percentile: the `ceil(p * len)`-th smallest value (with the
/// shared float-product snap), clamped to a valid rank.
fn nearest_rank(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (ceil_snap(p * sorted.len() as f64) as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Predicate, Rule};
    use crate::weights::{population_risk_estimate, treatment_risk_stats};

    fn threshold_policy(threshold: f64) -> FrugalTree {
        let schema = Scenario::covariate_schema();
        let predicate =
            Predicate::new(&schema, "x1", PredicateTest::LessThan(threshold)).unwrap();
        FrugalTree::new(
            vec![Rule {
                predicate,
                exit_on: true,
                exit_action: true,
            }],
            false,
        )
    }

    #[test]
    fn sigma_nom_matches_logistic_curve() {
        assert!((sigma_nom(30.0) - 0.6224593312018546).abs() < 1e-12);
        assert!((sigma_nom(80.0) - logistic(-0.5)).abs() < 1e-12);
        // Midpoint of the range sits at logit 0.
        assert!((sigma_nom(55.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clean_sampling_matches_generating_law() {
        let data = Scenario::ObsClean.sample_dataset(100_000, 7).unwrap();
        assert_eq!(data.source(), DataSource::Observational);
        // Assignment rate near the left edge approaches sigma(0.5) = 0.6225.
        let edge: Vec<&Sample> = data.samples().iter().filter(|s| s.x[0] < 31.0).collect();
        let edge_rate =
            edge.iter().filter(|s| s.action).count() as f64 / edge.len() as f64;
        assert!(edge.len() > 1_500, "uniform x1 puts ~2% of mass per unit");
        assert!(
            (edge_rate - 0.6225).abs() < 0.04,
            "edge assignment rate {edge_rate} too far from 0.6225"
        );
        // Untreated loss probability is 0.8 everywhere.
        let untreated: Vec<&Sample> = data.samples().iter().filter(|s| !s.action).collect();
        let untreated_rate =
            untreated.iter().filter(|s| s.loss).count() as f64 / untreated.len() as f64;
        assert!(
            (untreated_rate - 0.8).abs() < 0.01,
            "untreated loss rate {untreated_rate} too far from 0.8"
        );
        // Covariates stay in range.
        assert!(data
            .samples()
            .iter()
            .all(|s| (30.0..80.0).contains(&s.x[0]) && (30.0..80.0).contains(&s.x[1])));
    }

    #[test]
    fn confounded_branches_sit_exactly_on_the_factor_two_odds_band() {
        let odds = |p: f64| p / (1.0 - p);
        let mut x1 = 30.0;
        while x1 <= 80.0 {
            let nominal = odds(sigma_nom(x1));
            let lo = odds(mixture_prob(x1, 0.25));
            let hi = odds(mixture_prob(x1, 0.75));
            assert!((lo - nominal / 2.0).abs() < 1e-12 * nominal);
            assert!((hi - 2.0 * nominal).abs() < 1e-12 * nominal);
            // The marginalized assignment stays strictly inside the band.
            let marginal = odds(marginal_mixture(x1));
            assert!(marginal > nominal / 2.0 && marginal < 2.0 * nominal);
            x1 += 0.5;
        }
    }

    #[test]
    fn closed_form_truth_matches_hand_integration() {
        let report = true_risks(Scenario::ObsClean, &threshold_policy(50.0), 10);
        assert!((report.t_true - 0.10).abs() < 1e-12);
        assert!((report.rho_true - 0.40).abs() < 1e-12);
        assert!((report.r_true - 0.52).abs() < 1e-12);
        assert_eq!(report.se_r, 0.0);
        assert_eq!(report.se_t, 0.0);

        let confounded = true_risks(Scenario::ObsConfounded, &threshold_policy(50.0), 10);
        assert!((confounded.t_true - 0.11).abs() < 1e-12);

        let none = true_risks(Scenario::ObsClean, &FrugalTree::treat_none(), 10);
        assert_eq!(none.t_true, 0.0);
        assert_eq!(none.rho_true, 0.0);
        assert!((none.r_true - 0.8).abs() < 1e-12);

        let all = true_risks(Scenario::ObsClean, &FrugalTree::treat_all(), 10);
        assert!((all.t_true - 0.25).abs() < 1e-12);
        assert!((all.r_true - 0.25).abs() < 1e-12);
    }

    #[test]
    fn truth_identity_holds_on_both_paths() {
        for (i, &threshold) in [33.0, 41.5, 57.25, 68.0, 79.0].iter().enumerate() {
            let policy = threshold_policy(threshold);
            for scenario in [Scenario::ObsClean, Scenario::ObsConfounded] {
                let cf = true_risks(scenario, &policy, 10);
                let identity =
                    cf.rho_true * cf.t_true + (1.0 - cf.rho_true) * cf.untreated_risk;
                assert!((cf.r_true - identity).abs() < 1e-12);
            }
            // Monte Carlo path (trial scenario has no closed form).
            let mc = true_risks_seeded(Scenario::RctSelected, &policy, 4_000, 100 + i as u64);
            let identity = mc.rho_true * mc.t_true + (1.0 - mc.rho_true) * mc.untreated_risk;
            assert!((mc.r_true - identity).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_truth_agrees_with_closed_form() {
        let policy = threshold_policy(47.0);
        let cf = true_risks(Scenario::ObsClean, &policy, 10);
        // Force the Monte Carlo path by evaluating an x2 rule alongside: use
        // the same scenario but a policy that is NOT x1-threshold-form.
        let schema = Scenario::covariate_schema();
        let x2_rule = Rule {
            predicate: Predicate::new(&schema, "x2", PredicateTest::LessThan(90.0)).unwrap(),
            exit_on: false,
            exit_action: false,
        };
        let x1_rule = Rule {
            predicate: Predicate::new(&schema, "x1", PredicateTest::LessThan(47.0)).unwrap(),
            exit_on: true,
            exit_action: true,
        };
        // x2 < 90 never exits (x2 < 80 always, exit_on = false), so this
        // tree computes the same function as the plain threshold policy.
        let equivalent = FrugalTree::new(vec![x2_rule, x1_rule], false);
        let mc = true_risks_seeded(Scenario::ObsClean, &equivalent, 60_000, 11);
        assert!(mc.se_t > 0.0 && mc.se_r > 0.0);
        assert!(
            (mc.t_true - cf.t_true).abs() <= 3.0 * mc.se_t,
            "mc t {} vs closed form {} (se {})",
            mc.t_true,
            cf.t_true,
            mc.se_t
        );
        assert!(
            (mc.r_true - cf.r_true).abs() <= 3.0 * mc.se_r,
            "mc r {} vs closed form {} (se {})",
            mc.r_true,
            cf.r_true,
            mc.se_r
        );
    }

    #[test]
    fn trial_sampling_randomizes_actions_and_tilts_enrollment() {
        let data = Scenario::RctSelected.sample_dataset(40_000, 3).unwrap();
        assert_eq!(data.source(), DataSource::Trial);
        let treat_rate =
            data.samples().iter().filter(|s| s.action).count() as f64 / data.len() as f64;
        assert!((treat_rate - 0.5).abs() < 0.01);
        // Enrollment favors small x1 (higher sigma_nom, higher mixture), so
        // the enrolled mean of x1 falls below the base-population mean 55.
        let mean_x1 =
            data.samples().iter().map(|s| s.x[0]).sum::<f64>() / data.len() as f64;
        assert!(mean_x1 < 54.5, "enrolled mean x1 = {mean_x1}");
    }

    #[test]
    fn quadrature_enrollment_rate_matches_simulation() {
        let rate = trial_enrollment_rate();
        assert!(rate > 0.0 && rate < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 200_000;
        let mut enrolled = 0usize;
        for _ in 0..n {
            let x1 = rng.gen_range(X_LO..X_HI);
            let u: f64 = rng.gen();
            if rng.gen_bool(mixture_prob(x1, u)) {
                enrolled += 1;
            }
        }
        let empirical = enrolled as f64 / n as f64;
        let se = (empirical * (1.0 - empirical) / n as f64).sqrt();
        assert!(
            (rate - empirical).abs() <= 3.0 * se,
            "quadrature {rate} vs empirical {empirical} (se {se})"
        );
    }

    #[test]
    fn clean_weighted_estimates_converge_to_truth_at_gamma_one() {
        let data = Scenario::ObsClean.sample_dataset(100_000, 23).unwrap();
        let model = Scenario::ObsClean.nominal_model();
        let cfg = MiscalibrationConfig::ipw();

        let all = vec![true; data.len()];
        let r_all = population_risk_estimate(&data, &all, &model, cfg).unwrap();
        assert!((r_all - 0.25).abs() < 0.01, "treat-all risk {r_all}");

        let policy = threshold_policy(50.0);
        let actions = policy.actions(&data);
        let stats = treatment_risk_stats(&data, &actions, &model, cfg).unwrap();
        assert!((stats.mean - 0.10).abs() < 0.01, "treatment risk {}", stats.mean);
        let r_pol = population_risk_estimate(&data, &actions, &model, cfg).unwrap();
        assert!((r_pol - 0.52).abs() < 0.015, "population risk {r_pol}");
    }

    #[test]
    fn generators_are_deterministic_in_the_seed() {
        for scenario in [
            Scenario::ObsClean,
            Scenario::ObsConfounded,
            Scenario::RctSelected,
        ] {
            let a = scenario.sample_dataset(200, 5).unwrap();
            let b = scenario.sample_dataset(200, 5).unwrap();
            for (sa, sb) in a.samples().iter().zip(b.samples()) {
                assert_eq!(sa.x, sb.x);
                assert_eq!(sa.action, sb.action);
                assert_eq!(sa.loss, sb.loss);
            }
            let c = scenario.sample_dataset(200, 6).unwrap();
            assert!(
                a.samples().iter().zip(c.samples()).any(|(sa, sc)| sa.x != sc.x),
                "different seeds should differ"
            );
        }
    }

    #[test]
    fn confounder_materialization_exposes_the_active_branch() {
        let data = Scenario::ObsConfounded.sample_with_confounder(5_000, 41).unwrap();
        assert_eq!(data.schema().len(), 3);
        assert_eq!(data.schema().name(2), "u");
        assert!(data.samples().iter().all(|s| s.x[2] == 0.0 || s.x[2] == 1.0));
        let frac = data.samples().iter().map(|s| s.x[2]).sum::<f64>() / data.len() as f64;
        assert!((frac - 0.5).abs() < 0.03);
        // The first two columns follow the plain confounded law: same seed,
        // same draws.
        let plain = Scenario::ObsConfounded.sample_dataset(5_000, 41).unwrap();
        for (a, b) in data.samples().iter().zip(plain.samples()) {
            assert_eq!(a.x[..2], b.x[..2]);
            assert_eq!(a.action, b.action);
            assert_eq!(a.loss, b.loss);
        }
        assert!(Scenario::ObsClean.sample_with_confounder(10, 1).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let ok = McConfig::new(
            Scenario::ObsClean,
            vec![0.2],
            Method::HighProb,
            1.0,
            0.1,
            vec![100, 100],
            2,
            1,
        );
        assert!(ok.is_ok());
        let cases = [
            McConfig::new(Scenario::ObsClean, vec![], Method::HighProb, 1.0, 0.1, vec![100, 100], 2, 1),
            McConfig::new(Scenario::ObsClean, vec![0.0], Method::HighProb, 1.0, 0.1, vec![100, 100], 2, 1),
            McConfig::new(Scenario::ObsClean, vec![0.2], Method::HighProb, 0.5, 0.1, vec![100, 100], 2, 1),
            McConfig::new(Scenario::ObsClean, vec![0.2], Method::HighProb, 1.0, 1.0, vec![100, 100], 2, 1),
            McConfig::new(Scenario::ObsClean, vec![0.2], Method::HighProb, 1.0, 0.1, vec![100, 100, 100], 2, 1),
            McConfig::new(Scenario::ObsClean, vec![0.2], Method::Average, 1.0, 0.1, vec![100, 100], 2, 1),
            McConfig::new(Scenario::ObsClean, vec![0.2], Method::HighProb, 1.0, 0.1, vec![100, 0], 2, 1),
            McConfig::new(Scenario::ObsClean, vec![0.2], Method::HighProb, 1.0, 0.1, vec![100, 100], 0, 1),
        ];
        for (i, case) in cases.into_iter().enumerate() {
            assert!(case.is_err(), "case {i} should be rejected");
        }
    }

    #[test]
    fn mc_experiment_is_deterministic_and_well_formed() {
        let config = McConfig::new(
            Scenario::ObsClean,
            vec![0.1, 0.3],
            Method::HighProb,
            1.0,
            0.1,
            vec![150, 150],
            3,
            99,
        )
        .unwrap()
        .with_sweep_grid(ToleranceGrid::equally_spaced(8, 0.5).unwrap())
        .with_bins(40)
        .unwrap()
        .with_eval_precision(2_000)
        .unwrap();
        let a = mc_experiment(&config).unwrap();
        let b = mc_experiment(&config).unwrap();
        assert_eq!(a, b, "same seed must reproduce the table bit-for-bit");
        assert_eq!(a.rows().len(), 2);
        for row in a.rows() {
            assert!(row.q10_t_true <= row.q90_t_true);
            assert!(row.q10_r_true <= row.q90_r_true);
            assert!((0.0..=1.0).contains(&row.coverage));
            // Depth-1 clean-scenario policies hit the closed-form oracle, so
            // every t_true is a true treatment risk in [0, 0.5].
            assert!(row.mean_t_true >= 0.0 && row.mean_t_true <= 0.5);
        }
    }

    #[test]
    fn mc_table_serializes_with_fixed_columns() {
        let table = McTable {
            rows: vec![McRow {
                tau: 0.2,
                mean_t_true: 0.1,
                q10_t_true: 0.05,
                q90_t_true: 0.15,
                mean_r_true: 0.5,
                q10_r_true: 0.4,
                q90_r_true: 0.6,
                coverage: 0.95,
            }],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "tau,mean_t_true,q10_t_true,q90_t_true,mean_r_true,q10_r_true,q90_r_true,coverage"
        );
        assert_eq!(lines.next().unwrap(), "0.2,0.1,0.05,0.15,0.5,0.4,0.6,0.95");
    }

    #[test]
    fn scenario_and_method_parse_round_trip() {
        for scenario in [
            Scenario::ObsClean,
            Scenario::ObsConfounded,
            Scenario::RctSelected,
        ] {
            assert_eq!(scenario.to_string().parse::<Scenario>().unwrap(), scenario);
        }
        for method in [Method::HighProb, Method::Average] {
            assert_eq!(method.to_string().parse::<Method>().unwrap(), method);
        }
        assert!("nope".parse::<Scenario>().is_err());
        assert!("nope".parse::<Method>().is_err());
    }
}
