//! Benchmarking a credible miscalibration factor for a nominal assignment
//! model: logistic model fitting, reliability binning of assignment odds,
//! and omitted-covariate odds ratios.
//!
//! The weighting pipeline takes the miscalibration factor `gamma` as an
//! input; this module estimates what factor the data can support. Two
//! diagnostics are provided:
//!
//! * [`reliability_bins`] — bin samples by their nominal assignment odds and
//!   compare, per bin, the model's mean odds against the empirically
//!   observed odds. A well-specified model keeps every bin's ratio near 1.
//! * [`omitted_covariate_ratios`] — refit the model with one covariate
//!   removed and report, per sample, the ratio of full-model to
//!   reduced-model odds of the observed action. The spread of these ratios
//!   measures how strongly a single omitted covariate can move the odds —
//!   a proxy for what a *latent* confounder of similar strength would do.
//!
//! [`suggest_gamma`] turns ratios into a single factor: the smallest
//! symmetric odds band `[1/gamma, gamma]` containing a target fraction
//! (default 95%) of them.
//!
//! Model fitting is iteratively reweighted least squares on the Bernoulli
//! log-likelihood with a fixed ridge of `1e-6` on non-intercept
//! coefficients (so separable data stays finite), run to gradient norm
//! `<= 1e-8` or 100 iterations. Continuous features are standardized and
//! categorical features one-hot encoded with the first category as
//! reference; the expansion is recorded with the model. Fitting is
//! single-threaded; per-sample ratio evaluation is data-parallel.

use std::fmt;
use std::io;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::data::{CovariateKind, DataError, Dataset};
use crate::par;
use crate::weights::NominalAssignmentModel;

/// Ridge strength on non-intercept coefficients.
const RIDGE: f64 = 1e-6;
/// Gradient-norm convergence tolerance.
const GRAD_TOL: f64 = 1e-8;
/// Iteration cap.
const MAX_ITER: usize = 100;

/// Errors from model fitting and the gamma diagnostics.
#[derive(Debug, Error)]
pub enum BenchmarkError {
    /// A parameter is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A referenced feature is not in the dataset schema.
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
    /// An input value is outside the operation's domain.
    #[error("domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Data(#[from] DataError),
    /// Table serialization failed.
    #[error("table serialization: {0}")]
    Csv(#[from] csv::Error),
}

/// One column of the expanded design, recording how it maps back to the
/// raw covariates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DesignColumn {
    /// A standardized continuous feature: `(x[column] - mean) / sd`.
    Standardized {
        feature: String,
        column: usize,
        mean: f64,
        sd: f64,
    },
    /// A one-hot indicator `1{x[column] == code}`; the first category of
    /// each categorical feature is the omitted reference level.
    Indicator {
        feature: String,
        column: usize,
        code: usize,
    },
}

/// Which binary outcome the regression fits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// The recorded action.
    Action,
    /// A covariate column whose values are exactly 0 or 1.
    Column(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Action => write!(f, "action"),
            Target::Column(name) => write!(f, "column {name}"),
        }
    }
}

/// A fitted logistic model over an expanded feature map.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    design: Vec<DesignColumn>,
    intercept: f64,
    coefficients: Vec<f64>,
    converged: bool,
}

impl LogisticModel {
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Coefficients aligned with [`LogisticModel::design`].
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// The recorded feature expansion, one entry per coefficient.
    pub fn design(&self) -> &[DesignColumn] {
        &self.design
    }

    /// False when the gradient tolerance was not reached within the
    /// iteration cap (or a linear solve failed).
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Predicted probability of target = 1 at a raw covariate vector laid
    /// out like the dataset the model was fitted on.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut z = self.intercept;
        for (entry, coef) in self.design.iter().zip(&self.coefficients) {
            z += coef
                * match entry {
                    DesignColumn::Standardized {
                        column, mean, sd, ..
                    } => (x[*column] - mean) / sd,
                    DesignColumn::Indicator { column, code, .. } => {
                        if x[*column] as usize == *code {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
        }
        logistic(z)
    }

    /// Wraps the fitted model as a nominal assignment model for the
    /// weighting pipeline (meaningful when the target was the action).
    pub fn assignment_model(&self) -> NominalAssignmentModel {
        let model = self.clone();
        NominalAssignmentModel::new(move |x: &[f64]| model.predict_proba(x))
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Builds the expanded design columns for the named features.
fn build_design<S: AsRef<str>>(
    data: &Dataset,
    features: &[S],
) -> Result<Vec<DesignColumn>, BenchmarkError> {
    let schema = data.schema();
    let mut seen = Vec::new();
    let mut design = Vec::new();
    for feature in features {
        let name = feature.as_ref();
        if seen.contains(&name) {
            return Err(BenchmarkError::Config(format!(
                "feature {name} listed twice"
            )));
        }
        seen.push(name);
        let column = schema
            .index_of(name)
            .ok_or_else(|| BenchmarkError::UnknownFeature(name.to_string()))?;
        match schema.kind(column) {
            CovariateKind::Continuous => {
                let n = data.len() as f64;
                let mean = data.samples().iter().map(|s| s.x[column]).sum::<f64>() / n;
                let sd = if data.len() > 1 {
                    let ss = data
                        .samples()
                        .iter()
                        .map(|s| (s.x[column] - mean).powi(2))
                        .sum::<f64>();
                    (ss / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                design.push(DesignColumn::Standardized {
                    feature: name.to_string(),
                    column,
                    mean,
                    // Constant columns get unit scale; the ridge then pins
                    // their coefficient near zero.
                    sd: if sd > 1e-12 { sd } else { 1.0 },
                });
            }
            CovariateKind::Categorical(codes) => {
                for code in 1..codes.len() {
                    design.push(DesignColumn::Indicator {
                        feature: name.to_string(),
                        column,
                        code,
                    });
                }
            }
        }
    }
    Ok(design)
}

fn design_value(entry: &DesignColumn, x: &[f64]) -> f64 {
    match entry {
        DesignColumn::Standardized {
            column, mean, sd, ..
        } => (x[*column] - mean) / sd,
        DesignColumn::Indicator { column, code, .. } => {
            if x[*column] as usize == *code {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Fits a logistic model of the target on the named features by
/// iteratively reweighted least squares (Newton steps on the ridged
/// Bernoulli log-likelihood). Non-convergence within the cap is reported
/// through [`LogisticModel::converged`], not as an error.
pub fn fit_logistic<S: AsRef<str>>(
    data: &Dataset,
    features: &[S],
    target: Target,
) -> Result<LogisticModel, BenchmarkError> {
    if data.is_empty() {
        return Err(BenchmarkError::Config("dataset is empty".to_string()));
    }
    let design = build_design(data, features)?;
    let y_raw: Vec<f64> = match &target {
        Target::Action => data
            .samples()
            .iter()
            .map(|s| if s.action { 1.0 } else { 0.0 })
            .collect(),
        Target::Column(name) => {
            let column = data
                .schema()
                .index_of(name)
                .ok_or_else(|| BenchmarkError::UnknownFeature(name.clone()))?;
            if features.iter().any(|f| f.as_ref() == name) {
                return Err(BenchmarkError::Config(format!(
                    "target column {name} cannot also be a feature"
                )));
            }
            let values: Vec<f64> = data.samples().iter().map(|s| s.x[column]).collect();
            if let Some(bad) = values.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(BenchmarkError::Domain(format!(
                    "target column {name} must be binary 0/1, found {bad}"
                )));
            }
            values
        }
    };
    let ones = y_raw.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == data.len() {
        return Err(BenchmarkError::Config(format!(
            "target {target} is constant; need both values present"
        )));
    }

    let n = data.len();
    let d = design.len();
    let z = DMatrix::from_fn(n, d + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            design_value(&design[j - 1], &data.samples()[i].x)
        }
    });
    let y = DVector::from_vec(y_raw);
    let mut beta = DVector::<f64>::zeros(d + 1);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let eta = &z * &beta;
        let mu = eta.map(logistic);
        let mut grad = z.transpose() * (&y - &mu);
        for j in 1..=d {
            grad[j] -= RIDGE * beta[j];
        }
        if grad.norm() <= GRAD_TOL {
            converged = true;
            break;
        }
        // H = Zᵀ diag(mu (1 - mu)) Z + ridge on non-intercept diagonal.
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        for i in 0..n {
            let w = mu[i] * (1.0 - mu[i]);
            for a in 0..=d {
                let za = z[(i, a)] * w;
                for b in a..=d {
                    h[(a, b)] += za * z[(i, b)];
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
            if a > 0 {
                h[(a, a)] += RIDGE;
            }
        }
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match h.lu().solve(&grad) {
                Some(s) => s,
                None => break,
            },
        };
        beta += step;
        if beta.iter().any(|b| !b.is_finite()) {
            break;
        }
    }
    Ok(LogisticModel {
        design,
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        converged,
    })
}

/// One equal-count bin of nominal assignment odds with its empirical
/// counterpart. Odds are oriented as `(1 - p(A=1|x)) / p(A=1|x)` on both
/// sides, so a well-calibrated model keeps `empirical_odds` close to
/// `mean_nominal_odds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityBin {
    /// Smallest nominal odds in the bin.
    pub odds_lo: f64,
    /// Largest nominal odds in the bin.
    pub odds_hi: f64,
    /// Mean nominal odds in the bin.
    pub mean_nominal_odds: f64,
    /// `(# A=0) / (# A=1)` within the bin; `+inf` when the bin has no
    /// treated sample.
    pub empirical_odds: f64,
    /// Samples in the bin (every bin is nonempty).
    pub count: usize,
}

/// Partitions the dataset into `n_bins` equal-count bins by nominal odds
/// (ties broken by sample order) and reports nominal versus empirical odds
/// per bin.
pub fn reliability_bins(
    data: &Dataset,
    model: &LogisticModel,
    n_bins: usize,
) -> Result<Vec<ReliabilityBin>, BenchmarkError> {
    if data.is_empty() {
        return Err(BenchmarkError::Config("dataset is empty".to_string()));
    }
    if n_bins == 0 || n_bins > data.len() {
        return Err(BenchmarkError::Config(format!(
            "n_bins = {n_bins} must be in 1..={}",
            data.len()
        )));
    }
    let odds: Vec<f64> = par::map_slice(data.samples(), |s| {
        let p = model.predict_proba(&s.x);
        (1.0 - p) / p
    });
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| odds[a].total_cmp(&odds[b]));

    let base = data.len() / n_bins;
    let extra = data.len() % n_bins;
    let mut bins = Vec::with_capacity(n_bins);
    let mut start = 0;
    for k in 0..n_bins {
        let size = base + usize::from(k < extra);
        let members = &order[start..start + size];
        start += size;
        let mut untreated = 0usize;
        let mut treated = 0usize;
        let mut sum_odds = 0.0;
        for &i in members {
            sum_odds += odds[i];
            if data.samples()[i].action {
                treated += 1;
            } else {
                untreated += 1;
            }
        }
        bins.push(ReliabilityBin {
            odds_lo: odds[members[0]],
            odds_hi: odds[members[members.len() - 1]],
            mean_nominal_odds: sum_odds / size as f64,
            empirical_odds: if treated == 0 {
                f64::INFINITY
            } else {
                untreated as f64 / treated as f64
            },
            count: size,
        });
    }
    Ok(bins)
}

/// Writes a reliability table as CSV with columns
/// `bin, mean_nominal_odds, empirical_odds, count` (bins numbered from 1).
pub fn write_reliability_csv<W: io::Write>(
    bins: &[ReliabilityBin],
    writer: W,
) -> Result<(), BenchmarkError> {
    #[derive(Serialize)]
    struct Row {
        bin: usize,
        mean_nominal_odds: f64,
        empirical_odds: f64,
        count: usize,
    }
    let mut w = csv::Writer::from_writer(writer);
    for (k, bin) in bins.iter().enumerate() {
        w.serialize(Row {
            bin: k + 1,
            mean_nominal_odds: bin.mean_nominal_odds,
            empirical_odds: bin.empirical_odds,
            count: bin.count,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Full and reduced fits with the per-sample odds ratios between them.
#[derive(Debug, Clone)]
pub struct OmittedCovariateReport {
    /// Per-sample ratio of full-model to reduced-model odds of the observed
    /// action, in dataset order.
    pub ratios: Vec<f64>,
    /// Fit on the complete feature list.
    pub full: LogisticModel,
    /// Fit with `omit` removed.
    pub reduced: LogisticModel,
}

/// Refits the assignment model without `omit` and reports, per sample, the
/// ratio of full-model odds to reduced-model odds of the observed action.
/// Convergence flags of both fits ride along on the report.
pub fn omitted_covariate_ratios<S: AsRef<str>>(
    data: &Dataset,
    omit: &str,
    features: &[S],
) -> Result<OmittedCovariateReport, BenchmarkError> {
    if !features.iter().any(|f| f.as_ref() == omit) {
        return Err(BenchmarkError::Config(format!(
            "omitted feature {omit} is not in the feature list"
        )));
    }
    let reduced_features: Vec<&str> = features
        .iter()
        .map(|f| f.as_ref())
        .filter(|f| *f != omit)
        .collect();
    let full = fit_logistic(data, features, Target::Action)?;
    let reduced = fit_logistic(data, &reduced_features, Target::Action)?;
    let ratios = par::map_slice(data.samples(), |s| {
        let observed_odds = |p: f64| if s.action { p / (1.0 - p) } else { (1.0 - p) / p };
        observed_odds(full.predict_proba(&s.x)) / observed_odds(reduced.predict_proba(&s.x))
    });
    Ok(OmittedCovariateReport {
        ratios,
        full,
        reduced,
    })
}

/// Empirical CDF support points of the ratios: each distinct input value
/// paired with the fraction of values at or below it, ascending.
pub fn ecdf_points(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        // Last occurrence of each value carries its final CDF height.
        if i + 1 == sorted.len() || sorted[i + 1] != v {
            points.push((v, (i + 1) as f64 / n));
        }
    }
    points
}

/// Writes the ratio ECDF as CSV with columns `ratio, ecdf`.
pub fn write_ratio_ecdf_csv<W: io::Write>(
    ratios: &[f64],
    writer: W,
) -> Result<(), BenchmarkError> {
    #[derive(Serialize)]
    struct Row {
        ratio: f64,
        ecdf: f64,
    }
    let mut w = csv::Writer::from_writer(writer);
    for (ratio, ecdf) in ecdf_points(ratios) {
        w.serialize(Row { ratio, ecdf })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// The smallest symmetric odds band containing `coverage_quantile` of the
/// benchmarked ratios: `exp` of the nearest-rank quantile of `|log ratio|`.
/// Always `>= 1`, and invariant to replacing any ratio by its reciprocal.
pub fn suggest_gamma(ratios: &[f64], coverage_quantile: f64) -> Result<f64, BenchmarkError> {
    if ratios.is_empty() {
        return Err(BenchmarkError::Config("no ratios given".to_string()));
    }
    if !(coverage_quantile > 0.0 && coverage_quantile <= 1.0) {
        return Err(BenchmarkError::Config(format!(
            "coverage quantile {coverage_quantile} outside (0, 1]"
        )));
    }
    if let Some(bad) = ratios.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(BenchmarkError::Domain(format!(
            "ratios must be positive and finite, found {bad}"
        )));
    }
    let mut logs: Vec<f64> = ratios.iter().map(|r| r.ln().abs()).collect();
    logs.sort_by(f64::total_cmp);
    let rank = (crate::bounds::ceil_snap(coverage_quantile * logs.len() as f64) as usize)
        .clamp(1, logs.len());
    Ok(logs[rank - 1].exp())
}
