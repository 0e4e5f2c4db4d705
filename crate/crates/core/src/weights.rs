//! Policy-dependent sample weights that stay valid when the nominal
//! assignment (or selection) model is miscalibrated by a bounded factor.
//!
//! For a policy action `pi(x)` and an observed action `A`, only samples
//! whose observed action agrees with the policy carry weight. With a
//! miscalibration budget `gamma >= 1` on the odds scale:
//!
//! * observational data, nominal probability `p = p_hat(A | x)` of the
//!   *observed* action:
//!
//!   ```text
//!   W = [ 1 + gamma * (1/p - 1) ] * 1{A = pi(x)}
//!   ```
//!
//!   `gamma = 1` recovers plain inverse-propensity weighting `1/p`.
//!
//! * trial data with selective enrollment (`S = 1`), where the evaluation
//!   population is the non-enrolled stratum (`S = 0`):
//!
//!   ```text
//!   W = gamma * odds_hat(x) * marginal_ratio * 1{A = pi(x)} / p(A)
//!   ```
//!
//!   with `odds_hat(x)` the nominal non-enrollment odds
//!   `p_hat(S=0|x) / p_hat(S=1|x)` (the density-ratio tilt from the trial
//!   population onto the target), `marginal_ratio` the marginal enrollment
//!   ratio `p(S=1) / p(S=0)`, and `p(A)` the known trial randomization
//!   probability of the observed arm.
//!
//! Nominal probabilities are clamped to `[1e-6, 1 - 1e-6]` before use.
//!
//! From the weights, two estimates per policy on a dataset of size `n`:
//! the population risk `mean(L * W)` and the treatment risk
//! `mean(V)` with `V = L * 1{A = 1} * W / rho_hat`, where
//! `rho_hat = mean(1{pi(x) = 1})` is the policy's treated fraction on the
//! same dataset. When the policy treats no one the treatment risk is 0 by
//! convention. The bound on any realized `V` needed by the tail machinery is
//! `v_max = max { W_i / rho_hat : A_i = 1, pi(x_i) = 1 }`, reported as
//! `None` when no treated sample agrees with the policy.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataSource, Dataset, Sample};

/// Nominal probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`
/// before entering any weight.
pub const PROB_CLAMP: f64 = 1e-6;

/// Errors from weight and estimate construction.
#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    /// `gamma` must be at least 1.
    #[error("gamma = {0} must be >= 1")]
    Gamma(f64),
    /// A probability parameter is outside `(0, 1)`.
    #[error("{name} = {value} outside (0, 1)")]
    Probability { name: &'static str, value: f64 },
    /// Policy actions and dataset disagree in length.
    #[error("policy actions length {actions} does not match dataset length {samples}")]
    LengthMismatch { actions: usize, samples: usize },
    /// The operation needs at least one sample.
    #[error("empty dataset")]
    Empty,
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    debug_assert!(p.is_finite(), "nominal probability must be finite, got {p}");
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Which weighting formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Assignment probabilities are modeled from the data.
    Observational,
    /// Assignment is randomized; enrollment into the trial is modeled.
    Trial,
}

impl From<DataSource> for Regime {
    fn from(source: DataSource) -> Self {
        match source {
            DataSource::Observational => Regime::Observational,
            DataSource::Trial => Regime::Trial,
        }
    }
}

/// Miscalibration budget: the nominal odds may be off by a factor of up to
/// `gamma` in either direction. `gamma = 1` asserts the model is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiscalibrationConfig {
    gamma: f64,
}

impl MiscalibrationConfig {
    pub fn new(gamma: f64) -> Result<Self, WeightsError> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(WeightsError::Gamma(gamma));
        }
        Ok(MiscalibrationConfig { gamma })
    }

    /// Exact-model budget (`gamma = 1`): plain inverse-propensity weights.
    pub fn ipw() -> Self {
        MiscalibrationConfig { gamma: 1.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Nominal model of `p(A = 1 | x)` for observational data.
#[derive(Clone)]
pub struct NominalAssignmentModel {
    prob_treat: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl NominalAssignmentModel {
    pub fn new(prob_treat: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        NominalAssignmentModel {
            prob_treat: Arc::new(prob_treat),
        }
    }

    /// Clamped nominal probability that the treated action is taken at `x`.
    pub fn prob_treat(&self, x: &[f64]) -> f64 {
        clamp_prob((self.prob_treat)(x))
    }

    /// Clamped nominal probability of the *observed* action at `x`.
    pub fn prob_observed(&self, x: &[f64], action: bool) -> f64 {
        let p = self.prob_treat(x);
        if action {
            p
        } else {
            1.0 - p
        }
    }
}

impl fmt::Debug for NominalAssignmentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("NominalAssignmentModel(..)")
    }
}

/// Nominal enrollment model for trial data evaluated off-trial.
#[derive(Clone)]
pub struct NominalSelectionModel {
    selection_odds: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    marginal_ratio: f64,
    p_treat_trial: f64,
}

impl NominalSelectionModel {
    /// `selection_odds` returns the nominal non-enrollment odds
    /// `p_hat(S=0|x) / p_hat(S=1|x)` at `x`; `marginal_ratio` is the
    /// constant `p(S=1) / p(S=0)`; and `p_treat_trial` is the
    /// randomization probability of the treated arm.
    pub fn new(
        selection_odds: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        marginal_ratio: f64,
        p_treat_trial: f64,
    ) -> Result<Self, WeightsError> {
        if !(marginal_ratio > 0.0) || !marginal_ratio.is_finite() {
            return Err(WeightsError::Probability {
                name: "marginal_ratio",
                value: marginal_ratio,
            });
        }
        if !(p_treat_trial > 0.0 && p_treat_trial < 1.0) {
            return Err(WeightsError::Probability {
                name: "p_treat_trial",
                value: p_treat_trial,
            });
        }
        Ok(NominalSelectionModel {
            selection_odds: Arc::new(selection_odds),
            marginal_ratio,
            p_treat_trial,
        })
    }

    /// Clamped non-enrollment odds at `x`: the implied probability
    /// `odds / (1 + odds)` is clamped, then mapped back to odds.
    pub fn selection_odds(&self, x: &[f64]) -> f64 {
        let odds = (self.selection_odds)(x);
        debug_assert!(odds.is_finite() && odds >= 0.0, "odds must be finite, got {odds}");
        let p = clamp_prob(odds / (1.0 + odds));
        p / (1.0 - p)
    }

    pub fn marginal_ratio(&self) -> f64 {
        self.marginal_ratio
    }

    pub fn p_treat_trial(&self) -> f64 {
        self.p_treat_trial
    }

    /// Randomization probability of the observed arm.
    pub fn prob_observed(&self, action: bool) -> f64 {
        if action {
            self.p_treat_trial
        } else {
            1.0 - self.p_treat_trial
        }
    }
}

impl fmt::Debug for NominalSelectionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NominalSelectionModel")
            .field("selection_odds", &"..")
            .field("marginal_ratio", &self.marginal_ratio)
            .field("p_treat_trial", &self.p_treat_trial)
            .finish()
    }
}

/// The nominal model attached to a dataset, fixing the weight formula.
#[derive(Debug, Clone)]
pub enum NominalModel {
    Observational(NominalAssignmentModel),
    Trial(NominalSelectionModel),
}

impl NominalModel {
    pub fn regime(&self) -> Regime {
        match self {
            NominalModel::Observational(_) => Regime::Observational,
            NominalModel::Trial(_) => Regime::Trial,
        }
    }

    /// Weight of `sample` when the policy takes `policy_action` at its
    /// covariates, under miscalibration budget `cfg`.
    pub fn weight(&self, sample: &Sample, policy_action: bool, cfg: MiscalibrationConfig) -> f64 {
        let agrees = sample.action == policy_action;
        match self {
            NominalModel::Observational(m) => {
                let p = m.prob_observed(&sample.x, sample.action);
                obs_weight(p, agrees, cfg.gamma())
            }
            NominalModel::Trial(m) => rct_weight(
                m.selection_odds(&sample.x),
                m.marginal_ratio(),
                m.prob_observed(sample.action),
                agrees,
                cfg.gamma(),
            ),
        }
    }
}

/// Per-sample weighted quantities for one policy on one dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSample {
    /// The weight `W`; 0 whenever the observed action disagrees with the
    /// policy action.
    pub w: f64,
    /// Objective contribution `L * W`.
    pub contributes_obj: f64,
    /// Constraint statistic `V = L * 1{A=1} * W / rho_hat`; 0 whenever
    /// `L = 0`, `A = 0`, or the policy treats no one.
    pub v: f64,
}

/// Per-sample weights, objective contributions, and constraint statistics
/// for a policy, using the dataset's own treated fraction for `rho_hat`.
pub fn weighted_samples(
    data: &Dataset,
    policy_actions: &[bool],
    model: &NominalModel,
    cfg: MiscalibrationConfig,
) -> Result<Vec<WeightedSample>, WeightsError> {
    check_actions(data, policy_actions)?;
    let rho_hat = proportion_treated(policy_actions);
    Ok(data
        .samples()
        .iter()
        .zip(policy_actions)
        .map(|(s, &pi)| {
            let w = model.weight(s, pi, cfg);
            let contributes_obj = s.loss01() * w;
            let v = if s.action && pi && rho_hat > 0.0 {
                contributes_obj / rho_hat
            } else {
                0.0
            };
            WeightedSample {
                w,
                contributes_obj,
                v,
            }
        })
        .collect())
}

/// Observational weight `[1 + gamma (1/p - 1)] 1{agrees}` where `p` is the
/// nominal probability of the observed action (clamped).
pub fn obs_weight(p_observed_action: f64, agrees: bool, gamma: f64) -> f64 {
    if !agrees {
        return 0.0;
    }
    let p = clamp_prob(p_observed_action);
    1.0 + gamma * (1.0 / p - 1.0)
}

/// Trial weight `gamma * odds * marginal_ratio * 1{agrees} / p_action`.
pub fn rct_weight(
    selection_odds: f64,
    marginal_ratio: f64,
    p_action: f64,
    agrees: bool,
    gamma: f64,
) -> f64 {
    if !agrees {
        return 0.0;
    }
    gamma * selection_odds * marginal_ratio / clamp_prob(p_action)
}

/// Fraction of samples the policy treats; 0 on an empty slice.
pub fn proportion_treated(policy_actions: &[bool]) -> f64 {
    if policy_actions.is_empty() {
        return 0.0;
    }
    policy_actions.iter().filter(|&&a| a).count() as f64 / policy_actions.len() as f64
}

fn check_actions(data: &Dataset, policy_actions: &[bool]) -> Result<(), WeightsError> {
    if data.is_empty() {
        return Err(WeightsError::Empty);
    }
    if policy_actions.len() != data.len() {
        return Err(WeightsError::LengthMismatch {
            actions: policy_actions.len(),
            samples: data.len(),
        });
    }
    Ok(())
}

/// Weighted estimate of the policy's population risk: `mean(L * W)`.
pub fn population_risk_estimate(
    data: &Dataset,
    policy_actions: &[bool],
    model: &NominalModel,
    cfg: MiscalibrationConfig,
) -> Result<f64, WeightsError> {
    check_actions(data, policy_actions)?;
    let total: f64 = data
        .samples()
        .iter()
        .zip(policy_actions)
        .map(|(s, &pi)| s.loss01() * model.weight(s, pi, cfg))
        .sum();
    Ok(total / data.len() as f64)
}

/// Per-sample values of the treatment-risk statistic
/// `V_i = L_i * 1{A_i = 1} * W_i / rho_hat` (all zeros when the policy
/// treats no one). The conformal-quantile selection rule consumes these.
pub fn treatment_statistic_values(
    data: &Dataset,
    policy_actions: &[bool],
    model: &NominalModel,
    cfg: MiscalibrationConfig,
) -> Result<Vec<f64>, WeightsError> {
    Ok(weighted_samples(data, policy_actions, model, cfg)?
        .into_iter()
        .map(|ws| ws.v)
        .collect())
}

/// One-pass summary of the treatment-risk statistic `V` for a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreatmentRiskStats {
    /// `mean(V)`; 0 when the policy treats no one.
    pub mean: f64,
    /// Number of samples the mean runs over (the dataset size).
    pub n: usize,
    /// Fraction of samples the policy treats.
    pub rho_hat: f64,
    /// Upper bound on any realized `V`: `max W_i / rho_hat` over samples
    /// that are both treated and policy-agreeing; `None` when there are no
    /// such samples (then `mean` is exactly 0).
    pub v_max: Option<f64>,
}

/// Weighted estimate of the policy's treatment risk with the pieces the
/// tail bound needs. `V_i = L_i * 1{A_i = 1} * W_i / rho_hat`.
pub fn treatment_risk_stats(
    data: &Dataset,
    policy_actions: &[bool],
    model: &NominalModel,
    cfg: MiscalibrationConfig,
) -> Result<TreatmentRiskStats, WeightsError> {
    check_actions(data, policy_actions)?;
    let n = data.len();
    let rho_hat = proportion_treated(policy_actions);
    if rho_hat == 0.0 {
        return Ok(TreatmentRiskStats {
            mean: 0.0,
            n,
            rho_hat,
            v_max: None,
        });
    }
    let mut sum_v = 0.0;
    let mut max_weight: Option<f64> = None;
    for (s, &pi) in data.samples().iter().zip(policy_actions) {
        if !(s.action && pi) {
            continue;
        }
        let w = model.weight(s, pi, cfg);
        sum_v += s.loss01() * w / rho_hat;
        max_weight = Some(match max_weight {
            Some(m) => m.max(w),
            None => w,
        });
    }
    Ok(TreatmentRiskStats {
        mean: sum_v / n as f64,
        n,
        rho_hat,
        v_max: max_weight.map(|m| m / rho_hat),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariateKind, CovariateSchema};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn schema1() -> CovariateSchema {
        CovariateSchema::new(vec![("x1".to_string(), CovariateKind::Continuous)]).unwrap()
    }

    fn sample(x: f64, action: bool, loss: bool) -> Sample {
        Sample {
            x: vec![x],
            action,
            loss,
        }
    }

    #[test]
    fn obs_weight_examples() {
        assert_eq!(obs_weight(0.5, true, 1.0), 2.0);
        assert_eq!(obs_weight(0.2, true, 2.0), 9.0);
        assert_eq!(obs_weight(0.2, false, 2.0), 0.0);
        // Clamp keeps the weight finite at p = 0.
        let w = obs_weight(0.0, true, 1.0);
        assert!((w - 1e6).abs() / 1e6 < 1e-9);
    }

    #[test]
    fn rct_weight_examples() {
        assert_eq!(rct_weight(1.0, 1.0, 0.5, true, 1.0), 2.0);
        assert_eq!(rct_weight(1.0, 1.0, 0.5, true, 2.0), 4.0);
        assert_eq!(rct_weight(1.0, 1.0, 0.5, false, 2.0), 0.0);
        let w = rct_weight(0.25, 2.0, 0.5, true, 1.0);
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nominal_model_routes_by_regime() {
        let obs = NominalModel::Observational(NominalAssignmentModel::new(|_| 0.5));
        let cfg = MiscalibrationConfig::ipw();
        let s = sample(1.0, true, true);
        assert_eq!(obs.weight(&s, true, cfg), 2.0);
        assert_eq!(obs.weight(&s, false, cfg), 0.0);
        assert_eq!(obs.regime(), Regime::Observational);

        let trial =
            NominalModel::Trial(NominalSelectionModel::new(|_| 1.0, 1.0, 0.5).unwrap());
        let cfg2 = MiscalibrationConfig::new(2.0).unwrap();
        assert_eq!(trial.weight(&s, true, cfg2), 4.0);
        assert_eq!(trial.regime(), Regime::Trial);
        assert_eq!(Regime::from(DataSource::Trial), Regime::Trial);
    }

    #[test]
    fn observed_action_probability_complements() {
        let m = NominalAssignmentModel::new(|x: &[f64]| x[0]);
        assert!((m.prob_observed(&[0.3], true) - 0.3).abs() < 1e-15);
        assert!((m.prob_observed(&[0.3], false) - 0.7).abs() < 1e-15);
        // Clamped at the edges.
        assert_eq!(m.prob_observed(&[2.0], true), 1.0 - PROB_CLAMP);
        assert_eq!(m.prob_treat(&[-1.0]), PROB_CLAMP);
    }

    #[test]
    fn config_validation() {
        assert!(MiscalibrationConfig::new(0.99).is_err());
        assert!(MiscalibrationConfig::new(f64::NAN).is_err());
        assert_eq!(MiscalibrationConfig::new(1.0).unwrap(), MiscalibrationConfig::ipw());
        assert!(NominalSelectionModel::new(|_| 1.0, 0.0, 0.5).is_err());
        assert!(NominalSelectionModel::new(|_| 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn treatment_risk_zero_when_no_one_treated() {
        let data = Dataset::new(
            schema1(),
            vec![sample(1.0, true, true), sample(2.0, false, true)],
            DataSource::Observational,
        )
        .unwrap();
        let model = NominalModel::Observational(NominalAssignmentModel::new(|_| 0.5));
        let stats =
            treatment_risk_stats(&data, &[false, false], &model, MiscalibrationConfig::ipw())
                .unwrap();
        assert_eq!(stats.mean, 0.0);
        assert_eq!(stats.rho_hat, 0.0);
        assert_eq!(stats.v_max, None);
    }

    #[test]
    fn treatment_risk_small_case_by_hand() {
        // Four samples, policy treats the first three; p_hat = 0.5 so each
        // agreeing weight is 2. Treated-and-agreeing: samples 0 (loss) and
        // 2 (no loss). rho_hat = 3/4, V_0 = 1 * 2 / 0.75 = 8/3.
        let data = Dataset::new(
            schema1(),
            vec![
                sample(0.0, true, true),
                sample(1.0, false, true),
                sample(2.0, true, false),
                sample(3.0, false, true),
            ],
            DataSource::Observational,
        )
        .unwrap();
        let model = NominalModel::Observational(NominalAssignmentModel::new(|_| 0.5));
        let pi = [true, true, true, false];
        let stats =
            treatment_risk_stats(&data, &pi, &model, MiscalibrationConfig::ipw()).unwrap();
        assert!((stats.rho_hat - 0.75).abs() < 1e-15);
        assert!((stats.mean - (8.0 / 3.0) / 4.0).abs() < 1e-15);
        assert!((stats.v_max.unwrap() - 8.0 / 3.0).abs() < 1e-15);

        // Population risk: losses at samples 0 (agrees, w 2), 1 (pi treats
        // but observed control: w 0), 3 (agrees, w 2) -> (2 + 0 + 0 + 2)/4.
        let r = population_risk_estimate(&data, &pi, &model, MiscalibrationConfig::ipw())
            .unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_sample_invariants() {
        // p_hat 0.2 on the first sample, 0.5 elsewhere; treat-all at
        // gamma = 2 puts v_max at 1 + 2*(1/0.2 - 1) = 9.
        let data = Dataset::new(
            schema1(),
            vec![
                sample(0.0, true, true),
                sample(1.0, true, false),
                sample(2.0, false, true),
            ],
            DataSource::Observational,
        )
        .unwrap();
        let model = NominalModel::Observational(NominalAssignmentModel::new(|x: &[f64]| {
            if x[0] == 0.0 {
                0.2
            } else {
                0.5
            }
        }));
        let cfg = MiscalibrationConfig::new(2.0).unwrap();
        let pi = [true, true, true];
        let ws = weighted_samples(&data, &pi, &model, cfg).unwrap();
        assert_eq!(ws[0].w, 9.0);
        assert_eq!(ws[0].contributes_obj, 9.0);
        assert_eq!(ws[0].v, 9.0); // rho_hat = 1
        assert_eq!(ws[1].v, 0.0, "v vanishes at L = 0");
        assert_eq!(ws[2].w, 0.0, "weight vanishes on disagreement");
        assert_eq!(ws[2].v, 0.0, "v vanishes at A = 0");
        let stats = treatment_risk_stats(&data, &pi, &model, cfg).unwrap();
        assert_eq!(stats.v_max.unwrap(), 9.0);
        assert!(ws.iter().all(|s| s.v <= stats.v_max.unwrap()));
        // Same statistics through the vector accessor.
        let v = treatment_statistic_values(&data, &pi, &model, cfg).unwrap();
        assert_eq!(v, vec![9.0, 0.0, 0.0]);
    }

    #[test]
    fn estimator_input_validation() {
        let data = Dataset::new(
            schema1(),
            vec![sample(0.0, true, true)],
            DataSource::Observational,
        )
        .unwrap();
        let model = NominalModel::Observational(NominalAssignmentModel::new(|_| 0.5));
        let err = population_risk_estimate(&data, &[true, false], &model, MiscalibrationConfig::ipw());
        assert_eq!(
            err.unwrap_err(),
            WeightsError::LengthMismatch {
                actions: 2,
                samples: 1
            }
        );
    }

    /// IPW with the true assignment model recovers the true risks on
    /// synthetic data, within three standard errors.
    #[test]
    fn ipw_consistency_on_synthetic_data() {
        let n = 100_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(0.0..1.0);
            let p_treat = 0.3 + 0.4 * x;
            let action = rng.gen_bool(p_treat);
            let p_loss = if action { 0.2 + 0.3 * x } else { 0.6 * x };
            let loss = rng.gen_bool(p_loss);
            samples.push(sample(x, action, loss));
        }
        let data = Dataset::new(schema1(), samples, DataSource::Observational).unwrap();
        let model =
            NominalModel::Observational(NominalAssignmentModel::new(|x: &[f64]| 0.3 + 0.4 * x[0]));
        let cfg = MiscalibrationConfig::ipw();
        let pi: Vec<bool> = data.samples().iter().map(|s| s.x[0] < 0.5).collect();

        // True values for pi = 1{x < 0.5}:
        //   R = int_0^.5 (0.2 + 0.3x) dx + int_.5^1 0.6x dx = 0.1375 + 0.225
        //   T = E[0.2 + 0.3x | x < 0.5] = 0.275
        let r_hat = population_risk_estimate(&data, &pi, &model, cfg).unwrap();
        let contributions: Vec<f64> = data
            .samples()
            .iter()
            .zip(&pi)
            .map(|(s, &a)| s.loss01() * model.weight(s, a, cfg))
            .collect();
        let se_r = standard_error(&contributions);
        assert!(
            (r_hat - 0.3625).abs() < 3.0 * se_r,
            "population risk {r_hat} vs 0.3625 (se {se_r})"
        );

        let stats = treatment_risk_stats(&data, &pi, &model, cfg).unwrap();
        let v: Vec<f64> = data
            .samples()
            .iter()
            .zip(&pi)
            .map(|(s, &a)| {
                if s.action && a {
                    s.loss01() * model.weight(s, a, cfg) / stats.rho_hat
                } else {
                    0.0
                }
            })
            .collect();
        let se_t = standard_error(&v);
        assert!(
            (stats.mean - 0.275).abs() < 3.0 * se_t,
            "treatment risk {} vs 0.275 (se {se_t})",
            stats.mean
        );
        // v_max bounds every realized V.
        let v_max = stats.v_max.unwrap();
        assert!(v.iter().all(|&vi| vi <= v_max + 1e-12));
    }

    fn standard_error(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    proptest! {
        /// Weights never decrease as the miscalibration budget grows, so
        /// both estimates are monotone in gamma.
        #[test]
        fn weights_monotone_in_gamma(
            p in 0.01f64..0.99,
            gamma_lo in 1.0f64..5.0,
            bump in 0.0f64..5.0,
            action in any::<bool>(),
        ) {
            let gamma_hi = gamma_lo + bump;
            let w_lo = obs_weight(p, true, gamma_lo);
            let w_hi = obs_weight(p, true, gamma_hi);
            prop_assert!(w_hi >= w_lo);
            prop_assert!(w_lo >= 1.0);
            let r_lo = rct_weight(0.7, 1.3, if action { 0.4 } else { 0.6 }, true, gamma_lo);
            let r_hi = rct_weight(0.7, 1.3, if action { 0.4 } else { 0.6 }, true, gamma_hi);
            prop_assert!(r_hi >= r_lo);
        }

        /// Estimates are monotone in gamma on random small datasets.
        #[test]
        fn estimates_monotone_in_gamma(seed in 0u64..500, gamma in 1.0f64..4.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..30);
            let samples: Vec<Sample> = (0..n)
                .map(|_| sample(rng.gen_range(0.0..1.0), rng.gen_bool(0.5), rng.gen_bool(0.5)))
                .collect();
            let data = Dataset::new(schema1(), samples, DataSource::Observational).unwrap();
            let pi: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let model = NominalModel::Observational(
                NominalAssignmentModel::new(|x: &[f64]| 0.2 + 0.6 * x[0]),
            );
            let lo = MiscalibrationConfig::ipw();
            let hi = MiscalibrationConfig::new(gamma).unwrap();
            let r_lo = population_risk_estimate(&data, &pi, &model, lo).unwrap();
            let r_hi = population_risk_estimate(&data, &pi, &model, hi).unwrap();
            prop_assert!(r_hi >= r_lo - 1e-12);
            let t_lo = treatment_risk_stats(&data, &pi, &model, lo).unwrap();
            let t_hi = treatment_risk_stats(&data, &pi, &model, hi).unwrap();
            prop_assert!(t_hi.mean >= t_lo.mean - 1e-12);
        }
    }
}
