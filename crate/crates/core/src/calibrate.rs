//! Tolerance sweep and certified tolerance selection.
//!
//! The pipeline: learn one policy per nominal tolerance `t` on a learning
//! split, re-estimate each policy on a held-out certification split, and
//! pick the tolerance whose certified treatment risk clears the cap `tau`.
//!
//! Two selection rules are provided.
//!
//! * **High-probability** ([`select_high_prob`]): a tolerance `t` is
//!   admissible when `tau > ucb(t')` holds for *every* grid point
//!   `t' <= t` — the admissible set is the maximal prefix of the grid
//!   (scan ascending, stop at the first violation). Among the prefix, the
//!   selected `t` minimizes the risk estimate on the certification split.
//!   With the upper confidence bound at level `alpha`, the selected
//!   policy's treatment risk stays at or below `tau` with probability at
//!   least `1 - alpha`.
//!
//! * **Average** ([`select_average`]): admissibility is the non-strict test
//!   `tau >= (n * R_n(t) + Vbar_alpha(t)) / (n + 1)`, where `R_n(t)` is the
//!   treatment-risk estimate on the certification split and `Vbar_alpha(t)`
//!   is the split-conformal quantile of the per-sample statistic on a
//!   separate conformal split. This set need not be a prefix. The rule
//!   controls the treatment risk in expectation over resampling.
//!
//! When no tolerance is admissible, both rules fall back to the treat-none
//! policy and report `feasible = false`; that policy's treatment risk is
//! identically zero, so the guarantee is preserved vacuously.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{bentkus_ucb, conformal_quantile, BoundsError, UcbInput};
use crate::data::Dataset;
use crate::par;
use crate::policy::{FrugalTree, PolicyError, PolicyScorer};
use crate::weights::{
    population_risk_estimate, treatment_risk_stats, treatment_statistic_values,
    MiscalibrationConfig, NominalModel, WeightsError,
};

/// Errors from sweep and selection.
#[derive(Debug, Error)]
pub enum CalibrateError {
    /// The tolerance grid is malformed.
    #[error("invalid tolerance grid: {0}")]
    Grid(String),
    /// A configuration field is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Strictly increasing tolerance values, all in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceGrid {
    points: Vec<f64>,
}

impl ToleranceGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, CalibrateError> {
        if points.is_empty() {
            return Err(CalibrateError::Grid("grid must be nonempty".to_string()));
        }
        for &t in &points {
            if !(t > 0.0 && t < 1.0) {
                return Err(CalibrateError::Grid(format!("point {t} outside (0, 1)")));
            }
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CalibrateError::Grid(
                "points must be strictly increasing".to_string(),
            ));
        }
        Ok(ToleranceGrid { points })
    }

    /// `count` equally spaced points `i * hi / count` for `i = 1..=count`,
    /// covering `(0, hi]`. Requires `count >= 1` and `hi` in `(0, 1)`.
    pub fn equally_spaced(count: usize, hi: f64) -> Result<Self, CalibrateError> {
        if count < 1 {
            return Err(CalibrateError::Grid("count must be >= 1".to_string()));
        }
        if !(hi > 0.0 && hi < 1.0) {
            return Err(CalibrateError::Grid(format!(
                "upper end {hi} outside (0, 1)"
            )));
        }
        let points = (1..=count).map(|i| i as f64 * hi / count as f64).collect();
        ToleranceGrid::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one point
    }
}

/// Learns one policy per grid tolerance on the learning split. The
/// per-sample scores are computed once and shared by every grid point;
/// the grid points run in parallel when the `parallel` feature is on.
pub fn sweep(
    d_m: &Dataset,
    grid: &ToleranceGrid,
    model: &NominalModel,
    cfg: MiscalibrationConfig,
    max_depth: usize,
    bins: usize,
) -> Result<Vec<(f64, FrugalTree)>, CalibrateError> {
    if max_depth < 1 {
        return Err(CalibrateError::Config("max_depth must be >= 1".to_string()));
    }
    let scorer = PolicyScorer::new(d_m, model, cfg, bins)?;
    Ok(par::map_slice(grid.points(), |&t| {
        (t, scorer.learn(t, max_depth))
    }))
}

/// One grid point of an evaluated tolerance path.
#[derive(Debug, Clone)]
pub struct PathEntry {
    /// Nominal tolerance the policy was learned at.
    pub t: f64,
    pub policy: FrugalTree,
    /// Population-risk estimate on the certification split.
    pub obj_n: f64,
    /// Treatment-risk estimate on the certification split.
    pub constraint_n: f64,
    /// Upper confidence bound on the treatment risk; 0 when no treated
    /// sample agrees with the policy (the estimate is then exactly 0).
    pub ucb: f64,
    /// Scale bound backing the UCB; 0 in the degenerate case above.
    pub v_max: f64,
}

/// A sweep evaluated on the certification split: one entry per grid point,
/// ascending in `t`, with the confidence level the bounds were run at.
#[derive(Debug, Clone)]
pub struct TolerancePath {
    alpha: f64,
    n: usize,
    entries: Vec<PathEntry>,
}

impl TolerancePath {
    /// Assembles a path from parts, enforcing the ascending-`t` invariant.
    pub fn from_entries(
        alpha: f64,
        n: usize,
        entries: Vec<PathEntry>,
    ) -> Result<Self, CalibrateError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CalibrateError::Config(format!(
                "alpha = {alpha} outside (0, 1)"
            )));
        }
        if n == 0 {
            return Err(CalibrateError::Config(
                "certification split size must be >= 1".to_string(),
            ));
        }
        if entries.is_empty() {
            return Err(CalibrateError::Grid("path must be nonempty".to_string()));
        }
        if entries.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(CalibrateError::Grid(
                "entries must be strictly increasing in t".to_string(),
            ));
        }
        Ok(TolerancePath { alpha, n, entries })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Size of the certification split the entries were estimated on.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }
}

/// Estimates every swept policy on the certification split `d_n` and
/// attaches the level-`alpha` upper confidence bound per grid point.
pub fn evaluate_path(
    policies: &[(f64, FrugalTree)],
    d_n: &Dataset,
    model: &NominalModel,
    cfg: MiscalibrationConfig,
    alpha: f64,
) -> Result<TolerancePath, CalibrateError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CalibrateError::Config(format!(
            "alpha = {alpha} outside (0, 1)"
        )));
    }
    let n = d_n.len();
    let entries = par::map_slice(policies, |(t, policy)| -> Result<PathEntry, CalibrateError> {
        let actions = policy.actions(d_n);
        let obj_n = population_risk_estimate(d_n, &actions, model, cfg)?;
        let stats = treatment_risk_stats(d_n, &actions, model, cfg)?;
        let (ucb, v_max) = match stats.v_max {
            Some(v_max) => {
                let input = UcbInput::new(stats.mean, n as u64, alpha, v_max)?;
                (bentkus_ucb(&input), v_max)
            }
            // No treated sample agrees with the policy: the statistic is
            // identically zero on this split.
            None => (0.0, 0.0),
        };
        Ok(PathEntry {
            t: *t,
            policy: policy.clone(),
            obj_n,
            constraint_n: stats.mean,
            ucb,
            v_max,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    TolerancePath::from_entries(alpha, n, entries)
}

/// One row of the per-tolerance diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub obj_n: f64,
    pub constraint_n: f64,
    pub ucb: f64,
    pub v_max: f64,
}

/// Outcome of a selection rule: the chosen tolerance (when any was
/// admissible), the policy to deploy, and the full diagnostics table.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    /// Selected tolerance; `None` when the admissible set was empty and
    /// the treat-none fallback was returned.
    pub t_n: Option<f64>,
    pub policy: FrugalTree,
    pub feasible: bool,
    pub diagnostics: Vec<DiagnosticRow>,
}

fn diagnostics_of(path: &TolerancePath) -> Vec<DiagnosticRow> {
    path.entries
        .iter()
        .map(|e| DiagnosticRow {
            t: e.t,
            obj_n: e.obj_n,
            constraint_n: e.constraint_n,
            ucb: e.ucb,
            v_max: e.v_max,
        })
        .collect()
}

fn select_result(path: &TolerancePath, admissible: Vec<&PathEntry>) -> CalibrationResult {
    let diagnostics = diagnostics_of(path);
    // Minimum risk estimate wins; scanning ascending in t breaks ties
    // toward the smaller (more conservative) tolerance.
    let mut chosen: Option<&PathEntry> = None;
    for entry in admissible {
        if chosen.as_ref().map_or(true, |c| entry.obj_n < c.obj_n) {
            chosen = Some(entry);
        }
    }
    match chosen {
        Some(entry) => CalibrationResult {
            t_n: Some(entry.t),
            policy: entry.policy.clone(),
            feasible: true,
            diagnostics,
        },
        None => CalibrationResult {
            t_n: None,
            policy: FrugalTree::treat_none(),
            feasible: false,
            diagnostics,
        },
    }
}

/// High-probability selection: admissible tolerances are the maximal
/// prefix of the grid on which `tau > ucb` holds at every point; the
/// admissible tolerance with the smallest certification-split risk
/// estimate is selected. Falls back to treat-none when the prefix is
/// empty.
pub fn select_high_prob(path: &TolerancePath, tau: f64) -> CalibrationResult {
    let prefix: Vec<&PathEntry> = path
        .entries
        .iter()
        .take_while(|e| tau > e.ucb)
        .collect();
    select_result(path, prefix)
}

/// Average-guarantee selection: a tolerance is admissible when
/// `tau >= (n * R_n + Vbar_alpha) / (n + 1)`, with `Vbar_alpha` the
/// split-conformal quantile of the per-sample treatment statistic on the
/// conformal split `d_l`. The admissible set need not be a prefix.
pub fn select_average(
    path: &TolerancePath,
    d_l: &Dataset,
    model: &NominalModel,
    cfg: MiscalibrationConfig,
    tau: f64,
    alpha: f64,
) -> Result<CalibrationResult, CalibrateError> {
    let n = path.n as f64;
    let flags = par::map_slice(path.entries(), |entry| -> Result<bool, CalibrateError> {
        let actions = entry.policy.actions(d_l);
        let values = treatment_statistic_values(d_l, &actions, model, cfg)?;
        let vbar = conformal_quantile(&values, alpha)?;
        Ok(tau >= (n * entry.constraint_n + vbar) / (n + 1.0))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let admissible: Vec<&PathEntry> = path
        .entries
        .iter()
        .zip(&flags)
        .filter(|(_, &ok)| ok)
        .map(|(e, _)| e)
        .collect();
    Ok(select_result(path, admissible))
}

impl CalibrationResult {
    /// JSON document with the chosen tolerance, feasibility flag, policy
    /// (schema-resolved), and the diagnostics table.
    pub fn to_json(
        &self,
        schema: &crate::data::CovariateSchema,
    ) -> Result<String, CalibrateError> {
        let policy: serde_json::Value = serde_json::from_str(&self.policy.to_json(schema)?)?;
        let doc = serde_json::json!({
            "t_n": self.t_n,
            "feasible": self.feasible,
            "policy": policy,
            "diagnostics": self.diagnostics,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Diagnostics table as CSV with columns
    /// `t,obj_n,constraint_n,ucb,v_max`.
    pub fn write_diagnostics_csv<W: io::Write>(&self, writer: W) -> Result<(), CalibrateError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.diagnostics {
            w.serialize(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariateKind, CovariateSchema, DataSource, Sample, SplitSpec};
    use crate::policy::{PredicateTest, Rule};
    use crate::weights::NominalAssignmentModel;
    use rand::Rng;
    use rand::SeedableRng;

    fn schema1() -> CovariateSchema {
        CovariateSchema::new(vec![("x1".to_string(), CovariateKind::Continuous)]).unwrap()
    }

    fn fixed_model() -> NominalModel {
        NominalModel::Observational(NominalAssignmentModel::new(|_| 0.5))
    }

    #[test]
    fn grid_construction() {
        let g = ToleranceGrid::equally_spaced(200, 0.5).unwrap();
        assert_eq!(g.len(), 200);
        assert!((g.points()[0] - 0.0025).abs() < 1e-15);
        assert!((g.points()[199] - 0.5).abs() < 1e-15);
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(
            g.points()[99],
            100.0 * 0.5 / 200.0,
            "interior point formula"
        );

        assert!(ToleranceGrid::equally_spaced(0, 0.5).is_err());
        assert!(ToleranceGrid::equally_spaced(10, 1.0).is_err());
        assert!(ToleranceGrid::new(vec![]).is_err());
        assert!(ToleranceGrid::new(vec![0.2, 0.2]).is_err());
        assert!(ToleranceGrid::new(vec![0.2, 0.1]).is_err());
        assert!(ToleranceGrid::new(vec![0.0]).is_err());
        assert!(ToleranceGrid::new(vec![0.1]).is_ok());
    }

    fn entry(t: f64, obj_n: f64, ucb: f64) -> PathEntry {
        PathEntry {
            t,
            policy: FrugalTree::treat_all(),
            obj_n,
            constraint_n: 0.0,
            ucb,
            v_max: 1.0,
        }
    }

    #[test]
    fn high_prob_prefix_scan() {
        // The third ucb violates tau, so t = 0.2 is excluded despite its
        // low ucb: admissibility is a prefix.
        let path = TolerancePath::from_entries(
            0.1,
            100,
            vec![
                entry(0.05, 0.5, 0.02),
                entry(0.10, 0.3, 0.03),
                entry(0.15, 0.9, 0.12),
                entry(0.20, 0.1, 0.04),
            ],
        )
        .unwrap();
        let result = select_high_prob(&path, 0.1);
        assert!(result.feasible);
        assert_eq!(result.t_n, Some(0.10));
        assert_eq!(result.diagnostics.len(), 4);
    }

    #[test]
    fn high_prob_empty_prefix_falls_back() {
        let path = TolerancePath::from_entries(
            0.1,
            100,
            vec![entry(0.05, 0.5, 0.3), entry(0.10, 0.3, 0.01)],
        )
        .unwrap();
        let result = select_high_prob(&path, 0.1);
        assert!(!result.feasible);
        assert_eq!(result.t_n, None);
        assert_eq!(result.policy, FrugalTree::treat_none());
    }

    #[test]
    fn high_prob_tie_breaks_to_smaller_t() {
        let path = TolerancePath::from_entries(
            0.1,
            100,
            vec![entry(0.05, 0.3, 0.01), entry(0.10, 0.3, 0.01)],
        )
        .unwrap();
        let result = select_high_prob(&path, 0.5);
        assert_eq!(result.t_n, Some(0.05));
    }

    #[test]
    fn strictness_of_the_prefix_test() {
        // tau > ucb is strict: equality is a violation.
        let path =
            TolerancePath::from_entries(0.1, 100, vec![entry(0.05, 0.3, 0.1)]).unwrap();
        let result = select_high_prob(&path, 0.1);
        assert!(!result.feasible);
    }

    #[test]
    fn average_selection_formula() {
        // d_l: one treated sample with a loss, weight 2 under p = 0.5, so
        // the conformal quantile of V on d_l is 2 for the treat-all policy.
        let d_l = Dataset::new(
            schema1(),
            vec![Sample {
                x: vec![1.0],
                action: true,
                loss: true,
            }],
            DataSource::Observational,
        )
        .unwrap();
        let path = TolerancePath::from_entries(0.1, 9, vec![entry(0.05, 0.3, 0.0)]).unwrap();
        // (n R_n + Vbar)/(n + 1) = (9*0 + 2)/10 = 0.2.
        let below = select_average(&path, &d_l, &fixed_model(), MiscalibrationConfig::ipw(), 0.19, 0.1)
            .unwrap();
        assert!(!below.feasible);
        let at = select_average(&path, &d_l, &fixed_model(), MiscalibrationConfig::ipw(), 0.2, 0.1)
            .unwrap();
        assert!(at.feasible, "the average criterion is non-strict");
        assert_eq!(at.t_n, Some(0.05));
    }

    #[test]
    fn average_set_need_not_be_prefix() {
        // Entry risks: R_n = 0.5 then 0.0 — with a zero-loss conformal
        // split, admissibility is driven by R_n alone, so only the second
        // entry qualifies: a non-prefix admissible set.
        let d_l = Dataset::new(
            schema1(),
            vec![Sample {
                x: vec![1.0],
                action: true,
                loss: false,
            }],
            DataSource::Observational,
        )
        .unwrap();
        let mut e1 = entry(0.05, 0.9, 0.0);
        e1.constraint_n = 0.5;
        let e2 = entry(0.10, 0.3, 0.0);
        let path = TolerancePath::from_entries(0.1, 9, vec![e1, e2]).unwrap();
        let result = select_average(&path, &d_l, &fixed_model(), MiscalibrationConfig::ipw(), 0.1, 0.1)
            .unwrap();
        assert!(result.feasible);
        assert_eq!(result.t_n, Some(0.10));
    }

    /// Synthetic population where the optimal depth-1 threshold grows with
    /// the tolerance: treated losses scale with x, untreated losses are
    /// flat and high.
    fn rising_risk_data(seed: u64, n: usize) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|_| {
                let x: f64 = rng.gen_range(0.0..100.0);
                let action = rng.gen_bool(0.5);
                let p_loss = if action { x / 100.0 } else { 0.8 };
                Sample {
                    x: vec![x],
                    action,
                    loss: rng.gen_bool(p_loss),
                }
            })
            .collect();
        Dataset::new(schema1(), samples, DataSource::Observational).unwrap()
    }

    #[test]
    fn sweep_thresholds_non_decreasing_in_t() {
        let data = rising_risk_data(5, 2000);
        let grid = ToleranceGrid::new((1..=8).map(|i| i as f64 * 0.05).collect()).unwrap();
        let swept = sweep(&data, &grid, &fixed_model(), MiscalibrationConfig::ipw(), 1, 25)
            .unwrap();
        assert_eq!(swept.len(), 8);
        let mut last = f64::NEG_INFINITY;
        for (t, tree) in &swept {
            assert_eq!(tree.depth(), 1, "expected a split at t = {t}");
            let rule = &tree.rules()[0];
            assert!(rule.exit_on && rule.exit_action);
            let PredicateTest::LessThan(thr) = rule.predicate.test() else {
                panic!("expected a threshold rule");
            };
            // Bin width is 100/26 ~ 3.8; allow a little sampling slack.
            assert!(
                *thr >= last - 10.0,
                "threshold dropped from {last} to {thr} at t = {t}"
            );
            last = last.max(*thr);
        }
        // Re-running the sweep reproduces the same trees exactly.
        let again = sweep(&data, &grid, &fixed_model(), MiscalibrationConfig::ipw(), 1, 25)
            .unwrap();
        for (a, b) in swept.iter().zip(&again) {
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn end_to_end_selection_is_feasible_and_consistent() {
        let data = rising_risk_data(9, 3000);
        let spec = SplitSpec::new(vec![0.5, 0.5], 31).unwrap();
        let parts = data.split(&spec).unwrap();
        let (d_m, d_n) = (&parts[0], &parts[1]);
        let grid = ToleranceGrid::equally_spaced(20, 0.5).unwrap();
        let model = fixed_model();
        let cfg = MiscalibrationConfig::ipw();
        let swept = sweep(d_m, &grid, &model, cfg, 1, 25).unwrap();
        let path = evaluate_path(&swept, d_n, &model, cfg, 0.1).unwrap();
        let result = select_high_prob(&path, 0.3);
        assert!(result.feasible, "tau = 0.3 should admit some tolerance");
        let t_n = result.t_n.unwrap();
        assert!(grid.points().contains(&t_n));
        // The learner's in-sample constraint at the chosen tolerance holds.
        let actions = result.policy.actions(d_m);
        let stats = treatment_risk_stats(d_m, &actions, &model, cfg).unwrap();
        assert!(stats.mean <= t_n + 1e-12);
        // And the certified bound is honored on the certification split.
        let row = result
            .diagnostics
            .iter()
            .find(|r| r.t == t_n)
            .expect("diagnostics row for the chosen t");
        assert!(0.3 > row.ucb);
    }

    #[test]
    fn treat_none_entries_get_zero_ucb() {
        let data = rising_risk_data(13, 200);
        let policies = vec![(0.1, FrugalTree::treat_none())];
        let path =
            evaluate_path(&policies, &data, &fixed_model(), MiscalibrationConfig::ipw(), 0.1)
                .unwrap();
        assert_eq!(path.entries()[0].ucb, 0.0);
        assert_eq!(path.entries()[0].v_max, 0.0);
        assert_eq!(path.entries()[0].constraint_n, 0.0);
        // Any positive tau admits the treat-none entry.
        let result = select_high_prob(&path, 1e-9);
        assert!(result.feasible);
    }

    #[test]
    fn serialization_smoke() {
        let rule = Rule {
            predicate: crate::policy::Predicate::new(
                &schema1(),
                "x1",
                PredicateTest::LessThan(40.7),
            )
            .unwrap(),
            exit_on: true,
            exit_action: true,
        };
        let result = CalibrationResult {
            t_n: Some(0.1),
            policy: FrugalTree::new(vec![rule], false),
            feasible: true,
            diagnostics: vec![DiagnosticRow {
                t: 0.1,
                obj_n: 0.25,
                constraint_n: 0.08,
                ucb: 0.09,
                v_max: 2.5,
            }],
        };
        let json = result.to_json(&schema1()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["t_n"], 0.1);
        assert_eq!(value["feasible"], true);
        assert_eq!(value["policy"]["rules"][0]["op"], "lt");
        assert_eq!(value["diagnostics"][0]["ucb"], 0.09);

        let mut csv_bytes = Vec::new();
        result.write_diagnostics_csv(&mut csv_bytes).unwrap();
        let text = String::from_utf8(csv_bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,obj_n,constraint_n,ucb,v_max"));
        assert_eq!(lines.next(), Some("0.1,0.25,0.08,0.09,2.5"));
    }

    #[test]
    fn path_validation() {
        assert!(TolerancePath::from_entries(0.1, 100, vec![]).is_err());
        assert!(TolerancePath::from_entries(
            0.1,
            100,
            vec![entry(0.2, 0.1, 0.0), entry(0.1, 0.1, 0.0)]
        )
        .is_err());
        assert!(TolerancePath::from_entries(1.5, 100, vec![entry(0.1, 0.1, 0.0)]).is_err());
        assert!(TolerancePath::from_entries(0.1, 0, vec![entry(0.1, 0.1, 0.0)]).is_err());
    }
}
