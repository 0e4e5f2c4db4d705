//! Fast-and-frugal tree policies and the constrained greedy learner.
//!
//! A policy is an ordered list of single-variable rules plus a default
//! action. Each rule tests one predicate (`x_j < threshold` for continuous
//! features, set membership for categorical ones); one side of the test
//! exits immediately with a fixed action, the other falls through to the
//! next rule. The first matching exit wins; samples that fall through every
//! rule get the default action.
//!
//! The learner greedily grows such a tree to minimize the weighted
//! population-risk estimate `mean(L * W)` on the training split, subject to
//! the weighted treatment-risk estimate staying at or below a nominal
//! tolerance `t`. Every candidate split — (feature, threshold or category,
//! exit side, exit action) — is scored, infeasible candidates are
//! discarded, and the best feasible strict improvement is grown. Each
//! prefix of the grown tree is stored, and the final answer is the stored
//! tree with the smallest objective (ties to the shallower tree). When
//! nothing feasible improves on day one, the treat-none tree (empty rules,
//! default 0) is the fallback: it treats no one, so its treatment risk is
//! identically zero.
//!
//! Determinism is guaranteed by a fixed tie-breaking order: earlier feature
//! in schema order first, then smaller threshold (or category index), then
//! exit-on-true before exit-on-false, then exit action 0 before 1; the
//! exhaustive oracle additionally prefers fewer rules and default action 0.
//!
//! [`exhaustive_learn`] enumerates the entire tree space (both default
//! actions, every rule sequence up to the depth cap) and is intended as a
//! test oracle: at depth 1 the greedy learner's first scan is exhaustive,
//! so the two agree on the objective value.
//!
//! Scoring uses a per-sample decomposition: with `a_i = L_i * W_i(pi=1)`
//! and `b_i = L_i * W_i(pi=0)` precomputed once, any assignment has
//! objective `(sum_a(treated) + sum_b(untreated)) / n` and constraint
//! `sum_a(treated) / #treated`, so a full threshold scan per greedy step
//! costs one sorted pass over the surviving samples.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CovariateKind, CovariateSchema, DataError, Dataset};
use crate::weights::{
    population_risk_estimate, treatment_risk_stats, MiscalibrationConfig, NominalModel,
    WeightsError,
};

/// Errors from policy construction, serialization, and learning.
#[derive(Debug, Error)]
pub enum PolicyError {
    /// The predicate references a feature the schema does not declare.
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
    /// Threshold tests need continuous features; set tests need categorical.
    #[error("test does not match the declared kind of feature {feature}")]
    TestMismatch { feature: String },
    /// Category sets must be nonempty proper subsets of the declared codes.
    #[error("category set for feature {feature} must be a nonempty proper subset of its declared categories")]
    BadCategorySet { feature: String },
    /// A serialized category code is not declared in the schema.
    #[error("unknown category code {code:?} for feature {feature}")]
    UnknownCategory { feature: String, code: String },
    /// The covariate vector is too short for the tree's predicates.
    #[error("covariate vector has {actual} entries but the tree reads index {column}")]
    Arity { column: usize, actual: usize },
    /// A configuration field is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Learning needs a nonempty training split.
    #[error("empty training dataset")]
    EmptyTrain,
    /// The exhaustive oracle refuses candidate spaces past its cap.
    #[error("candidate space of {required} trees exceeds the cap of {cap}")]
    Capacity { required: u128, cap: u64 },
    /// Malformed policy JSON.
    #[error("policy serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// The test a rule applies to one covariate.
#[derive(Debug, Clone, PartialEq)]
pub enum PredicateTest {
    /// `x[column] < threshold` (continuous features).
    LessThan(f64),
    /// `x[column]` is one of the listed category indices (categorical
    /// features).
    InSet(BTreeSet<usize>),
}

/// A single-variable test bound to a schema feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    feature: String,
    column: usize,
    test: PredicateTest,
}

impl Predicate {
    /// Validates the test against the schema: the feature must exist, the
    /// test kind must match the declared kind, thresholds must be finite,
    /// and category sets must be nonempty proper subsets of the declared
    /// codes.
    pub fn new(
        schema: &CovariateSchema,
        feature: &str,
        test: PredicateTest,
    ) -> Result<Self, PolicyError> {
        let column = schema
            .index_of(feature)
            .ok_or_else(|| PolicyError::UnknownFeature(feature.to_string()))?;
        match (&test, schema.kind(column)) {
            (PredicateTest::LessThan(t), CovariateKind::Continuous) => {
                if !t.is_finite() {
                    return Err(PolicyError::InvalidConfig(format!(
                        "threshold {t} for feature {feature} must be finite"
                    )));
                }
            }
            (PredicateTest::InSet(set), CovariateKind::Categorical(codes)) => {
                if set.is_empty() || set.len() >= codes.len() {
                    return Err(PolicyError::BadCategorySet {
                        feature: feature.to_string(),
                    });
                }
                if let Some(&bad) = set.iter().find(|&&c| c >= codes.len()) {
                    return Err(PolicyError::UnknownCategory {
                        feature: feature.to_string(),
                        code: format!("#{bad}"),
                    });
                }
            }
            _ => {
                return Err(PolicyError::TestMismatch {
                    feature: feature.to_string(),
                })
            }
        }
        Ok(Predicate {
            feature: feature.to_string(),
            column,
            test,
        })
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn column(&self) -> usize {
        self.column
    }

    pub fn test(&self) -> &PredicateTest {
        &self.test
    }

    /// Evaluates the test at `x`. The vector must conform to the schema the
    /// predicate was built against.
    pub fn evaluate(&self, x: &[f64]) -> bool {
        match &self.test {
            PredicateTest::LessThan(t) => x[self.column] < *t,
            PredicateTest::InSet(set) => set.contains(&(x[self.column] as usize)),
        }
    }
}

/// One level of a fast-and-frugal tree: when the predicate evaluates to
/// `exit_on`, the walk stops with `exit_action`; otherwise it continues.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub predicate: Predicate,
    pub exit_on: bool,
    pub exit_action: bool,
}

/// An ordered rule list with a default action — the whole policy.
#[derive(Debug, Clone, PartialEq)]
pub struct FrugalTree {
    rules: Vec<Rule>,
    default_action: bool,
}

impl FrugalTree {
    pub fn new(rules: Vec<Rule>, default_action: bool) -> Self {
        FrugalTree {
            rules,
            default_action,
        }
    }

    /// The empty tree that never treats; its treatment risk is identically
    /// zero under any distribution.
    pub fn treat_none() -> Self {
        FrugalTree::new(Vec::new(), false)
    }

    /// The empty tree that always treats.
    pub fn treat_all() -> Self {
        FrugalTree::new(Vec::new(), true)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn default_action(&self) -> bool {
        self.default_action
    }

    /// Number of rules.
    pub fn depth(&self) -> usize {
        self.rules.len()
    }

    /// Walks the rules in order; the first rule whose predicate evaluates
    /// to its `exit_on` side returns its `exit_action`, otherwise the
    /// default action. `x` must conform to the schema (see [`Self::try_apply`]
    /// for a checked variant).
    pub fn apply(&self, x: &[f64]) -> bool {
        for rule in &self.rules {
            if rule.predicate.evaluate(x) == rule.exit_on {
                return rule.exit_action;
            }
        }
        self.default_action
    }

    /// [`Self::apply`] with an arity check instead of a panic on short input.
    pub fn try_apply(&self, x: &[f64]) -> Result<bool, PolicyError> {
        for rule in &self.rules {
            if rule.predicate.column() >= x.len() {
                return Err(PolicyError::Arity {
                    column: rule.predicate.column(),
                    actual: x.len(),
                });
            }
        }
        Ok(self.apply(x))
    }

    /// The policy's action for every sample in the dataset.
    pub fn actions(&self, data: &Dataset) -> Vec<bool> {
        data.samples().iter().map(|s| self.apply(&s.x)).collect()
    }

    /// Serializes to JSON with schema-resolved names and category codes.
    /// The round trip through [`Self::from_json`] is bit-exact, including
    /// thresholds.
    pub fn to_json(&self, schema: &CovariateSchema) -> Result<String, PolicyError> {
        let rules = self
            .rules
            .iter()
            .map(|r| {
                let feature = r.predicate.feature().to_string();
                let column = schema
                    .index_of(&feature)
                    .ok_or_else(|| PolicyError::UnknownFeature(feature.clone()))?;
                let (op, value) = match (r.predicate.test(), schema.kind(column)) {
                    (PredicateTest::LessThan(t), CovariateKind::Continuous) => {
                        ("lt".to_string(), ValueRepr::Threshold(*t))
                    }
                    (PredicateTest::InSet(set), CovariateKind::Categorical(codes)) => (
                        "in".to_string(),
                        ValueRepr::Categories(
                            set.iter().map(|&c| codes[c].clone()).collect(),
                        ),
                    ),
                    _ => return Err(PolicyError::TestMismatch { feature }),
                };
                Ok(RuleRepr {
                    feature,
                    op,
                    value,
                    exit_on: r.exit_on,
                    exit_action: r.exit_action as u8,
                })
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;
        let repr = TreeRepr {
            rules,
            default_action: self.default_action as u8,
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    /// Parses and validates a policy document against the schema.
    pub fn from_json(text: &str, schema: &CovariateSchema) -> Result<Self, PolicyError> {
        let repr: TreeRepr = serde_json::from_str(text)?;
        let default_action = action_from_u8(repr.default_action)?;
        let rules = repr
            .rules
            .into_iter()
            .map(|r| {
                let test = match (r.op.as_str(), r.value) {
                    ("lt", ValueRepr::Threshold(t)) => PredicateTest::LessThan(t),
                    ("in", ValueRepr::Categories(codes)) => {
                        let column = schema
                            .index_of(&r.feature)
                            .ok_or_else(|| PolicyError::UnknownFeature(r.feature.clone()))?;
                        let mut set = BTreeSet::new();
                        for code in codes {
                            let idx = schema.category_index(column, &code).ok_or_else(|| {
                                PolicyError::UnknownCategory {
                                    feature: r.feature.clone(),
                                    code: code.clone(),
                                }
                            })?;
                            set.insert(idx);
                        }
                        PredicateTest::InSet(set)
                    }
                    (op, _) => {
                        return Err(PolicyError::InvalidConfig(format!(
                            "op {op:?} does not match its value for feature {}",
                            r.feature
                        )))
                    }
                };
                Ok(Rule {
                    predicate: Predicate::new(schema, &r.feature, test)?,
                    exit_on: r.exit_on,
                    exit_action: action_from_u8(r.exit_action)?,
                })
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;
        Ok(FrugalTree::new(rules, default_action))
    }
}

fn action_from_u8(v: u8) -> Result<bool, PolicyError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(PolicyError::InvalidConfig(format!(
            "action must be 0 or 1, got {other}"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    rules: Vec<RuleRepr>,
    default_action: u8,
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    feature: String,
    op: String,
    value: ValueRepr,
    exit_on: bool,
    exit_action: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Threshold(f64),
    Categories(Vec<String>),
}

/// Everything the learners need besides the training data.
#[derive(Debug, Clone)]
pub struct LearnConfig {
    model: NominalModel,
    cfg: MiscalibrationConfig,
    t: f64,
    max_depth: usize,
    bins: usize,
}

impl LearnConfig {
    /// Requires `t` in `(0, 1)`, `max_depth >= 1`, and `bins >= 1`.
    pub fn new(
        model: NominalModel,
        cfg: MiscalibrationConfig,
        t: f64,
        max_depth: usize,
        bins: usize,
    ) -> Result<Self, PolicyError> {
        if !(t > 0.0 && t < 1.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "tolerance t = {t} outside (0, 1)"
            )));
        }
        if max_depth < 1 {
            return Err(PolicyError::InvalidConfig(
                "max_depth must be >= 1".to_string(),
            ));
        }
        if bins < 1 {
            return Err(PolicyError::InvalidConfig("bins must be >= 1".to_string()));
        }
        Ok(LearnConfig {
            model,
            cfg,
            t,
            max_depth,
            bins,
        })
    }

    /// Same learner settings at a different tolerance.
    pub fn with_tolerance(&self, t: f64) -> Result<Self, PolicyError> {
        LearnConfig::new(self.model.clone(), self.cfg, t, self.max_depth, self.bins)
    }

    pub fn model(&self) -> &NominalModel {
        &self.model
    }

    pub fn cfg(&self) -> MiscalibrationConfig {
        self.cfg
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn bins(&self) -> usize {
        self.bins
    }
}

/// Greedy constrained learner. See the module docs for the growth rule and
/// tie-breaking order.
pub fn learn_constrained(train: &Dataset, config: &LearnConfig) -> Result<FrugalTree, PolicyError> {
    let scorer = PolicyScorer::new(train, &config.model, config.cfg, config.bins)?;
    Ok(scorer.learn(config.t, config.max_depth))
}

/// Precomputed per-sample scores for one training split, reusable across
/// tolerances: the tolerance sweep builds this once and calls
/// [`PolicyScorer::learn`] per grid point.
pub struct PolicyScorer {
    schema: Arc<CovariateSchema>,
    n: usize,
    /// `a[i] = L_i * W_i(pi = 1)` — the sample's objective contribution
    /// when the policy treats it (nonzero only for treated samples with a
    /// loss).
    a: Vec<f64>,
    /// `b[i] = L_i * W_i(pi = 0)` — contribution when the policy does not
    /// treat it.
    b: Vec<f64>,
    /// Column-major covariates for cache-friendly scans.
    cols: Vec<Vec<f64>>,
    features: Vec<FeatureCandidates>,
}

enum FeatureCandidates {
    Continuous {
        /// Ascending split thresholds from the equal-width discretization
        /// of the training data (empty for constant features).
        thresholds: Vec<f64>,
        /// Sample indices in ascending covariate order (ties by index).
        order: Vec<u32>,
    },
    Categorical {
        n_codes: usize,
    },
}

#[derive(Clone, Copy)]
enum CandTest {
    Lt(f64),
    Cat(usize),
}

struct BestCand {
    obj: f64,
    feature: usize,
    test: CandTest,
    exit_on: bool,
    exit_action: bool,
}

/// Shared per-step context for candidate evaluation.
struct StepCtx {
    n: f64,
    alive_a: f64,
    alive_b: f64,
    alive_count: usize,
    exited_a: f64,
    exited_b: f64,
    exited_treat: usize,
    default_action: bool,
    t: f64,
    current_obj: f64,
}

impl PolicyScorer {
    pub fn new(
        train: &Dataset,
        model: &NominalModel,
        cfg: MiscalibrationConfig,
        bins: usize,
    ) -> Result<Self, PolicyError> {
        if train.is_empty() {
            return Err(PolicyError::EmptyTrain);
        }
        if bins < 1 {
            return Err(PolicyError::InvalidConfig("bins must be >= 1".to_string()));
        }
        let n = train.len();
        let schema = train.schema_arc();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for s in train.samples() {
            let l = s.loss01();
            a.push(l * model.weight(s, true, cfg));
            b.push(l * model.weight(s, false, cfg));
        }
        let cols: Vec<Vec<f64>> = (0..schema.len())
            .map(|j| train.samples().iter().map(|s| s.x[j]).collect())
            .collect();
        let features = (0..schema.len())
            .map(|j| match schema.kind(j) {
                CovariateKind::Continuous => {
                    let thresholds = train.discretize(schema.name(j), bins)?;
                    let col = &cols[j];
                    let mut order: Vec<u32> = (0..n as u32).collect();
                    order.sort_by(|&p, &q| {
                        col[p as usize]
                            .total_cmp(&col[q as usize])
                            .then(p.cmp(&q))
                    });
                    Ok(FeatureCandidates::Continuous { thresholds, order })
                }
                CovariateKind::Categorical(codes) => Ok(FeatureCandidates::Categorical {
                    n_codes: codes.len(),
                }),
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;
        Ok(PolicyScorer {
            schema,
            n,
            a,
            b,
            cols,
            features,
        })
    }

    /// Learns a tree at tolerance `t` (in `(0, 1)`) with at most
    /// `max_depth` rules.
    pub fn learn(&self, t: f64, max_depth: usize) -> FrugalTree {
        self.learn_traced(t, max_depth).0
    }

    /// [`Self::learn`] plus the stored prefix trees with their (objective,
    /// constraint) values, in growth order.
    fn learn_traced(&self, t: f64, max_depth: usize) -> (FrugalTree, Vec<(FrugalTree, f64, f64)>) {
        debug_assert!(t > 0.0 && t < 1.0, "tolerance t = {t} outside (0, 1)");
        let n = self.n;
        let nf = n as f64;
        let total_a: f64 = self.a.iter().sum();
        let total_b: f64 = self.b.iter().sum();

        // Default action for the empty tree: the cheaper of treat-none and
        // treat-all, admitting treat-all only if feasible; ties go to 0.
        let obj_none = total_b / nf;
        let obj_all = total_a / nf;
        let all_feasible = total_a / nf <= t; // constraint of treat-all
        let default_action = all_feasible && obj_all < obj_none;

        let mut alive = vec![true; n];
        let mut alive_count = n;
        let mut exited_a = 0.0_f64;
        let mut exited_b = 0.0_f64;
        let mut exited_treat = 0_usize;
        let mut rules: Vec<Rule> = Vec::new();

        let state_values = |alive: &[bool], exited_a: f64, exited_b: f64, exited_treat: usize, alive_count: usize| {
            let mut alive_a = 0.0;
            let mut alive_b = 0.0;
            for i in 0..n {
                if alive[i] {
                    alive_a += self.a[i];
                    alive_b += self.b[i];
                }
            }
            let s_a = exited_a + if default_action { alive_a } else { 0.0 };
            let s_b = exited_b + if default_action { 0.0 } else { alive_b };
            let n_treat = exited_treat + if default_action { alive_count } else { 0 };
            let obj = (s_a + s_b) / nf;
            let constraint = if n_treat > 0 { s_a / n_treat as f64 } else { 0.0 };
            (alive_a, alive_b, obj, constraint)
        };

        let (_, _, obj0, c0) = state_values(&alive, exited_a, exited_b, exited_treat, alive_count);
        let mut current_obj = obj0;
        let mut stored = vec![(FrugalTree::new(Vec::new(), default_action), obj0, c0)];

        while rules.len() < max_depth {
            let (alive_a, alive_b, _, _) =
                state_values(&alive, exited_a, exited_b, exited_treat, alive_count);
            let ctx = StepCtx {
                n: nf,
                alive_a,
                alive_b,
                alive_count,
                exited_a,
                exited_b,
                exited_treat,
                default_action,
                t,
                current_obj,
            };
            let mut best: Option<BestCand> = None;

            for (j, feat) in self.features.iter().enumerate() {
                match feat {
                    FeatureCandidates::Continuous { thresholds, order } => {
                        let col = &self.cols[j];
                        let mut pos = 0usize;
                        let (mut cum_a, mut cum_b, mut cum_cnt) = (0.0_f64, 0.0_f64, 0usize);
                        for &thr in thresholds {
                            while pos < order.len() {
                                let i = order[pos] as usize;
                                if col[i] < thr {
                                    if alive[i] {
                                        cum_a += self.a[i];
                                        cum_b += self.b[i];
                                        cum_cnt += 1;
                                    }
                                    pos += 1;
                                } else {
                                    break;
                                }
                            }
                            consider(
                                &ctx,
                                j,
                                CandTest::Lt(thr),
                                cum_a,
                                cum_b,
                                cum_cnt,
                                &mut best,
                            );
                        }
                    }
                    FeatureCandidates::Categorical { n_codes } => {
                        let col = &self.cols[j];
                        let mut cat_a = vec![0.0_f64; *n_codes];
                        let mut cat_b = vec![0.0_f64; *n_codes];
                        let mut cat_cnt = vec![0usize; *n_codes];
                        for i in 0..n {
                            if alive[i] {
                                let c = col[i] as usize;
                                cat_a[c] += self.a[i];
                                cat_b[c] += self.b[i];
                                cat_cnt[c] += 1;
                            }
                        }
                        for c in 0..*n_codes {
                            consider(
                                &ctx,
                                j,
                                CandTest::Cat(c),
                                cat_a[c],
                                cat_b[c],
                                cat_cnt[c],
                                &mut best,
                            );
                        }
                    }
                }
            }

            let Some(bc) = best else { break };
            let predicate = self.make_predicate(bc.feature, bc.test);
            let col = &self.cols[bc.feature];
            for i in 0..n {
                if !alive[i] {
                    continue;
                }
                let fires = match bc.test {
                    CandTest::Lt(thr) => col[i] < thr,
                    CandTest::Cat(c) => col[i] as usize == c,
                };
                if fires == bc.exit_on {
                    alive[i] = false;
                    alive_count -= 1;
                    if bc.exit_action {
                        exited_a += self.a[i];
                        exited_treat += 1;
                    } else {
                        exited_b += self.b[i];
                    }
                }
            }
            rules.push(Rule {
                predicate,
                exit_on: bc.exit_on,
                exit_action: bc.exit_action,
            });
            let (_, _, obj_k, c_k) =
                state_values(&alive, exited_a, exited_b, exited_treat, alive_count);
            current_obj = obj_k;
            stored.push((FrugalTree::new(rules.clone(), default_action), obj_k, c_k));
        }

        // Smallest objective wins; scanning in growth order breaks ties
        // toward the shallower tree.
        let mut best_idx = 0;
        for (idx, entry) in stored.iter().enumerate().skip(1) {
            if entry.1 < stored[best_idx].1 {
                best_idx = idx;
            }
        }
        (stored[best_idx].0.clone(), stored)
    }

    fn make_predicate(&self, feature: usize, test: CandTest) -> Predicate {
        let name = self.schema.name(feature).to_string();
        let test = match test {
            CandTest::Lt(thr) => PredicateTest::LessThan(thr),
            CandTest::Cat(c) => {
                let mut set = BTreeSet::new();
                set.insert(c);
                PredicateTest::InSet(set)
            }
        };
        Predicate {
            feature: name,
            column: feature,
            test,
        }
    }
}

/// Scores the four (exit side, exit action) variants of one predicate whose
/// true-side sums over surviving samples are `(pred_a, pred_b, pred_cnt)`,
/// in tie-break order, keeping the strictly best feasible improvement.
fn consider(
    ctx: &StepCtx,
    feature: usize,
    test: CandTest,
    pred_a: f64,
    pred_b: f64,
    pred_cnt: usize,
    best: &mut Option<BestCand>,
) {
    for exit_on in [true, false] {
        let (e_a, e_b, e_cnt) = if exit_on {
            (pred_a, pred_b, pred_cnt)
        } else {
            (
                (ctx.alive_a - pred_a).max(0.0),
                (ctx.alive_b - pred_b).max(0.0),
                ctx.alive_count - pred_cnt,
            )
        };
        if e_cnt == 0 {
            // A rule that exits no training sample cannot improve the
            // empirical objective.
            continue;
        }
        let (f_a, f_b, f_cnt) = (
            (ctx.alive_a - e_a).max(0.0),
            (ctx.alive_b - e_b).max(0.0),
            ctx.alive_count - e_cnt,
        );
        for exit_action in [false, true] {
            let mut s_a = ctx.exited_a;
            let mut s_b = ctx.exited_b;
            let mut n_treat = ctx.exited_treat;
            if exit_action {
                s_a += e_a;
                n_treat += e_cnt;
            } else {
                s_b += e_b;
            }
            if ctx.default_action {
                s_a += f_a;
                n_treat += f_cnt;
            } else {
                s_b += f_b;
            }
            let obj = (s_a + s_b) / ctx.n;
            let constraint = if n_treat > 0 {
                s_a / n_treat as f64
            } else {
                0.0
            };
            if constraint > ctx.t || obj >= ctx.current_obj {
                continue;
            }
            if best.as_ref().map_or(true, |b| obj < b.obj) {
                *best = Some(BestCand {
                    obj,
                    feature,
                    test,
                    exit_on,
                    exit_action,
                });
            }
        }
    }
}

/// Number of trees the exhaustive oracle would enumerate: both default
/// actions times every rule sequence of length `0..=max_depth` over the
/// discretized predicate space.
pub fn exhaustive_candidate_count(
    train: &Dataset,
    config: &LearnConfig,
) -> Result<u128, PolicyError> {
    let preds = build_predicates(train, config.bins())?;
    Ok(count_trees(preds.len(), config.max_depth()))
}

fn count_trees(n_predicates: usize, max_depth: usize) -> u128 {
    let per_rule = n_predicates as u128 * 4; // exit_on x exit_action
    let mut total: u128 = 0;
    let mut pow: u128 = 1;
    for _ in 0..=max_depth {
        total = total.saturating_add(pow);
        pow = pow.saturating_mul(per_rule);
    }
    total.saturating_mul(2)
}

fn build_predicates(train: &Dataset, bins: usize) -> Result<Vec<Predicate>, PolicyError> {
    if train.is_empty() {
        return Err(PolicyError::EmptyTrain);
    }
    let schema = train.schema();
    let mut preds = Vec::new();
    for j in 0..schema.len() {
        match schema.kind(j) {
            CovariateKind::Continuous => {
                for thr in train.discretize(schema.name(j), bins)? {
                    preds.push(Predicate::new(
                        schema,
                        schema.name(j),
                        PredicateTest::LessThan(thr),
                    )?);
                }
            }
            CovariateKind::Categorical(codes) => {
                for c in 0..codes.len() {
                    preds.push(Predicate::new(
                        schema,
                        schema.name(j),
                        PredicateTest::InSet(BTreeSet::from([c])),
                    )?);
                }
            }
        }
    }
    Ok(preds)
}

/// Brute-force learner over the full tree space, for use as a test oracle.
/// Scores every tree with the plain estimators and returns the feasible
/// tree with the minimum objective; the enumeration order realizes the
/// tie-break (fewer rules, earlier feature, smaller threshold or category,
/// exit-on-true first, exit action 0 first, default action 0 first).
/// Refuses candidate spaces larger than 10^6 trees.
pub fn exhaustive_learn(train: &Dataset, config: &LearnConfig) -> Result<FrugalTree, PolicyError> {
    const CAP: u64 = 1_000_000;
    let preds = build_predicates(train, config.bins())?;
    let required = count_trees(preds.len(), config.max_depth());
    if required > CAP as u128 {
        return Err(PolicyError::Capacity { required, cap: CAP });
    }
    let mut rule_opts: Vec<Rule> = Vec::new();
    for p in &preds {
        for exit_on in [true, false] {
            for exit_action in [false, true] {
                rule_opts.push(Rule {
                    predicate: p.clone(),
                    exit_on,
                    exit_action,
                });
            }
        }
    }

    let mut best: Option<(f64, FrugalTree)> = None;
    for depth in 0..=config.max_depth() {
        if depth > 0 && rule_opts.is_empty() {
            break;
        }
        let mut idx = vec![0usize; depth];
        'sequences: loop {
            for default_action in [false, true] {
                let rules: Vec<Rule> = idx.iter().map(|&k| rule_opts[k].clone()).collect();
                let tree = FrugalTree::new(rules, default_action);
                let actions = tree.actions(train);
                let stats = treatment_risk_stats(train, &actions, config.model(), config.cfg())?;
                if stats.mean <= config.t() {
                    let obj =
                        population_risk_estimate(train, &actions, config.model(), config.cfg())?;
                    if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                        best = Some((obj, tree));
                    }
                }
            }
            // Advance the rightmost-fastest odometer: lexicographic order.
            let mut pos = depth;
            loop {
                if pos == 0 {
                    break 'sequences;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < rule_opts.len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
    // The treat-none tree is always enumerated and always feasible.
    Ok(best.expect("treat-none tree is always feasible").1)
}
