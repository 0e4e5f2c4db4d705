//! Datasets of logged treatment decisions.
//!
//! A sample is `(x, a, l)`: a covariate vector `x` conforming to a
//! [`CovariateSchema`], a binary action `a` (1 = treated), and a binary loss
//! `l` (1 = adverse outcome). Datasets are tagged with their origin
//! ([`DataSource::Observational`] or [`DataSource::Trial`]) because the two
//! regimes use different importance weights downstream.
//!
//! Covariate values are stored as `f64` throughout: continuous features hold
//! their measurement, categorical features hold the index of the observed
//! category within the schema's declared code list. Ingestion validates both,
//! so downstream code can index categories without re-checking.
//!
//! Splitting is uniform (unstratified) and seed-deterministic: part sizes are
//! the floored fraction targets with the remainder assigned to earlier parts,
//! and the permutation comes from `ChaCha8Rng::seed_from_u64(seed)`.

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors raised while building, loading, or partitioning datasets.
#[derive(Debug, Error)]
pub enum DataError {
    /// The schema itself is malformed (duplicate names, empty category lists, ...).
    #[error("schema error: {0}")]
    Schema(String),
    /// A column required by the schema (or the action/loss column) is absent.
    #[error("column '{0}' not found in CSV header")]
    MissingColumn(String),
    /// A single row failed to parse; `row` counts data rows from 1.
    #[error("row {row}, column '{column}': {message}")]
    Row {
        row: usize,
        column: String,
        message: String,
    },
    /// A split specification is unusable.
    #[error("invalid split: {0}")]
    Split(String),
    /// A feature name is not part of the schema.
    #[error("feature '{0}' not in schema")]
    UnknownFeature(String),
    /// A feature has the wrong kind for the requested operation.
    #[error("feature '{feature}' is {actual}, expected {expected}")]
    KindMismatch {
        feature: String,
        expected: &'static str,
        actual: &'static str,
    },
    /// A scalar argument is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The operation needs at least one sample.
    #[error("dataset is empty")]
    Empty,
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Kind of a covariate: real-valued, or one of a fixed set of codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CovariateKind {
    Continuous,
    /// Declared category codes; stored sample values index into this list.
    Categorical(Vec<String>),
}

/// Ordered list of named, typed covariates. The order defines the layout of
/// every sample's `x` vector and the canonical feature order used for
/// tie-breaking in the policy learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateSchema {
    entries: Vec<(String, CovariateKind)>,
}

impl CovariateSchema {
    /// Validates and builds a schema. Names must be unique and non-empty;
    /// categorical features need at least two distinct, non-empty codes.
    /// Names and codes may not contain whitespace, commas, '=' or '(' / ')'
    /// so that the sidecar text format and CSV headers stay unambiguous.
    pub fn new(entries: Vec<(String, CovariateKind)>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for (name, kind) in &entries {
            validate_token(name, "feature name")?;
            if !seen.insert(name.clone()) {
                return Err(DataError::Schema(format!("duplicate feature name '{name}'")));
            }
            if let CovariateKind::Categorical(codes) = kind {
                if codes.len() < 2 {
                    return Err(DataError::Schema(format!(
                        "categorical feature '{name}' needs at least two categories"
                    )));
                }
                let mut code_seen = HashSet::new();
                for code in codes {
                    validate_token(code, "category code")?;
                    if !code_seen.insert(code.clone()) {
                        return Err(DataError::Schema(format!(
                            "duplicate category '{code}' in feature '{name}'"
                        )));
                    }
                }
            }
        }
        Ok(CovariateSchema { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, CovariateKind)] {
        &self.entries
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn kind(&self, index: usize) -> &CovariateKind {
        &self.entries[index].1
    }

    /// Column index of a feature name, if present.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    /// Index of `code` within a categorical feature's declared codes.
    pub fn category_index(&self, column: usize, code: &str) -> Option<usize> {
        match self.kind(column) {
            CovariateKind::Categorical(codes) => codes.iter().position(|c| c == code),
            CovariateKind::Continuous => None,
        }
    }

    /// Parses the sidecar text format: one `name = kind` entry per line where
    /// kind is `continuous` or `categorical(code, code, ...)`. Blank lines and
    /// `#` comments are ignored; entry order defines column order.
    pub fn parse_text(text: &str) -> Result<Self, DataError> {
        let mut entries = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, kind_text) = line
                .split_once('=')
                .ok_or_else(|| DataError::Schema(format!("expected 'name = kind', got '{line}'")))?;
            let kind_text = kind_text.trim();
            let kind = if kind_text == "continuous" {
                CovariateKind::Continuous
            } else if let Some(inner) = kind_text
                .strip_prefix("categorical(")
                .and_then(|s| s.strip_suffix(')'))
            {
                CovariateKind::Categorical(
                    inner.split(',').map(|c| c.trim().to_string()).collect(),
                )
            } else {
                return Err(DataError::Schema(format!(
                    "unknown kind '{kind_text}' (expected 'continuous' or 'categorical(...)')"
                )));
            };
            entries.push((name.trim().to_string(), kind));
        }
        CovariateSchema::new(entries)
    }

    /// Inverse of [`CovariateSchema::parse_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, kind) in &self.entries {
            match kind {
                CovariateKind::Continuous => out.push_str(&format!("{name} = continuous\n")),
                CovariateKind::Categorical(codes) => {
                    out.push_str(&format!("{name} = categorical({})\n", codes.join(", ")))
                }
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

fn validate_token(token: &str, what: &str) -> Result<(), DataError> {
    if token.is_empty() {
        return Err(DataError::Schema(format!("{what} may not be empty")));
    }
    if token.chars().any(|c| c.is_whitespace() || "=,()".contains(c)) {
        return Err(DataError::Schema(format!(
            "{what} '{token}' contains whitespace or one of '=,()'"
        )));
    }
    Ok(())
}

/// One logged decision: covariates, the action taken, the observed loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// One value per schema entry; categorical entries hold the category index.
    pub x: Vec<f64>,
    /// Action taken (true = treated, i.e. a = 1).
    pub action: bool,
    /// Observed loss (true = adverse outcome, i.e. l = 1).
    pub loss: bool,
}

impl Sample {
    /// Loss as a 0/1 real, the form used by every estimator.
    #[inline]
    pub fn loss01(&self) -> f64 {
        self.loss as u8 as f64
    }
}

/// Where the data came from; selects the importance-weight formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DataSource {
    /// Logged routine care with a modeled assignment probability.
    Observational,
    /// A randomized trial with known assignment but selective enrollment.
    Trial,
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Observational => write!(f, "observational"),
            DataSource::Trial => write!(f, "trial"),
        }
    }
}

/// An immutable collection of samples sharing one schema and one source tag.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<CovariateSchema>,
    samples: Vec<Sample>,
    source: DataSource,
}

impl Dataset {
    /// Validates every sample against the schema: correct arity, finite
    /// continuous values, in-range category indices.
    pub fn new(
        schema: impl Into<Arc<CovariateSchema>>,
        samples: Vec<Sample>,
        source: DataSource,
    ) -> Result<Self, DataError> {
        let schema = schema.into();
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != schema.len() {
                return Err(DataError::Schema(format!(
                    "sample {} has {} covariates, schema has {}",
                    i + 1,
                    s.x.len(),
                    schema.len()
                )));
            }
            for (j, &v) in s.x.iter().enumerate() {
                match schema.kind(j) {
                    CovariateKind::Continuous => {
                        if !v.is_finite() {
                            return Err(DataError::Row {
                                row: i + 1,
                                column: schema.name(j).to_string(),
                                message: format!("non-finite value {v}"),
                            });
                        }
                    }
                    CovariateKind::Categorical(codes) => {
                        if v.fract() != 0.0 || v < 0.0 || (v as usize) >= codes.len() {
                            return Err(DataError::Row {
                                row: i + 1,
                                column: schema.name(j).to_string(),
                                message: format!(
                                    "category index {v} out of range 0..{}",
                                    codes.len()
                                ),
                            });
                        }
                    }
                }
            }
        }
        Ok(Dataset {
            schema,
            samples,
            source,
        })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<CovariateSchema> {
        Arc::clone(&self.schema)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Loads a comma-separated, UTF-8, headered file. Columns are matched to
    /// the schema by name (extra columns are ignored); `action_col` and
    /// `loss_col` must hold literal `0`/`1`. Missing values, unknown category
    /// codes, and non-finite numbers are rejected with the offending row and
    /// column named.
    pub fn load_csv(
        path: impl AsRef<Path>,
        schema: impl Into<Arc<CovariateSchema>>,
        action_col: &str,
        loss_col: &str,
        source: DataSource,
    ) -> Result<Self, DataError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, schema, action_col, loss_col, source)
    }

    /// [`Dataset::load_csv`] over any reader.
    pub fn from_csv_reader(
        reader: impl io::Read,
        schema: impl Into<Arc<CovariateSchema>>,
        action_col: &str,
        loss_col: &str,
        source: DataSource,
    ) -> Result<Self, DataError> {
        let schema = schema.into();
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = csv_reader.headers()?.clone();
        let position = |name: &str| -> Result<usize, DataError> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };
        let feature_pos: Vec<usize> = schema
            .entries()
            .iter()
            .map(|(name, _)| position(name))
            .collect::<Result<_, _>>()?;
        let action_pos = position(action_col)?;
        let loss_pos = position(loss_col)?;

        let parse_binary = |row: usize, column: &str, raw: &str| -> Result<bool, DataError> {
            match raw.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(DataError::Row {
                    row,
                    column: column.to_string(),
                    message: format!("expected 0 or 1, got '{other}'"),
                }),
            }
        };

        let mut samples = Vec::new();
        for (i, record) in csv_reader.records().enumerate() {
            let row = i + 1;
            let record = record?;
            let field = |pos: usize, column: &str| -> Result<String, DataError> {
                let raw = record.get(pos).map(str::trim).unwrap_or("");
                if raw.is_empty() {
                    return Err(DataError::Row {
                        row,
                        column: column.to_string(),
                        message: "missing value".to_string(),
                    });
                }
                Ok(raw.to_string())
            };
            let mut x = Vec::with_capacity(schema.len());
            for (j, &pos) in feature_pos.iter().enumerate() {
                let column = schema.name(j);
                let raw = field(pos, column)?;
                let value = match schema.kind(j) {
                    CovariateKind::Continuous => {
                        let v: f64 = raw.parse().map_err(|_| DataError::Row {
                            row,
                            column: column.to_string(),
                            message: format!("not a number: '{raw}'"),
                        })?;
                        if !v.is_finite() {
                            return Err(DataError::Row {
                                row,
                                column: column.to_string(),
                                message: format!("non-finite value '{raw}'"),
                            });
                        }
                        v
                    }
                    CovariateKind::Categorical(_) => {
                        schema.category_index(j, &raw).ok_or_else(|| DataError::Row {
                            row,
                            column: column.to_string(),
                            message: format!("unknown category code '{raw}'"),
                        })? as f64
                    }
                };
                x.push(value);
            }
            let action = parse_binary(row, action_col, &field(action_pos, action_col)?)?;
            let loss = parse_binary(row, loss_col, &field(loss_pos, loss_col)?)?;
            samples.push(Sample { x, action, loss });
        }
        Dataset::new(schema, samples, source)
    }

    /// Writes the dataset back out in the format [`Dataset::load_csv`] reads.
    /// Continuous values print in shortest round-trip form, so a save/load
    /// cycle reproduces the samples exactly.
    pub fn save_csv(
        &self,
        path: impl AsRef<Path>,
        action_col: &str,
        loss_col: &str,
    ) -> Result<(), DataError> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(file, action_col, loss_col)
    }

    /// [`Dataset::save_csv`] over any writer.
    pub fn to_csv_writer(
        &self,
        writer: impl io::Write,
        action_col: &str,
        loss_col: &str,
    ) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.entries().iter().map(|(n, _)| n.as_str()).collect();
        header.push(action_col);
        header.push(loss_col);
        w.write_record(&header)?;
        for s in &self.samples {
            let mut record: Vec<String> = Vec::with_capacity(s.x.len() + 2);
            for (j, &v) in s.x.iter().enumerate() {
                match self.schema.kind(j) {
                    CovariateKind::Continuous => record.push(format!("{v}")),
                    CovariateKind::Categorical(codes) => record.push(codes[v as usize].clone()),
                }
            }
            record.push(if s.action { "1" } else { "0" }.to_string());
            record.push(if s.loss { "1" } else { "0" }.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Partitions into parts sized by `spec.fractions` (floored targets,
    /// remainder to earlier parts) after a seeded uniform shuffle. Equal seeds
    /// give equal partitions.
    pub fn split(&self, spec: &SplitSpec) -> Result<Vec<Dataset>, DataError> {
        let counts = fraction_counts(self.len(), spec.fractions());
        self.split_by_counts(&counts, spec.seed)
    }

    /// Partitions into parts of exactly the given sizes (which must sum to the
    /// dataset size) after a seeded uniform shuffle.
    pub fn split_by_counts(&self, counts: &[usize], seed: u64) -> Result<Vec<Dataset>, DataError> {
        if counts.is_empty() {
            return Err(DataError::Split("need at least one part".to_string()));
        }
        let total: usize = counts.iter().sum();
        if total != self.len() {
            return Err(DataError::Split(format!(
                "part sizes sum to {total}, dataset has {} samples",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut parts = Vec::with_capacity(counts.len());
        let mut offset = 0;
        for &count in counts {
            let samples: Vec<Sample> = order[offset..offset + count]
                .iter()
                .map(|&i| self.samples[i].clone())
                .collect();
            offset += count;
            parts.push(Dataset {
                schema: Arc::clone(&self.schema),
                samples,
                source: self.source,
            });
        }
        Ok(parts)
    }

    /// Candidate split thresholds for a continuous feature: `bins` points
    /// placed at `min + j * (max - min) / (bins + 1)` for `j = 1..=bins`,
    /// strictly inside the observed range. A constant feature yields no
    /// thresholds.
    pub fn discretize(&self, feature: &str, bins: usize) -> Result<Vec<f64>, DataError> {
        let column = self
            .schema
            .index_of(feature)
            .ok_or_else(|| DataError::UnknownFeature(feature.to_string()))?;
        if let CovariateKind::Categorical(_) = self.schema.kind(column) {
            return Err(DataError::KindMismatch {
                feature: feature.to_string(),
                expected: "continuous",
                actual: "categorical",
            });
        }
        if bins == 0 {
            return Err(DataError::InvalidArgument("bins must be >= 1".to_string()));
        }
        if self.is_empty() {
            return Err(DataError::Empty);
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for s in &self.samples {
            let v = s.x[column];
            min = min.min(v);
            max = max.max(v);
        }
        if min == max {
            return Ok(Vec::new());
        }
        let width = max - min;
        Ok((1..=bins)
            .map(|j| min + j as f64 * width / (bins + 1) as f64)
            .collect())
    }
}

/// How to partition a dataset: positive fractions summing to 1, and the
/// shuffle seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    fractions: Vec<f64>,
    pub seed: u64,
}

impl SplitSpec {
    /// Fractions must be positive and sum to 1 within 1e-12. A single fraction
    /// of 1.0 is allowed and makes the split an identity.
    pub fn new(fractions: Vec<f64>, seed: u64) -> Result<Self, DataError> {
        if fractions.is_empty() {
            return Err(DataError::Split("need at least one fraction".to_string()));
        }
        if fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(DataError::Split("fractions must be positive".to_string()));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DataError::Split(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(SplitSpec { fractions, seed })
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }
}

/// Floored fraction targets with the remainder assigned to earlier parts.
fn fraction_counts(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = fractions.iter().map(|&f| (n as f64 * f) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let remainder = n - assigned.min(n);
    let parts = counts.len();
    for i in 0..remainder {
        counts[i % parts] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_feature_schema() -> CovariateSchema {
        CovariateSchema::new(vec![
            ("x1".to_string(), CovariateKind::Continuous),
            ("x2".to_string(), CovariateKind::Continuous),
        ])
        .unwrap()
    }

    fn mixed_schema() -> CovariateSchema {
        CovariateSchema::new(vec![
            ("age".to_string(), CovariateKind::Continuous),
            (
                "site".to_string(),
                CovariateKind::Categorical(vec!["north".into(), "south".into(), "west".into()]),
            ),
        ])
        .unwrap()
    }

    fn uniform_dataset(n: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|_| Sample {
                x: vec![rng.gen_range(30.0..80.0), rng.gen_range(30.0..80.0)],
                action: rng.gen_bool(0.5),
                loss: rng.gen_bool(0.3),
            })
            .collect();
        Dataset::new(two_feature_schema(), samples, DataSource::Observational).unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_small_category_sets() {
        let dup = CovariateSchema::new(vec![
            ("x".to_string(), CovariateKind::Continuous),
            ("x".to_string(), CovariateKind::Continuous),
        ]);
        assert!(matches!(dup, Err(DataError::Schema(_))));

        let single = CovariateSchema::new(vec![(
            "c".to_string(),
            CovariateKind::Categorical(vec!["only".into()]),
        )]);
        assert!(matches!(single, Err(DataError::Schema(_))));
    }

    #[test]
    fn load_csv_parses_valid_rows() {
        let csv = "x1,x2,a,l\n42.0,55.5,1,0\n61.25,30.0,0,1\n79.9,44.0,1,1\n";
        let d = Dataset::from_csv_reader(
            csv.as_bytes(),
            two_feature_schema(),
            "a",
            "l",
            DataSource::Observational,
        )
        .unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.samples()[0].x, vec![42.0, 55.5]);
        assert!(d.samples()[0].action);
        assert!(!d.samples()[0].loss);
        assert!(d.samples()[2].loss);
        assert_eq!(d.source(), DataSource::Observational);
    }

    #[test]
    fn load_csv_rejects_non_binary_action_naming_row_and_column() {
        let csv = "x1,x2,a,l\n42.0,55.5,1,0\n61.25,30.0,2,1\n";
        let err = Dataset::from_csv_reader(
            csv.as_bytes(),
            two_feature_schema(),
            "a",
            "l",
            DataSource::Observational,
        )
        .unwrap_err();
        match err {
            DataError::Row { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_rejects_missing_column() {
        let csv = "x1,a,l\n42.0,1,0\n";
        let err = Dataset::from_csv_reader(
            csv.as_bytes(),
            two_feature_schema(),
            "a",
            "l",
            DataSource::Observational,
        )
        .unwrap_err();
        match err {
            DataError::MissingColumn(name) => assert_eq!(name, "x2"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_rejects_missing_value_and_unknown_category() {
        let schema = mixed_schema();
        let blank = "age,site,a,l\n40.0,,1,0\n";
        let err = Dataset::from_csv_reader(
            blank.as_bytes(),
            schema.clone(),
            "a",
            "l",
            DataSource::Observational,
        )
        .unwrap_err();
        assert!(matches!(err, DataError::Row { row: 1, .. }));

        let unknown = "age,site,a,l\n40.0,east,1,0\n";
        let err = Dataset::from_csv_reader(
            unknown.as_bytes(),
            schema,
            "a",
            "l",
            DataSource::Observational,
        )
        .unwrap_err();
        match err {
            DataError::Row { row, column, message } => {
                assert_eq!((row, column.as_str()), (1, "site"));
                assert!(message.contains("east"));
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn eleven_covariate_mixed_schema_round_trips() {
        // Shape of a school-trial export: six categorical, five continuous.
        let entries = vec![
            ("gender".to_string(), CovariateKind::Categorical(vec!["male".into(), "female".into()])),
            ("race".to_string(), CovariateKind::Categorical(vec!["black".into(), "white".into(), "other".into()])),
            ("g1promote".to_string(), CovariateKind::Categorical(vec!["no".into(), "yes".into()])),
            ("g1specin".to_string(), CovariateKind::Categorical(vec!["no".into(), "yes".into()])),
            ("g1surban".to_string(), CovariateKind::Categorical(vec!["inner".into(), "suburban".into(), "rural".into(), "urban".into()])),
            ("g1freelunch".to_string(), CovariateKind::Categorical(vec!["no".into(), "yes".into()])),
            ("birthmonth".to_string(), CovariateKind::Continuous),
            ("g1present".to_string(), CovariateKind::Continuous),
            ("g1absent".to_string(), CovariateKind::Continuous),
            ("g1tcareer".to_string(), CovariateKind::Continuous),
            ("g1tyears".to_string(), CovariateKind::Continuous),
        ];
        let schema = CovariateSchema::new(entries).unwrap();
        let csv = "gender,race,g1promote,g1specin,g1surban,g1freelunch,birthmonth,g1present,g1absent,g1tcareer,g1tyears,a,l\n\
                   male,white,yes,no,rural,yes,4,170.5,9,3,12,1,0\n\
                   female,black,no,no,inner,no,11,155,21.5,2,7,0,1\n";
        let d = Dataset::from_csv_reader(csv.as_bytes(), schema.clone(), "a", "l", DataSource::Trial)
            .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.samples()[0].x[4], 2.0); // rural
        assert_eq!(d.samples()[1].x[1], 0.0); // black
        assert_eq!(d.source(), DataSource::Trial);

        let parsed = CovariateSchema::parse_text(&schema.to_text()).unwrap();
        assert_eq!(parsed, schema);
    }

    #[test]
    fn split_half_half_gives_exact_sizes() {
        let d = uniform_dataset(2000, 3);
        let spec = SplitSpec::new(vec![0.5, 0.5], 7).unwrap();
        let parts = d.split(&spec).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].len(), 1000);
        assert_eq!(parts[1].len(), 1000);
    }

    #[test]
    fn split_three_way_gives_exact_sizes() {
        let d = uniform_dataset(2000, 4);
        let spec = SplitSpec::new(vec![0.5, 0.1, 0.4], 11).unwrap();
        let parts = d.split(&spec).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Dataset::len).collect();
        assert_eq!(sizes, vec![1000, 200, 800]);
    }

    #[test]
    fn split_single_fraction_is_identity() {
        let d = uniform_dataset(17, 5);
        let spec = SplitSpec::new(vec![1.0], 9).unwrap();
        let parts = d.split(&spec).unwrap();
        assert_eq!(parts.len(), 1);
        // Same multiset of samples; order may differ under the shuffle.
        let mut original: Vec<String> = d.samples().iter().map(|s| format!("{s:?}")).collect();
        let mut got: Vec<String> = parts[0].samples().iter().map(|s| format!("{s:?}")).collect();
        original.sort();
        got.sort();
        assert_eq!(original, got);
    }

    #[test]
    fn split_is_a_partition_and_seed_deterministic() {
        let d = uniform_dataset(101, 6);
        let spec = SplitSpec::new(vec![0.3, 0.3, 0.4], 42).unwrap();
        let parts_a = d.split(&spec).unwrap();
        let parts_b = d.split(&spec).unwrap();
        for (a, b) in parts_a.iter().zip(&parts_b) {
            assert_eq!(a.samples(), b.samples());
        }
        let total: usize = parts_a.iter().map(Dataset::len).sum();
        assert_eq!(total, d.len());
        let mut all: Vec<String> = parts_a
            .iter()
            .flat_map(|p| p.samples().iter().map(|s| format!("{s:?}")))
            .collect();
        let mut original: Vec<String> = d.samples().iter().map(|s| format!("{s:?}")).collect();
        all.sort();
        original.sort();
        assert_eq!(all, original);
    }

    #[test]
    fn split_varies_across_seeds() {
        let d = uniform_dataset(50, 8);
        let spec_for = |seed| SplitSpec::new(vec![0.5, 0.5], seed).unwrap();
        let keys: HashSet<String> = (0..10u64)
            .map(|seed| format!("{:?}", d.split(&spec_for(seed)).unwrap()[0].samples()))
            .collect();
        assert!(keys.len() >= 9, "only {} distinct partitions over 10 seeds", keys.len());
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::new(vec![], 0).is_err());
        assert!(SplitSpec::new(vec![0.5, 0.4], 0).is_err());
        assert!(SplitSpec::new(vec![0.5, -0.5, 1.0], 0).is_err());
        assert!(SplitSpec::new(vec![0.5, 0.5], 0).is_ok());
    }

    #[test]
    fn discretize_places_interior_thresholds() {
        let samples = vec![30.0, 80.0, 55.0, 41.0]
            .into_iter()
            .map(|v| Sample { x: vec![v, 0.0], action: false, loss: false })
            .collect();
        let d = Dataset::new(two_feature_schema(), samples, DataSource::Observational).unwrap();
        let thresholds = d.discretize("x1", 4).unwrap();
        assert_eq!(thresholds, vec![40.0, 50.0, 60.0, 70.0]);
    }

    #[test]
    fn discretize_two_hundred_bins_has_uniform_interior_spacing() {
        let samples = vec![30.0, 80.0]
            .into_iter()
            .map(|v| Sample { x: vec![v, 0.0], action: false, loss: false })
            .collect();
        let d = Dataset::new(two_feature_schema(), samples, DataSource::Observational).unwrap();
        let thresholds = d.discretize("x1", 200).unwrap();
        assert_eq!(thresholds.len(), 200);
        let step = 50.0 / 201.0;
        for (j, &t) in thresholds.iter().enumerate() {
            let expected = 30.0 + (j + 1) as f64 * step;
            assert!((t - expected).abs() < 1e-12, "threshold {j}: {t} vs {expected}");
        }
        assert!(thresholds[0] > 30.0 && thresholds[199] < 80.0);
    }

    #[test]
    fn discretize_edge_cases() {
        let samples = vec![
            Sample { x: vec![5.0, 1.0], action: false, loss: false },
            Sample { x: vec![5.0, 2.0], action: false, loss: false },
        ];
        let d = Dataset::new(two_feature_schema(), samples, DataSource::Observational).unwrap();
        assert!(d.discretize("x1", 10).unwrap().is_empty());
        assert!(matches!(d.discretize("x1", 0), Err(DataError::InvalidArgument(_))));
        assert!(matches!(d.discretize("nope", 4), Err(DataError::UnknownFeature(_))));

        let cat = Dataset::new(
            mixed_schema(),
            vec![Sample { x: vec![1.0, 0.0], action: false, loss: false }],
            DataSource::Observational,
        )
        .unwrap();
        assert!(matches!(cat.discretize("site", 4), Err(DataError::KindMismatch { .. })));
    }

    #[test]
    fn csv_round_trip_reproduces_samples_exactly() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let schema = mixed_schema();
        let samples: Vec<Sample> = (0..64)
            .map(|_| Sample {
                x: vec![rng.gen_range(-5.0..120.0), rng.gen_range(0..3) as f64],
                action: rng.gen_bool(0.4),
                loss: rng.gen_bool(0.25),
            })
            .collect();
        let d = Dataset::new(schema.clone(), samples, DataSource::Trial).unwrap();
        let mut buffer = Vec::new();
        d.to_csv_writer(&mut buffer, "a", "l").unwrap();
        let reloaded =
            Dataset::from_csv_reader(buffer.as_slice(), schema, "a", "l", DataSource::Trial)
                .unwrap();
        assert_eq!(d.samples(), reloaded.samples());
    }

    #[test]
    fn schema_text_round_trip() {
        let schema = mixed_schema();
        let text = schema.to_text();
        assert!(text.contains("age = continuous"));
        assert!(text.contains("site = categorical(north, south, west)"));
        assert_eq!(CovariateSchema::parse_text(&text).unwrap(), schema);
        assert!(CovariateSchema::parse_text("age continuous").is_err());
        assert!(CovariateSchema::parse_text("age = weird").is_err());
    }
}
