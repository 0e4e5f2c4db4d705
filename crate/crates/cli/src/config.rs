//! Configuration resolution and run metadata.
//!
//! Values resolve in priority order: explicit flag, then `--config` file
//! entry, then built-in default. Every resolved value is recorded so the
//! run's metadata sidecar can state exactly what the run used, along with
//! a SHA-256 hash over the sorted `key=value` pairs. The sidecar carries
//! no timestamps: identical inputs produce byte-identical outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

/// Failure classified by exit code: usage errors exit 2, runtime errors 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(message: impl Display) -> Self {
        CliError::Usage(message.to_string())
    }

    pub fn runtime(message: impl Display) -> Self {
        CliError::Runtime(message.to_string())
    }
}

impl From<riskpol::data::DataError> for CliError {
    fn from(err: riskpol::data::DataError) -> Self {
        match err {
            riskpol::data::DataError::Io(_) | riskpol::data::DataError::Csv(_) => {
                CliError::Runtime(err.to_string())
            }
            _ => CliError::Usage(err.to_string()),
        }
    }
}

impl From<riskpol::calibrate::CalibrateError> for CliError {
    fn from(err: riskpol::calibrate::CalibrateError) -> Self {
        match err {
            riskpol::calibrate::CalibrateError::Json(_)
            | riskpol::calibrate::CalibrateError::Csv(_) => CliError::Runtime(err.to_string()),
            _ => CliError::Usage(err.to_string()),
        }
    }
}

impl From<riskpol::genmodel::GenError> for CliError {
    fn from(err: riskpol::genmodel::GenError) -> Self {
        match err {
            riskpol::genmodel::GenError::Csv(_) => CliError::Runtime(err.to_string()),
            riskpol::genmodel::GenError::Config(_) => CliError::Usage(err.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<riskpol::benchmark::BenchmarkError> for CliError {
    fn from(err: riskpol::benchmark::BenchmarkError) -> Self {
        match err {
            riskpol::benchmark::BenchmarkError::Csv(_) => CliError::Runtime(err.to_string()),
            _ => CliError::Usage(err.to_string()),
        }
    }
}

impl From<riskpol::weights::WeightsError> for CliError {
    fn from(err: riskpol::weights::WeightsError) -> Self {
        CliError::Usage(err.to_string())
    }
}

impl From<riskpol::policy::PolicyError> for CliError {
    fn from(err: riskpol::policy::PolicyError) -> Self {
        CliError::Usage(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

/// Parsed `--config` file: `key = value` lines, `#` comments ignored.
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|err| {
                CliError::Usage(format!("cannot read config {}: {err}", path.display()))
            })?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Usage(format!(
                        "config line {} is not `key = value`: {line:?}",
                        idx + 1
                    )));
                };
                entries.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(FileConfig { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Resolves each option from flag, config file, or default, and remembers
/// the outcome for the metadata sidecar.
pub struct Resolver<'a> {
    file: &'a FileConfig,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a FileConfig) -> Self {
        Resolver { file, resolved: BTreeMap::new() }
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// Typed option with a default.
    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: Display + FromStr,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw.parse::<T>().map_err(|err| {
                    CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {err}"))
                })?,
                None => default,
            },
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Typed option without a default; present only if given somewhere.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: Display + FromStr,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(raw.parse::<T>().map_err(|err| {
                    CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {err}"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    /// Required option: flag or config file, else usage error.
    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: Display + FromStr,
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required option --{key}")))
    }

    /// Path-valued option; present only if given somewhere.
    pub fn optional_path(
        &mut self,
        key: &str,
        flag: Option<std::path::PathBuf>,
    ) -> Result<Option<std::path::PathBuf>, CliError> {
        let value = match flag {
            Some(p) => Some(p),
            None => self.file.get(key).map(std::path::PathBuf::from),
        };
        if let Some(p) = &value {
            self.record(key, p.display());
        }
        Ok(value)
    }

    /// Required path-valued option.
    pub fn required_path(
        &mut self,
        key: &str,
        flag: Option<std::path::PathBuf>,
    ) -> Result<std::path::PathBuf, CliError> {
        self.optional_path(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required option --{key}")))
    }

    /// Boolean flags are on if set on the command line or truthy in the file.
    pub fn flag(&mut self, key: &str, set: bool) -> Result<bool, CliError> {
        let value = if set {
            true
        } else {
            match self.file.get(key) {
                Some(raw) => matches!(raw, "true" | "1" | "yes"),
                None => false,
            }
        };
        self.record(key, value);
        Ok(value)
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// SHA-256 over the sorted, newline-joined `key=value` pairs.
pub fn config_hash(resolved: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (key, value) in resolved {
        hasher.update(key.as_bytes());
        hasher.update(b"=");
        hasher.update(value.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Writes `run.meta.json` next to the command's outputs. All provenance
/// (tool version, seed, resolved configuration and its hash, output file
/// names) lives here, never in the CSV bodies.
///
/// The output directory is deliberately omitted from the recorded config:
/// the sidecar lives inside it, and the same computation must produce the
/// same record (and hash) no matter where its artifacts land.
pub fn write_meta(
    dir: &Path,
    command: &str,
    resolved: &BTreeMap<String, String>,
    outputs: &[&str],
) -> Result<(), CliError> {
    let mut recorded = resolved.clone();
    recorded.remove("out");
    let meta = serde_json::json!({
        "tool": "riskpol",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": &recorded,
        "config_sha256": config_hash(&recorded),
        "outputs": outputs,
    });
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(dir.join("run.meta.json"), text + "\n")?;
    Ok(())
}

/// Creates the output directory if needed and returns it.
pub fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Parses a comma-separated list of `T`.
pub fn parse_list<T>(raw: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|err| CliError::Usage(format!("cannot parse {what} entry {s:?}: {err}")))
        })
        .collect()
}
