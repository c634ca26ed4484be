//! Reproducibility signatures, model citations, and the model-reporting check.

use std::fmt;
use std::process::Command;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, Result};

const UNKNOWN: &str = "unk";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Fp32,
    Fp16,
    Qint8,
    Unknown,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" | "32" => Ok(Precision::Fp32),
            "fp16" | "16" => Ok(Precision::Fp16),
            "qint8" => Ok(Precision::Qint8),
            "unk" | "" => Ok(Precision::Unknown),
            other => Err(Error::InvalidArgument(format!(
                "unknown precision {other:?} (expected fp32, fp16, qint8 or unk)"
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Fp32 => "fp32",
            Precision::Fp16 => "fp16",
            Precision::Qint8 => "qint8",
            Precision::Unknown => UNKNOWN,
        })
    }
}

/// The four provenance fields. Absent versions render as `unk`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    interpreter_version: Option<String>,
    framework_version: Option<String>,
    precision: Precision,
    model: String,
}

fn check_field(field: &'static str, value: &str) -> Result<()> {
    if value.contains('|') {
        return Err(Error::SignatureField {
            field,
            value: value.to_string(),
        });
    }
    if value.is_empty() || value.chars().any(char::is_control) {
        return Err(Error::MalformedSignature(format!(
            "{field} must be non-empty printable text, got {value:?}"
        )));
    }
    Ok(())
}

fn normalize_version(field: &'static str, v: Option<&str>) -> Result<Option<String>> {
    match v {
        None => Ok(None),
        Some(v) if v == UNKNOWN => Ok(None),
        Some(v) => {
            check_field(field, v)?;
            Ok(Some(v.to_string()))
        }
    }
}

impl Signature {
    pub fn new(
        interpreter_version: Option<&str>,
        framework_version: Option<&str>,
        precision: Precision,
        model: &str,
    ) -> Result<Self> {
        check_field("model", model)?;
        Ok(Signature {
            interpreter_version: normalize_version("interpreter_version", interpreter_version)?,
            framework_version: normalize_version("framework_version", framework_version)?,
            precision,
            model: model.to_string(),
        })
    }

    pub fn interpreter_version(&self) -> Option<&str> {
        self.interpreter_version.as_deref()
    }

    pub fn framework_version(&self) -> Option<&str> {
        self.framework_version.as_deref()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// Fills versions that are still unknown from detected values.
    pub fn fill_from(mut self, detected: &DetectedEnvironment) -> Self {
        if self.interpreter_version.is_none() {
            self.interpreter_version = detected.interpreter_version.clone();
        }
        if self.framework_version.is_none() {
            self.framework_version = detected.framework_version.clone();
        }
        self
    }

    /// `Python<interp>|Comet<framework>|<precision>|<model>`.
    pub fn render(&self) -> String {
        format!(
            "Python{}|Comet{}|{}|{}",
            self.interpreter_version.as_deref().unwrap_or(UNKNOWN),
            self.framework_version.as_deref().unwrap_or(UNKNOWN),
            self.precision,
            self.model
        )
    }

    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('|').collect();
        let [interp, framework, precision, model] = parts.as_slice() else {
            return Err(Error::MalformedSignature(format!(
                "expected 4 '|'-separated fields, got {}",
                parts.len()
            )));
        };
        let interp = interp
            .strip_prefix("Python")
            .ok_or_else(|| Error::MalformedSignature("first field must start with 'Python'".into()))?;
        let framework = framework
            .strip_prefix("Comet")
            .ok_or_else(|| Error::MalformedSignature("second field must start with 'Comet'".into()))?;
        let precision: Precision = precision.parse()?;
        Signature::new(Some(interp), Some(framework), precision, model)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn make_signature(
    interpreter_version: Option<&str>,
    framework_version: Option<&str>,
    precision: Precision,
    model: &str,
) -> Result<String> {
    Ok(Signature::new(interpreter_version, framework_version, precision, model)?.render())
}

/// A command whose standard output contains a version number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub program: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeConfig {
    pub interpreter: Option<Probe>,
    pub framework: Option<Probe>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetectedEnvironment {
    pub interpreter_version: Option<String>,
    pub framework_version: Option<String>,
    pub warnings: Vec<String>,
}

static VERSION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)+(?:[A-Za-z0-9.+-]*)?|\d+").unwrap());

fn run_probe(probe: &Probe) -> std::result::Result<String, String> {
    let out = Command::new(&probe.program)
        .args(&probe.args)
        .output()
        .map_err(|e| format!("could not run {}: {e}", probe.program))?;
    if !out.status.success() {
        return Err(format!("{} exited with {}", probe.program, out.status));
    }
    // Some interpreters print their version on stderr.
    let text = format!(
        "{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    VERSION_RE
        .find(&text)
        .map(|m| m.as_str().to_string())
        .ok_or_else(|| format!("no version number in output of {}", probe.program))
}

/// Best-effort version detection. Never fails: anything that cannot be
/// probed stays unknown and a warning is recorded.
pub fn detect_environment(config: &ProbeConfig) -> DetectedEnvironment {
    let mut env = DetectedEnvironment::default();
    let mut probe = |p: &Option<Probe>, what: &str| -> Option<String> {
        let p = p.as_ref()?;
        match run_probe(p) {
            Ok(v) => Some(v),
            Err(msg) => {
                let warning = format!("{what} version unknown: {msg}");
                log::warn!("{warning}");
                env.warnings.push(warning);
                None
            }
        }
    };
    let interp = probe(&config.interpreter, "interpreter");
    let framework = probe(&config.framework, "framework");
    env.interpreter_version = interp;
    env.framework_version = framework;
    env
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationRecord {
    /// The database key that matched.
    pub model_pattern: String,
    pub url: String,
    pub bibtex: String,
}

#[derive(Debug, Deserialize)]
struct DbFile {
    version: u32,
    entry: Vec<DbEntry>,
}

#[derive(Debug, Clone, Deserialize)]
struct DbEntry {
    key: String,
    models: Vec<String>,
    url: String,
    bibtex: String,
}

/// Model identifier → paper database.
#[derive(Debug, Clone)]
pub struct CitationDb {
    version: u32,
    entries: Vec<DbEntry>,
}

static EMBEDDED_DB: &str = include_str!("../data/citations.toml");

/// Lowercases and drops an `org/` prefix.
pub fn normalize_model_id(id: &str) -> String {
    let id = id.trim().to_lowercase();
    match id.rsplit_once('/') {
        Some((_, name)) => name.to_string(),
        None => id,
    }
}

impl CitationDb {
    pub fn embedded() -> &'static CitationDb {
        static DB: LazyLock<CitationDb> = LazyLock::new(|| {
            CitationDb::from_toml_str(EMBEDDED_DB).expect("embedded citation database is valid")
        });
        &DB
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: DbFile = toml::from_str(text).map_err(|e| Error::CitationDb(e.to_string()))?;
        let mut seen = std::collections::HashSet::new();
        for e in &file.entry {
            if !(e.url.starts_with("https://") || e.url.starts_with("http://")) {
                return Err(Error::CitationDb(format!("{}: bad url {:?}", e.key, e.url)));
            }
            if !e.bibtex.trim_start().starts_with('@') {
                return Err(Error::CitationDb(format!("{}: bibtex must start with '@'", e.key)));
            }
            if e.models.is_empty() {
                return Err(Error::CitationDb(format!("{}: no models listed", e.key)));
            }
            for m in &e.models {
                if !seen.insert(normalize_model_id(m)) {
                    return Err(Error::CitationDb(format!("model {m:?} listed twice")));
                }
            }
        }
        Ok(CitationDb {
            version: file.version,
            entries: file.entry,
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// All model identifiers, normalized, in database order.
    pub fn model_ids(&self) -> Vec<String> {
        self.entries
            .iter()
            .flat_map(|e| e.models.iter().map(|m| normalize_model_id(m)))
            .collect()
    }

    pub fn cite(&self, model_identifier: &str) -> Result<CitationRecord> {
        let query = normalize_model_id(model_identifier);
        for e in &self.entries {
            if let Some(m) = e.models.iter().find(|m| normalize_model_id(m) == query) {
                return Ok(CitationRecord {
                    model_pattern: m.clone(),
                    url: e.url.clone(),
                    bibtex: e.bibtex.trim().to_string(),
                });
            }
        }
        let mut ranked: Vec<(usize, String)> = self
            .model_ids()
            .into_iter()
            .map(|id| (strsim::levenshtein(&query, &id), id))
            .collect();
        ranked.sort();
        Err(Error::UnknownModel {
            query: model_identifier.to_string(),
            suggestions: ranked.into_iter().take(3).map(|(_, id)| id).collect(),
        })
    }
}

pub fn cite(model_identifier: &str) -> Result<CitationRecord> {
    CitationDb::embedded().cite(model_identifier)
}

static REPORTING_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)xcomet-|wmt(?:20|21|22|23)-comet|wmt-da-estimator|comet[ -](?:da|20|21|22|23)")
        .unwrap()
});

/// All non-overlapping matches of the model-version patterns, left to right.
pub fn check_reporting(document_text: &str) -> Vec<String> {
    REPORTING_RE
        .find_iter(document_text)
        .map(|m| m.as_str().to_string())
        .collect()
}
