//! The L1-L4 verification circuit.
//!
//! L1 parses the text; when it fails nothing else runs. Otherwise L2 (strict
//! schema), L3 (cross-resource rules) and L4 (critical policies) all run so a
//! report can attribute failures to several levels at once.

pub mod policy;
pub mod schema;
pub mod semantic;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::context::ContextModel;
use crate::manifest::{parse_package, ManifestPackage, SyntaxError};

pub use schema::{validate_l2, SchemaStore};
pub use semantic::validate_l3_lite;
pub use policy::validate_l4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
    L4,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::L1, Level::L2, Level::L3, Level::L4];
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::L3 => "L3",
            Level::L4 => "L4",
        };
        f.write_str(s)
    }
}

/// Where in a package a finding points: the document index and a dotted
/// field path such as `spec.template.spec.containers[0].image`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FieldPath {
    pub document: Option<usize>,
    pub field: String,
}

impl FieldPath {
    pub fn new(document: usize, field: impl Into<String>) -> Self {
        Self {
            document: Some(document),
            field: field.into(),
        }
    }

    pub fn package() -> Self {
        Self {
            document: None,
            field: String::new(),
        }
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.document {
            Some(d) if self.field.is_empty() => write!(f, "doc[{d}]"),
            Some(d) => write!(f, "doc[{d}].{}", self.field),
            None => f.write_str(&self.field),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureDetail {
    pub level: Level,
    pub rule_id: String,
    pub path: FieldPath,
    pub message: String,
}

impl FailureDetail {
    pub fn new(level: Level, rule_id: impl Into<String>, path: FieldPath, message: impl Into<String>) -> Self {
        Self {
            level,
            rule_id: rule_id.into(),
            path,
            message: message.into(),
        }
    }
}

/// Outcome of running the circuit on one artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub l1_pass: bool,
    pub l2_pass: bool,
    pub l3_pass: bool,
    pub l4_pass: bool,
    pub failures: Vec<FailureDetail>,
    pub warnings: Vec<FailureDetail>,
    pub overall: bool,
}

impl ValidationReport {
    /// A report for text that never made it through L1.
    pub fn l1_failure(detail: FailureDetail) -> Self {
        Self {
            l1_pass: false,
            l2_pass: false,
            l3_pass: false,
            l4_pass: false,
            failures: vec![detail],
            warnings: Vec::new(),
            overall: false,
        }
    }

    /// A report with every level passing and nothing to note.
    pub fn passing() -> Self {
        Self::from_levels(Vec::new(), Vec::new(), Vec::new(), Vec::new())
    }

    fn from_levels(l2: Vec<FailureDetail>, l3: Vec<FailureDetail>, l4: Vec<FailureDetail>, warnings: Vec<FailureDetail>) -> Self {
        let (l2_pass, l3_pass, l4_pass) = (l2.is_empty(), l3.is_empty(), l4.is_empty());
        let mut failures = l2;
        failures.extend(l3);
        failures.extend(l4);
        Self {
            l1_pass: true,
            l2_pass,
            l3_pass,
            l4_pass,
            failures,
            warnings,
            overall: l2_pass && l3_pass && l4_pass,
        }
    }

    pub fn level_pass(&self, level: Level) -> bool {
        match level {
            Level::L1 => self.l1_pass,
            Level::L2 => self.l2_pass,
            Level::L3 => self.l3_pass,
            Level::L4 => self.l4_pass,
        }
    }

    /// Lowest level that failed, used for disjoint failure breakdowns.
    pub fn lowest_failing_level(&self) -> Option<Level> {
        Level::ALL.into_iter().find(|l| !self.level_pass(*l))
    }

    pub fn failures_at(&self, level: Level) -> impl Iterator<Item = &FailureDetail> {
        self.failures.iter().filter(move |f| f.level == level)
    }

    /// Checks the structural invariants every report must satisfy.
    pub fn is_consistent(&self) -> bool {
        let conj = self.l1_pass && self.l2_pass && self.l3_pass && self.l4_pass;
        let short_circuit = self.l1_pass
            || (!self.l2_pass
                && !self.l3_pass
                && !self.l4_pass
                && self.failures.iter().all(|f| f.level == Level::L1));
        let flags_match_details = Level::ALL.into_iter().all(|l| {
            let has = self.failures_at(l).next().is_some();
            // Without L1, lower flags are forced false and carry no details.
            if !self.l1_pass && l != Level::L1 {
                !has
            } else {
                has != self.level_pass(l)
            }
        });
        self.overall == conj && short_circuit && flags_match_details
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read schema cache at {path}: {source}")]
    SchemaCache {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed schema cache manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("schema {file} is invalid: {message}")]
    SchemaCompile { file: String, message: String },
    #[error("context model targets Kubernetes {expected} but the schema cache declares {found}")]
    VersionMismatch { expected: String, found: String },
    #[error("rule or policy {0:?} is not registered")]
    UnknownRule(String),
    #[error("allowed type {0} has no schema in the cache")]
    MissingSchema(String),
}

pub fn syntax_failure(err: &SyntaxError) -> FailureDetail {
    let path = match err.document {
        Some(d) => FieldPath::new(d, ""),
        None => FieldPath::package(),
    };
    FailureDetail::new(Level::L1, err.reason.code(), path, err.to_string())
}

/// L1: the text must parse into a manifest package.
pub fn validate_l1(text: &str) -> Result<ManifestPackage, FailureDetail> {
    parse_package(text).map_err(|e| syntax_failure(&e))
}

/// Runs the full circuit on an already-parsed package.
pub fn run_on_package(pkg: &ManifestPackage, cm: &ContextModel) -> Result<ValidationReport, ConfigError> {
    let l2 = validate_l2(pkg, cm)?;
    let l3 = validate_l3_lite(pkg, cm);
    let (l4, warnings) = validate_l4(pkg, cm);
    Ok(ValidationReport::from_levels(l2, l3, l4, warnings))
}

/// Runs L1 -> L2 -> L3 -> L4 on an artifact text.
pub fn run_circuit(text: &str, cm: &ContextModel) -> Result<ValidationReport, ConfigError> {
    match validate_l1(text) {
        Ok(pkg) => run_on_package(&pkg, cm),
        Err(detail) => Ok(ValidationReport::l1_failure(detail)),
    }
}
