//! Stage 1 pair assembly: prompts, the teacher endpoint client, and the
//! candidate records it produces.

mod audit;
mod client;
mod mock;
mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::context::Family;
use crate::manifest::ManifestPackage;

pub use audit::{AuditEntry, AuditLog};
pub use client::{
    BackendError, EndpointConfig, HttpBackend, RateLimiter, Reply, TeacherBackend, TeacherClient, TeacherRequest,
};
pub use mock::{DefectKind, MockTeacher};
pub use prompt::{
    build_context_fragment, build_direct_prompt, build_reverse_prompt, render_instruction, PromptStyle, SYSTEM_PROMPT,
    TEMPLATE_VERSION,
};

/// How a pair was assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    /// The teacher writes the YAML for a generated task description.
    SyntheticDirect,
    /// The YAML already exists; the teacher only writes the instruction.
    RealReverse,
}

impl Stream {
    pub fn tag(self) -> &'static str {
        match self {
            Stream::SyntheticDirect => "synthetic_direct",
            Stream::RealReverse => "real_reverse",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Simple,
    Medium,
    Complex,
}

/// Kinds that carry a cross-resource rule (R1 for Service, R2 for HPA).
const RULE_BEARING_KINDS: [&str; 2] = ["Service", "HorizontalPodAutoscaler"];

impl Complexity {
    pub const ALL: [Complexity; 3] = [Complexity::Simple, Complexity::Medium, Complexity::Complex];

    pub fn tag(self) -> &'static str {
        match self {
            Complexity::Simple => "simple",
            Complexity::Medium => "medium",
            Complexity::Complex => "complex",
        }
    }

    /// Bucket for a parsed artifact: one document is simple, two or three
    /// medium, four or more (or both rule-bearing kinds present) complex.
    pub fn of_package(pkg: &ManifestPackage) -> Self {
        let rule_kinds = RULE_BEARING_KINDS
            .iter()
            .filter(|k| pkg.iter().any(|d| d.kind() == **k))
            .count();
        match pkg.len() {
            n if n >= 4 || rule_kinds >= 2 => Complexity::Complex,
            1 => Complexity::Simple,
            _ => Complexity::Medium,
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Complexity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "simple" => Ok(Complexity::Simple),
            "medium" => Ok(Complexity::Medium),
            "complex" => Ok(Complexity::Complex),
            other => Err(format!("unknown complexity {other:?}")),
        }
    }
}

/// One unit of Stage 1 work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTask {
    pub id: String,
    pub stream: Stream,
    pub family: Family,
    #[serde(default)]
    pub constraints: Vec<String>,
    pub kubernetes_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_yaml: Option<String>,
    pub complexity: Complexity,
}

impl GenerationTask {
    pub fn direct(id: impl Into<String>, family: Family, complexity: Complexity, kubernetes_version: &str) -> Self {
        Self {
            id: id.into(),
            stream: Stream::SyntheticDirect,
            family,
            constraints: Vec::new(),
            kubernetes_version: kubernetes_version.to_string(),
            source_yaml: None,
            complexity,
        }
    }

    /// A reverse task over existing YAML; complexity is taken from the source.
    pub fn reverse(
        id: impl Into<String>,
        family: Family,
        source_yaml: &str,
        kubernetes_version: &str,
    ) -> Result<Self, crate::validate::FailureDetail> {
        let pkg = crate::validate::validate_l1(source_yaml)?;
        Ok(Self {
            id: id.into(),
            stream: Stream::RealReverse,
            family,
            constraints: Vec::new(),
            kubernetes_version: kubernetes_version.to_string(),
            source_yaml: Some(crate::manifest::canonicalize(&pkg)),
            complexity: Complexity::of_package(&pkg),
        })
    }

    pub fn with_constraints(mut self, constraints: Vec<String>) -> Self {
        self.constraints = constraints;
        self
    }
}

/// Transport facts recorded alongside each candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherMeta {
    pub model: String,
    pub latency_ms: u64,
    pub attempts: u32,
}

/// A raw (x, c, y, s) pair before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub instruction: String,
    #[serde(rename = "context")]
    pub context_fragment: String,
    #[serde(rename = "yaml")]
    pub artifact_text: String,
    pub source: Stream,
    pub task: GenerationTask,
    pub teacher: TeacherMeta,
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("no API key: set TEACHER_API_KEY or use the mock backend")]
    MissingApiKey,
    #[error("the context model allows no types of family {0}")]
    FamilyNotInContext(Family),
    #[error("task {0} is not a {1} task")]
    WrongStream(String, Stream),
    #[error("source YAML of task {task} fails L1: {detail}")]
    InvalidSource { task: String, detail: String },
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint rejected the request with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("empty reply after stripping (attempts: {attempts})")]
    EmptyReply { attempts: u32 },
    #[error("reply of {bytes} bytes exceeds the {cap} byte cap")]
    ReplyTooLarge { bytes: usize, cap: usize },
}

impl GenerationError {
    /// Whether the task can simply be queued again later.
    pub fn requeueable(&self) -> bool {
        matches!(self, GenerationError::Transport { .. } | GenerationError::EmptyReply { .. })
            || matches!(self, GenerationError::Rejected { status, .. } if *status == 429 || *status >= 500)
    }
}
