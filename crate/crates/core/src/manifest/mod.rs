//! Manifest substrate: typed views over parsed Kubernetes YAML packages.
//!
//! Every other module consumes [`ManifestPackage`]. Packages are immutable
//! once parsed; the canonical text and content hash are derived on demand.

mod canonical;
mod parse;
mod strip;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};

pub use canonical::{canonicalize, canonicalize_value, content_hash, structural_exact_match};
pub use parse::{parse_package, SyntaxError, SyntaxReason};
pub use strip::{strip_llm_wrapping, EmptyOutput, DOCUMENT_SEPARATOR};

/// Kubernetes resource type identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupVersionKind {
    pub group: String,
    pub version: String,
    pub kind: String,
}

impl GroupVersionKind {
    pub fn new(group: impl Into<String>, version: impl Into<String>, kind: impl Into<String>) -> Self {
        Self {
            group: group.into(),
            version: version.into(),
            kind: kind.into(),
        }
    }

    /// Splits an `apiVersion` value ("apps/v1" or "v1") and pairs it with `kind`.
    /// Returns `None` when either half is empty.
    pub fn from_api_version(api_version: &str, kind: &str) -> Option<Self> {
        let (group, version) = match api_version.split_once('/') {
            Some((g, v)) => (g, v),
            None => ("", api_version),
        };
        if version.is_empty() || kind.is_empty() || version.contains('/') {
            return None;
        }
        if api_version.contains('/') && group.is_empty() {
            return None;
        }
        Some(Self::new(group, version, kind))
    }

    /// Parses the rendered form produced by `Display`.
    pub fn parse_rendered(text: &str) -> Option<Self> {
        let (api_version, kind) = text.trim().split_once(' ')?;
        Self::from_api_version(api_version, kind.trim())
    }

    pub fn api_version(&self) -> String {
        if self.group.is_empty() {
            self.version.clone()
        } else {
            format!("{}/{}", self.group, self.version)
        }
    }
}

impl fmt::Display for GroupVersionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.api_version(), self.kind)
    }
}

/// One parsed YAML document with a mapping root and resolved identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestDocument {
    raw_text: String,
    tree: Value,
    gvk: GroupVersionKind,
    name: String,
    namespace: Option<String>,
}

impl ManifestDocument {
    pub(crate) fn new(raw_text: String, tree: Value, gvk: GroupVersionKind) -> Self {
        let metadata = tree.get("metadata");
        let name = metadata
            .and_then(|m| m.get("name"))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let namespace = metadata
            .and_then(|m| m.get("namespace"))
            .and_then(Value::as_str)
            .map(str::to_string);
        Self {
            raw_text,
            tree,
            gvk,
            name,
            namespace,
        }
    }

    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    pub fn tree(&self) -> &Value {
        &self.tree
    }

    pub fn root(&self) -> &Mapping {
        self.tree.as_mapping().expect("document root is a mapping")
    }

    pub fn gvk(&self) -> &GroupVersionKind {
        &self.gvk
    }

    pub fn kind(&self) -> &str {
        &self.gvk.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn namespace(&self) -> Option<&str> {
        self.namespace.as_deref()
    }

    /// Namespace used for cross-resource resolution; absent means "default".
    pub fn effective_namespace(&self) -> &str {
        self.namespace.as_deref().unwrap_or("default")
    }

    /// Walks a dotted path of mapping keys.
    pub fn lookup(&self, path: &[&str]) -> Option<&Value> {
        path.iter().try_fold(&self.tree, |node, key| node.get(*key))
    }
}

/// An ordered, non-empty list of manifest documents.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestPackage {
    documents: Vec<ManifestDocument>,
}

impl ManifestPackage {
    pub(crate) fn new(documents: Vec<ManifestDocument>) -> Self {
        debug_assert!(!documents.is_empty());
        Self { documents }
    }

    pub fn documents(&self) -> &[ManifestDocument] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ManifestDocument> {
        self.documents.iter()
    }

    /// Finds a document by (apiVersion, kind, name) within a namespace.
    pub fn find(&self, api_version: &str, kind: &str, name: &str, namespace: &str) -> Option<&ManifestDocument> {
        self.documents.iter().find(|d| {
            d.gvk.api_version() == api_version
                && d.gvk.kind == kind
                && d.name == name
                && d.effective_namespace() == namespace
        })
    }
}

impl<'a> IntoIterator for &'a ManifestPackage {
    type Item = &'a ManifestDocument;
    type IntoIter = std::slice::Iter<'a, ManifestDocument>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}
