//! The domain context model: which resource types are allowed, where their
//! schemas live, how kinds compose into packages, and which semantic rules
//! and critical policies the validator enforces.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::manifest::GroupVersionKind;
use crate::validate::{policy, semantic, ConfigError, SchemaStore};

/// Resource-family strata used for generation planning and record labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Rbac,
    #[serde(rename = "statefulset")]
    StatefulSet,
    #[serde(rename = "cronjob")]
    CronJob,
    Ingress,
    #[serde(rename = "networkpolicy")]
    NetworkPolicy,
    Hpa,
    ConfigmapSecret,
    Composite,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Rbac,
        Family::StatefulSet,
        Family::CronJob,
        Family::Ingress,
        Family::NetworkPolicy,
        Family::Hpa,
        Family::ConfigmapSecret,
        Family::Composite,
    ];

    /// Stable machine tag (matches the serde form).
    pub fn tag(self) -> &'static str {
        match self {
            Family::Rbac => "rbac",
            Family::StatefulSet => "statefulset",
            Family::CronJob => "cronjob",
            Family::Ingress => "ingress",
            Family::NetworkPolicy => "networkpolicy",
            Family::Hpa => "hpa",
            Family::ConfigmapSecret => "configmap-secret",
            Family::Composite => "composite",
        }
    }

    /// Human-facing label used inside prompts.
    pub fn label(self) -> &'static str {
        match self {
            Family::Rbac => "RBAC",
            Family::StatefulSet => "StatefulSet",
            Family::CronJob => "CronJob",
            Family::Ingress => "Ingress",
            Family::NetworkPolicy => "NetworkPolicy",
            Family::Hpa => "HPA",
            Family::ConfigmapSecret => "ConfigMap/Secret",
            Family::Composite => "composite package",
        }
    }

    /// Resource types a generation task in this family may emit.
    pub fn gvks(self) -> Vec<GroupVersionKind> {
        let g = GroupVersionKind::new;
        match self {
            Family::Rbac => vec![
                g("", "v1", "ServiceAccount"),
                g("rbac.authorization.k8s.io", "v1", "Role"),
                g("rbac.authorization.k8s.io", "v1", "RoleBinding"),
                g("rbac.authorization.k8s.io", "v1", "ClusterRole"),
                g("rbac.authorization.k8s.io", "v1", "ClusterRoleBinding"),
            ],
            Family::StatefulSet => vec![
                g("apps", "v1", "StatefulSet"),
                g("", "v1", "Service"),
                g("", "v1", "PersistentVolumeClaim"),
            ],
            Family::CronJob => vec![g("batch", "v1", "CronJob"), g("batch", "v1", "Job")],
            Family::Ingress => vec![g("networking.k8s.io", "v1", "Ingress"), g("", "v1", "Service")],
            Family::NetworkPolicy => vec![g("networking.k8s.io", "v1", "NetworkPolicy")],
            Family::Hpa => vec![g("autoscaling", "v2", "HorizontalPodAutoscaler"), g("apps", "v1", "Deployment")],
            Family::ConfigmapSecret => vec![g("", "v1", "ConfigMap"), g("", "v1", "Secret")],
            Family::Composite => vec![
                g("apps", "v1", "Deployment"),
                g("", "v1", "Service"),
                g("networking.k8s.io", "v1", "Ingress"),
                g("", "v1", "ConfigMap"),
                g("autoscaling", "v2", "HorizontalPodAutoscaler"),
            ],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown resource family {0:?}")]
pub struct UnknownFamily(pub String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        Ok(match norm.as_str() {
            "rbac" => Family::Rbac,
            "statefulset" => Family::StatefulSet,
            "cronjob" => Family::CronJob,
            "ingress" => Family::Ingress,
            "networkpolicy" => Family::NetworkPolicy,
            "hpa" | "horizontalpodautoscaler" => Family::Hpa,
            "configmapsecret" => Family::ConfigmapSecret,
            "composite" | "compositepackage" | "compositepackages" => Family::Composite,
            _ => return Err(UnknownFamily(s.to_string())),
        })
    }
}

/// A named chain of kinds that commonly ship together in one package.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub name: String,
    pub chain: Vec<String>,
}

impl Composition {
    pub fn new(name: &str, chain: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            chain: chain.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn render(&self) -> String {
        self.chain.join(" -> ")
    }
}

fn default_compositions() -> Vec<Composition> {
    vec![
        Composition::new("web-app", &["Deployment", "Service", "Ingress"]),
        Composition::new("autoscaled-app", &["Deployment", "HorizontalPodAutoscaler"]),
        Composition::new("stateful-app", &["StatefulSet", "Service", "PersistentVolumeClaim"]),
        Composition::new("namespaced-rbac", &["ServiceAccount", "Role", "RoleBinding"]),
        Composition::new("cluster-rbac", &["ServiceAccount", "ClusterRole", "ClusterRoleBinding"]),
        Composition::new("scheduled-job", &["ConfigMap", "CronJob"]),
        Composition::new("configured-app", &["ConfigMap", "Secret", "Deployment"]),
    ]
}

/// The tuple of allowed types, schema store, compositions, semantic rules and
/// critical policies that parameterizes validation.
#[derive(Debug, Clone)]
pub struct ContextModel {
    meta_spec: BTreeSet<GroupVersionKind>,
    schema_store: Arc<SchemaStore>,
    compositions: Vec<Composition>,
    semantic_rules: Vec<String>,
    critical_policies: Vec<String>,
    kubernetes_version: String,
}

impl ContextModel {
    /// Builds a context model, checking that every rule and policy id is
    /// registered, every allowed GVK has a schema, and the version matches the
    /// schema cache.
    pub fn new(
        meta_spec: BTreeSet<GroupVersionKind>,
        schema_store: Arc<SchemaStore>,
        compositions: Vec<Composition>,
        semantic_rules: Vec<String>,
        critical_policies: Vec<String>,
        kubernetes_version: impl Into<String>,
    ) -> Result<Self, ConfigError> {
        let kubernetes_version = kubernetes_version.into();
        if kubernetes_version != schema_store.kubernetes_version() {
            return Err(ConfigError::VersionMismatch {
                expected: kubernetes_version,
                found: schema_store.kubernetes_version().to_string(),
            });
        }
        for rule in &semantic_rules {
            if !semantic::RULES.contains(&rule.as_str()) {
                return Err(ConfigError::UnknownRule(rule.clone()));
            }
        }
        for p in &critical_policies {
            if !policy::CRITICAL_POLICIES.contains(&p.as_str()) {
                return Err(ConfigError::UnknownRule(p.clone()));
            }
        }
        for gvk in &meta_spec {
            if !schema_store.has_schema(gvk) {
                return Err(ConfigError::MissingSchema(gvk.to_string()));
            }
        }
        Ok(Self {
            meta_spec,
            schema_store,
            compositions,
            semantic_rules,
            critical_policies,
            kubernetes_version,
        })
    }

    /// Default model over a schema cache: every cached GVK is allowed, all
    /// rules and policies enabled.
    pub fn with_defaults(schema_store: SchemaStore) -> Result<Self, ConfigError> {
        let meta_spec = schema_store.gvks().cloned().collect();
        let version = schema_store.kubernetes_version().to_string();
        Self::new(
            meta_spec,
            Arc::new(schema_store),
            default_compositions(),
            semantic::RULES.iter().map(|s| s.to_string()).collect(),
            policy::CRITICAL_POLICIES.iter().map(|s| s.to_string()).collect(),
            version,
        )
    }

    /// Loads the schema cache at `dir` and builds the default model.
    pub fn load_default(dir: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::with_defaults(SchemaStore::load(dir.as_ref())?)
    }

    /// Returns a copy with the given rule and policy ids disabled.
    pub fn without(mut self, disabled: &[String]) -> Self {
        self.semantic_rules.retain(|r| !disabled.contains(r));
        self.critical_policies.retain(|p| !disabled.contains(p));
        self
    }

    pub fn meta_spec(&self) -> &BTreeSet<GroupVersionKind> {
        &self.meta_spec
    }

    pub fn allows(&self, gvk: &GroupVersionKind) -> bool {
        self.meta_spec.contains(gvk)
    }

    pub fn schema_store(&self) -> &SchemaStore {
        &self.schema_store
    }

    pub fn compositions(&self) -> &[Composition] {
        &self.compositions
    }

    pub fn semantic_rules(&self) -> &[String] {
        &self.semantic_rules
    }

    pub fn critical_policies(&self) -> &[String] {
        &self.critical_policies
    }

    pub fn rule_enabled(&self, id: &str) -> bool {
        self.semantic_rules.iter().any(|r| r == id)
    }

    pub fn policy_enabled(&self, id: &str) -> bool {
        self.critical_policies.iter().any(|p| p == id)
    }

    pub fn kubernetes_version(&self) -> &str {
        &self.kubernetes_version
    }

    /// Allowed GVKs of a family, restricted to this model's meta-spec.
    pub fn family_gvks(&self, family: Family) -> Vec<GroupVersionKind> {
        family.gvks().into_iter().filter(|g| self.allows(g)).collect()
    }

    /// Compositions whose chain touches any kind of the family.
    pub fn family_compositions(&self, family: Family) -> Vec<&Composition> {
        let kinds: BTreeSet<String> = family.gvks().into_iter().map(|g| g.kind).collect();
        self.compositions
            .iter()
            .filter(|c| c.chain.iter().any(|k| kinds.contains(k)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_parsing_accepts_labels_and_tags() {
        for f in Family::ALL {
            assert_eq!(f.tag().parse::<Family>().unwrap(), f);
            assert_eq!(f.label().parse::<Family>().unwrap(), f);
        }
        assert!("Widget".parse::<Family>().is_err());
    }

    #[test]
    fn family_serde_matches_tag() {
        for f in Family::ALL {
            assert_eq!(serde_json::to_string(&f).unwrap(), format!("\"{}\"", f.tag()));
        }
    }
}
