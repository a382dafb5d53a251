//! L2: strict JSON Schema validation against a local, version-pinned cache.
//!
//! The cache is a directory of standalone schemas named by a filename
//! template (default `{kind}-{group}-{version}.json`, lowercased, with the
//! group reduced to its first DNS label and dropped for the core group) plus a
//! `manifest.json` declaring the Kubernetes version. Validators are compiled
//! lazily on first use and shared across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use jsonschema::error::ValidationErrorKind;
use jsonschema::Validator;
use serde::Deserialize;
use serde_json::Value as Json;
use serde_yaml::Value as Yaml;

use super::{ConfigError, FailureDetail, FieldPath, Level};
use crate::context::ContextModel;
use crate::manifest::{GroupVersionKind, ManifestPackage};

pub const DEFAULT_FILENAME_TEMPLATE: &str = "{kind}-{group}-{version}.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const REQUIRED_FIELD: &str = "required-field";
pub const UNKNOWN_FIELD: &str = "unknown-field";
pub const TYPE_MISMATCH: &str = "type-mismatch";
pub const ENUM_VALUE: &str = "enum-value";
pub const INVALID_VALUE: &str = "invalid-value";
pub const SCHEMA_NOT_FOUND: &str = "schema-not-found";
pub const GVK_NOT_ALLOWED: &str = "gvk-not-allowed";

pub const REASON_CODES: [&str; 7] = [
    REQUIRED_FIELD,
    UNKNOWN_FIELD,
    TYPE_MISMATCH,
    ENUM_VALUE,
    INVALID_VALUE,
    SCHEMA_NOT_FOUND,
    GVK_NOT_ALLOWED,
];

#[derive(Deserialize)]
struct CacheManifest {
    kubernetes_version: String,
    #[serde(default)]
    filename_template: Option<String>,
}

struct Entry {
    file: String,
    schema: Json,
    compiled: OnceLock<Result<Arc<Validator>, String>>,
}

pub struct SchemaStore {
    root: PathBuf,
    kubernetes_version: String,
    filename_template: String,
    entries: BTreeMap<GroupVersionKind, Entry>,
}

impl fmt::Debug for SchemaStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemaStore")
            .field("root", &self.root)
            .field("kubernetes_version", &self.kubernetes_version)
            .field("schemas", &self.entries.len())
            .finish()
    }
}

/// Renders the cache filename for a GVK.
pub fn schema_filename(template: &str, gvk: &GroupVersionKind) -> String {
    let group = gvk.group.split('.').next().unwrap_or_default().to_lowercase();
    let template = if group.is_empty() {
        template.replace("-{group}", "").replace("{group}-", "").replace("{group}", "")
    } else {
        template.to_string()
    };
    template
        .replace("{kind}", &gvk.kind.to_lowercase())
        .replace("{group}", &group)
        .replace("{version}", &gvk.version.to_lowercase())
}

fn enum_single(schema: &Json, prop: &str) -> Option<String> {
    schema
        .pointer(&format!("/properties/{prop}/enum/0"))
        .and_then(Json::as_str)
        .map(str::to_string)
}

impl SchemaStore {
    pub fn load(dir: &Path) -> Result<Self, ConfigError> {
        Self::load_with_template(dir, None)
    }

    /// Loads the cache index. `template` overrides the manifest's template.
    pub fn load_with_template(dir: &Path, template: Option<&str>) -> Result<Self, ConfigError> {
        let io_err = |path: &Path, source| ConfigError::SchemaCache {
            path: path.display().to_string(),
            source,
        };
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let manifest: CacheManifest = serde_json::from_str(&text).map_err(|e| ConfigError::Manifest {
            path: manifest_path.display().to_string(),
            message: e.to_string(),
        })?;
        let filename_template = template
            .map(str::to_string)
            .or(manifest.filename_template)
            .unwrap_or_else(|| DEFAULT_FILENAME_TEMPLATE.to_string());

        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != MANIFEST_FILE))
            .collect();
        files.sort();

        let mut entries = BTreeMap::new();
        for path in files {
            let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let schema: Json = serde_json::from_str(&text).map_err(|e| ConfigError::SchemaCompile {
                file: file.clone(),
                message: e.to_string(),
            })?;
            let (Some(api_version), Some(kind)) = (enum_single(&schema, "apiVersion"), enum_single(&schema, "kind")) else {
                // Not a resource schema (e.g. a shared definitions file).
                continue;
            };
            let Some(gvk) = GroupVersionKind::from_api_version(&api_version, &kind) else {
                continue;
            };
            if schema_filename(&filename_template, &gvk) != file {
                tracing::debug!(%file, %gvk, "schema file does not follow the filename template; skipped");
                continue;
            }
            entries.insert(
                gvk,
                Entry {
                    file,
                    schema,
                    compiled: OnceLock::new(),
                },
            );
        }
        Ok(Self {
            root: dir.to_path_buf(),
            kubernetes_version: manifest.kubernetes_version,
            filename_template,
            entries,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn kubernetes_version(&self) -> &str {
        &self.kubernetes_version
    }

    pub fn filename_template(&self) -> &str {
        &self.filename_template
    }

    pub fn has_schema(&self, gvk: &GroupVersionKind) -> bool {
        self.entries.contains_key(gvk)
    }

    pub fn gvks(&self) -> impl Iterator<Item = &GroupVersionKind> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn validator(&self, gvk: &GroupVersionKind) -> Option<Result<Arc<Validator>, ConfigError>> {
        let entry = self.entries.get(gvk)?;
        let compiled = entry.compiled.get_or_init(|| {
            jsonschema::options()
                .with_draft(jsonschema::Draft::Draft7)
                .should_validate_formats(false)
                .build(&entry.schema)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        });
        Some(compiled.clone().map_err(|message| ConfigError::SchemaCompile {
            file: entry.file.clone(),
            message,
        }))
    }
}

/// YAML tree to JSON the way the Kubernetes YAML decoder does it: scalar
/// keys become strings, non-finite floats become null.
pub fn yaml_to_json(value: &Yaml) -> Json {
    match value {
        Yaml::Null => Json::Null,
        Yaml::Bool(b) => Json::Bool(*b),
        Yaml::Number(n) => {
            if let Some(i) = n.as_i64() {
                Json::from(i)
            } else if let Some(u) = n.as_u64() {
                Json::from(u)
            } else {
                n.as_f64()
                    .and_then(serde_json::Number::from_f64)
                    .map(Json::Number)
                    .unwrap_or(Json::Null)
            }
        }
        Yaml::String(s) => Json::String(s.clone()),
        Yaml::Sequence(items) => Json::Array(items.iter().map(yaml_to_json).collect()),
        Yaml::Mapping(map) => Json::Object(
            map.iter()
                .map(|(k, v)| {
                    let key = match k {
                        Yaml::String(s) => s.clone(),
                        Yaml::Bool(b) => b.to_string(),
                        Yaml::Number(n) => n.to_string(),
                        Yaml::Null => "null".to_string(),
                        other => serde_yaml::to_string(other).unwrap_or_default().trim().to_string(),
                    };
                    (key, yaml_to_json(v))
                })
                .collect(),
        ),
        Yaml::Tagged(t) => yaml_to_json(&t.value),
    }
}

/// Converts a JSON pointer (`/spec/containers/0/image`) to a dotted path
/// (`spec.containers[0].image`).
pub fn pointer_to_field(pointer: &str) -> String {
    let mut out = String::new();
    for raw in pointer.split('/').skip(1) {
        let seg = raw.replace("~1", "/").replace("~0", "~");
        if !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_digit()) {
            out.push('[');
            out.push_str(&seg);
            out.push(']');
        } else {
            if !out.is_empty() {
                out.push('.');
            }
            out.push_str(&seg);
        }
    }
    out
}

fn join_field(base: &str, leaf: &str) -> String {
    if base.is_empty() {
        leaf.to_string()
    } else {
        format!("{base}.{leaf}")
    }
}

/// L2 over every document of the package.
pub fn validate_l2(pkg: &ManifestPackage, cm: &ContextModel) -> Result<Vec<FailureDetail>, ConfigError> {
    let store = cm.schema_store();
    let mut out = Vec::new();
    for (index, doc) in pkg.iter().enumerate() {
        let gvk = doc.gvk();
        let Some(validator) = store.validator(gvk) else {
            out.push(FailureDetail::new(
                Level::L2,
                SCHEMA_NOT_FOUND,
                FieldPath::new(index, ""),
                format!("no schema for {gvk} in the Kubernetes {} cache", store.kubernetes_version()),
            ));
            continue;
        };
        if !cm.allows(gvk) {
            out.push(FailureDetail::new(
                Level::L2,
                GVK_NOT_ALLOWED,
                FieldPath::new(index, ""),
                format!("{gvk} is not in the allowed type set"),
            ));
            continue;
        }
        let validator = validator?;
        let instance = yaml_to_json(doc.tree());
        let mut details: Vec<FailureDetail> = Vec::new();
        for err in validator.iter_errors(&instance) {
            let base = pointer_to_field(err.instance_path().as_str());
            match err.kind() {
                ValidationErrorKind::Required { property } => {
                    let name = property.as_str().map(str::to_string).unwrap_or_else(|| property.to_string());
                    details.push(FailureDetail::new(
                        Level::L2,
                        REQUIRED_FIELD,
                        FieldPath::new(index, join_field(&base, &name)),
                        format!("missing required field {name:?}"),
                    ));
                }
                ValidationErrorKind::AdditionalProperties { unexpected } => {
                    for name in unexpected {
                        details.push(FailureDetail::new(
                            Level::L2,
                            UNKNOWN_FIELD,
                            FieldPath::new(index, join_field(&base, name)),
                            format!("field {name:?} is not defined in the schema"),
                        ));
                    }
                }
                ValidationErrorKind::Type { .. }
                | ValidationErrorKind::OneOfNotValid { .. }
                | ValidationErrorKind::AnyOf { .. } => details.push(FailureDetail::new(
                    Level::L2,
                    TYPE_MISMATCH,
                    FieldPath::new(index, base),
                    err.to_string(),
                )),
                ValidationErrorKind::Enum { .. } | ValidationErrorKind::Constant { .. } => {
                    details.push(FailureDetail::new(Level::L2, ENUM_VALUE, FieldPath::new(index, base), err.to_string()))
                }
                _ => details.push(FailureDetail::new(
                    Level::L2,
                    INVALID_VALUE,
                    FieldPath::new(index, base),
                    err.to_string(),
                )),
            }
        }
        details.sort_by(|a, b| (&a.path, &a.rule_id, &a.message).cmp(&(&b.path, &b.rule_id, &b.message)));
        details.dedup();
        out.extend(details);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filename_template_rendering() {
        let t = DEFAULT_FILENAME_TEMPLATE;
        assert_eq!(schema_filename(t, &GroupVersionKind::new("", "v1", "ConfigMap")), "configmap-v1.json");
        assert_eq!(
            schema_filename(t, &GroupVersionKind::new("networking.k8s.io", "v1", "Ingress")),
            "ingress-networking-v1.json"
        );
        assert_eq!(
            schema_filename(t, &GroupVersionKind::new("autoscaling", "v2", "HorizontalPodAutoscaler")),
            "horizontalpodautoscaler-autoscaling-v2.json"
        );
        assert_eq!(
            schema_filename("{group}/{kind}_{version}.json", &GroupVersionKind::new("", "v1", "Pod")),
            "/pod_v1.json"
        );
    }

    #[test]
    fn pointer_conversion() {
        assert_eq!(pointer_to_field(""), "");
        assert_eq!(pointer_to_field("/spec/containers/0/image"), "spec.containers[0].image");
        assert_eq!(pointer_to_field("/metadata/labels/app.kubernetes.io~1name"), "metadata.labels.app.kubernetes.io/name");
    }

    #[test]
    fn yaml_keys_become_strings() {
        let y: Yaml = serde_yaml::from_str("1: a\ntrue: b\nx: .nan\n").unwrap();
        let j = yaml_to_json(&y);
        assert_eq!(j["1"], "a");
        assert_eq!(j["true"], "b");
        assert!(j["x"].is_null());
    }
}
