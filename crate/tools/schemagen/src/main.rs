//! Emits standalone, strict JSON Schemas for the Kubernetes kinds the
//! validator knows about.
//!
//! Output mirrors the shape of kubeconform's `standalone-strict` cache:
//! every object that declares `properties` gets `additionalProperties: false`,
//! int-or-string and quantity fields accept both strings and numbers, and the
//! top-level `apiVersion`/`kind` are pinned with `enum`.
//!
//! Usage: `cargo run --release -- <out-dir>` (from tools/schemagen).

use std::path::PathBuf;

use k8s_openapi::api::{apps, autoscaling, batch, core, networking, policy, rbac};
use schemars::r#gen::SchemaSettings;
use schemars::JsonSchema;
use serde_json::{json, Map, Value};

const KUBERNETES_VERSION: &str = "1.30.0";

fn schema_of<T: JsonSchema>() -> Value {
    let settings = SchemaSettings::draft07().with(|s| s.inline_subschemas = true);
    let root = settings.into_generator().into_root_schema_for::<T>();
    serde_json::to_value(root).expect("schema serializes")
}

fn is_quantity(obj: &Map<String, Value>) -> bool {
    obj.get("description")
        .and_then(Value::as_str)
        .is_some_and(|d| d.starts_with("Quantity is a fixed-point"))
}

fn strictify(node: &mut Value) {
    match node {
        Value::Object(obj) => {
            let quantity = is_quantity(obj);
            obj.remove("description");
            obj.remove("title");
            if obj.remove("x-kubernetes-int-or-string").is_some() {
                obj.remove("type");
                obj.insert(
                    "oneOf".into(),
                    json!([{ "type": "string" }, { "type": "integer" }]),
                );
            } else if quantity {
                obj.remove("type");
                obj.remove("format");
                obj.insert(
                    "oneOf".into(),
                    json!([{ "type": "string" }, { "type": "number" }]),
                );
            }
            let has_props = obj.contains_key("properties");
            if has_props && !obj.contains_key("additionalProperties") {
                obj.insert("additionalProperties".into(), Value::Bool(false));
            }
            for v in obj.values_mut() {
                strictify(v);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(strictify),
        _ => {}
    }
}

fn emit<T: JsonSchema>(out: &PathBuf, group: &str, version: &str, kind: &str) -> String {
    let mut schema = schema_of::<T>();
    strictify(&mut schema);
    let obj = schema.as_object_mut().expect("root schema is an object");
    obj.remove("$schema");
    if let Some(Value::Array(req)) = obj.get_mut("required") {
        req.retain(|r| r != "metadata");
        if req.is_empty() {
            obj.remove("required");
        }
    }
    let api_version = if group.is_empty() {
        version.to_string()
    } else {
        format!("{group}/{version}")
    };
    let props = obj
        .get_mut("properties")
        .and_then(Value::as_object_mut)
        .expect("resource schema has properties");
    props.insert(
        "apiVersion".into(),
        json!({ "type": "string", "enum": [api_version] }),
    );
    props.insert("kind".into(), json!({ "type": "string", "enum": [kind] }));
    let mut required = vec![json!("apiVersion"), json!("kind")];
    if let Some(Value::Array(rest)) = obj.remove("required") {
        required.extend(rest);
    }
    obj.insert("required".into(), Value::Array(required));

    let file = if group.is_empty() {
        format!("{}-{}.json", kind.to_lowercase(), version.to_lowercase())
    } else {
        let short_group = group.split('.').next().unwrap_or(group);
        format!(
            "{}-{}-{}.json",
            kind.to_lowercase(),
            short_group.to_lowercase(),
            version.to_lowercase()
        )
    };
    let text = serde_json::to_string_pretty(&schema).expect("serialize") + "\n";
    std::fs::write(out.join(&file), text).expect("write schema");
    file
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("../../schemas/kubernetes-1.30.0"));
    std::fs::create_dir_all(&out).expect("create output dir");

    let mut files = vec![
        emit::<core::v1::ConfigMap>(&out, "", "v1", "ConfigMap"),
        emit::<core::v1::Secret>(&out, "", "v1", "Secret"),
        emit::<core::v1::Service>(&out, "", "v1", "Service"),
        emit::<core::v1::ServiceAccount>(&out, "", "v1", "ServiceAccount"),
        emit::<core::v1::PersistentVolumeClaim>(&out, "", "v1", "PersistentVolumeClaim"),
        emit::<core::v1::Namespace>(&out, "", "v1", "Namespace"),
        emit::<core::v1::Pod>(&out, "", "v1", "Pod"),
        emit::<core::v1::LimitRange>(&out, "", "v1", "LimitRange"),
        emit::<core::v1::ResourceQuota>(&out, "", "v1", "ResourceQuota"),
        emit::<apps::v1::Deployment>(&out, "apps", "v1", "Deployment"),
        emit::<apps::v1::StatefulSet>(&out, "apps", "v1", "StatefulSet"),
        emit::<apps::v1::DaemonSet>(&out, "apps", "v1", "DaemonSet"),
        emit::<batch::v1::Job>(&out, "batch", "v1", "Job"),
        emit::<batch::v1::CronJob>(&out, "batch", "v1", "CronJob"),
        emit::<networking::v1::Ingress>(&out, "networking.k8s.io", "v1", "Ingress"),
        emit::<networking::v1::NetworkPolicy>(&out, "networking.k8s.io", "v1", "NetworkPolicy"),
        emit::<autoscaling::v2::HorizontalPodAutoscaler>(
            &out,
            "autoscaling",
            "v2",
            "HorizontalPodAutoscaler",
        ),
        emit::<rbac::v1::Role>(&out, "rbac.authorization.k8s.io", "v1", "Role"),
        emit::<rbac::v1::RoleBinding>(&out, "rbac.authorization.k8s.io", "v1", "RoleBinding"),
        emit::<rbac::v1::ClusterRole>(&out, "rbac.authorization.k8s.io", "v1", "ClusterRole"),
        emit::<rbac::v1::ClusterRoleBinding>(
            &out,
            "rbac.authorization.k8s.io",
            "v1",
            "ClusterRoleBinding",
        ),
        emit::<policy::v1::PodDisruptionBudget>(&out, "policy", "v1", "PodDisruptionBudget"),
    ];
    files.sort();

    let manifest = json!({
        "kubernetes_version": KUBERNETES_VERSION,
        "filename_template": "{kind}-{group}-{version}.json",
        "source": "k8s-openapi 0.23 (v1_30), strict standalone",
        "schemas": files,
    });
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serialize") + "\n",
    )
    .expect("write manifest");
    eprintln!("wrote {} schemas to {}", files.len(), out.display());
}
