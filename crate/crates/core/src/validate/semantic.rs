//! L3-lite: a deliberately small set of cross-resource rules.
//!
//! * `R1` Service selectors must select some workload's pod template labels
//!   (subset match, same namespace). Skipped when the package has no workload.
//! * `R2` HPA `scaleTargetRef` must resolve to a document in the package.

use serde_yaml::{Mapping, Value};

use super::{FailureDetail, FieldPath, Level};
use crate::context::ContextModel;
use crate::manifest::{ManifestDocument, ManifestPackage};

pub const R1_SERVICE_SELECTOR: &str = "R1";
pub const R2_HPA_TARGET: &str = "R2";
pub const RULES: [&str; 2] = [R1_SERVICE_SELECTOR, R2_HPA_TARGET];

pub const WORKLOAD_KINDS: [&str; 5] = ["Deployment", "StatefulSet", "DaemonSet", "Job", "CronJob"];

/// Pod template labels of a workload document, if it is one.
pub fn pod_template_labels(doc: &ManifestDocument) -> Option<&Mapping> {
    let path: &[&str] = match doc.kind() {
        "Deployment" | "StatefulSet" | "DaemonSet" | "Job" => &["spec", "template", "metadata", "labels"],
        "CronJob" => &["spec", "jobTemplate", "spec", "template", "metadata", "labels"],
        _ => return None,
    };
    doc.lookup(path).and_then(Value::as_mapping)
}

fn is_workload(doc: &ManifestDocument) -> bool {
    WORKLOAD_KINDS.contains(&doc.kind())
}

fn is_subset(selector: &Mapping, labels: &Mapping) -> bool {
    selector.iter().all(|(k, v)| labels.get(k) == Some(v))
}

fn render_selector(selector: &Mapping) -> String {
    let mut parts: Vec<String> = selector
        .iter()
        .map(|(k, v)| format!("{}={}", k.as_str().unwrap_or("?"), v.as_str().map(str::to_string).unwrap_or_else(|| format!("{v:?}"))))
        .collect();
    parts.sort();
    parts.join(",")
}

fn check_service_selectors(pkg: &ManifestPackage, out: &mut Vec<FailureDetail>) {
    if !pkg.iter().any(is_workload) {
        return;
    }
    for (index, svc) in pkg.iter().enumerate() {
        if svc.kind() != "Service" {
            continue;
        }
        let Some(selector) = svc.lookup(&["spec", "selector"]).and_then(Value::as_mapping) else {
            continue;
        };
        if selector.is_empty() {
            continue;
        }
        let matched = pkg.iter().filter(|d| is_workload(d)).any(|w| {
            w.effective_namespace() == svc.effective_namespace()
                && pod_template_labels(w).is_some_and(|labels| is_subset(selector, labels))
        });
        if !matched {
            out.push(FailureDetail::new(
                Level::L3,
                R1_SERVICE_SELECTOR,
                FieldPath::new(index, "spec.selector"),
                format!(
                    "Service {:?} selector {{{}}} matches no workload pod template labels in namespace {:?}",
                    svc.name(),
                    render_selector(selector),
                    svc.effective_namespace()
                ),
            ));
        }
    }
}

fn check_hpa_targets(pkg: &ManifestPackage, out: &mut Vec<FailureDetail>) {
    for (index, hpa) in pkg.iter().enumerate() {
        if hpa.kind() != "HorizontalPodAutoscaler" {
            continue;
        }
        let Some(target) = hpa.lookup(&["spec", "scaleTargetRef"]) else {
            continue;
        };
        let (Some(kind), Some(name)) = (
            target.get("kind").and_then(Value::as_str),
            target.get("name").and_then(Value::as_str),
        ) else {
            // Missing fields are a schema problem, reported at L2.
            continue;
        };
        let api_version = target.get("apiVersion").and_then(Value::as_str);
        let ns = hpa.effective_namespace();
        let resolved = pkg.iter().any(|d| {
            d.kind() == kind
                && d.name() == name
                && d.effective_namespace() == ns
                && api_version.is_none_or(|a| d.gvk().api_version() == a)
        });
        if !resolved {
            out.push(FailureDetail::new(
                Level::L3,
                R2_HPA_TARGET,
                FieldPath::new(index, "spec.scaleTargetRef"),
                format!(
                    "HorizontalPodAutoscaler {:?} targets {} {}/{} which is not in the package",
                    hpa.name(),
                    api_version.unwrap_or("*"),
                    kind,
                    name
                ),
            ));
        }
    }
}

pub fn validate_l3_lite(pkg: &ManifestPackage, cm: &ContextModel) -> Vec<FailureDetail> {
    let mut out = Vec::new();
    if cm.rule_enabled(R1_SERVICE_SELECTOR) {
        check_service_selectors(pkg, &mut out);
    }
    if cm.rule_enabled(R2_HPA_TARGET) {
        check_hpa_targets(pkg, &mut out);
    }
    out
}
