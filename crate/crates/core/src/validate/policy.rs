//! L4: critical security policies and non-blocking warnings.

use serde_yaml::Value;

use super::{FailureDetail, FieldPath, Level};
use crate::context::ContextModel;
use crate::manifest::{ManifestDocument, ManifestPackage};

pub const P01_PRIVILEGED: &str = "P01";
pub const P02_HOST_NAMESPACES: &str = "P02";
pub const P03_HOST_PATH: &str = "P03";
pub const P04_DANGEROUS_CAPABILITIES: &str = "P04";
pub const P05_DEFAULT_SA_CLUSTER_ADMIN: &str = "P05";

pub const W01_NO_LIMITS: &str = "W01";
pub const W02_MUTABLE_IMAGE: &str = "W02";
pub const W03_RUN_AS_NON_ROOT: &str = "W03";
pub const W04_PRIVILEGE_ESCALATION: &str = "W04";

pub const CRITICAL_POLICIES: [&str; 5] = [
    P01_PRIVILEGED,
    P02_HOST_NAMESPACES,
    P03_HOST_PATH,
    P04_DANGEROUS_CAPABILITIES,
    P05_DEFAULT_SA_CLUSTER_ADMIN,
];
pub const WARNINGS: [&str; 4] = [W01_NO_LIMITS, W02_MUTABLE_IMAGE, W03_RUN_AS_NON_ROOT, W04_PRIVILEGE_ESCALATION];

const DANGEROUS_CAPABILITIES: [&str; 2] = ["SYS_ADMIN", "NET_ADMIN"];
const CONTAINER_LISTS: [&str; 3] = ["initContainers", "containers", "ephemeralContainers"];

/// Location of the pod spec inside a document, as a key path.
fn pod_spec_path(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "Pod" => &["spec"],
        "Deployment" | "StatefulSet" | "DaemonSet" | "ReplicaSet" | "Job" => &["spec", "template", "spec"],
        "CronJob" => &["spec", "jobTemplate", "spec", "template", "spec"],
        _ => return None,
    })
}

fn is_true(v: Option<&Value>) -> bool {
    v.and_then(Value::as_bool) == Some(true)
}

/// Whether an image reference floats: tagged `:latest` or carrying no tag or
/// digest at all.
pub fn is_mutable_image(image: &str) -> bool {
    if image.contains('@') {
        return false;
    }
    let last = image.rsplit('/').next().unwrap_or(image);
    match last.rsplit_once(':') {
        Some((_, tag)) => tag == "latest",
        None => true,
    }
}

struct Findings<'a> {
    cm: &'a ContextModel,
    critical: Vec<FailureDetail>,
    warnings: Vec<FailureDetail>,
}

impl Findings<'_> {
    fn critical(&mut self, id: &str, path: FieldPath, message: String) {
        if self.cm.policy_enabled(id) {
            self.critical.push(FailureDetail::new(Level::L4, id, path, message));
        }
    }

    fn warn(&mut self, id: &str, path: FieldPath, message: String) {
        self.warnings.push(FailureDetail::new(Level::L4, id, path, message));
    }
}

fn check_pod_spec(index: usize, base: &str, spec: &Value, f: &mut Findings<'_>) {
    for key in ["hostNetwork", "hostPID", "hostIPC"] {
        if is_true(spec.get(key)) {
            f.critical(
                P02_HOST_NAMESPACES,
                FieldPath::new(index, format!("{base}.{key}")),
                format!("pod shares the host namespace via {key}=true"),
            );
        }
    }
    if let Some(volumes) = spec.get("volumes").and_then(Value::as_sequence) {
        for (i, vol) in volumes.iter().enumerate() {
            if vol.get("hostPath").is_some() {
                let name = vol.get("name").and_then(Value::as_str).unwrap_or("?");
                f.critical(
                    P03_HOST_PATH,
                    FieldPath::new(index, format!("{base}.volumes[{i}].hostPath")),
                    format!("volume {name:?} mounts a hostPath"),
                );
            }
        }
    }

    let pod_non_root = is_true(spec.get("securityContext").and_then(|s| s.get("runAsNonRoot")));
    for list in CONTAINER_LISTS {
        let Some(containers) = spec.get(list).and_then(Value::as_sequence) else {
            continue;
        };
        for (i, c) in containers.iter().enumerate() {
            let cpath = format!("{base}.{list}[{i}]");
            let name = c.get("name").and_then(Value::as_str).unwrap_or("?");
            let sc = c.get("securityContext");
            if is_true(sc.and_then(|s| s.get("privileged"))) {
                f.critical(
                    P01_PRIVILEGED,
                    FieldPath::new(index, format!("{cpath}.securityContext.privileged")),
                    format!("container {name:?} runs privileged"),
                );
            }
            if let Some(added) = sc
                .and_then(|s| s.get("capabilities"))
                .and_then(|c| c.get("add"))
                .and_then(Value::as_sequence)
            {
                for cap in added.iter().filter_map(Value::as_str) {
                    let norm = cap.trim().to_ascii_uppercase();
                    let norm = norm.strip_prefix("CAP_").unwrap_or(&norm);
                    if DANGEROUS_CAPABILITIES.contains(&norm) {
                        f.critical(
                            P04_DANGEROUS_CAPABILITIES,
                            FieldPath::new(index, format!("{cpath}.securityContext.capabilities.add")),
                            format!("container {name:?} adds capability {cap}"),
                        );
                    }
                }
            }

            // Warnings apply to regular and init containers only.
            if list == "ephemeralContainers" {
                continue;
            }
            let has_limits = c
                .get("resources")
                .and_then(|r| r.get("limits"))
                .and_then(Value::as_mapping)
                .is_some_and(|m| !m.is_empty());
            if !has_limits {
                f.warn(
                    W01_NO_LIMITS,
                    FieldPath::new(index, format!("{cpath}.resources.limits")),
                    format!("container {name:?} sets no resource limits"),
                );
            }
            if let Some(image) = c.get("image").and_then(Value::as_str) {
                if is_mutable_image(image) {
                    f.warn(
                        W02_MUTABLE_IMAGE,
                        FieldPath::new(index, format!("{cpath}.image")),
                        format!("container {name:?} uses floating image {image:?}"),
                    );
                }
            }
            let non_root = pod_non_root || is_true(sc.and_then(|s| s.get("runAsNonRoot")));
            if !non_root {
                f.warn(
                    W03_RUN_AS_NON_ROOT,
                    FieldPath::new(index, format!("{cpath}.securityContext.runAsNonRoot")),
                    format!("container {name:?} does not assert runAsNonRoot"),
                );
            }
            let escalation_off = sc.and_then(|s| s.get("allowPrivilegeEscalation")).and_then(Value::as_bool) == Some(false);
            if !escalation_off {
                f.warn(
                    W04_PRIVILEGE_ESCALATION,
                    FieldPath::new(index, format!("{cpath}.securityContext.allowPrivilegeEscalation")),
                    format!("container {name:?} does not disable privilege escalation"),
                );
            }
        }
    }
}

fn check_binding(index: usize, doc: &ManifestDocument, f: &mut Findings<'_>) {
    let role_ref = doc.lookup(&["roleRef"]);
    let grants_admin = role_ref.and_then(|r| r.get("kind")).and_then(Value::as_str) == Some("ClusterRole")
        && role_ref.and_then(|r| r.get("name")).and_then(Value::as_str) == Some("cluster-admin");
    if !grants_admin {
        return;
    }
    let Some(subjects) = doc.lookup(&["subjects"]).and_then(Value::as_sequence) else {
        return;
    };
    for (i, s) in subjects.iter().enumerate() {
        let kind = s.get("kind").and_then(Value::as_str);
        let name = s.get("name").and_then(Value::as_str);
        if kind == Some("ServiceAccount") && name == Some("default") {
            let ns = s.get("namespace").and_then(Value::as_str).unwrap_or(doc.effective_namespace());
            f.critical(
                P05_DEFAULT_SA_CLUSTER_ADMIN,
                FieldPath::new(index, format!("subjects[{i}]")),
                format!("{} {:?} grants cluster-admin to service account {ns}/default", doc.kind(), doc.name()),
            );
        }
    }
}

/// Returns `(critical, warnings)`. Only critical findings fail L4.
pub fn validate_l4(pkg: &ManifestPackage, cm: &ContextModel) -> (Vec<FailureDetail>, Vec<FailureDetail>) {
    let mut f = Findings {
        cm,
        critical: Vec::new(),
        warnings: Vec::new(),
    };
    for (index, doc) in pkg.iter().enumerate() {
        if let Some(path) = pod_spec_path(doc.kind()) {
            if let Some(spec) = doc.lookup(path) {
                check_pod_spec(index, &path.join("."), spec, &mut f);
            }
        }
        if matches!(doc.kind(), "RoleBinding" | "ClusterRoleBinding") {
            check_binding(index, doc, &mut f);
        }
    }
    (f.critical, f.warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutable_images() {
        assert!(is_mutable_image("nginx"));
        assert!(is_mutable_image("nginx:latest"));
        assert!(is_mutable_image("registry.local:5000/team/app"));
        assert!(!is_mutable_image("registry.local:5000/team/app:1.2"));
        assert!(!is_mutable_image("nginx:1.25"));
        assert!(!is_mutable_image("nginx@sha256:abcd"));
    }
}
