//! Offline teacher that answers from templates, so the whole pipeline runs
//! without an endpoint. Output is a pure function of the task.

use std::fmt::Write;

use super::client::{BackendError, Reply, TeacherBackend, TeacherRequest};
use super::{Complexity, GenerationTask, Stream};
use crate::context::Family;

/// Which circuit level a deliberately broken reply trips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    Prose,
    UnknownField,
    DanglingTarget,
    ClusterAdmin,
}

impl DefectKind {
    const CYCLE: [DefectKind; 4] = [
        DefectKind::Prose,
        DefectKind::UnknownField,
        DefectKind::DanglingTarget,
        DefectKind::ClusterAdmin,
    ];
}

#[derive(Debug, Clone)]
pub struct MockTeacher {
    model: String,
    defect_every: u64,
    fence_every: u64,
}

impl Default for MockTeacher {
    fn default() -> Self {
        Self {
            model: "mock-teacher".into(),
            defect_every: 10,
            fence_every: 7,
        }
    }
}

impl MockTeacher {
    /// `defect_every == 0` produces only valid replies.
    pub fn new(defect_every: u64) -> Self {
        Self {
            defect_every,
            ..Self::default()
        }
    }

    /// Sequence number taken from the trailing digits of a task id.
    pub fn sequence(task_id: &str) -> u64 {
        let digits: String = task_id
            .chars()
            .rev()
            .take_while(char::is_ascii_digit)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        digits.parse().unwrap_or_else(|_| fnv1a(task_id))
    }

    /// The defect (if any) a task of this sequence number receives.
    pub fn defect_for(&self, seq: u64) -> Option<DefectKind> {
        if self.defect_every == 0 || (seq + 1) % self.defect_every != 0 {
            return None;
        }
        let round = (seq + 1) / self.defect_every - 1;
        Some(DefectKind::CYCLE[(round % 4) as usize])
    }

    pub fn render_yaml(&self, task: &GenerationTask) -> String {
        let seq = Self::sequence(&task.id);
        let mut yaml = package(task.family, task.complexity, seq).join("---\n");
        match self.defect_for(seq) {
            None => {
                if self.fence_every > 0 && seq % self.fence_every == 3 {
                    yaml = format!("Sure, here is the package:\n```yaml\n{yaml}```\n");
                }
            }
            Some(DefectKind::Prose) => yaml = format!("Here is the manifest you requested:\n{yaml}"),
            Some(DefectKind::UnknownField) => {
                let first_end = yaml.find("---\n").unwrap_or(yaml.len());
                yaml.insert_str(first_end, "replica: 2\n");
            }
            Some(DefectKind::DanglingTarget) => yaml.push_str(&format!(
                "---\n{}",
                hpa(&format!("x{seq}"), "Deployment", &format!("missing-{seq}"), 3)
            )),
            Some(DefectKind::ClusterAdmin) => {
                let _ = write!(
                    yaml,
                    "---\napiVersion: rbac.authorization.k8s.io/v1\nkind: ClusterRoleBinding\nmetadata:\n  name: admin-{seq}\nsubjects:\n  - kind: ServiceAccount\n    name: default\n    namespace: default\nroleRef:\n  apiGroup: rbac.authorization.k8s.io\n  kind: ClusterRole\n  name: cluster-admin\n"
                );
            }
        }
        yaml
    }

    fn render_instruction(task: &GenerationTask) -> String {
        let source = task.source_yaml.as_deref().unwrap_or_default();
        let mut items = Vec::new();
        let mut kind = "";
        for line in source.lines() {
            if let Some(k) = line.strip_prefix("kind: ") {
                kind = k;
            } else if let Some(n) = line.strip_prefix("  name: ") {
                if !kind.is_empty() {
                    items.push(format!("a {kind} named {n}"));
                    kind = "";
                }
            }
        }
        if items.is_empty() {
            items.push("the resources shown".to_string());
        }
        format!("Create {} for Kubernetes {}.", items.join(", "), task.kubernetes_version)
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf29ce484222325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100000001b3))
}

impl TeacherBackend for MockTeacher {
    fn complete(&self, request: &TeacherRequest<'_>) -> Result<Reply, BackendError> {
        let task = request.task;
        let content = match task.stream {
            Stream::SyntheticDirect => self.render_yaml(task),
            Stream::RealReverse => Self::render_instruction(task),
        };
        Ok(Reply {
            content,
            model: self.model.clone(),
            latency_ms: 40 + Self::sequence(&task.id) % 17,
        })
    }

    fn model(&self) -> &str {
        &self.model
    }
}

fn container(name: &str, image: &str, port: u32) -> String {
    format!(
        "      containers:\n        - name: {name}\n          image: {image}\n          ports:\n            - containerPort: {port}\n          resources:\n            requests:\n              cpu: 100m\n              memory: 64Mi\n            limits:\n              cpu: 500m\n              memory: 256Mi\n          securityContext:\n            runAsNonRoot: true\n            allowPrivilegeEscalation: false\n"
    )
}

fn image(seq: u64) -> String {
    if seq % 3 == 0 {
        "registry.example.com/apps/service:latest".into()
    } else {
        format!("registry.example.com/apps/service:1.{}.{}", seq % 9, seq % 5)
    }
}

fn deployment(name: &str, seq: u64) -> String {
    format!(
        "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  name: {name}\n  labels:\n    app: {name}\nspec:\n  replicas: {}\n  selector:\n    matchLabels:\n      app: {name}\n  template:\n    metadata:\n      labels:\n        app: {name}\n    spec:\n{}",
        1 + seq % 4,
        container(name, &image(seq), 8080)
    )
}

fn service(name: &str, app: &str, port: u32, headless: bool) -> String {
    let cluster_ip = if headless { "  clusterIP: None\n" } else { "" };
    format!(
        "apiVersion: v1\nkind: Service\nmetadata:\n  name: {name}\nspec:\n{cluster_ip}  selector:\n    app: {app}\n  ports:\n    - name: http\n      port: {port}\n      targetPort: 8080\n"
    )
}

fn ingress(name: &str, svc: &str, port: u32) -> String {
    format!(
        "apiVersion: networking.k8s.io/v1\nkind: Ingress\nmetadata:\n  name: {name}\nspec:\n  ingressClassName: nginx\n  rules:\n    - host: {name}.example.com\n      http:\n        paths:\n          - path: /\n            pathType: Prefix\n            backend:\n              service:\n                name: {svc}\n                port:\n                  number: {port}\n"
    )
}

fn hpa(name: &str, kind: &str, target: &str, max: u64) -> String {
    let api = if kind == "Deployment" || kind == "StatefulSet" { "apps/v1" } else { "v1" };
    format!(
        "apiVersion: autoscaling/v2\nkind: HorizontalPodAutoscaler\nmetadata:\n  name: {name}\nspec:\n  scaleTargetRef:\n    apiVersion: {api}\n    kind: {kind}\n    name: {target}\n  minReplicas: 1\n  maxReplicas: {max}\n  metrics:\n    - type: Resource\n      resource:\n        name: cpu\n        target:\n          type: Utilization\n          averageUtilization: 75\n"
    )
}

fn statefulset(name: &str, seq: u64) -> String {
    format!(
        "apiVersion: apps/v1\nkind: StatefulSet\nmetadata:\n  name: {name}\nspec:\n  serviceName: {name}\n  replicas: {}\n  selector:\n    matchLabels:\n      app: {name}\n  template:\n    metadata:\n      labels:\n        app: {name}\n    spec:\n{}  volumeClaimTemplates:\n    - metadata:\n        name: data\n      spec:\n        accessModes:\n          - ReadWriteOnce\n        resources:\n          requests:\n            storage: {}Gi\n",
        1 + seq % 3,
        container(name, &image(seq), 5432),
        1 + seq % 20
    )
}

fn pvc(name: &str, seq: u64) -> String {
    format!(
        "apiVersion: v1\nkind: PersistentVolumeClaim\nmetadata:\n  name: {name}\nspec:\n  accessModes:\n    - ReadWriteOnce\n  resources:\n    requests:\n      storage: {}Gi\n",
        1 + seq % 50
    )
}

fn job_spec(name: &str, seq: u64, indent: &str) -> String {
    let body = format!(
        "backoffLimit: {}\ntemplate:\n  metadata:\n    labels:\n      job: {name}\n  spec:\n    restartPolicy: OnFailure\n    containers:\n      - name: task\n        image: busybox:1.36\n        command: [\"sh\", \"-c\", \"echo run {seq}\"]\n        resources:\n          limits:\n            cpu: 200m\n        securityContext:\n          runAsNonRoot: true\n          allowPrivilegeEscalation: false\n",
        seq % 4
    );
    body.lines().map(|l| format!("{indent}{l}\n")).collect()
}

fn cronjob(name: &str, seq: u64) -> String {
    format!(
        "apiVersion: batch/v1\nkind: CronJob\nmetadata:\n  name: {name}\nspec:\n  schedule: \"{} {} * * *\"\n  jobTemplate:\n    spec:\n{}",
        seq % 60,
        seq % 24,
        job_spec(name, seq, "      ")
    )
}

fn job(name: &str, seq: u64) -> String {
    format!(
        "apiVersion: batch/v1\nkind: Job\nmetadata:\n  name: {name}\nspec:\n{}",
        job_spec(name, seq, "  ")
    )
}

fn network_policy(name: &str, app: &str, port: u64, deny_all: bool) -> String {
    if deny_all {
        return format!(
            "apiVersion: networking.k8s.io/v1\nkind: NetworkPolicy\nmetadata:\n  name: {name}\nspec:\n  podSelector: {{}}\n  policyTypes:\n    - Ingress\n"
        );
    }
    format!(
        "apiVersion: networking.k8s.io/v1\nkind: NetworkPolicy\nmetadata:\n  name: {name}\nspec:\n  podSelector:\n    matchLabels:\n      app: {app}\n  policyTypes:\n    - Ingress\n  ingress:\n    - from:\n        - podSelector:\n            matchLabels:\n              role: client\n      ports:\n        - protocol: TCP\n          port: {port}\n"
    )
}

fn configmap(name: &str, seq: u64) -> String {
    format!(
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: {name}\ndata:\n  LOG_LEVEL: {}\n  WORKERS: \"{}\"\n",
        ["debug", "info", "warn"][(seq % 3) as usize],
        1 + seq % 16
    )
}

fn secret(name: &str, seq: u64) -> String {
    format!(
        "apiVersion: v1\nkind: Secret\nmetadata:\n  name: {name}\ntype: Opaque\nstringData:\n  token: \"tok-{seq:08x}\"\n"
    )
}

fn service_account(name: &str, ns: &str) -> String {
    format!("apiVersion: v1\nkind: ServiceAccount\nmetadata:\n  name: {name}\n  namespace: {ns}\n")
}

fn role(name: &str, ns: &str, cluster: bool) -> String {
    let (kind, ns_line) = if cluster {
        ("ClusterRole", String::new())
    } else {
        ("Role", format!("  namespace: {ns}\n"))
    };
    format!(
        "apiVersion: rbac.authorization.k8s.io/v1\nkind: {kind}\nmetadata:\n  name: {name}\n{ns_line}rules:\n  - apiGroups: [\"\"]\n    resources: [\"configmaps\", \"pods\"]\n    verbs: [\"get\", \"list\", \"watch\"]\n"
    )
}

fn binding(name: &str, ns: &str, sa: &str, role: &str, cluster: bool) -> String {
    let (kind, role_kind, ns_line) = if cluster {
        ("ClusterRoleBinding", "ClusterRole", String::new())
    } else {
        ("RoleBinding", "Role", format!("  namespace: {ns}\n"))
    };
    format!(
        "apiVersion: rbac.authorization.k8s.io/v1\nkind: {kind}\nmetadata:\n  name: {name}\n{ns_line}subjects:\n  - kind: ServiceAccount\n    name: {sa}\n    namespace: {ns}\nroleRef:\n  apiGroup: rbac.authorization.k8s.io\n  kind: {role_kind}\n  name: {role}\n"
    )
}

/// Valid documents for a family at a requested size.
fn package(family: Family, complexity: Complexity, seq: u64) -> Vec<String> {
    use Complexity::*;
    let n = format!("{}-{seq}", family.tag());
    let ns = format!("team-{}", seq % 5);
    match (family, complexity) {
        (Family::Rbac, Simple) => vec![service_account(&n, &ns)],
        (Family::Rbac, Medium) => vec![
            service_account(&n, &ns),
            role(&n, &ns, false),
            binding(&n, &ns, &n, &n, false),
        ],
        (Family::Rbac, Complex) => vec![
            service_account(&n, &ns),
            role(&format!("{n}-read"), &ns, true),
            binding(&format!("{n}-read"), &ns, &n, &format!("{n}-read"), true),
            role(&n, &ns, false),
            binding(&n, &ns, &n, &n, false),
        ],
        (Family::StatefulSet, Simple) => vec![statefulset(&n, seq)],
        (Family::StatefulSet, Medium) => vec![service(&n, &n, 5432, true), statefulset(&n, seq)],
        (Family::StatefulSet, Complex) => vec![
            service(&n, &n, 5432, true),
            service(&format!("{n}-client"), &n, 5432, false),
            statefulset(&n, seq),
            pvc(&format!("{n}-backup"), seq),
        ],
        (Family::CronJob, Simple) => vec![cronjob(&n, seq)],
        (Family::CronJob, Medium) => vec![cronjob(&n, seq), job(&format!("{n}-init"), seq)],
        (Family::CronJob, Complex) => vec![
            cronjob(&n, seq),
            cronjob(&format!("{n}-weekly"), seq + 7),
            job(&format!("{n}-init"), seq),
            job(&format!("{n}-migrate"), seq + 1),
        ],
        (Family::Ingress, Simple) => vec![ingress(&n, &n, 80)],
        (Family::Ingress, Medium) => vec![service(&n, &n, 80, false), ingress(&n, &n, 80)],
        (Family::Ingress, Complex) => vec![
            service(&n, &n, 80, false),
            service(&format!("{n}-api"), &format!("{n}-api"), 8080, false),
            ingress(&n, &n, 80),
            ingress(&format!("{n}-api"), &format!("{n}-api"), 8080),
        ],
        (Family::NetworkPolicy, Simple) => vec![network_policy(&n, &n, 8080 + seq % 100, false)],
        (Family::NetworkPolicy, Medium) => vec![
            network_policy(&format!("{n}-deny"), &n, 0, true),
            network_policy(&n, &n, 8080 + seq % 100, false),
        ],
        (Family::NetworkPolicy, Complex) => vec![
            network_policy(&format!("{n}-deny"), &n, 0, true),
            network_policy(&n, &n, 8080 + seq % 100, false),
            network_policy(&format!("{n}-metrics"), &n, 9090, false),
            network_policy(&format!("{n}-db"), &format!("{n}-db"), 5432, false),
        ],
        (Family::Hpa, Simple | Medium) => vec![deployment(&n, seq), hpa(&n, "Deployment", &n, 3 + seq % 8)],
        (Family::Hpa, Complex) => vec![
            deployment(&n, seq),
            hpa(&n, "Deployment", &n, 3 + seq % 8),
            deployment(&format!("{n}-worker"), seq + 1),
            hpa(&format!("{n}-worker"), "Deployment", &format!("{n}-worker"), 5),
        ],
        (Family::ConfigmapSecret, Simple) => vec![configmap(&n, seq)],
        (Family::ConfigmapSecret, Medium) => vec![configmap(&n, seq), secret(&n, seq)],
        (Family::ConfigmapSecret, Complex) => vec![
            configmap(&n, seq),
            configmap(&format!("{n}-extra"), seq + 1),
            secret(&n, seq),
            secret(&format!("{n}-tls"), seq + 2),
        ],
        (Family::Composite, Simple) => vec![deployment(&n, seq), service(&n, &n, 80, false)],
        (Family::Composite, Medium) => vec![deployment(&n, seq), service(&n, &n, 80, false), ingress(&n, &n, 80)],
        (Family::Composite, Complex) => vec![
            configmap(&n, seq),
            deployment(&n, seq),
            service(&n, &n, 80, false),
            ingress(&n, &n, 80),
            hpa(&n, "Deployment", &n, 3 + seq % 8),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_from_id() {
        assert_eq!(MockTeacher::sequence("ingress-00042"), 42);
        assert_eq!(MockTeacher::sequence("x"), fnv1a("x"));
    }

    #[test]
    fn defects_follow_the_cycle() {
        let m = MockTeacher::new(10);
        let got: Vec<_> = (0..40).filter_map(|s| m.defect_for(s)).collect();
        assert_eq!(got, DefectKind::CYCLE.to_vec());
        assert_eq!(MockTeacher::new(0).defect_for(9), None);
    }
}
