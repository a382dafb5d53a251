use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Complexity, GenerationError, GenerationTask, Stream};
use crate::context::{ContextModel, Family};
use crate::validate::semantic::{R1_SERVICE_SELECTOR, R2_HPA_TARGET};

/// Bumped whenever prompt wording changes.
pub const TEMPLATE_VERSION: &str = "kdistill-prompts/1";

pub const SYSTEM_PROMPT: &str = "You are an assistant that writes Kubernetes manifests.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    #[default]
    Std,
    Strict,
}

impl PromptStyle {
    pub fn tag(self) -> &'static str {
        match self {
            PromptStyle::Std => "std",
            PromptStyle::Strict => "strict",
        }
    }
}

impl std::str::FromStr for PromptStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "std" | "standard" => Ok(PromptStyle::Std),
            "strict" => Ok(PromptStyle::Strict),
            other => Err(format!("unknown prompt style {other:?}")),
        }
    }
}

fn size_hint(c: Complexity) -> &'static str {
    match c {
        Complexity::Simple => "a single document",
        Complexity::Medium => "two or three related documents",
        Complexity::Complex => "four or more related documents",
    }
}

/// The task description used as the instruction of a direct pair.
pub fn render_instruction(task: &GenerationTask) -> String {
    let mut out = format!(
        "Write Kubernetes {} manifests for a {} {} setup ({}).",
        task.kubernetes_version,
        task.complexity,
        task.family.label(),
        size_hint(task.complexity)
    );
    for c in &task.constraints {
        out.push(' ');
        out.push_str(c.trim_end_matches('.'));
        out.push('.');
    }
    out
}

pub fn build_direct_prompt(task: &GenerationTask, style: PromptStyle) -> Result<String, GenerationError> {
    if task.stream != Stream::SyntheticDirect {
        return Err(GenerationError::WrongStream(task.id.clone(), Stream::SyntheticDirect));
    }
    let mut p = String::new();
    let _ = writeln!(p, "Task: {}", render_instruction(task));
    let _ = writeln!(p, "Resource family: {}", task.family.label());
    let _ = writeln!(p, "Kubernetes schema version: {}", task.kubernetes_version);
    let _ = writeln!(p, "Package size: {}", size_hint(task.complexity));
    if !task.constraints.is_empty() {
        p.push_str("Constraints:\n");
        for c in &task.constraints {
            let _ = writeln!(p, "- {c}");
        }
    }
    p.push_str(
        "Security: no privileged containers, no host network/PID/IPC, no hostPath volumes, \
         no SYS_ADMIN or NET_ADMIN capabilities, no cluster-admin for default service accounts.\n",
    );
    p.push_str("Return only YAML without Markdown code blocks or explanations.\n");
    if style == PromptStyle::Strict {
        p.push_str(
            "Strict output rules: no explanations outside YAML, no comments, no code fences. \
             Separate documents with a line containing only ---. Every document must set apiVersion and kind, \
             and use only fields defined by the Kubernetes schema.\n",
        );
    }
    Ok(p)
}

pub fn build_reverse_prompt(task: &GenerationTask) -> Result<String, GenerationError> {
    if task.stream != Stream::RealReverse {
        return Err(GenerationError::WrongStream(task.id.clone(), Stream::RealReverse));
    }
    let source = task.source_yaml.as_deref().unwrap_or_default();
    let pkg = crate::validate::validate_l1(source).map_err(|d| GenerationError::InvalidSource {
        task: task.id.clone(),
        detail: d.message,
    })?;
    let mut p = String::new();
    let _ = writeln!(
        p,
        "The following Kubernetes {} package has {} document(s).",
        task.kubernetes_version,
        pkg.len()
    );
    p.push_str("Write one natural-language instruction that a user could give to obtain exactly this package.\n");
    p.push_str("Reply with the instruction only: a single paragraph, no YAML, no code blocks.\n\n");
    p.push_str(source);
    if !source.ends_with('\n') {
        p.push('\n');
    }
    Ok(p)
}

fn family_rules(family: Family) -> Vec<(&'static str, &'static str)> {
    let kinds: Vec<String> = family.gvks().into_iter().map(|g| g.kind).collect();
    let mut out = Vec::new();
    if kinds.iter().any(|k| k == "Service") {
        out.push((R1_SERVICE_SELECTOR, "Service selectors must match the pod template labels of a workload"));
    }
    if kinds.iter().any(|k| k == "HorizontalPodAutoscaler") {
        out.push((R2_HPA_TARGET, "HorizontalPodAutoscaler scaleTargetRef must name a workload in the same package"));
    }
    out
}

/// The context-model slice attached to a pair as `c`.
pub fn build_context_fragment(task: &GenerationTask, cm: &ContextModel) -> Result<String, GenerationError> {
    let gvks = cm.family_gvks(task.family);
    if gvks.is_empty() {
        return Err(GenerationError::FamilyNotInContext(task.family));
    }
    let mut out = String::new();
    let _ = writeln!(out, "kubernetes: {}", cm.kubernetes_version());
    let _ = writeln!(out, "family: {}", task.family.label());
    out.push_str("allowed:\n");
    for gvk in gvks {
        let _ = writeln!(out, "  - {gvk}");
    }
    let comps = cm.family_compositions(task.family);
    if !comps.is_empty() {
        out.push_str("compositions:\n");
        for c in comps {
            let _ = writeln!(out, "  - {}: {}", c.name, c.render());
        }
    }
    let rules: Vec<_> = family_rules(task.family)
        .into_iter()
        .filter(|(id, _)| cm.rule_enabled(id))
        .collect();
    if !rules.is_empty() {
        out.push_str("rules:\n");
        for (id, text) in rules {
            let _ = writeln!(out, "  - {id}: {text}");
        }
    }
    let _ = writeln!(out, "policies: {}", cm.critical_policies().join(", "));
    if !task.constraints.is_empty() {
        out.push_str("constraints:\n");
        for c in &task.constraints {
            let _ = writeln!(out, "  - {c}");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_prompt_embeds_family_version_and_clause() {
        let t = GenerationTask::direct("t1", Family::Ingress, Complexity::Simple, "1.30.0");
        let p = build_direct_prompt(&t, PromptStyle::Std).unwrap();
        assert!(p.contains("Ingress"));
        assert!(p.contains("1.30.0"));
        assert!(p.contains("Return only YAML without Markdown"));
        assert!(!p.contains("no explanations outside YAML"));
        assert_eq!(p, build_direct_prompt(&t, PromptStyle::Std).unwrap());
    }

    #[test]
    fn strict_prompt_adds_rules() {
        let t = GenerationTask::direct("t1", Family::Hpa, Complexity::Complex, "1.30.0");
        let p = build_direct_prompt(&t, PromptStyle::Strict).unwrap();
        assert!(p.contains("no explanations outside YAML"));
    }

    #[test]
    fn reverse_prompt_embeds_source() {
        let src = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: a\n---\napiVersion: v1\nkind: Secret\nmetadata:\n  name: b\n";
        let t = GenerationTask::reverse("r1", Family::ConfigmapSecret, src, "1.30.0").unwrap();
        let p = build_reverse_prompt(&t).unwrap();
        assert!(p.contains(t.source_yaml.as_deref().unwrap()));
        assert!(p.contains("2 document(s)"));
        assert!(p.contains("one natural-language instruction"));
    }

    #[test]
    fn reverse_prompt_rejects_broken_source() {
        let mut t = GenerationTask::direct("r2", Family::Rbac, Complexity::Simple, "1.30.0");
        t.stream = Stream::RealReverse;
        t.source_yaml = Some("kind: [".into());
        assert!(matches!(build_reverse_prompt(&t), Err(GenerationError::InvalidSource { .. })));
    }

    #[test]
    fn wrong_stream_is_rejected() {
        let t = GenerationTask::direct("t", Family::Rbac, Complexity::Simple, "1.30.0");
        assert!(build_reverse_prompt(&t).is_err());
    }
}
