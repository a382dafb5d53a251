use std::fmt;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use super::{GroupVersionKind, ManifestDocument, ManifestPackage};

/// Why a text failed to parse as a manifest package. Each variant maps onto
/// one L1 reason code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntaxReason {
    BadIndent,
    BadEscape,
    ProseOutsideYaml,
    NonMappingRoot,
    MissingApiversionKind,
    DuplicateKey,
    Empty,
    /// Any other YAML error (unterminated flow collection, bad anchor, ...).
    Syntax,
}

impl SyntaxReason {
    pub fn code(self) -> &'static str {
        match self {
            Self::BadIndent => "bad-indent",
            Self::BadEscape => "bad-escape",
            Self::ProseOutsideYaml => "prose-outside-yaml",
            Self::NonMappingRoot => "non-mapping-root",
            Self::MissingApiversionKind => "missing-apiversion-kind",
            Self::DuplicateKey => "duplicate-key",
            Self::Empty => "empty",
            Self::Syntax => "syntax",
        }
    }

    pub const ALL: [SyntaxReason; 8] = [
        Self::BadIndent,
        Self::BadEscape,
        Self::ProseOutsideYaml,
        Self::NonMappingRoot,
        Self::MissingApiversionKind,
        Self::DuplicateKey,
        Self::Empty,
        Self::Syntax,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    pub reason: SyntaxReason,
    /// 1-based position in the original text, when known.
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Zero-based document index, when the failure is attributable to one.
    pub document: Option<usize>,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.reason.code())?;
        if let (Some(line), Some(col)) = (self.line, self.column) {
            write!(f, " at line {line} column {col}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl SyntaxError {
    fn new(reason: SyntaxReason, message: impl Into<String>) -> Self {
        Self {
            reason,
            line: None,
            column: None,
            document: None,
            message: message.into(),
        }
    }

    fn at(mut self, line: usize, column: usize) -> Self {
        self.line = Some(line);
        self.column = Some(column);
        self
    }

    fn in_document(mut self, index: usize) -> Self {
        self.document = Some(index);
        self
    }
}

/// A slice of the source between document separators.
struct Chunk<'a> {
    text: &'a str,
    /// 1-based line number of the chunk's first line in the source.
    first_line: usize,
}

fn is_separator(line: &str) -> bool {
    let Some(rest) = line.strip_prefix("---") else {
        return false;
    };
    let rest = rest.trim();
    rest.is_empty() || rest.starts_with('#')
}

fn is_document_end(line: &str) -> bool {
    line.trim_end() == "..."
}

fn split_documents(text: &str) -> Vec<Chunk<'_>> {
    let mut chunks = Vec::new();
    let mut start = 0usize;
    let mut first_line = 1usize;
    let mut offset = 0usize;
    for (idx, line) in text.split_inclusive('\n').enumerate() {
        let bare = line.trim_end_matches(['\n', '\r']);
        if is_separator(bare) {
            chunks.push(Chunk {
                text: &text[start..offset],
                first_line,
            });
            start = offset + line.len();
            first_line = idx + 2;
        }
        offset += line.len();
    }
    chunks.push(Chunk {
        text: &text[start..],
        first_line,
    });
    chunks
}

/// True when `line` (already known to start at column 0) is a `key:` entry
/// with a key that could plausibly be a Kubernetes field.
fn is_key_line(line: &str) -> bool {
    let bytes = line.as_bytes();
    let after_key = match bytes.first() {
        Some(b'"') | Some(b'\'') => {
            let quote = bytes[0];
            let mut i = 1;
            let mut end = None;
            while i < bytes.len() {
                if bytes[i] == b'\\' && quote == b'"' {
                    i += 2;
                    continue;
                }
                if bytes[i] == quote {
                    end = Some(i + 1);
                    break;
                }
                i += 1;
            }
            match end {
                Some(e) => line[e..].trim_start(),
                None => return false,
            }
        }
        _ => {
            let Some(pos) = find_mapping_colon(line) else {
                return false;
            };
            let key = &line[..pos];
            if key.trim_end().chars().any(char::is_whitespace) {
                return false;
            }
            &line[pos..]
        }
    };
    let Some(rest) = after_key.strip_prefix(':') else {
        return false;
    };
    rest.is_empty() || rest.starts_with([' ', '\t'])
}

fn find_mapping_colon(line: &str) -> Option<usize> {
    let bytes = line.as_bytes();
    (0..bytes.len()).find(|&i| bytes[i] == b':' && (i + 1 == bytes.len() || bytes[i + 1] == b' ' || bytes[i + 1] == b'\t'))
}

/// Detects natural-language lines sitting at the top level of the text,
/// e.g. "Here is your manifest:" or a trailing explanation.
fn find_prose(text: &str) -> Option<(usize, String)> {
    for (idx, line) in text.lines().enumerate() {
        let bare = line.trim_end();
        if bare.is_empty() || bare.starts_with([' ', '\t']) {
            continue;
        }
        if bare.starts_with("```") {
            return Some((idx + 1, bare.to_string()));
        }
        if bare.starts_with(['#', '%', '-', '{', '}', '[', ']', '&', '*', '!', '|', '>'])
            || is_document_end(bare)
        {
            continue;
        }
        if is_key_line(bare) {
            continue;
        }
        // A single bare token is a scalar document, not prose; the root-type
        // check reports it.
        if bare.split_whitespace().count() >= 2 {
            return Some((idx + 1, bare.to_string()));
        }
    }
    None
}

fn find_tab_indent(text: &str) -> Option<(usize, usize)> {
    for (idx, line) in text.lines().enumerate() {
        for (col, ch) in line.chars().enumerate() {
            match ch {
                ' ' => continue,
                '\t' => {
                    // Tabs are legal as separators after content; only leading
                    // whitespace counts as indentation.
                    return Some((idx + 1, col + 1));
                }
                _ => break,
            }
        }
    }
    None
}

fn classify_yaml_error(message: &str) -> SyntaxReason {
    let lower = message.to_ascii_lowercase();
    if lower.contains("duplicate entry") || lower.contains("duplicate key") {
        SyntaxReason::DuplicateKey
    } else if lower.contains("escape") {
        SyntaxReason::BadEscape
    } else if lower.contains("tab")
        || lower.contains("indent")
        || lower.contains("did not find expected key")
        || lower.contains("mapping values are not allowed")
        || lower.contains("block sequence entries are not allowed")
        || lower.contains("could not find expected ':'")
        || lower.contains("did not find expected '-' indicator")
    {
        SyntaxReason::BadIndent
    } else {
        SyntaxReason::Syntax
    }
}

/// Drops tags and rejects non-scalar keys. Merge keys are applied beforehand.
fn normalize_tree(value: Value) -> Result<Value, String> {
    match value {
        Value::Tagged(tagged) => normalize_tree(tagged.value),
        Value::Sequence(items) => items
            .into_iter()
            .map(normalize_tree)
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Sequence),
        Value::Mapping(map) => {
            let mut out = serde_yaml::Mapping::with_capacity(map.len());
            for (k, v) in map {
                let key = match k {
                    Value::Tagged(t) => t.value,
                    other => other,
                };
                if matches!(key, Value::Sequence(_) | Value::Mapping(_) | Value::Tagged(_)) {
                    return Err("mapping keys must be scalars".to_string());
                }
                out.insert(key, normalize_tree(v)?);
            }
            Ok(Value::Mapping(out))
        }
        scalar => Ok(scalar),
    }
}

fn scalar_text(value: Option<&Value>) -> Option<&str> {
    value.and_then(Value::as_str).filter(|s| !s.trim().is_empty())
}

/// Parses a possibly multi-document manifest text.
///
/// Documents are split on standalone `---` lines; empty documents are dropped.
/// Anchors, aliases and merge keys are resolved.
pub fn parse_package(text: &str) -> Result<ManifestPackage, SyntaxError> {
    if text.trim().is_empty() {
        return Err(SyntaxError::new(SyntaxReason::Empty, "input is empty"));
    }
    if let Some((line, col)) = find_tab_indent(text) {
        return Err(SyntaxError::new(SyntaxReason::BadIndent, "tab character used for indentation").at(line, col));
    }
    if let Some((line, content)) = find_prose(text) {
        let excerpt: String = content.chars().take(60).collect();
        return Err(SyntaxError::new(
            SyntaxReason::ProseOutsideYaml,
            format!("text outside YAML structure: {excerpt:?}"),
        )
        .at(line, 1));
    }

    let mut documents = Vec::new();
    for chunk in split_documents(text) {
        let index = documents.len();
        let chunk_text: String = chunk
            .text
            .lines()
            .map(|l| if is_document_end(l) { "" } else { l })
            .collect::<Vec<_>>()
            .join("\n");
        let parsed: Value = match serde_yaml::from_str(&chunk_text) {
            Ok(v) => v,
            Err(err) => {
                let reason = classify_yaml_error(&err.to_string());
                let mut e = SyntaxError::new(reason, strip_location(&err.to_string())).in_document(index);
                if let Some(loc) = err.location() {
                    e = e.at(loc.line() + chunk.first_line - 1, loc.column());
                } else {
                    e.line = Some(chunk.first_line);
                }
                return Err(e);
            }
        };
        if parsed.is_null() {
            continue;
        }
        let mut merged = parsed;
        if let Err(err) = merged.apply_merge() {
            return Err(SyntaxError::new(SyntaxReason::Syntax, err.to_string())
                .in_document(index)
                .at(chunk.first_line, 1));
        }
        let tree = normalize_tree(merged).map_err(|msg| {
            SyntaxError::new(SyntaxReason::Syntax, msg).in_document(index).at(chunk.first_line, 1)
        })?;
        let Some(root) = tree.as_mapping() else {
            return Err(SyntaxError::new(
                SyntaxReason::NonMappingRoot,
                format!("document root is {}, expected a mapping", value_kind(&tree)),
            )
            .in_document(index)
            .at(chunk.first_line, 1));
        };
        let api_version = scalar_text(root.get("apiVersion"));
        let kind = scalar_text(root.get("kind"));
        let gvk = match (api_version, kind) {
            (Some(a), Some(k)) => GroupVersionKind::from_api_version(a.trim(), k.trim()),
            _ => None,
        };
        let Some(gvk) = gvk else {
            return Err(SyntaxError::new(
                SyntaxReason::MissingApiversionKind,
                "apiVersion and kind must be present non-empty strings",
            )
            .in_document(index)
            .at(chunk.first_line, 1));
        };
        documents.push(ManifestDocument::new(chunk.text.trim().to_string(), tree, gvk));
    }

    if documents.is_empty() {
        return Err(SyntaxError::new(SyntaxReason::Empty, "no non-empty documents"));
    }
    Ok(ManifestPackage::new(documents))
}

fn value_kind(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Sequence(_) => "a sequence",
        Value::Mapping(_) => "a mapping",
        Value::Tagged(_) => "a tagged value",
    }
}

fn strip_location(message: &str) -> String {
    match message.find(" at line ") {
        Some(pos) => message[..pos].to_string(),
        None => message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIGMAP: &str = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: a";

    fn reason(text: &str) -> SyntaxReason {
        parse_package(text).expect_err("should fail").reason
    }

    #[test]
    fn minimal_document() {
        let pkg = parse_package(CONFIGMAP).unwrap();
        assert_eq!(pkg.len(), 1);
        let doc = &pkg.documents()[0];
        assert_eq!(doc.gvk(), &GroupVersionKind::new("", "v1", "ConfigMap"));
        assert_eq!(doc.name(), "a");
        assert_eq!(doc.namespace(), None);
        assert_eq!(doc.effective_namespace(), "default");
    }

    #[test]
    fn multi_document_order_preserved() {
        let text = format!("{CONFIGMAP}\n---\napiVersion: v1\nkind: Secret\nmetadata:\n  name: b\n");
        let pkg = parse_package(&text).unwrap();
        let kinds: Vec<_> = pkg.iter().map(|d| d.kind().to_string()).collect();
        assert_eq!(kinds, ["ConfigMap", "Secret"]);
    }

    #[test]
    fn stray_separators_are_dropped() {
        let text = format!("---\n---\n{CONFIGMAP}\n---\n# trailing comment\n---\n");
        assert_eq!(parse_package(&text).unwrap().len(), 1);
        assert_eq!(reason("---\n---\n"), SyntaxReason::Empty);
    }

    #[test]
    fn empty_input() {
        assert_eq!(reason("   \n\n"), SyntaxReason::Empty);
        assert_eq!(reason("# only a comment\n"), SyntaxReason::Empty);
    }

    #[test]
    fn leading_prose_is_rejected() {
        let err = parse_package(&format!("Here is your YAML:\n{CONFIGMAP}")).unwrap_err();
        assert_eq!(err.reason, SyntaxReason::ProseOutsideYaml);
        assert_eq!(err.line, Some(1));
        assert_eq!(reason(&format!("Sure! Here's the manifest.\n{CONFIGMAP}")), SyntaxReason::ProseOutsideYaml);
    }

    #[test]
    fn trailing_prose_is_rejected() {
        let err = parse_package(&format!("{CONFIGMAP}\nThis creates a ConfigMap named a.")).unwrap_err();
        assert_eq!(err.reason, SyntaxReason::ProseOutsideYaml);
        assert_eq!(err.line, Some(5));
    }

    #[test]
    fn markdown_fence_is_prose() {
        assert_eq!(reason(&format!("```yaml\n{CONFIGMAP}\n```")), SyntaxReason::ProseOutsideYaml);
    }

    #[test]
    fn tab_indentation() {
        let err = parse_package("apiVersion: v1\nkind: ConfigMap\nmetadata:\n\tname: a").unwrap_err();
        assert_eq!(err.reason, SyntaxReason::BadIndent);
        assert_eq!((err.line, err.column), (Some(4), Some(1)));
    }

    #[test]
    fn space_indentation_errors() {
        let text = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: a\n   labels: x\n";
        assert_eq!(reason(text), SyntaxReason::BadIndent);
    }

    #[test]
    fn bad_escape() {
        let text = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: a\ndata:\n  k: \"bad \\q escape\"\n";
        let err = parse_package(text).unwrap_err();
        assert_eq!(err.reason, SyntaxReason::BadEscape);
        assert_eq!(err.line, Some(6));
    }

    #[test]
    fn error_lines_are_offset_per_document() {
        let text = format!("{CONFIGMAP}\n---\napiVersion: v1\nkind: Secret\ndata:\n  k: \"\\q\"\n");
        let err = parse_package(&text).unwrap_err();
        assert_eq!(err.reason, SyntaxReason::BadEscape);
        assert_eq!(err.document, Some(1));
        assert_eq!(err.line, Some(9));
    }

    #[test]
    fn non_mapping_roots() {
        assert_eq!(reason("- a\n- b\n"), SyntaxReason::NonMappingRoot);
        assert_eq!(reason("apiVersion:v1"), SyntaxReason::NonMappingRoot);
    }

    #[test]
    fn missing_identity() {
        assert_eq!(reason("kind: ConfigMap\nmetadata:\n  name: a\n"), SyntaxReason::MissingApiversionKind);
        assert_eq!(reason("apiVersion: v1\nmetadata:\n  name: a\n"), SyntaxReason::MissingApiversionKind);
        assert_eq!(reason("apiVersion: v1\nkind: [a]\n"), SyntaxReason::MissingApiversionKind);
        assert_eq!(reason("apiVersion: v1\nkind: \"\"\n"), SyntaxReason::MissingApiversionKind);
    }

    #[test]
    fn duplicate_keys_fail() {
        let text = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: a\n  name: b\n";
        assert_eq!(reason(text), SyntaxReason::DuplicateKey);
    }

    #[test]
    fn unterminated_flow_is_generic_syntax() {
        assert_eq!(reason("apiVersion: v1\nkind: ConfigMap\ndata: {a: 1\n"), SyntaxReason::Syntax);
    }

    #[test]
    fn anchors_and_merge_keys_resolve() {
        let text = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: a\n  labels: &l\n    app: web\n  annotations:\n    <<: *l\n    extra: x\n";
        let pkg = parse_package(text).unwrap();
        let ann = pkg.documents()[0].lookup(&["metadata", "annotations"]).unwrap();
        assert_eq!(ann.get("app").and_then(Value::as_str), Some("web"));
        assert!(ann.get("<<").is_none());
    }

    #[test]
    fn flow_style_document() {
        let pkg = parse_package("{apiVersion: v1, kind: ConfigMap,\nmetadata: {name: a}}").unwrap();
        assert_eq!(pkg.documents()[0].name(), "a");
    }

    #[test]
    fn namespace_and_group() {
        let text = "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  name: web\n  namespace: prod\n";
        let pkg = parse_package(text).unwrap();
        let d = &pkg.documents()[0];
        assert_eq!(d.gvk().group, "apps");
        assert_eq!(d.effective_namespace(), "prod");
    }

    #[test]
    fn key_line_detection() {
        assert!(is_key_line("apiVersion: v1"));
        assert!(is_key_line("metadata:"));
        assert!(is_key_line("\"quoted key\": 1"));
        assert!(!is_key_line("Here is your YAML:"));
        assert!(!is_key_line("This creates a ConfigMap."));
        assert!(!is_key_line("image:nginx"));
    }
}
