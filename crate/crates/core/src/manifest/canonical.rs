//! Canonical YAML rendering.
//!
//! Canonical form: comments dropped, mapping keys sorted by code point at
//! every depth, sequence order kept, block style with 2-space indentation,
//! normalized scalars, documents joined by a bare `---` line, and exactly one
//! trailing newline.

use serde_yaml::{Mapping, Number, Value};
use sha2::{Digest, Sha256};

use super::{parse_package, ManifestPackage};

pub fn canonicalize(pkg: &ManifestPackage) -> String {
    let docs: Vec<String> = pkg.iter().map(|d| canonicalize_value(d.tree())).collect();
    let mut out = docs.join("---\n");
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

/// Renders a single YAML tree in canonical form (with trailing newline).
pub fn canonicalize_value(value: &Value) -> String {
    let mut out = String::new();
    match value {
        Value::Mapping(m) if !m.is_empty() => write_mapping(m, 0, &mut out),
        Value::Sequence(s) if !s.is_empty() => write_sequence(s, 0, &mut out),
        scalar => {
            out.push_str(&inline_value(scalar));
            out.push('\n');
        }
    }
    out
}

/// True iff both texts parse and render to identical canonical bytes.
pub fn structural_exact_match(a: &str, b: &str) -> bool {
    match (parse_package(a), parse_package(b)) {
        (Ok(pa), Ok(pb)) => canonicalize(&pa) == canonicalize(&pb),
        _ => false,
    }
}

/// SHA-256 of the canonical text, lowercase hex.
pub fn content_hash(pkg: &ManifestPackage) -> String {
    hex::encode(Sha256::digest(canonicalize(pkg).as_bytes()))
}

fn unwrap_tag(value: &Value) -> &Value {
    match value {
        Value::Tagged(t) => unwrap_tag(&t.value),
        other => other,
    }
}

fn sorted_entries(map: &Mapping) -> Vec<(String, String, &Value)> {
    let mut entries: Vec<(String, String, &Value)> = map
        .iter()
        .map(|(k, v)| {
            let k = unwrap_tag(k);
            let sort_key = match k {
                Value::String(s) => s.clone(),
                other => scalar_text(other),
            };
            (sort_key, render_key(k), v)
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    entries
}

fn render_key(key: &Value) -> String {
    match key {
        Value::String(s) => render_string(s),
        Value::Sequence(_) | Value::Mapping(_) => {
            // Parsing rejects these; render something stable regardless.
            render_string(&serde_json::to_string(&key).unwrap_or_default())
        }
        other => scalar_text(other),
    }
}

fn indent(out: &mut String, n: usize) {
    out.extend(std::iter::repeat_n(' ', n));
}

fn write_mapping(map: &Mapping, depth: usize, out: &mut String) {
    for (_, key, value) in sorted_entries(map) {
        indent(out, depth);
        out.push_str(&key);
        out.push(':');
        write_child(value, depth, out);
    }
}

fn write_child(value: &Value, depth: usize, out: &mut String) {
    match unwrap_tag(value) {
        Value::Mapping(m) if !m.is_empty() => {
            out.push('\n');
            write_mapping(m, depth + 2, out);
        }
        Value::Sequence(s) if !s.is_empty() => {
            out.push('\n');
            write_sequence(s, depth + 2, out);
        }
        scalar => {
            out.push(' ');
            out.push_str(&inline_value(scalar));
            out.push('\n');
        }
    }
}

fn write_sequence(items: &[Value], depth: usize, out: &mut String) {
    for item in items {
        indent(out, depth);
        out.push('-');
        match unwrap_tag(item) {
            Value::Mapping(m) if !m.is_empty() => {
                // First entry shares the dash line; the rest align under it.
                let mut nested = String::new();
                write_mapping(m, depth + 2, &mut nested);
                out.push(' ');
                out.push_str(&nested[depth + 2..]);
            }
            Value::Sequence(s) if !s.is_empty() => {
                out.push('\n');
                write_sequence(s, depth + 2, out);
            }
            scalar => {
                out.push(' ');
                out.push_str(&inline_value(scalar));
                out.push('\n');
            }
        }
    }
}

fn inline_value(value: &Value) -> String {
    match unwrap_tag(value) {
        Value::Mapping(_) => "{}".to_string(),
        Value::Sequence(_) => "[]".to_string(),
        Value::String(s) => render_string(s),
        other => scalar_text(other),
    }
}

fn scalar_text(value: &Value) -> String {
    match value {
        Value::Null => "null".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => render_number(n),
        Value::String(s) => s.clone(),
        Value::Tagged(t) => scalar_text(&t.value),
        Value::Sequence(_) | Value::Mapping(_) => String::new(),
    }
}

fn render_number(n: &Number) -> String {
    if let Some(i) = n.as_i64() {
        return i.to_string();
    }
    if let Some(u) = n.as_u64() {
        return u.to_string();
    }
    let f = n.as_f64().unwrap_or(f64::NAN);
    if f.is_nan() {
        ".nan".to_string()
    } else if f.is_infinite() {
        if f > 0.0 { ".inf" } else { "-.inf" }.to_string()
    } else {
        let mut s = format!("{f:?}");
        if !s.contains(['.', 'e', 'E']) {
            s.push_str(".0");
        }
        s
    }
}

fn render_string(s: &str) -> String {
    if needs_quotes(s) {
        serde_json::to_string(s).expect("strings always serialize")
    } else {
        s.to_string()
    }
}

const YAML11_SPECIALS: &[&str] = &[
    "y", "Y", "yes", "Yes", "YES", "n", "N", "no", "No", "NO", "on", "On", "ON", "off", "Off", "OFF", "true", "True",
    "TRUE", "false", "False", "FALSE", "null", "Null", "NULL", "~", "=", "<<",
];

fn looks_numeric(s: &str) -> bool {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let body = body.strip_prefix('.').unwrap_or(body);
    body.starts_with(|c: char| c.is_ascii_digit())
        && body
            .chars()
            .all(|c| c.is_ascii_hexdigit() || matches!(c, '.' | '_' | ':' | '+' | '-' | 'x' | 'o' | 'X' | 'O'))
        || matches!(body.to_ascii_lowercase().as_str(), "inf" | "nan")
}

/// Whether a string must be double-quoted to survive a parse round trip
/// unchanged (and unambiguously under YAML 1.1 readers).
fn needs_quotes(s: &str) -> bool {
    if s.is_empty() || YAML11_SPECIALS.contains(&s) || looks_numeric(s) {
        return true;
    }
    if s.starts_with([' ', '\t']) || s.ends_with([' ', '\t']) {
        return true;
    }
    if s.chars().any(|c| c.is_control() || c == '\u{feff}' || c == '\u{2028}' || c == '\u{2029}' || c == '\u{85}') {
        return true;
    }
    let mut chars = s.chars();
    let first = chars.next().expect("non-empty");
    let second = chars.next();
    match first {
        '[' | ']' | '{' | '}' | ',' | '#' | '&' | '*' | '!' | '|' | '>' | '\'' | '"' | '%' | '@' | '`' => {
            return true
        }
        '-' | '?' | ':' if second.is_none_or(|c| c == ' ') => return true,
        _ => {}
    }
    if s == "---" || s == "..." || s.starts_with("--- ") || s.starts_with("... ") {
        return true;
    }
    if s.contains(": ") || s.contains(" #") || s.ends_with(':') {
        return true;
    }
    // Last line of defence: anything the parser would read differently.
    !matches!(serde_yaml::from_str::<Value>(&format!("k: {s}")), Ok(Value::Mapping(m)) if m.get("k").and_then(Value::as_str) == Some(s))
}
