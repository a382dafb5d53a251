/// Separator inserted between bodies pulled from several fenced blocks.
pub const DOCUMENT_SEPARATOR: &str = "\n---\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("model output is empty after stripping")]
pub struct EmptyOutput;

/// Removes Markdown code fences from a model reply.
///
/// With fences present the result is the concatenation of every fenced body,
/// joined by `---` lines; anything outside fences is discarded. Without
/// fences the trimmed input is returned unchanged.
pub fn strip_llm_wrapping(text: &str) -> Result<String, EmptyOutput> {
    const FENCE: &str = "```";
    if !text.contains(FENCE) {
        let trimmed = text.trim();
        return if trimmed.is_empty() {
            Err(EmptyOutput)
        } else {
            Ok(trimmed.to_string())
        };
    }

    let mut bodies = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find(FENCE) {
        let after_open = &rest[open + FENCE.len()..];
        // The info string ("yaml", "yml", ...) runs to the end of the line,
        // unless the block closes on the same line.
        let line_end = after_open.find('\n').unwrap_or(after_open.len());
        let body_start = match after_open.find(FENCE) {
            Some(close) if close < line_end => 0,
            _ => (line_end + 1).min(after_open.len()),
        };
        let body_region = &after_open[body_start..];
        let (body, remainder) = match body_region.find(FENCE) {
            Some(close) => (&body_region[..close], &body_region[close + FENCE.len()..]),
            None => (body_region, ""),
        };
        let body = body.trim_matches(['\n', '\r']).trim_end();
        if !body.trim().is_empty() {
            bodies.push(body.to_string());
        }
        rest = remainder;
    }

    let joined = bodies.join(DOCUMENT_SEPARATOR);
    let trimmed = joined.trim();
    if trimmed.is_empty() {
        Err(EmptyOutput)
    } else {
        Ok(trimmed.to_string())
    }
}
