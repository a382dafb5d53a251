use std::collections::HashMap;

use crate::manifest::{canonicalize, parse_package};

const MAX_ORDER: usize = 4;

fn is_punct(c: char) -> bool {
    matches!(c, ':' | '-' | '{' | '}' | '[' | ']' | ',')
}

/// Splits on whitespace and keeps YAML punctuation as single tokens.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() || is_punct(c) {
            if let Some(s) = start.take() {
                tokens.push(&text[s..i]);
            }
            if is_punct(c) {
                tokens.push(&text[i..i + c.len_utf8()]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(&text[s..]);
    }
    tokens
}

/// Canonical form when the text parses, otherwise the text itself.
fn normalized(text: &str) -> String {
    match parse_package(text) {
        Ok(pkg) => canonicalize(&pkg),
        Err(_) => text.to_string(),
    }
}

fn ngrams<'t>(tokens: &'t [&'t str], n: usize) -> HashMap<&'t [&'t str], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// BLEU-4 of pre-tokenized sequences with add-one smoothing for n > 1.
pub fn bleu_tokens(candidate: &[&str], reference: &[&str]) -> f64 {
    if candidate.is_empty() && reference.is_empty() {
        return 100.0;
    }
    let mut correct = [0f64; MAX_ORDER];
    let mut total = [0f64; MAX_ORDER];
    for n in 1..=MAX_ORDER {
        let cand = ngrams(candidate, n);
        let refs = ngrams(reference, n);
        total[n - 1] = candidate.len().saturating_sub(n - 1) as f64;
        correct[n - 1] = cand
            .iter()
            .map(|(g, c)| (*c).min(refs.get(g).copied().unwrap_or(0)) as f64)
            .sum();
    }
    if correct.iter().all(|c| *c == 0.0) {
        return 0.0;
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    let mut log_sum = 0.0;
    for n in 0..MAX_ORDER {
        let (m, t) = if n > 0 { (correct[n] + 1.0, total[n] + 1.0) } else { (correct[n], total[n]) };
        if m == 0.0 {
            return 0.0;
        }
        log_sum += (m / t).ln();
    }
    (100.0 * bp * (log_sum / MAX_ORDER as f64).exp()).clamp(0.0, 100.0)
}

/// Auxiliary text similarity in [0, 100] over canonicalized artifacts.
pub fn bleu_aux(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (normalized(candidate), normalized(reference));
    bleu_tokens(&tokenize(&c), &tokenize(&r))
}
