//! Distribution diagnostics comparing a corpus with a reference slice.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::manifest::{parse_package, strip_llm_wrapping};

/// Category label to probability.
pub type Distribution = BTreeMap<String, f64>;

pub const DEFAULT_THETA: f64 = 0.02;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub gvk_dist: Distribution,
    pub family_dist: Distribution,
    /// Keys are `KindA+KindB` with the kinds sorted.
    pub cooccurrence_dist: Distribution,
    pub complexity_dist: Distribution,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DivergenceError {
    #[error("distribution is empty")]
    Empty,
    #[error("probability for {0:?} is negative or not finite")]
    InvalidProbability(String),
    #[error("probabilities sum to {0}, not 1")]
    Unnormalized(f64),
    #[error("threshold {0} is outside (0, 1)")]
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("record {0:?} does not parse as a manifest package")]
pub struct UnparsableRecord(pub String);

fn normalize(counts: BTreeMap<String, usize>) -> Distribution {
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect()
}

pub fn feature_vector(corpus: &Corpus) -> Result<FeatureVector, UnparsableRecord> {
    let mut gvk = BTreeMap::new();
    let mut family = BTreeMap::new();
    let mut pairs = BTreeMap::new();
    let mut complexity = BTreeMap::new();
    for r in &corpus.records {
        let text = strip_llm_wrapping(&r.yaml).map_err(|_| UnparsableRecord(r.id.clone()))?;
        let pkg = parse_package(&text).map_err(|_| UnparsableRecord(r.id.clone()))?;
        for doc in pkg.iter() {
            *gvk.entry(doc.gvk().to_string()).or_insert(0) += 1;
        }
        let kinds: BTreeSet<&str> = pkg.iter().map(|d| d.kind()).collect();
        let kinds: Vec<&str> = kinds.into_iter().collect();
        for (i, a) in kinds.iter().enumerate() {
            for b in &kinds[i + 1..] {
                *pairs.entry(format!("{a}+{b}")).or_insert(0) += 1;
            }
        }
        *family.entry(r.family.tag().to_string()).or_insert(0) += 1;
        *complexity.entry(r.complexity.tag().to_string()).or_insert(0) += 1;
    }
    Ok(FeatureVector {
        gvk_dist: normalize(gvk),
        family_dist: normalize(family),
        cooccurrence_dist: normalize(pairs),
        complexity_dist: normalize(complexity),
    })
}

fn check(p: &Distribution) -> Result<(), DivergenceError> {
    if p.is_empty() {
        return Err(DivergenceError::Empty);
    }
    if let Some((k, _)) = p.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(DivergenceError::InvalidProbability(k.clone()));
    }
    let sum: f64 = p.values().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(DivergenceError::Unnormalized(sum));
    }
    Ok(())
}

fn support<'a>(p: &'a Distribution, q: &'a Distribution) -> BTreeSet<&'a str> {
    p.keys().chain(q.keys()).map(String::as_str).collect()
}

fn at(p: &Distribution, k: &str) -> f64 {
    p.get(k).copied().unwrap_or(0.0)
}

/// No label carries mass on both sides; both measures are then exactly 1.
fn disjoint(p: &Distribution, q: &Distribution) -> bool {
    support(p, q).into_iter().all(|k| at(p, k) == 0.0 || at(q, k) == 0.0)
}

/// Base-2 Jensen-Shannon divergence over the union of supports.
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64, DivergenceError> {
    check(p)?;
    check(q)?;
    if disjoint(p, q) {
        return Ok(1.0);
    }
    let keys = support(p, q);
    let kl_half = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    let mut sum = 0.0;
    for k in keys {
        let (a, b) = (at(p, k), at(q, k));
        let m = (a + b) / 2.0;
        sum += kl_half(a, m) + kl_half(b, m);
    }
    Ok((sum / 2.0).clamp(0.0, 1.0))
}

/// Total variation distance, half the L1 norm of the difference.
pub fn tvd(p: &Distribution, q: &Distribution) -> Result<f64, DivergenceError> {
    check(p)?;
    check(q)?;
    if disjoint(p, q) {
        return Ok(1.0);
    }
    let sum: f64 = support(p, q).into_iter().map(|k| (at(p, k) - at(q, k)).abs()).sum();
    Ok((sum / 2.0).clamp(0.0, 1.0))
}

/// Share of rare reference GVKs (0 < probability < θ) that the corpus
/// contains at all. 1 when the reference has no rare class.
pub fn rare_class_coverage(corpus: &FeatureVector, reference: &FeatureVector, theta: f64) -> Result<f64, DivergenceError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(DivergenceError::Threshold(theta));
    }
    let rare: Vec<&String> = reference
        .gvk_dist
        .iter()
        .filter(|(_, p)| **p > 0.0 && **p < theta)
        .map(|(k, _)| k)
        .collect();
    if rare.is_empty() {
        return Ok(1.0);
    }
    let covered = rare.iter().filter(|k| at(&corpus.gvk_dist, k) > 0.0).count();
    Ok(covered as f64 / rare.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub jsd: f64,
    pub tvd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Per distribution; `None` when either side is empty.
    pub gvk: Option<Divergence>,
    pub family: Option<Divergence>,
    pub cooccurrence: Option<Divergence>,
    pub complexity: Option<Divergence>,
    pub theta: f64,
    pub rare_class_coverage: f64,
}

fn divergence(p: &Distribution, q: &Distribution) -> Result<Option<Divergence>, DivergenceError> {
    if p.is_empty() || q.is_empty() {
        return Ok(None);
    }
    Ok(Some(Divergence {
        jsd: jsd(p, q)?,
        tvd: tvd(p, q)?,
    }))
}

pub fn drift_report(corpus: &FeatureVector, reference: &FeatureVector, theta: f64) -> Result<DriftReport, DivergenceError> {
    Ok(DriftReport {
        gvk: divergence(&corpus.gvk_dist, &reference.gvk_dist)?,
        family: divergence(&corpus.family_dist, &reference.family_dist)?,
        cooccurrence: divergence(&corpus.cooccurrence_dist, &reference.cooccurrence_dist)?,
        complexity: divergence(&corpus.complexity_dist, &reference.complexity_dist)?,
        theta,
        rare_class_coverage: rare_class_coverage(corpus, reference, theta)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> Distribution {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn hand_cases() {
        let p = dist(&[("a", 1.0)]);
        let q = dist(&[("a", 0.5), ("b", 0.5)]);
        assert_eq!(tvd(&p, &q).unwrap(), 0.5);
        assert_eq!(jsd(&p, &dist(&[("b", 1.0)])).unwrap(), 1.0);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(jsd(&dist(&[("a", 0.7)]), &dist(&[("a", 1.0)])), Err(DivergenceError::Unnormalized(0.7)));
        assert_eq!(tvd(&Distribution::new(), &dist(&[("a", 1.0)])), Err(DivergenceError::Empty));
        assert!(matches!(
            jsd(&dist(&[("a", -0.5), ("b", 1.5)]), &dist(&[("a", 1.0)])),
            Err(DivergenceError::InvalidProbability(_))
        ));
    }

    #[test]
    fn coverage_counts_rare_classes() {
        let reference = FeatureVector {
            gvk_dist: dist(&[("a", 0.97), ("b", 0.01), ("c", 0.01), ("d", 0.01)]),
            ..Default::default()
        };
        let corpus = FeatureVector {
            gvk_dist: dist(&[("a", 0.5), ("b", 0.5)]),
            ..Default::default()
        };
        assert!((rare_class_coverage(&corpus, &reference, DEFAULT_THETA).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rare_class_coverage(&corpus, &corpus, DEFAULT_THETA).unwrap(), 1.0);
        assert!(rare_class_coverage(&corpus, &reference, 0.0).is_err());
    }
}
