use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Corpus, CorpusRecord};

/// SplitMix64 (Steele, Lea, Flood 2014), the shuffle PRNG.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// In-place Fisher-Yates: for i from n-1 down to 1, swap i with
    /// `next_u64() % (i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub stratified: bool,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train_size + self.validation_size + self.test_size
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("split sizes must all be positive (train {0}, validation {1}, test {2})")]
    NonPositive(usize, usize, usize),
    #[error("split needs {requested} records but the corpus has {available}")]
    Infeasible { requested: usize, available: usize },
    #[error("record id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("record {0:?} has no canonical digest")]
    MissingDigest(String),
    #[error("canonical digest {digest} is shared by {first:?} and {second:?}; deduplicate first")]
    DuplicateDigest { digest: String, first: String, second: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
    /// Records beyond the three requested sizes.
    pub pool: Corpus,
    pub test_freeze_marker: String,
}

/// Digest of an id list, insensitive to line order.
pub fn freeze_marker<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    hex::encode(Sha256::digest(ids.join("\n").as_bytes()))
}

fn check_unique(records: &[CorpusRecord]) -> Result<(), SplitError> {
    let mut ids = BTreeSet::new();
    let mut digests: BTreeMap<&str, &str> = BTreeMap::new();
    for r in records {
        if !ids.insert(r.id.as_str()) {
            return Err(SplitError::DuplicateId(r.id.clone()));
        }
        let digest = r.digest.as_deref().ok_or_else(|| SplitError::MissingDigest(r.id.clone()))?;
        if let Some(first) = digests.insert(digest, &r.id) {
            return Err(SplitError::DuplicateDigest {
                digest: digest.to_string(),
                first: first.to_string(),
                second: r.id.clone(),
            });
        }
    }
    Ok(())
}

/// Orders records so that every prefix holds each family in roughly its
/// corpus proportion: shuffle within families, then merge by relative rank.
fn stratified_order(records: Vec<CorpusRecord>, rng: &mut SplitMix64) -> Vec<CorpusRecord> {
    let mut groups: BTreeMap<_, Vec<CorpusRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.family).or_default().push(r);
    }
    let mut keyed = Vec::new();
    for (gi, (_, mut group)) in groups.into_iter().enumerate() {
        rng.shuffle(&mut group);
        let n = group.len() as u128;
        for (rank, r) in group.into_iter().enumerate() {
            // Position (rank + 1/2) / n compared exactly as a fraction.
            keyed.push(((2 * rank as u128 + 1), 2 * n, gi, r));
        }
    }
    keyed.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)).then(a.2.cmp(&b.2)));
    keyed.into_iter().map(|(_, _, _, r)| r).collect()
}

/// Deterministic split: records sorted by id, shuffled with SplitMix64 seeded
/// by `spec.seed`, then sliced into train, validation, test and pool.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Splits, SplitError> {
    if spec.train_size == 0 || spec.validation_size == 0 || spec.test_size == 0 {
        return Err(SplitError::NonPositive(spec.train_size, spec.validation_size, spec.test_size));
    }
    if spec.total() > corpus.records.len() {
        return Err(SplitError::Infeasible {
            requested: spec.total(),
            available: corpus.records.len(),
        });
    }
    check_unique(&corpus.records)?;

    let mut records = corpus.records.clone();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = SplitMix64::new(spec.seed);
    let ordered = if spec.stratified {
        stratified_order(records, &mut rng)
    } else {
        rng.shuffle(&mut records);
        records
    };

    let mut it = ordered.into_iter();
    let mut take = |n: usize| -> Vec<CorpusRecord> { it.by_ref().take(n).collect() };
    let train = take(spec.train_size);
    let validation = take(spec.validation_size);
    let test = take(spec.test_size);
    let pool = take(usize::MAX);
    let marker = freeze_marker(test.iter().map(|r| r.id.as_str()));
    let part = |records| Corpus {
        provenance: corpus.provenance.clone(),
        records,
    };
    Ok(Splits {
        train: part(train),
        validation: part(validation),
        test: part(test),
        pool: part(pool),
        test_freeze_marker: marker,
    })
}
