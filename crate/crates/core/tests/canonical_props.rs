use std::collections::BTreeSet;

use kdistill_core::manifest::{canonicalize, content_hash, parse_package, structural_exact_match};
use proptest::prelude::*;
use serde_yaml::{Mapping, Value};

fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        (-100_000i64..100_000).prop_map(|n| Value::Number(n.into())),
        (-400i32..400).prop_map(|n| Value::Number((f64::from(n) / 4.0).into())),
        "[a-z][a-z0-9 ._/-]{0,10}".prop_map(Value::String),
        prop::sample::select(vec!["yes", "no", "on", "007", "1.5", "null", "~", "a: b", "x #y", "-", "", "true"])
            .prop_map(|s| Value::String(s.to_string())),
        Just(Value::Null),
    ]
}

fn tree() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Sequence),
            prop::collection::btree_map("[a-zA-Z_][a-zA-Z0-9_.-]{0,6}", inner, 0..5)
                .prop_map(|m| Value::Mapping(m.into_iter().map(|(k, v)| (Value::String(k), v)).collect())),
        ]
    })
}

fn document() -> impl Strategy<Value = Value> {
    (tree(), "[a-z]{1,8}").prop_map(|(body, name)| {
        let mut root = Mapping::new();
        root.insert("apiVersion".into(), "v1".into());
        root.insert("kind".into(), "ConfigMap".into());
        let mut meta = Mapping::new();
        meta.insert("name".into(), Value::String(name));
        root.insert("metadata".into(), Value::Mapping(meta));
        root.insert("data".into(), body);
        Value::Mapping(root)
    })
}

/// xorshift step used to drive key shuffles from a proptest seed.
fn next(state: &mut u64) -> u64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    *state
}

fn permute(value: &Value, state: &mut u64) -> Value {
    match value {
        Value::Mapping(m) => {
            let mut entries: Vec<(Value, Value)> = m.iter().map(|(k, v)| (k.clone(), permute(v, state))).collect();
            for i in (1..entries.len()).rev() {
                let j = (next(state) % (i as u64 + 1)) as usize;
                entries.swap(i, j);
            }
            Value::Mapping(entries.into_iter().collect())
        }
        Value::Sequence(s) => Value::Sequence(s.iter().map(|v| permute(v, state)).collect()),
        other => other.clone(),
    }
}

fn inject_comments(text: &str, state: &mut u64) -> String {
    let mut out = String::from("# generated variant\n");
    for line in text.lines() {
        out.push_str(line);
        if next(state) % 3 == 0 {
            out.push_str("  # trailing note");
        }
        out.push('\n');
        if next(state) % 5 == 0 {
            out.push_str("# interleaved comment\n");
        }
    }
    out
}

fn block_variant(doc: &Value, seed: u64) -> String {
    let mut state = seed | 1;
    let permuted = permute(doc, &mut state);
    inject_comments(&serde_yaml::to_string(&permuted).unwrap(), &mut state)
}

fn flow_variant(doc: &Value, seed: u64) -> String {
    let mut state = seed | 1;
    let permuted = permute(doc, &mut state);
    serde_json::to_string(&permuted).unwrap()
}

fn canon(text: &str) -> String {
    canonicalize(&parse_package(text).unwrap_or_else(|e| panic!("{e}\n{text}")))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn key_permutation_and_comments_do_not_change_canonical_bytes(doc in document(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let base = canon(&serde_yaml::to_string(&doc).unwrap());
        prop_assert_eq!(&canon(&block_variant(&doc, s1)), &base);
        prop_assert_eq!(&canon(&block_variant(&doc, s2)), &base);
    }

    #[test]
    fn flow_and_block_style_agree(doc in document(), seed in any::<u64>()) {
        prop_assert_eq!(canon(&flow_variant(&doc, seed)), canon(&block_variant(&doc, seed)));
    }

    #[test]
    fn canonicalization_is_idempotent(doc in document(), seed in any::<u64>()) {
        let once = canon(&block_variant(&doc, seed));
        prop_assert_eq!(canon(&once), once);
    }

    #[test]
    fn exact_match_is_an_equivalence(a in document(), b in document(), seed in any::<u64>()) {
        let a1 = block_variant(&a, seed);
        let a2 = flow_variant(&a, seed.wrapping_add(1));
        let b1 = block_variant(&b, seed);
        prop_assert!(structural_exact_match(&a1, &a1));
        prop_assert!(structural_exact_match(&a1, &a2));
        prop_assert!(structural_exact_match(&a2, &a1));
        prop_assert_eq!(structural_exact_match(&a1, &b1), structural_exact_match(&b1, &a1));
        // Transitivity on the triple (a1, a2, b1).
        if structural_exact_match(&a2, &b1) {
            prop_assert!(structural_exact_match(&a1, &b1));
        }
        prop_assert_eq!(structural_exact_match(&a1, &b1), canon(&a1) == canon(&b1));
    }

    #[test]
    fn multi_document_order_is_preserved(a in document(), b in document()) {
        let text = format!("{}---\n{}", serde_yaml::to_string(&a).unwrap(), serde_yaml::to_string(&b).unwrap());
        let joined = format!("{}---\n{}", canon(&serde_yaml::to_string(&a).unwrap()), canon(&serde_yaml::to_string(&b).unwrap()));
        prop_assert_eq!(canon(&text), joined);
    }
}

#[test]
fn content_hash_is_collision_free_on_distinct_texts() {
    let mut digests = BTreeSet::new();
    let mut canonical = BTreeSet::new();
    for i in 0..1500u32 {
        let text = format!(
            "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: cm-{}\n  labels:\n    shard: \"{}\"\ndata:\n  value: \"{}\"\n",
            i % 97,
            i % 13,
            i
        );
        let pkg = parse_package(&text).unwrap();
        canonical.insert(canonicalize(&pkg));
        digests.insert(content_hash(&pkg));
    }
    assert!(canonical.len() >= 1000);
    assert_eq!(digests.len(), canonical.len());
}

#[test]
fn content_hash_is_stable_and_style_independent() {
    let block = "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: a\n  labels: {x: '1', y: \"2\"}\n";
    let flow = "{kind: ConfigMap, metadata: {labels: {\"y\": '2', x: \"1\"}, name: a}, apiVersion: v1}";
    let h1 = content_hash(&parse_package(block).unwrap());
    let h2 = content_hash(&parse_package(flow).unwrap());
    assert_eq!(h1, h2);
    assert_eq!(h1.len(), 64);
    assert!(h1.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)));
    let changed = content_hash(&parse_package(&block.replace("'1'", "'3'")).unwrap());
    assert_ne!(h1, changed);
}
