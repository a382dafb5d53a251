mod support;

use kdistill_core::manifest::{canonicalize, parse_package};
use kdistill_core::metrics::{bleu_aux, bleu_tokens, tokenize};
use proptest::prelude::*;
use support::bleu_pairs::PAIRS;

#[test]
fn oracle_pairs_are_canonical() {
    for (c, r, _) in PAIRS {
        assert_eq!(canonicalize(&parse_package(c).unwrap()), c);
        assert_eq!(canonicalize(&parse_package(r).unwrap()), r);
    }
}

#[test]
fn agrees_with_reference_scorer() {
    for (c, r, expected) in PAIRS {
        let got = bleu_aux(c, r);
        assert!((got - expected).abs() < 0.1, "got {got}, expected {expected}");
    }
}

#[test]
fn style_does_not_change_the_score() {
    let (c, r, expected) = PAIRS[2];
    let restyled = "kind: Service\napiVersion: v1 # svc\nmetadata: {name: web}\nspec:\n  selector: {app: web}\n  ports: [{targetPort: 8080, port: 80}]\n";
    assert_eq!(bleu_aux(restyled, r), bleu_aux(c, r));
    assert!((bleu_aux(restyled, r) - expected).abs() < 0.1);
}

#[test]
fn identity_is_100_and_disjoint_is_0() {
    for (c, r, _) in PAIRS {
        assert_eq!(bleu_aux(c, c), 100.0);
        assert_eq!(bleu_aux(r, r), 100.0);
    }
    assert_eq!(bleu_aux("alpha beta gamma", "delta epsilon"), 0.0);
}

#[test]
fn short_candidates_are_penalized() {
    let r = PAIRS[1].1;
    let head: String = r.lines().take(3).map(|l| format!("{l}\n")).collect();
    assert!(bleu_aux(&head, r) < bleu_aux(r, r));
}

proptest! {
    #[test]
    fn score_is_bounded(a in "[a-c :\\-\\n]{0,40}", b in "[a-c :\\-\\n]{0,40}") {
        let s = bleu_tokens(&tokenize(&a), &tokenize(&b));
        prop_assert!((0.0..=100.0).contains(&s));
        if !tokenize(&a).is_empty() {
            prop_assert_eq!(bleu_tokens(&tokenize(&a), &tokenize(&a)), 100.0);
        }
    }
}
