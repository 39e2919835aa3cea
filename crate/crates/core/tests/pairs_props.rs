use std::collections::{BTreeMap, BTreeSet};

use legalnli::corpus::{Dataset, NliExample};
use legalnli::exec::Execution;
use legalnli::pairs::{build_corpus_pairs, build_corpus_pairs_with, PairSet};
use legalnli::prompt::{canonical_completion, parse_label, render_prompt, MatchRule, PromptTemplate};
use legalnli::{Label, Strategy as Rejection};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = Dataset> {
    prop::collection::vec(prop::sample::select(Label::ALL.to_vec()), 1..60).prop_map(|labels| {
        let examples = labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| NliExample::new(format!("ex{i:03}"), format!("premise {i}"), format!("hypothesis {i}"), l))
            .collect();
        Dataset::new("d", examples).unwrap()
    })
}

fn strategy() -> impl Strategy<Value = Rejection> {
    prop::sample::select(vec![
        Rejection::RandomRejection,
        Rejection::PreferredRejection,
        Rejection::MultipleRejections,
    ])
}

fn rejected_by_example(p: &PairSet) -> BTreeMap<String, BTreeSet<Label>> {
    let mut out: BTreeMap<String, BTreeSet<Label>> = BTreeMap::new();
    for pair in p.pairs() {
        out.entry(pair.example_id.clone()).or_default().insert(pair.rejected_label().unwrap());
    }
    out
}

proptest! {
    #[test]
    fn rejected_never_equals_gold(d in dataset(), s in strategy(), seed in any::<u64>()) {
        let t = PromptTemplate::default();
        let pairs = build_corpus_pairs(&d, s, seed, &t).unwrap();
        for pair in pairs.pairs() {
            let gold = d.get(&pair.example_id).unwrap().label;
            prop_assert_eq!(pair.chosen_label(), Some(gold));
            prop_assert_ne!(pair.rejected_label(), Some(gold));
            prop_assert_eq!(pair.chosen.as_str(), canonical_completion(gold, &t));
            prop_assert_eq!(&pair.prompt, &render_prompt(d.get(&pair.example_id).unwrap(), &t).unwrap());
        }
        prop_assert_eq!(pairs.len(), d.len() * s.pairs_per_example());
    }

    #[test]
    fn preferred_rejects_neutral_for_non_neutral_gold(d in dataset(), seed in any::<u64>()) {
        let pairs = build_corpus_pairs(&d, Rejection::PreferredRejection, seed, &PromptTemplate::default()).unwrap();
        for pair in pairs.pairs() {
            let gold = d.get(&pair.example_id).unwrap().label;
            if gold != Label::Neutral {
                prop_assert_eq!(pair.rejected_label(), Some(Label::Neutral));
            } else {
                prop_assert!(matches!(pair.rejected_label(), Some(Label::Entailed | Label::Contradict)));
            }
        }
    }

    #[test]
    fn multiple_rejects_exactly_the_complement(d in dataset(), seed in any::<u64>()) {
        let pairs = build_corpus_pairs(&d, Rejection::MultipleRejections, seed, &PromptTemplate::default()).unwrap();
        let by_example = rejected_by_example(&pairs);
        prop_assert_eq!(by_example.len(), d.len());
        for e in &d {
            let expected: BTreeSet<Label> = e.label.others().into_iter().collect();
            prop_assert_eq!(&by_example[&e.id], &expected);
        }
        prop_assert!(pairs.groups().iter().all(|g| g.len() == 2));
    }

    #[test]
    fn serialization_is_deterministic(d in dataset(), s in strategy(), seed in any::<u64>()) {
        let t = PromptTemplate::default();
        let a = build_corpus_pairs_with(Execution::Sequential, &d, s, seed, &t).unwrap();
        let b = build_corpus_pairs_with(Execution::Parallel, &d, s, seed, &t).unwrap();
        prop_assert_eq!(a.to_jsonl_string(), b.to_jsonl_string());
        prop_assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn pair_files_round_trip(d in dataset(), s in strategy(), seed in any::<u64>()) {
        let t = PromptTemplate::default();
        let pairs = build_corpus_pairs(&d, s, seed, &t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        pairs.write_jsonl(&path).unwrap();
        let back = PairSet::read_jsonl(&path, &t).unwrap();
        prop_assert_eq!(back.to_jsonl_string(), pairs.to_jsonl_string());
        prop_assert_eq!(back.strategy(), s);
    }

    #[test]
    fn canonical_completions_parse_exactly(words in prop::collection::vec("[a-z]{2,8}", 3)) {
        let vocab: BTreeMap<Label, String> = Label::ALL.iter().copied().zip(words.iter().cloned()).collect();
        let Ok(t) = PromptTemplate::new("t", "{premise} / {hypothesis}", vocab) else {
            return Ok(());
        };
        for l in Label::ALL {
            let parsed = parse_label(canonical_completion(l, &t), &t);
            prop_assert_eq!(parsed.label, Some(l));
            prop_assert_eq!(parsed.confidence_rule, MatchRule::ExactMatch);
        }
    }

    #[test]
    fn parse_label_is_total(generation in any::<String>()) {
        let t = PromptTemplate::default();
        let parsed = parse_label(&generation, &t);
        prop_assert_eq!(parsed.label.is_none(), parsed.confidence_rule == MatchRule::NoMatch);
        if let Some(span) = &parsed.matched_span {
            prop_assert!(generation.to_lowercase().contains(&span.to_lowercase()) || generation.contains(span.as_str()));
        }
    }

    #[test]
    fn substring_ties_follow_offset_then_label_order(prefix in "[a-z ]{0,10}", suffix in "[a-z ]{0,10}") {
        let t = PromptTemplate::default();
        let g = format!("{prefix} neutral then entailed {suffix}");
        let parsed = parse_label(&g, &t);
        prop_assert_eq!(parsed.label, Some(Label::Neutral));
        prop_assert_eq!(parsed.confidence_rule, MatchRule::SubstringMatch);
    }
}

#[test]
fn random_rejection_is_balanced_for_fixed_seed() {
    let examples = (0..10_000)
        .map(|i| NliExample::new(format!("e{i:05}"), format!("p{i}"), format!("h{i}"), Label::Entailed))
        .collect();
    let d = Dataset::new("balanced", examples).unwrap();
    let pairs = build_corpus_pairs(&d, Rejection::RandomRejection, 1024, &PromptTemplate::default()).unwrap();
    let neutral = pairs
        .pairs()
        .iter()
        .filter(|p| p.rejected_label() == Some(Label::Neutral))
        .count();
    // 6 sigma of Binomial(10000, 0.5) is 300
    assert!((4700..=5300).contains(&neutral), "neutral rejections: {neutral}");
}
