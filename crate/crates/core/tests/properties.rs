use std::collections::HashSet;
use std::sync::Arc;

use kgen_core::extraction::{dedup_key, extract_heads, Extractors, HeadForm};
use kgen_core::filter::{filter_graph, EmbeddingCosineScorer, FailurePolicy};
use kgen_core::knowledge::io::{parse_graph, serialize_graph, GraphFormat, ParseOptions};
use kgen_core::knowledge::{KnowledgeGraph, KnowledgeHead, KnowledgeTuple};
use kgen_core::matching::{
    match_relations, resplit_dataset, Embeddings, GroupLabels, HashingEmbedder, Matcher, MatcherDataset,
    MatcherExample, MatcherModel, ResplitConfig,
};
use kgen_core::metrics::{score_corpus, Metric, MetricParams};
use kgen_core::models::{DecodeConfig, KnowledgeModel, StubModel};
use kgen_core::relations::{build_few_shot_prompt, KnowledgeRelation, RelationGroup, RelationRegistry};
use kgen_core::text::content_tokens;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-d]{1,3}"
}

fn tuple() -> impl Strategy<Value = KnowledgeTuple> {
    (
        prop::collection::vec(word(), 1..3),
        prop::sample::select(vec!["xNeed", "AtLocation", "r"]),
        prop::collection::vec(word(), 0..3),
    )
        .prop_map(|(h, r, t)| KnowledgeTuple::from_parts(&h.join(" "), r, t).unwrap())
}

fn graph() -> impl Strategy<Value = KnowledgeGraph> {
    prop::collection::vec(tuple(), 0..12).prop_map(|v| v.into_iter().collect())
}

fn round_trip(g: &KnowledgeGraph, format: GraphFormat) -> KnowledgeGraph {
    let opts = ParseOptions::default();
    let mut buf = Vec::new();
    serialize_graph(g, format, &opts, &mut buf).unwrap();
    parse_graph(buf.as_slice(), format, &opts).unwrap()
}

proptest! {
    #[test]
    fn set_algebra_laws(a in graph(), b in graph()) {
        prop_assert!(a.union(&a).set_eq(&a));
        prop_assert!(a.intersection(&a).set_eq(&a));
        prop_assert!(a.difference(&a).is_empty());
        prop_assert!(a.intersection(&b).is_subset(&a));
        prop_assert!(a.is_subset(&a.union(&b)));
        for op in [a.union(&b), a.intersection(&b), a.difference(&b)] {
            let distinct: HashSet<&KnowledgeTuple> = op.iter().collect();
            prop_assert_eq!(distinct.len(), op.len());
        }
    }

    #[test]
    fn serialization_round_trips(g in graph()) {
        prop_assert_eq!(round_trip(&g, GraphFormat::Jsonl), g.clone());
        prop_assert_eq!(round_trip(&g, GraphFormat::Csv), g);
    }

    #[test]
    fn tuple_equality_ignores_tail_order(t in tuple(), seed in any::<u64>()) {
        let mut tails = t.tails.clone();
        if !tails.is_empty() {
            let k = (seed as usize) % tails.len();
            tails.rotate_left(k);
        }
        let u = KnowledgeTuple { tails, ..t.clone() };
        prop_assert_eq!(&t, &u);
        prop_assert_eq!(&u, &t);
    }

    #[test]
    fn prompts_are_deterministic_and_indexed(heads in prop::collection::vec(word(), 1..6)) {
        let rel = KnowledgeRelation::new("xWishes", RelationGroup::Custom)
            .with_template("Situation {index}: {head}. As a result, {subject} wishes")
            .with_instruction("How?");
        let samples: KnowledgeGraph = heads
            .iter()
            .map(|h| KnowledgeTuple::from_parts(h.as_str(), "xWishes", ["t"]).unwrap())
            .collect();
        let q = KnowledgeHead::new("query").unwrap();
        let p1 = build_few_shot_prompt(&rel, &samples, &q).unwrap();
        prop_assert_eq!(&p1, &build_few_shot_prompt(&rel, &samples, &q).unwrap());
        let lines: Vec<&str> = p1.lines().collect();
        prop_assert_eq!(lines.len(), heads.len() + 2);
        for (i, line) in lines[1..].iter().enumerate() {
            let prefix = format!("Situation {}: ", i + 1);
            prop_assert!(line.starts_with(&prefix));
        }
    }

    #[test]
    fn extraction_is_deduplicated_and_consistent(words in prop::collection::vec(
        prop::sample::select(vec!["PersonX", "buys", "a", "the", "red", "hammer", "uses", "big", "box", "runs", "quickly"]), 1..10)
    ) {
        let text = words.join(" ");
        let heads = extract_heads(&text, Extractors::ALL).unwrap();
        prop_assert_eq!(&heads, &extract_heads(&text, Extractors::ALL).unwrap());
        let keys: HashSet<String> = heads.iter().map(|h| dedup_key(h.head.text())).collect();
        prop_assert_eq!(keys.len(), heads.len());
        for h in &heads {
            match h.form {
                HeadForm::Sentence => prop_assert_eq!(h.head.text(), text.as_str()),
                // chunk heads are built from words of the sentence
                _ => for w in h.head.text().split_whitespace() {
                    prop_assert!(words.iter().any(|x| x.eq_ignore_ascii_case(w)) || h.form == HeadForm::VerbPhrase);
                },
            }
        }
        let np_only = extract_heads(&text, Extractors::only(HeadForm::NounPhrase)).unwrap();
        prop_assert!(np_only.iter().all(|h| h.form == HeadForm::NounPhrase));
    }

    #[test]
    fn match_output_is_valid(heads in prop::collection::vec(word(), 1..5), use_subset in any::<bool>()) {
        let reg = RelationRegistry::builtin();
        let heads: Vec<KnowledgeHead> = heads.iter().map(|h| KnowledgeHead::new(h).unwrap()).collect();
        let subset = vec!["xNeed".to_string(), "AtLocation".to_string()];
        for m in [Matcher::Base, Matcher::Heuristic] {
            let pairs = match_relations(&heads, &m, &reg, use_subset.then_some(subset.as_slice())).unwrap();
            let distinct: HashSet<_> = pairs.iter().collect();
            prop_assert_eq!(distinct.len(), pairs.len());
            for (_, r) in &pairs {
                prop_assert!(reg.contains(r));
                if use_subset {
                    prop_assert!(subset.contains(r));
                }
            }
        }
        for h in &heads {
            let groups: HashSet<RelationGroup> = match_relations(std::slice::from_ref(h), &Matcher::Heuristic, &reg, None)
                .unwrap()
                .iter()
                .map(|(_, r)| reg.group_of(r).unwrap())
                .collect();
            let physical: HashSet<_> = [RelationGroup::Physical].into();
            let other: HashSet<_> = [RelationGroup::Social, RelationGroup::Event].into();
            prop_assert!(groups == physical || groups == other);
        }
    }

    #[test]
    fn stub_generation_preserves_pairs(g in graph()) {
        let d = DecodeConfig::default();
        let once = StubModel.generate(&g.strip_tails(), &d).unwrap().graph;
        prop_assert_eq!(once.len(), g.len());
        for (a, b) in once.iter().zip(g.iter()) {
            prop_assert_eq!(&a.head, &b.head);
            prop_assert_eq!(&a.relation, &b.relation);
            prop_assert_eq!(a.tails.len(), 1);
        }
        prop_assert_eq!(StubModel.generate(&once, &d).unwrap().graph, once);
    }
}

/// Independent scan: (test word, train head) pairs where the word occurs in
/// more than `n` training heads.
fn violations(train: &MatcherDataset, test: &MatcherDataset, n: usize) -> usize {
    let train_sets: Vec<HashSet<String>> = train.iter().map(|e| content_tokens(&e.head).into_iter().collect()).collect();
    let mut bad = 0;
    for t in test.iter() {
        for w in content_tokens(&t.head) {
            if train_sets.iter().filter(|s| s.contains(&w)).count() > n {
                bad += 1;
            }
        }
    }
    bad
}

fn pool() -> impl Strategy<Value = MatcherDataset> {
    prop::collection::vec(
        (prop::collection::vec("[a-f]{1,2}", 1..4), 1u8..8),
        3..40,
    )
    .prop_map(|rows| {
        let mut seen = HashSet::new();
        let examples = rows
            .into_iter()
            .filter_map(|(words, mask)| {
                let head = words.join(" ");
                seen.insert(head.clone()).then(|| MatcherExample {
                    head,
                    labels: GroupLabels::from_array([mask & 1 != 0, mask & 2 != 0, mask & 4 != 0]),
                })
            })
            .collect();
        MatcherDataset::new(examples).unwrap()
    })
}

proptest! {
    #[test]
    fn resplit_never_violates_the_bound(p in pool(), n in 0usize..3, seed in any::<u64>()) {
        let cfg = ResplitConfig { n, seed, test_fraction: 0.3, ..ResplitConfig::default() };
        if let Ok((train, test)) = resplit_dataset(&p, &cfg) {
            prop_assert_eq!(violations(&train, &test, n), 0);
            prop_assert_eq!(train.len() + test.len(), p.len());
            let all: HashSet<&str> = train.iter().chain(test.iter()).map(|e| e.head.as_str()).collect();
            prop_assert_eq!(all.len(), p.len());
        }
    }

    #[test]
    fn pooled_prediction_ignores_token_order(words in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "zz"]), 1..6), k in 0usize..6) {
        let emb = Arc::new(Embeddings::read("a 1 0 0.5\nb 0 1 -1\nc 0.3 0.3 0.3\n".as_bytes(), None).unwrap());
        let model = MatcherModel::from_parts(emb, vec![0.5, -1.0, 2.0, 1.5, 0.1, -0.3, -2.0, 0.7, 1.1], [0.1, -0.2, 0.3], 0.5).unwrap();
        let mut shuffled = words.clone();
        let len = shuffled.len();
        shuffled.rotate_left(k % len);
        let p = model.predict_groups(&words.join(" "));
        prop_assert_eq!(p, model.predict_groups(&shuffled.join(" ")));
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn metrics_are_permutation_equivariant_and_bounded(
        items in prop::collection::vec((prop::collection::vec("[a-e]", 0..6), prop::collection::vec(prop::collection::vec("[a-e]", 1..6), 1..3)), 1..8),
        k in 0usize..8,
    ) {
        let cands: Vec<String> = items.iter().map(|(c, _)| c.join(" ")).collect();
        let refs: Vec<Vec<String>> = items.iter().map(|(_, rs)| rs.iter().map(|r| r.join(" ")).collect()).collect();
        let mut pc = cands.clone();
        let mut pr = refs.clone();
        let shift = k % cands.len();
        pc.rotate_left(shift);
        pr.rotate_left(shift);
        let p = MetricParams::default();
        for m in Metric::ALL {
            let a = score_corpus(m, &cands, &refs, &p).unwrap();
            prop_assert_eq!(a, score_corpus(m, &pc, &pr, &p).unwrap(), "{}", m);
            let hi = if m == Metric::Cider { 10.0 } else { 1.0 };
            prop_assert!((0.0..=hi).contains(&a), "{} = {}", m, a);
        }
        // an exact-match pair scores 1 under ROUGE-L, so it cannot lower the mean
        let mut c2 = cands.clone();
        let mut r2 = refs.clone();
        c2.push("x y z".into());
        r2.push(vec!["x y z".into()]);
        prop_assert!(score_corpus(Metric::RougeL, &c2, &r2, &p).unwrap() >= score_corpus(Metric::RougeL, &cands, &refs, &p).unwrap());
    }

    #[test]
    fn filter_is_monotone_in_threshold(g in graph(), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, seed in any::<u64>()) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let scorer = EmbeddingCosineScorer::new(Arc::new(HashingEmbedder::new(16, seed)), Arc::new(RelationRegistry::builtin()));
        let ctx = "a b c d";
        let a = filter_graph(&g, ctx, lo, &scorer, FailurePolicy::Open).unwrap();
        let b = filter_graph(&g, ctx, hi, &scorer, FailurePolicy::Open).unwrap();
        prop_assert!(b.kept.is_subset(&a.kept));
        prop_assert_eq!(a.judgments.len(), g.len());
        // kept tuples appear in input order
        let kept: Vec<&KnowledgeTuple> = a.judgments.iter().filter(|j| j.keep).map(|j| &j.tuple).collect();
        prop_assert_eq!(kept, a.kept.iter().collect::<Vec<_>>());
        for j in &a.judgments {
            if let Some(s) = j.score {
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
