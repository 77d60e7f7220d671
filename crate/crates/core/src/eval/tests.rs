use proptest::prelude::*;

use super::*;
use crate::kg::{SparseAdjacency, Triple};

#[test]
fn rank_without_filter() {
    assert_eq!(rank_query(&[0.9, 0.5, 0.7], 1, None), 3.0);
}

#[test]
fn rank_with_filter() {
    let f: HashSet<usize> = [0].into();
    assert_eq!(rank_query(&[0.9, 0.5, 0.7], 1, Some(&f)), 2.0);
}

#[test]
fn ties_count_half() {
    assert_eq!(rank_query(&[0.5, 0.5, 0.1], 0, None), 1.5);
}

#[test]
fn filter_never_removes_true_tail() {
    let f: HashSet<usize> = [0, 1].into();
    assert_eq!(rank_query(&[0.1, 0.9, 0.5], 0, Some(&f)), 2.0);
}

#[test]
fn single_perfect_query() {
    let m = Metrics::from_ranks(&[1.0]).unwrap();
    assert_eq!((m.mrr, m.hits1, m.hits3, m.hits10, m.query_count), (1.0, 1.0, 1.0, 1.0, 1));
    assert_eq!(m.record(), "mrr=1.000000 hits1=1.000000 hits3=1.000000 hits10=1.000000 n=1");
}

#[test]
fn metrics_from_known_ranks() {
    let m = Metrics::from_ranks(&[1.0, 2.0, 4.0, 20.0]).unwrap();
    assert!((m.mrr - (1.0 + 0.5 + 0.25 + 0.05) / 4.0).abs() < 1e-15);
    assert_eq!((m.hits1, m.hits3, m.hits10), (0.25, 0.5, 0.75));
    assert!(Metrics::from_ranks(&[]).is_err());
}

fn chain_ops() -> OperatorSet {
    // identity, r1 = {a→b}, r2 = {b→c}, r3 = {a→b}
    OperatorSet::from_operators(
        3,
        vec![
            SparseAdjacency::identity(3),
            SparseAdjacency::from_coords(3, vec![(0, 1)]).unwrap(),
            SparseAdjacency::from_coords(3, vec![(1, 2)]).unwrap(),
            SparseAdjacency::from_coords(3, vec![(0, 1)]).unwrap(),
        ],
    )
    .unwrap()
}

#[test]
fn single_atom_rule_scores_its_edge() {
    let rules = RuleList::from_rules(vec![Rule::new(9, vec![1], 0.8)]);
    assert_eq!(apply_rules(&rules, &chain_ops(), 9, 0).unwrap(), vec![0.0, 0.8, 0.0]);
}

#[test]
fn rule_scores_add() {
    let ops = OperatorSet::from_operators(
        3,
        vec![
            SparseAdjacency::identity(3),
            SparseAdjacency::from_coords(3, vec![(0, 2)]).unwrap(),
            SparseAdjacency::from_coords(3, vec![(0, 1)]).unwrap(),
            SparseAdjacency::from_coords(3, vec![(1, 2)]).unwrap(),
        ],
    )
    .unwrap();
    let rules = RuleList::from_rules(vec![Rule::new(5, vec![1], 0.8), Rule::new(5, vec![2, 3], 0.5)]);
    let s = apply_rules(&rules, &ops, 5, 0).unwrap();
    assert!((s[2] - 1.3).abs() < 1e-15);
}

#[test]
fn out_of_range_rules_contribute_nothing() {
    let rules = RuleList::from_rules(vec![Rule::new(9, vec![1], 0.8), Rule::new(9, vec![7, 2], 0.5)]);
    assert_eq!(apply_rules(&rules, &chain_ops(), 9, 0).unwrap(), vec![0.0, 0.8, 0.0]);
}

#[test]
fn evaluate_rejects_empty_store() {
    let scorer = FnScorer::new(3, |_, _| vec![0.0; 3]);
    let empty = TripleStore::new(vec![], 3, 3).unwrap();
    let vocab = Vocabulary::new();
    assert!(evaluate(&scorer, &empty, &vocab, &FilterIndex::new(), EvalOptions::default()).is_err());
}

/// Independent ranking: sort candidates and locate the target's tie band.
fn oracle_rank(scores: &[f64], target: usize, known: &HashSet<usize>) -> f64 {
    let mut cand: Vec<f64> = (0..scores.len())
        .filter(|e| *e == target || !known.contains(e))
        .map(|e| scores[e])
        .collect();
    cand.sort_by(|a, b| b.total_cmp(a));
    let t = scores[target];
    let first = cand.iter().position(|s| *s == t).unwrap();
    let last = cand.iter().rposition(|s| *s == t).unwrap();
    (first + 1 + last + 1) as f64 / 2.0
}

proptest! {
    #[test]
    fn matches_bruteforce_oracle(
        n in 2usize..=15,
        raw in prop::collection::vec((0usize..15, 0usize..3, 0usize..15), 1..40),
        seed_scores in prop::collection::vec(0u8..6, 15 * 15 * 3),
    ) {
        let triples: Vec<Triple> = raw.iter().map(|(s, r, o)| Triple::new(s % n, *r, o % n)).collect();
        let store = TripleStore::new(triples, n, 3).unwrap();
        let filter = FilterIndex::from_stores([&store]);
        // Coarse scores force many ties.
        let score = |x: usize, h: usize| -> Vec<f64> {
            (0..n).map(|y| f64::from(seed_scores[(x * 15 + y) * 3 + h]) / 4.0).collect()
        };
        let scorer = FnScorer::new(n, score);
        let queries = queries_from_store(&store, &Vocabulary::new(), false);
        let got = evaluate_queries(&scorer, &queries, &filter, true).unwrap();
        let ranks: Vec<f64> = queries
            .iter()
            .map(|q| oracle_rank(&score(q.source, q.head), q.target, filter.tails(q.source, q.head).unwrap()))
            .collect();
        let expect = Metrics::from_ranks(&ranks).unwrap();
        prop_assert_eq!(got, expect);
        prop_assert!(got.hits1 <= got.hits3 && got.hits3 <= got.hits10 && got.mrr >= got.hits1);
    }

    #[test]
    fn filtering_never_raises_rank(
        scores in prop::collection::vec(0u8..5, 2..20),
        drop in prop::collection::vec(any::<bool>(), 20),
    ) {
        let target = 0;
        let filter: HashSet<usize> = (1..scores.len()).filter(|e| drop[*e]).collect();
        let s: Vec<f64> = scores.iter().map(|v| f64::from(*v)).collect();
        prop_assert!(rank_query(&s, target, Some(&filter)) <= rank_query(&s, target, None));
    }
}
