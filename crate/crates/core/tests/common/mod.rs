//! Independent oracles shared by the property tests and the acceptance
//! suite. None of them call into the code paths they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use drum_core::kg::{augment_relations, OperatorSet, Triple, TripleStore, Vocabulary};
use drum_core::model::CoefficientTensor;
use drum_core::rules::{RawPath, Rule};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random augmented KG with `n` entities and `r` raw relations.
pub struct RandomKg {
    pub vocab: Vocabulary,
    pub store: TripleStore,
    pub ops: OperatorSet,
}

pub fn random_kg(rng: &mut impl Rng, n: usize, r: usize, edges: usize) -> RandomKg {
    let mut raw = Vocabulary::new();
    for e in 0..n {
        raw.intern_entity(&format!("e{e}"));
    }
    for k in 0..r {
        raw.intern_relation(&format!("r{k}")).unwrap();
    }
    let triples: Vec<Triple> = (0..edges)
        .map(|_| Triple::new(rng.random_range(0..n), rng.random_range(0..r), rng.random_range(0..n)))
        .collect();
    let raw_store = TripleStore::new(triples, n, r).unwrap();
    let (store, vocab) = augment_relations(&raw_store, &raw).unwrap();
    let ops = OperatorSet::from_store(&store, &vocab).unwrap();
    RandomKg { vocab, store, ops }
}

/// Number of walks from `x` that follow `path` edge by edge, per end
/// entity. Operator 0 stays in place.
pub fn walk_counts(store: &TripleStore, n: usize, path: &[usize], x: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    fn go(store: &TripleStore, path: &[usize], at: usize, counts: &mut [f64]) {
        let Some((&op, rest)) = path.split_first() else {
            counts[at] += 1.0;
            return;
        };
        if op == 0 {
            go(store, rest, at, counts);
            return;
        }
        for t in store.triples() {
            if t.relation == op && t.subject == at {
                go(store, rest, t.object, counts);
            }
        }
    }
    go(store, path, x, &mut counts);
    counts
}

/// Rank-L tensor whose rank j is one-hot on `paths[j]`.
pub fn one_hot_tensor(paths: &[Vec<usize>], operators: usize) -> CoefficientTensor {
    let steps = paths[0].len();
    let mut c = CoefficientTensor::zeros(paths.len(), steps, operators);
    for (j, p) in paths.iter().enumerate() {
        for (i, k) in p.iter().enumerate() {
            c.set(j, i, *k, 1.0);
        }
    }
    c
}

/// Filtered rank with mean tie policy, by explicit counting.
pub fn brute_rank(scores: &[f64], target: usize, known: &HashSet<usize>) -> f64 {
    let t = scores[target];
    let mut above = 0usize;
    let mut tied = 0usize;
    for (e, s) in scores.iter().enumerate() {
        if e != target && known.contains(&e) {
            continue;
        }
        if *s > t {
            above += 1;
        } else if *s == t {
            tied += 1;
        }
    }
    above as f64 + (tied as f64 + 1.0) / 2.0
}

/// (MRR, Hits@1, Hits@3, Hits@10) of a rank list.
pub fn brute_metrics(ranks: &[f64]) -> (f64, f64, f64, f64) {
    let n = ranks.len() as f64;
    let hits = |k: f64| ranks.iter().filter(|r| **r <= k).count() as f64 / n;
    (ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n, hits(1.0), hits(3.0), hits(10.0))
}

/// Random rule list for one head: distinct non-empty bodies over
/// operators `1..k`, length ≤ `t`, confidences in (0, 1].
pub fn random_rules(rng: &mut impl Rng, head: usize, k: usize, t: usize, count: usize) -> Vec<Rule> {
    let mut bodies = BTreeMap::new();
    let mut tries = 0;
    while bodies.len() < count && tries < count * 20 {
        tries += 1;
        let len = rng.random_range(1..=t);
        let body: Vec<usize> = (0..len).map(|_| rng.random_range(1..k)).collect();
        let conf = 1.0 - rng.random::<f64>();
        bodies.entry(body).or_insert(conf);
    }
    let mut rules: Vec<Rule> = bodies.into_iter().map(|(b, c)| Rule::new(head, b, c)).collect();
    rules.shuffle(rng);
    rules
}

/// Random rank-1 tensor with positive, normalised steps.
pub fn random_rank1(rng: &mut impl Rng, t: usize, k: usize) -> CoefficientTensor {
    let mut c = CoefficientTensor::zeros(1, t, k);
    for i in 0..t {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let sum: f64 = raw.iter().sum();
        for (kk, v) in raw.iter().enumerate() {
            c.set(0, i, kk, v / sum);
        }
    }
    c
}

fn confidence(c: &CoefficientTensor, path: &[usize]) -> f64 {
    path.iter().enumerate().map(|(i, k)| c.get(0, i, *k)).product()
}

fn hamming(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Checks the three chain conditions. Returns a description of the first
/// violation.
pub fn check_chain(c: &CoefficientTensor, o: &[usize], s: &[usize], chain: &[RawPath]) -> Result<(), String> {
    let mut seq: Vec<&[usize]> = vec![o];
    seq.extend(chain.iter().map(|p| p.ops.as_slice()));
    seq.push(s);
    if o == s {
        return if chain.is_empty() { Ok(()) } else { Err("chain between equal rules".into()) };
    }
    for w in seq.windows(2) {
        if hamming(w[0], w[1]) != 1 {
            return Err(format!("{:?} -> {:?} is not a unit step", w[0], w[1]));
        }
    }
    let floor = confidence(c, o).min(confidence(c, s));
    for p in chain {
        let expect = confidence(c, &p.ops);
        if p.confidence != expect {
            return Err(format!("{:?} reports {} but has {expect}", p.ops, p.confidence));
        }
        if p.confidence < floor {
            return Err(format!("{:?} has confidence {} < {floor}", p.ops, p.confidence));
        }
    }
    if hamming(o, s) > chain.len() + 1 {
        return Err(format!("distance {} exceeds chain length {} + 1", hamming(o, s), chain.len()));
    }
    Ok(())
}
