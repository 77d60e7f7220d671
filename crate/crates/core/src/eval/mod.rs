//! Filtered link-prediction ranking and rule-based inference.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Mutex;

use crate::diffgraph::{mix_spmv_t, Tensor};
use crate::error::{Error, Result};
use crate::kg::{OperatorSet, RelationKind, TripleStore, Vocabulary};
use crate::model::{score_with_coefficients, CoefficientTensor, DrumModel, Query};
use crate::parallel;
use crate::rules::{Rule, RuleList};

/// Sources scored together in one dense block.
const BLOCK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub query_count: usize,
}

impl Metrics {
    pub fn from_ranks(ranks: &[f64]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Argument("no queries to evaluate".into()));
        }
        let n = ranks.len() as f64;
        let frac = |k: f64| ranks.iter().filter(|r| **r <= k).count() as f64 / n;
        Ok(Self {
            mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
            hits1: frac(1.0),
            hits3: frac(3.0),
            hits10: frac(10.0),
            query_count: ranks.len(),
        })
    }

    /// `mrr=… hits1=… hits3=… hits10=… n=…`
    pub fn record(&self) -> String {
        format!(
            "mrr={:.6} hits1={:.6} hits3={:.6} hits10={:.6} n={}",
            self.mrr, self.hits1, self.hits3, self.hits10, self.query_count
        )
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "queries   {}", self.query_count)?;
        writeln!(f, "MRR       {:.4}", self.mrr)?;
        writeln!(f, "Hits@1    {:.4}", self.hits1)?;
        writeln!(f, "Hits@3    {:.4}", self.hits3)?;
        write!(f, "Hits@10   {:.4}", self.hits10)
    }
}

/// Known true tails for each `(source, head)` pair.
#[derive(Clone, Debug, Default)]
pub struct FilterIndex {
    tails: HashMap<(usize, usize), HashSet<usize>>,
}

impl FilterIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_stores<'s>(stores: impl IntoIterator<Item = &'s TripleStore>) -> Self {
        let mut index = Self::new();
        for s in stores {
            index.extend(s);
        }
        index
    }

    pub fn extend(&mut self, store: &TripleStore) {
        for t in store.triples() {
            self.tails
                .entry((t.subject, t.relation))
                .or_default()
                .insert(t.object);
        }
    }

    pub fn tails(&self, source: usize, head: usize) -> Option<&HashSet<usize>> {
        self.tails.get(&(source, head))
    }

    pub fn contains(&self, source: usize, head: usize, tail: usize) -> bool {
        self.tails(source, head).is_some_and(|t| t.contains(&tail))
    }
}

/// Rank of `true_tail` among entities not in `filter`, counting ties as
/// half: `1 + #greater + #ties / 2`. The true tail is never filtered.
pub fn rank_query(scores: &[f64], true_tail: usize, filter: Option<&HashSet<usize>>) -> f64 {
    let target = scores[true_tail];
    if target.is_nan() {
        return scores.len() as f64;
    }
    let mut greater = 0usize;
    let mut ties = 0usize;
    for (e, s) in scores.iter().enumerate() {
        if e == true_tail || filter.is_some_and(|f| f.contains(&e)) {
            continue;
        }
        if *s > target {
            greater += 1;
        } else if *s == target {
            ties += 1;
        }
    }
    1.0 + greater as f64 + ties as f64 / 2.0
}

/// Produces tail scores for a block of sources under one head: column c
/// holds the scores of `sources[c]`.
pub trait Scorer: Sync {
    fn entity_count(&self) -> usize;
    fn score(&self, head: usize, sources: &[usize]) -> Result<Tensor>;
}

/// Adapts a per-query closure `(source, head) → scores`.
pub struct FnScorer<F> {
    n: usize,
    f: F,
}

impl<F> FnScorer<F>
where
    F: Fn(usize, usize) -> Vec<f64> + Sync,
{
    pub fn new(entity_count: usize, f: F) -> Self {
        Self { n: entity_count, f }
    }
}

impl<F> Scorer for FnScorer<F>
where
    F: Fn(usize, usize) -> Vec<f64> + Sync,
{
    fn entity_count(&self) -> usize {
        self.n
    }

    fn score(&self, head: usize, sources: &[usize]) -> Result<Tensor> {
        let mut out = Tensor::zeros(self.n, sources.len());
        for (c, x) in sources.iter().enumerate() {
            let s = (self.f)(*x, head);
            if s.len() != self.n {
                return Err(Error::Dimension(format!("scorer returned {} scores for {} entities", s.len(), self.n)));
            }
            for (e, v) in s.into_iter().enumerate() {
                out.set(e, c, v);
            }
        }
        Ok(out)
    }
}

/// The trained model over fixed operators, with coefficients generated
/// once per head.
pub struct ModelScorer<'a> {
    ops: &'a OperatorSet,
    coeffs: HashMap<usize, CoefficientTensor>,
}

impl<'a> ModelScorer<'a> {
    pub fn new(model: &DrumModel, ops: &'a OperatorSet, heads: &[usize]) -> Result<Self> {
        let mut unique: Vec<usize> = heads.to_vec();
        unique.sort_unstable();
        unique.dedup();
        let coeffs = model.coefficients(&unique)?;
        Ok(Self {
            ops,
            coeffs: unique.into_iter().zip(coeffs).collect(),
        })
    }
}

impl Scorer for ModelScorer<'_> {
    fn entity_count(&self) -> usize {
        self.ops.entity_count()
    }

    fn score(&self, head: usize, sources: &[usize]) -> Result<Tensor> {
        let c = self
            .coeffs
            .get(&head)
            .ok_or_else(|| Error::Index(format!("no coefficients prepared for head {head}")))?;
        score_with_coefficients(c, self.ops, sources)
    }
}

/// Symbolic scoring: `Σ_rules α · v_xᵀ Π_body A`. Rules naming an operator
/// the graph lacks contribute nothing; a warning is logged once per rule
/// list.
pub struct RuleScorer<'a> {
    ops: &'a OperatorSet,
    rules: &'a RuleList,
    warned: Mutex<bool>,
}

impl<'a> RuleScorer<'a> {
    pub fn new(rules: &'a RuleList, ops: &'a OperatorSet) -> Self {
        Self {
            ops,
            rules,
            warned: Mutex::new(false),
        }
    }

    fn usable(&self, rule: &Rule) -> bool {
        if rule.body.iter().all(|k| *k < self.ops.len()) {
            return true;
        }
        let mut warned = self.warned.lock().expect("warning flag poisoned");
        if !*warned {
            log::warn!(
                "rule body {:?} uses relations outside the {} available operators; such rules score zero",
                rule.body,
                self.ops.len()
            );
            *warned = true;
        }
        false
    }
}

impl Scorer for RuleScorer<'_> {
    fn entity_count(&self) -> usize {
        self.ops.entity_count()
    }

    fn score(&self, head: usize, sources: &[usize]) -> Result<Tensor> {
        let n = self.ops.entity_count();
        let x = Tensor::one_hot_columns(n, sources)?;
        let mut total = Tensor::zeros(n, sources.len());
        let mut select = Tensor::zeros(self.ops.len(), 1);
        for rule in self.rules.get(head) {
            if !self.usable(rule) {
                continue;
            }
            let mut u = x.clone();
            for k in &rule.body {
                select.data_mut()[*k] = 1.0;
                u = mix_spmv_t(self.ops, &select, &u)?;
                select.data_mut()[*k] = 0.0;
            }
            u.scale_assign(rule.confidence);
            total.add_assign(&u);
        }
        Ok(total)
    }
}

/// Rule-based score of every entity as the tail of `(x, head, ·)`.
pub fn apply_rules(rules: &RuleList, ops: &OperatorSet, head: usize, x: usize) -> Result<Vec<f64>> {
    Ok(RuleScorer::new(rules, ops).score(head, &[x])?.col(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Rank only original-relation queries, skipping inverse ones.
    pub tail_only: bool,
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            tail_only: false,
            parallel: true,
        }
    }
}

/// One query per triple of an augmented store; inverse triples supply the
/// head-prediction direction unless `tail_only` is set.
pub fn queries_from_store(store: &TripleStore, vocab: &Vocabulary, tail_only: bool) -> Vec<Query> {
    store
        .triples()
        .iter()
        .filter(|t| !tail_only || vocab.relation_kind(t.relation) == Some(RelationKind::Original))
        .map(|t| Query {
            source: t.subject,
            head: t.relation,
            target: t.object,
        })
        .collect()
}

/// Filtered rank of each query, in input order.
pub fn rank_queries(scorer: &dyn Scorer, queries: &[Query], filter: &FilterIndex, parallel: bool) -> Result<Vec<f64>> {
    let n = scorer.entity_count();
    if let Some(q) = queries.iter().find(|q| q.source >= n || q.target >= n) {
        return Err(Error::Index(format!("query {q:?} outside {n} entities")));
    }
    let mut by_head: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, q) in queries.iter().enumerate() {
        by_head.entry(q.head).or_default().push(i);
    }
    let blocks: Vec<&[usize]> = by_head.values().flat_map(|idx| idx.chunks(BLOCK)).collect();
    let ranked = parallel::try_map_indexed(blocks.len(), parallel, |b| {
        let idx = blocks[b];
        let head = queries[idx[0]].head;
        let sources: Vec<usize> = idx.iter().map(|i| queries[*i].source).collect();
        let scores = scorer.score(head, &sources)?;
        if scores.shape() != (n, idx.len()) {
            return Err(Error::Dimension(format!(
                "scorer returned {:?}, expected ({n}, {})",
                scores.shape(),
                idx.len()
            )));
        }
        Ok(idx
            .iter()
            .enumerate()
            .map(|(c, i)| {
                let q = queries[*i];
                (*i, rank_query(&scores.col(c), q.target, filter.tails(q.source, q.head)))
            })
            .collect::<Vec<_>>())
    })?;
    let mut ranks = vec![0.0; queries.len()];
    for (i, r) in ranked.into_iter().flatten() {
        ranks[i] = r;
    }
    Ok(ranks)
}

/// Filtered MRR and Hits@k over the queries of `test`.
pub fn evaluate(
    scorer: &dyn Scorer,
    test: &TripleStore,
    vocab: &Vocabulary,
    filter: &FilterIndex,
    options: EvalOptions,
) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::Argument("empty test store".into()));
    }
    let queries = queries_from_store(test, vocab, options.tail_only);
    evaluate_queries(scorer, &queries, filter, options.parallel)
}

pub fn evaluate_queries(scorer: &dyn Scorer, queries: &[Query], filter: &FilterIndex, parallel: bool) -> Result<Metrics> {
    Metrics::from_ranks(&rank_queries(scorer, queries, filter, parallel)?)
}

#[cfg(test)]
mod tests;
