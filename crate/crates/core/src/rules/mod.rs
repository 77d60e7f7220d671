//! Rule extraction from coefficient tensors and the inverse construction.
//!
//! A raw path is one operator id per step, identity included. Its rank-j
//! confidence is `Π_i a[j][i][k_i]`. Removing identity steps gives the rule
//! body; confidences of every raw path and rank mapping to the same body
//! are summed, since that sum is exactly the coefficient of the matching
//! matrix product in the expansion of the rank-L operator.

mod construct;
mod format;

use std::cmp::Ordering;
use std::collections::BTreeMap;

pub use construct::{construct_coefficients, path_confidence, theorem1_chain};
pub use format::{read_rules, render_rule, write_rules};

use crate::error::{Error, Result};
use crate::model::{CoefficientTensor, DrumModel, RankSlice};

/// Operator id of the identity relation.
pub const IDENTITY: usize = 0;

/// With a non-positive threshold, expansion refuses tensors with more raw
/// paths than this unless explicitly overridden.
pub const MAX_EXHAUSTIVE_PATHS: f64 = 1e6;

const DEFAULT_FLOOR: f64 = 1e-4;
const DEFAULT_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct RawPath {
    pub ops: Vec<usize>,
    pub confidence: f64,
}

/// `body(A, z1) ∧ … ⇒ head(A, B) : confidence`
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub head: usize,
    pub body: Vec<usize>,
    pub confidence: f64,
}

impl Rule {
    pub fn new(head: usize, body: Vec<usize>, confidence: f64) -> Self {
        Self {
            head,
            body,
            confidence,
        }
    }
}

/// Descending confidence, then ascending body.
fn rule_order(a: &Rule, b: &Rule) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.body.cmp(&b.body))
}

/// Rules grouped by head; each group has distinct bodies and is sorted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuleList {
    heads: BTreeMap<usize, Vec<Rule>>,
}

impl RuleList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Groups rules by head, merging equal bodies by summing confidence.
    pub fn from_rules(rules: impl IntoIterator<Item = Rule>) -> Self {
        let mut list = Self::new();
        for r in rules {
            list.add(r);
        }
        list.sort();
        list
    }

    fn add(&mut self, rule: Rule) {
        let group = self.heads.entry(rule.head).or_default();
        match group.iter_mut().find(|r| r.body == rule.body) {
            Some(existing) => existing.confidence += rule.confidence,
            None => group.push(rule),
        }
    }

    fn sort(&mut self) {
        for group in self.heads.values_mut() {
            group.sort_by(rule_order);
        }
    }

    /// Replaces the rules for `head` (merging and sorting them).
    pub fn set_head(&mut self, head: usize, rules: Vec<Rule>) -> Result<()> {
        if let Some(r) = rules.iter().find(|r| r.head != head) {
            return Err(Error::Argument(format!("rule for head {} filed under {head}", r.head)));
        }
        self.heads.insert(head, Vec::new());
        for r in rules {
            self.add(r);
        }
        self.heads
            .get_mut(&head)
            .expect("just inserted")
            .sort_by(rule_order);
        Ok(())
    }

    pub fn get(&self, head: usize) -> &[Rule] {
        self.heads.get(&head).map_or(&[], Vec::as_slice)
    }

    pub fn heads(&self) -> impl Iterator<Item = usize> + '_ {
        self.heads.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Rule])> {
        self.heads.iter().map(|(h, r)| (*h, r.as_slice()))
    }

    /// Total number of rules over all heads.
    pub fn len(&self) -> usize {
        self.heads.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_threshold(slice: &RankSlice<'_>, min_confidence: f64, allow_exhaustive: bool) -> Result<()> {
    if min_confidence.is_nan() {
        return Err(Error::Argument("min_confidence is NaN".into()));
    }
    let paths = (slice.operators() as f64).powi(slice.steps() as i32);
    if min_confidence <= 0.0 && !allow_exhaustive && paths > MAX_EXHAUSTIVE_PATHS {
        return Err(Error::Argument(format!(
            "min_confidence {min_confidence} would enumerate {paths:.3e} paths; \
             use a positive threshold or override"
        )));
    }
    Ok(())
}

/// Depth-first enumeration of raw paths whose confidence is at least
/// `min_confidence`. A branch is cut as soon as its partial product falls
/// below the threshold; coefficients never exceed one, so that is sound.
pub fn expand_rank(slice: RankSlice<'_>, min_confidence: f64) -> Result<Vec<RawPath>> {
    expand_rank_with(slice, min_confidence, false)
}

/// [`expand_rank`] with the guard against exhaustive enumeration lifted
/// when `allow_exhaustive` is set.
pub fn expand_rank_with(slice: RankSlice<'_>, min_confidence: f64, allow_exhaustive: bool) -> Result<Vec<RawPath>> {
    check_threshold(&slice, min_confidence, allow_exhaustive)?;
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(slice.steps());
    expand(&slice, min_confidence, 1.0, &mut path, &mut out);
    Ok(out)
}

fn expand(slice: &RankSlice<'_>, tau: f64, partial: f64, path: &mut Vec<usize>, out: &mut Vec<RawPath>) {
    let i = path.len();
    if i == slice.steps() {
        out.push(RawPath {
            ops: path.clone(),
            confidence: partial,
        });
        return;
    }
    for (k, a) in slice.step(i).iter().enumerate() {
        let p = partial * a;
        if p < tau {
            continue;
        }
        path.push(k);
        expand(slice, tau, p, path, out);
        path.pop();
    }
}

/// Drops identity steps, keeping order.
pub fn collapse_identity(path: &[usize]) -> Vec<usize> {
    path.iter().copied().filter(|k| *k != IDENTITY).collect()
}

/// Rules for `head` from every rank of `coeffs`, identity-collapsed,
/// merged by body and sorted. All-identity paths are discarded.
pub fn extract_rules(coeffs: &CoefficientTensor, head: usize, min_confidence: f64) -> Result<Vec<Rule>> {
    extract_rules_with(coeffs, head, min_confidence, false)
}

pub fn extract_rules_with(
    coeffs: &CoefficientTensor,
    head: usize,
    min_confidence: f64,
    allow_exhaustive: bool,
) -> Result<Vec<Rule>> {
    let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for j in 0..coeffs.rank() {
        for p in expand_rank_with(coeffs.rank_slice(j), min_confidence, allow_exhaustive)? {
            let body = collapse_identity(&p.ops);
            if body.is_empty() {
                continue;
            }
            *merged.entry(body).or_insert(0.0) += p.confidence;
        }
    }
    let mut rules: Vec<Rule> = merged
        .into_iter()
        .map(|(body, c)| Rule::new(head, body, c))
        .collect();
    rules.sort_by(rule_order);
    Ok(rules)
}

/// Highest raw-path confidence over all ranks: the product of per-step
/// maxima of the best rank.
pub fn top_path_confidence(coeffs: &CoefficientTensor) -> f64 {
    (0..coeffs.rank())
        .map(|j| {
            (0..coeffs.steps())
                .map(|i| coeffs.step(j, i).iter().copied().fold(0.0, f64::max))
                .product::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `max(1e-4, 0.01 × top raw-path confidence)`.
pub fn default_min_confidence(coeffs: &CoefficientTensor) -> f64 {
    DEFAULT_FLOOR.max(DEFAULT_FRACTION * top_path_confidence(coeffs))
}

/// Extracts rules for every head in `heads` from a trained model. `None`
/// uses [`default_min_confidence`] per head.
pub fn mine_rules(model: &DrumModel, heads: &[usize], min_confidence: Option<f64>, parallel: bool) -> Result<RuleList> {
    let coeffs = model.coefficients(heads)?;
    let groups = crate::parallel::try_map_indexed(heads.len(), parallel, |h| {
        let tau = min_confidence.unwrap_or_else(|| default_min_confidence(&coeffs[h]));
        extract_rules(&coeffs[h], heads[h], tau)
    })?;
    let mut list = RuleList::new();
    for (head, rules) in heads.iter().zip(groups) {
        list.set_head(*head, rules)?;
    }
    Ok(list)
}
