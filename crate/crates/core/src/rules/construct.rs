use super::{RawPath, Rule, IDENTITY};
use crate::error::{Error, Result};
use crate::model::{CoefficientTensor, RankSlice};

/// Rank-1 confidence of a raw path: the product of its per-step
/// coefficients.
pub fn path_confidence(slice: RankSlice<'_>, path: &[usize]) -> Result<f64> {
    if path.len() != slice.steps() {
        return Err(Error::Argument(format!(
            "path of length {} for a {}-step slice",
            path.len(),
            slice.steps()
        )));
    }
    let mut c = 1.0;
    for (i, k) in path.iter().enumerate() {
        if *k >= slice.operators() {
            return Err(Error::Index(format!("operator {k} outside {}", slice.operators())));
        }
        c *= slice.get(i, *k);
    }
    Ok(c)
}

/// One rank per rule: step 1 is `α·δ_{b1}`, the remaining body atoms
/// follow as one-hot steps, and any leftover steps select the identity.
///
/// Confidences above one are rejected even though the construction works
/// for any α: a softmax model cannot produce such coefficients.
pub fn construct_coefficients(rules: &[Rule], steps: usize, operators: usize) -> Result<CoefficientTensor> {
    if steps == 0 {
        return Err(Error::Argument("rule length must be at least 1".into()));
    }
    let mut c = CoefficientTensor::zeros(rules.len(), steps, operators);
    for (j, rule) in rules.iter().enumerate() {
        if rule.body.is_empty() {
            return Err(Error::Argument("rule with an empty body".into()));
        }
        if rule.body.len() > steps {
            return Err(Error::Argument(format!(
                "body of length {} exceeds maximum rule length {steps}",
                rule.body.len()
            )));
        }
        if !(0.0..=1.0).contains(&rule.confidence) {
            return Err(Error::Argument(format!(
                "confidence {} outside [0, 1] cannot be represented",
                rule.confidence
            )));
        }
        if let Some(k) = rule.body.iter().find(|k| **k == IDENTITY || **k >= operators) {
            return Err(Error::Index(format!("body atom {k} is not a relation operator")));
        }
        for i in 0..steps {
            match rule.body.get(i) {
                Some(k) if i == 0 => c.set(j, i, *k, rule.confidence),
                Some(k) => c.set(j, i, *k, 1.0),
                None => c.set(j, i, IDENTITY, 1.0),
            }
        }
    }
    Ok(c)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = k;
        }
    }
    best
}

/// Walks from `from` to `target`, replacing one differing atom at a time
/// from the last step backwards. Returns the visited paths, `from`
/// excluded and `target` included.
fn walk(from: &[usize], target: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = from.to_vec();
    let mut out = Vec::new();
    for i in (0..cur.len()).rev() {
        if cur[i] != target[i] {
            cur[i] = target[i];
            out.push(cur.clone());
        }
    }
    out
}

/// Chain of raw paths linking `rule_o` to `rule_s` through the rank-1
/// argmax path S*, endpoints excluded. Each side moves towards S* one atom
/// at a time, and every replacement swaps in a per-step maximum, so
/// confidences never drop below the side's starting rule.
pub fn theorem1_chain(coeffs: &CoefficientTensor, rule_o: &[usize], rule_s: &[usize]) -> Result<Vec<RawPath>> {
    if coeffs.rank() != 1 {
        return Err(Error::Contract(format!(
            "rule chains need a rank-1 tensor, got rank {}",
            coeffs.rank()
        )));
    }
    let slice = coeffs.rank_slice(0);
    for p in [rule_o, rule_s] {
        path_confidence(slice, p)?;
    }
    if rule_o == rule_s {
        return Ok(Vec::new());
    }
    let star: Vec<usize> = (0..slice.steps()).map(|i| argmax(slice.step(i))).collect();
    let mut full = vec![rule_o.to_vec()];
    full.extend(walk(rule_o, &star));
    let mut back = vec![rule_s.to_vec()];
    back.extend(walk(rule_s, &star));
    // Both sides end at S*; keep it once.
    full.extend(back.into_iter().rev().skip(1));
    full[1..full.len() - 1]
        .iter()
        .map(|p| {
            Ok(RawPath {
                confidence: path_confidence(slice, p)?,
                ops: p.clone(),
            })
        })
        .collect()
}
