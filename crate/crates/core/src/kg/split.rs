use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::store::TripleStore;

/// Seeded shuffle, then prefix cut: the first `ratio/(ratio+1)` of the
/// shuffled triples become facts and the remainder the training queries
/// (`ratio = 3.0` gives a 3:1 split).
///
/// Split raw stores, before inverse triples are added, so a triple and its
/// inverse always land on the same side.
pub fn split_facts_train(
    store: &TripleStore,
    ratio: f64,
    seed: u64,
) -> Result<(TripleStore, TripleStore)> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Argument(format!(
            "facts:train ratio must be a positive number, got {ratio}"
        )));
    }
    if store.is_empty() {
        return Err(Error::Argument("cannot split an empty store".into()));
    }
    let mut triples = store.triples().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    triples.shuffle(&mut rng);
    let n_facts = ((triples.len() as f64) * ratio / (ratio + 1.0)).round() as usize;
    let n_facts = n_facts.min(triples.len());
    let train = triples.split_off(n_facts);
    let n = store.entity_count();
    let r = store.relation_count();
    Ok((TripleStore::new(triples, n, r)?, TripleStore::new(train, n, r)?))
}

/// Drops every training triple that touches an entity mentioned in `test`,
/// making the two entity sets disjoint.
pub fn make_inductive_split(train: &TripleStore, test: &TripleStore) -> Result<TripleStore> {
    let held_out: HashSet<usize> = test.entities();
    let kept = train
        .triples()
        .iter()
        .filter(|t| !held_out.contains(&t.subject) && !held_out.contains(&t.object))
        .copied();
    TripleStore::new(
        kept,
        train.entity_count().max(test.entity_count()),
        train.relation_count().max(test.relation_count()),
    )
}

/// Seeded random sample of `count` triples (all of them if `count` exceeds
/// the store size).
pub fn sample_triples(store: &TripleStore, count: usize, seed: u64) -> Result<TripleStore> {
    let mut triples = store.triples().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    triples.shuffle(&mut rng);
    triples.truncate(count);
    TripleStore::new(triples, store.entity_count(), store.relation_count())
}
