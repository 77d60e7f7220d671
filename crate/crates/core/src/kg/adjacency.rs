use crate::error::{Error, Result};
use crate::kg::store::TripleStore;
use crate::kg::vocab::{RelationKind, Vocabulary};

/// Binary n×n adjacency operator stored as sorted (row, col) coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseAdjacency {
    n: usize,
    coords: Vec<(u32, u32)>,
    identity: bool,
}

impl SparseAdjacency {
    pub fn from_coords(n: usize, mut coords: Vec<(u32, u32)>) -> Result<Self> {
        if let Some(&(r, c)) = coords
            .iter()
            .find(|(r, c)| *r as usize >= n || *c as usize >= n)
        {
            return Err(Error::Index(format!("coordinate ({r}, {c}) outside {n}×{n}")));
        }
        coords.sort_unstable();
        coords.dedup();
        Ok(Self {
            n,
            coords,
            identity: false,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            coords: (0..n as u32).map(|i| (i, i)).collect(),
            identity: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[(u32, u32)] {
        &self.coords
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.coords
            .binary_search(&(row as u32, col as u32))
            .is_ok()
    }

    pub fn transpose(&self) -> Self {
        let mut coords: Vec<_> = self.coords.iter().map(|&(r, c)| (c, r)).collect();
        coords.sort_unstable();
        Self {
            n: self.n,
            coords,
            identity: self.identity,
        }
    }

    /// `out += scale · Aᵀ x` over a dense vector.
    pub fn add_transpose_mul(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        if self.identity {
            for (o, v) in out.iter_mut().zip(x) {
                *o += scale * v;
            }
            return;
        }
        for &(r, c) in &self.coords {
            out[c as usize] += scale * x[r as usize];
        }
    }

    /// `out += scale · A x` over a dense vector.
    pub fn add_mul(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        if self.identity {
            for (o, v) in out.iter_mut().zip(x) {
                *o += scale * v;
            }
            return;
        }
        for &(r, c) in &self.coords {
            out[r as usize] += scale * x[c as usize];
        }
    }
}

/// Adjacency for a single relation: entry (i, j) is present iff the triple
/// (i, relation, j) is in the store. The identity relation yields Iₙ.
pub fn build_adjacency(
    store: &TripleStore,
    vocab: &Vocabulary,
    relation: usize,
) -> Result<SparseAdjacency> {
    let n = store.entity_count().max(vocab.entity_count());
    match vocab.relation_kind(relation) {
        None => Err(Error::Index(format!(
            "relation {relation} not in vocabulary of {} relations",
            vocab.relation_count()
        ))),
        Some(RelationKind::Identity) => Ok(SparseAdjacency::identity(n)),
        Some(_) => SparseAdjacency::from_coords(
            n,
            store
                .triples()
                .iter()
                .filter(|t| t.relation == relation)
                .map(|t| (t.subject as u32, t.object as u32))
                .collect(),
        ),
    }
}

/// One operator per augmented relation id, index-aligned with the
/// vocabulary (index 0 is the identity).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorSet {
    n: usize,
    ops: Vec<SparseAdjacency>,
}

impl OperatorSet {
    pub fn from_store(store: &TripleStore, vocab: &Vocabulary) -> Result<Self> {
        if !vocab.is_augmented() {
            return Err(Error::Contract(
                "operators require an augmented vocabulary".into(),
            ));
        }
        let n = store.entity_count().max(vocab.entity_count());
        let mut buckets: Vec<Vec<(u32, u32)>> = vec![Vec::new(); vocab.relation_count()];
        for t in store.triples() {
            let bucket = buckets.get_mut(t.relation).ok_or_else(|| {
                Error::Index(format!("relation {} outside vocabulary", t.relation))
            })?;
            bucket.push((t.subject as u32, t.object as u32));
        }
        let ops = buckets
            .into_iter()
            .enumerate()
            .map(|(rel, coords)| {
                if vocab.relation_kind(rel) == Some(RelationKind::Identity) {
                    Ok(SparseAdjacency::identity(n))
                } else {
                    SparseAdjacency::from_coords(n, coords)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, ops })
    }

    pub fn from_operators(n: usize, ops: Vec<SparseAdjacency>) -> Result<Self> {
        if let Some(op) = ops.iter().find(|op| op.dim() != n) {
            return Err(Error::Dimension(format!(
                "operator of dimension {} in a set of dimension {n}",
                op.dim()
            )));
        }
        Ok(Self { n, ops })
    }

    pub fn entity_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&SparseAdjacency> {
        self.ops.get(k)
    }

    pub fn operators(&self) -> &[SparseAdjacency] {
        &self.ops
    }

    pub fn total_nnz(&self) -> usize {
        self.ops.iter().map(SparseAdjacency::nnz).sum()
    }
}
