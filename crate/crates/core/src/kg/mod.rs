//! Triple files, vocabularies, adjacency operators and dataset splits.

mod adjacency;
mod dataset;
mod split;
mod store;
mod vocab;

pub use adjacency::{build_adjacency, OperatorSet, SparseAdjacency};
pub use dataset::{Dataset, DatasetPaths};
pub use split::{make_inductive_split, sample_triples, split_facts_train};
pub use store::{augment_relations, load_triples, parse_triples, Triple, TripleStore};
pub use vocab::{RelationKind, Vocabulary, IDENTITY_NAME, INVERSE_PREFIX};
