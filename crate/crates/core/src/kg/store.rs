use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::vocab::Vocabulary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
}

impl Triple {
    pub fn new(subject: usize, relation: usize, object: usize) -> Self {
        Self {
            subject,
            relation,
            object,
        }
    }
}

/// Deduplicated, integer-indexed triples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleStore {
    triples: Vec<Triple>,
    entity_count: usize,
    relation_count: usize,
    duplicates_dropped: usize,
}

impl TripleStore {
    /// Builds a store, dropping repeated triples while keeping first-seen
    /// order.
    pub fn new(
        triples: impl IntoIterator<Item = Triple>,
        entity_count: usize,
        relation_count: usize,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut dropped = 0;
        for t in triples {
            if t.subject >= entity_count || t.object >= entity_count {
                return Err(Error::Index(format!(
                    "entity id in {t:?} exceeds entity count {entity_count}"
                )));
            }
            if t.relation >= relation_count {
                return Err(Error::Index(format!(
                    "relation id in {t:?} exceeds relation count {relation_count}"
                )));
            }
            if seen.insert(t) {
                kept.push(t);
            } else {
                dropped += 1;
            }
        }
        Ok(Self {
            triples: kept,
            entity_count,
            relation_count,
            duplicates_dropped: dropped,
        })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    /// Number of repeated input triples removed while loading.
    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// Re-bases the store on a larger (or equal) vocabulary.
    pub fn widen(&self, entity_count: usize, relation_count: usize) -> Result<Self> {
        if entity_count < self.entity_count || relation_count < self.relation_count {
            return Err(Error::Argument(format!(
                "cannot shrink store from ({}, {}) to ({entity_count}, {relation_count})",
                self.entity_count, self.relation_count
            )));
        }
        Ok(Self {
            entity_count,
            relation_count,
            ..self.clone()
        })
    }

    /// Union with another store over the same vocabulary.
    pub fn union(&self, other: &TripleStore) -> Result<Self> {
        let n = self.entity_count.max(other.entity_count);
        let r = self.relation_count.max(other.relation_count);
        TripleStore::new(
            self.triples.iter().chain(&other.triples).copied(),
            n,
            r,
        )
    }

    pub fn entities(&self) -> HashSet<usize> {
        self.triples
            .iter()
            .flat_map(|t| [t.subject, t.object])
            .collect()
    }

    pub fn write_tsv(&self, vocab: &Vocabulary, mut out: impl Write) -> std::io::Result<()> {
        for t in &self.triples {
            writeln!(
                out,
                "{}\t{}\t{}",
                vocab.entity_name(t.subject).unwrap_or("?"),
                vocab.relation_name(t.relation).unwrap_or("?"),
                vocab.entity_name(t.object).unwrap_or("?"),
            )?;
        }
        Ok(())
    }
}

/// Parses `subject\trelation\tobject` lines. Blank lines are skipped.
pub fn parse_triples(
    reader: impl BufRead,
    source: &Path,
    vocab: &mut Vocabulary,
) -> Result<TripleStore> {
    let mut triples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: lineno + 1,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let s = vocab.intern_entity(fields[0].trim());
        let r = vocab.intern_relation(fields[1].trim()).map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let o = vocab.intern_entity(fields[2].trim());
        triples.push(Triple::new(s, r, o));
    }
    TripleStore::new(triples, vocab.entity_count(), vocab.relation_count())
}

/// Loads a triple file. Names missing from `vocab` extend it, so test files
/// can mention entities never seen in training.
pub fn load_triples(
    path: impl AsRef<Path>,
    vocab: Option<Vocabulary>,
) -> Result<(TripleStore, Vocabulary)> {
    let path = path.as_ref();
    let mut vocab = vocab.unwrap_or_default();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let store = parse_triples(BufReader::new(file), path, &mut vocab)?;
    if store.duplicates_dropped() > 0 {
        log::info!(
            "{}: dropped {} duplicate triples",
            path.display(),
            store.duplicates_dropped()
        );
    }
    Ok((store, vocab))
}

/// Maps a raw store into the augmented relation space and materialises one
/// inverse triple per input triple. The identity relation gets an index but
/// no triples.
pub fn augment_relations(store: &TripleStore, vocab: &Vocabulary) -> Result<(TripleStore, Vocabulary)> {
    let (aug, map) = vocab.augmented();
    let n = store.entity_count().max(aug.entity_count());
    let mut out = Vec::with_capacity(store.len() * 2);
    for t in store.triples() {
        let rel = *map
            .get(t.relation)
            .ok_or_else(|| Error::Index(format!("relation {} not in vocabulary", t.relation)))?;
        out.push(Triple::new(t.subject, rel, t.object));
    }
    for t in store.triples() {
        let rel = map[t.relation];
        if let Some(inv) = aug.inverse_of(rel) {
            out.push(Triple::new(t.object, inv, t.subject));
        }
    }
    let store = TripleStore::new(out, n, aug.relation_count())?;
    Ok((store, aug))
}
