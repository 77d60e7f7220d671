use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Name given to the synthetic identity relation.
pub const IDENTITY_NAME: &str = "identity";
/// Prefix of materialised inverse relations.
pub const INVERSE_PREFIX: &str = "inv_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelationKind {
    Original,
    Inverse,
    Identity,
}

impl RelationKind {
    fn as_str(self) -> &'static str {
        match self {
            RelationKind::Original => "relation",
            RelationKind::Inverse => "inverse",
            RelationKind::Identity => "identity",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }
}

/// Bidirectional entity and relation name tables.
///
/// A raw vocabulary holds only the relations read from triple files. The
/// augmented form produced by [`Vocabulary::augmented`] has a fixed layout
/// that the model relies on: index 0 is the identity relation, indices
/// `1..=R` are the original relations in their raw order, and `R+1..=2R`
/// are their inverses in the same order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entities: Interner,
    relations: Interner,
    kinds: Vec<RelationKind>,
    inverse: Vec<Option<usize>>,
    augmented: bool,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.names.len()
    }

    /// Number of relations read from data, excluding inverses and identity.
    pub fn original_relation_count(&self) -> usize {
        self.kinds
            .iter()
            .filter(|k| **k == RelationKind::Original)
            .count()
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entities.get(name)
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relations.get(name)
    }

    pub fn entity_name(&self, id: usize) -> Option<&str> {
        self.entities.names.get(id).map(String::as_str)
    }

    pub fn relation_name(&self, id: usize) -> Option<&str> {
        self.relations.names.get(id).map(String::as_str)
    }

    pub fn relation_kind(&self, id: usize) -> Option<RelationKind> {
        self.kinds.get(id).copied()
    }

    pub fn inverse_of(&self, id: usize) -> Option<usize> {
        self.inverse.get(id).copied().flatten()
    }

    pub fn identity(&self) -> Option<usize> {
        self.kinds.iter().position(|k| *k == RelationKind::Identity)
    }

    pub fn intern_entity(&mut self, name: &str) -> usize {
        self.entities.intern(name)
    }

    /// Interns an original relation. Augmented vocabularies are closed over
    /// relations: a name that is not already present is an error.
    pub fn intern_relation(&mut self, name: &str) -> Result<usize> {
        if let Some(id) = self.relations.get(name) {
            return Ok(id);
        }
        if self.augmented {
            return Err(Error::Index(format!(
                "relation `{name}` is not part of the augmented vocabulary"
            )));
        }
        let id = self.relations.intern(name);
        self.kinds.push(RelationKind::Original);
        self.inverse.push(None);
        Ok(id)
    }

    /// Builds the augmented vocabulary and the map from raw relation ids to
    /// augmented ids. Calling it on an augmented vocabulary is the identity.
    pub fn augmented(&self) -> (Vocabulary, Vec<usize>) {
        if self.augmented {
            return (self.clone(), (0..self.relation_count()).collect());
        }
        let originals: Vec<&str> = self
            .relations
            .names
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| **k == RelationKind::Original)
            .map(|(n, _)| n.as_str())
            .collect();
        let r = originals.len();
        let mut out = Vocabulary {
            entities: self.entities.clone(),
            augmented: true,
            ..Default::default()
        };
        out.relations.intern(IDENTITY_NAME);
        out.kinds.push(RelationKind::Identity);
        out.inverse.push(None);
        for name in &originals {
            out.relations.intern(name);
            out.kinds.push(RelationKind::Original);
        }
        for name in &originals {
            out.relations.intern(&format!("{INVERSE_PREFIX}{name}"));
            out.kinds.push(RelationKind::Inverse);
        }
        out.inverse.extend((1..=r).map(|i| Some(i + r)));
        out.inverse.extend((1..=r).map(Some));
        let mut map = Vec::with_capacity(self.relation_count());
        for (id, kind) in self.kinds.iter().enumerate() {
            // raw vocabularies only contain originals
            debug_assert_eq!(*kind, RelationKind::Original);
            map.push(id + 1);
        }
        (out, map)
    }

    /// Serialises to the `index\tname\tkind` dump: entities first, then
    /// relations.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.entities.names.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{name}\tentity");
        }
        for (i, name) in self.relations.names.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{name}\t{}", self.kinds[i].as_str());
        }
        out
    }

    pub fn from_tsv(reader: impl BufRead) -> Result<Self> {
        let mut entities = Vec::new();
        let mut relations = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<vocabulary>", e))?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                path: "<vocabulary>".into(),
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", fields.len())));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| bad(format!("bad index `{}`", fields[0])))?;
            let kind = match fields[2] {
                "entity" => None,
                "relation" => Some(RelationKind::Original),
                "inverse" => Some(RelationKind::Inverse),
                "identity" => Some(RelationKind::Identity),
                other => return Err(bad(format!("unknown kind `{other}`"))),
            };
            let table_len = if kind.is_none() {
                entities.len()
            } else {
                relations.len()
            };
            if index != table_len {
                return Err(bad(format!("index {index} is not dense (expected {table_len})")));
            }
            match kind {
                None => entities.push(fields[1].to_owned()),
                Some(k) => relations.push((fields[1].to_owned(), k)),
            }
        }
        let mut vocab = Vocabulary::new();
        for name in &entities {
            vocab.entities.intern(name);
        }
        let any_aug = relations.iter().any(|(_, k)| *k != RelationKind::Original);
        if !any_aug {
            for (name, _) in &relations {
                vocab.intern_relation(name)?;
            }
            return Ok(vocab);
        }
        let originals: Vec<&str> = relations
            .iter()
            .filter(|(_, k)| *k == RelationKind::Original)
            .map(|(n, _)| n.as_str())
            .collect();
        let mut raw = Vocabulary::new();
        for name in &originals {
            raw.intern_relation(name)?;
        }
        let (mut aug, _) = raw.augmented();
        let expected: Vec<(String, RelationKind)> = aug
            .relations
            .names
            .iter()
            .cloned()
            .zip(aug.kinds.iter().copied())
            .collect();
        if expected != relations {
            return Err(Error::Parse {
                path: "<vocabulary>".into(),
                line: 0,
                message: "relation table does not follow the augmented layout".into(),
            });
        }
        aug.entities = vocab.entities;
        Ok(aug)
    }

    /// SHA-256 of the TSV dump, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_tsv().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
