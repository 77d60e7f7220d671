use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kg::split::split_facts_train;
use crate::kg::store::{augment_relations, load_triples, TripleStore};
use crate::kg::vocab::Vocabulary;

/// File locations of one benchmark. `facts` is optional: when absent the
/// training file is split into facts and training queries.
#[derive(Clone, Debug, Default)]
pub struct DatasetPaths {
    pub facts: Option<PathBuf>,
    pub train: PathBuf,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

impl DatasetPaths {
    /// Looks for `facts.txt`, `train.txt`, `valid.txt` and `test.txt` in a
    /// directory.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let pick = |name: &str| {
            let p = dir.join(name);
            p.is_file().then_some(p)
        };
        let train = pick("train.txt").ok_or_else(|| {
            Error::Argument(format!("{} has no train.txt", dir.display()))
        })?;
        Ok(Self {
            facts: pick("facts.txt"),
            train,
            valid: pick("valid.txt"),
            test: pick("test.txt"),
        })
    }
}

/// All splits of a dataset over one augmented vocabulary. Every store
/// carries inverse triples.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub facts: TripleStore,
    pub train: TripleStore,
    pub valid: Option<TripleStore>,
    pub test: Option<TripleStore>,
}

impl Dataset {
    /// Loads every split. `split` gives the facts:train ratio and seed used
    /// when no facts file exists.
    pub fn load(
        paths: &DatasetPaths,
        base_vocab: Option<Vocabulary>,
        split: (f64, u64),
    ) -> Result<Self> {
        let (train_raw, vocab) = load_triples(&paths.train, base_vocab)?;
        let (facts_raw, train_raw, vocab) = match &paths.facts {
            Some(p) => {
                let (facts, vocab) = load_triples(p, Some(vocab))?;
                (facts, train_raw, vocab)
            }
            None => {
                let (facts, train) = split_facts_train(&train_raw, split.0, split.1)?;
                (facts, train, vocab)
            }
        };
        let mut vocab = vocab;
        let mut load_opt = |p: &Option<PathBuf>| -> Result<Option<TripleStore>> {
            match p {
                Some(p) => {
                    let (s, v) = load_triples(p, Some(std::mem::take(&mut vocab)))?;
                    vocab = v;
                    Ok(Some(s))
                }
                None => Ok(None),
            }
        };
        let valid_raw = load_opt(&paths.valid)?;
        let test_raw = load_opt(&paths.test)?;
        Self::from_raw(vocab, facts_raw, train_raw, valid_raw, test_raw)
    }

    /// Augments raw stores that share `vocab`.
    pub fn from_raw(
        vocab: Vocabulary,
        facts: TripleStore,
        train: TripleStore,
        valid: Option<TripleStore>,
        test: Option<TripleStore>,
    ) -> Result<Self> {
        let n = vocab.entity_count();
        let r = vocab.relation_count();
        let aug = |s: &TripleStore| -> Result<(TripleStore, Vocabulary)> {
            augment_relations(&s.widen(n, r.max(s.relation_count()))?, &vocab)
        };
        let (facts, avocab) = aug(&facts)?;
        let (train, _) = aug(&train)?;
        let valid = valid.as_ref().map(|s| aug(s).map(|x| x.0)).transpose()?;
        let test = test.as_ref().map(|s| aug(s).map(|x| x.0)).transpose()?;
        Ok(Self {
            vocab: avocab,
            facts,
            train,
            valid,
            test,
        })
    }

    pub fn entity_count(&self) -> usize {
        self.vocab.entity_count()
    }

    /// Facts ∪ train: the graph used for scoring at evaluation time.
    pub fn graph(&self) -> Result<TripleStore> {
        self.facts.union(&self.train)
    }

    /// Every known-true triple across all splits.
    pub fn all_known(&self) -> Result<TripleStore> {
        let mut all = self.graph()?;
        for s in [&self.valid, &self.test].into_iter().flatten() {
            all = all.union(s)?;
        }
        Ok(all)
    }
}
