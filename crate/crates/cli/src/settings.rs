//! Flag and config-file resolution. A config file is flat `key = value`
//! text; keys are the long flag names, with `-` and `_` interchangeable.
//! Flags win over the file, the file wins over defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::Args;
use drum_core::model::ModelConfig;
use drum_core::trainer::TrainConfig;

use crate::UsageError;

const KNOWN_KEYS: &[&str] = &[
    "T", "L", "hidden_dim", "embed_dim", "lr", "batch_size", "epochs", "clip_norm", "patience", "seed",
    "threads", "shards", "out", "dataset", "ratio",
];

#[derive(Args, Clone, Debug, Default)]
pub struct SharedArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Maximum rule length.
    #[arg(long = "T", global = true)]
    pub rule_len: Option<usize>,
    /// Rank of the confidence tensor approximation.
    #[arg(long = "L", global = true)]
    pub rank: Option<usize>,
    #[arg(long, global = true)]
    pub hidden_dim: Option<usize>,
    #[arg(long, global = true)]
    pub embed_dim: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Epoch cap (default: 10 without validation data, 100 with early stopping).
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub clip_norm: Option<f64>,
    /// Early-stopping patience in epochs.
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Tapes per training batch; fixes the gradient reduction order.
    #[arg(long, global = true)]
    pub shards: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Parsed config file.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    path: Option<PathBuf>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(UsageError(format!("{}:{}: expected `key = value`", path.display(), i + 1)).into());
            };
            let key = normalize(k);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(UsageError(format!("{}:{}: unknown key `{}`", path.display(), i + 1, k.trim())).into());
            }
            values.insert(key, v.trim().to_owned());
        }
        Ok(Self {
            values,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                let origin = self.path.as_ref().map_or_else(String::new, |p| format!("{}: ", p.display()));
                UsageError(format!("{origin}bad value `{v}` for `{key}`")).into()
            }),
        }
    }
}

/// Fully resolved run settings.
#[derive(Clone, Debug)]
pub struct Settings {
    pub rule_len: usize,
    pub rank: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub train: TrainConfig,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub file: ConfigFile,
}

impl Settings {
    pub fn resolve(args: &SharedArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        fn pick<T: FromStr + Clone>(flag: &Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T> {
            Ok(match flag {
                Some(v) => v.clone(),
                None => file.get(key)?.unwrap_or(default),
            })
        }
        let model = ModelConfig::default();
        let train_default = TrainConfig::default();
        let seed = pick(&args.seed, &file, "seed", 0)?;
        let epochs = match args.epochs {
            Some(e) => Some(e),
            None => file.get("epochs")?,
        };
        let threads = match args.threads {
            Some(t) => Some(t),
            None => file.get("threads")?,
        };
        let train = TrainConfig {
            learning_rate: pick(&args.lr, &file, "lr", train_default.learning_rate)?,
            batch_size: pick(&args.batch_size, &file, "batch_size", train_default.batch_size)?,
            max_epochs: epochs,
            clip_norm: pick(&args.clip_norm, &file, "clip_norm", train_default.clip_norm)?,
            patience: pick(&args.patience, &file, "patience", train_default.patience)?,
            seed,
            shards: pick(&args.shards, &file, "shards", train_default.shards)?,
            parallel: false,
        };
        train.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(Self {
            rule_len: pick(&args.rule_len, &file, "T", model.rule_len)?,
            rank: pick(&args.rank, &file, "L", model.rank)?,
            hidden_dim: pick(&args.hidden_dim, &file, "hidden_dim", model.hidden_dim)?,
            embed_dim: pick(&args.embed_dim, &file, "embed_dim", model.embed_dim)?,
            train,
            threads,
            out: pick(&args.out, &file, "out", PathBuf::from("out"))?,
            file,
        })
    }

    pub fn model_config(&self, operator_count: usize) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            rule_len: self.rule_len,
            rank: self.rank,
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
            operator_count,
            seed: self.train.seed,
            ..ModelConfig::default()
        };
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }

    /// `key=value` lines echoing every resolved setting.
    pub fn echo(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let _ = writeln!(s, "T={}", self.rule_len);
        let _ = writeln!(s, "L={}", self.rank);
        let _ = writeln!(s, "hidden_dim={}", self.hidden_dim);
        let _ = writeln!(s, "embed_dim={}", self.embed_dim);
        let _ = writeln!(s, "lr={}", t.learning_rate);
        let _ = writeln!(s, "batch_size={}", t.batch_size);
        let _ = writeln!(
            s,
            "epochs={}",
            t.max_epochs.map_or_else(|| "auto".to_owned(), |e| e.to_string())
        );
        let _ = writeln!(s, "clip_norm={}", t.clip_norm);
        let _ = writeln!(s, "patience={}", t.patience);
        let _ = writeln!(s, "seed={}", t.seed);
        let _ = writeln!(s, "shards={}", t.shards);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse("T = 3\nhidden-dim=16 # small\nseed = 4\n", Path::new("c")).unwrap();
        assert_eq!(file.get::<usize>("T").unwrap(), Some(3));
        assert_eq!(file.get::<usize>("hidden_dim").unwrap(), Some(16));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "T = 3\nhidden_dim = 16\nseed = 4\n").unwrap();
        let args = SharedArgs {
            config: Some(path),
            seed: Some(9),
            ..SharedArgs::default()
        };
        let s = Settings::resolve(&args).unwrap();
        assert_eq!((s.rule_len, s.hidden_dim, s.train.seed, s.rank), (3, 16, 9, 4));
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let err = ConfigFile::parse("colour = red\n", Path::new("c")).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
