use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use drum_core::kg::DatasetPaths;

use crate::settings::ConfigFile;
use crate::UsageError;

pub const DEFAULT_RATIO: f64 = 3.0;

#[derive(Args, Clone, Debug, Default)]
pub struct DataArgs {
    /// Dataset name under the data root, or a dataset directory.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Root holding one directory per dataset.
    #[arg(long, env = "DRUM_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub facts: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// facts:train ratio used when no facts file exists.
    #[arg(long)]
    pub ratio: Option<f64>,
}

/// Dataset locations after applying defaults.
#[derive(Clone, Debug)]
pub struct ResolvedData {
    pub label: String,
    pub paths: DatasetPaths,
    pub ratio: f64,
}

fn require(p: &Path) -> Result<PathBuf> {
    if !p.is_file() {
        return Err(UsageError(format!("{} does not exist", p.display())).into());
    }
    Ok(p.to_path_buf())
}

impl DataArgs {
    pub fn resolve(&self, file: &ConfigFile) -> Result<ResolvedData> {
        let ratio = match self.ratio {
            Some(r) => r,
            None => file.get("ratio")?.unwrap_or(DEFAULT_RATIO),
        };
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(UsageError(format!("ratio must be positive, got {ratio}")).into());
        }
        let dataset = match &self.dataset {
            Some(d) => Some(d.clone()),
            None => file.get::<String>("dataset")?,
        };
        let mut paths = match &dataset {
            Some(name) => {
                let direct = PathBuf::from(name);
                let dir = if direct.is_dir() { direct } else { self.data_dir.join(name) };
                if !dir.is_dir() {
                    return Err(UsageError(format!(
                        "dataset `{name}` not found (looked in {})",
                        dir.display()
                    ))
                    .into());
                }
                DatasetPaths::from_dir(&dir).map_err(|e| UsageError(e.to_string()))?
            }
            None => {
                let Some(train) = &self.train else {
                    return Err(UsageError("give --dataset or --train".into()).into());
                };
                DatasetPaths {
                    train: require(train)?,
                    ..DatasetPaths::default()
                }
            }
        };
        if let Some(p) = &self.train {
            paths.train = require(p)?;
        }
        for (slot, flag) in [
            (&mut paths.facts, &self.facts),
            (&mut paths.valid, &self.valid),
            (&mut paths.test, &self.test),
        ] {
            if let Some(p) = flag {
                *slot = Some(require(p)?);
            }
        }
        let label = dataset.unwrap_or_else(|| paths.train.display().to_string());
        Ok(ResolvedData { label, paths, ratio })
    }
}
