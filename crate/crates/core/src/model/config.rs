use crate::error::{Error, Result};

/// Architecture and numeric settings of a [`DrumModel`](super::DrumModel).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Maximum rule length T.
    pub rule_len: usize,
    /// Number of rank-1 terms L.
    pub rank: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    /// Operators including the identity: `2·|R| + 1` for an augmented
    /// vocabulary.
    pub operator_count: usize,
    pub epsilon_log: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rule_len: 2,
            rank: 4,
            hidden_dim: 128,
            embed_dim: 128,
            operator_count: 2,
            epsilon_log: 1e-10,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn new(rule_len: usize, rank: usize, operator_count: usize) -> Self {
        Self {
            rule_len,
            rank,
            operator_count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Argument(m.to_owned()));
        if self.rule_len < 1 {
            return fail("rule length T must be at least 1");
        }
        if self.rank < 1 {
            return fail("rank L must be at least 1");
        }
        if self.operator_count < 2 {
            return fail("need the identity plus at least one relation operator");
        }
        if self.hidden_dim < 1 || self.embed_dim < 1 {
            return fail("hidden and embedding sizes must be positive");
        }
        if self.epsilon_log.is_nan() || self.epsilon_log <= 0.0 {
            return fail("epsilon_log must be positive");
        }
        Ok(())
    }

    /// Relations that can be queried as heads: every operator but the
    /// identity.
    pub fn head_count(&self) -> usize {
        self.operator_count - 1
    }

    pub(crate) fn to_header(&self) -> String {
        format!(
            "rule_len={}\nrank={}\nhidden_dim={}\nembed_dim={}\noperator_count={}\nepsilon_log={:?}\nseed={}\n",
            self.rule_len,
            self.rank,
            self.hidden_dim,
            self.embed_dim,
            self.operator_count,
            self.epsilon_log,
            self.seed
        )
    }

    pub(crate) fn from_header(fields: &std::collections::HashMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(
            fields: &std::collections::HashMap<String, String>,
            key: &str,
        ) -> Result<T> {
            fields
                .get(key)
                .ok_or_else(|| Error::Checkpoint(format!("header is missing `{key}`")))?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("header field `{key}` is malformed")))
        }
        let cfg = Self {
            rule_len: get(fields, "rule_len")?,
            rank: get(fields, "rank")?,
            hidden_dim: get(fields, "hidden_dim")?,
            embed_dim: get(fields, "embed_dim")?,
            operator_count: get(fields, "operator_count")?,
            epsilon_log: get(fields, "epsilon_log")?,
            seed: get(fields, "seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
