//! Mini-batch Adam training with global-norm clipping and early stopping
//! on validation MRR.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffgraph::{Gradients, ParameterSet, Tape, Tensor};
use crate::error::{Error, Result};
use crate::kg::{OperatorSet, TripleStore};
use crate::model::{DrumModel, Query};
use crate::parallel;

/// Epoch budget when there is no validation set to stop on.
pub const FIXED_EPOCHS: usize = 10;
/// Upper bound on epochs when early stopping is active.
pub const MAX_EPOCHS_WITH_VALIDATION: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// `None` picks [`FIXED_EPOCHS`] without validation and
    /// [`MAX_EPOCHS_WITH_VALIDATION`] with it.
    pub max_epochs: Option<usize>,
    pub clip_norm: f64,
    pub patience: usize,
    pub seed: u64,
    /// Each batch is cut into this many shards, each on its own tape.
    /// Results are reduced in shard order, so the count, not the thread
    /// pool, determines the arithmetic.
    pub shards: usize,
    /// Run shards on the rayon pool when the `parallel` feature is built.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: None,
            clip_norm: 5.0,
            patience: 5,
            seed: 0,
            shards: 1,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Argument("learning rate must be positive".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Argument("clip norm must be positive".into()));
        }
        if self.shards < 1 {
            return Err(Error::Argument("shard count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn epoch_budget(&self, has_validation: bool) -> usize {
        self.max_epochs.unwrap_or(if has_validation {
            MAX_EPOCHS_WITH_VALIDATION
        } else {
            FIXED_EPOCHS
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ParameterSet) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, _, p)| Tensor::zeros(p.rows(), p.cols()))
                .collect()
        };
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Scales every gradient by `clip_norm / g` when the global L2 norm `g`
/// exceeds `clip_norm`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, clip_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > clip_norm {
        grads.scale(clip_norm / norm);
    }
    norm
}

/// One bias-corrected Adam update. Missing gradients count as zero.
pub fn adam_step(params: &mut ParameterSet, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.m.len() != params.len() || grads.len() != params.len() {
        return Err(Error::Contract(format!(
            "optimizer state for {} parameters, gradients for {}, model has {}",
            state.m.len(),
            grads.len(),
            params.len()
        )));
    }
    let ids: Vec<_> = params.ids().collect();
    for id in &ids {
        let i = id.index();
        let shape = params.get(*id).shape();
        if state.m[i].shape() != shape || grads.get(*id).is_some_and(|g| g.shape() != shape) {
            return Err(Error::Contract(format!("shape mismatch for `{}`", params.name(*id))));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for id in ids {
        let i = id.index();
        let g = grads.get(id);
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = params.get_mut(id).data_mut();
        for e in 0..p.len() {
            let ge = g.map_or(0.0, |g| g.data()[e]);
            m[e] = b1 * m[e] + (1.0 - b1) * ge;
            v[e] = b2 * v[e] + (1.0 - b2) * ge * ge;
            let m_hat = m[e] / c1;
            let v_hat = v[e] / c2;
            p[e] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Training queries: one per triple of the augmented train store.
pub fn train_queries(train: &TripleStore) -> Vec<Query> {
    train
        .triples()
        .iter()
        .map(|t| Query {
            source: t.subject,
            head: t.relation,
            target: t.object,
        })
        .collect()
}

/// Mean loss over `queries` and its gradient, computed on `shards` tapes
/// and summed in shard order.
pub fn batch_gradients(
    model: &DrumModel,
    ops: &OperatorSet,
    queries: &[Query],
    shards: usize,
    parallel: bool,
) -> Result<(f64, Gradients)> {
    if queries.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let shards = shards.clamp(1, queries.len());
    let size = queries.len().div_ceil(shards);
    let chunks: Vec<&[Query]> = queries.chunks(size).collect();
    let denom = queries.len() as f64;
    let parts = parallel::try_map_indexed(chunks.len(), parallel, |s| {
        let mut tape = Tape::new(model.params());
        let loss = model.batch_loss(&mut tape, ops, chunks[s], denom)?;
        let value = tape.scalar(loss).expect("loss is scalar");
        Ok::<_, Error>((value, tape.backward(loss)?))
    })?;
    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(model.params());
    for (l, g) in &parts {
        total += l;
        grads.accumulate(g)?;
    }
    Ok((total, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_mrr: Option<f64>,
    pub seconds: f64,
}

impl EpochRecord {
    /// `epoch<TAB>mean_loss<TAB>val_MRR<TAB>seconds`; a missing MRR is `-`.
    pub fn log_line(&self) -> String {
        let mrr = self.val_mrr.map_or_else(|| "-".to_owned(), |m| format!("{m:.6}"));
        format!("{}\t{:.6}\t{}\t{:.3}", self.epoch, self.mean_loss, mrr, self.seconds)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds on return.
    pub best_epoch: usize,
    pub best_val_mrr: Option<f64>,
}

impl TrainReport {
    pub fn write_log(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in &self.epochs {
            writeln!(out, "{}", e.log_line())?;
        }
        out.flush()
    }
}

/// Validation callback: MRR of the current model.
pub type Validator<'a> = dyn Fn(&DrumModel) -> Result<f64> + 'a;

/// Trains without validation for a fixed budget.
pub fn train(model: &mut DrumModel, train: &TripleStore, ops: &OperatorSet, config: &TrainConfig) -> Result<TrainReport> {
    train_with(model, train, ops, config, None, &mut |_| {})
}

/// Trains on every query of `train` with operators `ops` (built from the
/// facts only). With a validator, stops once validation MRR has not
/// improved for `patience` epochs and restores the best parameters.
pub fn train_with(
    model: &mut DrumModel,
    train: &TripleStore,
    ops: &OperatorSet,
    config: &TrainConfig,
    validate: Option<&Validator<'_>>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainReport> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Argument("empty training store".into()));
    }
    let mut queries = train_queries(train);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.params());
    let budget = config.epoch_budget(validate.is_some());
    let mut records = Vec::with_capacity(budget);
    let mut best: Option<(f64, usize, ParameterSet)> = None;
    let mut stale = 0;
    for epoch in 1..=budget {
        let start = Instant::now();
        queries.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in queries.chunks(config.batch_size) {
            let (loss, mut grads) = batch_gradients(model, ops, batch, config.shards, config.parallel)?;
            if !loss.is_finite() {
                return Err(Error::Contract(format!("non-finite loss {loss} in epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            clip_gradients(&mut grads, config.clip_norm);
            adam_step(model.params_mut(), &grads, &mut adam, config.learning_rate)?;
        }
        let val_mrr = validate.map(|v| v(model)).transpose()?;
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / queries.len() as f64,
            val_mrr,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!("{}", record.log_line());
        on_epoch(&record);
        records.push(record);
        if let Some(mrr) = val_mrr {
            if best.as_ref().is_none_or(|(b, _, _)| mrr > *b) {
                best = Some((mrr, epoch, model.params().clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    let (best_epoch, best_val_mrr) = match best {
        Some((mrr, epoch, params)) => {
            model.set_params(params)?;
            (epoch, Some(mrr))
        }
        None => (records.len(), None),
    };
    Ok(TrainReport {
        epochs: records,
        best_epoch,
        best_val_mrr,
    })
}

#[cfg(test)]
mod tests;
