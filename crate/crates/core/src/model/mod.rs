//! The scoring model: per-rank bidirectional LSTMs turn a head-relation
//! embedding into operator-mixing coefficients, and the coefficients drive a
//! rank-L sum of mixed sparse-operator products.
//!
//! For head H, query entity x, rank j and step i the score recurrence is
//!
//! ```text
//! u⁽ʲ⁾₀ = v_x
//! u⁽ʲ⁾ᵢ = Σ_k a[j][i][k] · A_kᵀ u⁽ʲ⁾ᵢ₋₁
//! s     = Σ_j u⁽ʲ⁾_T
//! ```
//!
//! so `s[y]` equals `v_xᵀ (Σ_j Π_i Σ_k a[j][i][k] A_k) v_y`.

mod checkpoint;
mod coefficients;
mod config;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use coefficients::{CoefficientTensor, RankSlice};
pub use config::ModelConfig;

use crate::diffgraph::{grad_check, mix_spmv_t, GradCheckReport, NodeId, ParamId, ParameterSet, Tape, Tensor, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::kg::{OperatorSet, SparseAdjacency};

const INIT_RANGE: f64 = 0.1;

/// One link-prediction query: rank `target` among tails of `(source, head, ·)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    pub source: usize,
    pub head: usize,
    pub target: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct LstmIds {
    input: ParamId,
    recurrent: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
struct ParamIds {
    embedding: ParamId,
    forward: Vec<LstmIds>,
    backward: Vec<LstmIds>,
    out_weight: ParamId,
    out_bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrumModel {
    config: ModelConfig,
    params: ParameterSet,
    ids: ParamIds,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-INIT_RANGE..INIT_RANGE))
        .collect();
    Tensor::from_vec(rows, cols, data).expect("shape matches length")
}

impl DrumModel {
    /// Fresh model: weights uniform in ±0.1, biases zero, all from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (h, e, k) = (config.hidden_dim, config.embed_dim, config.operator_count);
        let mut params = ParameterSet::new();
        let embedding = params.insert("head_embedding", uniform(&mut rng, config.head_count(), e))?;
        let mut cell = |params: &mut ParameterSet, prefix: String| -> Result<LstmIds> {
            Ok(LstmIds {
                input: params.insert(format!("{prefix}.input"), uniform(&mut rng, 4 * h, e))?,
                recurrent: params.insert(format!("{prefix}.recurrent"), uniform(&mut rng, 4 * h, h))?,
                bias: params.insert(format!("{prefix}.bias"), Tensor::zeros(4 * h, 1))?,
            })
        };
        let mut forward = Vec::with_capacity(config.rank);
        let mut backward = Vec::with_capacity(config.rank);
        for j in 0..config.rank {
            forward.push(cell(&mut params, format!("rank{j}.forward"))?);
            backward.push(cell(&mut params, format!("rank{j}.backward"))?);
        }
        let out_weight = params.insert("output.weight", uniform(&mut rng, k, 2 * h))?;
        let out_bias = params.insert("output.bias", Tensor::zeros(k, 1))?;
        Ok(Self {
            config,
            params,
            ids: ParamIds {
                embedding,
                forward,
                backward,
                out_weight,
                out_bias,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParameterSet) -> Result<()> {
        if params.len() != self.params.len()
            || params
                .iter()
                .zip(self.params.iter())
                .any(|(a, b)| a.1 != b.1 || a.2.shape() != b.2.shape())
        {
            return Err(Error::Contract("parameter set does not match model layout".into()));
        }
        self.params = params;
        Ok(())
    }

    /// Parameter id of the output network's weight matrix.
    pub fn output_weight_id(&self) -> ParamId {
        self.ids.out_weight
    }

    pub fn output_bias_id(&self) -> ParamId {
        self.ids.out_bias
    }

    fn embedding_row(&self, head: usize) -> Result<usize> {
        if head == 0 || head >= self.config.operator_count {
            return Err(Error::Index(format!(
                "head relation {head} has no embedding (valid heads are 1..{})",
                self.config.operator_count
            )));
        }
        Ok(head - 1)
    }

    fn lstm(&self, tape: &mut Tape<'_, '_>, cell: LstmIds, input: NodeId) -> Result<Vec<NodeId>> {
        let h = self.config.hidden_dim;
        let w_in = tape.param(cell.input);
        let bias = tape.param(cell.bias);
        // The input is the same embedding at every step, so its projection is shared.
        let projected = tape.affine(w_in, input, bias)?;
        let w_rec = tape.param(cell.recurrent);
        let mut states = Vec::with_capacity(self.config.rule_len);
        let mut prev: Option<(NodeId, NodeId)> = None;
        for _ in 0..self.config.rule_len {
            let z = match prev {
                Some((h_prev, _)) => {
                    let rec = tape.matmul(w_rec, h_prev)?;
                    tape.add(projected, rec)?
                }
                None => projected,
            };
            let zi = tape.slice_rows(z, 0, h)?;
            let zf = tape.slice_rows(z, h, h)?;
            let zg = tape.slice_rows(z, 2 * h, h)?;
            let zo = tape.slice_rows(z, 3 * h, h)?;
            let i_gate = tape.sigmoid(zi);
            let f_gate = tape.sigmoid(zf);
            let g_cand = tape.tanh(zg);
            let o_gate = tape.sigmoid(zo);
            let ig = tape.mul(i_gate, g_cand)?;
            let c = match prev {
                Some((_, c_prev)) => {
                    let fc = tape.mul(f_gate, c_prev)?;
                    tape.add(fc, ig)?
                }
                None => ig,
            };
            let tc = tape.tanh(c);
            let h_new = tape.mul(o_gate, tc)?;
            states.push(h_new);
            prev = Some((h_new, c));
        }
        Ok(states)
    }

    /// Records coefficient generation for the given heads. Returns
    /// `[rank][step]` nodes, each `operators × heads.len()`, softmax
    /// normalised per column.
    pub fn coefficient_nodes(&self, tape: &mut Tape<'_, '_>, heads: &[usize]) -> Result<Vec<Vec<NodeId>>> {
        let rows = heads
            .iter()
            .map(|h| self.embedding_row(*h))
            .collect::<Result<Vec<_>>>()?;
        let table = tape.param(self.ids.embedding);
        let emb = tape.embed(table, &rows)?;
        let w_out = tape.param(self.ids.out_weight);
        let b_out = tape.param(self.ids.out_bias);
        let t = self.config.rule_len;
        let mut out = Vec::with_capacity(self.config.rank);
        for j in 0..self.config.rank {
            let fwd = self.lstm(tape, self.ids.forward[j], emb)?;
            let bwd = self.lstm(tape, self.ids.backward[j], emb)?;
            let mut steps = Vec::with_capacity(t);
            for i in 0..t {
                let pair = tape.concat(&[fwd[i], bwd[t - 1 - i]])?;
                let logits = tape.affine(w_out, pair, b_out)?;
                steps.push(tape.softmax(logits));
            }
            out.push(steps);
        }
        Ok(out)
    }

    /// Coefficient tensors for each head, without recording gradients.
    pub fn coefficients(&self, heads: &[usize]) -> Result<Vec<CoefficientTensor>> {
        let mut tape = Tape::new(&self.params);
        let nodes = self.coefficient_nodes(&mut tape, heads)?;
        let (l, t, k) = (self.config.rank, self.config.rule_len, self.config.operator_count);
        let mut out = vec![CoefficientTensor::zeros(l, t, k); heads.len()];
        for (j, steps) in nodes.iter().enumerate() {
            for (i, node) in steps.iter().enumerate() {
                let v = tape.value(*node);
                for (g, coeff) in out.iter_mut().enumerate() {
                    for (kk, slot) in coeff.step_mut(j, i).iter_mut().enumerate() {
                        *slot = v.get(kk, g);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn generate_coefficients(&self, head: usize) -> Result<CoefficientTensor> {
        Ok(self.coefficients(&[head])?.remove(0))
    }

    /// Records the scores of every entity as a tail for each query column.
    /// `col_map[c]` names the coefficient column used by source `c`.
    pub fn score_nodes<'o>(
        &self,
        tape: &mut Tape<'_, 'o>,
        coeffs: &[Vec<NodeId>],
        col_map: &[usize],
        ops: &'o OperatorSet,
        sources: &[usize],
    ) -> Result<NodeId> {
        self.check_ops(ops)?;
        let x = tape.constant(Tensor::one_hot_columns(ops.entity_count(), sources)?);
        let mut total: Option<NodeId> = None;
        for steps in coeffs {
            let mut u = x;
            for a in steps {
                let a = if tape.shape(*a).1 == 1 {
                    *a
                } else {
                    tape.gather_cols(*a, col_map)?
                };
                u = tape.mix_spmv_t(ops, a, u)?;
            }
            total = Some(match total {
                Some(t) => tape.add(t, u)?,
                None => u,
            });
        }
        total.ok_or_else(|| Error::Contract("model has no ranks".into()))
    }

    fn check_ops(&self, ops: &OperatorSet) -> Result<()> {
        if ops.len() != self.config.operator_count {
            return Err(Error::Contract(format!(
                "model expects {} operators, got {}",
                self.config.operator_count,
                ops.len()
            )));
        }
        Ok(())
    }

    /// Sum over queries of `−log((s_y + ε) / (Σ s + n·ε))`, divided by
    /// `denominator`.
    pub fn batch_loss<'o>(
        &self,
        tape: &mut Tape<'_, 'o>,
        ops: &'o OperatorSet,
        queries: &[Query],
        denominator: f64,
    ) -> Result<NodeId> {
        if queries.is_empty() {
            return Err(Error::Argument("empty query batch".into()));
        }
        let n = ops.entity_count();
        let mut heads: BTreeMap<usize, usize> = BTreeMap::new();
        for q in queries {
            if q.source >= n || q.target >= n {
                return Err(Error::Index(format!("query {q:?} outside {n} entities")));
            }
            let next = heads.len();
            heads.entry(q.head).or_insert(next);
        }
        let mut order: Vec<(usize, usize)> = heads.iter().map(|(h, c)| (*c, *h)).collect();
        order.sort_unstable();
        let head_list: Vec<usize> = order.into_iter().map(|(_, h)| h).collect();
        let col_map: Vec<usize> = queries.iter().map(|q| heads[&q.head]).collect();
        let sources: Vec<usize> = queries.iter().map(|q| q.source).collect();
        let targets: Vec<usize> = queries.iter().map(|q| q.target).collect();

        let coeffs = self.coefficient_nodes(tape, &head_list)?;
        let scores = self.score_nodes(tape, &coeffs, &col_map, ops, &sources)?;
        let eps = self.config.epsilon_log;
        let picked = tape.pick_rows(scores, &targets)?;
        let numerator = tape.shift(picked, eps);
        let log_num = tape.log(numerator, LOG_FLOOR);
        let totals = tape.col_sum(scores);
        let denom = tape.shift(totals, n as f64 * eps);
        let log_den = tape.log(denom, LOG_FLOOR);
        let per_query = tape.sub(log_den, log_num)?;
        let sum = tape.sum(per_query);
        Ok(tape.scale(sum, 1.0 / denominator))
    }

    /// Loss of a single query.
    pub fn query_loss<'o>(&self, tape: &mut Tape<'_, 'o>, ops: &'o OperatorSet, query: Query) -> Result<NodeId> {
        self.batch_loss(tape, ops, &[query], 1.0)
    }

    /// Score of every entity as the tail of `(x, head, ·)`.
    pub fn score_all_tails(&self, head: usize, x: usize, ops: &OperatorSet) -> Result<Vec<f64>> {
        self.check_ops(ops)?;
        let coeffs = self.generate_coefficients(head)?;
        Ok(score_with_coefficients(&coeffs, ops, &[x])?.col(0))
    }
}

/// Scores for several sources under one head's coefficients: column c of
/// the result is the tail-score vector of `sources[c]`.
pub fn score_with_coefficients(coeffs: &CoefficientTensor, ops: &OperatorSet, sources: &[usize]) -> Result<Tensor> {
    if coeffs.operators() != ops.len() {
        return Err(Error::Contract(format!(
            "coefficients over {} operators, operator set has {}",
            coeffs.operators(),
            ops.len()
        )));
    }
    let x = Tensor::one_hot_columns(ops.entity_count(), sources)?;
    let mut total = Tensor::zeros(ops.entity_count(), sources.len());
    for j in 0..coeffs.rank() {
        let mut u = x.clone();
        for i in 0..coeffs.steps() {
            u = mix_spmv_t(ops, &coeffs.step_column(j, i), &u)?;
        }
        total.add_assign(&u);
    }
    Ok(total)
}

/// Operators of the built-in gradient-check problem: four entities, two
/// relations and their inverses, plus the identity.
pub fn toy_operators() -> OperatorSet {
    let op = |coords: &[(u32, u32)]| SparseAdjacency::from_coords(4, coords.to_vec()).expect("coordinates in range");
    OperatorSet::from_operators(
        4,
        vec![
            SparseAdjacency::identity(4),
            op(&[(0, 1), (2, 3), (1, 1)]),
            op(&[(1, 2), (3, 0)]),
            op(&[(1, 0), (3, 2), (1, 1)]),
            op(&[(2, 1), (0, 3)]),
        ],
    )
    .expect("operators share one dimension")
}

/// Checks the full batch loss on [`toy_operators`] against central
/// differences. Parameters are first moved away from the ±0.1 init (scaled
/// by 8 and offset), because at the init most gradient entries sit below
/// the finite-difference noise floor.
pub fn toy_grad_check(config: ModelConfig, step: f64, tolerance: f64) -> Result<GradCheckReport> {
    let ops = toy_operators();
    if config.operator_count != ops.len() {
        return Err(Error::Argument(format!(
            "the gradient-check problem has {} operators, config asks for {}",
            ops.len(),
            config.operator_count
        )));
    }
    let mut model = DrumModel::new(config)?;
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for (e, v) in model.params_mut().get_mut(id).data_mut().iter_mut().enumerate() {
            *v = *v * 8.0 + 0.05 * ((e % 7) as f64 - 3.0);
        }
    }
    let queries = [
        Query { source: 0, head: 1, target: 1 },
        Query { source: 1, head: 2, target: 2 },
        Query { source: 2, head: 3, target: 1 },
        Query { source: 3, head: 4, target: 0 },
    ];
    grad_check(model.params(), step, tolerance, |tape| {
        model.batch_loss(tape, &ops, &queries, queries.len() as f64)
    })
}
