//! Acceptance suite: one PASS/FAIL line per criterion, in order. Runs the
//! benchmark trainings, so expect roughly half an hour on one core.
//!
//! `cargo test -p drum-core --test acceptance`. Pass criterion numbers as
//! arguments to run a subset, e.g. `-- 5 6 7`.

mod common;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use common::*;
use drum_core::diffgraph::Tensor;
use drum_core::eval::{
    apply_rules, evaluate, evaluate_queries, queries_from_store, EvalOptions, FilterIndex, FnScorer, Metrics,
    ModelScorer, RuleScorer, Scorer,
};
use drum_core::kg::{
    augment_relations, load_triples, make_inductive_split, split_facts_train, Dataset, DatasetPaths, OperatorSet,
    TripleStore, Vocabulary,
};
use drum_core::model::{score_with_coefficients, toy_grad_check, write_checkpoint, DrumModel, ModelConfig};
use drum_core::rules::{construct_coefficients, extract_rules, mine_rules, theorem1_chain, write_rules};
use drum_core::trainer::{train, train_with, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const UMLS_MRR: f64 = 0.75;
const UMLS_HITS10: f64 = 0.94;
const UMLS_BUDGET: Duration = Duration::from_secs(30 * 60);
const FAMILY_MRR: f64 = 0.88;
const FAMILY_HITS1: f64 = 0.82;
const FAMILY_BUDGET: Duration = Duration::from_secs(60 * 60);
const KINSHIP_HITS10: f64 = 0.85;
const KINSHIP_BUDGET: Duration = Duration::from_secs(15 * 60);
const GRAD_TOLERANCE: f64 = 1e-4;
const ROUND_TRIP_TOLERANCE: f64 = 1e-9;
const SEEDS: [u64; 3] = [1, 2, 3];

fn data_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Run {
    test: Metrics,
    epochs: usize,
    best_epoch: usize,
    elapsed: Duration,
}

/// Train with early stopping on validation MRR, then evaluate on test over
/// facts ∪ train with all known triples filtered.
fn benchmark(name: &str, t: usize, l: usize, seed: u64, inspect: impl FnOnce(&DrumModel, &Vocabulary)) -> Run {
    let start = Instant::now();
    let paths = DatasetPaths::from_dir(data_dir(name)).unwrap();
    let ds = Dataset::load(&paths, None, (3.0, seed)).unwrap();
    let ops = OperatorSet::from_store(&ds.facts, &ds.vocab).unwrap();
    let graph = OperatorSet::from_store(&ds.graph().unwrap(), &ds.vocab).unwrap();
    let filter = FilterIndex::from_stores([&ds.all_known().unwrap()]);
    let heads: Vec<usize> = (1..ops.len()).collect();
    let valid = ds.valid.clone().unwrap();
    let valid_q = queries_from_store(&valid, &ds.vocab, false);
    let mut model = DrumModel::new(ModelConfig {
        seed,
        ..ModelConfig::new(t, l, ops.len())
    })
    .unwrap();
    let validator = |m: &DrumModel| {
        let s = ModelScorer::new(m, &graph, &heads)?;
        Ok(evaluate_queries(&s, &valid_q, &filter, true)?.mrr)
    };
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let report = train_with(&mut model, &ds.train, &ops, &cfg, Some(&validator), &mut |_| {}).unwrap();
    let scorer = ModelScorer::new(&model, &graph, &heads).unwrap();
    let test = evaluate(&scorer, ds.test.as_ref().unwrap(), &ds.vocab, &filter, EvalOptions::default()).unwrap();
    let elapsed = start.elapsed();
    inspect(&model, &ds.vocab);
    Run {
        test,
        epochs: report.epochs.len(),
        best_epoch: report.best_epoch,
        elapsed,
    }
}

fn describe(r: &Run) -> String {
    format!(
        "mrr={:.3} h1={:.3} h10={:.3} epochs={} best={} {:.0}s",
        r.test.mrr,
        r.test.hits1,
        r.test.hits10,
        r.epochs,
        r.best_epoch,
        r.elapsed.as_secs_f64()
    )
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Default)]
struct UmlsRuns {
    drum4: Vec<Run>,
    drum1: Vec<Run>,
}

impl UmlsRuns {
    fn drum4(&mut self) -> &[Run] {
        if self.drum4.is_empty() {
            self.drum4 = SEEDS.iter().map(|s| benchmark("umls", 2, 4, *s, |_, _| {})).collect();
        }
        &self.drum4
    }

    fn drum1(&mut self) -> &[Run] {
        if self.drum1.is_empty() {
            self.drum1 = SEEDS.iter().map(|s| benchmark("umls", 2, 1, *s, |_, _| {})).collect();
        }
        &self.drum1
    }
}

fn criterion_1(umls: &mut UmlsRuns) -> Outcome {
    let runs = umls.drum4();
    for (s, r) in SEEDS.iter().zip(runs) {
        println!("    seed {s}: {}", describe(r));
    }
    let mrr = mean(runs.iter().map(|r| r.test.mrr));
    let h10 = mean(runs.iter().map(|r| r.test.hits10));
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap();
    outcome(
        mrr >= UMLS_MRR && h10 >= UMLS_HITS10 && slowest <= UMLS_BUDGET,
        format!(
            "UMLS DRUM-4 3-seed mean MRR {mrr:.4} (>= {UMLS_MRR}), Hits@10 {h10:.4} (>= {UMLS_HITS10}), slowest run {:.0}s",
            slowest.as_secs_f64()
        ),
    )
}

fn criterion_2(umls: &mut UmlsRuns) -> Outcome {
    let m4 = mean(umls.drum4().iter().map(|r| r.test.mrr));
    let runs = umls.drum1();
    for (s, r) in SEEDS.iter().zip(runs) {
        println!("    DRUM-1 seed {s}: {}", describe(r));
    }
    let m1 = mean(runs.iter().map(|r| r.test.mrr));
    outcome(
        m4 - m1 >= 0.0,
        format!("UMLS mean MRR DRUM-4 {m4:.4} vs DRUM-1 {m1:.4}, margin {:+.4}", m4 - m1),
    )
}

fn criterion_3() -> Outcome {
    let r = benchmark("family", 3, 4, 1, |model, vocab| {
        let Some(head) = vocab.relation_id("brother") else { return };
        let rules = mine_rules(model, &[head], None, true).unwrap();
        for rule in rules.get(head).iter().take(5) {
            let body: Vec<&str> = rule.body.iter().map(|k| vocab.relation_name(*k).unwrap()).collect();
            println!("    brother <- {} : {:.3}", body.join(" . "), rule.confidence);
        }
    });
    outcome(
        r.test.mrr >= FAMILY_MRR && r.test.hits1 >= FAMILY_HITS1 && r.elapsed <= FAMILY_BUDGET,
        format!("Family T=3 L=4: {} (MRR >= {FAMILY_MRR}, Hits@1 >= {FAMILY_HITS1})", describe(&r)),
    )
}

fn criterion_4() -> Outcome {
    let r = benchmark("kinship", 2, 4, 1, |_, _| {});
    outcome(
        r.test.hits10 >= KINSHIP_HITS10 && r.elapsed <= KINSHIP_BUDGET,
        format!("Kinship T=2 L=4: {} (Hits@10 >= {KINSHIP_HITS10})", describe(&r)),
    )
}

/// A model whose output layer is zero except for a large bias on `op`
/// emits exactly one-hot coefficients on `op` at every step.
fn constant_path_model(k: usize, t: usize, op: usize) -> DrumModel {
    let mut m = DrumModel::new(ModelConfig {
        hidden_dim: 4,
        embed_dim: 4,
        ..ModelConfig::new(t, 1, k)
    })
    .unwrap();
    let (w, b) = (m.output_weight_id(), m.output_bias_id());
    m.params_mut().get_mut(w).data_mut().fill(0.0);
    let bias = m.params_mut().get_mut(b).data_mut();
    bias.fill(0.0);
    bias[op] = 1e3;
    m
}

fn criterion_5() -> Outcome {
    let mut g = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0usize;
    for case in 0..200 {
        let n = g.random_range(1..=20);
        let r = g.random_range(1..=4);
        let edges = g.random_range(0..=3 * n);
        let kg = random_kg(&mut g, n, r, edges);
        let k = kg.ops.len();
        let t = g.random_range(1..=3);
        let path: Vec<usize> = (0..t).map(|_| g.random_range(0..k)).collect();
        let c = one_hot_tensor(std::slice::from_ref(&path), k);
        let sources: Vec<usize> = (0..n).collect();
        let scores = score_with_coefficients(&c, &kg.ops, &sources).unwrap();
        // score_all_tails through a real model: a repeated atom.
        let model = constant_path_model(k, t, path[0]);
        let head = g.random_range(1..k);
        let repeated = vec![path[0]; t];
        for x in 0..n {
            if scores.col(x) != walk_counts(&kg.store, n, &path, x) {
                return outcome(false, format!("case {case}: path {path:?} from {x} disagrees with walk count"));
            }
            if model.score_all_tails(head, x, &kg.ops).unwrap() != walk_counts(&kg.store, n, &repeated, x) {
                return outcome(false, format!("case {case}: score_all_tails on {repeated:?} from {x} disagrees"));
            }
            checked += 1;
        }
    }
    outcome(true, format!("200 random KGs, {checked} sources, exact walk-count agreement"))
}

fn criterion_6() -> Outcome {
    let cfg = ModelConfig {
        hidden_dim: 3,
        embed_dim: 3,
        seed: 11,
        ..ModelConfig::new(2, 2, 5)
    };
    let report = toy_grad_check(cfg, 1e-5, GRAD_TOLERANCE).unwrap();
    let err = report.max_relative_error();
    outcome(
        report.passed() && err < GRAD_TOLERANCE,
        format!("full loss, T=2 L=2: max relative error {err:.3e} (< {GRAD_TOLERANCE:.0e})"),
    )
}

fn criterion_7() -> Outcome {
    let mut g = ChaCha8Rng::seed_from_u64(7);
    let mut rules_seen = 0;
    for case in 0..200 {
        let k = g.random_range(2..=8);
        let t = g.random_range(1..=3);
        let count = g.random_range(0..=8);
        let rules = random_rules(&mut g, 1, k, t, count);
        rules_seen += rules.len();
        let c = construct_coefficients(&rules, t, k).unwrap();
        let floor = rules.iter().map(|r| r.confidence).fold(1.0, f64::min) / 2.0;
        let got = extract_rules(&c, 1, floor).unwrap();
        let mut want = rules.clone();
        want.sort_by(|a, b| a.body.cmp(&b.body));
        let mut got_sorted = got.clone();
        got_sorted.sort_by(|a, b| a.body.cmp(&b.body));
        let same = got_sorted.len() == want.len()
            && got_sorted
                .iter()
                .zip(&want)
                .all(|(a, b)| a.body == b.body && (a.confidence - b.confidence).abs() <= ROUND_TRIP_TOLERANCE);
        if !same {
            return outcome(false, format!("case {case}: {rules:?} came back as {got:?}"));
        }
    }
    outcome(true, format!("200 rule lists ({rules_seen} rules) round-trip within {ROUND_TRIP_TOLERANCE:.0e}"))
}

fn criterion_8() -> Outcome {
    let mut g = ChaCha8Rng::seed_from_u64(8);
    let mut longest = 0;
    for case in 0..1000 {
        let k = g.random_range(2..=6);
        let t = g.random_range(1..=4);
        let c = random_rank1(&mut g, t, k);
        let o: Vec<usize> = (0..t).map(|_| g.random_range(0..k)).collect();
        let s: Vec<usize> = (0..t).map(|_| g.random_range(0..k)).collect();
        let chain = theorem1_chain(&c, &o, &s).unwrap();
        longest = longest.max(chain.len());
        if let Err(e) = check_chain(&c, &o, &s, &chain) {
            return outcome(false, format!("case {case}: {e}"));
        }
    }
    outcome(true, format!("1000 rank-1 tensors, all chain conditions hold (longest chain {longest})"))
}

fn criterion_9() -> Outcome {
    let mut g = ChaCha8Rng::seed_from_u64(9);
    let mut ties = 0usize;
    for case in 0..100 {
        let n = g.random_range(2..=15);
        let edges = g.random_range(1..=3 * n);
        let kg = random_kg(&mut g, n, 2, edges);
        let k = kg.ops.len();
        let levels: Vec<f64> = (0..n * n * k).map(|_| f64::from(g.random_range(0..4u8))).collect();
        let score = |x: usize, h: usize| -> Vec<f64> { (0..n).map(|y| levels[(x * n + y) * k + h]).collect() };
        let filter = FilterIndex::from_stores([&kg.store]);
        let got = evaluate(&FnScorer::new(n, score), &kg.store, &kg.vocab, &filter, EvalOptions::default()).unwrap();
        let ranks: Vec<f64> = kg
            .store
            .triples()
            .iter()
            .map(|q| {
                let known: HashSet<usize> = kg
                    .store
                    .triples()
                    .iter()
                    .filter(|t| t.subject == q.subject && t.relation == q.relation)
                    .map(|t| t.object)
                    .collect();
                brute_rank(&score(q.subject, q.relation), q.object, &known)
            })
            .collect();
        ties += ranks.iter().filter(|r| r.fract() != 0.0).count();
        let (mrr, h1, h3, h10) = brute_metrics(&ranks);
        if (got.mrr, got.hits1, got.hits3, got.hits10) != (mrr, h1, h3, h10) {
            return outcome(false, format!("case {case}: {got:?} vs oracle ({mrr}, {h1}, {h3}, {h10})"));
        }
    }
    outcome(true, format!("100 instances match exactly ({ties} queries with fractional tie ranks)"))
}

/// TransE control: margin ranking with one corrupted tail per triple,
/// L1 distance, plain SGD.
fn transe_scores(train: &TripleStore, n: usize, r: usize, seed: u64) -> impl Fn(usize, usize) -> Vec<f64> + Sync {
    const DIM: usize = 32;
    const EPOCHS: usize = 50;
    const LR: f64 = 0.01;
    const MARGIN: f64 = 1.0;
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let bound = 6.0 / (DIM as f64).sqrt();
    let mut ent: Vec<f64> = (0..n * DIM).map(|_| g.random_range(-bound..bound)).collect();
    let mut rel: Vec<f64> = (0..r * DIM).map(|_| g.random_range(-bound..bound)).collect();
    let normalize = |v: &mut [f64]| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v.iter_mut().for_each(|x| *x /= norm);
    };
    for i in 0..r {
        normalize(&mut rel[i * DIM..(i + 1) * DIM]);
    }
    let dist = |ent: &[f64], rel: &[f64], h: usize, l: usize, t: usize| -> f64 {
        (0..DIM)
            .map(|d| (ent[h * DIM + d] + rel[l * DIM + d] - ent[t * DIM + d]).abs())
            .sum()
    };
    let triples = train.triples().to_vec();
    for _ in 0..EPOCHS {
        for e in 0..n {
            normalize(&mut ent[e * DIM..(e + 1) * DIM]);
        }
        for tr in &triples {
            let neg = g.random_range(0..n);
            let (h, l, t) = (tr.subject, tr.relation, tr.object);
            if MARGIN + dist(&ent, &rel, h, l, t) - dist(&ent, &rel, h, l, neg) <= 0.0 {
                continue;
            }
            for d in 0..DIM {
                let pos = (ent[h * DIM + d] + rel[l * DIM + d] - ent[t * DIM + d]).signum();
                let negs = (ent[h * DIM + d] + rel[l * DIM + d] - ent[neg * DIM + d]).signum();
                ent[h * DIM + d] -= LR * (pos - negs);
                rel[l * DIM + d] -= LR * (pos - negs);
                ent[t * DIM + d] += LR * pos;
                ent[neg * DIM + d] -= LR * negs;
            }
        }
    }
    move |x, l| (0..n).map(|y| -dist(&ent, &rel, x, l, y)).collect()
}

/// Wraps a scorer and counts non-finite outputs.
struct FiniteCheck<'a> {
    inner: &'a dyn Scorer,
    bad: AtomicUsize,
    scored: AtomicUsize,
}

impl Scorer for FiniteCheck<'_> {
    fn entity_count(&self) -> usize {
        self.inner.entity_count()
    }

    fn score(&self, head: usize, sources: &[usize]) -> drum_core::Result<Tensor> {
        let s = self.inner.score(head, sources)?;
        self.scored.fetch_add(sources.len(), Ordering::Relaxed);
        self.bad.fetch_add(s.data().iter().filter(|v| !v.is_finite()).count(), Ordering::Relaxed);
        Ok(s)
    }
}

fn criterion_10() -> Outcome {
    let seed = 1;
    let dir = data_dir("wn18-subset");
    let (train_raw, vocab) = load_triples(dir.join("train.txt"), None).unwrap();
    let (test_raw, vocab) = load_triples(dir.join("test.txt"), Some(vocab)).unwrap();
    let (n, r) = (vocab.entity_count(), vocab.relation_count());
    let graph_raw = train_raw.widen(n, r).unwrap();
    let inductive = make_inductive_split(&graph_raw, &test_raw).unwrap();
    let overlap = inductive.entities().intersection(&test_raw.entities()).count();
    assert_eq!(overlap, 0, "inductive split shares {overlap} entities with test");

    let (facts, queries) = split_facts_train(&inductive, 3.0, seed).unwrap();
    let ds = Dataset::from_raw(vocab.clone(), facts, queries, None, Some(test_raw)).unwrap();
    let (graph, _) = augment_relations(&graph_raw, &vocab).unwrap();
    let test = ds.test.as_ref().unwrap();
    let ops = OperatorSet::from_store(&ds.facts, &ds.vocab).unwrap();
    let mut model = DrumModel::new(ModelConfig {
        seed,
        ..ModelConfig::new(2, 4, ops.len())
    })
    .unwrap();
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    train(&mut model, &ds.train, &ops, &cfg).unwrap();

    let graph_ops = OperatorSet::from_store(&graph, &ds.vocab).unwrap();
    let filter = FilterIndex::from_stores([&graph, test]);
    let heads: Vec<usize> = (1..ops.len()).collect();
    let rules = mine_rules(&model, &heads, Some(0.0), true).unwrap();
    let rule_scorer = RuleScorer::new(&rules, &graph_ops);
    let checked = FiniteCheck {
        inner: &rule_scorer,
        bad: AtomicUsize::new(0),
        scored: AtomicUsize::new(0),
    };
    let rule_m = evaluate(&checked, test, &ds.vocab, &filter, EvalOptions::default()).unwrap();
    let direct_ok = test.triples().iter().take(20).all(|q| {
        apply_rules(&rules, &graph_ops, q.relation, q.subject)
            .unwrap()
            .iter()
            .all(|v| v.is_finite())
    });
    let bad = checked.bad.load(Ordering::Relaxed);

    let transe_train = ds.graph().unwrap();
    let transe = FnScorer::new(n, transe_scores(&transe_train, n, ds.vocab.relation_count(), seed));
    let control = evaluate(&transe, test, &ds.vocab, &filter, EvalOptions::default()).unwrap();
    let model_m = evaluate(
        &ModelScorer::new(&model, &graph_ops, &heads).unwrap(),
        test,
        &ds.vocab,
        &filter,
        EvalOptions::default(),
    )
    .unwrap();
    println!(
        "    train triples {} (of {}), test {}, overlap 0; rules {}; model-on-graph Hits@10 {:.4}",
        inductive.len(),
        graph_raw.len(),
        test.len() / 2,
        rules.len(),
        model_m.hits10
    );
    outcome(
        bad == 0 && direct_ok && rule_m.hits10 > control.hits10,
        format!(
            "WN inductive: rule Hits@10 {:.4} vs TransE control {:.4}; {} queries scored, {bad} non-finite",
            rule_m.hits10,
            control.hits10,
            checked.scored.load(Ordering::Relaxed)
        ),
    )
}

struct Artifacts {
    log: Vec<String>,
    checkpoint: Vec<u8>,
    rules: Vec<u8>,
    metrics: String,
}

fn small_run(seed: u64, parallel: bool) -> Artifacts {
    let paths = DatasetPaths::from_dir(data_dir("umls")).unwrap();
    let ds = Dataset::load(&paths, None, (3.0, seed)).unwrap();
    let ops = OperatorSet::from_store(&ds.facts, &ds.vocab).unwrap();
    let graph = OperatorSet::from_store(&ds.graph().unwrap(), &ds.vocab).unwrap();
    let filter = FilterIndex::from_stores([&ds.all_known().unwrap()]);
    let heads: Vec<usize> = (1..ops.len()).collect();
    let valid_q = queries_from_store(ds.valid.as_ref().unwrap(), &ds.vocab, false);
    let mut model = DrumModel::new(ModelConfig {
        hidden_dim: 16,
        embed_dim: 16,
        seed,
        ..ModelConfig::new(2, 2, ops.len())
    })
    .unwrap();
    let validator = |m: &DrumModel| {
        let s = ModelScorer::new(m, &graph, &heads)?;
        Ok(evaluate_queries(&s, &valid_q, &filter, parallel)?.mrr)
    };
    let cfg = TrainConfig {
        seed,
        max_epochs: Some(2),
        shards: 3,
        parallel,
        ..TrainConfig::default()
    };
    let report = train_with(&mut model, &ds.train, &ops, &cfg, Some(&validator), &mut |_| {}).unwrap();
    let log = report
        .epochs
        .iter()
        .map(|e| e.log_line().rsplit_once('\t').unwrap().0.to_owned())
        .collect();
    let mut checkpoint = Vec::new();
    write_checkpoint(&model, &ds.vocab.content_hash(), &mut checkpoint).unwrap();
    let mut rules = Vec::new();
    write_rules(&mine_rules(&model, &heads, None, parallel).unwrap(), &ds.vocab, &mut rules).unwrap();
    let scorer = ModelScorer::new(&model, &graph, &heads).unwrap();
    let options = EvalOptions {
        parallel,
        ..EvalOptions::default()
    };
    let metrics = evaluate(&scorer, ds.test.as_ref().unwrap(), &ds.vocab, &filter, options)
        .unwrap()
        .record();
    Artifacts {
        log,
        checkpoint,
        rules,
        metrics,
    }
}

fn criterion_11() -> Outcome {
    let a = small_run(4, true);
    let b = small_run(4, true);
    let c = small_run(4, false);
    let mut diffs = Vec::new();
    for (name, other) in [("repeat", &b), ("sequential", &c)] {
        if a.log != other.log {
            diffs.push(format!("{name}: loss log"));
        }
        if a.checkpoint != other.checkpoint {
            diffs.push(format!("{name}: checkpoint"));
        }
        if a.rules != other.rules {
            diffs.push(format!("{name}: rule file"));
        }
        if a.metrics != other.metrics {
            diffs.push(format!("{name}: metrics"));
        }
    }
    let pass = diffs.is_empty();
    outcome(
        pass,
        if pass {
            format!(
                "seed 4 twice and once sequential: loss log, {}-byte checkpoint, {}-byte rule file and metrics identical",
                a.checkpoint.len(),
                a.rules.len()
            )
        } else {
            format!("differences: {}", diffs.join(", "))
        },
    )
}

fn main() {
    let wanted: HashSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut umls = UmlsRuns::default();
    let mut failed = Vec::new();
    for id in 1..=11 {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = match id {
            1 => criterion_1(&mut umls),
            2 => criterion_2(&mut umls),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(),
            10 => criterion_10(),
            _ => criterion_11(),
        };
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {verdict}  {}  [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
