use std::cell::Cell;

use super::*;
use crate::kg::{augment_relations, SparseAdjacency, Triple, Vocabulary};
use crate::model::ModelConfig;

fn grads_of(params: &ParameterSet, values: &[Vec<f64>]) -> Gradients {
    let mut g = Gradients::zeros_like(params);
    let mut tape = Tape::new(params);
    let mut total = None;
    for ((id, _, _), v) in params.iter().zip(values) {
        let p = tape.param(id);
        let c = tape.constant(Tensor::column(v.clone()));
        let d = tape.dot(p, c).unwrap();
        total = Some(match total {
            Some(t) => tape.add(t, d).unwrap(),
            None => d,
        });
    }
    g.accumulate(&tape.backward(total.unwrap()).unwrap()).unwrap();
    g
}

fn two_params() -> ParameterSet {
    let mut p = ParameterSet::new();
    p.insert("a", Tensor::column(vec![1.0, 2.0])).unwrap();
    p.insert("b", Tensor::column(vec![0.5])).unwrap();
    p
}

#[test]
fn clipping_halves_large_gradients() {
    let p = two_params();
    let mut g = grads_of(&p, &[vec![6.0, 0.0], vec![8.0]]);
    let norm = clip_gradients(&mut g, 5.0);
    assert_eq!(norm, 10.0);
    assert_eq!(g.get(p.id("a").unwrap()).unwrap().data(), &[3.0, 0.0]);
    assert_eq!(g.get(p.id("b").unwrap()).unwrap().data(), &[4.0]);
}

#[test]
fn clipping_leaves_small_gradients() {
    let p = two_params();
    let mut g = grads_of(&p, &[vec![0.0, 3.0], vec![0.0]]);
    let before = g.clone();
    assert_eq!(clip_gradients(&mut g, 5.0), 3.0);
    assert_eq!(g, before);
    let mut zero = Gradients::zeros_like(&p);
    assert_eq!(clip_gradients(&mut zero, 5.0), 0.0);
}

#[test]
fn first_adam_step_moves_by_learning_rate() {
    let mut p = two_params();
    let g = grads_of(&p, &[vec![0.3, -2.0], vec![0.0]]);
    let mut s = AdamState::new(&p);
    adam_step(&mut p, &g, &mut s, 0.001).unwrap();
    let a = p.get(p.id("a").unwrap()).data().to_vec();
    assert!((a[0] - (1.0 - 0.001)).abs() < 1e-9);
    assert!((a[1] - (2.0 + 0.001)).abs() < 1e-9);
    assert_eq!(p.get(p.id("b").unwrap()).data(), &[0.5]);
    assert_eq!(s.t, 1);
}

#[test]
fn repeated_gradient_does_not_grow_step() {
    let mut p = two_params();
    let g = grads_of(&p, &[vec![0.7, 0.7], vec![0.7]]);
    let mut s = AdamState::new(&p);
    let id = p.id("b").unwrap();
    let x0 = p.get(id).data()[0];
    adam_step(&mut p, &g, &mut s, 0.01).unwrap();
    let x1 = p.get(id).data()[0];
    adam_step(&mut p, &g, &mut s, 0.01).unwrap();
    let x2 = p.get(id).data()[0];
    assert!((x2 - x1).abs() <= (x1 - x0).abs() + 1e-12);
}

#[test]
fn zero_learning_rate_is_identity() {
    let mut p = two_params();
    let before = p.clone();
    let g = grads_of(&p, &[vec![1.0, -1.0], vec![3.0]]);
    let mut s = AdamState::new(&p);
    adam_step(&mut p, &g, &mut s, 0.0).unwrap();
    assert_eq!(p, before);
}

#[test]
fn adam_rejects_foreign_state() {
    let mut p = two_params();
    let mut other = ParameterSet::new();
    other.insert("x", Tensor::zeros(3, 3)).unwrap();
    let mut s = AdamState::new(&other);
    let g = Gradients::zeros_like(&p);
    assert!(matches!(adam_step(&mut p, &g, &mut s, 0.1), Err(Error::Contract(_))));
}

/// Five entities; facts make `h = r1 · r2` hold for every train triple.
fn perfect_rule_kg() -> (TripleStore, TripleStore, Vocabulary) {
    let mut vocab = Vocabulary::new();
    for e in ["a", "b", "c", "d", "e"] {
        vocab.intern_entity(e);
    }
    let (r1, r2, h) = (
        vocab.intern_relation("r1").unwrap(),
        vocab.intern_relation("r2").unwrap(),
        vocab.intern_relation("h").unwrap(),
    );
    let facts = TripleStore::new(
        vec![
            Triple::new(0, r1, 1),
            Triple::new(1, r2, 2),
            Triple::new(3, r1, 4),
            Triple::new(4, r2, 0),
            Triple::new(2, r1, 3),
            Triple::new(3, r2, 1),
        ],
        5,
        3,
    )
    .unwrap();
    let train = TripleStore::new(
        vec![Triple::new(0, h, 2), Triple::new(3, h, 0), Triple::new(2, h, 1)],
        5,
        3,
    )
    .unwrap();
    let (facts, aug) = augment_relations(&facts, &vocab).unwrap();
    let (train, _) = augment_relations(&train, &vocab).unwrap();
    (facts, train, aug)
}

fn toy_setup() -> (DrumModel, TripleStore, OperatorSet) {
    let (facts, train, vocab) = perfect_rule_kg();
    let ops = OperatorSet::from_store(&facts, &vocab).unwrap();
    let model = DrumModel::new(ModelConfig {
        hidden_dim: 8,
        embed_dim: 8,
        seed: 3,
        ..ModelConfig::new(2, 2, ops.len())
    })
    .unwrap();
    (model, train, ops)
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.05,
        batch_size: 6,
        max_epochs: Some(150),
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn perfect_rule_is_learned() {
    let (mut model, train, ops) = toy_setup();
    let report = super::train(&mut model, &train, &ops, &toy_config()).unwrap();
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.mean_loss).collect();
    for w in losses[..10].windows(2) {
        assert!(w[1] <= w[0] + 1e-3, "{losses:?}");
    }
    assert!(*losses.last().unwrap() < 0.1, "{losses:?}");
}

#[test]
fn training_is_reproducible() {
    let run = || {
        let (mut model, train, ops) = toy_setup();
        let cfg = TrainConfig {
            max_epochs: Some(5),
            ..toy_config()
        };
        let report = super::train(&mut model, &train, &ops, &cfg).unwrap();
        let losses: Vec<u64> = report.epochs.iter().map(|e| e.mean_loss.to_bits()).collect();
        (losses, model)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a, b);
    assert_eq!(ma, mb);
}

#[test]
fn shards_agree_with_single_tape() {
    let (model, train, ops) = toy_setup();
    let q = train_queries(&train);
    let (l1, g1) = batch_gradients(&model, &ops, &q, 1, false).unwrap();
    let (l3, g3) = batch_gradients(&model, &ops, &q, 3, true).unwrap();
    assert!((l1 - l3).abs() < 1e-12);
    for ((_, a), (_, b)) in g1.iter().zip(g3.iter()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn early_stopping_restores_best_epoch() {
    let (mut model, train, ops) = toy_setup();
    let calls = Cell::new(0usize);
    let snapshot = std::cell::RefCell::new(None);
    let validator = |m: &DrumModel| {
        calls.set(calls.get() + 1);
        if calls.get() == 2 {
            *snapshot.borrow_mut() = Some(m.clone());
            return Ok(0.9);
        }
        Ok(0.5)
    };
    let cfg = TrainConfig {
        patience: 3,
        max_epochs: None,
        ..toy_config()
    };
    let report = train_with(&mut model, &train, &ops, &cfg, Some(&validator), &mut |_| {}).unwrap();
    assert_eq!(report.epochs.len(), 5);
    assert_eq!(report.best_epoch, 2);
    assert_eq!(report.best_val_mrr, Some(0.9));
    assert_eq!(Some(model), snapshot.into_inner());
}

#[test]
fn empty_training_store_is_rejected() {
    let (mut model, _, ops) = toy_setup();
    let empty = TripleStore::new(vec![], 5, 7).unwrap();
    assert!(matches!(
        super::train(&mut model, &empty, &ops, &toy_config()),
        Err(Error::Argument(_))
    ));
}

#[test]
fn log_line_layout() {
    let r = EpochRecord {
        epoch: 3,
        mean_loss: 0.25,
        val_mrr: Some(0.5),
        seconds: 1.25,
    };
    assert_eq!(r.log_line(), "3\t0.250000\t0.500000\t1.250");
    let r = EpochRecord { val_mrr: None, ..r };
    assert_eq!(r.log_line(), "3\t0.250000\t-\t1.250");
}

#[test]
fn identity_operator_is_slot_zero() {
    let (_, _, ops) = toy_setup();
    assert_eq!(ops.get(0), Some(&SparseAdjacency::identity(5)));
}
