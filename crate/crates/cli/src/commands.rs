use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use drum_core::eval::{
    evaluate, evaluate_queries, queries_from_store, EvalOptions, FilterIndex, Metrics, ModelScorer, RuleScorer, Scorer,
};
use drum_core::kg::{
    augment_relations, load_triples, make_inductive_split, sample_triples, split_facts_train, Dataset, OperatorSet,
    TripleStore, Vocabulary,
};
use drum_core::model::{load_checkpoint, save_checkpoint, toy_grad_check, DrumModel, ModelConfig};
use drum_core::rules::{mine_rules, read_rules, write_rules};
use drum_core::trainer::{train_with, TrainConfig, Validator};
use drum_core::parallel;

use crate::data::{DataArgs, ResolvedData};
use crate::manifest::Manifest;
use crate::settings::{Settings, SharedArgs};
use crate::{Graph, Mode, Split, UsageError};

pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(t) = threads else { return Ok(()) };
    if t == 0 {
        return Err(UsageError("--threads must be at least 1".into()).into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(t)
        .build_global()
        .context("configuring the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the `parallel` feature; --threads {t} has no effect");
    Ok(())
}

fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    1
}

fn out_dir(settings: &Settings) -> Result<&Path> {
    let dir = settings.out.as_path();
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_store(path: &Path, store: &TripleStore, vocab: &Vocabulary) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    store.write_tsv(vocab, &mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn data_manifest(m: &mut Manifest, data: &ResolvedData) {
    m.set("dataset", &data.label).set("ratio", data.ratio);
    let p = &data.paths;
    m.input("train", &p.train);
    for (label, path) in [("facts", &p.facts), ("valid", &p.valid), ("test", &p.test)] {
        if let Some(path) = path {
            m.input(label, path);
        }
    }
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let file = File::open(path).with_context(|| format!("opening vocabulary {}", path.display()))?;
    Vocabulary::from_tsv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn vocab_beside(checkpoint: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(
        || checkpoint.parent().unwrap_or(Path::new(".")).join("vocab.tsv"),
        Path::to_path_buf,
    )
}

/// Loads a checkpoint and its vocabulary, refusing a mismatched pair.
fn load_model(checkpoint: &Path, vocab: Option<&Path>) -> Result<(DrumModel, Vocabulary, PathBuf)> {
    let (model, hash) = load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let vpath = vocab_beside(checkpoint, vocab);
    let vocab = load_vocab(&vpath)?;
    if vocab.content_hash() != hash {
        return Err(UsageError(format!(
            "{} does not match the vocabulary {} was trained with",
            vpath.display(),
            checkpoint.display()
        ))
        .into());
    }
    Ok((model, vocab, vpath))
}

pub fn prepare(settings: &Settings, args: &DataArgs) -> Result<()> {
    let data = args.resolve(&settings.file)?;
    let seed = settings.train.seed;
    let (raw, mut vocab) = load_triples(&data.paths.train, None)?;
    let (facts, train) = split_facts_train(&raw, data.ratio, seed)?;
    let out = out_dir(settings)?;
    write_store(&out.join("facts.txt"), &facts, &vocab)?;
    write_store(&out.join("train.txt"), &train, &vocab)?;
    let mut counts = format!("facts={} train={}", facts.len(), train.len());
    for (name, path) in [("valid", &data.paths.valid), ("test", &data.paths.test)] {
        if let Some(p) = path {
            let (store, v) = load_triples(p, Some(vocab))?;
            vocab = v;
            write_store(&out.join(format!("{name}.txt")), &store, &vocab)?;
            counts.push_str(&format!(" {name}={}", store.len()));
        }
    }
    let (aug, _) = vocab.augmented();
    write_file(&out.join("vocab.tsv"), &aug.to_tsv())?;
    let mut m = Manifest::new("prepare");
    m.set("seed", seed);
    data_manifest(&mut m, &data);
    m.write(out)?;
    println!(
        "{counts} entities={} relations={}",
        vocab.entity_count(),
        vocab.relation_count()
    );
    Ok(())
}

pub fn train(settings: &Settings, args: &DataArgs, parallel_batch: bool) -> Result<()> {
    let data = args.resolve(&settings.file)?;
    let mut cfg: TrainConfig = settings.train.clone();
    cfg.parallel = parallel_batch && parallel::available();
    if cfg.parallel && cfg.shards == 1 {
        cfg.shards = worker_count();
    }
    let ds = Dataset::load(&data.paths, None, (data.ratio, cfg.seed))?;
    let out = out_dir(settings)?;
    write_file(&out.join("vocab.tsv"), &ds.vocab.to_tsv())?;
    let ops = OperatorSet::from_store(&ds.facts, &ds.vocab)?;
    let mut model = DrumModel::new(settings.model_config(ops.len())?)?;

    let graph_ops;
    let filter;
    let valid_queries;
    let validator: Option<Box<Validator<'_>>> = match &ds.valid {
        Some(valid) if !valid.is_empty() => {
            graph_ops = OperatorSet::from_store(&ds.graph()?, &ds.vocab)?;
            filter = FilterIndex::from_stores([&ds.all_known()?]);
            valid_queries = queries_from_store(valid, &ds.vocab, false);
            let heads: Vec<usize> = valid_queries.iter().map(|q| q.head).collect();
            let (gops, filter, queries) = (&graph_ops, &filter, &valid_queries);
            Some(Box::new(move |m: &DrumModel| {
                let scorer = ModelScorer::new(m, gops, &heads)?;
                Ok(evaluate_queries(&scorer, queries, filter, parallel::available())?.mrr)
            }))
        }
        _ => None,
    };

    let log_path = out.join("train_log.tsv");
    let mut log = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
    let mut log_err = None;
    let report = train_with(&mut model, &ds.train, &ops, &cfg, validator.as_deref(), &mut |rec| {
        if log_err.is_none() {
            if let Err(e) = writeln!(log, "{}", rec.log_line()).and_then(|()| log.flush()) {
                log_err = Some(e);
            }
        }
        eprintln!("epoch {}", rec.log_line());
    })?;
    if let Some(e) = log_err {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }

    save_checkpoint(&model, &ds.vocab.content_hash(), out.join("model.ckpt"))?;
    let mut m = Manifest::new("train");
    m.extend(&settings.echo());
    m.set("operators", ops.len())
        .set("parallel_batch", cfg.parallel)
        .set("effective_shards", cfg.shards);
    data_manifest(&mut m, &data);
    m.write(out)?;
    let best = report
        .best_val_mrr
        .map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
    println!(
        "epochs={} best_epoch={} best_val_mrr={best} checkpoint={}",
        report.epochs.len(),
        report.best_epoch,
        out.join("model.ckpt").display()
    );
    Ok(())
}

fn check_min_conf(c: f64) -> Result<()> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(UsageError(format!("--min-conf must be a non-negative number, got {c}")).into());
    }
    Ok(())
}

pub fn mine(settings: &Settings, checkpoint: &Path, vocab: Option<&Path>, min_conf: Option<f64>) -> Result<()> {
    if let Some(c) = min_conf {
        check_min_conf(c)?;
    }
    let (model, vocab, vpath) = load_model(checkpoint, vocab)?;
    let heads: Vec<usize> = (1..model.config().operator_count).collect();
    let rules = mine_rules(&model, &heads, min_conf, parallel::available())?;
    let out = out_dir(settings)?;
    let path = out.join("rules.txt");
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_rules(&rules, &vocab, &mut w)?;
    w.flush()?;
    let mut m = Manifest::new("mine");
    m.set(
        "min_conf",
        min_conf.map_or_else(|| "auto".to_owned(), |c| c.to_string()),
    );
    m.input("checkpoint", checkpoint).input("vocab", &vpath);
    m.write(out)?;
    println!("rules={} heads={} file={}", rules.len(), rules.heads().count(), path.display());
    Ok(())
}

#[derive(Debug)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub vocab: Option<PathBuf>,
    pub data: DataArgs,
    pub split: Split,
    pub mode: Mode,
    pub rules: Option<PathBuf>,
    pub min_conf: Option<f64>,
    pub graph: Graph,
    pub graph_file: Option<PathBuf>,
    pub tail_only: bool,
}

pub fn eval(settings: &Settings, args: &EvalArgs) -> Result<()> {
    let data = args.data.resolve(&settings.file)?;
    let (model, vocab, vpath) = load_model(&args.checkpoint, args.vocab.as_deref())?;
    let ds = Dataset::load(&data.paths, Some(vocab), (data.ratio, settings.train.seed))?;
    let test = match args.split {
        Split::Valid => ds.valid.as_ref(),
        Split::Test => ds.test.as_ref(),
    }
    .ok_or_else(|| UsageError(format!("dataset {} has no {:?} split", data.label, args.split)))?;

    let mut known = ds.all_known()?;
    let (graph, vocab) = match &args.graph_file {
        Some(path) => {
            let (raw, v) = load_triples(path, Some(ds.vocab.clone()))?;
            let (g, v) = augment_relations(&raw, &v)?;
            known = known.union(&g)?;
            (g, v)
        }
        None => (
            match args.graph {
                Graph::FactsTrain => ds.graph()?,
                Graph::Facts => ds.facts.clone(),
            },
            ds.vocab.clone(),
        ),
    };
    let ops = OperatorSet::from_store(&graph, &vocab)?;
    if ops.len() != model.config().operator_count {
        bail!(
            "graph has {} operators but the model expects {}",
            ops.len(),
            model.config().operator_count
        );
    }
    let filter = FilterIndex::from_stores([&known]);
    let options = EvalOptions {
        tail_only: args.tail_only,
        parallel: parallel::available(),
    };

    let rules_path = args.rules.clone().unwrap_or_else(|| {
        args.checkpoint.parent().unwrap_or(Path::new(".")).join("rules.txt")
    });
    let rule_list;
    let rule_scorer;
    let model_scorer;
    let scorer: &dyn Scorer = match args.mode {
        Mode::Model => {
            let heads: BTreeSet<usize> = test.triples().iter().map(|t| t.relation).collect();
            model_scorer = ModelScorer::new(&model, &ops, &heads.into_iter().collect::<Vec<_>>())?;
            &model_scorer
        }
        Mode::Rules => {
            rule_list = match args.min_conf {
                Some(c) => {
                    check_min_conf(c)?;
                    let heads: Vec<usize> = (1..model.config().operator_count).collect();
                    mine_rules(&model, &heads, Some(c), parallel::available())?
                }
                None => {
                    let file =
                        File::open(&rules_path).with_context(|| format!("opening {}", rules_path.display()))?;
                    read_rules(BufReader::new(file), &rules_path, &vocab)?
                }
            };
            rule_scorer = RuleScorer::new(&rule_list, &ops);
            &rule_scorer
        }
    };
    let metrics: Metrics = evaluate(scorer, test, &vocab, &filter, options)?;

    println!("{metrics}");
    println!("{}", metrics.record());
    let out = out_dir(settings)?;
    write_file(&out.join("metrics.txt"), &format!("{}\n", metrics.record()))?;
    let mut m = Manifest::new("eval");
    m.set("seed", settings.train.seed)
        .set("split", format!("{:?}", args.split).to_lowercase())
        .set("mode", format!("{:?}", args.mode).to_lowercase())
        .set("tail_only", args.tail_only);
    if args.graph_file.is_none() {
        m.set("graph", format!("{:?}", args.graph).to_lowercase());
    }
    data_manifest(&mut m, &data);
    m.input("checkpoint", &args.checkpoint).input("vocab", &vpath);
    if let Some(g) = &args.graph_file {
        m.input("graph", g);
    }
    match (args.mode, args.min_conf) {
        (Mode::Rules, Some(c)) => {
            m.set("rules_min_conf", c);
        }
        (Mode::Rules, None) => {
            m.input("rules", &rules_path);
        }
        (Mode::Model, _) => {}
    }
    m.write(out)?;
    Ok(())
}

pub fn inductive_split(settings: &Settings, args: &DataArgs, test_count: Option<usize>) -> Result<()> {
    let data = args.resolve(&settings.file)?;
    let seed = settings.train.seed;
    let (train, vocab) = load_triples(&data.paths.train, None)?;
    let (test, graph, vocab) = match test_count {
        Some(0) => return Err(UsageError("--test-count must be positive".into()).into()),
        Some(count) => {
            let test = sample_triples(&train, count, seed)?;
            let held: std::collections::HashSet<_> = test.triples().iter().copied().collect();
            let rest = train.triples().iter().filter(|t| !held.contains(t)).copied();
            let graph = TripleStore::new(rest, train.entity_count(), train.relation_count())?;
            (test, graph, vocab)
        }
        None => {
            let Some(p) = &data.paths.test else {
                return Err(UsageError(format!("dataset {} has no test file; pass --test-count", data.label)).into());
            };
            let (test, vocab) = load_triples(p, Some(vocab))?;
            let graph = train.widen(vocab.entity_count(), vocab.relation_count())?;
            (test, graph, vocab)
        }
    };
    let inductive = make_inductive_split(&graph, &test)?;
    let test_entities = test.entities();
    let train_entities = inductive.entities();
    let overlap = train_entities.intersection(&test_entities).count();
    if overlap != 0 {
        bail!("inductive split leaked {overlap} test entities into training");
    }

    let out = out_dir(settings)?;
    write_store(&out.join("train.txt"), &inductive, &vocab)?;
    write_store(&out.join("test.txt"), &test, &vocab)?;
    write_store(&out.join("graph.txt"), &graph, &vocab)?;
    let report = format!(
        "train_triples={}\nremoved_triples={}\ntest_triples={}\ntrain_entities={}\ntest_entities={}\noverlap={overlap}\n",
        inductive.len(),
        graph.len() - inductive.len(),
        test.len(),
        train_entities.len(),
        test_entities.len(),
    );
    write_file(&out.join("report.txt"), &report)?;
    let mut m = Manifest::new("inductive-split");
    m.set("seed", seed).set(
        "test_count",
        test_count.map_or_else(|| "file".to_owned(), |c| c.to_string()),
    );
    data_manifest(&mut m, &data);
    m.write(out)?;
    print!("{report}");
    Ok(())
}

pub fn gradcheck(settings: &Settings, shared: &SharedArgs, step: f64, tolerance: f64) -> Result<()> {
    if !(step > 0.0 && tolerance > 0.0) {
        return Err(UsageError("--step and --tolerance must be positive".into()).into());
    }
    let probe = drum_core::model::toy_operators();
    let config = ModelConfig {
        hidden_dim: shared.hidden_dim.unwrap_or(3),
        embed_dim: shared.embed_dim.unwrap_or(3),
        seed: settings.train.seed,
        ..ModelConfig::new(settings.rule_len, settings.rank, probe.len())
    };
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    let report = toy_grad_check(config.clone(), step, tolerance)?;
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    let text = format!("{report}\nresult={verdict}\n");
    print!("{text}");
    let out = out_dir(settings)?;
    write_file(&out.join("gradcheck.txt"), &text)?;
    let mut m = Manifest::new("gradcheck");
    m.set("T", config.rule_len)
        .set("L", config.rank)
        .set("hidden_dim", config.hidden_dim)
        .set("embed_dim", config.embed_dim)
        .set("seed", config.seed)
        .set("step", step)
        .set("tolerance", tolerance);
    m.write(out)?;
    if !report.passed() {
        bail!(
            "gradient check failed: max relative error {:.3e} exceeds {tolerance:.1e}",
            report.max_relative_error()
        );
    }
    Ok(())
}
