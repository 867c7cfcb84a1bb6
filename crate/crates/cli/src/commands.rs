use std::fs;
use std::path::Path;

use otcoarsen::checkpoint::Checkpoint;
use otcoarsen::data::{build_features, parse_tu_dataset, FeatureSpec};
use otcoarsen::dot::coarsening_sequence_dot;
use otcoarsen::graph::Graph;
use otcoarsen::train::{cross_validate, derive_seed, evaluate_frozen, CvReport, FoldReport, TrainConfig};
use otcoarsen::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::failure::{usage, Failure};
use crate::options::{resolve, ConfigArgs, DatasetChoice, EvalArgs, ExportArgs, SweepArgs, TrainArgs};

const SUBSAMPLE_STREAM: u64 = 100;

struct Loaded {
    graphs: Vec<Graph<f64>>,
    spec: FeatureSpec,
}

fn load(choice: &DatasetChoice, fallback: Option<FeatureSpec>, seed: u64) -> Result<Loaded, Failure> {
    let raw = parse_tu_dataset(&choice.dir, &choice.name)?;
    let spec = choice.features.or(fallback).unwrap_or_else(|| FeatureSpec::default_for(&raw));
    let mut graphs = build_features(&raw, spec)?;
    if let Some(fraction) = choice.subsample {
        let keep = ((fraction * graphs.len() as f64).ceil() as usize).max(1);
        let mut idx: Vec<usize> = (0..graphs.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SUBSAMPLE_STREAM, 0)));
        idx.truncate(keep);
        idx.sort_unstable();
        graphs = idx.into_iter().map(|i| graphs[i].clone()).collect();
    }
    Ok(Loaded { graphs, spec })
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, body).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn summary(report: &CvReport) -> String {
    format!(
        "accuracy {:.4} ± {:.4} over {} folds",
        report.mean,
        report.std,
        report.fold_accuracies.len()
    )
}

/// Metrics file contents. Contains no timestamps, so identical runs produce
/// identical files.
#[derive(Serialize)]
struct Metrics<'a> {
    dataset: &'a str,
    graphs: usize,
    feature_spec: FeatureSpec,
    feature_dim: usize,
    config: &'a TrainConfig,
    mean_accuracy: f64,
    std_accuracy: f64,
    fold_accuracies: &'a [f64],
    folds: &'a [FoldReport],
}

pub fn train(args: TrainArgs) -> Result<(), Failure> {
    let (cfg, choice) = resolve(&args.cfg, &args.data)?;
    let data = load(&choice, None, cfg.seed)?;
    let outcome = cross_validate(&data.graphs, &cfg)?;
    let feature_dim = data.graphs[0].feature_dim();
    let out = args.out.unwrap_or_else(|| ".".into());

    let ckpt = Checkpoint::new(&choice.name, &cfg, data.spec, &outcome.models);
    write(&out.join("checkpoint.json"), &ckpt.to_json()?)?;
    let metrics = Metrics {
        dataset: &choice.name,
        graphs: data.graphs.len(),
        feature_spec: data.spec,
        feature_dim,
        config: &cfg,
        mean_accuracy: outcome.report.mean,
        std_accuracy: outcome.report.std,
        fold_accuracies: &outcome.report.fold_accuracies,
        folds: &outcome.report.folds,
    };
    let body = serde_json::to_string_pretty(&metrics).map_err(Error::from)? + "\n";
    write(&out.join("metrics.json"), &body)?;
    println!("{}", summary(&outcome.report));
    Ok(())
}

#[derive(Serialize)]
struct EvalReport<'a> {
    dataset: &'a str,
    graphs: usize,
    mean_accuracy: f64,
    std_accuracy: f64,
    fold_accuracies: &'a [f64],
}

fn checkpoint_and_data(data_args: &crate::options::DatasetArgs, path: &Path) -> Result<(Checkpoint, DatasetChoice, Loaded), Failure> {
    let ckpt = Checkpoint::load(path)?;
    let (_, choice) = resolve(&ConfigArgs::default(), data_args)?;
    let data = load(&choice, Some(ckpt.feature_spec), ckpt.config.seed)?;
    Ok((ckpt, choice, data))
}

pub fn eval(args: EvalArgs) -> Result<(), Failure> {
    let (ckpt, choice, data) = checkpoint_and_data(&args.data, &args.checkpoint)?;
    let models = ckpt.models::<f64>(data.graphs[0].feature_dim())?;
    let report = evaluate_frozen(&data.graphs, &models, &ckpt.config)?;
    if let Some(path) = &args.metrics {
        let body = EvalReport {
            dataset: &choice.name,
            graphs: data.graphs.len(),
            mean_accuracy: report.mean,
            std_accuracy: report.std,
            fold_accuracies: &report.fold_accuracies,
        };
        write(path, &(serde_json::to_string_pretty(&body).map_err(Error::from)? + "\n"))?;
    }
    println!("{}", summary(&report));
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    gamma: f64,
    k: usize,
    mean_accuracy: f64,
    std_accuracy: f64,
}

/// Unique values in first-occurrence order.
fn dedup_by_key<T: Copy, K: PartialEq>(values: &[T], key: impl Fn(T) -> K) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for &v in values {
        if !out.iter().any(|&o| key(o) == key(v)) {
            out.push(v);
        }
    }
    out
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let (base, choice) = resolve(&args.cfg, &args.data)?;
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let gammas = dedup_by_key(&args.gammas, f64::to_bits);
    let ks = dedup_by_key(&args.ks, |k| k);
    if gammas.is_empty() || ks.is_empty() {
        return Err(usage("--gammas and --ks need at least one value each"));
    }
    let grid: Vec<TrainConfig> = gammas
        .iter()
        .flat_map(|&gamma| ks.iter().map(move |&k| (gamma, k)))
        .map(|(gamma, k)| TrainConfig { gamma, k, ..base.clone() })
        .collect();
    for cfg in &grid {
        cfg.validate().map_err(|e| usage(e.to_string()))?;
    }
    let data = load(&choice, None, base.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let reports: Vec<CvReport> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|cfg| cross_validate(&data.graphs, cfg).map(|o| o.report))
            .collect::<Result<_, _>>()
    })?;

    let mut table = csv::Writer::from_writer(Vec::new());
    for (cfg, report) in grid.iter().zip(&reports) {
        let row = SweepRow {
            gamma: cfg.gamma,
            k: cfg.k,
            mean_accuracy: report.mean,
            std_accuracy: report.std,
        };
        table.serialize(row).map_err(|e| Failure::runtime(e.to_string()))?;
        println!("gamma={} k={}: {}", cfg.gamma, cfg.k, summary(report));
    }
    let bytes = table.into_inner().map_err(|e| Failure::runtime(e.to_string()))?;
    write(&args.out, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn export(args: ExportArgs) -> Result<(), Failure> {
    let (ckpt, _, data) = checkpoint_and_data(&args.data, &args.checkpoint)?;
    let models = ckpt.models::<f64>(data.graphs[0].feature_dim())?;
    let g = data.graphs.get(args.graph).ok_or(Error::Index {
        what: "graph",
        index: args.graph,
        len: data.graphs.len(),
    })?;
    let model = models.get(args.fold).ok_or(Error::Index {
        what: "fold",
        index: args.fold,
        len: models.len(),
    })?;
    for (level, doc) in coarsening_sequence_dot(g, model, &ckpt.config)?.iter().enumerate() {
        let path = args.out.join(format!("level_{level}.dot"));
        write(&path, doc)?;
        println!("{}", path.display());
    }
    Ok(())
}
