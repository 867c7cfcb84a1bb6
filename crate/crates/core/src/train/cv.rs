use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::split_folds;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

use super::classifier::{fit_classifier, mean_std};
use super::config::TrainConfig;
use super::derive_seed;
use super::forward::forward_pass;
use super::model::ModelParams;
use super::readout::readout;
use super::unsupervised::{train_unsupervised, EpochRecord, UnlabeledGraph};

const STREAM_INIT: u64 = 0;
const STREAM_VALIDATION: u64 = 1;
const STREAM_CLASSIFIER: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub accuracy: f64,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
}

/// Per-fold and aggregate test accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub folds: Vec<FoldReport>,
}

impl CvReport {
    fn from_folds(folds: Vec<FoldReport>) -> Self {
        let fold_accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let (mean, std) = mean_std(&fold_accuracies);
        Self {
            fold_accuracies,
            mean,
            std,
            folds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvOutcome<T> {
    pub report: CvReport,
    /// Frozen unsupervised model of each fold.
    pub models: Vec<ModelParams<T>>,
    /// Fold index of every graph.
    pub assignment: Vec<usize>,
}

fn labels_of<T: Scalar>(graphs: &[Graph<T>]) -> Result<Vec<usize>> {
    graphs
        .iter()
        .enumerate()
        .map(|(i, g)| g.label().ok_or_else(|| Error::contract(format!("graph {i} has no class label"))))
        .collect()
}

/// Readout features of every graph under a frozen model.
pub fn graph_features<T: Scalar>(graphs: &[Graph<T>], params: &ModelParams<T>, cfg: &TrainConfig) -> Result<Vec<Vec<T>>> {
    graphs
        .par_iter()
        .map(|g| readout(&forward_pass(g, params, cfg)?.embeddings))
        .collect()
}

fn fold_accuracy<T: Scalar>(
    graphs: &[Graph<T>],
    labels: &[usize],
    assignment: &[usize],
    fold: usize,
    params: &ModelParams<T>,
    cfg: &TrainConfig,
) -> Result<f64> {
    let features = graph_features(graphs, params, cfg)?;
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let (mut xt, mut yt, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, f) in features.into_iter().enumerate() {
        if assignment[i] == fold {
            xs.push(f);
            ys.push(labels[i]);
        } else {
            xt.push(f);
            yt.push(labels[i]);
        }
    }
    let clf = fit_classifier(&xt, &yt, num_classes, cfg, derive_seed(cfg.seed, STREAM_CLASSIFIER, fold as u64))?;
    clf.accuracy(&xs, &ys)
}

/// Stratified k-fold evaluation: per fold, unsupervised training on the
/// training portion (with a seeded validation hold-out), frozen readout
/// features, and a classifier tested on the held-out fold.
pub fn cross_validate<T: Scalar>(graphs: &[Graph<T>], cfg: &TrainConfig) -> Result<CvOutcome<T>> {
    cfg.validate()?;
    let labels = labels_of(graphs)?;
    let assignment = split_folds(graphs.len(), &labels, cfg.folds, cfg.seed)?;
    let d = graphs[0].feature_dim();

    let per_fold: Vec<(FoldReport, ModelParams<T>)> = (0..cfg.folds)
        .into_par_iter()
        .map(|fold| {
            let mut train: Vec<usize> = (0..graphs.len()).filter(|&i| assignment[i] != fold).collect();
            train.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_VALIDATION, fold as u64)));
            let n_val = if train.len() > 1 {
                ((cfg.val_fraction * train.len() as f64).ceil() as usize).min(train.len() - 1)
            } else {
                0
            };
            let strip = |idx: &[usize]| -> Vec<UnlabeledGraph<T>> {
                let mut idx = idx.to_vec();
                idx.sort_unstable();
                idx.iter().map(|&i| UnlabeledGraph::new(&graphs[i])).collect()
            };
            let validation = strip(&train[..n_val]);
            let fit = strip(&train[n_val..]);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INIT, fold as u64));
            let init = ModelParams::init(d, cfg, &mut rng);
            let outcome = train_unsupervised(&fit, &validation, cfg, init)?;
            let accuracy = fold_accuracy(graphs, &labels, &assignment, fold, &outcome.params, cfg)?;
            Ok((
                FoldReport {
                    fold,
                    accuracy,
                    best_epoch: Some(outcome.best_epoch),
                    history: outcome.history,
                },
                outcome.params,
            ))
        })
        .collect::<Result<_>>()?;

    let (folds, models): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();
    Ok(CvOutcome {
        report: CvReport::from_folds(folds),
        models,
        assignment,
    })
}

/// Re-runs the classifier stage of [`cross_validate`] with frozen per-fold
/// models. Given the same graphs and configuration it reproduces the
/// original accuracies exactly.
pub fn evaluate_frozen<T: Scalar>(graphs: &[Graph<T>], models: &[ModelParams<T>], cfg: &TrainConfig) -> Result<CvReport> {
    cfg.validate()?;
    if models.len() != cfg.folds {
        return Err(Error::Compat(format!("{} fold models for {} folds", models.len(), cfg.folds)));
    }
    let labels = labels_of(graphs)?;
    let assignment = split_folds(graphs.len(), &labels, cfg.folds, cfg.seed)?;
    let d = graphs[0].feature_dim();
    if let Some(m) = models.iter().find(|m| m.input_dim() != d) {
        return Err(Error::Compat(format!(
            "model expects {} node features, dataset has {d}",
            m.input_dim()
        )));
    }
    let folds = models
        .par_iter()
        .enumerate()
        .map(|(fold, params)| {
            Ok(FoldReport {
                fold,
                accuracy: fold_accuracy(graphs, &labels, &assignment, fold, params, cfg)?,
                best_epoch: None,
                history: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_folds(folds))
}
