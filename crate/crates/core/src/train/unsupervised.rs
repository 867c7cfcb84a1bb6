use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

use super::adam::{adam_step, lr_at_epoch, AdamState};
use super::config::TrainConfig;
use super::forward::{loss, loss_and_gradient};
use super::model::ModelParams;

/// A graph whose class label has been removed. The unsupervised trainer only
/// accepts these.
#[derive(Debug, Clone)]
pub struct UnlabeledGraph<T>(Graph<T>);

impl<T: Scalar> UnlabeledGraph<T> {
    pub fn new(g: &Graph<T>) -> Self {
        Self(g.unlabeled())
    }

    pub fn graph(&self) -> &Graph<T> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training loss at the start of the epoch.
    pub train_loss: f64,
    /// Mean validation loss after the epoch's update.
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Snapshot with the lowest validation loss (the final parameters when
    /// there is no validation set).
    pub params: ModelParams<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn mean_loss<T: Scalar>(graphs: &[UnlabeledGraph<T>], params: &ModelParams<T>, cfg: &TrainConfig) -> Result<f64> {
    let losses: Vec<T> = graphs
        .par_iter()
        .map(|g| loss(g.graph(), params, cfg))
        .collect::<Result<_>>()?;
    Ok(losses.iter().map(|l| l.as_f64()).sum::<f64>() / graphs.len() as f64)
}

/// Full-batch Adam on the mean per-graph transport loss.
///
/// Per-graph gradients are computed in parallel and summed in input order,
/// so results do not depend on the thread count.
pub fn train_unsupervised<T: Scalar>(
    train: &[UnlabeledGraph<T>],
    validation: &[UnlabeledGraph<T>],
    cfg: &TrainConfig,
    init: ModelParams<T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    init.validate()?;
    if train.is_empty() {
        return Err(Error::contract("unsupervised training needs at least one graph"));
    }
    let mut params = init;
    let mut adam = AdamState::new(params.shapes(), T::lit(cfg.lr));
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let scale = T::one() / T::from_usize_lossy(train.len());

    for epoch in 0..cfg.max_epochs {
        let lr = lr_at_epoch(cfg.lr, cfg.lr_decay, cfg.decay_every, epoch);
        adam.lr = T::lit(lr);
        let per_graph: Vec<(T, Vec<Matrix<T>>)> = train
            .par_iter()
            .map(|g| loss_and_gradient(g.graph(), &params, cfg))
            .collect::<Result<_>>()?;
        let mut total = T::zero();
        let mut grad: Vec<Matrix<T>> = params.shapes().into_iter().map(|(r, c)| Matrix::zeros(r, c)).collect();
        for (l, g) in &per_graph {
            total = total + *l;
            for (acc, gi) in grad.iter_mut().zip(g) {
                acc.add_assign(gi)?;
            }
        }
        let grad: Vec<Matrix<T>> = grad.into_iter().map(|g| g.scale(scale)).collect();
        adam_step(&mut params.matrices_mut(), &grad, &mut adam)?;

        let validation_loss = if validation.is_empty() {
            None
        } else {
            Some(mean_loss(validation, &params, cfg)?)
        };
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: (total * scale).as_f64(),
            validation_loss,
        });
        if let Some(v) = validation_loss {
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, epoch, params.clone()));
            }
        }
    }
    let (params, best_epoch) = match best {
        Some((_, epoch, p)) => (p, epoch),
        None => (params, cfg.max_epochs - 1),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}
