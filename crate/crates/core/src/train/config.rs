use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::Activation;

/// Hyperparameters of the unsupervised model and the downstream classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Entropic regularisation strength.
    pub gamma: f64,
    /// Sinkhorn rounds.
    pub k: usize,
    /// Power of the Euclidean distance in the cost matrix.
    pub p: f64,
    /// Fraction of nodes kept per level.
    pub ratio: f64,
    pub levels: usize,
    pub hidden: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub seed: u64,
    pub folds: usize,
    /// Share of each training split held out for model selection.
    pub val_fraction: f64,
    pub decoder_activation: Activation,
    pub classifier_hidden: usize,
    pub classifier_epochs: usize,
    pub classifier_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            k: 5,
            p: 2.0,
            ratio: 0.5,
            levels: 1,
            hidden: 64,
            lr: 0.01,
            max_epochs: 200,
            lr_decay: 0.5,
            decay_every: 50,
            seed: 0,
            folds: 10,
            val_fraction: 0.1,
            decoder_activation: Activation::Sigmoid,
            classifier_hidden: 64,
            classifier_epochs: 100,
            classifier_batch: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("p", self.p),
            ("lr", self.lr),
            ("lr_decay", self.lr_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("k", self.k),
            ("levels", self.levels),
            ("hidden", self.hidden),
            ("max_epochs", self.max_epochs),
            ("folds", self.folds),
            ("classifier_hidden", self.classifier_hidden),
            ("classifier_epochs", self.classifier_epochs),
            ("classifier_batch", self.classifier_batch),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::contract(format!("{name} must be at least 1")));
            }
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::contract(format!("ratio must lie in (0, 1], got {}", self.ratio)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::contract("val_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}
