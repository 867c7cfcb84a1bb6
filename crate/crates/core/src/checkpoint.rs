//! Versioned JSON checkpoints of per-fold models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FeatureSpec;
use crate::error::{Error, Result};
use crate::gnn::{Activation, GcnLayer, LevelParams};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use crate::train::{ModelParams, TrainConfig};

pub const CHECKPOINT_VERSION: &str = "otcoarsen-ckpt/1";

/// A matrix as shape plus nested rows of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub shape: [usize; 2],
    pub data: Vec<Vec<f64>>,
}

impl StoredMatrix {
    pub fn store<T: Scalar>(m: &Matrix<T>) -> Self {
        Self {
            shape: [m.rows(), m.cols()],
            data: (0..m.rows()).map(|i| m.row(i).iter().map(|x| x.as_f64()).collect()).collect(),
        }
    }

    pub fn load<T: Scalar>(&self) -> Result<Matrix<T>> {
        let [r, c] = self.shape;
        if self.data.len() != r || self.data.iter().any(|row| row.len() != c) {
            return Err(Error::Compat(format!("stored matrix does not have shape {r}x{c}")));
        }
        Matrix::from_vec(r, c, self.data.iter().flatten().map(|&x| T::lit(x)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredLayer {
    pub weight: StoredMatrix,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredLevel {
    pub scoring: StoredMatrix,
    pub encoder: StoredLayer,
    pub decoder: StoredLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub levels: Vec<StoredLevel>,
}

impl StoredModel {
    pub fn store<T: Scalar>(p: &ModelParams<T>) -> Self {
        let layer = |l: &GcnLayer<T>| StoredLayer {
            weight: StoredMatrix::store(&l.weight),
            activation: l.activation,
        };
        Self {
            levels: p
                .levels
                .iter()
                .map(|l| StoredLevel {
                    scoring: StoredMatrix::store(&l.scoring),
                    encoder: layer(&l.encoder),
                    decoder: layer(&l.decoder),
                })
                .collect(),
        }
    }

    pub fn load<T: Scalar>(&self) -> Result<ModelParams<T>> {
        let layer = |l: &StoredLayer| -> Result<GcnLayer<T>> {
            Ok(GcnLayer {
                weight: l.weight.load()?,
                activation: l.activation,
            })
        };
        let params = ModelParams {
            levels: self
                .levels
                .iter()
                .map(|l| {
                    Ok(LevelParams {
                        scoring: l.scoring.load()?,
                        encoder: layer(&l.encoder)?,
                        decoder: layer(&l.decoder)?,
                    })
                })
                .collect::<Result<_>>()?,
        };
        params.validate().map_err(|e| Error::Compat(e.to_string()))?;
        Ok(params)
    }
}

/// Everything needed to re-evaluate a cross-validation run: the
/// configuration (including the seed), the feature construction, and the
/// frozen model of every fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: String,
    pub dataset: String,
    pub config: TrainConfig,
    pub seed: u64,
    pub feature_spec: FeatureSpec,
    pub feature_dim: usize,
    pub folds: Vec<StoredModel>,
}

impl Checkpoint {
    pub fn new<T: Scalar>(dataset: &str, config: &TrainConfig, feature_spec: FeatureSpec, models: &[ModelParams<T>]) -> Self {
        Self {
            version: CHECKPOINT_VERSION.into(),
            dataset: dataset.into(),
            config: config.clone(),
            seed: config.seed,
            feature_spec,
            feature_dim: models.first().map_or(0, |m| m.input_dim()),
            folds: models.iter().map(StoredModel::store).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Compat(format!(
                "unsupported checkpoint version {:?} (expected {CHECKPOINT_VERSION:?})",
                ckpt.version
            )));
        }
        if ckpt.seed != ckpt.config.seed {
            return Err(Error::Compat("checkpoint seed disagrees with its config".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Fold models, checked against the dataset's node feature width.
    pub fn models<T: Scalar>(&self, feature_dim: usize) -> Result<Vec<ModelParams<T>>> {
        if feature_dim != self.feature_dim {
            return Err(Error::Compat(format!(
                "checkpoint was trained on {} node features, dataset has {feature_dim}",
                self.feature_dim
            )));
        }
        self.folds.iter().map(|m| m.load()).collect()
    }
}
