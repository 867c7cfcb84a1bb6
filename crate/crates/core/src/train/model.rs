use rand::Rng;

use crate::error::{Error, Result};
use crate::gnn::{Activation, GcnLayer, LevelParams};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

use super::config::TrainConfig;

/// Per-level parameters of the coarsening model. Levels do not share weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub levels: Vec<LevelParams<T>>,
}

fn glorot<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::lit(rng.gen_range(-limit..limit)))
}

impl<T: Scalar> ModelParams<T> {
    /// Glorot-uniform initialisation for input dimension `d`.
    pub fn init<R: Rng>(d: usize, cfg: &TrainConfig, rng: &mut R) -> Self {
        let levels = (0..cfg.levels)
            .map(|_| LevelParams {
                scoring: glorot(d, 1, rng),
                encoder: GcnLayer {
                    weight: glorot(d, cfg.hidden, rng),
                    activation: Activation::Sigmoid,
                },
                decoder: GcnLayer {
                    weight: glorot(cfg.hidden, d, rng),
                    activation: cfg.decoder_activation,
                },
            })
            .collect();
        Self { levels }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn input_dim(&self) -> usize {
        self.levels.first().map_or(0, |l| l.input_dim())
    }

    pub fn hidden_dim(&self) -> usize {
        self.levels.first().map_or(0, |l| l.hidden_dim())
    }

    /// Checks that every level maps `d -> d` through the same hidden width.
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::contract("model needs at least one level"));
        }
        let (d, h) = (self.input_dim(), self.hidden_dim());
        for l in &self.levels {
            l.validate()?;
            if l.input_dim() != d || l.hidden_dim() != h {
                return Err(Error::contract("levels do not chain to the same dimensions"));
            }
        }
        Ok(())
    }

    /// Parameter matrices in a fixed order: per level scoring, encoder, decoder.
    pub fn matrices(&self) -> Vec<&Matrix<T>> {
        self.levels
            .iter()
            .flat_map(|l| [&l.scoring, &l.encoder.weight, &l.decoder.weight])
            .collect()
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.levels
            .iter_mut()
            .flat_map(|l| [&mut l.scoring, &mut l.encoder.weight, &mut l.decoder.weight])
            .collect()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.matrices().iter().map(|m| m.shape()).collect()
    }
}
