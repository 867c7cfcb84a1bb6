//! Two-layer perceptron on frozen graph features.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

use super::adam::{adam_step, lr_at_epoch, AdamState};
use super::config::TrainConfig;
use super::derive_seed;

/// `softmax(relu(x W1 + b1) W2 + b2)` on standardised inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams<T> {
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
    /// Per-feature mean and scale taken from the training rows.
    pub shift: Vec<T>,
    pub scale: Vec<T>,
}

struct Pass<T> {
    hidden: Matrix<T>,
    probs: Matrix<T>,
}

impl<T: Scalar> ClassifierParams<T> {
    fn init<R: Rng>(inputs: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut glorot = |r: usize, c: usize| {
            let limit = (6.0 / (r + c) as f64).sqrt();
            Matrix::from_fn(r, c, |_, _| T::lit(rng.gen_range(-limit..limit)))
        };
        Self {
            w1: glorot(inputs, hidden),
            b1: Matrix::zeros(1, hidden),
            w2: glorot(hidden, classes),
            b2: Matrix::zeros(1, classes),
            shift: vec![T::zero(); inputs],
            scale: vec![T::one(); inputs],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.w2.cols()
    }

    fn standardize(&self, rows: &[&[T]]) -> Matrix<T> {
        Matrix::from_fn(rows.len(), self.shift.len(), |i, j| {
            (rows[i][j] - self.shift[j]) / self.scale[j]
        })
    }

    fn forward(&self, x: &Matrix<T>) -> Result<Pass<T>> {
        let mut hidden = x.matmul(&self.w1)?;
        for i in 0..hidden.rows() {
            for j in 0..hidden.cols() {
                hidden[(i, j)] = (hidden[(i, j)] + self.b1[(0, j)]).max(T::zero());
            }
        }
        let mut probs = hidden.matmul(&self.w2)?;
        for i in 0..probs.rows() {
            let c = probs.cols();
            let mut mx = T::neg_infinity();
            for j in 0..c {
                probs[(i, j)] = probs[(i, j)] + self.b2[(0, j)];
                mx = mx.max(probs[(i, j)]);
            }
            let mut z = T::zero();
            for j in 0..c {
                probs[(i, j)] = (probs[(i, j)] - mx).exp();
                z = z + probs[(i, j)];
            }
            for j in 0..c {
                probs[(i, j)] = probs[(i, j)] / z;
            }
        }
        Ok(Pass { hidden, probs })
    }

    /// Mean cross-entropy of standardised rows `x` and its gradient with
    /// respect to `[w1, b1, w2, b2]`.
    fn loss_and_grad(&self, x: &Matrix<T>, y: &[usize]) -> Result<(T, [Matrix<T>; 4])> {
        let pass = self.forward(x)?;
        let n = T::from_usize_lossy(x.rows());
        let tiny = T::min_positive_value();
        let mut loss = T::zero();
        let mut d_logits = pass.probs.clone();
        for (i, &label) in y.iter().enumerate() {
            loss = loss - pass.probs[(i, label)].max(tiny).ln();
            d_logits[(i, label)] = d_logits[(i, label)] - T::one();
        }
        let d_logits = d_logits.scale(n.recip());
        let dw2 = pass.hidden.transpose().matmul(&d_logits)?;
        let db2 = Matrix::from_vec(1, d_logits.cols(), d_logits.col_sums())?;
        let mut dh = d_logits.matmul(&self.w2.transpose())?;
        for i in 0..dh.rows() {
            for j in 0..dh.cols() {
                if !(pass.hidden[(i, j)] > T::zero()) {
                    dh[(i, j)] = T::zero();
                }
            }
        }
        let dw1 = x.transpose().matmul(&dh)?;
        let db1 = Matrix::from_vec(1, dh.cols(), dh.col_sums())?;
        Ok((loss / n, [dw1, db1, dw2, db2]))
    }

    /// Predicted class per row; ties go to the lower class index.
    pub fn predict(&self, rows: &[Vec<T>]) -> Result<Vec<usize>> {
        let refs: Vec<&[T]> = rows.iter().map(|r| r.as_slice()).collect();
        let x = self.standardize(&refs);
        let probs = self.forward(&x)?.probs;
        Ok((0..probs.rows())
            .map(|i| {
                let row = probs.row(i);
                let mut best = 0;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    pub fn accuracy(&self, rows: &[Vec<T>], labels: &[usize]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::contract("accuracy of an empty set"));
        }
        let pred = self.predict(rows)?;
        let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / rows.len() as f64)
    }
}

/// Fits the perceptron with mini-batch Adam and cross-entropy.
pub fn fit_classifier<T: Scalar>(
    rows: &[Vec<T>],
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<ClassifierParams<T>> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::contract(format!(
            "classifier needs matching non-empty rows and labels ({} vs {})",
            rows.len(),
            labels.len()
        )));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::contract("classifier rows have different widths"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Index {
            what: "class label",
            index: bad,
            len: num_classes,
        });
    }
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "training split contains only class {:?}",
            distinct
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ClassifierParams::init(width, cfg.classifier_hidden, num_classes, &mut rng);
    let n = T::from_usize_lossy(rows.len());
    for j in 0..width {
        let mean = rows.iter().map(|r| r[j]).sum::<T>() / n;
        let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<T>() / n;
        params.shift[j] = mean;
        params.scale[j] = if var.sqrt() > T::lit(1e-12) { var.sqrt() } else { T::one() };
    }
    let refs: Vec<&[T]> = rows.iter().map(|r| r.as_slice()).collect();
    let x = params.standardize(&refs);

    let shapes = [params.w1.shape(), params.b1.shape(), params.w2.shape(), params.b2.shape()];
    let mut adam = AdamState::new(shapes, T::lit(cfg.lr));
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for epoch in 0..cfg.classifier_epochs {
        adam.lr = T::lit(lr_at_epoch(cfg.lr, cfg.lr_decay, cfg.decay_every, epoch));
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.classifier_batch) {
            let xb = x.select_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (_, grads) = params.loss_and_grad(&xb, &yb)?;
            let ClassifierParams { w1, b1, w2, b2, .. } = &mut params;
            adam_step(&mut [w1, b1, w2, b2], &grads, &mut adam)?;
        }
    }
    Ok(params)
}

/// Accuracy of a classifier per fold.
#[derive(Debug, Clone)]
pub struct ClassifierReport<T> {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub params: Vec<ClassifierParams<T>>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains on all folds but one and tests on the held-out fold, for every fold.
/// `fold_of[i]` is the fold index of row `i`.
pub fn train_classifier<T: Scalar>(
    rows: &[Vec<T>],
    labels: &[usize],
    fold_of: &[usize],
    cfg: &TrainConfig,
) -> Result<ClassifierReport<T>> {
    let folds = fold_of.iter().copied().max().map_or(0, |m| m + 1);
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut params = Vec::with_capacity(folds);
    for f in 0..folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| fold_of[i] != f);
        let pick = |idx: &[usize]| -> (Vec<Vec<T>>, Vec<usize>) {
            (idx.iter().map(|&i| rows[i].clone()).collect(), idx.iter().map(|&i| labels[i]).collect())
        };
        let (xt, yt) = pick(&train);
        let (xs, ys) = pick(&test);
        let clf = fit_classifier(&xt, &yt, num_classes, cfg, derive_seed(cfg.seed, 2, f as u64))?;
        fold_accuracies.push(clf.accuracy(&xs, &ys)?);
        params.push(clf);
    }
    let (mean, std) = mean_std(&fold_accuracies);
    Ok(ClassifierReport {
        fold_accuracies,
        mean,
        std,
        params,
    })
}
