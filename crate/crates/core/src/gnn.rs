//! One-layer graph convolutions and the encoder/decoder that maps a graph to
//! coarse embeddings `Z_c` and coarse features `X_c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Sigmoid,
    SigmoidSquare,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, tape: &Tape<T>, x: Var) -> Var {
        match self {
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::SigmoidSquare => tape.sigmoid(tape.square(x)),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer<T> {
    /// `d_in x d_out`.
    pub weight: Matrix<T>,
    pub activation: Activation,
}

/// Parameters of one coarsening level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelParams<T> {
    /// Node scoring weights, `d x 1`.
    pub scoring: Matrix<T>,
    /// `d -> h`.
    pub encoder: GcnLayer<T>,
    /// `h -> d`.
    pub decoder: GcnLayer<T>,
}

/// Tape leaves for one level's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LevelVars {
    pub scoring: Var,
    pub encoder: Var,
    pub decoder: Var,
}

impl<T: Scalar> LevelParams<T> {
    pub fn attach(&self, tape: &Tape<T>) -> LevelVars {
        LevelVars {
            scoring: tape.leaf(self.scoring.clone()),
            encoder: tape.leaf(self.encoder.weight.clone()),
            decoder: tape.leaf(self.decoder.weight.clone()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.scoring.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.weight.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.input_dim();
        let h = self.hidden_dim();
        let ok = self.scoring.cols() == 1
            && self.encoder.weight.rows() == d
            && self.decoder.weight.shape() == (h, d);
        if !ok {
            return Err(Error::Dimension {
                op: "level parameters",
                left: self.encoder.weight.shape(),
                right: self.decoder.weight.shape(),
            });
        }
        if ![&self.scoring, &self.encoder.weight, &self.decoder.weight]
            .iter()
            .all(|m| m.is_finite())
        {
            return Err(Error::NonFinite("level parameters".into()));
        }
        Ok(())
    }
}

/// `activation(A_hat X W)` where `a_hat` is already normalised.
pub fn gcn_apply<T: Scalar>(
    tape: &Tape<T>,
    a_hat: Var,
    x: Var,
    w: Var,
    activation: Activation,
) -> Result<Var> {
    let ax = tape.matmul(a_hat, x)?;
    let axw = tape.matmul(ax, w)?;
    Ok(activation.apply(tape, axw))
}

/// `activation(A_hat X W)` for a raw adjacency `a`; normalisation happens on
/// the tape so gradients flow into `a` as well.
pub fn gcn_forward<T: Scalar>(
    tape: &Tape<T>,
    a: Var,
    x: Var,
    w: Var,
    activation: Activation,
) -> Result<Var> {
    let a_hat = tape.gcn_normalize(a)?;
    gcn_apply(tape, a_hat, x, w, activation)
}

/// Outputs of [`encode_decode`].
#[derive(Debug, Clone, Copy)]
pub struct EncodeDecode {
    pub z: Var,
    pub z_c: Var,
    pub x_c: Var,
}

/// `Z = gnn(A, X)`, `Z_c = S^T Z`, `X_c = gnn(A_c, Z_c)`.
pub fn encode_decode<T: Scalar>(
    tape: &Tape<T>,
    a: Var,
    x: Var,
    s: Var,
    a_c: Var,
    params: &LevelParams<T>,
    vars: LevelVars,
) -> Result<EncodeDecode> {
    let z = gcn_forward(tape, a, x, vars.encoder, params.encoder.activation)?;
    let z_c = tape.matmul(tape.transpose(s), z)?;
    let x_c = gcn_forward(tape, a_c, z_c, vars.decoder, params.decoder.activation)?;
    Ok(EncodeDecode { z, z_c, x_c })
}
