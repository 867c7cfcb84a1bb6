use crate::coarsen::{coarsen_on_tape, CoarseningLevel, CoarseningVars};
use crate::error::{Error, Result};
use crate::gnn::{encode_decode, EncodeDecode, LevelVars};
use crate::graph::{Graph, SparseMatrix};
use crate::ot::{cost_matrix, ot_distance, TransportProblem};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tape, Var};

use super::config::TrainConfig;
use super::model::ModelParams;

/// Tape handles for one level of the forward pass.
#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub coarsening: CoarseningVars,
    pub gnn: EncodeDecode,
    pub cost: Var,
    pub loss: Var,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub params: Vec<LevelVars>,
    pub levels: Vec<LevelTrace>,
    pub loss: Var,
}

/// Plain-value summary of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    pub loss: T,
    pub level_losses: Vec<T>,
    /// Coarse embeddings `Z_c`, one per level.
    pub embeddings: Vec<Matrix<T>>,
    pub coarse_adjacency: Vec<SparseMatrix<T>>,
    pub levels: Vec<CoarseningLevel<T>>,
}

/// Records the multi-level coarsening and its summed transport loss on `tape`.
pub fn forward_on_tape<T: Scalar>(
    tape: &Tape<T>,
    g: &Graph<T>,
    params: &ModelParams<T>,
    cfg: &TrainConfig,
) -> Result<ForwardTrace> {
    if g.n() == 0 {
        return Err(Error::contract("forward pass needs a non-empty graph"));
    }
    if g.feature_dim() != params.input_dim() {
        return Err(Error::Compat(format!(
            "graph has {} features, model expects {}",
            g.feature_dim(),
            params.input_dim()
        )));
    }
    let vars: Vec<LevelVars> = params.levels.iter().map(|l| l.attach(tape)).collect();
    let mut a = tape.constant(g.adjacency().to_dense());
    let mut x = tape.constant(g.features().clone());
    let mut levels = Vec::with_capacity(vars.len());
    let mut total: Option<Var> = None;
    for (i, (lp, lv)) in params.levels.iter().zip(&vars).enumerate() {
        let level = (|| {
            let coarsening = coarsen_on_tape(tape, a, x, lv.scoring, cfg.ratio)?;
            let gnn = encode_decode(tape, a, x, coarsening.s, coarsening.a_c, lp, *lv)?;
            let cost = cost_matrix(tape, x, gnn.x_c, T::lit(cfg.p))?;
            let problem = TransportProblem::uniform(tape, cost, T::lit(cfg.gamma), cfg.k)?;
            let (loss, _) = ot_distance(tape, &problem)?;
            Ok(LevelTrace {
                coarsening,
                gnn,
                cost,
                loss,
            })
        })()
        .map_err(|e: Error| e.at_level(i))?;
        total = Some(match total {
            None => level.loss,
            Some(t) => tape.add(t, level.loss)?,
        });
        a = level.coarsening.a_c;
        x = level.gnn.x_c;
        levels.push(level);
    }
    let loss = total.ok_or_else(|| Error::contract("model has no levels"))?;
    if !tape.scalar(loss).is_finite() {
        return Err(Error::NonFinite("forward loss".into()));
    }
    Ok(ForwardTrace {
        params: vars,
        levels,
        loss,
    })
}

/// Runs the forward pass and collects plain values.
pub fn forward_pass<T: Scalar>(
    g: &Graph<T>,
    params: &ModelParams<T>,
    cfg: &TrainConfig,
) -> Result<ForwardOutput<T>> {
    let tape = Tape::new();
    let trace = forward_on_tape(&tape, g, params, cfg)?;
    Ok(ForwardOutput {
        loss: tape.scalar(trace.loss),
        level_losses: trace.levels.iter().map(|l| tape.scalar(l.loss)).collect(),
        embeddings: trace.levels.iter().map(|l| tape.value(l.gnn.z_c)).collect(),
        coarse_adjacency: trace
            .levels
            .iter()
            .map(|l| SparseMatrix::from_dense(&tape.value_ref(l.coarsening.a_c)))
            .collect(),
        levels: trace
            .levels
            .iter()
            .map(|l| CoarseningLevel::from_vars(&tape, &l.coarsening))
            .collect(),
    })
}

/// Loss and its gradient with respect to every parameter matrix, in the
/// order of [`ModelParams::matrices`].
pub fn loss_and_gradient<T: Scalar>(
    g: &Graph<T>,
    params: &ModelParams<T>,
    cfg: &TrainConfig,
) -> Result<(T, Vec<Matrix<T>>)> {
    let tape = Tape::new();
    let trace = forward_on_tape(&tape, g, params, cfg)?;
    let grads = tape.backward(trace.loss)?;
    let out = trace
        .params
        .iter()
        .flat_map(|v| [v.scoring, v.encoder, v.decoder])
        .map(|v| grads.get(v))
        .collect();
    Ok((tape.scalar(trace.loss), out))
}

/// Loss only.
pub fn loss<T: Scalar>(g: &Graph<T>, params: &ModelParams<T>, cfg: &TrainConfig) -> Result<T> {
    let tape = Tape::new();
    let trace = forward_on_tape(&tape, g, params, cfg)?;
    Ok(tape.scalar(trace.loss))
}

/// Largest relative deviation between the tape gradient and central finite
/// differences with step `h`, over every parameter entry. The denominator is
/// `max(|analytic|, |numeric|, 1e-6)`.
pub fn gradient_check<T: Scalar>(g: &Graph<T>, params: &ModelParams<T>, cfg: &TrainConfig, h: T) -> Result<f64> {
    let (_, analytic) = loss_and_gradient(g, params, cfg)?;
    let mut worst = 0.0f64;
    for (k, grad) in analytic.iter().enumerate() {
        for e in 0..grad.len() {
            let eval = |delta: T| -> Result<f64> {
                let mut p = params.clone();
                let mut ms = p.matrices_mut();
                ms[k].as_mut_slice()[e] = ms[k].as_slice()[e] + delta;
                Ok(loss(g, &p, cfg)?.as_f64())
            };
            let numeric = (eval(h)? - eval(-h)?) / (2.0 * h.as_f64());
            let a = grad.as_slice()[e].as_f64();
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
