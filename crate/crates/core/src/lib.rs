//! Unsupervised, differentiable graph coarsening trained by a k-step entropic
//! optimal-transport loss.
//!
//! Each coarsening level scores nodes with a one-layer graph convolution,
//! keeps the top half as coarse nodes, and builds a sparse coarsening matrix
//! `S` from the normalised adjacency. The coarse graph is the Galerkin
//! product `S^T A S`. An encoder/decoder pair maps the coarse graph back to
//! the input feature space, and the truncated Sinkhorn distance between the
//! two node clouds is the training loss.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the training pipeline.

pub mod error;
pub mod checkpoint;
pub mod coarsen;
pub mod data;
pub mod dot;
pub mod generate;
pub mod gnn;
pub mod graph;
pub mod ot;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = tensor::Matrix<f64>;
pub type Matrix32 = tensor::Matrix<f32>;
pub type Tape64 = tensor::Tape<f64>;
