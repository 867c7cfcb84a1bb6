use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, SparseMatrix};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

use super::tu::TuDatasetRaw;

pub const DEFAULT_MAX_DEGREE: usize = 10;

/// How node features are built from a raw dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FeatureSpec {
    NodeLabelOneHot,
    NodeAttributes,
    DegreeOneHot { max_degree: usize },
}

impl FeatureSpec {
    /// Node-label one-hot when node labels exist, degree one-hot otherwise.
    pub fn default_for(raw: &TuDatasetRaw) -> Self {
        if raw.node_labels.is_some() {
            FeatureSpec::NodeLabelOneHot
        } else {
            FeatureSpec::DegreeOneHot {
                max_degree: DEFAULT_MAX_DEGREE,
            }
        }
    }
}

/// Builds one labelled [`Graph`] per dataset entry with unit edge weights.
/// Class labels are indices into [`TuDatasetRaw::classes`].
pub fn build_features<T: Scalar>(raw: &TuDatasetRaw, spec: FeatureSpec) -> Result<Vec<Graph<T>>> {
    let n = raw.num_nodes();
    let mut degree = vec![0usize; n];
    for &(u, v) in &raw.edges {
        degree[u] += 1;
        degree[v] += 1;
    }
    let (width, row_of): (usize, Box<dyn Fn(usize) -> Vec<T>>) = match spec {
        FeatureSpec::NodeLabelOneHot => {
            let labels = raw
                .node_labels
                .as_ref()
                .ok_or_else(|| Error::Spec(format!("{} has no node labels", raw.name)))?;
            let mut distinct = labels.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let d = distinct.len();
            (
                d,
                Box::new(move |node| {
                    let mut row = vec![T::zero(); d];
                    row[distinct.binary_search(&labels[node]).expect("label listed")] = T::one();
                    row
                }),
            )
        }
        FeatureSpec::NodeAttributes => {
            let attrs = raw
                .node_attributes
                .as_ref()
                .ok_or_else(|| Error::Spec(format!("{} has no node attributes", raw.name)))?;
            let d = attrs.first().map_or(0, Vec::len);
            (d, Box::new(move |node| attrs[node].iter().map(|&x| T::lit(x)).collect()))
        }
        FeatureSpec::DegreeOneHot { max_degree } => {
            let degree = degree.clone();
            (
                max_degree + 1,
                Box::new(move |node| {
                    let mut row = vec![T::zero(); max_degree + 1];
                    row[degree[node].min(max_degree)] = T::one();
                    row
                }),
            )
        }
    };
    if width == 0 {
        return Err(Error::Spec("feature width is zero".into()));
    }

    let nodes = raw.nodes_per_graph();
    let classes = raw.class_indices();
    let mut local = vec![0usize; n];
    for members in &nodes {
        for (i, &node) in members.iter().enumerate() {
            local[node] = i;
        }
    }
    let mut edges_of: Vec<Vec<(usize, usize, T)>> = vec![Vec::new(); nodes.len()];
    for &(u, v) in &raw.edges {
        let (a, b) = (local[u], local[v]);
        edges_of[raw.graph_indicator[u]].extend([(a, b, T::one()), (b, a, T::one())]);
    }
    nodes
        .iter()
        .zip(edges_of)
        .enumerate()
        .map(|(g, (members, triplets))| {
            let m = members.len();
            let rows: Vec<T> = members.iter().flat_map(|&node| row_of(node)).collect();
            let features = Matrix::from_vec(m, width, rows)?;
            let adjacency = SparseMatrix::from_triplets(m, m, triplets)?;
            Graph::new(adjacency, features, Some(classes[g]))
        })
        .collect()
}
