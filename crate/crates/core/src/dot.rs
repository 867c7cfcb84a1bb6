//! Graphviz DOT rendering of a coarsening sequence.

use std::fmt::Write;

use crate::error::Result;
use crate::graph::{Graph, SparseMatrix};
use crate::scalar::Scalar;
use crate::train::{forward_pass, ModelParams, TrainConfig};

/// Edge weight label with at most four decimals and no trailing zeros.
pub fn format_weight(w: f64) -> String {
    let s = format!("{w:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// One undirected graph. Nodes flagged in `hollow` are drawn unfilled;
/// self-loops are omitted; edge weights become labels when `weight_labels`.
pub fn graph_dot<T: Scalar>(name: &str, adjacency: &SparseMatrix<T>, hollow: &[bool], weight_labels: bool) -> String {
    let mut out = String::new();
    writeln!(out, "graph {name} {{").unwrap();
    writeln!(out, "  node [shape=circle, fontsize=10];").unwrap();
    for (i, &h) in hollow.iter().enumerate() {
        let style = if h {
            "style=solid"
        } else {
            "style=filled, fillcolor=gray25, fontcolor=white"
        };
        writeln!(out, "  {i} [{style}];").unwrap();
    }
    for &(i, j, w) in adjacency.entries() {
        if i >= j {
            continue;
        }
        if weight_labels {
            writeln!(out, "  {i} -- {j} [label=\"{}\"];", format_weight(w.as_f64())).unwrap();
        } else {
            writeln!(out, "  {i} -- {j};").unwrap();
        }
    }
    out.push_str("}\n");
    out
}

/// DOT documents `level_0 .. level_L` for the coarsening sequence of `g`.
///
/// In every level the nodes kept by the next coarsening are hollow; all
/// nodes of the last level are hollow. Coarse levels label edges with their
/// `A_c` weights.
pub fn coarsening_sequence_dot<T: Scalar>(g: &Graph<T>, params: &ModelParams<T>, cfg: &TrainConfig) -> Result<Vec<String>> {
    let out = forward_pass(g, params, cfg)?;
    let mut adjacencies = vec![g.adjacency().clone()];
    adjacencies.extend(out.coarse_adjacency.iter().cloned());
    Ok(adjacencies
        .iter()
        .enumerate()
        .map(|(level, a)| {
            let n = a.shape().0;
            let hollow = match out.levels.get(level) {
                Some(next) => {
                    let mut h = vec![false; n];
                    next.selected.iter().for_each(|&i| h[i] = true);
                    h
                }
                None => vec![true; n],
            };
            graph_dot(&format!("level_{level}"), a, &hollow, level > 0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;
    use rand::SeedableRng;

    #[test]
    fn weights_are_trimmed() {
        assert_eq!(format_weight(1.5), "1.5");
        assert_eq!(format_weight(2.0), "2");
        assert_eq!(format_weight(1.0 / 3.0), "0.3333");
    }

    #[test]
    fn galerkin_triangle_has_one_labelled_edge() {
        let a_c = SparseMatrix::from_dense(&Matrix::filled(2, 2, 1.5f64));
        let doc = graph_dot("level_1", &a_c, &[true, true], true);
        assert_eq!(doc.matches(" -- ").count(), 1);
        assert!(doc.contains("0 -- 1 [label=\"1.5\"];"));
        assert_eq!(doc.matches("style=solid").count(), 2);
    }

    #[test]
    fn single_node_sequence() {
        let g: Graph<f64> = Graph::from_edges(1, &[], Matrix::from_rows(&[[0.2, 0.4]]).unwrap(), None).unwrap();
        let cfg = TrainConfig {
            hidden: 3,
            ..TrainConfig::default()
        };
        let params = ModelParams::init(2, &cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        let docs = coarsening_sequence_dot(&g, &params, &cfg).unwrap();
        assert_eq!(docs.len(), 2);
        for doc in &docs {
            assert!(doc.contains("  0 [style=solid];"));
            assert!(!doc.contains(" -- "));
        }
    }
}
