//! AMG-style differentiable coarsening.
//!
//! Nodes are scored with a one-layer graph convolution, the top `m` become
//! coarse nodes, and the coarsening matrix `S` overlays the scores on the
//! selected columns of the normalised adjacency. The coarse adjacency is the
//! Galerkin product `S^T A S`.

use crate::error::{Error, Result};
use crate::graph::{bfs_on, Graph, Pattern, SparseMatrix};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tape, Var};

/// Number of coarse nodes kept from `n`: `max(1, ceil(ratio * n))`, capped at `n`.
pub fn coarse_count(n: usize, ratio: f64) -> usize {
    let m = (ratio * n as f64).ceil() as usize;
    m.clamp(1, n.max(1))
}

/// `sigmoid((A_hat X W)^2)`, one score per node in `[0.5, 1)`.
pub fn node_scores<T: Scalar>(tape: &Tape<T>, a_hat: Var, x: Var, w_alpha: Var) -> Result<Var> {
    let ax = tape.matmul(a_hat, x)?;
    let z = tape.matmul(ax, w_alpha)?;
    Ok(tape.sigmoid(tape.square(z)))
}

/// Indices of the `m` largest scores in descending order; ties go to the
/// lower index.
pub fn select_coarse_nodes<T: Scalar>(alpha: &[T], m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > alpha.len() {
        return Err(Error::contract(format!(
            "cannot select {m} coarse nodes out of {}",
            alpha.len()
        )));
    }
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&i, &j| {
        alpha[j]
            .partial_cmp(&alpha[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(m);
    Ok(order)
}

/// `S = row_normalize_l1(A_hat[:, sel] * (1 alpha[sel]^T))`.
///
/// The selection is a constant; gradients reach `alpha` only through the
/// retained entries.
pub fn build_coarsening_matrix<T: Scalar>(
    tape: &Tape<T>,
    a_hat: Var,
    alpha: Var,
    selected: &[usize],
) -> Result<Var> {
    let (n, _) = tape.shape(a_hat);
    let a_s = tape.select_cols(a_hat, selected)?;
    let alpha_s = tape.select_rows(alpha, selected)?;
    let ones = tape.constant(Matrix::ones(n, 1));
    let overlay = tape.matmul(ones, tape.transpose(alpha_s))?;
    let weighted = tape.mul(a_s, overlay)?;
    tape.row_normalize_l1(weighted)
}

/// `S^T A S`.
pub fn galerkin_coarsen<T: Scalar>(tape: &Tape<T>, a: Var, s: Var) -> Result<Var> {
    let (n, _) = tape.shape(a);
    let (rows, _) = tape.shape(s);
    if rows != n {
        return Err(Error::Dimension {
            op: "galerkin_coarsen",
            left: tape.shape(a),
            right: tape.shape(s),
        });
    }
    let as_ = tape.matmul(a, s)?;
    tape.matmul(tape.transpose(s), as_)
}

/// Tape handles produced by one coarsening step.
#[derive(Debug, Clone)]
pub struct CoarseningVars {
    pub a_hat: Var,
    pub alpha: Var,
    pub s: Var,
    pub a_c: Var,
    pub selected: Vec<usize>,
}

/// Scores, selects, and coarsens on `tape`. `a` is the raw weighted
/// adjacency of the current level and `x` its features.
pub fn coarsen_on_tape<T: Scalar>(
    tape: &Tape<T>,
    a: Var,
    x: Var,
    w_alpha: Var,
    ratio: f64,
) -> Result<CoarseningVars> {
    let (n, _) = tape.shape(a);
    let a_hat = tape.gcn_normalize(a)?;
    let alpha = node_scores(tape, a_hat, x, w_alpha)?;
    let m = coarse_count(n, ratio);
    let selected = select_coarse_nodes(tape.value_ref(alpha).as_slice(), m)?;
    let s = build_coarsening_matrix(tape, a_hat, alpha, &selected)?;
    let a_c = galerkin_coarsen(tape, a, s)?;
    Ok(CoarseningVars {
        a_hat,
        alpha,
        s,
        a_c,
        selected,
    })
}

/// Plain-value record of one coarsening step.
#[derive(Debug, Clone)]
pub struct CoarseningLevel<T> {
    /// Coarse nodes in descending-score order.
    pub selected: Vec<usize>,
    pub s: Matrix<T>,
    pub a_c: SparseMatrix<T>,
    pub alpha: Matrix<T>,
}

impl<T: Scalar> CoarseningLevel<T> {
    pub fn m(&self) -> usize {
        self.selected.len()
    }

    pub fn from_vars(tape: &Tape<T>, vars: &CoarseningVars) -> Self {
        Self {
            selected: vars.selected.clone(),
            s: tape.value(vars.s),
            a_c: SparseMatrix::from_dense(&tape.value_ref(vars.a_c)),
            alpha: tape.value(vars.alpha),
        }
    }
}

/// Coarsens `g` once with scoring weights `w_alpha` (`d x 1`).
pub fn coarsen_graph<T: Scalar>(
    g: &Graph<T>,
    w_alpha: &Matrix<T>,
    ratio: f64,
) -> Result<CoarseningLevel<T>> {
    let tape = Tape::new();
    let a = tape.constant(g.adjacency().to_dense());
    let x = tape.constant(g.features().clone());
    let w = tape.leaf(w_alpha.clone());
    let vars = coarsen_on_tape(&tape, a, x, w, ratio)?;
    Ok(CoarseningLevel::from_vars(&tape, &vars))
}

/// Rows of column `j` of `s` that are structurally nonzero.
pub fn aggregation_set<T: Scalar>(s: &Matrix<T>, j: usize) -> Result<Vec<usize>> {
    if j >= s.cols() {
        return Err(Error::Index {
            what: "coarse column",
            index: j,
            len: s.cols(),
        });
    }
    Ok((0..s.rows()).filter(|&i| s[(i, j)] != T::zero()).collect())
}

/// A coarse pair whose edge status disagrees with the edges between the two
/// aggregation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Theorem1Violation {
    pub j: usize,
    pub j2: usize,
    pub coarse_edge: bool,
    pub sets_connected: bool,
}

/// Checks that `A_c(j, j')` is structurally nonzero exactly when some edge of
/// `A` (self-loops included) joins `chi(j)` and `chi(j')`.
pub fn check_theorem1<T: Scalar>(
    a: &SparseMatrix<T>,
    s: &Matrix<T>,
    a_c: &SparseMatrix<T>,
) -> Result<Vec<Theorem1Violation>> {
    let m = s.cols();
    if a_c.shape() != (m, m) || a.shape() != (s.rows(), s.rows()) {
        return Err(Error::Dimension {
            op: "check_theorem1",
            left: a.shape(),
            right: a_c.shape(),
        });
    }
    let a_pat = a.pattern();
    let c_pat = a_c.pattern();
    let chi: Vec<Vec<usize>> = (0..m).map(|j| aggregation_set(s, j)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for j in 0..m {
        for j2 in 0..m {
            let sets_connected = chi[j]
                .iter()
                .any(|&u| chi[j2].iter().any(|&v| a_pat.get(u, v)));
            let coarse_edge = c_pat.get(j, j2);
            if sets_connected != coarse_edge {
                out.push(Theorem1Violation {
                    j,
                    j2,
                    coarse_edge,
                    sets_connected,
                });
            }
        }
    }
    Ok(out)
}

/// Coarse edges `(j, j', hops)` whose coarse nodes lie more than three hops
/// apart in `g`.
pub fn check_corollary1<T: Scalar>(
    g: &Graph<T>,
    level: &CoarseningLevel<T>,
) -> Result<Vec<(usize, usize, usize)>> {
    let adj = g.neighbors();
    let mut out = Vec::new();
    for &(j, j2, _) in level.a_c.entries() {
        if j == j2 {
            continue;
        }
        let d = bfs_on(&adj, level.selected[j])?[level.selected[j2]];
        if d > 3 {
            out.push((j, j2, d));
        }
    }
    Ok(out)
}

/// Structural pattern `S` must stay inside: the selected columns of `A + I`.
pub fn allowed_s_pattern<T: Scalar>(a: &SparseMatrix<T>, selected: &[usize]) -> Pattern {
    let (n, _) = a.shape();
    a.pattern().union(&Pattern::identity(n)).select_columns(selected)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::generate;
    use crate::graph::{normalized_adjacency, permute, total_edge_weight};

    fn k3() -> Graph<f64> {
        Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], Matrix::ones(3, 1), None)
            .unwrap()
    }

    fn edge2() -> Graph<f64> {
        Graph::from_edges(2, &[(0, 1, 1.0)], Matrix::ones(2, 1), None).unwrap()
    }

    fn single() -> Graph<f64> {
        Graph::from_edges(1, &[], Matrix::ones(1, 1), None).unwrap()
    }

    #[test]
    fn coarse_count_rule() {
        assert_eq!(coarse_count(8, 0.5), 4);
        assert_eq!(coarse_count(4, 0.5), 2);
        assert_eq!(coarse_count(7, 0.5), 4);
        assert_eq!(coarse_count(1, 0.5), 1);
        assert_eq!(coarse_count(3, 1.0), 3);
    }

    #[test]
    fn node_scores_examples() {
        let g = k3();
        let t = Tape::new();
        let a_hat = t.gcn_normalize(t.constant(g.adjacency().to_dense())).unwrap();
        let x = t.constant(g.features().clone());
        let w = t.leaf(Matrix::zeros(1, 1));
        let alpha = node_scores(&t, a_hat, x, w).unwrap();
        assert_eq!(t.value(alpha), Matrix::filled(3, 1, 0.5));

        // A_hat X W = [[1], [-1]]: square removes the sign
        let t = Tape::new();
        let a_hat = t.constant(Matrix::identity(2));
        let x = t.constant(Matrix::from_rows(&[[1.0], [-1.0]]).unwrap());
        let w = t.leaf(Matrix::ones(1, 1));
        let alpha = t.value(node_scores(&t, a_hat, x, w).unwrap());
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((alpha[(0, 0)] - s1).abs() < 1e-15 && (alpha[(1, 0)] - s1).abs() < 1e-15);
        assert!((s1 - 0.7311).abs() < 1e-4);

        let bad = t.leaf(Matrix::ones(3, 1));
        assert!(matches!(node_scores(&t, a_hat, x, bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn node_scores_match_straight_line_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g: Graph<f64> = generate::connected_erdos_renyi(6, 0.4, 3, &mut rng);
        let w = Matrix::from_fn(3, 1, |_, _| rng.gen_range(-1.0..1.0));
        let level = coarsen_graph(&g, &w, 0.5).unwrap();

        // independent evaluation through the sparse normalised adjacency
        let a_hat = normalized_adjacency(&g);
        let xw = g.features().matmul(&w).unwrap();
        for i in 0..6 {
            let mut z = 0.0f64;
            for &(r, c, v) in a_hat.entries() {
                if r == i {
                    z += v * xw[(c, 0)];
                }
            }
            let expected = 1.0 / (1.0 + (-(z * z)).exp());
            assert!((level.alpha[(i, 0)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn select_examples() {
        assert_eq!(select_coarse_nodes(&[0.9, 0.1, 0.5], 2).unwrap(), vec![0, 2]);
        assert_eq!(select_coarse_nodes(&[0.5, 0.5, 0.1], 1).unwrap(), vec![0]);
        assert_eq!(select_coarse_nodes(&[0.2, 0.4, 0.6, 0.8], 2).unwrap(), vec![3, 2]);
        assert!(select_coarse_nodes(&[0.2, 0.4], 0).is_err());
        assert!(select_coarse_nodes(&[0.2, 0.4], 3).is_err());
    }

    fn build(g: &Graph<f64>, alpha: Vec<f64>, sel: &[usize]) -> Matrix<f64> {
        let t = Tape::new();
        let a_hat = t.gcn_normalize(t.constant(g.adjacency().to_dense())).unwrap();
        let alpha = t.constant(Matrix::column(alpha));
        t.value(build_coarsening_matrix(&t, a_hat, alpha, sel).unwrap())
    }

    #[test]
    fn coarsening_matrix_examples() {
        let s = build(&k3(), vec![0.7; 3], &[0, 1]);
        assert!(s.max_abs_diff(&Matrix::filled(3, 2, 0.5)).unwrap() < 1e-15);

        assert_eq!(build(&single(), vec![0.6], &[0]), Matrix::ones(1, 1));

        let s = build(&edge2(), vec![0.8, 0.4], &[0]);
        assert!(s.max_abs_diff(&Matrix::ones(2, 1)).unwrap() < 1e-15);
    }

    #[test]
    fn coarsening_matrix_keeps_zero_rows() {
        // path 0-1-2-3, coarse node 0 only: nodes 2 and 3 see no coarse neighbour
        let g = Graph::from_edges(
            4,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)],
            Matrix::ones(4, 1),
            None,
        )
        .unwrap();
        let s = build(&g, vec![0.9, 0.6, 0.6, 0.6], &[0]);
        assert_eq!(s.row_sums(), vec![1.0, 1.0, 0.0, 0.0]);
    }

    fn galerkin(a: Matrix<f64>, s: Matrix<f64>) -> Matrix<f64> {
        let t = Tape::new();
        let a = t.constant(a);
        let s = t.constant(s);
        t.value(galerkin_coarsen(&t, a, s).unwrap())
    }

    #[test]
    fn galerkin_examples() {
        let a = k3().adjacency().to_dense();
        assert_eq!(galerkin(a.clone(), Matrix::identity(3)), a);

        let a_c = galerkin(a, Matrix::filled(3, 2, 0.5));
        assert_eq!(a_c, Matrix::filled(2, 2, 1.5));
        assert_eq!(total_edge_weight(&SparseMatrix::from_dense(&a_c)), 6.0);

        assert_eq!(galerkin(edge2().adjacency().to_dense(), Matrix::ones(2, 1)), Matrix::filled(1, 1, 2.0));

        let t = Tape::new();
        let a = t.constant(Matrix::<f64>::zeros(3, 3));
        let s = t.constant(Matrix::zeros(2, 1));
        assert!(matches!(galerkin_coarsen(&t, a, s), Err(Error::Dimension { .. })));
    }

    #[test]
    fn aggregation_set_examples() {
        assert_eq!(aggregation_set(&Matrix::<f64>::ones(2, 1), 0).unwrap(), vec![0, 1]);
        let id = Matrix::<f64>::identity(3);
        for j in 0..3 {
            assert_eq!(aggregation_set(&id, j).unwrap(), vec![j]);
        }
        let s = Matrix::<f64>::filled(3, 2, 0.5);
        assert_eq!(aggregation_set(&s, 0).unwrap(), vec![0, 1, 2]);
        assert_eq!(aggregation_set(&s, 1).unwrap(), vec![0, 1, 2]);
        assert!(matches!(aggregation_set(&s, 2), Err(Error::Index { .. })));
    }

    #[test]
    fn theorem1_examples() {
        let g = k3();
        let id = Matrix::identity(3);
        assert!(check_theorem1(g.adjacency(), &id, g.adjacency()).unwrap().is_empty());

        let level = coarsen_graph(&g, &Matrix::zeros(1, 1), 0.5).unwrap();
        assert_eq!(level.selected, vec![0, 1]);
        assert!(level.a_c.pattern().get(0, 1));
        assert!(check_theorem1(g.adjacency(), &level.s, &level.a_c).unwrap().is_empty());

        // a coarse matrix that drops a real connection is reported
        let broken = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.5), (1, 1, 1.5)]).unwrap();
        let v = check_theorem1(g.adjacency(), &level.s, &broken).unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn random_graphs_satisfy_structure_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let n = rng.gen_range(2..16);
            let g: Graph<f64> = generate::erdos_renyi(n, 0.3, 3, &mut rng);
            let w = Matrix::from_fn(3, 1, |_, _| rng.gen_range(-1.0..1.0));
            let level = coarsen_graph(&g, &w, 0.5).unwrap();
            assert_eq!(level.m(), coarse_count(n, 0.5));
            assert!(check_theorem1(g.adjacency(), &level.s, &level.a_c).unwrap().is_empty());
            assert!(check_corollary1(&g, &level).unwrap().is_empty());
            let allowed = allowed_s_pattern(g.adjacency(), &level.selected);
            assert!(Pattern::of_dense(&level.s).is_subset_of(&allowed));
            for r in level.s.row_sums() {
                assert!(r.abs() <= 1e-10 || (r - 1.0).abs() <= 1e-10);
            }
            assert!(level.s.as_slice().iter().all(|&v| v >= 0.0));
            let mut sel = level.selected.clone();
            sel.dedup();
            assert_eq!(sel.len(), level.m());
            if level.s.row_sums().iter().all(|&r| r > 0.5) {
                let before = total_edge_weight(g.adjacency());
                let after = total_edge_weight(&level.a_c);
                assert!((after - before).abs() <= 1e-9 * before.max(1e-300));
            }
        }
    }

    #[test]
    fn coarsening_is_permutation_equivariant_for_distinct_scores() {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.gen_range(3..12);
            let g: Graph<f64> = generate::connected_erdos_renyi(n, 0.4, 4, &mut rng);
            let w = Matrix::from_fn(4, 1, |_, _| rng.gen_range(-1.0..1.0));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let pg = permute(&g, &perm).unwrap();
            let base = coarsen_graph(&g, &w, 0.5).unwrap();
            let mut sorted = base.alpha.as_slice().to_vec();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|p| p[1] - p[0] < 1e-12) {
                continue;
            }
            let moved = coarsen_graph(&pg, &w, 0.5).unwrap();
            let mapped: Vec<usize> = base.selected.iter().map(|&i| perm[i]).collect();
            assert_eq!(mapped, moved.selected);
            let a = base.a_c.to_dense();
            let b = moved.a_c.to_dense();
            assert!(a.max_abs_diff(&b).unwrap() <= 1e-10);
        }
    }
}
