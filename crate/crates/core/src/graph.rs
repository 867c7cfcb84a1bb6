//! Graph data model and the graph-theoretic helpers used by the coarsener.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Hop distance reported by [`bfs_distances`] for nodes not reachable from
/// the source.
pub const UNREACHABLE: usize = usize::MAX;

const SYMMETRY_TOL: f64 = 1e-12;

/// Coordinate-format sparse matrix with unique, nonzero entries sorted by
/// `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        entries.sort_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::contract(format!(
                    "duplicate sparse coordinate ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::Index {
                    what: "sparse coordinate",
                    index: if i >= rows { i } else { j },
                    len: if i >= rows { rows } else { cols },
                });
            }
            if v == T::zero() {
                return Err(Error::contract(format!(
                    "explicit zero stored at ({i}, {j})"
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    /// Keeps every nonzero entry of `m`.
    pub fn from_dense(m: &Matrix<T>) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != T::zero() {
                    entries.push((i, j, v));
                }
            }
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            entries,
        }
    }

    /// Keeps the entries of `m` inside `pattern`.
    pub fn from_dense_masked(m: &Matrix<T>, pattern: &Pattern) -> Result<Self> {
        if m.shape() != pattern.shape() {
            return Err(Error::Dimension {
                op: "from_dense_masked",
                left: m.shape(),
                right: pattern.shape(),
            });
        }
        let mut entries = Vec::new();
        for (i, j) in pattern.iter() {
            let v = m[(i, j)];
            if v != T::zero() {
                entries.push((i, j, v));
            }
        }
        Ok(Self {
            rows: m.rows(),
            cols: m.cols(),
            entries,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries
            .binary_search_by_key(&(i, j), |&(r, c, _)| (r, c))
            .map_or(T::zero(), |k| self.entries[k].2)
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    pub fn pattern(&self) -> Pattern {
        let mut p = Pattern::empty(self.rows, self.cols);
        for &(i, j, _) in &self.entries {
            p.set(i, j);
        }
        p
    }

    /// Largest `|a_ij - a_ji|`; infinite for non-square matrices.
    pub fn max_asymmetry(&self) -> T {
        if self.rows != self.cols {
            return T::infinity();
        }
        self.entries
            .iter()
            .map(|&(i, j, v)| (v - self.get(j, i)).abs())
            .fold(T::zero(), T::max)
    }
}

/// Boolean sparsity structure of a matrix. Structural nonzeros are tracked
/// independently of the numeric values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Pattern {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut p = Self::empty(n, n);
        for i in 0..n {
            p.set(i, i);
        }
        p
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.cols + j] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / self.cols, k % self.cols))
    }

    pub fn union(&self, other: &Pattern) -> Pattern {
        assert_eq!(self.shape(), other.shape());
        Pattern {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn transpose(&self) -> Pattern {
        let mut t = Pattern::empty(self.cols, self.rows);
        for (i, j) in self.iter() {
            t.set(j, i);
        }
        t
    }

    pub fn select_columns(&self, idx: &[usize]) -> Pattern {
        let mut p = Pattern::empty(self.rows, idx.len());
        for i in 0..self.rows {
            for (k, &j) in idx.iter().enumerate() {
                if self.get(i, j) {
                    p.set(i, k);
                }
            }
        }
        p
    }

    /// Structural product: `(i, j)` is set iff some `k` has both `(i, k)` and
    /// `(k, j)` set.
    pub fn product(&self, other: &Pattern) -> Pattern {
        assert_eq!(self.cols, other.rows, "pattern product shape mismatch");
        let mut p = Pattern::empty(self.rows, other.cols);
        for (i, k) in self.iter() {
            for j in 0..other.cols {
                if other.get(k, j) {
                    p.set(i, j);
                }
            }
        }
        p
    }

    pub fn is_subset_of(&self, other: &Pattern) -> bool {
        self.shape() == other.shape() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    pub fn of_dense<T: Scalar>(m: &Matrix<T>) -> Pattern {
        Pattern {
            rows: m.rows(),
            cols: m.cols(),
            bits: m.as_slice().iter().map(|&v| v != T::zero()).collect(),
        }
    }
}

/// Undirected graph with non-negative edge weights and dense node features.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    adjacency: SparseMatrix<T>,
    features: Matrix<T>,
    label: Option<usize>,
}

impl<T: Scalar> Graph<T> {
    pub fn new(adjacency: SparseMatrix<T>, features: Matrix<T>, label: Option<usize>) -> Result<Self> {
        let (r, c) = adjacency.shape();
        if r != c {
            return Err(Error::Dimension {
                op: "graph adjacency",
                left: (r, c),
                right: (c, r),
            });
        }
        if features.rows() != r {
            return Err(Error::Dimension {
                op: "graph features",
                left: features.shape(),
                right: (r, features.cols()),
            });
        }
        if let Some(&(i, j, _)) = adjacency.entries().iter().find(|e| e.2 < T::zero()) {
            return Err(Error::Domain {
                op: "graph adjacency",
                row: i,
                col: j,
                reason: "negative edge weight".into(),
            });
        }
        if adjacency.max_asymmetry() > T::lit(SYMMETRY_TOL) {
            return Err(Error::contract("adjacency is not symmetric"));
        }
        Ok(Self {
            adjacency,
            features,
            label,
        })
    }

    /// Builds a graph from undirected weighted edges; each pair is stored in
    /// both directions.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, T)],
        features: Matrix<T>,
        label: Option<usize>,
    ) -> Result<Self> {
        let mut dense = Matrix::zeros(n, n);
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Index {
                    what: "edge endpoint",
                    index: u.max(v),
                    len: n,
                });
            }
            dense[(u, v)] = w;
            dense[(v, u)] = w;
        }
        Self::new(SparseMatrix::from_dense(&dense), features, label)
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn adjacency(&self) -> &SparseMatrix<T> {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// Same graph without its class label.
    pub fn unlabeled(&self) -> Self {
        Self {
            label: None,
            ..self.clone()
        }
    }

    /// Neighbour lists of the unweighted structure, self-loops excluded.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        for &(i, j, _) in self.adjacency.entries() {
            if i != j {
                adj[i].push(j);
            }
        }
        adj
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with weighted degrees `D = diag((A + I) 1)`.
pub fn normalized_adjacency<T: Scalar>(g: &Graph<T>) -> SparseMatrix<T> {
    let n = g.n();
    let a = g.adjacency();
    let mut degree = vec![T::one(); n];
    for &(i, _, w) in a.entries() {
        degree[i] = degree[i] + w;
    }
    let s: Vec<T> = degree.iter().map(|d| d.sqrt().recip()).collect();
    let mut dense = Matrix::zeros(n, n);
    for &(i, j, w) in a.entries() {
        dense[(i, j)] = w;
    }
    let mut entries = Vec::with_capacity(a.nnz() + n);
    let pattern = a.pattern().union(&Pattern::identity(n));
    for (i, j) in pattern.iter() {
        let b = if i == j { dense[(i, j)] + T::one() } else { dense[(i, j)] };
        entries.push((i, j, s[i] * b * s[j]));
    }
    SparseMatrix {
        rows: n,
        cols: n,
        entries,
    }
}

/// `1^T A 1`.
pub fn total_edge_weight<T: Scalar>(a: &SparseMatrix<T>) -> T {
    a.entries().iter().map(|e| e.2).sum()
}

/// Unweighted hop distances from `source`; [`UNREACHABLE`] marks nodes in
/// other components.
pub fn bfs_distances<T: Scalar>(g: &Graph<T>, source: usize) -> Result<Vec<usize>> {
    bfs_on(&g.neighbors(), source)
}

pub(crate) fn bfs_on(adj: &[Vec<usize>], source: usize) -> Result<Vec<usize>> {
    let n = adj.len();
    if source >= n {
        return Err(Error::Index {
            what: "bfs source",
            index: source,
            len: n,
        });
    }
    let mut dist = vec![UNREACHABLE; n];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    Ok(dist)
}

/// Relabels nodes so that old node `i` becomes node `perm[i]`.
pub fn permute<T: Scalar>(g: &Graph<T>, perm: &[usize]) -> Result<Graph<T>> {
    let n = g.n();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::contract("permutation is not a bijection on node indices"));
    }
    let entries = g
        .adjacency()
        .entries()
        .iter()
        .map(|&(i, j, w)| (perm[i], perm[j], w))
        .collect();
    let adjacency = SparseMatrix::from_triplets(n, n, entries)?;
    let mut features = Matrix::zeros(n, g.feature_dim());
    for i in 0..n {
        for (j, &v) in g.features().row(i).iter().enumerate() {
            features[(perm[i], j)] = v;
        }
    }
    Ok(Graph {
        adjacency,
        features,
        label: g.label(),
    })
}
