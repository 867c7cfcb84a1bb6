//! Random graph generators for tests, benchmarks and property checks.

use rand::Rng;

use crate::graph::Graph;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// G(n, p) with unit weights and features uniform in `[-1, 1)`.
pub fn erdos_renyi<T: Scalar, R: Rng>(n: usize, p: f64, dim: usize, rng: &mut R) -> Graph<T> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j, T::one()));
            }
        }
    }
    let features = random_features(n, dim, rng);
    Graph::from_edges(n, &edges, features, None).expect("generated edges are in range")
}

/// G(n, p) resampled until connected.
pub fn connected_erdos_renyi<T: Scalar, R: Rng>(
    n: usize,
    p: f64,
    dim: usize,
    rng: &mut R,
) -> Graph<T> {
    loop {
        let g = erdos_renyi(n, p, dim, rng);
        if is_connected(&g) {
            return g;
        }
    }
}

pub fn random_features<T: Scalar, R: Rng>(n: usize, dim: usize, rng: &mut R) -> Matrix<T> {
    Matrix::from_fn(n, dim, |_, _| T::lit(rng.gen_range(-1.0..1.0)))
}

pub fn is_connected<T: Scalar>(g: &Graph<T>) -> bool {
    if g.n() == 0 {
        return true;
    }
    crate::graph::bfs_distances(g, 0)
        .map(|d| d.iter().all(|&x| x != crate::graph::UNREACHABLE))
        .unwrap_or(false)
}
