//! Entropic optimal transport between the nodes of a graph and its coarse
//! graph, evaluated after a fixed number of Sinkhorn rounds so that the
//! result stays differentiable.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tape, Unary, Var};

/// Inputs of a k-step entropic transport problem.
#[derive(Debug, Clone)]
pub struct TransportProblem<T> {
    /// `n x m` cost matrix on the tape.
    pub cost: Var,
    /// Source marginal, `n x 1`.
    pub a: Matrix<T>,
    /// Target marginal, `m x 1`.
    pub b: Matrix<T>,
    pub gamma: T,
    /// Number of `(u, v)` update pairs.
    pub k: usize,
}

impl<T: Scalar> TransportProblem<T> {
    /// Problem with uniform marginals `1/n` and `1/m`.
    pub fn uniform(tape: &Tape<T>, cost: Var, gamma: T, k: usize) -> Result<Self> {
        let (n, m) = tape.shape(cost);
        let problem = Self {
            cost,
            a: Matrix::filled(n, 1, T::one() / T::from_usize_lossy(n.max(1))),
            b: Matrix::filled(m, 1, T::one() / T::from_usize_lossy(m.max(1))),
            gamma,
            k,
        };
        problem.validate(tape)?;
        Ok(problem)
    }

    pub fn validate(&self, tape: &Tape<T>) -> Result<()> {
        let (n, m) = tape.shape(self.cost);
        if self.a.shape() != (n, 1) || self.b.shape() != (m, 1) {
            return Err(Error::Dimension {
                op: "transport marginals",
                left: (self.a.rows(), self.b.rows()),
                right: (n, m),
            });
        }
        if n == 0 || m == 0 {
            return Err(Error::contract("transport problem needs non-empty marginals"));
        }
        if !(self.gamma > T::zero()) {
            return Err(Error::contract("gamma must be positive"));
        }
        if self.k == 0 {
            return Err(Error::contract("k must be at least 1"));
        }
        let tol = T::lit(1e-12);
        for (name, w) in [("a", &self.a), ("b", &self.b)] {
            if w.as_slice().iter().any(|&x| !(x > T::zero())) {
                return Err(Error::contract(format!("marginal {name} must be positive")));
            }
            if (w.sum() - T::one()).abs() > tol {
                return Err(Error::contract(format!("marginal {name} must sum to one")));
            }
        }
        if tape.value_ref(self.cost).as_slice().iter().any(|&x| x < T::zero()) {
            return Err(Error::contract("cost matrix must be non-negative"));
        }
        Ok(())
    }
}

/// Result of [`sinkhorn_k_steps`].
#[derive(Debug, Clone)]
pub struct TransportPlan<T> {
    /// `diag(u) K diag(v)`.
    pub plan: Var,
    pub u: Var,
    pub v: Var,
    pub kernel: Matrix<T>,
}

/// `M_ij = ||x_i - y_j||^p`. For `p = 2` this is the squared distance, which
/// is differentiable everywhere.
pub fn cost_matrix<T: Scalar>(tape: &Tape<T>, x: Var, x_c: Var, p: T) -> Result<Var> {
    let sq = tape.sq_dist(x, x_c)?;
    if p == T::lit(2.0) {
        Ok(sq)
    } else {
        tape.unary(Unary::Powf(p / T::lit(2.0)), sq)
    }
}

/// `exp(-M / gamma)`, floored at the smallest positive normal value so no
/// entry is exactly zero.
pub fn gibbs_kernel<T: Scalar>(tape: &Tape<T>, cost: Var, gamma: T) -> Result<Var> {
    if !(gamma > T::zero()) {
        return Err(Error::contract("gamma must be positive"));
    }
    let scaled = tape.scale(cost, -gamma.recip());
    tape.unary(Unary::ClampMin(T::min_positive_value()), tape.exp(scaled))
}

/// Kernel of the row-shifted cost `M - min_j M_ij`. The shift only rescales
/// rows of `K`, which the `u` update absorbs exactly, so every iterate of the
/// plan is unchanged while each row keeps an entry equal to one.
fn shifted_kernel<T: Scalar>(tape: &Tape<T>, cost: Var, gamma: T) -> Result<Var> {
    let shift = {
        let m = tape.value_ref(cost);
        Matrix::from_fn(m.rows(), m.cols(), |i, _| {
            m.row(i).iter().copied().fold(T::infinity(), T::min)
        })
    };
    let shifted = tape.sub(cost, tape.constant(shift))?;
    gibbs_kernel(tape, shifted, gamma)
}

/// Exactly `k` rounds of `u <- a / (K v)`, `v <- b / (K^T u)` from `v = 1`,
/// unrolled on the tape.
pub fn sinkhorn_k_steps<T: Scalar>(
    tape: &Tape<T>,
    problem: &TransportProblem<T>,
) -> Result<TransportPlan<T>> {
    problem.validate(tape)?;
    let (n, m) = tape.shape(problem.cost);
    let kernel = shifted_kernel(tape, problem.cost, problem.gamma)?;
    let kernel_t = tape.transpose(kernel);
    let a = tape.constant(problem.a.clone());
    let b = tape.constant(problem.b.clone());
    let floor = T::min_positive_value();
    let mut v = tape.constant(Matrix::ones(m, 1));
    let mut u = a;
    for step in 1..=problem.k {
        let kv = tape.matmul(kernel, v)?;
        guard_denominator(tape, kv, step, "u")?;
        u = tape.div_with_floor(a, kv, floor)?;
        let ktu = tape.matmul(kernel_t, u)?;
        guard_denominator(tape, ktu, step, "v")?;
        v = tape.div_with_floor(b, ktu, floor)?;
    }
    let row_scale = tape.matmul(u, tape.constant(Matrix::ones(1, m)))?;
    let col_scale = tape.matmul(tape.constant(Matrix::ones(n, 1)), tape.transpose(v))?;
    let plan = tape.mul(tape.mul(row_scale, kernel)?, col_scale)?;
    if let Some(k) = tape.value_ref(plan).as_slice().iter().position(|x| !x.is_finite()) {
        return Err(Error::Underflow { step: problem.k, side: "plan", entry: k });
    }
    Ok(TransportPlan {
        plan,
        u,
        v,
        kernel: tape.value(kernel),
    })
}

fn guard_denominator<T: Scalar>(tape: &Tape<T>, d: Var, step: usize, side: &'static str) -> Result<()> {
    let floor = T::min_positive_value();
    match tape.value_ref(d).as_slice().iter().position(|&x| !(x > floor)) {
        Some(entry) => Err(Error::Underflow { step, side, entry }),
        None => Ok(()),
    }
}

/// `E(P) = -sum P_ij (log P_ij - 1)`.
pub fn entropy<T: Scalar>(tape: &Tape<T>, plan: Var) -> Result<Var> {
    let log_p = tape.log(plan)?;
    let inner = tape.mul(plan, tape.shift(log_p, -T::one()))?;
    Ok(tape.scale(tape.sum(inner)?, -T::one()))
}

/// k-step transport distance `<P, M> - gamma E(P)` together with the plan.
pub fn ot_distance<T: Scalar>(
    tape: &Tape<T>,
    problem: &TransportProblem<T>,
) -> Result<(Var, TransportPlan<T>)> {
    let plan = sinkhorn_k_steps(tape, problem)?;
    let transport = tape.inner(plan.plan, problem.cost)?;
    let e = entropy(tape, plan.plan)?;
    let loss = tape.sub(transport, tape.scale(e, problem.gamma))?;
    Ok((loss, plan))
}

/// Unregularised optimum of `<P, M>` over plans with marginals `a`, `b`.
///
/// Solved exactly by successive shortest augmenting paths on the bipartite
/// transportation network. Meant as a reference for small instances
/// (`n * m <= 64`).
pub fn lp_exact_ot<T: Scalar>(cost: &Matrix<T>, a: &[T], b: &[T]) -> Result<(Matrix<T>, T)> {
    let (n, m) = cost.shape();
    if n * m > 64 {
        return Err(Error::contract(format!(
            "exact transport limited to n*m <= 64, got {n}x{m}"
        )));
    }
    if a.len() != n || b.len() != m {
        return Err(Error::Dimension {
            op: "lp_exact_ot",
            left: (a.len(), b.len()),
            right: (n, m),
        });
    }
    let sa: f64 = a.iter().map(|x| x.as_f64()).sum();
    let sb: f64 = b.iter().map(|x| x.as_f64()).sum();
    if (sa - sb).abs() > 1e-12 || a.iter().chain(b).any(|&x| x < T::zero()) {
        return Err(Error::contract("marginals must be non-negative with equal mass"));
    }
    let mut net = FlowNetwork::new(n, m);
    for i in 0..n {
        net.add_edge(net.source, i, a[i].as_f64(), 0.0);
    }
    for j in 0..m {
        net.add_edge(n + j, net.sink, b[j].as_f64(), 0.0);
    }
    let mut pair_edge = vec![0usize; n * m];
    for i in 0..n {
        for j in 0..m {
            pair_edge[i * m + j] = net.add_edge(i, n + j, f64::INFINITY, cost[(i, j)].as_f64());
        }
    }
    net.run(sa.min(sb));
    let plan = Matrix::from_fn(n, m, |i, j| T::lit(net.flow(pair_edge[i * m + j])));
    let total = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| plan[(i, j)] * cost[(i, j)])
        .sum();
    Ok((plan, total))
}

const FLOW_EPS: f64 = 1e-15;

struct FlowEdge {
    to: usize,
    cap: f64,
    cost: f64,
    flow: f64,
}

struct FlowNetwork {
    edges: Vec<FlowEdge>,
    out: Vec<Vec<usize>>,
    source: usize,
    sink: usize,
}

impl FlowNetwork {
    fn new(n: usize, m: usize) -> Self {
        let nodes = n + m + 2;
        Self {
            edges: Vec::new(),
            out: vec![Vec::new(); nodes],
            source: n + m,
            sink: n + m + 1,
        }
    }

    /// Adds `from -> to` and its residual twin; returns the forward edge id.
    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(FlowEdge { to, cap, cost, flow: 0.0 });
        self.edges.push(FlowEdge { to: from, cap: 0.0, cost: -cost, flow: 0.0 });
        self.out[from].push(id);
        self.out[to].push(id + 1);
        id
    }

    fn residual(&self, e: usize) -> f64 {
        self.edges[e].cap - self.edges[e].flow
    }

    fn flow(&self, e: usize) -> f64 {
        self.edges[e].flow
    }

    fn run(&mut self, demand: f64) {
        let nodes = self.out.len();
        let mut sent = 0.0;
        let max_rounds = 4 * nodes * nodes + 16;
        for _ in 0..max_rounds {
            if demand - sent <= FLOW_EPS {
                break;
            }
            // Bellman-Ford: residual costs may be negative
            let mut dist = vec![f64::INFINITY; nodes];
            let mut via = vec![usize::MAX; nodes];
            dist[self.source] = 0.0;
            for _ in 0..nodes {
                let mut changed = false;
                for u in 0..nodes {
                    if dist[u].is_infinite() {
                        continue;
                    }
                    for &e in &self.out[u] {
                        if self.residual(e) <= FLOW_EPS {
                            continue;
                        }
                        let v = self.edges[e].to;
                        let nd = dist[u] + self.edges[e].cost;
                        if nd < dist[v] - 1e-15 {
                            dist[v] = nd;
                            via[v] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[self.sink].is_infinite() {
                break;
            }
            let mut push = demand - sent;
            let mut v = self.sink;
            while v != self.source {
                let e = via[v];
                push = push.min(self.residual(e));
                v = self.edges[e ^ 1].to;
            }
            let mut v = self.sink;
            while v != self.source {
                let e = via[v];
                self.edges[e].flow += push;
                self.edges[e ^ 1].flow -= push;
                v = self.edges[e ^ 1].to;
            }
            sent += push;
        }
    }
}
