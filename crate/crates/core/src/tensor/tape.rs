//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward evaluation. Nodes are
//! appended in evaluation order, so walking the node list backwards is a
//! valid topological order for the reverse sweep. A fresh tape is built per
//! evaluation; nothing persists between forward passes.

use std::cell::{Ref, RefCell};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest admissible magnitude of a division denominator.
pub const EPS_DIV: f64 = 1e-30;
/// Rows whose sum is at or below this are treated as all-zero by
/// [`Tape::row_normalize_l1`].
pub const EPS_ROW: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Unary<T> {
    Exp,
    Log,
    Sigmoid,
    Square,
    Relu,
    /// Multiply by a constant.
    Scale(T),
    /// Add a constant.
    Shift(T),
    /// Raise to a constant power; the base must be non-negative.
    Powf(T),
    /// `max(x, c)`; the gradient is zero where the floor is active.
    ClampMin(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    /// Sum of all entries, `1 x 1`.
    Sum,
    /// Mean over rows, `1 x cols`.
    ColMean,
    /// Max over rows, `1 x cols`. Subgradient goes to the first maximising row.
    ColMax,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Unary(Unary<T>, Var),
    Binary(Binary, Var, Var),
    RowNormalizeL1(Var),
    GcnNormalize(Var),
    SqDist(Var, Var),
    SelectRows(Var, Vec<usize>),
    SelectCols(Var, Vec<usize>),
    Sum(Var),
    ColMean(Var),
    ColMax(Var, Vec<usize>),
    Inner(Var, Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

/// Record of one forward evaluation.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Gradients of a scalar output with respect to every recorded value.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `v`; all zeros when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Matrix<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn is_reachable(&self, v: Var) -> bool {
        self.grads[v.0].is_some()
    }
}

fn eps<T: Scalar>(x: f64) -> T {
    T::lit(x)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Matrix<T>, op: Op<T>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var(nodes.len() - 1)
    }

    /// Records an input value. Parameters and constants are both leaves.
    pub fn leaf(&self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&self, value: Matrix<T>) -> Var {
        self.leaf(value)
    }

    pub fn value(&self, v: Var) -> Matrix<T> {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn value_ref(&self, v: Var) -> Ref<'_, Matrix<T>> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes.borrow()[v.0].value.shape()
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> T {
        let nodes = self.nodes.borrow();
        let m = &nodes[v.0].value;
        debug_assert_eq!(m.shape(), (1, 1));
        m.as_slice()[0]
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.matmul(&nodes[b.0].value)?
        };
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&self, a: Var) -> Var {
        let value = self.nodes.borrow()[a.0].value.transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn unary(&self, op: Unary<T>, a: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            match op {
                Unary::Log => {
                    if let Some(k) = x.as_slice().iter().position(|&v| !(v > T::zero())) {
                        return Err(domain("log", x.cols(), k, "operand must be positive"));
                    }
                    x.map(|v| v.ln())
                }
                Unary::Powf(p) => {
                    if let Some(k) = x.as_slice().iter().position(|&v| v < T::zero()) {
                        return Err(domain("powf", x.cols(), k, "base must be non-negative"));
                    }
                    x.map(|v| v.powf(p))
                }
                Unary::Exp => x.map(|v| v.exp()),
                Unary::Sigmoid => x.map(sigmoid),
                Unary::Square => x.map(|v| v * v),
                Unary::Relu => x.map(|v| v.max(T::zero())),
                Unary::Scale(c) => x.map(|v| v * c),
                Unary::Shift(c) => x.map(|v| v + c),
                Unary::ClampMin(c) => x.map(|v| v.max(c)),
            }
        };
        Ok(self.push(value, Op::Unary(op, a)))
    }

    pub fn binary(&self, op: Binary, a: Var, b: Var) -> Result<Var> {
        self.binary_with_floor(op, a, b, None)
    }

    /// Entrywise `a / b` with a caller-chosen lower bound on `|b|` instead of
    /// [`EPS_DIV`].
    pub fn div_with_floor(&self, a: Var, b: Var, floor: T) -> Result<Var> {
        self.binary_with_floor(Binary::Div, a, b, Some(floor))
    }

    fn binary_with_floor(&self, op: Binary, a: Var, b: Var, div_floor: Option<T>) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            match op {
                Binary::Add => x.zip_map(y, "add", |p, q| p + q)?,
                Binary::Sub => x.zip_map(y, "sub", |p, q| p - q)?,
                Binary::Mul => x.zip_map(y, "mul", |p, q| p * q)?,
                Binary::Div => {
                    x.same_shape(y, "div")?;
                    let floor = div_floor.unwrap_or_else(|| eps::<T>(EPS_DIV));
                    if let Some(k) = y.as_slice().iter().position(|&v| !(v.abs() > floor)) {
                        return Err(domain("div", y.cols(), k, "denominator magnitude below floor"));
                    }
                    x.zip_map(y, "div", |p, q| p / q)?
                }
            }
        };
        Ok(self.push(value, Op::Binary(op, a, b)))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(Unary::Exp, a).expect("exp is total")
    }

    pub fn log(&self, a: Var) -> Result<Var> {
        self.unary(Unary::Log, a)
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a).expect("sigmoid is total")
    }

    pub fn square(&self, a: Var) -> Var {
        self.unary(Unary::Square, a).expect("square is total")
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(Unary::Relu, a).expect("relu is total")
    }

    pub fn scale(&self, a: Var, c: T) -> Var {
        self.unary(Unary::Scale(c), a).expect("scale is total")
    }

    pub fn shift(&self, a: Var, c: T) -> Var {
        self.unary(Unary::Shift(c), a).expect("shift is total")
    }

    /// Divides every row by its sum. Rows summing to at most [`EPS_ROW`]
    /// become all-zero. Entries must be non-negative.
    pub fn row_normalize_l1(&self, a: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if let Some(k) = x.as_slice().iter().position(|&v| v < T::zero()) {
                return Err(domain("row_normalize_l1", x.cols(), k, "negative entry"));
            }
            let sums = x.row_sums();
            let floor = eps::<T>(EPS_ROW);
            Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                if sums[i] > floor {
                    x[(i, j)] / sums[i]
                } else {
                    T::zero()
                }
            })
        };
        Ok(self.push(value, Op::RowNormalizeL1(a)))
    }

    /// `D^{-1/2} (A + I) D^{-1/2}` with `D = diag((A + I) 1)`, for a square
    /// non-negative `A`.
    pub fn gcn_normalize(&self, a: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if x.rows() != x.cols() {
                return Err(Error::Dimension {
                    op: "gcn_normalize",
                    left: x.shape(),
                    right: (x.cols(), x.rows()),
                });
            }
            if let Some(k) = x.as_slice().iter().position(|&v| v < T::zero()) {
                return Err(domain("gcn_normalize", x.cols(), k, "negative edge weight"));
            }
            let s = inv_sqrt_degrees(x);
            Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                let b = if i == j { x[(i, j)] + T::one() } else { x[(i, j)] };
                s[i] * b * s[j]
            })
        };
        Ok(self.push(value, Op::GcnNormalize(a)))
    }

    /// Pairwise squared Euclidean distances between the rows of `x` and `y`.
    pub fn sq_dist(&self, x: Var, y: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (a, b) = (&nodes[x.0].value, &nodes[y.0].value);
            if a.cols() != b.cols() {
                return Err(Error::Dimension {
                    op: "sq_dist",
                    left: a.shape(),
                    right: b.shape(),
                });
            }
            Matrix::from_fn(a.rows(), b.rows(), |i, j| {
                a.row(i)
                    .iter()
                    .zip(b.row(j))
                    .map(|(&p, &q)| (p - q) * (p - q))
                    .sum()
            })
        };
        Ok(self.push(value, Op::SqDist(x, y)))
    }

    pub fn select_rows(&self, a: Var, idx: &[usize]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            check_indices(idx, x.rows(), "select_rows")?;
            x.select_rows(idx)
        };
        Ok(self.push(value, Op::SelectRows(a, idx.to_vec())))
    }

    pub fn select_cols(&self, a: Var, idx: &[usize]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            check_indices(idx, x.cols(), "select_cols")?;
            x.select_columns(idx)
        };
        Ok(self.push(value, Op::SelectCols(a, idx.to_vec())))
    }

    pub fn reduce(&self, op: Reduce, a: Var) -> Result<Var> {
        let (value, recorded) = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if x.is_empty() {
                return Err(Error::Domain {
                    op: "reduce",
                    row: 0,
                    col: 0,
                    reason: "empty operand".into(),
                });
            }
            match op {
                Reduce::Sum => (Matrix::column(vec![x.sum()]), Op::Sum(a)),
                Reduce::ColMean => {
                    let n = T::from_usize_lossy(x.rows());
                    let means = x.col_sums().into_iter().map(|s| s / n).collect();
                    (Matrix::from_vec(1, x.cols(), means)?, Op::ColMean(a))
                }
                Reduce::ColMax => {
                    let mut arg = vec![0usize; x.cols()];
                    let mut best: Vec<T> = x.row(0).to_vec();
                    for i in 1..x.rows() {
                        for (j, &v) in x.row(i).iter().enumerate() {
                            if v > best[j] {
                                best[j] = v;
                                arg[j] = i;
                            }
                        }
                    }
                    (Matrix::from_vec(1, x.cols(), best)?, Op::ColMax(a, arg))
                }
            }
        };
        Ok(self.push(value, recorded))
    }

    pub fn sum(&self, a: Var) -> Result<Var> {
        self.reduce(Reduce::Sum, a)
    }

    /// Frobenius inner product `<a, b>`.
    pub fn inner(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            x.same_shape(y, "inner")?;
            if x.is_empty() {
                return Err(Error::Domain {
                    op: "inner",
                    row: 0,
                    col: 0,
                    reason: "empty operand".into(),
                });
            }
            let s: T = x
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(&p, &q)| p * q)
                .sum();
            Matrix::column(vec![s])
        };
        Ok(self.push(value, Op::Inner(a, b)))
    }

    /// Reverse sweep from a `1 x 1` output. Every call starts from zeroed
    /// gradients.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let shapes: Vec<_> = nodes.iter().map(|n| n.value.shape()).collect();
        if shapes[output.0] != (1, 1) {
            return Err(Error::contract(format!(
                "backward needs a scalar output, got shape {:?}",
                shapes[output.0]
            )));
        }
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; nodes.len()];
        grads[output.0] = Some(Matrix::ones(1, 1));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    accumulate(&mut grads, *a, g.matmul(&val(*b).transpose())?);
                    accumulate(&mut grads, *b, val(*a).transpose().matmul(&g)?);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Unary(op, a) => {
                    let x = val(*a);
                    let y = &node.value;
                    let dx = match *op {
                        Unary::Exp => g.zip_map(y, "exp'", |g, y| g * y)?,
                        Unary::Log => g.zip_map(x, "log'", |g, x| g / x)?,
                        Unary::Sigmoid => {
                            g.zip_map(y, "sigmoid'", |g, y| g * y * (T::one() - y))?
                        }
                        Unary::Square => g.zip_map(x, "square'", |g, x| g * (x + x))?,
                        Unary::Relu => g.zip_map(x, "relu'", |g, x| {
                            if x > T::zero() {
                                g
                            } else {
                                T::zero()
                            }
                        })?,
                        Unary::Scale(c) => g.scale(c),
                        Unary::Shift(_) => g.clone(),
                        Unary::Powf(p) => g.zip_map(x, "powf'", |g, x| {
                            if x > T::zero() {
                                g * p * x.powf(p - T::one())
                            } else {
                                T::zero()
                            }
                        })?,
                        Unary::ClampMin(c) => g.zip_map(x, "clamp'", |g, x| {
                            if x >= c {
                                g
                            } else {
                                T::zero()
                            }
                        })?,
                    };
                    accumulate(&mut grads, *a, dx);
                }
                Op::Binary(op, a, b) => {
                    let (x, y) = (val(*a), val(*b));
                    match op {
                        Binary::Add => {
                            accumulate(&mut grads, *a, g.clone());
                            accumulate(&mut grads, *b, g.clone());
                        }
                        Binary::Sub => {
                            accumulate(&mut grads, *a, g.clone());
                            accumulate(&mut grads, *b, g.scale(-T::one()));
                        }
                        Binary::Mul => {
                            accumulate(&mut grads, *a, g.zip_map(y, "mul'", |g, y| g * y)?);
                            accumulate(&mut grads, *b, g.zip_map(x, "mul'", |g, x| g * x)?);
                        }
                        Binary::Div => {
                            let q = &node.value;
                            accumulate(&mut grads, *a, g.zip_map(y, "div'", |g, y| g / y)?);
                            let gq = g.zip_map(q, "div'", |g, q| g * q)?;
                            accumulate(&mut grads, *b, gq.zip_map(y, "div'", |t, y| -t / y)?);
                        }
                    }
                }
                Op::RowNormalizeL1(a) => {
                    let x = val(*a);
                    let y = &node.value;
                    let sums = x.row_sums();
                    let floor = eps::<T>(EPS_ROW);
                    let mut dx = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        if !(sums[r] > floor) {
                            continue;
                        }
                        let dot: T = g.row(r).iter().zip(y.row(r)).map(|(&p, &q)| p * q).sum();
                        for c in 0..x.cols() {
                            dx[(r, c)] = (g[(r, c)] - dot) / sums[r];
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::GcnNormalize(a) => {
                    let x = val(*a);
                    let n = x.rows();
                    let s = inv_sqrt_degrees(x);
                    let b = |i: usize, j: usize| {
                        if i == j {
                            x[(i, j)] + T::one()
                        } else {
                            x[(i, j)]
                        }
                    };
                    // d loss / d degree_i through s_i = degree_i^{-1/2}
                    let half = T::lit(0.5);
                    let mut dd = vec![T::zero(); n];
                    for i in 0..n {
                        let mut ds = T::zero();
                        for j in 0..n {
                            ds = ds + g[(i, j)] * b(i, j) * s[j] + g[(j, i)] * b(j, i) * s[j];
                        }
                        dd[i] = -half * ds * s[i] * s[i] * s[i];
                    }
                    let dx = Matrix::from_fn(n, n, |i, j| g[(i, j)] * s[i] * s[j] + dd[i]);
                    accumulate(&mut grads, *a, dx);
                }
                Op::SqDist(xa, ya) => {
                    let (x, y) = (val(*xa), val(*ya));
                    let d = x.cols();
                    let two = T::lit(2.0);
                    let mut dx = Matrix::zeros(x.rows(), d);
                    let mut dy = Matrix::zeros(y.rows(), d);
                    for i in 0..x.rows() {
                        for j in 0..y.rows() {
                            let gij = g[(i, j)] * two;
                            if gij == T::zero() {
                                continue;
                            }
                            for c in 0..d {
                                let diff = gij * (x[(i, c)] - y[(j, c)]);
                                dx[(i, c)] = dx[(i, c)] + diff;
                                dy[(j, c)] = dy[(j, c)] - diff;
                            }
                        }
                    }
                    accumulate(&mut grads, *xa, dx);
                    accumulate(&mut grads, *ya, dy);
                }
                Op::SelectRows(a, idx) => {
                    let (r, c) = shapes[a.0];
                    let mut dx = Matrix::zeros(r, c);
                    for (k, &src) in idx.iter().enumerate() {
                        for j in 0..c {
                            dx[(src, j)] = dx[(src, j)] + g[(k, j)];
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::SelectCols(a, idx) => {
                    let (r, c) = shapes[a.0];
                    let mut dx = Matrix::zeros(r, c);
                    for i in 0..r {
                        for (k, &src) in idx.iter().enumerate() {
                            dx[(i, src)] = dx[(i, src)] + g[(i, k)];
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Sum(a) => {
                    let (r, c) = shapes[a.0];
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g[(0, 0)]));
                }
                Op::ColMean(a) => {
                    let (r, c) = shapes[a.0];
                    let n = T::from_usize_lossy(r);
                    accumulate(&mut grads, *a, Matrix::from_fn(r, c, |_, j| g[(0, j)] / n));
                }
                Op::ColMax(a, arg) => {
                    let (r, c) = shapes[a.0];
                    let mut dx = Matrix::zeros(r, c);
                    for (j, &i) in arg.iter().enumerate() {
                        dx[(i, j)] = g[(0, j)];
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Inner(a, b) => {
                    let s = g[(0, 0)];
                    accumulate(&mut grads, *a, val(*b).scale(s));
                    accumulate(&mut grads, *b, val(*a).scale(s));
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn inv_sqrt_degrees<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    a.row_sums()
        .into_iter()
        .map(|d| (d + T::one()).sqrt().recip())
        .collect()
}

fn accumulate<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(acc) => acc
            .add_assign(&g)
            .expect("gradient shape matches value shape"),
        slot @ None => *slot = Some(g),
    }
}

fn domain(op: &'static str, cols: usize, flat: usize, reason: &str) -> Error {
    let cols = cols.max(1);
    Error::Domain {
        op,
        row: flat / cols,
        col: flat % cols,
        reason: reason.to_string(),
    }
}

fn check_indices(idx: &[usize], len: usize, what: &'static str) -> Result<()> {
    match idx.iter().find(|&&i| i >= len) {
        Some(&index) => Err(Error::Index { what, index, len }),
        None => Ok(()),
    }
}
