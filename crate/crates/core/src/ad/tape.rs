//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Every primitive evaluates eagerly and appends one node to the [`Tape`].
//! [`Tape::backward`] walks the nodes once, in reverse recording order, and
//! accumulates vector-Jacobian products into per-node adjoints.

use crate::ad::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    SelectCols(Var, Vec<usize>),
    ScatterCols(Vec<(Var, Vec<usize>)>),
    SlowDiff(Var, Vec<usize>),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

/// Append-only record of a computation.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    adjoints: Vec<Option<Matrix<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `var`; zeros when `var` does not
    /// influence the loss.
    pub fn wrt(&self, var: Var) -> Matrix<T> {
        match &self.adjoints[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, var: Var) -> Matrix<T> {
        match self.adjoints[var.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[var.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

fn accumulate<T: Real>(slot: &mut Option<Matrix<T>>, g: Matrix<T>) {
    match slot {
        Some(acc) => acc
            .add_assign(&g)
            .expect("adjoint shape matches its node"),
        None => *slot = Some(g),
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    /// Number of recorded nodes, leaves included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// Adds a `1 x cols` bias row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let v = self.value(a).add_row(self.value(bias))?;
        Ok(self.push(v, Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(T::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(T::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(T::ln);
        self.push(v, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Mean of all entries, as a 1x1 node.
    pub fn mean(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).mean());
        self.push(v, Op::Mean(a))
    }

    /// Per-row sums, as a `rows x 1` node.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_rows();
        self.push(v, Op::SumRows(a))
    }

    pub fn select_cols(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let m = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&j| j >= m.cols()) {
            return Err(Error::Shape {
                op: "select_cols",
                lhs: m.shape(),
                rhs: (1, bad),
            });
        }
        let v = m.select_cols(idx);
        Ok(self.push(v, Op::SelectCols(a, idx.to_vec())))
    }

    /// Assembles a matrix whose columns `idx` come from the paired part.
    /// Together the index lists must cover `0..cols` exactly once.
    pub fn scatter_cols(&mut self, parts: &[(Var, &[usize])], cols: usize) -> Result<Var> {
        let rows = parts
            .first()
            .map(|(v, _)| self.value(*v).rows())
            .ok_or_else(|| Error::contract("scatter_cols needs at least one part"))?;
        let mut seen = vec![false; cols];
        let mut out = Matrix::zeros(rows, cols);
        for (v, idx) in parts {
            let m = self.value(*v);
            if m.rows() != rows || m.cols() != idx.len() {
                return Err(Error::Shape {
                    op: "scatter_cols",
                    lhs: (rows, idx.len()),
                    rhs: m.shape(),
                });
            }
            for (j, &c) in idx.iter().enumerate() {
                if c >= cols || seen[c] {
                    return Err(Error::contract(format!(
                        "scatter_cols: column {c} out of range or assigned twice"
                    )));
                }
                seen[c] = true;
                for i in 0..rows {
                    out.set(i, c, m.get(i, j));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::contract("scatter_cols: columns left unassigned"));
        }
        let op = Op::ScatterCols(parts.iter().map(|(v, idx)| (*v, idx.to_vec())).collect());
        Ok(self.push(out, op))
    }

    /// Temporal differencing within consecutive row segments of the given
    /// lengths; the first row of each segment is kept as is.
    pub fn slow_diff(&mut self, a: Var, segments: &[usize]) -> Result<Var> {
        let m = self.value(a);
        if segments.iter().sum::<usize>() != m.rows() || segments.contains(&0) {
            return Err(Error::contract(format!(
                "slow_diff: segments {segments:?} do not tile {} rows",
                m.rows()
            )));
        }
        let v = diff_segments(m, segments);
        Ok(self.push(v, Op::SlowDiff(a, segments.to_vec())))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {shape:?}"
            )));
        }
        let mut adj: Vec<Option<Matrix<T>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Matrix::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_nt(self.value(*b))?;
                    let gb = self.value(*a).matmul_tn(&g)?;
                    accumulate(&mut adj[a.0], ga);
                    accumulate(&mut adj[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj[a.0], g.clone());
                    accumulate(&mut adj[b.0], g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj[b.0], g.scale(-T::one()));
                    accumulate(&mut adj[a.0], g.clone());
                }
                Op::Mul(a, b) => {
                    let ga = g.hadamard(self.value(*b))?;
                    let gb = g.hadamard(self.value(*a))?;
                    accumulate(&mut adj[a.0], ga);
                    accumulate(&mut adj[b.0], gb);
                }
                Op::AddRow(a, bias) => {
                    accumulate(&mut adj[bias.0], g.sum_cols());
                    accumulate(&mut adj[a.0], g.clone());
                }
                Op::Scale(a, c) => accumulate(&mut adj[a.0], g.scale(*c)),
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, "tanh", |g, y| g * (T::one() - y * y))?;
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Exp(a) => accumulate(&mut adj[a.0], g.hadamard(&node.value)?),
                Op::Log(a) => {
                    let ga = g.zip_map(self.value(*a), "log", |g, x| g / x)?;
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Square(a) => {
                    let two = T::lit(2.0);
                    let ga = g.zip_map(self.value(*a), "square", |g, x| two * g * x)?;
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut adj[a.0], Matrix::filled(r, c, g.as_slice()[0]));
                }
                Op::Mean(a) => {
                    let (r, c) = self.value(*a).shape();
                    let n = T::lit((r * c) as f64);
                    accumulate(&mut adj[a.0], Matrix::filled(r, c, g.as_slice()[0] / n));
                }
                Op::SumRows(a) => {
                    let (r, c) = self.value(*a).shape();
                    let ga = Matrix::from_fn(r, c, |i, _| g.get(i, 0));
                    accumulate(&mut adj[a.0], ga);
                }
                Op::SelectCols(a, idx) => {
                    let (r, c) = self.value(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for i in 0..r {
                        for (j, &col) in idx.iter().enumerate() {
                            let cur = ga.get(i, col);
                            ga.set(i, col, cur + g.get(i, j));
                        }
                    }
                    accumulate(&mut adj[a.0], ga);
                }
                Op::ScatterCols(parts) => {
                    for (v, idx) in parts {
                        accumulate(&mut adj[v.0], g.select_cols(idx));
                    }
                }
                Op::SlowDiff(a, segments) => {
                    accumulate(&mut adj[a.0], diff_segments_adjoint(&g, segments));
                }
            }
        }

        // Only leaves keep their adjoints; interior ones were consumed above.
        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

pub(crate) fn diff_segments<T: Real>(m: &Matrix<T>, segments: &[usize]) -> Matrix<T> {
    let mut out = m.clone();
    let mut start = 0;
    for &len in segments {
        for t in (start + 1..start + len).rev() {
            for j in 0..m.cols() {
                out.set(t, j, m.get(t, j) - m.get(t - 1, j));
            }
        }
        start += len;
    }
    out
}

fn diff_segments_adjoint<T: Real>(g: &Matrix<T>, segments: &[usize]) -> Matrix<T> {
    let mut out = g.clone();
    let mut start = 0;
    for &len in segments {
        for t in start..start + len - 1 {
            for j in 0..g.cols() {
                out.set(t, j, g.get(t, j) - g.get(t + 1, j));
            }
        }
        start += len;
    }
    out
}
