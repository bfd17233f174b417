//! Reverse-mode differentiation over dense row-major blocks.
//!
//! Each node on the [`Tape`] holds a `rows x cols` block of values. The
//! primitive set is deliberately small: the dense layer of the Q network,
//! ReLU, column gather, elementwise arithmetic, `exp`/`log`, and the two
//! reductions `sum`/`mean`. Every primitive checks its output for non-finite
//! values so an overflow is reported at the operation that produced it.

use super::kernels;
use super::net::Dense;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Dense { x: Var, params: Var, layer: Dense },
    Relu(Var),
    Gather { x: Var, index: Vec<usize> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Square(Var),
    Scale(Var, f64),
    Shift(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    requires_grad: bool,
}

/// Record of a forward computation.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient of the differentiated output with respect to `v`. Nodes the
    /// output does not depend on get a zero vector.
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        match &self.adjoints[v.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.lens[v.0]],
        }
    }

    pub fn take(&mut self, v: Var) -> Vec<f64> {
        self.adjoints[v.0]
            .take()
            .unwrap_or_else(|| vec![0.0; self.lens[v.0]])
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable column vector.
    pub fn param(&mut self, values: &[f64]) -> Var {
        self.push(Op::Leaf, values.len(), 1, values.to_vec(), true)
    }

    /// A constant block; no gradient is propagated into it.
    pub fn constant(&mut self, values: Vec<f64>, rows: usize, cols: usize) -> Result<Var> {
        if rows * cols != values.len() {
            return Err(Error::Dimension {
                context: "constant",
                expected: rows * cols,
                actual: values.len(),
            });
        }
        Ok(self.push(Op::Leaf, rows, cols, values, false))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let n = &self.nodes[v.0];
        debug_assert_eq!(n.value.len(), 1);
        n.value[0]
    }

    /// `x * W + b` where `W`, `b` are slices of the flat parameter node.
    pub fn dense(&mut self, x: Var, params: Var, layer: Dense) -> Result<Var> {
        let (rows, cols) = self.dims(x);
        if cols != layer.fan_in {
            return Err(Error::Dimension {
                context: "dense input",
                expected: layer.fan_in,
                actual: cols,
            });
        }
        let plen = self.nodes[params.0].value.len();
        if plen < layer.end() {
            return Err(Error::Dimension {
                context: "dense parameters",
                expected: layer.end(),
                actual: plen,
            });
        }
        let mut out = vec![0.0; rows * layer.fan_out];
        kernels::dense_forward(
            &self.nodes[x.0].value,
            rows,
            &self.nodes[params.0].value,
            layer,
            &mut out,
        );
        self.checked(Op::Dense { x, params, layer }, rows, layer.fan_out, out, "dense")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let n = &self.nodes[x.0];
        let out = n.value.iter().map(|&v| v.max(0.0)).collect();
        let (r, c) = (n.rows, n.cols);
        self.checked(Op::Relu(x), r, c, out, "relu")
    }

    /// Picks column `index[r]` from each row, giving a `rows x 1` block.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let n = &self.nodes[x.0];
        if index.len() != n.rows {
            return Err(Error::Dimension {
                context: "gather rows",
                expected: n.rows,
                actual: index.len(),
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= n.cols) {
            return Err(Error::InvalidInput(format!(
                "gather index {bad} out of range for {} columns",
                n.cols
            )));
        }
        let out = index
            .iter()
            .enumerate()
            .map(|(r, &c)| n.value[r * n.cols + c])
            .collect();
        let rows = n.rows;
        self.checked(
            Op::Gather {
                x,
                index: index.to_vec(),
            },
            rows,
            1,
            out,
            "gather",
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.map(x, "square", |v| v * v, Op::Square(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.map(x, "scale", |v| v * c, Op::Scale(x, c))
    }

    /// Adds the constant `c` elementwise.
    pub fn shift(&mut self, x: Var, c: f64) -> Result<Var> {
        self.map(x, "shift", |v| v + c, Op::Shift(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.map(x, "exp", f64::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.map(x, "log", f64::ln, Op::Log(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.nodes[x.0].value.iter().sum();
        self.checked(Op::Sum(x), 1, 1, vec![s], "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        if v.is_empty() {
            return Err(Error::InvalidInput("mean of an empty block".into()));
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.checked(Op::Mean(x), 1, 1, vec![m], "mean")
    }

    /// Propagates adjoints from the scalar `output` back to every node that
    /// requires a gradient.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = &self.nodes[output.0];
        if out.value.len() != 1 {
            return Err(Error::Dimension {
                context: "backward output",
                expected: 1,
                actual: out.value.len(),
            });
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adj[output.0] = Some(vec![1.0]);

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            match &node.op {
                Op::Leaf => {
                    adj[idx] = Some(g);
                    continue;
                }
                Op::Dense { x, params, layer } => {
                    let xn = &self.nodes[x.0];
                    if self.nodes[params.0].requires_grad {
                        let plen = self.nodes[params.0].value.len();
                        let dp = adj[params.0].get_or_insert_with(|| vec![0.0; plen]);
                        kernels::dense_backward_params(&xn.value, node.rows, &g, *layer, dp);
                    }
                    if xn.requires_grad {
                        let dx = adj[x.0].get_or_insert_with(|| vec![0.0; xn.value.len()]);
                        kernels::dense_backward_input(
                            &self.nodes[params.0].value,
                            node.rows,
                            &g,
                            *layer,
                            dx,
                        );
                    }
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    self.accumulate(&mut adj, *x, |i| if xv[i] > 0.0 { g[i] } else { 0.0 });
                }
                Op::Gather { x, index } => {
                    let xn = &self.nodes[x.0];
                    if xn.requires_grad {
                        let dx = adj[x.0].get_or_insert_with(|| vec![0.0; xn.value.len()]);
                        for (r, &c) in index.iter().enumerate() {
                            dx[r * xn.cols + c] += g[r];
                        }
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, *a, |i| g[i]);
                    self.accumulate(&mut adj, *b, |i| g[i]);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, *a, |i| g[i]);
                    self.accumulate(&mut adj, *b, |i| -g[i]);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    self.accumulate(&mut adj, *a, |i| g[i] * bv[i]);
                    self.accumulate(&mut adj, *b, |i| g[i] * av[i]);
                }
                Op::Square(x) => {
                    let xv = &self.nodes[x.0].value;
                    self.accumulate(&mut adj, *x, |i| 2.0 * xv[i] * g[i]);
                }
                Op::Scale(x, c) => self.accumulate(&mut adj, *x, |i| c * g[i]),
                Op::Shift(x) => self.accumulate(&mut adj, *x, |i| g[i]),
                Op::Exp(x) => {
                    let y = &node.value;
                    self.accumulate(&mut adj, *x, |i| y[i] * g[i]);
                }
                Op::Log(x) => {
                    let xv = &self.nodes[x.0].value;
                    self.accumulate(&mut adj, *x, |i| g[i] / xv[i]);
                }
                Op::Sum(x) => self.accumulate(&mut adj, *x, |_| g[0]),
                Op::Mean(x) => {
                    let n = self.nodes[x.0].value.len() as f64;
                    self.accumulate(&mut adj, *x, |_| g[0] / n);
                }
            }
        }

        for (i, a) in adj.iter().enumerate() {
            if let Some(a) = a {
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericOverflow(self.op_name(i)));
                }
            }
        }
        Ok(Gradients {
            adjoints: adj,
            lens: self.nodes.iter().map(|n| n.value.len()).collect(),
        })
    }

    fn op_name(&self, idx: usize) -> &'static str {
        match self.nodes[idx].op {
            Op::Leaf => "leaf",
            Op::Dense { .. } => "dense",
            Op::Relu(_) => "relu",
            Op::Gather { .. } => "gather",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Square(_) => "square",
            Op::Scale(..) => "scale",
            Op::Shift(_) => "shift",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
        }
    }

    fn accumulate(&self, adj: &mut [Option<Vec<f64>>], target: Var, f: impl Fn(usize) -> f64) {
        let n = &self.nodes[target.0];
        if !n.requires_grad {
            return;
        }
        let dst = adj[target.0].get_or_insert_with(|| vec![0.0; n.value.len()]);
        for (i, d) in dst.iter_mut().enumerate() {
            *d += f(i);
        }
    }

    fn map(&mut self, x: Var, name: &'static str, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let n = &self.nodes[x.0];
        let out = n.value.iter().map(|&v| f(v)).collect();
        let (r, c) = (n.rows, n.cols);
        self.checked(op, r, c, out, name)
    }

    fn zip(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        if (na.rows, na.cols) != (nb.rows, nb.cols) {
            return Err(Error::Dimension {
                context: name,
                expected: na.value.len(),
                actual: nb.value.len(),
            });
        }
        let out = na
            .value
            .iter()
            .zip(&nb.value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let (r, c) = (na.rows, na.cols);
        self.checked(op, r, c, out, name)
    }

    fn checked(
        &mut self,
        op: Op,
        rows: usize,
        cols: usize,
        value: Vec<f64>,
        name: &'static str,
    ) -> Result<Var> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(name));
        }
        let requires_grad = self.inputs_require_grad(&op);
        Ok(self.push(op, rows, cols, value, requires_grad))
    }

    fn inputs_require_grad(&self, op: &Op) -> bool {
        let rg = |v: &Var| self.nodes[v.0].requires_grad;
        match op {
            Op::Leaf => false,
            Op::Dense { x, params, .. } => rg(x) || rg(params),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => rg(a) || rg(b),
            Op::Relu(x)
            | Op::Gather { x, .. }
            | Op::Square(x)
            | Op::Scale(x, _)
            | Op::Shift(x)
            | Op::Exp(x)
            | Op::Log(x)
            | Op::Sum(x)
            | Op::Mean(x) => rg(x),
        }
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>, rg: bool) -> Var {
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
            requires_grad: rg,
        });
        Var(self.nodes.len() - 1)
    }
}
