//! Reverse-mode differentiation over an append-only record of operations.
//!
//! A [`Tape`] owns every intermediate value of one forward pass. Parameters
//! enter as leaves copied from a [`ParameterSet`]; [`Tape::backward`] walks
//! the record in reverse and adds `d loss / d parameter` into each set's
//! gradient accumulators. Build a fresh tape (or [`Tape::clear`] one) per
//! training step.

use std::f64::consts::PI;

use super::{NnError, ParamId, ParameterSet, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param {
        set: u64,
        id: ParamId,
    },
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Square(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Minimum(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Clamp {
        x: Var,
        lo: f64,
        hi: f64,
    },
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    PickColumns {
        x: Var,
        index: Vec<usize>,
    },
    PickBlocks {
        x: Var,
        index: Vec<usize>,
        width: usize,
    },
    GatherRows {
        x: Var,
        index: Vec<usize>,
    },
    GaussianLogProb {
        action: Var,
        mean: Var,
        log_std: Var,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// `½·ln(2π)`
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// The computation record for one forward/backward pass.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, left: &Tensor, right: &Tensor) -> NnError {
    NnError::ShapeMismatch {
        op,
        left: left.shape().to_vec(),
        right: right.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops every recorded node. Previously issued [`Var`]s become invalid.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        let requires_grad = match op {
            Op::Constant => false,
            Op::Param { .. } => true,
            _ => self
                .inputs(&op)
                .iter()
                .any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn inputs(&self, op: &Op) -> Vec<Var> {
        match *op {
            Op::Constant | Op::Param { .. } => vec![],
            Op::Affine { x, w, b } => vec![x, w, b],
            Op::Tanh(x)
            | Op::Sigmoid(x)
            | Op::Exp(x)
            | Op::Square(x)
            | Op::Softmax(x)
            | Op::LogSoftmax(x)
            | Op::Scale(x, _)
            | Op::Shift(x)
            | Op::Clamp { x, .. }
            | Op::Sum(x)
            | Op::Mean(x)
            | Op::SumRows(x)
            | Op::PickColumns { x, .. }
            | Op::PickBlocks { x, .. }
            | Op::GatherRows { x, .. } => vec![x],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Minimum(a, b) => vec![a, b],
            Op::GaussianLogProb {
                action,
                mean,
                log_std,
            } => vec![action, mean, log_std],
        }
    }

    /// Records a value that gradients do not flow into.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Constant, value)
    }

    /// Records a copy of a parameter; `backward` routes its gradient back to `set`.
    pub fn param(&mut self, set: &ParameterSet, id: ParamId) -> Var {
        let value = set.value(id).clone();
        self.push(
            Op::Param {
                set: set.set_id(),
                id,
            },
            value,
        )
    }

    /// `y = x·Wᵀ + b` for `x: [batch, n_in]` (or `[n_in]`), `W: [n_out, n_in]`, `b: [n_out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let [n_out, n_in] = *wv.shape() else {
            return Err(mismatch("affine", xv, wv));
        };
        let (batch, cols) = xv.rows_cols();
        if xv.shape().is_empty() || cols != n_in {
            return Err(mismatch("affine", xv, wv));
        }
        if bv.shape() != [n_out] {
            return Err(mismatch("affine", wv, bv));
        }
        let mut out = vec![0.0; batch * n_out];
        for row in out.chunks_exact_mut(n_out) {
            row.copy_from_slice(bv.data());
        }
        // out[batch, n_out] += x[batch, n_in] · W^T
        gemm(
            batch,
            n_in,
            n_out,
            xv.data(),
            (n_in as isize, 1),
            wv.data(),
            (1, n_in as isize),
            &mut out,
            1.0,
        );
        let shape = if xv.shape().len() == 1 {
            vec![n_out]
        } else {
            vec![batch, n_out]
        };
        Ok(self.push(Op::Affine { x, w, b }, Tensor::with_data(shape, out)))
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::with_data(src.shape().to_vec(), data);
        self.push(op, value)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x), f64::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map(x, Op::Exp(x), f64::exp)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.map(x, Op::Square(x), |v| v * v)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.map(x, Op::Scale(x, factor), |v| v * factor)
    }

    pub fn shift(&mut self, x: Var, offset: f64) -> Var {
        self.map(x, Op::Shift(x), |v| v + offset)
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.map(x, Op::Clamp { x, lo, hi }, |v| v.clamp(lo, hi))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let (_, cols) = src.rows_cols();
        let mut data = src.data().to_vec();
        for row in data.chunks_exact_mut(cols.max(1)) {
            softmax_in_place(row);
        }
        let value = Tensor::with_data(src.shape().to_vec(), data);
        self.push(Op::Softmax(x), value)
    }

    /// Row-wise `log softmax`.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let (_, cols) = src.rows_cols();
        let mut data = src.data().to_vec();
        for row in data.chunks_exact_mut(cols.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_norm = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= log_norm;
            }
        }
        let value = Tensor::with_data(src.shape().to_vec(), data);
        self.push(Op::LogSoftmax(x), value)
    }

    fn zip(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch(name, av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::with_data(av.shape().to_vec(), data);
        Ok(self.push(op, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("minimum", a, b, Op::Minimum(a, b), f64::min)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(total))
    }

    /// Mean over all elements; the mean of an empty tensor is 0.
    pub fn mean(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let n = src.len().max(1) as f64;
        let mean = src.data().iter().sum::<f64>() / n;
        self.push(Op::Mean(x), Tensor::scalar(mean))
    }

    /// `[rows, cols] -> [rows]`
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let (rows, cols) = src.rows_cols();
        let data = if cols == 0 {
            vec![0.0; rows]
        } else {
            src.data()
                .chunks_exact(cols)
                .map(|r| r.iter().sum())
                .collect()
        };
        self.push(Op::SumRows(x), Tensor::with_data(vec![rows], data))
    }

    /// Selects `x[r, index[r]]` for every row: `[rows, cols] -> [rows]`.
    pub fn pick_columns(&mut self, x: Var, index: &[usize]) -> Result<Var, NnError> {
        let src = self.value(x);
        let (rows, cols) = src.rows_cols();
        if index.len() != rows || index.iter().any(|&i| i >= cols) {
            return Err(NnError::ShapeMismatch {
                op: "pick_columns",
                left: src.shape().to_vec(),
                right: vec![index.len()],
            });
        }
        let data = index
            .iter()
            .enumerate()
            .map(|(r, &c)| src.data()[r * cols + c])
            .collect();
        let value = Tensor::with_data(vec![rows], data);
        Ok(self.push(
            Op::PickColumns {
                x,
                index: index.to_vec(),
            },
            value,
        ))
    }

    /// Selects the `index[r]`-th block of `width` columns in every row:
    /// `[rows, k·width] -> [rows, width]`.
    pub fn pick_blocks(&mut self, x: Var, index: &[usize], width: usize) -> Result<Var, NnError> {
        let src = self.value(x);
        let (rows, cols) = src.rows_cols();
        if width == 0
            || cols % width != 0
            || index.len() != rows
            || index.iter().any(|&i| (i + 1) * width > cols)
        {
            return Err(NnError::ShapeMismatch {
                op: "pick_blocks",
                left: src.shape().to_vec(),
                right: vec![index.len(), width],
            });
        }
        let mut data = Vec::with_capacity(rows * width);
        for (r, &i) in index.iter().enumerate() {
            let start = r * cols + i * width;
            data.extend_from_slice(&src.data()[start..start + width]);
        }
        let value = Tensor::with_data(vec![rows, width], data);
        Ok(self.push(
            Op::PickBlocks {
                x,
                index: index.to_vec(),
                width,
            },
            value,
        ))
    }

    /// Gathers rows `x[index[k], :]`: `[n, cols] -> [index.len(), cols]`.
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var, NnError> {
        let src = self.value(x);
        let (rows, cols) = src.rows_cols();
        if index.iter().any(|&i| i >= rows) {
            return Err(NnError::ShapeMismatch {
                op: "gather_rows",
                left: src.shape().to_vec(),
                right: vec![index.len()],
            });
        }
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index {
            data.extend_from_slice(src.row(i));
        }
        let value = Tensor::with_data(vec![index.len(), cols], data);
        Ok(self.push(
            Op::GatherRows {
                x,
                index: index.to_vec(),
            },
            value,
        ))
    }

    /// Diagonal-Gaussian log density, one value per row.
    ///
    /// `action` and `mean` share a shape (`[d]` or `[rows, d]`); `log_std` is
    /// either the same shape or a `[d]` vector shared by every row.
    pub fn gaussian_log_prob(
        &mut self,
        action: Var,
        mean: Var,
        log_std: Var,
    ) -> Result<Var, NnError> {
        let (av, mv, sv) = (self.value(action), self.value(mean), self.value(log_std));
        if av.shape() != mv.shape() || av.shape().is_empty() {
            return Err(mismatch("gaussian_log_prob", av, mv));
        }
        let (rows, d) = av.rows_cols();
        let broadcast = sv.shape() == [d];
        if !broadcast && sv.shape() != av.shape() {
            return Err(mismatch("gaussian_log_prob", av, sv));
        }
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let ls = if broadcast { sv.data() } else { sv.row(r) };
            let lp = av
                .row(r)
                .iter()
                .zip(mv.row(r))
                .zip(ls)
                .map(|((&a, &m), &s)| {
                    let z = (a - m) * (-s).exp();
                    -s - HALF_LN_TWO_PI - 0.5 * z * z
                })
                .sum();
            out.push(lp);
        }
        let shape = if av.shape().len() == 1 {
            vec![]
        } else {
            vec![rows]
        };
        Ok(self.push(
            Op::GaussianLogProb {
                action,
                mean,
                log_std,
            },
            Tensor::with_data(shape, out),
        ))
    }

    /// Adds `d loss / d parameter` into the accumulators of every set in `sets`
    /// whose parameters were recorded on this tape.
    pub fn backward(&self, loss: Var, sets: &mut [&mut ParameterSet]) -> Result<(), NnError> {
        let grads = self.gradients(loss)?;
        for (node, grad) in self.nodes.iter().zip(&grads) {
            let (Op::Param { set, id }, Some(grad)) = (&node.op, grad) else {
                continue;
            };
            if let Some(target) = sets.iter_mut().find(|s| s.set_id() == *set) {
                target.accumulate_grad(*id, grad);
            }
        }
        Ok(())
    }

    /// Gradient of `loss` with respect to every recorded node.
    pub fn gradients(&self, loss: Var) -> Result<Vec<Option<Vec<f64>>>, NnError> {
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(NnError::NotScalar(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &upstream, &mut grads);
            grads[idx] = Some(upstream);
        }
        Ok(grads)
    }

    fn propagate(&self, idx: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let y = node.value.data();
        let mut acc = |var: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[var.0].requires_grad {
                return;
            }
            let len = self.nodes[var.0].value.len();
            let slot = grads[var.0].get_or_insert_with(|| vec![0.0; len]);
            f(slot);
        };
        match node.op {
            Op::Constant | Op::Param { .. } => {}
            Op::Affine { x, w, b } => {
                let xv = self.value(x);
                let wv = self.value(w);
                let [n_out, n_in] = *wv.shape() else {
                    unreachable!()
                };
                let (batch, _) = xv.rows_cols();
                // dx = dy · W
                acc(x, &mut |g| {
                    gemm(
                        batch,
                        n_out,
                        n_in,
                        dy,
                        (n_out as isize, 1),
                        wv.data(),
                        (n_in as isize, 1),
                        g,
                        1.0,
                    )
                });
                // dW = dyᵀ · x
                acc(w, &mut |g| {
                    gemm(
                        n_out,
                        batch,
                        n_in,
                        dy,
                        (1, n_out as isize),
                        xv.data(),
                        (n_in as isize, 1),
                        g,
                        1.0,
                    )
                });
                acc(b, &mut |g| {
                    for row in dy.chunks_exact(n_out) {
                        for (gi, d) in g.iter_mut().zip(row) {
                            *gi += d;
                        }
                    }
                });
            }
            Op::Tanh(x) => acc(x, &mut |g| {
                for i in 0..g.len() {
                    g[i] += dy[i] * (1.0 - y[i] * y[i]);
                }
            }),
            Op::Sigmoid(x) => acc(x, &mut |g| {
                for i in 0..g.len() {
                    g[i] += dy[i] * y[i] * (1.0 - y[i]);
                }
            }),
            Op::Exp(x) => acc(x, &mut |g| {
                for i in 0..g.len() {
                    g[i] += dy[i] * y[i];
                }
            }),
            Op::Square(x) => {
                let xv = self.value(x).data();
                acc(x, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += dy[i] * 2.0 * xv[i];
                    }
                })
            }
            Op::Softmax(x) => {
                let (_, cols) = node.value.rows_cols();
                acc(x, &mut |g| {
                    for ((g, dy), y) in g
                        .chunks_exact_mut(cols)
                        .zip(dy.chunks_exact(cols))
                        .zip(y.chunks_exact(cols))
                    {
                        let dot: f64 = dy.iter().zip(y).map(|(a, b)| a * b).sum();
                        for i in 0..cols {
                            g[i] += y[i] * (dy[i] - dot);
                        }
                    }
                })
            }
            Op::LogSoftmax(x) => {
                let (_, cols) = node.value.rows_cols();
                acc(x, &mut |g| {
                    for ((g, dy), y) in g
                        .chunks_exact_mut(cols)
                        .zip(dy.chunks_exact(cols))
                        .zip(y.chunks_exact(cols))
                    {
                        let total: f64 = dy.iter().sum();
                        for i in 0..cols {
                            g[i] += dy[i] - y[i].exp() * total;
                        }
                    }
                })
            }
            Op::Add(a, b) => {
                acc(a, &mut |g| add_into(g, dy));
                acc(b, &mut |g| add_into(g, dy));
            }
            Op::Sub(a, b) => {
                acc(a, &mut |g| add_into(g, dy));
                acc(b, &mut |g| {
                    for (g, d) in g.iter_mut().zip(dy) {
                        *g -= d;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(a).data(), self.value(b).data());
                acc(a, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += dy[i] * bv[i];
                    }
                });
                acc(b, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += dy[i] * av[i];
                    }
                });
            }
            Op::Minimum(a, b) => {
                let (av, bv) = (self.value(a).data(), self.value(b).data());
                acc(a, &mut |g| {
                    for i in 0..g.len() {
                        if av[i] <= bv[i] {
                            g[i] += dy[i];
                        }
                    }
                });
                acc(b, &mut |g| {
                    for i in 0..g.len() {
                        if av[i] > bv[i] {
                            g[i] += dy[i];
                        }
                    }
                });
            }
            Op::Scale(x, factor) => acc(x, &mut |g| {
                for (g, d) in g.iter_mut().zip(dy) {
                    *g += d * factor;
                }
            }),
            Op::Shift(x) => acc(x, &mut |g| add_into(g, dy)),
            Op::Clamp { x, lo, hi } => {
                let xv = self.value(x).data();
                acc(x, &mut |g| {
                    for i in 0..g.len() {
                        if xv[i] > lo && xv[i] < hi {
                            g[i] += dy[i];
                        }
                    }
                })
            }
            Op::Sum(x) => acc(x, &mut |g| {
                for gi in g.iter_mut() {
                    *gi += dy[0];
                }
            }),
            Op::Mean(x) => acc(x, &mut |g| {
                let n = g.len().max(1) as f64;
                for gi in g.iter_mut() {
                    *gi += dy[0] / n;
                }
            }),
            Op::SumRows(x) => {
                let (_, cols) = self.value(x).rows_cols();
                acc(x, &mut |g| {
                    for (row, d) in g.chunks_exact_mut(cols.max(1)).zip(dy) {
                        for gi in row.iter_mut() {
                            *gi += d;
                        }
                    }
                })
            }
            Op::PickColumns { x, ref index } => {
                let (_, cols) = self.value(x).rows_cols();
                acc(x, &mut |g| {
                    for (r, &c) in index.iter().enumerate() {
                        g[r * cols + c] += dy[r];
                    }
                })
            }
            Op::PickBlocks {
                x,
                ref index,
                width,
            } => {
                let (_, cols) = self.value(x).rows_cols();
                acc(x, &mut |g| {
                    for (r, &i) in index.iter().enumerate() {
                        let start = r * cols + i * width;
                        add_into(
                            &mut g[start..start + width],
                            &dy[r * width..(r + 1) * width],
                        );
                    }
                })
            }
            Op::GatherRows { x, ref index } => {
                let (_, cols) = self.value(x).rows_cols();
                acc(x, &mut |g| {
                    for (k, &i) in index.iter().enumerate() {
                        add_into(
                            &mut g[i * cols..(i + 1) * cols],
                            &dy[k * cols..(k + 1) * cols],
                        );
                    }
                })
            }
            Op::GaussianLogProb {
                action,
                mean,
                log_std,
            } => {
                let av = self.value(action);
                let mv = self.value(mean);
                let sv = self.value(log_std);
                let (rows, d) = av.rows_cols();
                let broadcast = sv.shape() == [d] && av.shape().len() == 2;
                // Per-element residual scaled by the inverse variance, and the
                // squared standardized residual.
                let mut dmean = vec![0.0; rows * d];
                let mut dstd = vec![0.0; rows * d];
                for r in 0..rows {
                    let ls = if broadcast { sv.data() } else { sv.row(r) };
                    for i in 0..d {
                        let k = r * d + i;
                        let inv_var = (-2.0 * ls[i]).exp();
                        let diff = av.data()[k] - mv.data()[k];
                        dmean[k] = dy[r] * diff * inv_var;
                        dstd[k] = dy[r] * (diff * diff * inv_var - 1.0);
                    }
                }
                acc(action, &mut |g| {
                    for (g, d) in g.iter_mut().zip(&dmean) {
                        *g -= d;
                    }
                });
                acc(mean, &mut |g| add_into(g, &dmean));
                acc(log_std, &mut |g| {
                    if broadcast {
                        for row in dstd.chunks_exact(d) {
                            add_into(g, row);
                        }
                    } else {
                        add_into(g, &dstd);
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Entropy of a diagonal Gaussian with the given log standard deviations.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std
        .iter()
        .map(|s| s + 0.5 * (1.0 + (2.0 * PI).ln()))
        .sum()
}

/// `c[m, n] = beta·c + a[m, k] · b[k, n]` with explicit `(row, col)` strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    let extent = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
        }
    };
    assert!(extent(m, k, a_strides) as usize <= a.len());
    assert!(extent(k, n, b_strides) as usize <= b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above bound every index the kernel touches by the
    // slice lengths, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
