//! A small tape-based reverse-mode differentiation engine over dense `f64`
//! matrices.
//!
//! Every operation appends a node holding its value and how it was computed.
//! [`Tape::backward`] walks the nodes in reverse and accumulates the adjoint of
//! a scalar output into every node that contributed to it. Only the matrix
//! operations the policy network needs are provided.

use std::rc::Rc;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

pub type Mat = Array2<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Max,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    GatherRows(Var, Rc<[usize]>),
    /// Reduces rows of `x` into `out[segment[r]]`; for `Max`, `argmax[o * cols + c]`
    /// records the winning row (or `usize::MAX` for empty segments).
    Segment { x: Var, segment: Rc<[usize]>, kind: Reduce, argmax: Vec<usize> },
    ScaleRows(Var, Rc<[f64]>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    /// Per-column standardization with a learned affine map. `xhat` and
    /// `inv_std` are cached from the forward pass; `batch_stats` says whether
    /// the statistics depend on `x` (training) or are constants (inference).
    ColumnNorm { x: Var, gamma: Var, beta: Var, xhat: Mat, inv_std: Vec<f64>, batch_stats: bool },
    /// Per-row standardization with a learned affine map.
    RowNorm { x: Var, gamma: Var, beta: Var, xhat: Mat, inv_std: Vec<f64> },
    /// Row softmax restricted to allowed entries (others are exactly 0).
    MaskedSoftmax(Var),
    /// Mean over rows of `-log softmax(x)[target]` over allowed entries;
    /// caches the probabilities.
    MaskedNll { x: Var, targets: Rc<[usize]>, probs: Mat },
}

struct Node {
    value: Mat,
    op: Op,
}

/// Records operations for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }

    /// The adjoint of `v`, or zeros shaped like `like` if nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, like: &Mat) -> Mat {
        self.grads[v.0].clone().unwrap_or_else(|| Mat::zeros(like.raw_dim()))
    }
}

pub(crate) fn row_softmax_masked(x: &Mat, allowed: Option<&Array2<bool>>) -> Mat {
    let mut out = x.clone();
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        let ok = |c: usize| allowed.is_none_or(|a| a[[r, c]]);
        let mut max = f64::NEG_INFINITY;
        for (c, v) in row.iter().enumerate() {
            if ok(c) && *v > max {
                max = *v;
            }
        }
        let mut total = 0.0;
        for (c, v) in row.iter_mut().enumerate() {
            if ok(c) {
                *v = (*v - max).exp();
                total += *v;
            } else {
                *v = 0.0;
            }
        }
        if total > 0.0 {
            row.mapv_inplace(|v| v / total);
        }
    }
    out
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

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A leaf: a parameter or a constant input.
    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    /// Elementwise sum; `b` may also be a single row broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    /// `out[r] = x[index[r]]`.
    pub fn gather_rows(&mut self, x: Var, index: Rc<[usize]>) -> Var {
        let v = self.value(x).select(Axis(0), &index);
        self.push(v, Op::GatherRows(x, index))
    }

    /// Reduces the rows of `x` into `segments` output rows by `segment[r]`.
    /// Empty segments yield zeros.
    pub fn segment_reduce(&mut self, x: Var, segment: Rc<[usize]>, segments: usize, kind: Reduce) -> Var {
        let xv = self.value(x);
        let cols = xv.ncols();
        let mut out = Mat::zeros((segments, cols));
        let mut argmax = Vec::new();
        match kind {
            Reduce::Sum => {
                for (r, &sgm) in segment.iter().enumerate() {
                    let mut o = out.row_mut(sgm);
                    o += &xv.row(r);
                }
            }
            Reduce::Max => {
                argmax = vec![usize::MAX; segments * cols];
                out.fill(f64::NEG_INFINITY);
                for (r, &sgm) in segment.iter().enumerate() {
                    for c in 0..cols {
                        let val = xv[[r, c]];
                        if val > out[[sgm, c]] {
                            out[[sgm, c]] = val;
                            argmax[sgm * cols + c] = r;
                        }
                    }
                }
                out.mapv_inplace(|v| if v == f64::NEG_INFINITY { 0.0 } else { v });
            }
        }
        self.push(out, Op::Segment { x, segment, kind, argmax })
    }

    /// Multiplies row `r` by `factors[r]`.
    pub fn scale_rows(&mut self, x: Var, factors: Rc<[f64]>) -> Var {
        let mut v = self.value(x).clone();
        for (mut row, &f) in v.rows_mut().into_iter().zip(factors.iter()) {
            row *= f;
        }
        self.push(v, Op::ScaleRows(x, factors))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("row counts agree");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("column counts agree");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Var {
        let v = self.value(x).slice(s![.., start..start + width]).to_owned();
        self.push(v, Op::SliceCols(x, start))
    }

    /// Standardizes each column with the statistics of the rows present
    /// (`stats = None`) or with fixed `(mean, var)` per column, then applies
    /// `gamma * xhat + beta`. Returns the output and the batch `(mean, var)`.
    pub fn column_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: Option<(&[f64], &[f64])>,
        eps: f64,
    ) -> (Var, Vec<f64>, Vec<f64>) {
        let xv = self.value(x);
        let rows = xv.nrows().max(1) as f64;
        let (mean, var): (Vec<f64>, Vec<f64>) = match stats {
            Some((m, v)) => (m.to_vec(), v.to_vec()),
            None => {
                let mean: Vec<f64> = xv.columns().into_iter().map(|c| c.sum() / rows).collect();
                let var = xv
                    .columns()
                    .into_iter()
                    .zip(&mean)
                    .map(|(c, &mu)| c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / rows)
                    .collect();
                (mean, var)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = xv.clone();
        for mut row in xhat.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[c]) * inv_std[c];
            }
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        let var_out = var.clone();
        let mean_out = mean;
        let node = self.push(out, Op::ColumnNorm { x, gamma, beta, xhat, inv_std, batch_stats: stats.is_none() });
        (node, mean_out, var_out)
    }

    /// Standardizes each row over its columns, then `gamma * xhat + beta`.
    pub fn row_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let cols = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mu = row.sum() / cols;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / cols;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mu) * is);
            inv_std.push(is);
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        self.push(out, Op::RowNorm { x, gamma, beta, xhat, inv_std })
    }

    /// Row softmax where `allowed` entries compete and the rest get exactly 0.
    pub fn masked_softmax(&mut self, x: Var, allowed: &Array2<bool>) -> Var {
        let v = row_softmax_masked(self.value(x), Some(allowed));
        self.push(v, Op::MaskedSoftmax(x))
    }

    /// Mean cross-entropy of `targets` under a row softmax over allowed
    /// entries. Callers guarantee each target is allowed.
    pub fn masked_nll(&mut self, x: Var, allowed: &Array2<bool>, targets: Rc<[usize]>) -> Var {
        let probs = row_softmax_masked(self.value(x), Some(allowed));
        let rows = targets.len().max(1) as f64;
        let loss: f64 = targets.iter().enumerate().map(|(r, &t)| -probs[[r, t]].ln()).sum::<f64>() / rows;
        self.push(Mat::from_elem((1, 1), loss), Op::MaskedNll { x, targets, probs })
    }

    /// Adjoints of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Mat::ones(self.value(output).raw_dim()));
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, idx: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let node = &self.nodes[idx];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.dot(&val(*b).t()));
                accumulate(grads, *b, val(*a).t().dot(g));
            }
            Op::MatMulT(a, b) => {
                accumulate(grads, *a, g.dot(val(*b)));
                accumulate(grads, *b, g.t().dot(val(*a)));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, unbroadcast(g, val(*b)));
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g * val(*b));
                accumulate(grads, *b, unbroadcast(&(g * val(*a)), val(*b)));
            }
            Op::Scale(a, k) => accumulate(grads, *a, g * *k),
            Op::Relu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                });
                accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= y * (1.0 - y));
                accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                accumulate(grads, *a, d);
            }
            Op::GatherRows(x, index) => {
                let mut d = Mat::zeros(val(*x).raw_dim());
                for (r, &src) in index.iter().enumerate() {
                    let mut row = d.row_mut(src);
                    row += &g.row(r);
                }
                accumulate(grads, *x, d);
            }
            Op::Segment { x, segment, kind, argmax } => {
                let xv = val(*x);
                let mut d = Mat::zeros(xv.raw_dim());
                match kind {
                    Reduce::Sum => {
                        for (r, &sgm) in segment.iter().enumerate() {
                            let mut row = d.row_mut(r);
                            row += &g.row(sgm);
                        }
                    }
                    Reduce::Max => {
                        let cols = xv.ncols();
                        for sgm in 0..g.nrows() {
                            for c in 0..cols {
                                let r = argmax[sgm * cols + c];
                                if r != usize::MAX {
                                    d[[r, c]] += g[[sgm, c]];
                                }
                            }
                        }
                    }
                }
                accumulate(grads, *x, d);
            }
            Op::ScaleRows(x, factors) => {
                let mut d = g.clone();
                for (mut row, &f) in d.rows_mut().into_iter().zip(factors.iter()) {
                    row *= f;
                }
                accumulate(grads, *x, d);
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for &p in parts {
                    let w = val(p).ncols();
                    accumulate(grads, p, g.slice(s![.., at..at + w]).to_owned());
                    at += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut at = 0;
                for &p in parts {
                    let h = val(p).nrows();
                    accumulate(grads, p, g.slice(s![at..at + h, ..]).to_owned());
                    at += h;
                }
            }
            Op::SliceCols(x, start) => {
                let mut d = Mat::zeros(val(*x).raw_dim());
                d.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                accumulate(grads, *x, d);
            }
            Op::ColumnNorm { x, gamma, beta, xhat, inv_std, batch_stats } => {
                let gam = val(*gamma);
                accumulate(grads, *gamma, (g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                accumulate(grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                let dxhat = g * gam;
                let mut dx = dxhat.clone();
                if *batch_stats {
                    let n = xhat.nrows() as f64;
                    let sum_d = dxhat.sum_axis(Axis(0));
                    let sum_dx = (&dxhat * xhat).sum_axis(Axis(0));
                    for (r, mut row) in dx.rows_mut().into_iter().enumerate() {
                        for (c, v) in row.iter_mut().enumerate() {
                            *v = inv_std[c] / n * (n * dxhat[[r, c]] - sum_d[c] - xhat[[r, c]] * sum_dx[c]);
                        }
                    }
                } else {
                    for mut row in dx.rows_mut() {
                        for (c, v) in row.iter_mut().enumerate() {
                            *v *= inv_std[c];
                        }
                    }
                }
                accumulate(grads, *x, dx);
            }
            Op::RowNorm { x, gamma, beta, xhat, inv_std } => {
                let gam = val(*gamma);
                accumulate(grads, *gamma, (g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                accumulate(grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                let dxhat = g * gam;
                let n = xhat.ncols() as f64;
                let mut dx = dxhat.clone();
                for (r, mut row) in dx.rows_mut().into_iter().enumerate() {
                    let d = dxhat.row(r);
                    let xh = xhat.row(r);
                    let sum_d = d.sum();
                    let sum_dx = d.dot(&xh);
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = inv_std[r] / n * (n * d[c] - sum_d - xh[c] * sum_dx);
                    }
                }
                accumulate(grads, *x, dx);
            }
            Op::MaskedSoftmax(x) => {
                let p = &node.value;
                let mut d = g * p;
                for (r, mut row) in d.rows_mut().into_iter().enumerate() {
                    let dot: f64 = g.row(r).dot(&p.row(r));
                    for (c, v) in row.iter_mut().enumerate() {
                        *v -= p[[r, c]] * dot;
                    }
                }
                accumulate(grads, *x, d);
            }
            Op::MaskedNll { x, targets, probs } => {
                let rows = targets.len().max(1) as f64;
                let k = g[[0, 0]] / rows;
                let mut d = probs * k;
                for (r, &t) in targets.iter().enumerate() {
                    d[[r, t]] -= k;
                }
                accumulate(grads, *x, d);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, d: Mat) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &d,
        slot @ None => *slot = Some(d),
    }
}

/// Sums a gradient over broadcast rows when the operand was a single row.
fn unbroadcast(g: &Mat, operand: &Mat) -> Mat {
    if operand.nrows() == 1 && g.nrows() != 1 {
        g.sum_axis(Axis(0)).insert_axis(Axis(0))
    } else {
        g.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central differences of `f` with respect to every entry of `inputs[which]`.
    fn numeric_grad(inputs: &[Mat], which: usize, f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> Mat {
        let eps = 1e-6;
        let mut out = Mat::zeros(inputs[which].raw_dim());
        for idx in 0..out.len() {
            let eval = |delta: f64| {
                let mut t = Tape::new();
                let vars: Vec<Var> = inputs
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let mut m = m.clone();
                        if i == which {
                            *m.iter_mut().nth(idx).unwrap() += delta;
                        }
                        t.leaf(m)
                    })
                    .collect();
                let y = f(&mut t, &vars);
                t.value(y)[[0, 0]]
            };
            *out.iter_mut().nth(idx).unwrap() = (eval(eps) - eval(-eps)) / (2.0 * eps);
        }
        out
    }

    fn check(inputs: &[Mat], f: &dyn Fn(&mut Tape, &[Var]) -> Var) {
        let mut t = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|m| t.leaf(m.clone())).collect();
        let y = f(&mut t, &vars);
        let g = t.backward(y);
        for (i, v) in vars.iter().enumerate() {
            let analytic = g.get_or_zeros(*v, &inputs[i]);
            let numeric = numeric_grad(inputs, i, f);
            for (a, n) in analytic.iter().zip(numeric.iter()) {
                assert!((a - n).abs() <= 1e-6 * (1.0 + n.abs()), "input {i}: analytic {a} numeric {n}");
            }
        }
    }

    fn sum_all(t: &mut Tape, x: Var) -> Var {
        let rows = t.value(x).nrows();
        let cols = t.value(x).ncols();
        let ones_r = t.leaf(Mat::ones((1, rows)));
        let ones_c = t.leaf(Mat::ones((cols, 1)));
        let a = t.matmul(ones_r, x);
        t.matmul(a, ones_c)
    }

    fn weighted_sum(t: &mut Tape, x: Var) -> Var {
        let w = t.value(x).mapv(|_| 1.0);
        let w = Mat::from_shape_fn(w.raw_dim(), |(r, c)| 0.3 + 0.7 * ((r * 7 + c * 3) % 5) as f64);
        let w = t.leaf(w);
        let p = t.mul(x, w);
        sum_all(t, p)
    }

    #[test]
    fn matmul_and_transposes() {
        let a = array![[0.3, -1.2, 0.5], [1.1, 0.4, -0.7]];
        let b = array![[0.2, 0.9], [-0.5, 0.1], [0.8, -0.3]];
        check(&[a.clone(), b.clone()], &|t, v| {
            let y = t.matmul(v[0], v[1]);
            weighted_sum(t, y)
        });
        let c = array![[0.6, -0.2, 0.1], [0.3, 0.7, -0.9], [0.05, 0.4, 0.2], [1.0, -1.0, 0.5]];
        check(&[a, c], &|t, v| {
            let y = t.matmul_t(v[0], v[1]);
            weighted_sum(t, y)
        });
    }

    #[test]
    fn elementwise_and_broadcast() {
        let a = array![[0.3, -1.2, 0.5], [1.1, 0.4, -0.7]];
        let r = array![[0.1, -0.6, 0.25]];
        check(&[a.clone(), r.clone()], &|t, v| {
            let s = t.add(v[0], v[1]);
            let m = t.mul(s, v[1]);
            let sg = t.sigmoid(m);
            let th = t.tanh(s);
            let re = t.relu(th);
            let q = t.add(sg, re);
            let q = t.scale(q, 1.7);
            weighted_sum(t, q)
        });
    }

    #[test]
    fn gather_segment_and_concat() {
        let x = array![[0.3, -1.2], [1.1, 0.4], [-0.6, 0.9], [0.2, 0.25]];
        let idx: Rc<[usize]> = vec![2, 0, 2, 3, 1].into();
        let seg: Rc<[usize]> = vec![0, 1, 1, 0, 2].into();
        for kind in [Reduce::Sum, Reduce::Max] {
            let (idx, seg) = (idx.clone(), seg.clone());
            check(&[x.clone()], &move |t, v| {
                let g = t.gather_rows(v[0], idx.clone());
                let r = t.segment_reduce(g, seg.clone(), 4, kind);
                let f: Rc<[f64]> = vec![0.5, 2.0, -1.0, 3.0].into();
                let r = t.scale_rows(r, f);
                let c = t.concat_cols(&[r, v[0]]);
                let c2 = t.concat_rows(&[c, c]);
                let sl = t.slice_cols(c2, 1, 2);
                weighted_sum(t, sl)
            });
        }
    }

    #[test]
    fn normalizations() {
        let x = array![[0.3, -1.2, 0.5], [1.1, 0.4, -0.7], [0.0, 0.9, 0.2], [-0.4, 0.1, 1.3]];
        let gamma = array![[1.2, 0.7, -0.4]];
        let beta = array![[0.1, -0.2, 0.3]];
        check(&[x.clone(), gamma.clone(), beta.clone()], &|t, v| {
            let (y, _, _) = t.column_norm(v[0], v[1], v[2], None, 1e-5);
            weighted_sum(t, y)
        });
        check(&[x.clone(), gamma.clone(), beta.clone()], &|t, v| {
            let (y, _, _) = t.column_norm(v[0], v[1], v[2], Some((&[0.1, 0.2, 0.3], &[1.0, 0.5, 2.0])), 1e-5);
            weighted_sum(t, y)
        });
        check(&[x, gamma, beta], &|t, v| {
            let y = t.row_norm(v[0], v[1], v[2], 1e-5);
            weighted_sum(t, y)
        });
    }

    #[test]
    fn softmax_and_nll() {
        let x = array![[0.3, -1.2, 0.5, 2.0], [1.1, 0.4, -0.7, 0.0]];
        let allowed = array![[true, false, true, true], [true, true, true, false]];
        let a2 = allowed.clone();
        check(&[x.clone()], &move |t, v| {
            let p = t.masked_softmax(v[0], &a2);
            weighted_sum(t, p)
        });
        check(&[x], &move |t, v| t.masked_nll(v[0], &allowed, vec![2, 1].into()));
    }

    #[test]
    fn masked_softmax_zeroes_disallowed() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 50.0, -3.0]]);
        let p = t.masked_softmax(x, &array![[true, false, true]]);
        let pv = t.value(p);
        assert_eq!(pv[[0, 1]], 0.0);
        assert!((pv.sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_logits_give_log_k() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::zeros((1, 5)));
        let l = t.masked_nll(x, &array![[true, true, false, true, false]], vec![3].into());
        assert!((t.value(l)[[0, 0]] - 3f64.ln()).abs() < 1e-15);
    }
}
