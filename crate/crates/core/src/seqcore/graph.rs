//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its
//! forward value, and [`Graph::backward`] walks the tape in reverse.
//! Parameters are borrowed from a [`ParamStore`] and never copied onto the
//! tape, so one graph can hold a whole minibatch.

use std::collections::HashMap;

use super::matrix::Matrix;
use super::params::{Gradients, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UnaryKind {
    Sigmoid,
    Tanh,
    Exp,
    Relu,
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Binary { a: Var, b: Var, kind: BinaryKind },
    Affine { a: Var, mul: f64 },
    Unary { a: Var, kind: UnaryKind },
    SoftmaxRows(Var),
    NormalizeRows(Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Matrix },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows { a: Var, start: usize },
    SliceCols { a: Var, start: usize },
    Gather { table: Var, ids: Vec<usize> },
    Reshape(Var),
    PadRows(Var),
    Transpose(Var),
    Sum(Var),
    LayerNorm { a: Var, gain: Var, bias: Var, normed: Matrix, inv_std: Vec<f64> },
    GruGates { g: Var, hw: Var, h: Var, r: Matrix, z: Matrix, n: Matrix },
}

struct Node {
    value: Option<Matrix>,
    op: Op,
}

/// Computation tape bound to one parameter store.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let dim = |x: usize, y: usize| {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

/// Sums `g` (of broadcast shape) back down to `shape`.
fn reduce_to(g: &Matrix, shape: (usize, usize)) -> Matrix {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = Matrix::zeros(shape.0, shape.1);
    let (rows, cols) = g.shape();
    for r in 0..rows {
        let ro = if shape.0 == 1 { 0 } else { r };
        for c in 0..cols {
            let co = if shape.1 == 1 { 0 } else { c };
            let v = out.get(ro, co) + g.get(r, c);
            out.set(ro, co, v);
        }
    }
    out
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.params.value(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    /// The value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.data()[0]
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input or constant. Gradients are still computed for leaves and can
    /// be read back from [`Grads::wrt`].
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, false)
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, true)
    }

    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let out = Matrix::matmul_t(self.value(a), ta, self.value(b), tb);
        self.push(out, Op::MatMul { a, b, ta, tb })
    }

    fn binary(&mut self, a: Var, b: Var, kind: BinaryKind) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let f = |x: f64, y: f64| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
            BinaryKind::Div => x / y,
        };
        let out = if va.shape() == vb.shape() {
            va.zip_map(vb, f)
        } else {
            let (rows, cols) = broadcast_shape(va.shape(), vb.shape()).unwrap_or_else(|| {
                panic!("cannot broadcast {:?} with {:?}", va.shape(), vb.shape())
            });
            let mut out = Matrix::zeros(rows, cols);
            for r in 0..rows {
                let ra = if va.rows() == 1 { 0 } else { r };
                let rb = if vb.rows() == 1 { 0 } else { r };
                for c in 0..cols {
                    let ca = if va.cols() == 1 { 0 } else { c };
                    let cb = if vb.cols() == 1 { 0 } else { c };
                    out.set(r, c, f(va.get(ra, ca), vb.get(rb, cb)));
                }
            }
            out
        };
        self.push(out, Op::Binary { a, b, kind })
    }

    /// Elementwise sum with 2-D broadcasting of unit dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinaryKind::Div)
    }

    /// `mul * a + add`.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let out = self.value(a).map(|x| mul * x + add);
        self.push(out, Op::Affine { a, mul })
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.affine(a, s, 0.0)
    }

    fn unary(&mut self, a: Var, kind: UnaryKind) -> Var {
        let f = match kind {
            UnaryKind::Sigmoid => sigmoid,
            UnaryKind::Tanh => f64::tanh,
            UnaryKind::Exp => f64::exp,
            UnaryKind::Relu => |x: f64| x.max(0.0),
        };
        let out = self.value(a).map(f);
        self.push(out, Op::Unary { a, kind })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Tanh)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Exp)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, UnaryKind::Relu)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Divides each row by its sum (no exponentiation).
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let s: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        self.push(out, Op::NormalizeRows(a))
    }

    /// Summed token-level cross entropy `-sum_r log softmax(logits_r)[t_r]`
    /// as a `1 x 1` node.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let x = self.value(logits);
        assert_eq!(x.rows(), targets.len(), "one target per logits row");
        let mut probs = x.clone();
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = probs.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shifted = row[t] - max;
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            loss += sum.ln() - shifted;
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.push(
            Matrix::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let vals: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Matrix::concat_cols(&vals);
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let vals: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Matrix::concat_rows(&vals);
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a).slice_rows(start, len);
        self.push(out, Op::SliceRows { a, start })
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a).slice_cols(start, len);
        self.push(out, Op::SliceCols { a, start })
    }

    /// Row lookup: output row `i` is `table[ids[i]]`. Ids must be in range.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut out = Matrix::zeros(ids.len(), t.cols());
        for (i, &id) in ids.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(id));
        }
        self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let out = self.value(a).clone().reshaped(rows, cols);
        self.push(out, Op::Reshape(a))
    }

    /// Appends `extra` zero rows.
    pub fn pad_rows(&mut self, a: Var, extra: usize) -> Var {
        if extra == 0 {
            return a;
        }
        let x = self.value(a);
        let zeros = Matrix::zeros(extra, x.cols());
        let out = Matrix::concat_rows(&[x, &zeros]);
        self.push(out, Op::PadRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Matrix::scalar(s), Op::Sum(a))
    }

    /// Row-wise layer normalization with `1 x d` gain and bias.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        let mut normed = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (o, v) in normed.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
        }
        let (gv, bv) = (self.value(gain), self.value(bias));
        let mut out = normed.clone();
        for r in 0..rows {
            for (c, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = *o * gv.data()[c] + bv.data()[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                a,
                gain,
                bias,
                normed,
                inv_std,
            },
        )
    }

    /// Fused GRU update. `g` holds the input-side pre-activations
    /// `[x W_ir + b_ir + b_hr | x W_iz + b_iz + b_hz | x W_in + b_in + b_hn]`,
    /// `hw` holds `[h W_hr | h W_hz | h W_hn]` and `h` is the previous state.
    pub fn gru_gates(&mut self, g: Var, hw: Var, h: Var) -> Var {
        let (gv, hwv, hv) = (self.value(g), self.value(hw), self.value(h));
        let (rows, d) = hv.shape();
        assert_eq!(gv.shape(), (rows, 3 * d), "gru_gates input width");
        assert_eq!(hwv.shape(), (rows, 3 * d), "gru_gates hidden width");
        let mut r = Matrix::zeros(rows, d);
        let mut z = Matrix::zeros(rows, d);
        let mut n = Matrix::zeros(rows, d);
        let mut out = Matrix::zeros(rows, d);
        for i in 0..rows {
            let (gr, hr) = (gv.row(i), hwv.row(i));
            for j in 0..d {
                let rj = sigmoid(gr[j] + hr[j]);
                let zj = sigmoid(gr[d + j] + hr[d + j]);
                let nj = (gr[2 * d + j] + rj * hr[2 * d + j]).tanh();
                r.set(i, j, rj);
                z.set(i, j, zj);
                n.set(i, j, nj);
                out.set(i, j, (1.0 - zj) * nj + zj * hv.get(i, j));
            }
        }
        self.push(out, Op::GruGates { g, hw, h, r, z, n })
    }

    /// Gradients of every node with respect to the `loss` node, seeded with
    /// ones of its shape.
    pub fn backward(&self, loss: Var) -> Grads {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        let (lr, lc) = self.shape(loss);
        grads[loss.0] = Some(Matrix::filled(lr, lc, 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let out_val = self.value(Var(idx));
            match &node.op {
                Op::Leaf | Op::Param(_) => {
                    grads[idx] = Some(gout);
                    continue;
                }
                Op::MatMul { a, b, ta, tb } => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    // C = op(A) op(B)
                    let ga = if *ta {
                        Matrix::matmul_t(vb, *tb, &gout, true)
                    } else {
                        Matrix::matmul_t(&gout, false, vb, !*tb)
                    };
                    let gb = if *tb {
                        Matrix::matmul_t(&gout, true, va, *ta)
                    } else {
                        Matrix::matmul_t(va, !*ta, &gout, false)
                    };
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Binary { a, b, kind } => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let same = va.shape() == vb.shape();
                    let (ga, gb) = match kind {
                        BinaryKind::Add => (gout.clone(), gout),
                        BinaryKind::Sub => {
                            let neg = gout.map(|x| -x);
                            (gout, neg)
                        }
                        BinaryKind::Mul | BinaryKind::Div => {
                            let (rows, cols) = gout.shape();
                            let mut ga = Matrix::zeros(rows, cols);
                            let mut gb = Matrix::zeros(rows, cols);
                            for r in 0..rows {
                                let ra = if va.rows() == 1 { 0 } else { r };
                                let rb = if vb.rows() == 1 { 0 } else { r };
                                for c in 0..cols {
                                    let ca = if va.cols() == 1 { 0 } else { c };
                                    let cb = if vb.cols() == 1 { 0 } else { c };
                                    let (x, y, g) = (va.get(ra, ca), vb.get(rb, cb), gout.get(r, c));
                                    if *kind == BinaryKind::Mul {
                                        ga.set(r, c, g * y);
                                        gb.set(r, c, g * x);
                                    } else {
                                        ga.set(r, c, g / y);
                                        gb.set(r, c, -g * x / (y * y));
                                    }
                                }
                            }
                            (ga, gb)
                        }
                    };
                    if same {
                        accumulate(&mut grads, *a, ga);
                        accumulate(&mut grads, *b, gb);
                    } else {
                        accumulate(&mut grads, *a, reduce_to(&ga, va.shape()));
                        accumulate(&mut grads, *b, reduce_to(&gb, vb.shape()));
                    }
                }
                Op::Affine { a, mul } => {
                    let m = *mul;
                    accumulate(&mut grads, *a, gout.map(|x| x * m));
                }
                Op::Unary { a, kind } => {
                    let ga = match kind {
                        UnaryKind::Sigmoid => gout.zip_map(out_val, |g, y| g * y * (1.0 - y)),
                        UnaryKind::Tanh => gout.zip_map(out_val, |g, y| g * (1.0 - y * y)),
                        UnaryKind::Exp => gout.zip_map(out_val, |g, y| g * y),
                        UnaryKind::Relu => {
                            gout.zip_map(self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 })
                        }
                    };
                    accumulate(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let mut ga = gout;
                    for r in 0..ga.rows() {
                        let y = out_val.row(r);
                        let dot: f64 = ga.row(r).iter().zip(y).map(|(g, y)| g * y).sum();
                        for (g, y) in ga.row_mut(r).iter_mut().zip(y) {
                            *g = y * (*g - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::NormalizeRows(a) => {
                    let x = self.value(*a);
                    let mut ga = gout;
                    for r in 0..ga.rows() {
                        let xr = x.row(r);
                        let s: f64 = xr.iter().sum();
                        let dot: f64 = ga.row(r).iter().zip(xr).map(|(g, x)| g * x).sum();
                        for g in ga.row_mut(r).iter_mut() {
                            *g = *g / s - dot / (s * s);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let scale = gout.data()[0];
                    let mut ga = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        let row = ga.row_mut(r);
                        row[t] -= 1.0;
                        for v in row.iter_mut() {
                            *v *= scale;
                        }
                    }
                    accumulate(&mut grads, *logits, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        accumulate(&mut grads, p, gout.slice_cols(start, w));
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(p).rows();
                        accumulate(&mut grads, p, gout.slice_rows(start, h));
                        start += h;
                    }
                }
                Op::SliceRows { a, start } => {
                    let (rows, cols) = self.shape(*a);
                    let (start, len) = (*start, gout.rows());
                    add_into(&mut grads, *a, (rows, cols), |acc| {
                        let dst = &mut acc.data_mut()[start * cols..(start + len) * cols];
                        for (d, s) in dst.iter_mut().zip(gout.data()) {
                            *d += s;
                        }
                    });
                }
                Op::SliceCols { a, start } => {
                    let shape = self.shape(*a);
                    let start = *start;
                    add_into(&mut grads, *a, shape, |acc| {
                        for r in 0..gout.rows() {
                            let dst = &mut acc.row_mut(r)[start..start + gout.cols()];
                            for (d, s) in dst.iter_mut().zip(gout.row(r)) {
                                *d += s;
                            }
                        }
                    });
                }
                Op::Gather { table, ids } => {
                    let shape = self.shape(*table);
                    add_into(&mut grads, *table, shape, |acc| {
                        for (i, &id) in ids.iter().enumerate() {
                            for (d, s) in acc.row_mut(id).iter_mut().zip(gout.row(i)) {
                                *d += s;
                            }
                        }
                    });
                }
                Op::Reshape(a) => {
                    let (rows, cols) = self.shape(*a);
                    accumulate(&mut grads, *a, gout.reshaped(rows, cols));
                }
                Op::PadRows(a) => {
                    let rows = self.shape(*a).0;
                    accumulate(&mut grads, *a, gout.slice_rows(0, rows));
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, gout.transpose());
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.shape(*a);
                    accumulate(&mut grads, *a, Matrix::filled(rows, cols, gout.data()[0]));
                }
                Op::LayerNorm {
                    a,
                    gain,
                    bias,
                    normed,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let (rows, cols) = normed.shape();
                    let mut ggain = Matrix::zeros(1, cols);
                    let mut gbias = Matrix::zeros(1, cols);
                    let mut gx = Matrix::zeros(rows, cols);
                    let mut dxhat = vec![0.0; cols];
                    for r in 0..rows {
                        let (go, xh) = (gout.row(r), normed.row(r));
                        for c in 0..cols {
                            ggain.data_mut()[c] += go[c] * xh[c];
                            gbias.data_mut()[c] += go[c];
                            dxhat[c] = go[c] * gv.data()[c];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / cols as f64;
                        let mean_dx =
                            dxhat.iter().zip(xh).map(|(d, x)| d * x).sum::<f64>() / cols as f64;
                        for (c, o) in gx.row_mut(r).iter_mut().enumerate() {
                            *o = inv_std[r] * (dxhat[c] - mean_d - xh[c] * mean_dx);
                        }
                    }
                    accumulate(&mut grads, *a, gx);
                    accumulate(&mut grads, *gain, reduce_to(&ggain, self.shape(*gain)));
                    accumulate(&mut grads, *bias, reduce_to(&gbias, self.shape(*bias)));
                }
                Op::GruGates { g, hw, h, r, z, n } => {
                    let hv = self.value(*h);
                    let hwv = self.value(*hw);
                    let (rows, d) = hv.shape();
                    let mut gg = Matrix::zeros(rows, 3 * d);
                    let mut ghw = Matrix::zeros(rows, 3 * d);
                    let mut gh = Matrix::zeros(rows, d);
                    for i in 0..rows {
                        for j in 0..d {
                            let go = gout.get(i, j);
                            let (rj, zj, nj) = (r.get(i, j), z.get(i, j), n.get(i, j));
                            let hp = hv.get(i, j);
                            gh.set(i, j, go * zj);
                            let dz = go * (hp - nj) * zj * (1.0 - zj);
                            let dn = go * (1.0 - zj) * (1.0 - nj * nj);
                            let dr = dn * hwv.get(i, 2 * d + j) * rj * (1.0 - rj);
                            gg.set(i, j, dr);
                            gg.set(i, d + j, dz);
                            gg.set(i, 2 * d + j, dn);
                            ghw.set(i, j, dr);
                            ghw.set(i, d + j, dz);
                            ghw.set(i, 2 * d + j, dn * rj);
                        }
                    }
                    accumulate(&mut grads, *g, gg);
                    accumulate(&mut grads, *hw, ghw);
                    accumulate(&mut grads, *h, gh);
                }
            }
        }

        let mut param_grads = Gradients::new(self.params.len());
        for (&pid, &var) in &self.param_nodes {
            if let Some(g) = grads[var.0].as_ref() {
                param_grads.accumulate(pid, g);
            }
        }
        Grads {
            nodes: grads,
            params: param_grads,
        }
    }
}

fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let src = x.row(r);
        let mut max = f64::NEG_INFINITY;
        for &v in src {
            if v > max {
                max = v;
            }
        }
        let dst = out.row_mut(r);
        let mut sum = 0.0;
        for (d, &v) in dst.iter_mut().zip(src) {
            *d = (v - max).exp();
            sum += *d;
        }
        let inv = 1.0 / sum;
        for d in dst.iter_mut() {
            *d *= inv;
        }
    }
    out
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn add_into(
    grads: &mut [Option<Matrix>],
    v: Var,
    shape: (usize, usize),
    f: impl FnOnce(&mut Matrix),
) {
    let slot = &mut grads[v.0];
    let acc = slot.get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
    f(acc);
}

/// Result of [`Graph::backward`].
pub struct Grads {
    nodes: Vec<Option<Matrix>>,
    params: Gradients,
}

impl Grads {
    /// Gradient with respect to a leaf or parameter node.
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }

    pub fn params(&self) -> &Gradients {
        &self.params
    }

    pub fn into_params(self) -> Gradients {
        self.params
    }
}
