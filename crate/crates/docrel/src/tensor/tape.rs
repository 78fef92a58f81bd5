//! Reverse-mode automatic differentiation on a linear tape.
//!
//! Every forward op appends one node recording its inputs and whatever the
//! backward rule needs. `backward` walks the tape in reverse exactly once;
//! a tape cannot be replayed without a fresh forward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Array, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Abs(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    MeanRows(Var),
    Softmax(Var),
    // mask entries already carry the 1/(1-rate) survivor scaling
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    AddRow {
        mat: Var,
        row: Var,
    },
    Bce {
        probs: Var,
        targets: Array,
        mask: Array,
    },
    Sum(Var),
    Scale(Var, f64),
    Reshape(Var),
}

struct Node {
    value: Array,
    grad: Option<Array>,
    requires_grad: bool,
    op: Op,
}

/// Linear record of one forward pass.
pub struct Tape {
    nodes: Vec<Node>,
    spent: bool,
    // parameter leaves registered via `param`, in registration order
    param_bindings: Vec<(String, Var)>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            spent: false,
            param_bindings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target wrt `v`, if one was computed.
    pub fn grad(&self, v: Var) -> Option<&Array> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn param_bindings(&self) -> &[(String, Var)] {
        &self.param_bindings
    }

    fn push(&mut self, value: Array, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Array, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, value: Array) -> Var {
        self.leaf(value, false)
    }

    /// Leaf carrying a named parameter; grads for all bindings can be
    /// collected after backward with [`Tape::param_grads`].
    pub fn param(&mut self, name: &str, value: Array) -> Var {
        let v = self.leaf(value, true);
        self.param_bindings.push((name.to_string(), v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.shape.len() != 2 || bv.shape.len() != 2 || av.shape[1] != bv.shape[0] {
            return Err(TensorError::Dimension {
                op: "matmul",
                lhs: av.shape.clone(),
                rhs: bv.shape.clone(),
            });
        }
        let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
        let out = matmul_raw(&av.data, &bv.data, m, k, n);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(
            Array {
                shape: vec![m, n],
                data: out,
            },
            rg,
            Op::MatMul(a, b),
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let av = &self.nodes[a.0].value;
        if av.shape.len() != 2 {
            return Err(TensorError::Rank {
                op: "transpose",
                shape: av.shape.clone(),
            });
        }
        let (m, n) = (av.shape[0], av.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av.data[i * n + j];
            }
        }
        let rg = self.needs(a);
        Ok(self.push(
            Array {
                shape: vec![n, m],
                data: out,
            },
            rg,
            Op::Transpose(a),
        ))
    }

    fn binary_same_shape(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.shape != bv.shape {
            return Err(TensorError::Dimension {
                op: op_name,
                lhs: av.shape.clone(),
                rhs: bv.shape.clone(),
            });
        }
        let data: Vec<f64> = av
            .data
            .iter()
            .zip(&bv.data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = av.shape.clone();
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Array { shape, data }, rg, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let av = &self.nodes[a.0].value;
        let data: Vec<f64> = av.data.iter().map(|&x| f(x)).collect();
        let shape = av.shape.clone();
        let rg = self.needs(a);
        self.push(Array { shape, data }, rg, op)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, f64::abs, Op::Abs(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    /// Concatenate along `axis` (0 = stack rows, 1 = widen rows).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::Argument("concat of an empty list".into()));
        }
        if axis > 1 {
            return Err(TensorError::Argument(format!("concat axis {axis} > 1")));
        }
        let first = &self.nodes[parts[0].0].value;
        let (mut rows, mut cols) = (first.rows(), first.cols());
        for &p in &parts[1..] {
            let v = &self.nodes[p.0].value;
            if axis == 0 {
                if v.cols() != cols {
                    return Err(TensorError::Dimension {
                        op: "concat",
                        lhs: vec![rows, cols],
                        rhs: v.shape.clone(),
                    });
                }
                rows += v.rows();
            } else {
                if v.rows() != rows {
                    return Err(TensorError::Dimension {
                        op: "concat",
                        lhs: vec![rows, cols],
                        rhs: v.shape.clone(),
                    });
                }
                cols += v.cols();
            }
        }
        let mut data = vec![0.0; rows * cols];
        if axis == 0 {
            let mut off = 0;
            for &p in parts {
                let v = &self.nodes[p.0].value;
                data[off..off + v.numel()].copy_from_slice(&v.data);
                off += v.numel();
            }
        } else {
            let mut col_off = 0;
            for &p in parts {
                let v = &self.nodes[p.0].value;
                let c = v.cols();
                for r in 0..rows {
                    data[r * cols + col_off..r * cols + col_off + c].copy_from_slice(v.row(r));
                }
                col_off += c;
            }
        }
        let rg = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Array {
                shape: vec![rows, cols],
                data,
            },
            rg,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
        ))
    }

    /// Mean over rows of an `[n, d]` matrix, producing a `[d]` vector.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let av = &self.nodes[a.0].value;
        if av.shape.len() != 2 {
            return Err(TensorError::Rank {
                op: "mean_rows",
                shape: av.shape.clone(),
            });
        }
        let (n, d) = (av.shape[0], av.shape[1]);
        if n == 0 {
            return Err(TensorError::Argument("mean over zero rows".into()));
        }
        let mut out = vec![0.0; d];
        for r in 0..n {
            for (c, v) in out.iter_mut().enumerate() {
                *v += av.data[r * d + c];
            }
        }
        for v in &mut out {
            *v /= n as f64;
        }
        let rg = self.needs(a);
        Ok(self.push(Array::vector(out), rg, Op::MeanRows(a)))
    }

    /// Numerically stable softmax over all elements (vector or column).
    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let av = &self.nodes[a.0].value;
        if av.numel() == 0 {
            return Err(TensorError::Argument("softmax of empty tensor".into()));
        }
        if av.data.iter().any(|x| x.is_nan()) {
            return Err(TensorError::Numeric("NaN input to softmax".into()));
        }
        let max = av.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = av.data.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let out: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
        let shape = av.shape.clone();
        let rg = self.needs(a);
        Ok(self.push(Array { shape, data: out }, rg, Op::Softmax(a)))
    }

    /// Inverted dropout: zero with probability `rate`, scale survivors by
    /// 1/(1-rate). Identity when not training.
    pub fn dropout(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::Argument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            let v = self.nodes[a.0].value.clone();
            let rg = self.needs(a);
            let n = v.numel();
            return Ok(self.push(
                v,
                rg,
                Op::Dropout {
                    input: a,
                    mask: vec![1.0; n],
                },
            ));
        }
        let keep = 1.0 - rate;
        let av = &self.nodes[a.0].value;
        let mask: Vec<f64> = (0..av.numel())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    0.0
                } else {
                    1.0 / keep
                }
            })
            .collect();
        let data: Vec<f64> = av.data.iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let shape = av.shape.clone();
        let rg = self.needs(a);
        Ok(self.push(Array { shape, data }, rg, Op::Dropout { input: a, mask }))
    }

    /// Row gather from an `[v, d]` table; backward scatter-adds.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let tv = &self.nodes[table.0].value;
        if tv.shape.len() != 2 {
            return Err(TensorError::Rank {
                op: "gather",
                shape: tv.shape.clone(),
            });
        }
        let (v, d) = (tv.shape[0], tv.shape[1]);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(TensorError::Index { id, len: v });
            }
            data.extend_from_slice(tv.row(id));
        }
        let rg = self.needs(table);
        Ok(self.push(
            Array {
                shape: vec![ids.len(), d],
                data,
            },
            rg,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Broadcast-add a `[d]` (or `[1, d]`) row vector to every row of `[n, d]`.
    pub fn add_row(&mut self, mat: Var, row: Var) -> Result<Var, TensorError> {
        let (mv, rv) = (&self.nodes[mat.0].value, &self.nodes[row.0].value);
        if mv.shape.len() != 2 || rv.rows() != 1 || rv.cols() != mv.shape[1] {
            return Err(TensorError::Dimension {
                op: "add_row",
                lhs: mv.shape.clone(),
                rhs: rv.shape.clone(),
            });
        }
        let (n, d) = (mv.shape[0], mv.shape[1]);
        let mut data = mv.data.clone();
        for r in 0..n {
            for c in 0..d {
                data[r * d + c] += rv.data[c];
            }
        }
        let rg = self.needs(mat) || self.needs(row);
        Ok(self.push(
            Array {
                shape: vec![n, d],
                data,
            },
            rg,
            Op::AddRow { mat, row },
        ))
    }

    /// Masked mean binary cross entropy over probabilities.
    ///
    /// Probabilities are clamped to [1e-12, 1-1e-12] before the logs; the
    /// result is normalized by the number of mask-selected entries.
    pub fn bce_loss(
        &mut self,
        probs: Var,
        targets: &Array,
        mask: &Array,
    ) -> Result<Var, TensorError> {
        let pv = &self.nodes[probs.0].value;
        if pv.shape != targets.shape || pv.shape != mask.shape {
            return Err(TensorError::Dimension {
                op: "bce_loss",
                lhs: pv.shape.clone(),
                rhs: targets.shape.clone(),
            });
        }
        let count: f64 = mask.data.iter().sum();
        if count == 0.0 {
            return Err(TensorError::Argument("bce_loss with empty mask".into()));
        }
        let mut loss = 0.0;
        for i in 0..pv.numel() {
            if mask.data[i] == 0.0 {
                continue;
            }
            let p = pv.data[i].clamp(BCE_EPS, 1.0 - BCE_EPS);
            let t = targets.data[i];
            loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        }
        loss /= count;
        let rg = self.needs(probs);
        Ok(self.push(
            Array::scalar(loss),
            rg,
            Op::Bce {
                probs,
                targets: targets.clone(),
                mask: mask.clone(),
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].value.data.iter().sum();
        let rg = self.needs(a);
        self.push(Array::scalar(s), rg, Op::Sum(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |x| x * k, Op::Scale(a, k))
    }

    /// Reinterpret the data under a new shape with the same element count.
    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let av = &self.nodes[a.0].value;
        let expect: usize = shape.iter().product();
        if expect != av.numel() {
            return Err(TensorError::ShapeData {
                shape,
                len: av.numel(),
            });
        }
        let data = av.data.clone();
        let rg = self.needs(a);
        Ok(self.push(Array { shape, data }, rg, Op::Reshape(a)))
    }

    /// Reverse sweep from a scalar loss. Populates grads of every
    /// `requires_grad` node that the loss depends on. A tape can run
    /// backward only once.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.spent {
            return Err(TensorError::TapeReused);
        }
        if self.nodes.is_empty() {
            return Err(TensorError::Argument("backward on an empty tape".into()));
        }
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(TensorError::Argument(format!(
                "backward target must be scalar, got shape {:?}",
                self.nodes[loss.0].value.shape
            )));
        }
        self.spent = true;
        let shape = self.nodes[loss.0].value.shape.clone();
        self.nodes[loss.0].grad = Some(Array {
            shape,
            data: vec![1.0],
        });
        for i in (0..=loss.0).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            self.backprop_node(i)?;
        }
        Ok(())
    }

    /// Grads of all named parameter leaves, in registration order.
    pub fn param_grads(&self) -> Vec<(String, Array)> {
        self.param_bindings
            .iter()
            .map(|(name, v)| {
                let g = self.nodes[v.0]
                    .grad
                    .clone()
                    .unwrap_or_else(|| Array::zeros(self.nodes[v.0].value.shape.clone()));
                (name.clone(), g)
            })
            .collect()
    }

    fn accum(&mut self, v: Var, delta: &[f64]) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let shape = self.nodes[v.0].value.shape.clone();
        let g = self.nodes[v.0]
            .grad
            .get_or_insert_with(|| Array::zeros(shape));
        for (gi, di) in g.data.iter_mut().zip(delta) {
            *gi += di;
        }
    }

    fn backprop_node(&mut self, i: usize) -> Result<(), TensorError> {
        let out_grad = self.nodes[i].grad.as_ref().unwrap().data.clone();
        // take the op out so accum can borrow the tape mutably; the tape is
        // spent after backward, so the node never needs its op again
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.nodes[a.0].value.clone();
                let bv = self.nodes[b.0].value.clone();
                let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
                if self.nodes[a.0].requires_grad {
                    // dA = dC · Bᵀ
                    let mut da = vec![0.0; m * k];
                    for r in 0..m {
                        for c in 0..n {
                            let g = out_grad[r * n + c];
                            if g == 0.0 {
                                continue;
                            }
                            for j in 0..k {
                                da[r * k + j] += g * bv.data[j * n + c];
                            }
                        }
                    }
                    self.accum(a, &da);
                }
                if self.nodes[b.0].requires_grad {
                    // dB = Aᵀ · dC
                    let mut db = vec![0.0; k * n];
                    for r in 0..m {
                        for j in 0..k {
                            let x = av.data[r * k + j];
                            if x == 0.0 {
                                continue;
                            }
                            for c in 0..n {
                                db[j * n + c] += x * out_grad[r * n + c];
                            }
                        }
                    }
                    self.accum(b, &db);
                }
            }
            Op::Transpose(a) => {
                let out_shape = self.nodes[i].value.shape.clone();
                let (n, m) = (out_shape[0], out_shape[1]);
                let mut da = vec![0.0; m * n];
                for r in 0..n {
                    for c in 0..m {
                        da[c * n + r] = out_grad[r * m + c];
                    }
                }
                self.accum(a, &da);
            }
            Op::Add(a, b) => {
                self.accum(a, &out_grad);
                self.accum(b, &out_grad);
            }
            Op::Sub(a, b) => {
                self.accum(a, &out_grad);
                let neg: Vec<f64> = out_grad.iter().map(|g| -g).collect();
                self.accum(b, &neg);
            }
            Op::Mul(a, b) => {
                let av = self.nodes[a.0].value.data.clone();
                let bv = self.nodes[b.0].value.data.clone();
                let da: Vec<f64> = out_grad.iter().zip(&bv).map(|(g, y)| g * y).collect();
                let db: Vec<f64> = out_grad.iter().zip(&av).map(|(g, x)| g * x).collect();
                self.accum(a, &da);
                self.accum(b, &db);
            }
            Op::Abs(a) => {
                let av = self.nodes[a.0].value.data.clone();
                // d|x|/dx at 0 fixed to 0
                let da: Vec<f64> = out_grad
                    .iter()
                    .zip(&av)
                    .map(|(g, &x)| {
                        g * if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.accum(a, &da);
            }
            Op::Relu(a) => {
                let av = self.nodes[a.0].value.data.clone();
                // relu'(0) fixed to 0
                let da: Vec<f64> = out_grad
                    .iter()
                    .zip(&av)
                    .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accum(a, &da);
            }
            Op::Tanh(a) => {
                let yv = self.nodes[i].value.data.clone();
                let da: Vec<f64> = out_grad
                    .iter()
                    .zip(&yv)
                    .map(|(g, &y)| g * (1.0 - y * y))
                    .collect();
                self.accum(a, &da);
            }
            Op::Sigmoid(a) => {
                let yv = self.nodes[i].value.data.clone();
                let da: Vec<f64> = out_grad
                    .iter()
                    .zip(&yv)
                    .map(|(g, &y)| g * y * (1.0 - y))
                    .collect();
                self.accum(a, &da);
            }
            Op::Concat { parts, axis } => {
                let out_shape = self.nodes[i].value.shape.clone();
                let cols = out_shape[1];
                if axis == 0 {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.numel();
                        let slice = out_grad[off..off + n].to_vec();
                        self.accum(p, &slice);
                        off += n;
                    }
                } else {
                    let rows = out_shape[0];
                    let mut col_off = 0;
                    for p in parts {
                        let c = self.nodes[p.0].value.cols();
                        let mut slice = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            slice.extend_from_slice(
                                &out_grad[r * cols + col_off..r * cols + col_off + c],
                            );
                        }
                        self.accum(p, &slice);
                        col_off += c;
                    }
                }
            }
            Op::MeanRows(a) => {
                let in_shape = self.nodes[a.0].value.shape.clone();
                let (n, d) = (in_shape[0], in_shape[1]);
                let mut da = vec![0.0; n * d];
                for r in 0..n {
                    for c in 0..d {
                        da[r * d + c] = out_grad[c] / n as f64;
                    }
                }
                self.accum(a, &da);
            }
            Op::Softmax(a) => {
                let yv = self.nodes[i].value.data.clone();
                let dot: f64 = out_grad.iter().zip(&yv).map(|(g, y)| g * y).sum();
                let da: Vec<f64> = out_grad
                    .iter()
                    .zip(&yv)
                    .map(|(g, &y)| y * (g - dot))
                    .collect();
                self.accum(a, &da);
            }
            Op::Dropout { input, mask } => {
                let da: Vec<f64> = out_grad.iter().zip(&mask).map(|(g, m)| g * m).collect();
                self.accum(input, &da);
            }
            Op::Gather { table, ids } => {
                let t_shape = self.nodes[table.0].value.shape.clone();
                let d = t_shape[1];
                let mut dt = vec![0.0; t_shape[0] * d];
                for (row, &id) in ids.iter().enumerate() {
                    for c in 0..d {
                        dt[id * d + c] += out_grad[row * d + c];
                    }
                }
                self.accum(table, &dt);
            }
            Op::AddRow { mat, row } => {
                let m_shape = self.nodes[mat.0].value.shape.clone();
                let (n, d) = (m_shape[0], m_shape[1]);
                self.accum(mat, &out_grad);
                let mut dr = vec![0.0; d];
                for r in 0..n {
                    for c in 0..d {
                        dr[c] += out_grad[r * d + c];
                    }
                }
                self.accum(row, &dr);
            }
            Op::Bce {
                probs,
                targets,
                mask,
            } => {
                let pv = self.nodes[probs.0].value.data.clone();
                let count: f64 = mask.data.iter().sum();
                let g0 = out_grad[0];
                let dp: Vec<f64> = pv
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| {
                        if mask.data[j] == 0.0 {
                            return 0.0;
                        }
                        let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                        if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
                            // clamp is flat outside its range
                            return 0.0;
                        }
                        let t = targets.data[j];
                        g0 * (-t / pc + (1.0 - t) / (1.0 - pc)) / count
                    })
                    .collect();
                self.accum(probs, &dp);
            }
            Op::Sum(a) => {
                let n = self.nodes[a.0].value.numel();
                let da = vec![out_grad[0]; n];
                self.accum(a, &da);
            }
            Op::Scale(a, k) => {
                let da: Vec<f64> = out_grad.iter().map(|g| g * k).collect();
                self.accum(a, &da);
            }
            Op::Reshape(a) => {
                self.accum(a, &out_grad);
            }
        }
        Ok(())
    }
}

const BCE_EPS: f64 = 1e-12;

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += x * brow[j];
            }
        }
    }
    out
}
