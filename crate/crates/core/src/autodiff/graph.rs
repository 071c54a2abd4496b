use std::borrow::Cow;

use rand::Rng as _;

use super::tensor::{matmul, matmul_nt, matmul_tn};
use super::{AutodiffError, ParamId, ParamStore, Tensor};
use crate::Rng;

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    MaskMul(Var, Tensor),
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Log(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    LogSumExpCols(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    tracked: bool,
}

/// Records a forward computation so that [`Graph::backward`] can replay it in reverse.
///
/// Values are either owned or borrowed from model parameter stores, so a graph
/// built over frozen models holds no copies of their weights. The same
/// parameter may be bound any number of times; its gradients are summed.
#[derive(Debug, Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients produced by one backward pass: per-parameter sums and the
/// gradients of tracked leaves (inputs created with [`Graph::input`]).
#[derive(Debug)]
pub struct Gradients {
    params: Vec<(ParamId, Tensor)>,
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.params.iter().map(|(id, t)| (*id, t))
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, t)| t)
    }

    /// Gradient of a tracked leaf. Interior nodes are not retained.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.leaves.get(v.0).and_then(Option::as_ref)
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::Shape { op, detail: format!("{:?} vs {:?}", a.shape(), b.shape()) }
}

fn accum(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn broadcast_row(row: &Tensor, rows: usize) -> impl Iterator<Item = &[f64]> {
    std::iter::repeat_n(row.data(), rows)
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, op_name: &'static str) -> Result<Var, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: op_name });
        }
        let tracked = self.inputs_tracked(&op);
        self.nodes.push(Node { value: Cow::Owned(value), op, tracked });
        Ok(Var(self.nodes.len() - 1))
    }

    fn inputs_tracked(&self, op: &Op) -> bool {
        let t = |v: &Var| self.nodes[v.0].tracked;
        match op {
            Op::Leaf | Op::Param(_) => unreachable!("leaves set tracking explicitly"),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MulRow(a, b) => {
                t(a) || t(b)
            }
            Op::ConcatCols(vs) => vs.iter().any(t),
            Op::MaskMul(a, _)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Square(a)
            | Op::Clamp(a, ..)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumCols(a)
            | Op::LogSumExpCols(a)
            | Op::SliceCols(a, _) => t(a),
        }
    }

    fn leaf(&mut self, value: Cow<'a, Tensor>, op: Op, tracked: bool) -> Result<Var, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: "leaf" });
        }
        self.nodes.push(Node { value, op, tracked });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Leaf whose gradient is retained (see [`Gradients::wrt`]).
    pub fn input(&mut self, value: Tensor) -> Result<Var, AutodiffError> {
        self.leaf(Cow::Owned(value), Op::Leaf, true)
    }

    /// Leaf that takes no part in differentiation.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, AutodiffError> {
        self.leaf(Cow::Owned(value), Op::Leaf, false)
    }

    pub fn constant_ref(&mut self, value: &'a Tensor) -> Result<Var, AutodiffError> {
        self.leaf(Cow::Borrowed(value), Op::Leaf, false)
    }

    /// Binds a parameter. Trainable bindings report gradients under `id`;
    /// frozen bindings behave like constants but still pass gradients to
    /// whatever they are combined with.
    pub fn param(&mut self, store: &'a ParamStore, id: ParamId, trainable: bool) -> Result<Var, AutodiffError> {
        let value = Cow::Borrowed(store.value(id));
        if trainable {
            self.leaf(value, Op::Param(id), true)
        } else {
            self.leaf(value, Op::Leaf, false)
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let out = matmul(ta, tb);
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        Ok(())
    }

    fn row_compatible(&self, op: &'static str, a: Var, row: Var) -> Result<(), AutodiffError> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(shape_err(op, ta, tr));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b), "add")
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        self.row_compatible("add_row", a, row)?;
        let ta = self.value(a);
        let tr = self.value(row);
        let mut data = Vec::with_capacity(ta.len());
        for (r, b) in ta.row_iter().zip(broadcast_row(tr, ta.rows())) {
            data.extend(r.iter().zip(b).map(|(x, y)| x + y));
        }
        let out = Tensor::new(ta.rows(), ta.cols(), data)?;
        self.push(out, Op::AddRow(a, row), "add_row")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b), "mul")
    }

    /// Multiplies every row of `a` elementwise by a `1 x cols` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        self.row_compatible("mul_row", a, row)?;
        let ta = self.value(a);
        let tr = self.value(row);
        let mut data = Vec::with_capacity(ta.len());
        for (r, b) in ta.row_iter().zip(broadcast_row(tr, ta.rows())) {
            data.extend(r.iter().zip(b).map(|(x, y)| x * y));
        }
        let out = Tensor::new(ta.rows(), ta.cols(), data)?;
        self.push(out, Op::MulRow(a, row), "mul_row")
    }

    /// Elementwise product with a constant. A `1 x cols` mask is broadcast over rows.
    pub fn mask(&mut self, a: Var, mask: Tensor) -> Result<Var, AutodiffError> {
        let ta = self.value(a);
        let full = if mask.shape() == ta.shape() {
            mask
        } else if mask.rows() == 1 && mask.cols() == ta.cols() {
            let mut data = Vec::with_capacity(ta.len());
            for _ in 0..ta.rows() {
                data.extend_from_slice(mask.data());
            }
            Tensor::new(ta.rows(), ta.cols(), data)?
        } else {
            return Err(shape_err("mask", ta, &mask));
        };
        let out = ta.zip_map(&full, |x, m| x * m);
        self.push(out, Op::MaskMul(a, full), "mask")
    }

    /// Inverted dropout: zeroes each entry with probability `p` and rescales the
    /// survivors by `1 / (1 - p)`. Without an RNG (evaluation mode) it is the identity.
    pub fn dropout(&mut self, a: Var, p: f64, rng: Option<&mut Rng>) -> Result<Var, AutodiffError> {
        let Some(rng) = rng else { return Ok(a) };
        if p <= 0.0 {
            return Ok(a);
        }
        let [r, c] = self.value(a).shape();
        let keep = 1.0 / (1.0 - p);
        let data = (0..r * c).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        self.mask(a, Tensor::new(r, c, data)?)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(|x| x * c);
        self.push(out, Op::Scale(a, c), "scale")
    }

    pub fn neg(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::AddScalar(a), "add_scalar")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a), "exp")
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a), "log")
    }

    /// `max(x, 0)`; also serves as the hinge.
    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), "relu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a), "tanh")
    }

    pub fn square(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a), "square")
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(out, Op::Clamp(a, lo, hi), "clamp")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(AutodiffError::Shape { op: "mean", detail: "empty tensor".into() });
        }
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(out, Op::Mean(a), "mean")
    }

    /// Per-row sum: `n x k -> n x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let data = t.row_iter().map(|r| r.iter().sum()).collect();
        let out = Tensor::new(t.rows(), 1, data)?;
        self.push(out, Op::SumCols(a), "sum_cols")
    }

    /// Per-row log-sum-exp: `n x k -> n x 1`, computed with the max shift.
    pub fn logsumexp_cols(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let data = t.row_iter().map(logsumexp).collect();
        let out = Tensor::new(t.rows(), 1, data)?;
        self.push(out, Op::LogSumExpCols(a), "logsumexp_cols")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let Some(first) = parts.first() else {
            return Err(AutodiffError::Shape { op: "concat_cols", detail: "no inputs".into() });
        };
        let rows = self.value(*first).rows();
        if let Some(bad) = parts.iter().find(|v| self.value(**v).rows() != rows) {
            return Err(shape_err("concat_cols", self.value(*first), self.value(*bad)));
        }
        let cols: usize = parts.iter().map(|v| self.value(*v).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for v in parts {
                data.extend_from_slice(self.value(*v).row_slice(r));
            }
        }
        let out = Tensor::new(rows, cols, data)?;
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    /// Columns `[start, end)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if start > end || end > t.cols() {
            return Err(AutodiffError::Shape {
                op: "slice_cols",
                detail: format!("[{start}, {end}) of {:?}", t.shape()),
            });
        }
        let out = t.slice_cols(start, end);
        self.push(out, Op::SliceCols(a, start), "slice_cols")
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, out: Var) -> Result<Gradients, AutodiffError> {
        let root = self.value(out);
        if root.shape() != [1, 1] {
            return Err(AutodiffError::NonScalarOutput { rows: root.rows(), cols: root.cols() });
        }
        let n = out.0 + 1;
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        let mut leaves: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        let mut params: Vec<(ParamId, Tensor)> = Vec::new();
        grads[out.0] = Some(Tensor::scalar(1.0));

        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let val = &*node.value;
            let tracked = |v: &Var| self.nodes[v.0].tracked;
            let input = |v: &Var| &*self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => leaves[i] = Some(g),
                Op::Param(id) => match params.iter_mut().find(|(p, _)| p == id) {
                    Some((_, acc)) => acc.add_assign(&g),
                    None => params.push((*id, g)),
                },
                Op::MatMul(a, b) => {
                    if tracked(a) {
                        accum(&mut grads, *a, matmul_nt(&g, input(b)));
                    }
                    if tracked(b) {
                        accum(&mut grads, *b, matmul_tn(input(a), &g));
                    }
                }
                Op::Add(a, b) => {
                    if tracked(a) {
                        accum(&mut grads, *a, g.clone());
                    }
                    if tracked(b) {
                        accum(&mut grads, *b, g);
                    }
                }
                Op::AddRow(a, row) => {
                    if tracked(row) {
                        accum(&mut grads, *row, g.sum_rows());
                    }
                    if tracked(a) {
                        accum(&mut grads, *a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if tracked(b) {
                        accum(&mut grads, *b, g.map(|x| -x));
                    }
                    if tracked(a) {
                        accum(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if tracked(a) {
                        accum(&mut grads, *a, g.zip_map(input(b), |x, y| x * y));
                    }
                    if tracked(b) {
                        accum(&mut grads, *b, g.zip_map(input(a), |x, y| x * y));
                    }
                }
                Op::MulRow(a, row) => {
                    let (ta, tr) = (input(a), input(row));
                    if tracked(row) {
                        accum(&mut grads, *row, g.zip_map(ta, |x, y| x * y).sum_rows());
                    }
                    if tracked(a) {
                        let mut data = Vec::with_capacity(g.len());
                        for (gr, b) in g.row_iter().zip(broadcast_row(tr, g.rows())) {
                            data.extend(gr.iter().zip(b).map(|(x, y)| x * y));
                        }
                        accum(&mut grads, *a, Tensor::new(g.rows(), g.cols(), data)?);
                    }
                }
                Op::MaskMul(a, m) => accum(&mut grads, *a, g.zip_map(m, |x, y| x * y)),
                Op::Scale(a, c) => accum(&mut grads, *a, g.map(|x| x * c)),
                Op::AddScalar(a) => accum(&mut grads, *a, g),
                Op::Exp(a) => accum(&mut grads, *a, g.zip_map(val, |x, y| x * y)),
                Op::Log(a) => accum(&mut grads, *a, g.zip_map(input(a), |x, y| x / y)),
                Op::Relu(a) => {
                    accum(&mut grads, *a, g.zip_map(input(a), |x, y| if y > 0.0 { x } else { 0.0 }))
                }
                Op::Sigmoid(a) => accum(&mut grads, *a, g.zip_map(val, |x, s| x * s * (1.0 - s))),
                Op::Tanh(a) => accum(&mut grads, *a, g.zip_map(val, |x, t| x * (1.0 - t * t))),
                Op::Square(a) => accum(&mut grads, *a, g.zip_map(input(a), |x, y| 2.0 * x * y)),
                Op::Clamp(a, lo, hi) => accum(
                    &mut grads,
                    *a,
                    g.zip_map(input(a), |x, y| if y > *lo && y < *hi { x } else { 0.0 }),
                ),
                Op::Sum(a) => {
                    let t = input(a);
                    accum(&mut grads, *a, Tensor::filled(t.rows(), t.cols(), g.item()));
                }
                Op::Mean(a) => {
                    let t = input(a);
                    accum(&mut grads, *a, Tensor::filled(t.rows(), t.cols(), g.item() / t.len() as f64));
                }
                Op::SumCols(a) => {
                    let t = input(a);
                    let mut data = Vec::with_capacity(t.len());
                    for &gv in g.data() {
                        data.extend(std::iter::repeat_n(gv, t.cols()));
                    }
                    accum(&mut grads, *a, Tensor::new(t.rows(), t.cols(), data)?);
                }
                Op::LogSumExpCols(a) => {
                    let t = input(a);
                    let mut data = Vec::with_capacity(t.len());
                    for ((row, &lse), &gv) in t.row_iter().zip(val.data()).zip(g.data()) {
                        data.extend(row.iter().map(|&x| gv * (x - lse).exp()));
                    }
                    accum(&mut grads, *a, Tensor::new(t.rows(), t.cols(), data)?);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for v in parts {
                        let w = input(v).cols();
                        if tracked(v) {
                            accum(&mut grads, *v, g.slice_cols(start, start + w));
                        }
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let t = input(a);
                    let mut full = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..g.rows() {
                        for (c, &gv) in g.row_slice(r).iter().enumerate() {
                            full.set(r, start + c, gv);
                        }
                    }
                    accum(&mut grads, *a, full);
                }
            }
        }
        Ok(Gradients { params, leaves })
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

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn scalar_graph(x: f64, f: impl Fn(&mut Graph, Var) -> Result<Var, AutodiffError>) -> (f64, f64) {
        let mut g = Graph::new();
        let v = g.input(Tensor::scalar(x)).unwrap();
        let y = f(&mut g, v).unwrap();
        let grads = g.backward(y).unwrap();
        (g.value(y).item(), grads.wrt(v).unwrap().item())
    }

    #[test]
    fn relu_sigmoid_values() {
        let mut g = Graph::new();
        let v = g.input(Tensor::row(&[-1.0, 0.0, 2.0])).unwrap();
        let r = g.relu(v).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = g.input(Tensor::scalar(0.0)).unwrap();
        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.value(s).item(), 0.5);
    }

    #[test]
    fn square_gradient() {
        let (y, dy) = scalar_graph(3.0, |g, x| g.square(x));
        assert_eq!(y, 9.0);
        assert_eq!(dy, 6.0);
    }

    #[test]
    fn log_sigmoid_gradient_at_zero() {
        let (_, dy) = scalar_graph(0.0, |g, x| {
            let s = g.sigmoid(x)?;
            g.log(s)
        });
        assert!((dy - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reused_node_accumulates() {
        // f(x) = x * x + x  =>  f'(3) = 7
        let (_, dy) = scalar_graph(3.0, |g, x| {
            let sq = g.mul(x, x)?;
            g.add(sq, x)
        });
        assert_eq!(dy, 7.0);
    }

    #[test]
    fn parameter_bound_twice_sums_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(2.0));
        let mut g = Graph::new();
        let a = g.param(&store, w, true).unwrap();
        let b = g.param(&store, w, true).unwrap();
        let y = g.mul(a, b).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.param(w).unwrap().item(), 4.0);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let v = g.input(Tensor::row(&[1.0, 2.0])).unwrap();
        assert!(matches!(g.backward(v), Err(AutodiffError::NonScalarOutput { .. })));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(2, 3)).unwrap();
        let b = g.input(Tensor::zeros(2, 3)).unwrap();
        let err = g.matmul(a, b).unwrap_err();
        assert!(err.to_string().contains("matmul"), "{err}");
        assert!(err.to_string().contains("[2, 3]"), "{err}");
    }

    #[test]
    fn log_of_zero_is_an_error() {
        let mut g = Graph::new();
        let a = g.input(Tensor::scalar(0.0)).unwrap();
        assert!(matches!(g.log(a), Err(AutodiffError::NonFinite { op: "log" })));
    }

    #[test]
    fn dropout_without_rng_is_identity() {
        let mut g = Graph::new();
        let a = g.input(Tensor::row(&[1.0, 2.0, 3.0])).unwrap();
        let d = g.dropout(a, 0.5, None).unwrap();
        assert_eq!(a, d);
    }

    #[test]
    fn dropout_keeps_expectation() {
        let mut rng = Rng::seed_from_u64(7);
        let mut g = Graph::new();
        let a = g.input(Tensor::filled(200, 50, 1.0)).unwrap();
        let d = g.dropout(a, 0.5, Some(&mut rng)).unwrap();
        let t = g.value(d);
        assert!(t.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let mean = t.sum() / t.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn logsumexp_is_shift_stable() {
        let v = logsumexp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
