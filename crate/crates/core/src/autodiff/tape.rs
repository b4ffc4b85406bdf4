//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! Every primitive appends a node holding its forward value and enough
//! information to run its backward rule. Nodes are only ever appended, so the
//! tape is topologically ordered by construction and [`Tape::backward`] is a
//! single reverse sweep.

use super::matrix::{dot, shape_err, Matrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// Rows gathered from an external embedding table.
    Gather(Vec<usize>),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    ConcatRows(Vec<Var>),
    SliceRows {
        src: Var,
        start: usize,
    },
    Relu(Var),
    /// Probabilities are stored as the node value; the mask is only needed forward.
    MaskedSoftmaxRows(Var),
    MeanSq(Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// Row ids of an embedding lookup node.
    pub fn gather_ids(&self, v: Var) -> Option<&[usize]> {
        match &self.nodes[v.0].op {
            Op::Gather(ids) => Some(ids),
            _ => None,
        }
    }

    /// Drops every node recorded after the first `len`. Vars at or beyond
    /// `len` become dangling.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Constants are leaves whose gradient nobody reads.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value)
    }

    /// Looks up `ids` in `table`. The result is a leaf; after `backward`, use
    /// [`Gradients::scatter_add`] to fold its gradient back into table rows.
    pub fn embedding_lookup(&mut self, table: &Matrix, ids: &[usize]) -> Result<Var> {
        let value = table.gather_rows(ids).map_err(|_| Error::Shape {
            op: "embedding_lookup",
            detail: format!(
                "ids {:?} exceed table of {} rows",
                ids.iter().max(),
                table.rows()
            ),
        })?;
        Ok(self.push(value, Op::Gather(ids.to_vec())))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_t(self.value(b))?;
        Ok(self.push(value, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).scale(k);
        self.push(value, Op::Scale(a, k))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Shape {
                op: "concat_rows",
                detail: "no inputs".into(),
            });
        };
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            if m.cols() != cols {
                return Err(shape_err("concat_rows", self.value(first), m));
            }
            rows += m.rows();
            data.extend_from_slice(m.data());
        }
        let value = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let m = self.value(src);
        if start + len > m.rows() || len == 0 {
            return Err(Error::Shape {
                op: "slice_rows",
                detail: format!("rows {start}..{} of {}x{}", start + len, m.rows(), m.cols()),
            });
        }
        let cols = m.cols();
        let value = Matrix::from_vec(len, cols, m.data()[start * cols..(start + len) * cols].to_vec())?;
        Ok(self.push(value, Op::SliceRows { src, start }))
    }

    pub fn slice_row(&mut self, src: Var, row: usize) -> Result<Var> {
        self.slice_rows(src, row, 1)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    /// Row-wise softmax where `mask[j] == false` excludes column `j` (its logit is
    /// treated as −∞). A row with every column masked is defined as all zeros.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let x = self.value(a);
        if mask.len() != x.cols() {
            return Err(Error::Shape {
                op: "masked_softmax_rows",
                detail: format!("mask of {} for {}x{}", mask.len(), x.rows(), x.cols()),
            });
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            let row = x.row(r);
            let max = row
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let dst = out.row_mut(r);
            let mut total = 0.0;
            for ((d, &v), &m) in dst.iter_mut().zip(row).zip(mask) {
                if m {
                    *d = (v - max).exp();
                    total += *d;
                }
            }
            for d in dst.iter_mut() {
                *d /= total;
            }
        }
        Ok(self.push(out, Op::MaskedSoftmaxRows(a)))
    }

    /// Mean of squared entries, as a 1x1 value.
    pub fn mean_sq(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let value = Matrix::scalar(m.sum_sq() / m.data().len() as f64);
        self.push(value, Op::MeanSq(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    /// Reverse sweep from a 1x1 output. Nodes not upstream of `output` get no
    /// gradient entry, which [`Gradients::wrt`] reports as zeros.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                detail: format!("output must be 1x1, got {}x{}", out.rows(), out.cols()),
            });
        }
        let mut grads: Vec<Option<Matrix>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Gather(_) => {}
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    accumulate(&mut grads, *a, g.matmul_t(bv)?);
                    accumulate(&mut grads, *b, av.t_matmul(&g)?);
                }
                Op::MatMulT(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    accumulate(&mut grads, *a, g.matmul(bv)?);
                    accumulate(&mut grads, *b, g.t_matmul(av)?);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.scale(-1.0));
                }
                Op::Scale(a, k) => accumulate(&mut grads, *a, g.scale(*k)),
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let chunk = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                        accumulate(&mut grads, p, Matrix::from_vec(rows, cols, chunk)?);
                        offset += rows;
                    }
                }
                Op::SliceRows { src, start } => {
                    let (rows, cols) = self.value(*src).shape();
                    let mut full = Matrix::zeros(rows, cols);
                    full.data_mut()[start * cols..start * cols + g.data().len()]
                        .copy_from_slice(g.data());
                    accumulate(&mut grads, *src, full);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut d = g.clone();
                    for (dv, &xv) in d.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *dv = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::MaskedSoftmaxRows(a) => {
                    let p = &node.value;
                    let mut d = Matrix::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let pr = p.row(r);
                        let gr = g.row(r);
                        let inner = dot(pr, gr);
                        for ((dv, &pv), &gv) in d.row_mut(r).iter_mut().zip(pr).zip(gr) {
                            *dv = pv * (gv - inner);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::MeanSq(a) => {
                    let x = self.value(*a);
                    let k = 2.0 * g.item() / x.data().len() as f64;
                    accumulate(&mut grads, *a, x.scale(k));
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    let gi = g.item();
                    accumulate(&mut grads, *a, Matrix::from_fn(rows, cols, |_, _| gi));
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Per-node gradients from one reverse sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zeros if `v` does not influence the output.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| {
            let (r, c) = tape.value(v).shape();
            Matrix::zeros(r, c)
        })
    }

    /// Adds the gradient of an [`Tape::embedding_lookup`] result into the
    /// matching rows of `table_grad`, scaled by `k`.
    pub fn scatter_add(&self, tape: &Tape, lookup: Var, table_grad: &mut Matrix, k: f64) {
        let Op::Gather(ids) = &tape.nodes[lookup.0].op else {
            panic!("scatter_add on a node that is not an embedding lookup");
        };
        let Some(g) = self.get(lookup) else { return };
        for (r, &id) in ids.iter().enumerate() {
            for (dst, &src) in table_grad.row_mut(id).iter_mut().zip(g.row(r)) {
                *dst += k * src;
            }
        }
    }
}
