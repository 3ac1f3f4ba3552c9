//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node to the tape, so node order is already a
//! topological order and `backward` simply walks the tape in reverse.
//! Gradients accumulate into each node's `grad` buffer until `zero_grad`.

use super::value::{axis_split, inverse_permutation, Tensor};
use crate::error::{Error, Result};
use crate::spectral::fourier;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    MatMul { a: Var, b: Var, batch: usize, m: usize, k: usize, n: usize, shared_rhs: bool },
    Softmax(Var, usize),
    Permute(Var, Vec<usize>),
    Reshape(Var),
    Select { x: Var, axis: usize, index: usize },
    Concat { parts: Vec<Var>, axis: usize },
    Sum(Var),
    MeanAxis(Var, usize),
    Conv1d { signal: Var, kernel: Var },
    Laplacian(Var),
    DftRe(Var),
    DftIm(Var),
    Idft(Var, Var),
    CrossEntropy { logits: Var, labels: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// A single-threaded computation record.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Gradient of `v` as a tensor shaped like its value.
    pub fn grad_tensor(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, op, rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::dim(op, sa, sb));
        }
        Ok(())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.zip(a, b, |x, y| x + y);
        Ok(self.derived(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.zip(a, b, |x, y| x - y);
        Ok(self.derived(v, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.zip(a, b, |x, y| x * y);
        Ok(self.derived(v, Op::Mul(a, b), &[a, b]))
    }

    /// `a + bias` where `bias`'s shape is a trailing suffix of `a`'s shape.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(Error::dim("add_bias", sa, sb));
        }
        let period = self.value(bias).numel();
        let bd = self.value(bias).data();
        let data = self.value(a).data().iter().enumerate().map(|(i, &x)| x + bd[i % period]).collect();
        let v = Tensor::new(sa.to_vec(), data)?;
        Ok(self.derived(v, Op::AddBias(a, bias), &[a, bias]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| c * x);
        self.derived(v, Op::Scale(a, c), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.derived(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.derived(v, Op::Tanh(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.derived(v, Op::LeakyRelu(a, slope), &[a])
    }

    /// Gated linear unit with a shared pre-activation: `x ⊙ σ(x)`.
    pub fn glu(&mut self, a: Var) -> Var {
        let gate = self.sigmoid(a);
        self.mul(a, gate).expect("same shape")
    }

    /// Matrix product over the last two axes.
    ///
    /// `a` is `[.., m, k]`; `b` is either `[k, n]` (shared across the batch)
    /// or `[.., k, n]` with the same leading extents as `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        let lead_a = &sa[..sa.len() - 2];
        let lead_b = &sb[..sb.len() - 2];
        let shared_rhs = lead_b.is_empty();
        if k != k2 || (!shared_rhs && lead_a != lead_b) {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let batch: usize = lead_a.iter().product();
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; batch * m * n];
        for bi in 0..batch {
            let ao = &ad[bi * m * k..(bi + 1) * m * k];
            let bo = if shared_rhs { bd } else { &bd[bi * k * n..(bi + 1) * k * n] };
            gemm_acc(ao, bo, &mut out[bi * m * n..(bi + 1) * m * n], m, k, n);
        }
        let mut shape = lead_a.to_vec();
        shape.extend([m, n]);
        let v = Tensor::new(shape, out)?;
        Ok(self.derived(v, Op::MatMul { a, b, batch, m, k, n, shared_rhs }, &[a, b]))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::contract("softmax", format!("axis {axis} out of range for rank {}", shape.len())));
        }
        let (outer, n, inner) = axis_split(&shape, axis);
        let x = self.value(a).data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for j in 0..inner {
                let at = |i: usize| o * n * inner + i * inner + j;
                let max = (0..n).map(|i| x[at(i)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for i in 0..n {
                    let e = (x[at(i)] - max).exp();
                    out[at(i)] = e;
                    total += e;
                }
                for i in 0..n {
                    out[at(i)] /= total;
                }
            }
        }
        let v = Tensor::new(shape, out)?;
        Ok(self.derived(v, Op::Softmax(a, axis), &[a]))
    }

    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let v = self.value(a).permute(axes)?;
        Ok(self.derived(v, Op::Permute(a, axes.to_vec()), &[a]))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let r = self.shape(a).len();
        if r < 2 {
            return Err(Error::contract("transpose", "rank must be at least 2"));
        }
        let mut axes: Vec<usize> = (0..r).collect();
        axes.swap(r - 2, r - 1);
        self.permute(a, &axes)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).reshape(shape)?;
        Ok(self.derived(v, Op::Reshape(a), &[a]))
    }

    /// Picks `index` along `axis`, dropping that axis.
    pub fn select(&mut self, x: Var, axis: usize, index: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || index >= shape[axis] {
            return Err(Error::contract("select", format!("index {index} on axis {axis} of {shape:?}")));
        }
        let (outer, n, inner) = axis_split(&shape, axis);
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * n * inner + index * inner;
            out.extend_from_slice(&xd[base..base + inner]);
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let v = Tensor::new(out_shape, out)?;
        Ok(self.derived(v, Op::Select { x, axis, index }, &[x]))
    }

    /// Joins tensors along an existing `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat", "no inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::contract("concat", format!("axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for p in parts {
            let s = self.shape(*p);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let v = Tensor::new(shape, out)?;
        Ok(self.derived(v, Op::Concat { parts: parts.to_vec(), axis }, parts))
    }

    /// Stacks equally shaped tensors along a new `axis`.
    pub fn stack(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let mut expanded = Vec::with_capacity(parts.len());
        for p in parts {
            let mut s = self.shape(*p).to_vec();
            if axis > s.len() {
                return Err(Error::contract("stack", format!("axis {axis} out of range for {s:?}")));
            }
            s.insert(axis, 1);
            expanded.push(self.reshape(*p, &s)?);
        }
        self.concat(&expanded, axis)
    }

    /// Sum of all elements as a `[1]` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.derived(v, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).numel() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Mean over `axis`, dropping that axis.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::contract("mean_axis", format!("axis {axis} out of range for {shape:?}")));
        }
        let (outer, n, inner) = axis_split(&shape, axis);
        let x = self.value(a).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..n {
                for j in 0..inner {
                    out[o * inner + j] += x[o * n * inner + i * inner + j];
                }
            }
        }
        out.iter_mut().for_each(|x| *x /= n as f64);
        let mut out_shape = shape;
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let v = Tensor::new(out_shape, out)?;
        Ok(self.derived(v, Op::MeanAxis(a, axis), &[a]))
    }

    /// Same-length zero-padded cross-correlation along the last axis.
    ///
    /// `kernel` is `[K]` (shared by every row), `[C, K]` (one kernel per
    /// channel, where channels are the second-to-last axis of `signal`), or
    /// `[C_out, C_in, K]` (channel-mixing; the channel axis of the output
    /// becomes `C_out`). `K` must be odd.
    pub fn conv1d(&mut self, signal: Var, kernel: Var) -> Result<Var> {
        let ss = self.shape(signal).to_vec();
        let ks = self.shape(kernel).to_vec();
        let taps = *ks.last().expect("nonempty shape");
        let chan_ok = ss.len() >= 2 && ss[ss.len() - 2] == ks[ks.len().saturating_sub(2)];
        match ks.len() {
            1 => {}
            2 | 3 if chan_ok => {}
            _ => return Err(Error::dim("conv1d", &ss, &ks)),
        }
        if taps % 2 == 0 {
            return Err(Error::contract("conv1d", format!("kernel length {taps} must be odd")));
        }
        let len = *ss.last().expect("nonempty shape");
        let x = self.value(signal).data();
        let kd = self.value(kernel).data();
        if ks.len() == 3 {
            let (co, ci) = (ks[0], ks[1]);
            let groups = x.len() / (ci * len);
            let mut out = vec![0.0; groups * co * len];
            let mut row = vec![0.0; len];
            for g in 0..groups {
                for o in 0..co {
                    let dst = &mut out[(g * co + o) * len..(g * co + o + 1) * len];
                    for i in 0..ci {
                        let kr = &kd[(o * ci + i) * taps..(o * ci + i + 1) * taps];
                        conv_row(&x[(g * ci + i) * len..(g * ci + i + 1) * len], kr, &mut row);
                        dst.iter_mut().zip(&row).for_each(|(d, r)| *d += r);
                    }
                }
            }
            let mut os = ss;
            let n = os.len();
            os[n - 2] = co;
            let v = Tensor::new(os, out)?;
            return Ok(self.derived(v, Op::Conv1d { signal, kernel }, &[signal, kernel]));
        }
        let channels = if ks.len() == 2 { ks[0] } else { 1 };
        let rows = x.len() / len;
        let mut out = vec![0.0; x.len()];
        for r in 0..rows {
            let kr = &kd[(r % channels) * taps..(r % channels + 1) * taps];
            conv_row(&x[r * len..(r + 1) * len], kr, &mut out[r * len..(r + 1) * len]);
        }
        let v = Tensor::new(ss, out)?;
        Ok(self.derived(v, Op::Conv1d { signal, kernel }, &[signal, kernel]))
    }

    /// Symmetric normalized Laplacian `I - D^{-1/2} S D^{-1/2}` of the
    /// symmetrized adjacency `S = (W + Wᵀ)/2`. Rows of zero degree give
    /// zero rows in the normalized product.
    pub fn normalized_laplacian(&mut self, w: Var) -> Result<Var> {
        let shape = self.shape(w).to_vec();
        if shape.len() != 2 || shape[0] != shape[1] {
            return Err(Error::dim("normalized_laplacian", &shape, &shape));
        }
        let wd = self.value(w).data();
        if let Some(bad) = wd.iter().find(|&&x| x < 0.0 || x.is_nan()) {
            return Err(Error::contract("build_laplacian", format!("adjacency entry {bad} is negative")));
        }
        let (sym, rinv) = laplacian_parts(wd, shape[0]);
        let h = shape[0];
        let mut out = vec![0.0; h * h];
        for i in 0..h {
            for j in 0..h {
                out[i * h + j] = f64::from(u8::from(i == j)) - sym[i * h + j] * (rinv[i] * rinv[j]);
            }
        }
        let v = Tensor::new(shape, out)?;
        Ok(self.derived(v, Op::Laplacian(w), &[w]))
    }

    /// Real part of the DFT along the last axis.
    pub fn dft_re(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (re, _) = fourier::dft_rows(t.data(), *t.shape().last().expect("nonempty"));
        let v = Tensor::new(t.shape().to_vec(), re).expect("same shape");
        self.derived(v, Op::DftRe(x), &[x])
    }

    /// Imaginary part of the DFT along the last axis.
    pub fn dft_im(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (_, im) = fourier::dft_rows(t.data(), *t.shape().last().expect("nonempty"));
        let v = Tensor::new(t.shape().to_vec(), im).expect("same shape");
        self.derived(v, Op::DftIm(x), &[x])
    }

    /// Real part of the inverse DFT of `re + j·im` along the last axis.
    pub fn idft_real(&mut self, re: Var, im: Var) -> Result<Var> {
        self.same_shape("idft", re, im)?;
        let (tr, ti) = (self.value(re), self.value(im));
        let len = *tr.shape().last().expect("nonempty");
        let (out, _) = fourier::idft_rows(tr.data(), ti.data(), len);
        let v = Tensor::new(tr.shape().to_vec(), out)?;
        Ok(self.derived(v, Op::Idft(re, im), &[re, im]))
    }

    /// Mean categorical cross-entropy of `[b, C]` raw scores against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::dim("cross_entropy", &shape, &[labels.len()]));
        }
        let classes = shape[1];
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::contract("loss", format!("label {bad} outside 0..{classes}")));
        }
        let z = self.value(logits).data();
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let row = &z[i * classes..(i + 1) * classes];
                log_sum_exp(row) - row[y]
            })
            .sum();
        let v = Tensor::scalar(total / labels.len() as f64);
        Ok(self.derived(v, Op::CrossEntropy { logits, labels: labels.to_vec() }, &[logits]))
    }

    /// Reverse pass from a single-element `loss`, adding into every
    /// reachable gradient-tracking node's `grad`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::contract(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.shape(loss)),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(id, &g, &mut grads);
            let node = &mut self.nodes[id];
            match &mut node.grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, b)| *a += b),
            slot => *slot = Some(contrib),
        }
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = self.nodes[id].value.data();
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, g.iter().zip(bd).map(|(g, y)| g * y).collect());
                self.accumulate(grads, *b, g.iter().zip(ad).map(|(g, x)| g * x).collect());
            }
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, g.to_vec());
                let period = self.value(*bias).numel();
                let mut gb = vec![0.0; period];
                g.iter().enumerate().for_each(|(i, x)| gb[i % period] += x);
                self.accumulate(grads, *bias, gb);
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, g.iter().map(|x| c * x).collect()),
            Op::Sigmoid(a) => {
                let ga = g.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect();
                self.accumulate(grads, *a, ga);
            }
            Op::Tanh(a) => {
                let ga = g.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect();
                self.accumulate(grads, *a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a).data();
                let ga = g
                    .iter()
                    .zip(x)
                    .map(|(g, &x)| if x > 0.0 { *g } else { slope * g })
                    .collect();
                self.accumulate(grads, *a, ga);
            }
            &Op::MatMul { a, b, batch, m, k, n, shared_rhs } => {
                let (ad, bd) = (self.value(a).data(), self.value(b).data());
                if self.nodes[a.0].requires_grad {
                    let mut ga = vec![0.0; batch * m * k];
                    for bi in 0..batch {
                        let bo = if shared_rhs { bd } else { &bd[bi * k * n..(bi + 1) * k * n] };
                        let go = &g[bi * m * n..(bi + 1) * m * n];
                        let gao = &mut ga[bi * m * k..(bi + 1) * m * k];
                        // dA = G · Bᵀ
                        for i in 0..m {
                            for p in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += go[i * n + j] * bo[p * n + j];
                                }
                                gao[i * k + p] = s;
                            }
                        }
                    }
                    self.accumulate(grads, a, ga);
                }
                if self.nodes[b.0].requires_grad {
                    let mut gb = vec![0.0; if shared_rhs { k * n } else { batch * k * n }];
                    for bi in 0..batch {
                        let ao = &ad[bi * m * k..(bi + 1) * m * k];
                        let go = &g[bi * m * n..(bi + 1) * m * n];
                        let off = if shared_rhs { 0 } else { bi * k * n };
                        let gbo = &mut gb[off..off + k * n];
                        // dB = Aᵀ · G
                        for i in 0..m {
                            for p in 0..k {
                                let av = ao[i * k + p];
                                if av == 0.0 {
                                    continue;
                                }
                                for j in 0..n {
                                    gbo[p * n + j] += av * go[i * n + j];
                                }
                            }
                        }
                    }
                    self.accumulate(grads, b, gb);
                }
            }
            &Op::Softmax(a, axis) => {
                let (outer, n, inner) = axis_split(self.nodes[id].value.shape(), axis);
                let mut ga = vec![0.0; g.len()];
                for o in 0..outer {
                    for j in 0..inner {
                        let at = |i: usize| o * n * inner + i * inner + j;
                        let dot: f64 = (0..n).map(|i| g[at(i)] * out[at(i)]).sum();
                        for i in 0..n {
                            ga[at(i)] = out[at(i)] * (g[at(i)] - dot);
                        }
                    }
                }
                self.accumulate(grads, a, ga);
            }
            Op::Permute(a, axes) => {
                let gt = Tensor::new(self.nodes[id].value.shape().to_vec(), g.to_vec()).expect("grad shape");
                let back = gt.permute(&inverse_permutation(axes)).expect("valid permutation");
                self.accumulate(grads, *a, back.into_data());
            }
            Op::Reshape(a) => self.accumulate(grads, *a, g.to_vec()),
            &Op::Select { x, axis, index } => {
                let (outer, n, inner) = axis_split(self.value(x).shape(), axis);
                let mut gx = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    let base = o * n * inner + index * inner;
                    gx[base..base + inner].copy_from_slice(&g[o * inner..(o + 1) * inner]);
                }
                self.accumulate(grads, x, gx);
            }
            Op::Concat { parts, axis } => {
                let (outer, total, inner) = axis_split(self.nodes[id].value.shape(), *axis);
                let mut start = 0;
                for p in parts {
                    let ext = self.value(*p).shape()[*axis];
                    let chunk = ext * inner;
                    let mut gp = Vec::with_capacity(outer * chunk);
                    for o in 0..outer {
                        let base = o * total * inner + start * inner;
                        gp.extend_from_slice(&g[base..base + chunk]);
                    }
                    self.accumulate(grads, *p, gp);
                    start += ext;
                }
            }
            Op::Sum(a) => {
                let n = self.value(*a).numel();
                self.accumulate(grads, *a, vec![g[0]; n]);
            }
            &Op::MeanAxis(a, axis) => {
                let (outer, n, inner) = axis_split(self.value(a).shape(), axis);
                let mut ga = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for i in 0..n {
                        for j in 0..inner {
                            ga[o * n * inner + i * inner + j] = g[o * inner + j] / n as f64;
                        }
                    }
                }
                self.accumulate(grads, a, ga);
            }
            &Op::Conv1d { signal, kernel } => {
                let ss = self.value(signal).shape();
                let ks = self.value(kernel).shape();
                let len = *ss.last().expect("nonempty");
                let taps = *ks.last().expect("nonempty");
                let half = taps / 2;
                let x = self.value(signal).data();
                let kd = self.value(kernel).data();
                let mut gx = vec![0.0; x.len()];
                let mut gk = vec![0.0; kd.len()];
                if ks.len() == 3 {
                    let (co, ci) = (ks[0], ks[1]);
                    for grp in 0..x.len() / (ci * len) {
                        for oc in 0..co {
                            let grow = &g[(grp * co + oc) * len..(grp * co + oc + 1) * len];
                            for ic in 0..ci {
                                let xb = (grp * ci + ic) * len;
                                let kb = (oc * ci + ic) * taps;
                                for (t, &gt) in grow.iter().enumerate() {
                                    for j in 0..taps {
                                        let Some(src) = (t + j).checked_sub(half).filter(|&s| s < len) else {
                                            continue;
                                        };
                                        gx[xb + src] += kd[kb + j] * gt;
                                        gk[kb + j] += x[xb + src] * gt;
                                    }
                                }
                            }
                        }
                    }
                    self.accumulate(grads, signal, gx);
                    self.accumulate(grads, kernel, gk);
                    return;
                }
                let channels = if ks.len() == 2 { ks[0] } else { 1 };
                for r in 0..x.len() / len {
                    let c = r % channels;
                    for t in 0..len {
                        let gt = g[r * len + t];
                        for j in 0..taps {
                            let Some(src) = (t + j).checked_sub(half).filter(|&s| s < len) else {
                                continue;
                            };
                            gx[r * len + src] += kd[c * taps + j] * gt;
                            gk[c * taps + j] += x[r * len + src] * gt;
                        }
                    }
                }
                self.accumulate(grads, signal, gx);
                self.accumulate(grads, kernel, gk);
            }
            Op::Laplacian(w) => {
                let h = self.value(*w).shape()[0];
                let gw = laplacian_backward(self.value(*w).data(), h, g);
                self.accumulate(grads, *w, gw);
            }
            Op::DftRe(x) => {
                let len = *self.value(*x).shape().last().expect("nonempty");
                let (re, _) = fourier::dft_rows(g, len);
                self.accumulate(grads, *x, re);
            }
            Op::DftIm(x) => {
                let len = *self.value(*x).shape().last().expect("nonempty");
                let (_, im) = fourier::dft_rows(g, len);
                self.accumulate(grads, *x, im);
            }
            Op::Idft(re, im) => {
                let len = *self.value(*re).shape().last().expect("nonempty");
                let (gr, gi) = fourier::dft_rows(g, len);
                let inv = 1.0 / len as f64;
                self.accumulate(grads, *re, gr.into_iter().map(|v| v * inv).collect());
                self.accumulate(grads, *im, gi.into_iter().map(|v| v * inv).collect());
            }
            Op::CrossEntropy { logits, labels } => {
                let z = self.value(*logits).data();
                let classes = z.len() / labels.len();
                let scale = g[0] / labels.len() as f64;
                let mut gz = vec![0.0; z.len()];
                for (i, &y) in labels.iter().enumerate() {
                    let row = &z[i * classes..(i + 1) * classes];
                    let lse = log_sum_exp(row);
                    for c in 0..classes {
                        let p = (row[c] - lse).exp();
                        gz[i * classes + c] = scale * (p - f64::from(u8::from(c == y)));
                    }
                }
                self.accumulate(grads, *logits, gz);
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// `out += a · b` for row-major `a: m×k`, `b: k×n`.
fn gemm_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

fn conv_row(x: &[f64], kernel: &[f64], out: &mut [f64]) {
    let len = x.len();
    let half = kernel.len() / 2;
    for (t, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &kv) in kernel.iter().enumerate() {
            if let Some(src) = (t + j).checked_sub(half).filter(|&s| s < len) {
                acc += kv * x[src];
            }
        }
        *o = acc;
    }
}

/// Symmetrized adjacency and `d^{-1/2}` (zero where the degree is zero).
fn laplacian_parts(w: &[f64], h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sym = vec![0.0; h * h];
    for i in 0..h {
        for j in 0..h {
            sym[i * h + j] = 0.5 * (w[i * h + j] + w[j * h + i]);
        }
    }
    let rinv = (0..h)
        .map(|i| {
            let d: f64 = sym[i * h..(i + 1) * h].iter().sum();
            if d > 0.0 {
                d.powf(-0.5)
            } else {
                0.0
            }
        })
        .collect();
    (sym, rinv)
}

fn laplacian_backward(w: &[f64], h: usize, g: &[f64]) -> Vec<f64> {
    let (sym, rinv) = laplacian_parts(w, h);
    // N = R S R with L = I - N, so dN = -G.
    let mut g_sym = vec![0.0; h * h];
    let mut g_r = vec![0.0; h];
    for i in 0..h {
        for j in 0..h {
            let dn = -g[i * h + j];
            g_sym[i * h + j] += dn * rinv[i] * rinv[j];
            g_r[i] += dn * sym[i * h + j] * rinv[j];
            g_r[j] += dn * rinv[i] * sym[i * h + j];
        }
    }
    // r = d^{-1/2}  =>  dr/dd = -r³/2; d_i = Σ_j S_ij.
    for i in 0..h {
        let g_d = g_r[i] * -0.5 * rinv[i].powi(3);
        for j in 0..h {
            g_sym[i * h + j] += g_d;
        }
    }
    let mut gw = vec![0.0; h * h];
    for i in 0..h {
        for j in 0..h {
            gw[i * h + j] = 0.5 * (g_sym[i * h + j] + g_sym[j * h + i]);
        }
    }
    gw
}
