//! Forward definitions and vector-Jacobian products for every tape op.

use crate::error::{AutodiffError, Result};
use crate::tape::{accumulate, Node, Op, Tape, Unary, Var, COSINE_EPS, LOG_FLOOR};
use crate::tensor::Tensor;

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

/// `c = a · b + beta · c` with optional transposed storage for either operand.
/// `a` is logically `[m, k]`, `b` is `[k, n]`, `c` is `[m, n]` row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_transposed { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_transposed { (1, k) } else { (n, 1) };
    // SAFETY: the slices hold exactly the element counts implied by
    // (m, k, n) and the strides address only within them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Logical `(m, k)` / `(k, n)` dimensions for matmul operands; rank-1
/// operands act as a row (left) or column (right) vector.
fn matmul_dims(a: &Tensor, b: &Tensor) -> Result<(usize, usize, usize, Vec<usize>)> {
    let (m, ka, a_vec) = match a.shape() {
        [k] => (1, *k, true),
        [m, k] => (*m, *k, false),
        _ => return Err(mismatch("matmul", a, b)),
    };
    let (kb, n, b_vec) = match b.shape() {
        [k] => (*k, 1, true),
        [k, n] => (*k, *n, false),
        _ => return Err(mismatch("matmul", a, b)),
    };
    if ka != kb {
        return Err(mismatch("matmul", a, b));
    }
    let shape = match (a_vec, b_vec) {
        (true, true) => vec![1],
        (true, false) => vec![n],
        (false, true) => vec![m],
        (false, false) => vec![m, n],
    };
    Ok((m, ka, n, shape))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn unary_forward(kind: Unary, x: f64) -> f64 {
    match kind {
        Unary::Sigmoid => sigmoid(x),
        Unary::Tanh => x.tanh(),
        Unary::Exp => x.exp(),
        Unary::Log => x.max(LOG_FLOOR).ln(),
        Unary::Softplus => softplus(x),
    }
}

/// Derivative given the input `x` and output `y`.
fn unary_derivative(kind: Unary, x: f64, y: f64) -> f64 {
    match kind {
        Unary::Sigmoid => y * (1.0 - y),
        Unary::Tanh => 1.0 - y * y,
        Unary::Exp => y,
        Unary::Log => {
            if x > LOG_FLOOR {
                1.0 / x
            } else {
                0.0
            }
        }
        Unary::Softplus => sigmoid(x),
    }
}

/// Shape checks shared by the memory ops: `lead + [w]` against `lead + [s, w]`.
fn memory_dims(op: &'static str, vec: &Tensor, memory: &Tensor) -> Result<(usize, usize, usize)> {
    let vs = vec.shape();
    let ms = memory.shape();
    if ms.len() != vs.len() + 1 || ms[..vs.len() - 1] != vs[..vs.len() - 1] {
        return Err(mismatch(op, vec, memory));
    }
    let lanes = vec.outer_len();
    let slots = ms[ms.len() - 2];
    let width = ms[ms.len() - 1];
    Ok((lanes, slots, width))
}

impl Tape {
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k, n, shape) = matmul_dims(av, bv)?;
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, av.data(), false, bv.data(), false, 0.0, &mut out);
        self.push("matmul", Tensor::new(&shape, out)?, Op::MatMul(a, b))
    }

    fn zip_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch(op, av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(av.shape(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("add", a, b, |x, y| x + y)?;
        self.push("add", t, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("sub", a, b, |x, y| x - y)?;
        self.push("sub", t, Op::Sub(a, b))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("mul", a, b, |x, y| x * y)?;
        self.push("mul", t, Op::Mul(a, b))
    }

    /// Element-wise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("div", a, b, |x, y| x / y)?;
        self.push("div", t, Op::Div(a, b))
    }

    /// Adds the rank-1 `bias` to every row of `a` (last axis).
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rank() != 1 || bv.len() != av.last_dim() {
            return Err(mismatch("add_row", av, bv));
        }
        let w = av.last_dim();
        let mut out = av.data().to_vec();
        for row in out.chunks_exact_mut(w) {
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let t = Tensor::new(av.shape(), out)?;
        self.push("add_row", t, Op::AddRow(a, bias))
    }

    /// Multiplies every element of `a` by the one-element tensor `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let (av, sv) = (self.value(a), self.value(s));
        if sv.len() != 1 {
            return Err(mismatch("mul_scalar", av, sv));
        }
        let k = sv.item();
        let t = av.map(|x| x * k);
        self.push("mul_scalar", t, Op::MulScalar(a, s))
    }

    /// `scale * a + shift` with constant coefficients.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let t = self.value(a).map(|x| scale * x + shift);
        self.push("affine", t, Op::Affine(a, scale))
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Result<Var> {
        self.affine(a, scale, 0.0)
    }

    /// Concatenation along the last axis; leading dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(AutodiffError::InvalidArgument {
                op: "concat",
                msg: "no inputs".into(),
            });
        };
        let lead = {
            let s = self.shape(first);
            s[..s.len() - 1].to_vec()
        };
        let mut total = 0;
        for &p in parts {
            let pv = self.value(p);
            let s = pv.shape();
            if s[..s.len() - 1] != lead[..] {
                return Err(mismatch("concat", self.value(first), pv));
            }
            total += pv.last_dim();
        }
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let mut shape = lead;
        shape.push(total);
        let t = Tensor::new(&shape, out)?;
        self.push("concat", t, Op::Concat(parts.to_vec()))
    }

    /// Columns `[start, start + len)` of the last axis.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        let w = av.last_dim();
        if len == 0 || start + len > w {
            return Err(AutodiffError::InvalidArgument {
                op: "slice",
                msg: format!(
                    "range {start}..{} outside last axis of {:?}",
                    start + len,
                    av.shape()
                ),
            });
        }
        let mut out = Vec::with_capacity(av.outer_len() * len);
        for row in av.data().chunks_exact(w) {
            out.extend_from_slice(&row[start..start + len]);
        }
        let mut shape = av.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let t = Tensor::new(&shape, out)?;
        self.push("slice", t, Op::Slice { input: a, start })
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape)?;
        self.push("reshape", t, Op::Reshape(a))
    }

    fn unary(&mut self, name: &'static str, kind: Unary, a: Var) -> Result<Var> {
        let t = self.value(a).map(|x| unary_forward(kind, x));
        self.push(name, t, Op::Unary(kind, a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", Unary::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", Unary::Tanh, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", Unary::Exp, a)
    }

    /// Natural log with the input floored at [`LOG_FLOOR`].
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary("log", Unary::Log, a)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary("softplus", Unary::Softplus, a)
    }

    /// Softmax over the last axis, max-subtracted.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if !av.is_finite() {
            return Err(AutodiffError::NonFinite {
                op: "softmax input",
            });
        }
        let t = softmax_rows(av);
        self.push("softmax", t, Op::Softmax(a))
    }

    /// Euclidean norm over the last axis (the axis is dropped; rank-1 gives `[1]`).
    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let data: Vec<f64> = av
            .data()
            .chunks_exact(av.last_dim())
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let shape = if av.rank() == 1 {
            vec![1]
        } else {
            av.shape()[..av.rank() - 1].to_vec()
        };
        let t = Tensor::new(&shape, data)?;
        self.push("l2_norm", t, Op::L2Norm(a))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let t = Tensor::scalar(self.value(a).sum());
        self.push("sum", t, Op::Sum(a))
    }

    /// Cosine similarity between each key (`lead + [w]`) and every row of
    /// the matching memory (`lead + [s, w]`), giving `lead + [s]`.
    ///
    /// The denominator is `|k||m| + COSINE_EPS`.
    pub fn cosine_similarity(&mut self, key: Var, memory: Var) -> Result<Var> {
        let (kv, mv) = (self.value(key), self.value(memory));
        let (lanes, slots, width) = memory_dims("cosine_similarity", kv, mv)?;
        if kv.last_dim() != width {
            return Err(mismatch("cosine_similarity", kv, mv));
        }
        let mut out = Vec::with_capacity(lanes * slots);
        for lane in 0..lanes {
            let k = kv.row(lane);
            let k_norm = norm(k);
            for s in 0..slots {
                let m = &mv.data()[(lane * slots + s) * width..(lane * slots + s + 1) * width];
                out.push(dot(k, m) / (k_norm * norm(m) + COSINE_EPS));
            }
        }
        let mut shape = kv.shape().to_vec();
        *shape.last_mut().unwrap() = slots;
        let t = Tensor::new(&shape, out)?;
        self.push("cosine_similarity", t, Op::Cosine { key, memory })
    }

    /// `r = Σ_i w(i) M(i)` per lane.
    pub fn weighted_read(&mut self, weights: Var, memory: Var) -> Result<Var> {
        let (wv, mv) = (self.value(weights), self.value(memory));
        let (lanes, slots, width) = memory_dims("weighted_read", wv, mv)?;
        if wv.last_dim() != slots {
            return Err(mismatch("weighted_read", wv, mv));
        }
        let mut out = vec![0.0; lanes * width];
        for lane in 0..lanes {
            let r = &mut out[lane * width..(lane + 1) * width];
            for s in 0..slots {
                let w = wv.data()[lane * slots + s];
                let m = &mv.data()[(lane * slots + s) * width..(lane * slots + s + 1) * width];
                for (ri, mi) in r.iter_mut().zip(m) {
                    *ri += w * mi;
                }
            }
        }
        let mut shape = wv.shape().to_vec();
        *shape.last_mut().unwrap() = width;
        let t = Tensor::new(&shape, out)?;
        self.push("weighted_read", t, Op::WeightedRead { weights, memory })
    }

    /// `M'(i) = keep(i)·M(i)`, then `M'(i) += w_h(i)·k_h` for each
    /// `(w_h, k_h)` in `writes`, in order. `keep` is a constant mask over slots.
    pub fn memory_write(
        &mut self,
        memory: Var,
        keep: Tensor,
        writes: &[(Var, Var)],
    ) -> Result<Var> {
        let mv = self.value(memory);
        let ms = mv.shape();
        if ms.len() < 2 || keep.shape() != &ms[..ms.len() - 1] {
            return Err(mismatch("memory_write", &keep, mv));
        }
        let width = mv.last_dim();
        let mut out = mv.data().to_vec();
        for (row, &k) in out.chunks_exact_mut(width).zip(keep.data()) {
            if k != 1.0 {
                row.iter_mut().for_each(|x| *x *= k);
            }
        }
        for &(w, k) in writes {
            let (wv, kv) = (self.value(w), self.value(k));
            if wv.shape() != keep.shape() {
                return Err(mismatch("memory_write", wv, &keep));
            }
            let (lanes, slots, _) = memory_dims("memory_write", kv, mv)?;
            if kv.last_dim() != width {
                return Err(mismatch("memory_write", kv, mv));
            }
            for lane in 0..lanes {
                let key = kv.row(lane);
                for s in 0..slots {
                    let ws = wv.data()[lane * slots + s];
                    let row = &mut out[(lane * slots + s) * width..(lane * slots + s + 1) * width];
                    for (x, ki) in row.iter_mut().zip(key) {
                        *x += ws * ki;
                    }
                }
            }
        }
        let t = Tensor::new(ms, out)?;
        self.push(
            "memory_write",
            t,
            Op::MemoryWrite {
                memory,
                keep,
                writes: writes.to_vec(),
            },
        )
    }
}

/// Max-subtracted softmax of every row of the last axis, off-tape.
pub fn softmax_rows(a: &Tensor) -> Tensor {
    let w = a.last_dim();
    let mut out = a.data().to_vec();
    for row in out.chunks_exact_mut(w) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    Tensor::new(a.shape(), out).expect("same shape")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn wants(tape: &Tape, v: Var) -> bool {
    tape.requires_grad(v)
}

/// Propagates `upstream` (the gradient of `node`'s output) to its inputs.
pub(crate) fn backprop(
    tape: &Tape,
    node: &Node,
    upstream: &Tensor,
    grads: &mut [Option<Tensor>],
) -> Result<()> {
    let g = upstream.data();
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (tape.value(*a), tape.value(*b));
            let (m, k, n, _) = matmul_dims(av, bv)?;
            if wants(tape, *a) {
                // dA = dC · Bᵀ
                match &mut grads[a.index()] {
                    Some(existing) => {
                        gemm(m, n, k, g, false, bv.data(), true, 1.0, existing.data_mut())
                    }
                    slot @ None => {
                        let mut out = vec![0.0; m * k];
                        gemm(m, n, k, g, false, bv.data(), true, 0.0, &mut out);
                        *slot = Some(Tensor::new(av.shape(), out)?);
                    }
                }
            }
            if wants(tape, *b) {
                // dB = Aᵀ · dC
                match &mut grads[b.index()] {
                    Some(existing) => {
                        gemm(k, m, n, av.data(), true, g, false, 1.0, existing.data_mut())
                    }
                    slot @ None => {
                        let mut out = vec![0.0; k * n];
                        gemm(k, m, n, av.data(), true, g, false, 0.0, &mut out);
                        *slot = Some(Tensor::new(bv.shape(), out)?);
                    }
                }
            }
        }
        Op::Add(a, b) => {
            if wants(tape, *a) {
                accumulate(grads, *a, upstream.clone());
            }
            if wants(tape, *b) {
                accumulate(grads, *b, upstream.clone());
            }
        }
        Op::Sub(a, b) => {
            if wants(tape, *a) {
                accumulate(grads, *a, upstream.clone());
            }
            if wants(tape, *b) {
                accumulate(grads, *b, upstream.map(|x| -x));
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (tape.value(*a), tape.value(*b));
            if wants(tape, *a) {
                let d = g.iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                accumulate(grads, *a, Tensor::new(av.shape(), d)?);
            }
            if wants(tape, *b) {
                let d = g.iter().zip(av.data()).map(|(x, y)| x * y).collect();
                accumulate(grads, *b, Tensor::new(bv.shape(), d)?);
            }
        }
        Op::Div(a, b) => {
            let (av, bv) = (tape.value(*a), tape.value(*b));
            if wants(tape, *a) {
                let d = g.iter().zip(bv.data()).map(|(x, y)| x / y).collect();
                accumulate(grads, *a, Tensor::new(av.shape(), d)?);
            }
            if wants(tape, *b) {
                let d = g
                    .iter()
                    .zip(av.data().iter().zip(bv.data()))
                    .map(|(x, (p, q))| -x * p / (q * q))
                    .collect();
                accumulate(grads, *b, Tensor::new(bv.shape(), d)?);
            }
        }
        Op::AddRow(a, bias) => {
            if wants(tape, *a) {
                accumulate(grads, *a, upstream.clone());
            }
            if wants(tape, *bias) {
                let w = upstream.last_dim();
                let mut d = vec![0.0; w];
                for row in g.chunks_exact(w) {
                    for (di, ri) in d.iter_mut().zip(row) {
                        *di += ri;
                    }
                }
                accumulate(grads, *bias, Tensor::vector(d));
            }
        }
        Op::MulScalar(a, s) => {
            let (av, sv) = (tape.value(*a), tape.value(*s));
            if wants(tape, *a) {
                let k = sv.item();
                accumulate(grads, *a, upstream.map(|x| x * k));
            }
            if wants(tape, *s) {
                let d: f64 = g.iter().zip(av.data()).map(|(x, y)| x * y).sum();
                accumulate(grads, *s, Tensor::new(sv.shape(), vec![d])?);
            }
        }
        Op::Affine(a, scale) => {
            let k = *scale;
            accumulate(grads, *a, upstream.map(|x| x * k));
        }
        Op::Concat(parts) => {
            let total = upstream.last_dim();
            let mut offset = 0;
            for &p in parts {
                let pv = tape.value(p);
                let w = pv.last_dim();
                if wants(tape, p) {
                    let mut d = Vec::with_capacity(pv.len());
                    for row in g.chunks_exact(total) {
                        d.extend_from_slice(&row[offset..offset + w]);
                    }
                    accumulate(grads, p, Tensor::new(pv.shape(), d)?);
                }
                offset += w;
            }
        }
        Op::Slice { input, start } => {
            let iv = tape.value(*input);
            let w = iv.last_dim();
            let len = upstream.last_dim();
            let mut d = vec![0.0; iv.len()];
            for (drow, grow) in d.chunks_exact_mut(w).zip(g.chunks_exact(len)) {
                drow[*start..*start + len].copy_from_slice(grow);
            }
            accumulate(grads, *input, Tensor::new(iv.shape(), d)?);
        }
        Op::Reshape(a) => {
            let shape = tape.shape(*a).to_vec();
            accumulate(grads, *a, upstream.clone().reshaped(&shape)?);
        }
        Op::Unary(kind, a) => {
            let x = tape.value(*a);
            let d = g
                .iter()
                .zip(x.data().iter().zip(node.value.data()))
                .map(|(gi, (&xi, &yi))| gi * unary_derivative(*kind, xi, yi))
                .collect();
            accumulate(grads, *a, Tensor::new(x.shape(), d)?);
        }
        Op::Softmax(a) => {
            let y = &node.value;
            let w = y.last_dim();
            let mut d = Vec::with_capacity(y.len());
            for (yr, gr) in y.data().chunks_exact(w).zip(g.chunks_exact(w)) {
                let inner = dot(yr, gr);
                d.extend(yr.iter().zip(gr).map(|(yi, gi)| yi * (gi - inner)));
            }
            accumulate(grads, *a, Tensor::new(y.shape(), d)?);
        }
        Op::L2Norm(a) => {
            let x = tape.value(*a);
            let w = x.last_dim();
            let mut d = Vec::with_capacity(x.len());
            for ((xr, &n), &gi) in x.data().chunks_exact(w).zip(node.value.data()).zip(g) {
                if n > 0.0 {
                    d.extend(xr.iter().map(|xi| gi * xi / n));
                } else {
                    d.extend(std::iter::repeat_n(0.0, w));
                }
            }
            accumulate(grads, *a, Tensor::new(x.shape(), d)?);
        }
        Op::Sum(a) => {
            let s = tape.shape(*a).to_vec();
            accumulate(grads, *a, Tensor::full(&s, g[0]));
        }
        Op::Cosine { key, memory } => {
            let (kv, mv) = (tape.value(*key), tape.value(*memory));
            let (lanes, slots, width) = memory_dims("cosine_similarity", kv, mv)?;
            let want_k = wants(tape, *key);
            let want_m = wants(tape, *memory);
            let mut dk = vec![0.0; kv.len()];
            let mut dm = vec![0.0; if want_m { mv.len() } else { 0 }];
            for lane in 0..lanes {
                let k = kv.row(lane);
                let nk = norm(k);
                for s in 0..slots {
                    let off = (lane * slots + s) * width;
                    let m = &mv.data()[off..off + width];
                    let nm = norm(m);
                    let denom = nk * nm + COSINE_EPS;
                    let a = dot(k, m);
                    let gs = g[lane * slots + s];
                    if gs == 0.0 {
                        continue;
                    }
                    // s = a / denom; ∂denom/∂k = nm·k/nk, ∂denom/∂m = nk·m/nm
                    let c = a / (denom * denom);
                    if want_k {
                        let kk = if nk > 0.0 { c * nm / nk } else { 0.0 };
                        for i in 0..width {
                            dk[lane * width + i] += gs * (m[i] / denom - kk * k[i]);
                        }
                    }
                    if want_m {
                        let mm = if nm > 0.0 { c * nk / nm } else { 0.0 };
                        for i in 0..width {
                            dm[off + i] += gs * (k[i] / denom - mm * m[i]);
                        }
                    }
                }
            }
            if want_k {
                accumulate(grads, *key, Tensor::new(kv.shape(), dk)?);
            }
            if want_m {
                accumulate(grads, *memory, Tensor::new(mv.shape(), dm)?);
            }
        }
        Op::WeightedRead { weights, memory } => {
            let (wv, mv) = (tape.value(*weights), tape.value(*memory));
            let (lanes, slots, width) = memory_dims("weighted_read", wv, mv)?;
            if wants(tape, *weights) {
                let mut dw = vec![0.0; wv.len()];
                for lane in 0..lanes {
                    let gr = &g[lane * width..(lane + 1) * width];
                    for s in 0..slots {
                        let off = (lane * slots + s) * width;
                        dw[lane * slots + s] = dot(gr, &mv.data()[off..off + width]);
                    }
                }
                accumulate(grads, *weights, Tensor::new(wv.shape(), dw)?);
            }
            if wants(tape, *memory) {
                let mut dm = vec![0.0; mv.len()];
                for lane in 0..lanes {
                    let gr = &g[lane * width..(lane + 1) * width];
                    for s in 0..slots {
                        let w = wv.data()[lane * slots + s];
                        let off = (lane * slots + s) * width;
                        for (d, gi) in dm[off..off + width].iter_mut().zip(gr) {
                            *d = w * gi;
                        }
                    }
                }
                accumulate(grads, *memory, Tensor::new(mv.shape(), dm)?);
            }
        }
        Op::MemoryWrite {
            memory,
            keep,
            writes,
        } => {
            let mv = tape.value(*memory);
            let width = mv.last_dim();
            if wants(tape, *memory) {
                let mut dm = g.to_vec();
                for (row, &k) in dm.chunks_exact_mut(width).zip(keep.data()) {
                    if k != 1.0 {
                        row.iter_mut().for_each(|x| *x *= k);
                    }
                }
                accumulate(grads, *memory, Tensor::new(mv.shape(), dm)?);
            }
            for &(w, k) in writes {
                let (wv, kv) = (tape.value(w), tape.value(k));
                let (lanes, slots, _) = memory_dims("memory_write", kv, mv)?;
                let want_w = wants(tape, w);
                let want_k = wants(tape, k);
                let mut dw = vec![0.0; if want_w { wv.len() } else { 0 }];
                let mut dk = vec![0.0; if want_k { kv.len() } else { 0 }];
                for lane in 0..lanes {
                    let key = kv.row(lane);
                    for s in 0..slots {
                        let off = (lane * slots + s) * width;
                        let gr = &g[off..off + width];
                        if want_w {
                            dw[lane * slots + s] = dot(gr, key);
                        }
                        if want_k {
                            let ws = wv.data()[lane * slots + s];
                            for (d, gi) in dk[lane * width..(lane + 1) * width].iter_mut().zip(gr) {
                                *d += ws * gi;
                            }
                        }
                    }
                }
                if want_w {
                    accumulate(grads, w, Tensor::new(wv.shape(), dw)?);
                }
                if want_k {
                    accumulate(grads, k, Tensor::new(kv.shape(), dk)?);
                }
            }
        }
    }
    Ok(())
}
