use rand::Rng;

use super::{ParamId, ParamSet, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    ConvMaxPool {
        x: Var,
        kernels: Var,
        bias: Var,
        width: usize,
        // Winning window start per kernel; `None` when the pooled value is
        // clamped by the ReLU floor.
        argmax: Vec<Option<usize>>,
    },
    Relu(Var),
    Softsign(Var),
    Sigmoid(Var),
    Softmax(Var),
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Concat(Vec<Var>),
    WeightedSum {
        x: Var,
        coeffs: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        label: usize,
        probs: Vec<f64>,
    },
    CrossEntropy {
        probs: Var,
        label: usize,
    },
    SigmoidBce {
        logit: Var,
        target: f64,
        p: f64,
    },
    Attention(Box<AttentionCache>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

struct AttentionCache {
    slots: Vec<Option<Var>>,
    center: usize,
    wq: Var,
    wk: Var,
    wv: Var,
    nonzero: Vec<Vec<usize>>,
    q: Vec<f64>,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    gauss: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
    fallback: bool,
    out_scale: f64,
}

/// Result of [`Tape::local_attention`]: the context vector plus the
/// normalized weights per window slot (zero for padded slots).
#[derive(Clone, Debug)]
pub struct AttentionOutput {
    pub context: Var,
    pub weights: Vec<f64>,
    pub gaussian: Vec<f64>,
    pub fallback: bool,
}

/// Gradients with respect to the parameters touched by a tape.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    entries: Vec<(ParamId, Vec<f64>)>,
}

impl Gradients {
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.entries.iter().map(|(id, g)| (*id, g.as_slice()))
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.entries.iter().find(|(p, _)| *p == id).map(|(_, g)| g.as_slice())
    }
}

/// Records one forward pass. Ops compute eagerly; [`Tape::backward`]
/// replays them in reverse.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    training: bool,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            training: false,
        }
    }

    /// Enables dropout.
    pub fn training(mut self, on: bool) -> Self {
        self.training = on;
        self
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].op {
            Op::Param(id) => &self.params.get(*id).value,
            _ => &self.nodes[v.0].value,
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value produced on tape");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Tensor::zeros(&[0]), Op::Param(id), true)
    }

    /// `y = W x + b` for `x: [n]`, `W: [m, n]`, `b: [m]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (xs, ws, bs) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(ws.shape().len(), 2, "linear weight must be 2-d");
        let (m, n) = (ws.shape()[0], ws.shape()[1]);
        assert_eq!(xs.len(), n, "linear: input has {} features, weight expects {n}", xs.len());
        assert_eq!(bs.len(), m, "linear: bias has {} entries, weight has {m} rows", bs.len());
        let xd = xs.data();
        let out: Vec<f64> = ws
            .data()
            .chunks_exact(n)
            .zip(bs.data())
            .map(|(row, bias)| bias + dot(row, xd))
            .collect();
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        self.push(Tensor::vector(out), Op::Linear { x, w, b }, rg)
    }

    /// One convolution-pooling stage: for every kernel `j`,
    /// `max_t ReLU(k_j · x[t..t+h] + b_j)` over all `n - h + 1` windows.
    /// Ties go to the first maximal window.
    pub fn conv1d_maxpool(&mut self, x: Var, kernels: Var, bias: Var) -> Var {
        let (xs, ks, bs) = (self.value(x), self.value(kernels), self.value(bias));
        assert_eq!(ks.shape().len(), 2, "conv kernels must be [m, h]");
        let (m, h) = (ks.shape()[0], ks.shape()[1]);
        let n = xs.len();
        assert!(n >= h && h > 0, "conv1d_maxpool: sequence length {n} shorter than kernel size {h}");
        assert_eq!(bs.len(), m, "conv1d_maxpool: bias has {} entries for {m} kernels", bs.len());
        let windows = n - h + 1;
        let xd = xs.data();
        let mut acc = vec![0.0; windows];
        let mut out = Vec::with_capacity(m);
        let mut argmax = Vec::with_capacity(m);
        for (kernel, &b) in ks.data().chunks_exact(h).zip(bs.data()) {
            acc.fill(b);
            for (q, &wq) in kernel.iter().enumerate() {
                for (a, xv) in acc.iter_mut().zip(&xd[q..q + windows]) {
                    *a += wq * xv;
                }
            }
            let mut best = 0;
            for (t, &a) in acc.iter().enumerate().skip(1) {
                if a > acc[best] {
                    best = t;
                }
            }
            if acc[best] > 0.0 {
                out.push(acc[best]);
                argmax.push(Some(best));
            } else {
                out.push(0.0);
                argmax.push(None);
            }
        }
        let rg = self.rg(x) || self.rg(kernels) || self.rg(bias);
        self.push(
            Tensor::vector(out),
            Op::ConvMaxPool {
                x,
                kernels,
                bias,
                width: h,
                argmax,
            },
            rg,
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.map(x, |a| a.max(0.0));
        let rg = self.rg(x);
        self.push(v, Op::Relu(x), rg)
    }

    pub fn softsign(&mut self, x: Var) -> Var {
        let v = self.map(x, softsign);
        let rg = self.rg(x);
        self.push(v, Op::Softsign(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.map(x, sigmoid);
        let rg = self.rg(x);
        self.push(v, Op::Sigmoid(x), rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let last = *xs.shape().last().expect("softmax of a scalar-shaped tensor");
        let mut data = xs.data().to_vec();
        for row in data.chunks_exact_mut(last) {
            softmax_in_place(row);
        }
        let v = Tensor::from_vec(xs.shape(), data);
        let rg = self.rg(x);
        self.push(v, Op::Softmax(x), rg)
    }

    /// Inverted dropout. Identity outside training mode.
    pub fn dropout<R: Rng>(&mut self, x: Var, p: f64, rng: &mut R) -> Var {
        assert!((0.0..1.0).contains(&p), "dropout probability {p} outside [0, 1)");
        if !self.training || p == 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let xs = self.value(x);
        let mask: Vec<f64> = (0..xs.len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = xs.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let v = Tensor::from_vec(xs.shape(), data);
        let rg = self.rg(x);
        self.push(v, Op::Dropout { x, mask }, rg)
    }

    /// Concatenates flat vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), rg)
    }

    /// Scalar `Σ c_i x_i`; a generic loss head for gradient checks.
    pub fn weighted_sum(&mut self, x: Var, coeffs: Vec<f64>) -> Var {
        let xs = self.value(x);
        assert_eq!(xs.len(), coeffs.len(), "weighted_sum: coefficient count mismatch");
        let s = dot(xs.data(), &coeffs);
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::WeightedSum { x, coeffs }, rg)
    }

    /// Fused softmax + cross-entropy on a logit vector.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Var {
        let mut probs = self.value(logits).data().to_vec();
        assert!(label < probs.len(), "label {label} out of range for {} classes", probs.len());
        softmax_in_place(&mut probs);
        let loss = -probs[label].max(PROB_FLOOR).ln();
        let rg = self.rg(logits);
        self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                label,
                probs,
            },
            rg,
        )
    }

    /// `-log p[label]` on an already-normalized probability row,
    /// with `p` clamped at `1e-12`.
    pub fn cross_entropy(&mut self, probs: Var, label: usize) -> Var {
        let p = self.value(probs).data();
        assert!(label < p.len(), "label {label} out of range for {} classes", p.len());
        let loss = -p[label].max(PROB_FLOOR).ln();
        let rg = self.rg(probs);
        self.push(Tensor::scalar(loss), Op::CrossEntropy { probs, label }, rg)
    }

    /// Binary cross-entropy of `sigmoid(logit)` against a 0/1 target.
    pub fn sigmoid_bce(&mut self, logit: Var, target: f64) -> Var {
        let z = self.value(logit).data()[0];
        let p = sigmoid(z);
        // log(1 + e^-|z|) form keeps large logits finite.
        let loss = z.max(0.0) - z * target + (-z.abs()).exp().ln_1p();
        let rg = self.rg(logit);
        self.push(Tensor::scalar(loss), Op::SigmoidBce { logit, target, p }, rg)
    }

    /// Local attention over a window of utterance vectors.
    ///
    /// `slots[s]` is `None` for zero-padded positions; `center` indexes the
    /// query slot. Scores are `(q · k_s) · exp(-(s - c)^2 / (2 r^2))` and are
    /// normalized by their plain sum over non-pad slots. When that sum is
    /// not safely positive (at most `min_mass` times the total absolute
    /// score, which covers a zero or negative sum) the weights fall back to
    /// uniform over non-pad slots. The context is `Σ a_s v_s / sqrt(d)`.
    #[allow(clippy::too_many_arguments)]
    pub fn local_attention(
        &mut self,
        slots: &[Option<Var>],
        center: usize,
        radius: usize,
        wq: Var,
        wk: Var,
        wv: Var,
        min_mass: f64,
    ) -> AttentionOutput {
        assert!(center < slots.len(), "attention center outside the window");
        let center_var = slots[center].expect("attention center slot must not be padding");
        let (rows, cols) = {
            let w = self.value(wq);
            assert_eq!(w.shape().len(), 2, "attention projections must be 2-d");
            (w.shape()[0], w.shape()[1])
        };
        for w in [wk, wv] {
            assert_eq!(self.value(w).shape(), [rows, cols], "attention projections differ in shape");
        }
        let nonzero: Vec<Vec<usize>> = slots
            .iter()
            .map(|slot| match slot {
                Some(v) => {
                    let data = self.value(*v).data();
                    assert_eq!(data.len(), cols, "attention slot has dimension {}, expected {cols}", data.len());
                    data.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(j, _)| j).collect()
                }
                None => Vec::new(),
            })
            .collect();

        let q = sparse_matvec(self.value(wq).data(), rows, cols, self.value(center_var).data(), &nonzero[center]);
        let n = slots.len();
        let mut keys = vec![Vec::new(); n];
        let mut values = vec![Vec::new(); n];
        let mut gauss = vec![0.0; n];
        let mut scores = vec![0.0; n];
        for (s, slot) in slots.iter().enumerate() {
            let Some(v) = slot else { continue };
            let u = self.value(*v).data();
            keys[s] = sparse_matvec(self.value(wk).data(), rows, cols, u, &nonzero[s]);
            values[s] = sparse_matvec(self.value(wv).data(), rows, cols, u, &nonzero[s]);
            gauss[s] = gaussian_factor(s, center, radius);
            scores[s] = dot(&q, &keys[s]) * gauss[s];
        }
        let total: f64 = scores.iter().sum();
        let mass: f64 = scores.iter().map(|s| s.abs()).sum();
        let live = slots.iter().filter(|s| s.is_some()).count() as f64;
        let fallback = total <= min_mass * mass;
        let weights: Vec<f64> = slots
            .iter()
            .zip(&scores)
            .map(|(slot, &sc)| match (slot, fallback) {
                (None, _) => 0.0,
                (Some(_), true) => 1.0 / live,
                (Some(_), false) => sc / total,
            })
            .collect();
        let out_scale = 1.0 / (cols as f64).sqrt();
        let mut context = vec![0.0; rows];
        for (a, v) in weights.iter().zip(&values) {
            if *a != 0.0 {
                for (c, x) in context.iter_mut().zip(v) {
                    *c += a * x;
                }
            }
        }
        context.iter_mut().for_each(|c| *c *= out_scale);

        let rg = [wq, wk, wv].iter().any(|&w| self.rg(w)) || slots.iter().flatten().any(|&v| self.rg(v));
        let cache = AttentionCache {
            slots: slots.to_vec(),
            center,
            wq,
            wk,
            wv,
            nonzero,
            q,
            keys,
            values,
            gauss: gauss.clone(),
            weights: weights.clone(),
            total,
            fallback,
            out_scale,
        };
        let context = self.push(Tensor::vector(context), Op::Attention(Box::new(cache)), rg);
        AttentionOutput {
            context,
            weights,
            gaussian: gauss,
            fallback,
        }
    }

    fn map(&self, x: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let xs = self.value(x);
        Tensor::from_vec(xs.shape(), xs.data().iter().map(|&a| f(a)).collect())
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(id) => match out.entries.iter_mut().find(|(p, _)| p == id) {
                    Some((_, acc)) => add_into(acc, &g),
                    None => out.entries.push((*id, g)),
                },
                Op::Linear { x, w, b } => {
                    let (xs, ws) = (self.value(*x).data(), self.value(*w));
                    let n = ws.shape()[1];
                    if self.rg(*x) {
                        let mut dx = vec![0.0; n];
                        for (row, gy) in ws.data().chunks_exact(n).zip(&g) {
                            for (d, wv) in dx.iter_mut().zip(row) {
                                *d += gy * wv;
                            }
                        }
                        accumulate(&mut grads, *x, dx);
                    }
                    if self.rg(*w) {
                        let mut dw = vec![0.0; ws.len()];
                        for (row, gy) in dw.chunks_exact_mut(n).zip(&g) {
                            for (d, xv) in row.iter_mut().zip(xs) {
                                *d = gy * xv;
                            }
                        }
                        accumulate(&mut grads, *w, dw);
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                }
                Op::ConvMaxPool {
                    x,
                    kernels,
                    bias,
                    width,
                    argmax,
                } => {
                    let (xs, ks) = (self.value(*x).data(), self.value(*kernels).data());
                    let h = *width;
                    let mut dx = self.rg(*x).then(|| vec![0.0; xs.len()]);
                    let mut dk = self.rg(*kernels).then(|| vec![0.0; ks.len()]);
                    let mut db = self.rg(*bias).then(|| vec![0.0; argmax.len()]);
                    for (j, (pos, gy)) in argmax.iter().zip(&g).enumerate() {
                        let Some(t) = *pos else { continue };
                        if let Some(dk) = dk.as_mut() {
                            for q in 0..h {
                                dk[j * h + q] += gy * xs[t + q];
                            }
                        }
                        if let Some(dx) = dx.as_mut() {
                            for q in 0..h {
                                dx[t + q] += gy * ks[j * h + q];
                            }
                        }
                        if let Some(db) = db.as_mut() {
                            db[j] += gy;
                        }
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut grads, *x, dx);
                    }
                    if let Some(dk) = dk {
                        accumulate(&mut grads, *kernels, dk);
                    }
                    if let Some(db) = db {
                        accumulate(&mut grads, *bias, db);
                    }
                }
                Op::Relu(x) => {
                    let xs = self.value(*x).data();
                    let dx = g.iter().zip(xs).map(|(gy, a)| if *a > 0.0 { *gy } else { 0.0 }).collect();
                    accumulate(&mut grads, *x, dx);
                }
                Op::Softsign(x) => {
                    let xs = self.value(*x).data();
                    let dx = g
                        .iter()
                        .zip(xs)
                        .map(|(gy, a)| {
                            let d = 1.0 + a.abs();
                            gy / (d * d)
                        })
                        .collect();
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sigmoid(x) => {
                    let ys = node.value.data();
                    let dx = g.iter().zip(ys).map(|(gy, y)| gy * y * (1.0 - y)).collect();
                    accumulate(&mut grads, *x, dx);
                }
                Op::Softmax(x) => {
                    let ys = node.value.data();
                    let last = *node.value.shape().last().unwrap();
                    let mut dx = vec![0.0; ys.len()];
                    for ((drow, yrow), grow) in dx.chunks_exact_mut(last).zip(ys.chunks_exact(last)).zip(g.chunks_exact(last)) {
                        let inner = dot(yrow, grow);
                        for ((d, y), gy) in drow.iter_mut().zip(yrow).zip(grow) {
                            *d = y * (gy - inner);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Dropout { x, mask } => {
                    let dx = g.iter().zip(mask).map(|(gy, m)| gy * m).collect();
                    accumulate(&mut grads, *x, dx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        if self.rg(p) {
                            accumulate(&mut grads, p, g[offset..offset + len].to_vec());
                        }
                        offset += len;
                    }
                }
                Op::WeightedSum { x, coeffs } => {
                    let dx = coeffs.iter().map(|c| c * g[0]).collect();
                    accumulate(&mut grads, *x, dx);
                }
                Op::SoftmaxCrossEntropy { logits, label, probs } => {
                    let mut dx: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                    // The clamp flattens the loss once p[label] hits the floor.
                    if probs[*label] > PROB_FLOOR {
                        dx[*label] -= g[0];
                    } else {
                        dx.fill(0.0);
                    }
                    accumulate(&mut grads, *logits, dx);
                }
                Op::CrossEntropy { probs, label } => {
                    let p = self.value(*probs).data();
                    let mut dx = vec![0.0; p.len()];
                    if p[*label] > PROB_FLOOR {
                        dx[*label] = -g[0] / p[*label];
                    }
                    accumulate(&mut grads, *probs, dx);
                }
                Op::SigmoidBce { logit, target, p } => {
                    accumulate(&mut grads, *logit, vec![(p - target) * g[0]]);
                }
                Op::Attention(cache) => self.attention_backward(cache, &g, &mut grads),
            }
        }
        out
    }

    fn attention_backward(&self, c: &AttentionCache, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let rows = c.q.len();
        let cols = self.value(c.wq).shape()[1];
        let n = c.slots.len();
        // d context / d (a_s v_s)
        let gs: Vec<f64> = g.iter().map(|x| x * c.out_scale).collect();

        let mut d_scores = vec![0.0; n];
        if !c.fallback {
            let da: Vec<f64> = (0..n)
                .map(|s| if c.slots[s].is_some() { dot(&c.values[s], &gs) } else { 0.0 })
                .collect();
            let weighted: f64 = da.iter().zip(&c.weights).map(|(d, a)| d * a).sum();
            for s in 0..n {
                if c.slots[s].is_some() {
                    d_scores[s] = (da[s] - weighted) / c.total;
                }
            }
        }

        let mut dq = vec![0.0; rows];
        let mut dkeys = vec![Vec::new(); n];
        let mut dvals = vec![Vec::new(); n];
        for s in 0..n {
            if c.slots[s].is_none() {
                continue;
            }
            let coef = d_scores[s] * c.gauss[s];
            for (d, k) in dq.iter_mut().zip(&c.keys[s]) {
                *d += coef * k;
            }
            dkeys[s] = c.q.iter().map(|q| coef * q).collect();
            dvals[s] = gs.iter().map(|x| x * c.weights[s]).collect();
        }

        let center = c.slots[c.center].unwrap();
        if self.rg(c.wq) {
            let mut dw = vec![0.0; rows * cols];
            sparse_outer_add(&mut dw, cols, &dq, self.value(center).data(), &c.nonzero[c.center]);
            accumulate(grads, c.wq, dw);
        }
        for (w, dproj) in [(c.wk, &dkeys), (c.wv, &dvals)] {
            if !self.rg(w) {
                continue;
            }
            let mut dw = vec![0.0; rows * cols];
            for s in 0..n {
                if let Some(v) = c.slots[s] {
                    sparse_outer_add(&mut dw, cols, &dproj[s], self.value(v).data(), &c.nonzero[s]);
                }
            }
            accumulate(grads, w, dw);
        }
        // Inputs only carry gradient when they were produced by trainable ops.
        for s in 0..n {
            let Some(v) = c.slots[s] else { continue };
            if !self.rg(v) {
                continue;
            }
            let mut du = vec![0.0; cols];
            add_transposed(&mut du, self.value(c.wk).data(), cols, &dkeys[s]);
            add_transposed(&mut du, self.value(c.wv).data(), cols, &dvals[s]);
            if s == c.center {
                add_transposed(&mut du, self.value(c.wq).data(), cols, &dq);
            }
            accumulate(grads, v, du);
        }
    }
}

const PROB_FLOOR: f64 = 1e-12;

pub(crate) fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// `exp(-(s - c)^2 / (2 r^2))`, exactly 1 at the center.
pub(crate) fn gaussian_factor(s: usize, center: usize, radius: usize) -> f64 {
    if s == center {
        return 1.0;
    }
    let dist = s.abs_diff(center) as f64;
    let r = radius.max(1) as f64;
    (-(dist * dist) / (2.0 * r * r)).exp()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut grads[v.0] {
        Some(acc) => add_into(acc, &g),
        slot @ None => *slot = Some(g),
    }
}

fn sparse_matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], nz: &[usize]) -> Vec<f64> {
    (0..rows)
        .map(|r| {
            let row = &w[r * cols..(r + 1) * cols];
            nz.iter().map(|&j| row[j] * x[j]).sum()
        })
        .collect()
}

fn sparse_outer_add(dw: &mut [f64], cols: usize, left: &[f64], x: &[f64], nz: &[usize]) {
    for (r, l) in left.iter().enumerate() {
        if *l == 0.0 {
            continue;
        }
        let row = &mut dw[r * cols..(r + 1) * cols];
        for &j in nz {
            row[j] += l * x[j];
        }
    }
}

fn add_transposed(out: &mut [f64], w: &[f64], cols: usize, left: &[f64]) {
    for (r, l) in left.iter().enumerate() {
        for (o, wv) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += l * wv;
        }
    }
}
