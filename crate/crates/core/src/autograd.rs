//! Tape-based reverse-mode automatic differentiation over [`Tensor`].
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Calling
//! [`Graph::backward`] on a scalar walks the tape in reverse and accumulates
//! gradients for every node that depends on a leaf marked as trainable.

use std::cell::{Ref, RefCell};

use crate::tensor::{
    broadcast_shape, broadcast_to, broadcast_zip, conv2d_backward, conv2d_forward, gemm, reduce_to, ConvGeometry,
    Tensor,
};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    MatMul { a: usize, b: usize, batched: bool },
    Reshape(usize),
    Permute(usize, Vec<usize>),
    BroadcastTo(usize),
    Gelu(usize),
    Relu(usize),
    Exp(usize),
    Sqrt(usize),
    ClampMin(usize, f64),
    Softmax(usize),
    LayerNorm { x: usize, gamma: usize, beta: usize, xhat: Tensor, rstd: Vec<f64> },
    SumAxis(usize),
    MeanAxis(usize, usize),
    Conv2d { x: usize, w: usize, geom: ConvGeometry },
    CrossEntropy { logits: usize, labels: Vec<usize>, probs: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Operation tape. One graph per forward pass.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Tensor>>>,
}

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A trainable leaf: gradients flow to it.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf: no gradient is tracked.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, needs_grad });
        Var { graph: self, id: nodes.len() - 1 }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].needs_grad)
    }

    fn value_of(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Gradient of the last `backward` root with respect to `v`.
    pub fn grad(&self, v: Var<'_>) -> Option<Tensor> {
        self.grads.borrow().get(v.id).cloned().flatten()
    }

    /// Reverse sweep from a scalar `root`, seeding d(root)/d(root) = 1.
    pub fn backward(&self, root: Var<'_>) {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[root.id].value.len(), 1, "backward root must be a scalar");
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[root.id] = Some(Tensor::full(nodes[root.id].value.shape(), 1.0));

        fn acc(grads: &mut [Option<Tensor>], nodes: &[Node], id: usize, g: Tensor) {
            if !nodes[id].needs_grad {
                return;
            }
            match &mut grads[id] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let out = &node.value;
            match &node.op {
                Op::Leaf => {
                    // Leaf gradients are kept for retrieval; interior ones are dropped.
                    grads[id] = Some(g);
                }
                Op::Add(a, b) => {
                    let (sa, sb) = (nodes[*a].value.shape(), nodes[*b].value.shape());
                    acc(&mut grads, &nodes, *a, reduce_to(&g, sa));
                    acc(&mut grads, &nodes, *b, reduce_to(&g, sb));
                }
                Op::Sub(a, b) => {
                    let (sa, sb) = (nodes[*a].value.shape(), nodes[*b].value.shape());
                    acc(&mut grads, &nodes, *a, reduce_to(&g, sa));
                    acc(&mut grads, &nodes, *b, reduce_to(&g.map(|v| -v), sb));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].needs_grad {
                        acc(&mut grads, &nodes, *a, reduce_to(&broadcast_zip(&g, vb, |x, y| x * y), va.shape()));
                    }
                    if nodes[*b].needs_grad {
                        acc(&mut grads, &nodes, *b, reduce_to(&broadcast_zip(&g, va, |x, y| x * y), vb.shape()));
                    }
                }
                Op::Div(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].needs_grad {
                        acc(&mut grads, &nodes, *a, reduce_to(&broadcast_zip(&g, vb, |x, y| x / y), va.shape()));
                    }
                    if nodes[*b].needs_grad {
                        // d(a/b)/db = -out / b
                        let gob = broadcast_zip(&g, out, |x, y| x * y);
                        let t = broadcast_zip(&gob, vb, |x, y| -x / y);
                        acc(&mut grads, &nodes, *b, reduce_to(&t, vb.shape()));
                    }
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    acc(&mut grads, &nodes, *a, g.map(|v| v * s));
                }
                Op::MatMul { a, b, batched } => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    let (ga, gb) = matmul_backward(va, vb, &g, *batched, nodes[*a].needs_grad, nodes[*b].needs_grad);
                    if let Some(ga) = ga {
                        acc(&mut grads, &nodes, *a, ga);
                    }
                    if let Some(gb) = gb {
                        acc(&mut grads, &nodes, *b, gb);
                    }
                }
                Op::Reshape(a) => {
                    let s = nodes[*a].value.shape().to_vec();
                    acc(&mut grads, &nodes, *a, g.reshape(&s));
                }
                Op::Permute(a, perm) => {
                    let mut inv = vec![0; perm.len()];
                    for (i, &p) in perm.iter().enumerate() {
                        inv[p] = i;
                    }
                    acc(&mut grads, &nodes, *a, g.permute(&inv));
                }
                Op::BroadcastTo(a) => {
                    let s = nodes[*a].value.shape().to_vec();
                    acc(&mut grads, &nodes, *a, reduce_to(&g, &s));
                }
                Op::Gelu(a) => {
                    let x = &nodes[*a].value;
                    acc(&mut grads, &nodes, *a, broadcast_zip(&g, x, |gv, xv| gv * gelu_grad(xv)));
                }
                Op::Relu(a) => {
                    let x = &nodes[*a].value;
                    acc(&mut grads, &nodes, *a, broadcast_zip(&g, x, |gv, xv| if xv > 0.0 { gv } else { 0.0 }));
                }
                Op::Exp(a) => acc(&mut grads, &nodes, *a, broadcast_zip(&g, out, |gv, y| gv * y)),
                // Subgradient 0 at sqrt(0) keeps constant series finite.
                Op::Sqrt(a) => {
                    acc(&mut grads, &nodes, *a, broadcast_zip(&g, out, |gv, y| if y > 0.0 { gv * 0.5 / y } else { 0.0 }))
                }
                Op::ClampMin(a, lo) => {
                    let lo = *lo;
                    let x = &nodes[*a].value;
                    acc(&mut grads, &nodes, *a, broadcast_zip(&g, x, |gv, xv| if xv > lo { gv } else { 0.0 }));
                }
                Op::Softmax(a) => {
                    let n = *out.shape().last().unwrap();
                    let mut gx = Vec::with_capacity(out.len());
                    for (yr, gr) in out.data().chunks(n).zip(g.data().chunks(n)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        gx.extend(yr.iter().zip(gr).map(|(y, g)| y * (g - dot)));
                    }
                    acc(&mut grads, &nodes, *a, Tensor::new(out.shape().to_vec(), gx));
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let n = *out.shape().last().unwrap();
                    let gam = nodes[*gamma].value.data();
                    let mut gx = Vec::with_capacity(out.len());
                    let mut ggam = vec![0.0; n];
                    let mut gbet = vec![0.0; n];
                    for ((xr, gr), rs) in xhat.data().chunks(n).zip(g.data().chunks(n)).zip(rstd) {
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..n {
                            let gh = gr[j] * gam[j];
                            m1 += gh;
                            m2 += gh * xr[j];
                            ggam[j] += gr[j] * xr[j];
                            gbet[j] += gr[j];
                        }
                        m1 /= n as f64;
                        m2 /= n as f64;
                        gx.extend((0..n).map(|j| rs * (gr[j] * gam[j] - m1 - xr[j] * m2)));
                    }
                    acc(&mut grads, &nodes, *x, Tensor::new(out.shape().to_vec(), gx));
                    acc(&mut grads, &nodes, *gamma, Tensor::new(vec![n], ggam));
                    acc(&mut grads, &nodes, *beta, Tensor::new(vec![n], gbet));
                }
                Op::SumAxis(a) => {
                    let s = nodes[*a].value.shape().to_vec();
                    acc(&mut grads, &nodes, *a, broadcast_to(&g, &s));
                }
                Op::MeanAxis(a, axis) => {
                    let s = nodes[*a].value.shape().to_vec();
                    let k = s[*axis] as f64;
                    acc(&mut grads, &nodes, *a, broadcast_to(&g, &s).map(|v| v / k));
                }
                Op::Conv2d { x, w, geom } => {
                    let (vx, vw) = (&nodes[*x].value, &nodes[*w].value);
                    let (gx, gw) = conv2d_backward(vx.data(), vw.data(), g.data(), geom, nodes[*x].needs_grad);
                    if let Some(gx) = gx {
                        acc(&mut grads, &nodes, *x, Tensor::new(vx.shape().to_vec(), gx));
                    }
                    acc(&mut grads, &nodes, *w, Tensor::new(vw.shape().to_vec(), gw));
                }
                Op::CrossEntropy { logits, labels, probs } => {
                    let scale = g.item() / labels.len() as f64;
                    let c = probs.shape()[1];
                    let mut gl = probs.data().to_vec();
                    for (i, &l) in labels.iter().enumerate() {
                        gl[i * c + l] -= 1.0;
                    }
                    gl.iter_mut().for_each(|v| *v *= scale);
                    acc(&mut grads, &nodes, *logits, Tensor::new(probs.shape().to_vec(), gl));
                }
            }
        }
        *self.grads.borrow_mut() = grads;
    }
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn matmul_dims(a: &[usize], b: &[usize], batched: bool) -> (usize, usize, usize, usize) {
    let ra = a.len();
    let (m, k) = (a[ra - 2], a[ra - 1]);
    if batched {
        let n = b[b.len() - 1];
        let batch: usize = a[..ra - 2].iter().product();
        (batch, m, k, n)
    } else {
        let rows: usize = a[..ra - 1].iter().product();
        (1, rows, k, b[1])
    }
}

fn matmul_forward(a: &Tensor, b: &Tensor, batched: bool) -> Tensor {
    let (batch, m, k, n) = matmul_dims(a.shape(), b.shape(), batched);
    let mut out_shape = a.shape().to_vec();
    *out_shape.last_mut().unwrap() = n;
    let mut out = vec![0.0; batch * m * n];
    for bi in 0..batch {
        gemm(
            &a.data()[bi * m * k..(bi + 1) * m * k],
            &b.data()[bi * k * n..(bi + 1) * k * n],
            &mut out[bi * m * n..(bi + 1) * m * n],
            m,
            k,
            n,
            false,
            false,
            false,
        );
    }
    Tensor::new(out_shape, out)
}

fn matmul_backward(
    a: &Tensor,
    b: &Tensor,
    g: &Tensor,
    batched: bool,
    need_a: bool,
    need_b: bool,
) -> (Option<Tensor>, Option<Tensor>) {
    let (batch, m, k, n) = matmul_dims(a.shape(), b.shape(), batched);
    let ga = need_a.then(|| {
        let mut ga = vec![0.0; a.len()];
        for bi in 0..batch {
            gemm(
                &g.data()[bi * m * n..(bi + 1) * m * n],
                &b.data()[bi * k * n..(bi + 1) * k * n],
                &mut ga[bi * m * k..(bi + 1) * m * k],
                m,
                n,
                k,
                false,
                true,
                false,
            );
        }
        Tensor::new(a.shape().to_vec(), ga)
    });
    let gb = need_b.then(|| {
        let mut gb = vec![0.0; b.len()];
        for bi in 0..batch {
            gemm(
                &a.data()[bi * m * k..(bi + 1) * m * k],
                &g.data()[bi * m * n..(bi + 1) * m * n],
                &mut gb[bi * k * n..(bi + 1) * k * n],
                k,
                m,
                n,
                true,
                false,
                false,
            );
        }
        Tensor::new(b.shape().to_vec(), gb)
    });
    (ga, gb)
}

impl<'g> Var<'g> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn value(&self) -> Ref<'g, Tensor> {
        self.graph.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn unary(self, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'g> {
        let v = f(&self.value());
        let needs = self.graph.needs(&[self.id]);
        self.graph.push(v, op, needs)
    }

    fn binary(self, other: Var<'g>, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'g> {
        let v = broadcast_zip(&self.value(), &other.value(), f);
        let needs = self.graph.needs(&[self.id, other.id]);
        self.graph.push(v, op, needs)
    }

    pub fn add(self, o: Var<'g>) -> Var<'g> {
        self.binary(o, Op::Add(self.id, o.id), |a, b| a + b)
    }

    pub fn sub(self, o: Var<'g>) -> Var<'g> {
        self.binary(o, Op::Sub(self.id, o.id), |a, b| a - b)
    }

    pub fn mul(self, o: Var<'g>) -> Var<'g> {
        self.binary(o, Op::Mul(self.id, o.id), |a, b| a * b)
    }

    pub fn div(self, o: Var<'g>) -> Var<'g> {
        self.binary(o, Op::Div(self.id, o.id), |a, b| a / b)
    }

    pub fn scale(self, s: f64) -> Var<'g> {
        self.unary(Op::Scale(self.id, s), |t| t.map(|v| v * s))
    }

    /// `[.., m, k] × [k, n]` against a 2-D right operand.
    pub fn matmul(self, w: Var<'g>) -> Var<'g> {
        let (sa, sb) = (self.shape(), w.shape());
        assert_eq!(sb.len(), 2, "matmul right operand must be 2-D, got {sb:?}");
        assert_eq!(sa[sa.len() - 1], sb[0], "matmul inner dims {sa:?} × {sb:?}");
        let v = matmul_forward(&self.value(), &w.value(), false);
        let needs = self.graph.needs(&[self.id, w.id]);
        self.graph.push(v, Op::MatMul { a: self.id, b: w.id, batched: false }, needs)
    }

    /// Batched `[.., m, k] × [.., k, n]` with identical leading dims.
    pub fn bmm(self, o: Var<'g>) -> Var<'g> {
        let (sa, sb) = (self.shape(), o.shape());
        assert_eq!(sa.len(), sb.len());
        let r = sa.len();
        assert_eq!(sa[..r - 2], sb[..r - 2], "bmm batch dims {sa:?} × {sb:?}");
        assert_eq!(sa[r - 1], sb[r - 2], "bmm inner dims {sa:?} × {sb:?}");
        let v = matmul_forward(&self.value(), &o.value(), true);
        let needs = self.graph.needs(&[self.id, o.id]);
        self.graph.push(v, Op::MatMul { a: self.id, b: o.id, batched: true }, needs)
    }

    pub fn reshape(self, shape: &[usize]) -> Var<'g> {
        self.unary(Op::Reshape(self.id), |t| t.clone().reshape(shape))
    }

    pub fn permute(self, perm: &[usize]) -> Var<'g> {
        self.unary(Op::Permute(self.id, perm.to_vec()), |t| t.permute(perm))
    }

    pub fn transpose_last2(self) -> Var<'g> {
        let r = self.shape().len();
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 2, r - 1);
        self.permute(&perm)
    }

    pub fn broadcast_to(self, shape: &[usize]) -> Var<'g> {
        assert!(broadcast_shape(&self.shape(), shape).as_deref() == Some(shape));
        self.unary(Op::BroadcastTo(self.id), |t| broadcast_to(t, shape))
    }

    pub fn gelu(self) -> Var<'g> {
        self.unary(Op::Gelu(self.id), |t| t.map(gelu))
    }

    pub fn relu(self) -> Var<'g> {
        self.unary(Op::Relu(self.id), |t| t.map(|v| v.max(0.0)))
    }

    pub fn exp(self) -> Var<'g> {
        self.unary(Op::Exp(self.id), |t| t.map(f64::exp))
    }

    pub fn sqrt(self) -> Var<'g> {
        self.unary(Op::Sqrt(self.id), |t| t.map(f64::sqrt))
    }

    pub fn clamp_min(self, lo: f64) -> Var<'g> {
        self.unary(Op::ClampMin(self.id, lo), |t| t.map(|v| v.max(lo)))
    }

    /// Softmax over the last axis.
    pub fn softmax(self) -> Var<'g> {
        self.unary(Op::Softmax(self.id), |t| softmax_last(t))
    }

    /// Layer norm over the last axis with affine `gamma`, `beta` of that width.
    pub fn layer_norm(self, gamma: Var<'g>, beta: Var<'g>, eps: f64) -> Var<'g> {
        let (y, xhat, rstd) = {
            let x = self.value();
            let n = *x.shape().last().unwrap();
            let gam = gamma.value();
            let bet = beta.value();
            assert_eq!(gam.shape(), &[n]);
            let mut xhat = Vec::with_capacity(x.len());
            let mut y = Vec::with_capacity(x.len());
            let mut rstd = Vec::with_capacity(x.len() / n);
            for row in x.data().chunks(n) {
                let mean = row.iter().sum::<f64>() / n as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let rs = 1.0 / (var + eps).sqrt();
                rstd.push(rs);
                for j in 0..n {
                    let h = (row[j] - mean) * rs;
                    xhat.push(h);
                    y.push(h * gam.data()[j] + bet.data()[j]);
                }
            }
            let shape = x.shape().to_vec();
            (Tensor::new(shape.clone(), y), Tensor::new(shape, xhat), rstd)
        };
        let needs = self.graph.needs(&[self.id, gamma.id, beta.id]);
        self.graph.push(y, Op::LayerNorm { x: self.id, gamma: gamma.id, beta: beta.id, xhat, rstd }, needs)
    }

    /// Sum along `axis`, keeping it with extent 1.
    pub fn sum_axis(self, axis: usize) -> Var<'g> {
        self.unary(Op::SumAxis(self.id), |t| sum_axis_keep(t, axis))
    }

    /// Mean along `axis`, keeping it with extent 1.
    pub fn mean_axis(self, axis: usize) -> Var<'g> {
        self.unary(Op::MeanAxis(self.id, axis), |t| {
            let k = t.shape()[axis] as f64;
            sum_axis_keep(t, axis).map(|v| v / k)
        })
    }

    /// NHWC convolution with an `[kh, kw, cin/groups, cout]` kernel.
    pub fn conv2d(self, w: Var<'g>, stride: usize, pad: usize, groups: usize) -> Var<'g> {
        let (xs, ws) = (self.shape(), w.shape());
        assert_eq!(xs.len(), 4, "conv2d input must be NHWC");
        assert_eq!(ws.len(), 4, "conv2d kernel must be [kh, kw, cin/g, cout]");
        assert_eq!(xs[3], ws[2] * groups, "conv2d channel mismatch {xs:?} / {ws:?}");
        let geom = ConvGeometry {
            n: xs[0],
            h: xs[1],
            w: xs[2],
            cin: xs[3],
            kh: ws[0],
            kw: ws[1],
            cout: ws[3],
            stride,
            pad,
            groups,
        };
        let out = conv2d_forward(self.value().data(), w.value().data(), &geom);
        let v = Tensor::new(vec![geom.n, geom.out_h(), geom.out_w(), geom.cout], out);
        let needs = self.graph.needs(&[self.id, w.id]);
        self.graph.push(v, Op::Conv2d { x: self.id, w: w.id, geom }, needs)
    }

    /// Mean softmax cross-entropy of `[B, C]` logits against class indices.
    pub fn cross_entropy(self, labels: &[usize]) -> Var<'g> {
        let (loss, probs) = {
            let l = self.value();
            assert_eq!(l.rank(), 2);
            assert_eq!(l.shape()[0], labels.len());
            let c = l.shape()[1];
            let probs = softmax_last(&l);
            let loss = labels
                .iter()
                .enumerate()
                .map(|(i, &y)| {
                    let row = &l.data()[i * c..(i + 1) * c];
                    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
                    lse - row[y]
                })
                .sum::<f64>()
                / labels.len() as f64;
            (loss, probs)
        };
        let needs = self.graph.needs(&[self.id]);
        self.graph.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits: self.id, labels: labels.to_vec(), probs },
            needs,
        )
    }

    /// Mean over every element, as a scalar.
    pub fn mean_all(self) -> Var<'g> {
        let n = self.value().len();
        self.reshape(&[n]).mean_axis(0).reshape(&[])
    }
}

pub fn softmax_last(t: &Tensor) -> Tensor {
    let n = *t.shape().last().unwrap();
    let mut out = Vec::with_capacity(t.len());
    for row in t.data().chunks(n) {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut s = 0.0;
        for v in row {
            let e = (v - mx).exp();
            s += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|v| *v /= s);
    }
    Tensor::new(t.shape().to_vec(), out)
}

fn sum_axis_keep(t: &Tensor, axis: usize) -> Tensor {
    let s = t.shape();
    let outer: usize = s[..axis].iter().product();
    let k = s[axis];
    let inner: usize = s[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        for j in 0..k {
            let src = &t.data()[(o * k + j) * inner..(o * k + j + 1) * inner];
            for (d, v) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                *d += v;
            }
        }
    }
    let mut shape = s.to_vec();
    shape[axis] = 1;
    Tensor::new(shape, out)
}
