//! Reverse-mode differentiation over a recorded sequence of matrix ops.
//!
//! Every op appends a node holding its output value and whatever the
//! backward rule needs. Nodes only reference earlier nodes, so a single
//! reverse sweep visits each node once and accumulates gradients additively
//! into its inputs.

use rand::Rng;

use super::tensor::{matmul, Mat, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Gelu,
    Relu,
    Silu,
}

impl Activation {
    fn apply<F: Real>(self, x: F) -> F {
        match self {
            Activation::Gelu => {
                let half = F::from_f64_lossy(0.5);
                half * x * (F::one() + (x * F::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2)).erf())
            }
            Activation::Relu => x.max(F::zero()),
            Activation::Silu => x / (F::one() + (-x).exp()),
        }
    }

    fn derivative<F: Real>(self, x: F) -> F {
        match self {
            Activation::Gelu => {
                let half = F::from_f64_lossy(0.5);
                let cdf = half * (F::one() + (x * F::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2)).erf());
                let pdf = (-half * x * x).exp() * F::from_f64_lossy(0.398_942_280_401_432_7);
                cdf + x * pdf
            }
            Activation::Relu => {
                if x > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Silu => {
                let s = F::one() / (F::one() + (-x).exp());
                s * (F::one() + x * (F::one() - s))
            }
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op<F> {
    Leaf,
    Param(usize),
    /// `y = x·Wᵀ + b`, `W` is `out × in`.
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    Add(NodeId, NodeId),
    /// Adds a constant `seq × cols` block to every segment of `seq` rows.
    AddSegmentConst { x: NodeId },
    Act { x: NodeId, kind: Activation },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Mat<F>, rstd: Vec<F> },
    ConcatCols(NodeId, NodeId),
    RepeatRows { x: NodeId, times: usize },
    /// Multi-head softmax attention over segments of `seq` rows.
    Attention { q: NodeId, k: NodeId, v: NodeId, heads: usize, seq: usize, probs: Vec<F> },
    Dropout { x: NodeId, mask: Vec<F> },
}

#[derive(Debug)]
struct Node<F> {
    value: Mat<F>,
    op: Op<F>,
}

#[derive(Debug)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
    param_count: usize,
    consumed: bool,
}

impl<F: Real> Tape<F> {
    pub fn new(param_count: usize) -> Self {
        Tape {
            nodes: Vec::new(),
            param_count,
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Mat<F> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Mat<F>, op: Op<F>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Mat<F>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, index: usize, value: &Mat<F>) -> NodeId {
        assert!(index < self.param_count);
        self.push(value.clone(), Op::Param(index))
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> NodeId {
        let xv = self.value(x);
        let wv = self.value(w);
        assert_eq!(xv.cols, wv.cols, "linear input width");
        let mut y = Mat::zeros(xv.rows, wv.rows);
        if let Some(b) = b {
            let bv = self.value(b);
            assert_eq!(bv.len(), wv.rows, "linear bias width");
            for r in 0..y.rows {
                y.data[r * y.cols..(r + 1) * y.cols].copy_from_slice(&bv.data);
            }
        }
        matmul(xv, false, wv, true, &mut y, b.is_some());
        self.push(y, Op::Linear { x, w, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut y = self.value(a).clone();
        assert_eq!(y.shape(), self.value(b).shape(), "add shapes");
        y.add_assign(self.value(b));
        self.push(y, Op::Add(a, b))
    }

    pub fn add_segment_const(&mut self, x: NodeId, c: &Mat<F>) -> NodeId {
        let mut y = self.value(x).clone();
        assert_eq!(y.cols, c.cols);
        assert_eq!(y.rows % c.rows, 0);
        for r in 0..y.rows {
            let cr = c.row(r % c.rows);
            for (v, a) in y.data[r * y.cols..(r + 1) * y.cols].iter_mut().zip(cr) {
                *v += *a;
            }
        }
        self.push(y, Op::AddSegmentConst { x })
    }

    pub fn activation(&mut self, x: NodeId, kind: Activation) -> NodeId {
        let y = self.value(x).map(|v| kind.apply(v));
        self.push(y, Op::Act { x, kind })
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let g = &self.value(gamma).data;
        let b = &self.value(beta).data;
        assert_eq!(g.len(), cols);
        let eps = F::from_f64_lossy(LAYER_NORM_EPS);
        let n = F::from_usize(cols).unwrap();
        let mut xhat = Mat::zeros(rows, cols);
        let mut rstd = Vec::with_capacity(rows);
        let mut y = Mat::zeros(rows, cols);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<F>() / n;
            let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<F>() / n;
            let rs = F::one() / (var + eps).sqrt();
            rstd.push(rs);
            for c in 0..cols {
                let h = (row[c] - mean) * rs;
                xhat.data[r * cols + c] = h;
                y.data[r * cols + c] = h * g[c] + b[c];
            }
        }
        self.push(y, Op::LayerNorm { x, gamma, beta, xhat, rstd })
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows, bv.rows, "concat rows");
        let cols = av.cols + bv.cols;
        let mut y = Mat::zeros(av.rows, cols);
        for r in 0..av.rows {
            y.data[r * cols..r * cols + av.cols].copy_from_slice(av.row(r));
            y.data[r * cols + av.cols..(r + 1) * cols].copy_from_slice(bv.row(r));
        }
        self.push(y, Op::ConcatCols(a, b))
    }

    /// Row `i` of `x` becomes rows `i·times .. (i+1)·times`.
    pub fn repeat_rows(&mut self, x: NodeId, times: usize) -> NodeId {
        let xv = self.value(x);
        let mut y = Mat::zeros(xv.rows * times, xv.cols);
        for r in 0..xv.rows {
            for k in 0..times {
                let o = (r * times + k) * xv.cols;
                y.data[o..o + xv.cols].copy_from_slice(xv.row(r));
            }
        }
        self.push(y, Op::RepeatRows { x, times })
    }

    /// Full (unmasked) multi-head attention; rows are grouped in segments of
    /// `seq` tokens belonging to one sample.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize, seq: usize) -> NodeId {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (rows, d) = qv.shape();
        assert_eq!(kv.shape(), (rows, d));
        assert_eq!(vv.shape(), (rows, d));
        assert_eq!(d % heads, 0);
        assert_eq!(rows % seq, 0);
        let dh = d / heads;
        let samples = rows / seq;
        let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
        let mut probs = vec![F::zero(); samples * heads * seq * seq];
        let mut out: Mat<F> = Mat::zeros(rows, d);
        for s in 0..samples {
            for h in 0..heads {
                let base = (s * heads + h) * seq * seq;
                let p = &mut probs[base..base + seq * seq];
                let off = s * seq * d + h * dh;
                // SAFETY: sub-block views inside the q/k/v/out buffers.
                unsafe {
                    F::gemm(
                        seq,
                        dh,
                        seq,
                        scale,
                        qv.data.as_ptr().add(off),
                        d as isize,
                        1,
                        kv.data.as_ptr().add(off),
                        1,
                        d as isize,
                        F::zero(),
                        p.as_mut_ptr(),
                        seq as isize,
                        1,
                    );
                }
                for row in p.chunks_exact_mut(seq) {
                    let m = row.iter().copied().fold(F::neg_infinity(), F::max);
                    let mut z = F::zero();
                    for v in row.iter_mut() {
                        *v = (*v - m).exp();
                        z += *v;
                    }
                    for v in row.iter_mut() {
                        *v = *v / z;
                    }
                }
                unsafe {
                    F::gemm(
                        seq,
                        seq,
                        dh,
                        F::one(),
                        p.as_ptr(),
                        seq as isize,
                        1,
                        vv.data.as_ptr().add(off),
                        d as isize,
                        1,
                        F::zero(),
                        out.data.as_mut_ptr().add(off),
                        d as isize,
                        1,
                    );
                }
            }
        }
        self.push(out, Op::Attention { q, k, v, heads, seq, probs })
    }

    /// Inverted dropout with keep probability `1 − p`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: NodeId, p: f64, rng: &mut R) -> NodeId {
        if p <= 0.0 {
            return x;
        }
        let keep = F::from_f64_lossy(1.0 / (1.0 - p));
        let xv = self.value(x);
        let mask: Vec<F> = (0..xv.len())
            .map(|_| if rng.random::<f64>() < p { F::zero() } else { keep })
            .collect();
        let mut y = xv.clone();
        for (v, m) in y.data.iter_mut().zip(&mask) {
            *v *= *m;
        }
        self.push(y, Op::Dropout { x, mask })
    }

    /// Reverse sweep from `output` seeded with `grad`. Returns one gradient
    /// per parameter slot (zeros for parameters not on any path). The tape
    /// can only be differentiated once.
    pub fn backward(&mut self, output: NodeId, grad: Mat<F>) -> Result<Vec<Option<Mat<F>>>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        self.consumed = true;
        if grad.shape() != self.value(output).shape() {
            return Err(Error::shape(format!(
                "output gradient {:?} for output {:?}",
                grad.shape(),
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Mat<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut params: Vec<Option<Mat<F>>> = (0..self.param_count).map(|_| None).collect();
        grads[output.0] = Some(grad);

        fn acc<F: Real>(grads: &mut [Option<Mat<F>>], id: NodeId, g: Mat<F>) {
            match &mut grads[id.0] {
                Some(e) => e.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=output.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => match &mut params[*p] {
                    Some(e) => e.add_assign(&gy),
                    slot @ None => *slot = Some(gy),
                },
                Op::Linear { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    let mut gx = Mat::zeros(xv.rows, xv.cols);
                    matmul(&gy, false, wv, false, &mut gx, false);
                    let mut gw = Mat::zeros(wv.rows, wv.cols);
                    matmul(&gy, true, xv, false, &mut gw, false);
                    if let Some(b) = b {
                        let mut gb = Mat::zeros(1, gy.cols);
                        for r in 0..gy.rows {
                            for (a, v) in gb.data.iter_mut().zip(gy.row(r)) {
                                *a += *v;
                            }
                        }
                        acc(&mut grads, *b, gb);
                    }
                    acc(&mut grads, *w, gw);
                    acc(&mut grads, *x, gx);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, gy.clone());
                    acc(&mut grads, *a, gy);
                }
                Op::AddSegmentConst { x } => acc(&mut grads, *x, gy),
                Op::Act { x, kind } => {
                    let xv = &self.nodes[x.0].value;
                    let mut gx = gy;
                    for (g, v) in gx.data.iter_mut().zip(&xv.data) {
                        *g *= kind.derivative(*v);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let g = &self.nodes[gamma.0].value.data;
                    let (rows, cols) = xhat.shape();
                    let n = F::from_usize(cols).unwrap();
                    let mut gx = Mat::zeros(rows, cols);
                    let mut gg = Mat::zeros(1, cols);
                    let mut gb = Mat::zeros(1, cols);
                    for r in 0..rows {
                        let gyr = gy.row(r);
                        let xh = xhat.row(r);
                        let mut mean_g = F::zero();
                        let mut mean_gx = F::zero();
                        for c in 0..cols {
                            let gh = gyr[c] * g[c];
                            mean_g += gh;
                            mean_gx += gh * xh[c];
                            gg.data[c] += gyr[c] * xh[c];
                            gb.data[c] += gyr[c];
                        }
                        mean_g = mean_g / n;
                        mean_gx = mean_gx / n;
                        for c in 0..cols {
                            let gh = gyr[c] * g[c];
                            gx.data[r * cols + c] = rstd[r] * (gh - mean_g - xh[c] * mean_gx);
                        }
                    }
                    acc(&mut grads, *beta, gb);
                    acc(&mut grads, *gamma, gg);
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatCols(a, b) => {
                    let ac = self.nodes[a.0].value.cols;
                    let bc = self.nodes[b.0].value.cols;
                    let mut ga = Mat::zeros(gy.rows, ac);
                    let mut gb = Mat::zeros(gy.rows, bc);
                    for r in 0..gy.rows {
                        let row = gy.row(r);
                        ga.data[r * ac..(r + 1) * ac].copy_from_slice(&row[..ac]);
                        gb.data[r * bc..(r + 1) * bc].copy_from_slice(&row[ac..]);
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, ga);
                }
                Op::RepeatRows { x, times } => {
                    let xv = &self.nodes[x.0].value;
                    let mut gx = Mat::zeros(xv.rows, xv.cols);
                    for r in 0..xv.rows {
                        for k in 0..*times {
                            let src = gy.row(r * times + k);
                            for (a, v) in gx.data[r * xv.cols..(r + 1) * xv.cols].iter_mut().zip(src) {
                                *a += *v;
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Attention { q, k, v, heads, seq, probs } => {
                    let (qv, kv, vv) = (&self.nodes[q.0].value, &self.nodes[k.0].value, &self.nodes[v.0].value);
                    let (rows, d) = qv.shape();
                    let (heads, seq) = (*heads, *seq);
                    let dh = d / heads;
                    let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
                    let mut gq: Mat<F> = Mat::zeros(rows, d);
                    let mut gk: Mat<F> = Mat::zeros(rows, d);
                    let mut gv: Mat<F> = Mat::zeros(rows, d);
                    let mut gp = vec![F::zero(); seq * seq];
                    for s in 0..rows / seq {
                        for h in 0..heads {
                            let base = (s * heads + h) * seq * seq;
                            let p = &probs[base..base + seq * seq];
                            let off = s * seq * d + h * dh;
                            // SAFETY: sub-block views inside same-shaped buffers.
                            unsafe {
                                // gP = gO · Vᵀ
                                F::gemm(seq, dh, seq, F::one(), gy.data.as_ptr().add(off), d as isize, 1,
                                    vv.data.as_ptr().add(off), 1, d as isize, F::zero(), gp.as_mut_ptr(), seq as isize, 1);
                                // gV = Pᵀ · gO
                                F::gemm(seq, seq, dh, F::one(), p.as_ptr(), 1, seq as isize,
                                    gy.data.as_ptr().add(off), d as isize, 1, F::zero(), gv.data.as_mut_ptr().add(off), d as isize, 1);
                            }
                            // softmax backward, then the score scale
                            for (grow, prow) in gp.chunks_exact_mut(seq).zip(p.chunks_exact(seq)) {
                                let dotp: F = grow.iter().zip(prow).map(|(g, p)| *g * *p).sum();
                                for (g, p) in grow.iter_mut().zip(prow) {
                                    *g = *p * (*g - dotp) * scale;
                                }
                            }
                            unsafe {
                                // gQ = gS · K
                                F::gemm(seq, seq, dh, F::one(), gp.as_ptr(), seq as isize, 1,
                                    kv.data.as_ptr().add(off), d as isize, 1, F::zero(), gq.data.as_mut_ptr().add(off), d as isize, 1);
                                // gK = gSᵀ · Q
                                F::gemm(seq, seq, dh, F::one(), gp.as_ptr(), 1, seq as isize,
                                    qv.data.as_ptr().add(off), d as isize, 1, F::zero(), gk.data.as_mut_ptr().add(off), d as isize, 1);
                            }
                        }
                    }
                    let (q, k, v) = (*q, *k, *v);
                    acc(&mut grads, v, gv);
                    acc(&mut grads, k, gk);
                    acc(&mut grads, q, gq);
                }
                Op::Dropout { x, mask } => {
                    let mut gx = gy;
                    for (g, m) in gx.data.iter_mut().zip(mask) {
                        *g *= *m;
                    }
                    acc(&mut grads, *x, gx);
                }
            }
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Max relative error of analytic vs central-difference gradients of
    /// `Σ G ⊙ y` over every parameter entry.
    fn grad_check(params: &[Mat<f64>], build: &dyn Fn(&mut Tape<f64>, &[Mat<f64>]) -> NodeId, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new(params.len());
        let out = build(&mut tape, params);
        let shape = tape.value(out).shape();
        let g = rand_mat(&mut rng, shape.0, shape.1);
        let grads = tape.backward(out, g.clone()).unwrap();
        let eval = |ps: &[Mat<f64>]| -> f64 {
            let mut t = Tape::new(ps.len());
            let o = build(&mut t, ps);
            t.value(o).data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (pi, p) in params.iter().enumerate() {
            for e in 0..p.len() {
                let mut plus = params.to_vec();
                plus[pi].data[e] += h;
                let mut minus = params.to_vec();
                minus[pi].data[e] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let an = grads[pi].as_ref().map_or(0.0, |m| m.data[e]);
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-2);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn linear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ps = vec![rand_mat(&mut rng, 5, 4), rand_mat(&mut rng, 3, 4), rand_mat(&mut rng, 1, 3)];
        let err = grad_check(&ps, &|t, p| {
            let x = t.param(0, &p[0]);
            let w = t.param(1, &p[1]);
            let b = t.param(2, &p[2]);
            t.linear(x, w, Some(b))
        }, 2);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn activation_gradients() {
        for kind in [Activation::Gelu, Activation::Silu, Activation::Relu] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let ps = vec![rand_mat(&mut rng, 4, 6).map(|v| 3.0 * v)];
            let err = grad_check(&ps, &|t, p| {
                let x = t.param(0, &p[0]);
                t.activation(x, kind)
            }, 4);
            assert!(err < 1e-6, "{kind:?}: {err}");
        }
    }

    #[test]
    fn layer_norm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = vec![rand_mat(&mut rng, 6, 8), rand_mat(&mut rng, 1, 8), rand_mat(&mut rng, 1, 8)];
        let err = grad_check(&ps, &|t, p| {
            let x = t.param(0, &p[0]);
            let g = t.param(1, &p[1]);
            let b = t.param(2, &p[2]);
            t.layer_norm(x, g, b)
        }, 6);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn attention_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // 2 samples of 3 tokens, 2 heads of width 2
        let ps = vec![rand_mat(&mut rng, 6, 4), rand_mat(&mut rng, 6, 4), rand_mat(&mut rng, 6, 4)];
        let err = grad_check(&ps, &|t, p| {
            let q = t.param(0, &p[0]);
            let k = t.param(1, &p[1]);
            let v = t.param(2, &p[2]);
            t.attention(q, k, v, 2, 3)
        }, 8);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn shape_ops_and_fan_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ps = vec![rand_mat(&mut rng, 2, 3), rand_mat(&mut rng, 4, 2)];
        let pe = rand_mat(&mut rng, 2, 5);
        let err = grad_check(&ps, &|t, p| {
            let a = t.param(0, &p[0]);
            let b = t.param(1, &p[1]);
            let r = t.repeat_rows(a, 2);
            let c = t.concat_cols(r, b);
            let c = t.add_segment_const(c, &pe);
            // fan-out: c used twice
            let s = t.add(c, c);
            t.activation(s, Activation::Silu)
        }, 10);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn double_backward_is_rejected() {
        let mut t = Tape::<f64>::new(1);
        let p = Mat::from_vec(1, 2, vec![1.0, 2.0]);
        let x = t.param(0, &p);
        let y = t.activation(x, Activation::Gelu);
        t.backward(y, Mat::from_vec(1, 2, vec![1.0, 1.0])).unwrap();
        assert!(matches!(t.backward(y, Mat::from_vec(1, 2, vec![1.0, 1.0])), Err(Error::TapeConsumed)));
    }

    #[test]
    fn unused_parameter_has_no_gradient() {
        let mut t = Tape::<f64>::new(2);
        let a = t.param(0, &Mat::from_vec(1, 1, vec![2.0]));
        let _b = t.param(1, &Mat::from_vec(1, 1, vec![3.0]));
        let y = t.activation(a, Activation::Relu);
        let g = t.backward(y, Mat::from_vec(1, 1, vec![1.0])).unwrap();
        assert_eq!(g[0].as_ref().unwrap().data, vec![1.0]);
        assert!(g[1].is_none());
    }
}
