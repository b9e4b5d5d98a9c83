//! Tape-based reverse-mode automatic differentiation over dense vectors.
//!
//! Every node holds a value vector (scalars are length-1 vectors). A
//! forward pass records operations on the tape; [`Tape::backward`] walks
//! the record in reverse, accumulating gradients in a fixed order so the
//! result is bit-reproducible. The op set is exactly what the surrogate
//! model and the evidential loss need.

use crate::scalar::Scalar;
use crate::special::{digamma, sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    /// `y = W x`, `W` row-major `rows x cols`.
    MatVec { w: NodeId, x: NodeId, rows: usize, cols: usize },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Div { a: NodeId, b: NodeId },
    Neg { a: NodeId },
    /// Vector `a` scaled by scalar node `s`.
    Scale { a: NodeId, s: NodeId },
    Concat { parts: Vec<NodeId> },
    /// Elementwise sum of same-length vectors.
    SumVecs { parts: Vec<NodeId> },
    Relu { a: NodeId },
    LeakyRelu { a: NodeId, slope: T },
    Elu { a: NodeId, alpha: T },
    Softplus { a: NodeId },
    Ln { a: NodeId },
    Exp { a: NodeId },
    Abs { a: NodeId },
    LnGamma { a: NodeId },
    /// Joint softmax over a list of scalar logits; output has their length.
    Softmax { logits: Vec<NodeId> },
    /// Scalar extraction `y = a[i]`.
    Index { a: NodeId, i: usize },
    /// Scalar sum of all elements.
    SumElems { a: NodeId },
    Dot { a: NodeId, b: NodeId },
    /// Elementwise multiply by a constant (dropout masks, fixed weights).
    MulConst { a: NodeId, c: Vec<T> },
    ScaleConst { a: NodeId, c: T },
    AddConst { a: NodeId, c: T },
}

struct Node<T> {
    value: Vec<T>,
    op: Op<T>,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Vec<T>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: T) -> NodeId {
        self.leaf(vec![v])
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        &self.nodes[id.0].value
    }

    pub fn scalar_value(&self, id: NodeId) -> T {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[0]
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId, rows: usize, cols: usize) -> NodeId {
        assert_eq!(self.nodes[w.0].value.len(), rows * cols, "weight shape mismatch");
        assert_eq!(self.nodes[x.0].value.len(), cols, "input length mismatch");
        let mut y = vec![T::zero(); rows];
        {
            let (wv, xv) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
            for (r, slot) in y.iter_mut().enumerate() {
                let mut acc = T::zero();
                let base = r * cols;
                for c in 0..cols {
                    acc += wv[base + c] * xv[c];
                }
                *slot = acc;
            }
        }
        self.push(y, Op::MatVec { w, x, rows, cols })
    }

    fn zip(&mut self, a: NodeId, b: NodeId, f: impl Fn(T, T) -> T, op: Op<T>) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "elementwise length mismatch");
        let y: Vec<T> = av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect();
        self.push(y, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x / y, Op::Div { a, b })
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let y: Vec<T> = self.nodes[a.0].value.iter().map(|&x| -x).collect();
        self.push(y, Op::Neg { a })
    }

    pub fn scale(&mut self, a: NodeId, s: NodeId) -> NodeId {
        let sv = self.scalar_value(s);
        let y: Vec<T> = self.nodes[a.0].value.iter().map(|&x| x * sv).collect();
        self.push(y, Op::Scale { a, s })
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut y = Vec::new();
        for p in parts {
            y.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(y, Op::Concat { parts: parts.to_vec() })
    }

    pub fn sum_vecs(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let len = self.nodes[parts[0].0].value.len();
        let mut y = vec![T::zero(); len];
        for p in parts {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.len(), len);
            for (acc, &v) in y.iter_mut().zip(pv) {
                *acc += v;
            }
        }
        self.push(y, Op::SumVecs { parts: parts.to_vec() })
    }

    fn map(&mut self, a: NodeId, f: impl Fn(T) -> T, op: Op<T>) -> NodeId {
        let y: Vec<T> = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        self.push(y, op)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| x.max(T::zero()), Op::Relu { a })
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: T) -> NodeId {
        self.map(a, |x| if x > T::zero() { x } else { slope * x }, Op::LeakyRelu { a, slope })
    }

    pub fn elu(&mut self, a: NodeId, alpha: T) -> NodeId {
        self.map(
            a,
            |x| if x > T::zero() { x } else { alpha * (x.exp() - T::one()) },
            Op::Elu { a, alpha },
        )
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.map(a, softplus, Op::Softplus { a })
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| x.ln(), Op::Ln { a })
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| x.exp(), Op::Exp { a })
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| x.abs(), Op::Abs { a })
    }

    pub fn ln_gamma(&mut self, a: NodeId) -> NodeId {
        self.map(a, crate::special::ln_gamma, Op::LnGamma { a })
    }

    /// Softmax over scalar logits; the output vector carries one weight per
    /// logit, in input order.
    pub fn softmax(&mut self, logits: &[NodeId]) -> NodeId {
        assert!(!logits.is_empty());
        let vals: Vec<T> = logits.iter().map(|&l| self.scalar_value(l)).collect();
        let m = vals.iter().copied().fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
        let exps: Vec<T> = vals.iter().map(|&v| (v - m).exp()).collect();
        let total: T = exps.iter().copied().fold(T::zero(), |a, b| a + b);
        let y: Vec<T> = exps.iter().map(|&e| e / total).collect();
        self.push(y, Op::Softmax { logits: logits.to_vec() })
    }

    pub fn index(&mut self, a: NodeId, i: usize) -> NodeId {
        let v = self.nodes[a.0].value[i];
        self.push(vec![v], Op::Index { a, i })
    }

    pub fn sum_elems(&mut self, a: NodeId) -> NodeId {
        let s = self.nodes[a.0].value.iter().copied().fold(T::zero(), |acc, v| acc + v);
        self.push(vec![s], Op::SumElems { a })
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "dot length mismatch");
        let s = av.iter().zip(bv).map(|(&x, &y)| x * y).fold(T::zero(), |acc, v| acc + v);
        self.push(vec![s], Op::Dot { a, b })
    }

    pub fn mul_const(&mut self, a: NodeId, c: Vec<T>) -> NodeId {
        assert_eq!(self.nodes[a.0].value.len(), c.len());
        let y: Vec<T> = self.nodes[a.0].value.iter().zip(&c).map(|(&x, &m)| x * m).collect();
        self.push(y, Op::MulConst { a, c })
    }

    pub fn scale_const(&mut self, a: NodeId, c: T) -> NodeId {
        self.map(a, |x| x * c, Op::ScaleConst { a, c })
    }

    pub fn add_const(&mut self, a: NodeId, c: T) -> NodeId {
        self.map(a, |x| x + c, Op::AddConst { a, c })
    }

    /// Reverse pass from a scalar root. Returns one gradient vector per node.
    pub fn backward(&self, root: NodeId) -> Gradients<T> {
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward root must be scalar");
        let mut grads: Vec<Vec<T>> = self.nodes.iter().map(|n| vec![T::zero(); n.value.len()]).collect();
        grads[root.0][0] = T::one();
        for i in (0..=root.0).rev() {
            let dy = std::mem::take(&mut grads[i]);
            if dy.iter().all(|g| *g == T::zero()) {
                grads[i] = dy;
                continue;
            }
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatVec { w, x, rows, cols } => {
                    let xv = self.nodes[x.0].value.clone();
                    let wv = self.nodes[w.0].value.clone();
                    {
                        let gw = &mut grads[w.0];
                        for (r, &d) in dy.iter().enumerate() {
                            let base = r * cols;
                            for c in 0..*cols {
                                gw[base + c] += d * xv[c];
                            }
                        }
                    }
                    let gx = &mut grads[x.0];
                    for (r, &d) in dy.iter().enumerate() {
                        let base = r * cols;
                        for (c, g) in gx.iter_mut().enumerate() {
                            *g += wv[base + c] * d;
                        }
                    }
                    let _ = rows;
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads[a.0], &dy, T::one());
                    accumulate(&mut grads[b.0], &dy, T::one());
                }
                Op::Sub { a, b } => {
                    accumulate(&mut grads[a.0], &dy, T::one());
                    accumulate(&mut grads[b.0], &dy, -T::one());
                }
                Op::Mul { a, b } => {
                    let bv = self.nodes[b.0].value.clone();
                    let av = self.nodes[a.0].value.clone();
                    for (g, (&d, &v)) in grads[a.0].iter_mut().zip(dy.iter().zip(&bv)) {
                        *g += d * v;
                    }
                    for (g, (&d, &v)) in grads[b.0].iter_mut().zip(dy.iter().zip(&av)) {
                        *g += d * v;
                    }
                }
                Op::Div { a, b } => {
                    let av = self.nodes[a.0].value.clone();
                    let bv = self.nodes[b.0].value.clone();
                    for (g, (&d, &v)) in grads[a.0].iter_mut().zip(dy.iter().zip(&bv)) {
                        *g += d / v;
                    }
                    for (k, g) in grads[b.0].iter_mut().enumerate() {
                        *g -= dy[k] * av[k] / (bv[k] * bv[k]);
                    }
                }
                Op::Neg { a } => accumulate(&mut grads[a.0], &dy, -T::one()),
                Op::Scale { a, s } => {
                    let sv = self.nodes[s.0].value[0];
                    let av = self.nodes[a.0].value.clone();
                    accumulate(&mut grads[a.0], &dy, sv);
                    let mut acc = T::zero();
                    for (d, v) in dy.iter().zip(&av) {
                        acc += *d * *v;
                    }
                    grads[s.0][0] += acc;
                }
                Op::Concat { parts } => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        for (g, &d) in grads[p.0].iter_mut().zip(&dy[off..off + len]) {
                            *g += d;
                        }
                        off += len;
                    }
                }
                Op::SumVecs { parts } => {
                    for p in parts {
                        accumulate(&mut grads[p.0], &dy, T::one());
                    }
                }
                Op::Relu { a } => {
                    let av = self.nodes[a.0].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        if av[k] > T::zero() {
                            *g += dy[k];
                        }
                    }
                }
                Op::LeakyRelu { a, slope } => {
                    let av = self.nodes[a.0].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        *g += dy[k] * if av[k] > T::zero() { T::one() } else { *slope };
                    }
                }
                Op::Elu { a, alpha } => {
                    let av = self.nodes[a.0].value.clone();
                    let yv = self.nodes[i].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        let d = if av[k] > T::zero() { T::one() } else { yv[k] + *alpha };
                        *g += dy[k] * d;
                    }
                }
                Op::Softplus { a } => {
                    let av = self.nodes[a.0].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        *g += dy[k] * sigmoid(av[k]);
                    }
                }
                Op::Ln { a } => {
                    let av = self.nodes[a.0].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        *g += dy[k] / av[k];
                    }
                }
                Op::Exp { a } => {
                    let yv = self.nodes[i].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        *g += dy[k] * yv[k];
                    }
                }
                Op::Abs { a } => {
                    let av = self.nodes[a.0].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        let s = if av[k] > T::zero() {
                            T::one()
                        } else if av[k] < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        *g += dy[k] * s;
                    }
                }
                Op::LnGamma { a } => {
                    let av = self.nodes[a.0].value.clone();
                    for (k, g) in grads[a.0].iter_mut().enumerate() {
                        *g += dy[k] * digamma(av[k]);
                    }
                }
                Op::Softmax { logits } => {
                    let yv = self.nodes[i].value.clone();
                    let mut dot = T::zero();
                    for (d, y) in dy.iter().zip(&yv) {
                        dot += *d * *y;
                    }
                    for (k, l) in logits.iter().enumerate() {
                        grads[l.0][0] += yv[k] * (dy[k] - dot);
                    }
                }
                Op::Index { a, i: idx } => {
                    grads[a.0][*idx] += dy[0];
                }
                Op::SumElems { a } => {
                    for g in grads[a.0].iter_mut() {
                        *g += dy[0];
                    }
                }
                Op::Dot { a, b } => {
                    let av = self.nodes[a.0].value.clone();
                    let bv = self.nodes[b.0].value.clone();
                    for (g, &v) in grads[a.0].iter_mut().zip(&bv) {
                        *g += dy[0] * v;
                    }
                    for (g, &v) in grads[b.0].iter_mut().zip(&av) {
                        *g += dy[0] * v;
                    }
                }
                Op::MulConst { a, c } => {
                    for (g, (&d, &m)) in grads[a.0].iter_mut().zip(dy.iter().zip(c)) {
                        *g += d * m;
                    }
                }
                Op::ScaleConst { a, c } => accumulate(&mut grads[a.0], &dy, *c),
                Op::AddConst { a, .. } => accumulate(&mut grads[a.0], &dy, T::one()),
            }
            grads[i] = dy;
        }
        Gradients { grads }
    }
}

fn accumulate<T: Scalar>(dst: &mut [T], src: &[T], scale: T) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s * scale;
    }
}

pub struct Gradients<T> {
    grads: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: NodeId) -> &[T] {
        &self.grads[id.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite differences against the analytic gradient of an
    /// arbitrary tape program over a flat parameter vector.
    fn check_grad(build: impl Fn(&mut Tape<f64>, NodeId) -> NodeId, theta: &[f64], tol: f64) {
        let eval = |vals: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let p = tape.leaf(vals.to_vec());
            let out = build(&mut tape, p);
            tape.scalar_value(out)
        };
        let mut tape = Tape::new();
        let p = tape.leaf(theta.to_vec());
        let out = build(&mut tape, p);
        let grads = tape.backward(out);
        let analytic = grads.get(p).to_vec();
        for k in 0..theta.len() {
            let h = 1e-6 * theta[k].abs().max(1.0);
            let mut plus = theta.to_vec();
            plus[k] += h;
            let mut minus = theta.to_vec();
            minus[k] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            if (analytic[k] - fd).abs() < 1e-8 {
                continue;
            }
            let denom = analytic[k].abs().max(fd.abs());
            assert!(
                (analytic[k] - fd).abs() / denom < tol,
                "param {k}: analytic {} vs fd {fd}",
                analytic[k]
            );
        }
    }

    #[test]
    fn composite_program_gradient_matches_fd() {
        let theta: Vec<f64> = vec![
            0.3, -0.7, 0.2, 0.5, 0.11, -0.4, // w (2x3)
            0.05, -0.2, // b (2)
            0.9, -1.1, 0.4, // x (3)
            1.7, 2.4, // scalar tail params
        ];
        check_grad(
            |tape, p| {
                let mut idx = 0;
                let mut take = |tape: &mut Tape<f64>, n: usize| {
                    let parts: Vec<NodeId> = (0..n).map(|k| tape.index(p, idx + k)).collect();
                    idx += n;
                    tape.concat(&parts)
                };
                let w = take(tape, 6);
                let b = take(tape, 2);
                let x = take(tape, 3);
                let s1 = take(tape, 1);
                let s2 = take(tape, 1);
                let h = tape.matvec(w, x, 2, 3);
                let h = tape.add(h, b);
                let h = tape.elu(h, 1.0);
                let l0 = tape.index(h, 0);
                let l1 = tape.index(h, 1);
                let alpha = tape.softmax(&[l0, l1]);
                let a0 = tape.index(alpha, 0);
                let scaled = tape.scale(x, a0);
                let pooled = tape.sum_elems(scaled);
                let lg = tape.ln_gamma(s1);
                let sp = tape.softplus(s2);
                let prod = tape.mul(lg, sp);
                let both = tape.add(pooled, prod);
                let sq = tape.mul(both, both);
                let lky = tape.leaky_relu(sq, 0.2);
                let e = tape.exp(s1);
                let d = tape.div(lky, e);
                let abs = tape.abs(d);
                let shifted = tape.add_const(abs, 1.0);
                tape.ln(shifted)
            },
            &theta,
            1e-6,
        );
    }

    #[test]
    fn softmax_sums_to_one_and_grads_balance() {
        let mut tape = Tape::new();
        let a = tape.scalar(0.3);
        let b = tape.scalar(0.3);
        let c = tape.scalar(-1.0);
        let sm = tape.softmax(&[a, b, c]);
        let v = tape.value(sm).to_vec();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((v[0] - v[1]).abs() < 1e-15);
        // The softmax outputs sum to a constant, so logit gradients cancel.
        let total = tape.sum_elems(sm);
        let g = tape.backward(total);
        for n in [a, b, c] {
            assert!(g.get(n)[0].abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_softmax_is_one() {
        let mut tape = Tape::<f64>::new();
        let a = tape.scalar(3.7);
        let sm = tape.softmax(&[a]);
        assert_eq!(tape.value(sm), &[1.0]);
    }

    #[test]
    fn unused_branches_get_zero_gradient() {
        let mut tape = Tape::new();
        let a = tape.scalar(2.0);
        let b = tape.scalar(5.0);
        let y = tape.mul(a, a);
        let g = tape.backward(y);
        assert_eq!(g.get(a)[0], 4.0);
        assert_eq!(g.get(b)[0], 0.0);
    }
}
