use super::conv::{conv2d_output_size, conv2d_transpose_output_size, ConvGeom};
use super::{ParamId, ParamSet, Real, Result, Tensor, TensorError};
use std::collections::HashMap;

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Conv2d { x: usize, k: usize, b: usize, geom: ConvGeom },
    /// `geom` describes the forward convolution this op is the adjoint of.
    ConvTranspose { x: usize, k: usize, b: usize, geom: ConvGeom },
    Dense { x: usize, w: usize, b: usize, n: usize, m: usize },
    Relu(usize),
    LeakyRelu(usize, T),
    Sigmoid(usize),
    Concat { a: usize, b: usize, outer: usize, a_inner: usize, b_inner: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Affine(usize, T),
    Square(usize),
    Ln(usize),
    Clamp(usize, T, T),
    Sum(usize),
    Mean(usize),
    Reshape(usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Tape of recorded operations. Parents always precede children, so reverse
/// insertion order is a valid topological order for backward.
#[derive(Debug, Clone)]
pub struct Graph<T = f32> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    params: HashMap<ParamId, usize>,
    consumed: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), grads: Vec::new(), params: HashMap::new(), consumed: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite(name));
        }
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: usize) -> bool {
        self.nodes[v].requires_grad
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Result<Var> {
        self.push(t, Op::Leaf, false, "input")
    }

    pub fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Result<Var> {
        self.push(t, Op::Leaf, requires_grad, "leaf")
    }

    /// Register parameter `index` of `set`. Repeated calls return the same node.
    pub fn param(&mut self, set: &ParamSet<T>, index: usize) -> Var {
        let key = set.key(index);
        if let Some(&n) = self.params.get(&key) {
            return Var(n);
        }
        self.nodes.push(Node { value: set.value(index).clone(), op: Op::Leaf, requires_grad: true });
        let n = self.nodes.len() - 1;
        self.params.insert(key, n);
        Var(n)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass; `None` if the node was unreachable.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Copy of `v`'s value as a new constant (stops gradients).
    pub fn detach(&mut self, v: Var) -> Result<Var> {
        let t = self.value(v).clone();
        self.input(t)
    }

    pub fn conv2d(&mut self, x: Var, k: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ks, bs) = (self.value(x).shape(), self.value(k).shape(), self.value(b).shape());
        if xs.len() != 3 || ks.len() != 4 || ks[2] != ks[3] || ks[1] != xs[0] || bs != [ks[0]] {
            return Err(TensorError::ShapeMismatch(format!(
                "conv2d input {xs:?}, kernels {ks:?}, bias {bs:?}"
            )));
        }
        let (h_out, w_out) = match (
            conv2d_output_size(xs[1], ks[2], stride, pad),
            conv2d_output_size(xs[2], ks[3], stride, pad),
        ) {
            (Some(h), Some(w)) => (h, w),
            _ => {
                return Err(TensorError::ShapeMismatch(format!(
                    "kernel {} with padding {pad}, stride {stride} does not fit input {xs:?}",
                    ks[2]
                )))
            }
        };
        let geom = ConvGeom {
            c_in: xs[0],
            h_in: xs[1],
            w_in: xs[2],
            c_out: ks[0],
            h_out,
            w_out,
            k: ks[2],
            stride,
            pad,
        };
        let mut out = Tensor::zeros(&[geom.c_out, h_out, w_out]);
        geom.forward(self.value(x).data(), self.value(k).data(), out.data_mut());
        add_channel_bias(&mut out, self.value(b).data());
        let rg = self.rg(x.0) || self.rg(k.0) || self.rg(b.0);
        self.push(out, Op::Conv2d { x: x.0, k: k.0, b: b.0, geom }, rg, "conv2d")
    }

    /// Upsampling convolution, the adjoint of [`Graph::conv2d`] at the same
    /// stride and padding. Kernels are `[C_in, C_out, k, k]`; output size is
    /// `(H − 1)·stride − 2·pad + k`.
    pub fn conv2d_transpose(&mut self, x: Var, k: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ks, bs) = (self.value(x).shape(), self.value(k).shape(), self.value(b).shape());
        if xs.len() != 3 || ks.len() != 4 || ks[2] != ks[3] || ks[0] != xs[0] || bs != [ks[1]] {
            return Err(TensorError::ShapeMismatch(format!(
                "conv2d_transpose input {xs:?}, kernels {ks:?}, bias {bs:?}"
            )));
        }
        let (h_out, w_out) = match (
            conv2d_transpose_output_size(xs[1], ks[2], stride, pad),
            conv2d_transpose_output_size(xs[2], ks[3], stride, pad),
        ) {
            (Some(h), Some(w)) => (h, w),
            _ => return Err(TensorError::ShapeMismatch(format!("invalid transposed geometry for {xs:?}"))),
        };
        // the forward conv maps [C_out, h_out, w_out] -> [C_in, H, W]
        let geom = ConvGeom {
            c_in: ks[1],
            h_in: h_out,
            w_in: w_out,
            c_out: ks[0],
            h_out: xs[1],
            w_out: xs[2],
            k: ks[2],
            stride,
            pad,
        };
        let mut out = Tensor::zeros(&[geom.c_in, h_out, w_out]);
        geom.backward_input(self.value(x).data(), self.value(k).data(), out.data_mut());
        add_channel_bias(&mut out, self.value(b).data());
        let rg = self.rg(x.0) || self.rg(k.0) || self.rg(b.0);
        self.push(out, Op::ConvTranspose { x: x.0, k: k.0, b: b.0, geom }, rg, "conv2d_transpose")
    }

    /// `W·x + b` with `x` read as a flat vector.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xn, ws, bs) = (self.value(x).len(), self.value(w).shape(), self.value(b).shape());
        if ws.len() != 2 || ws[1] != xn || bs != [ws[0]] {
            return Err(TensorError::ShapeMismatch(format!(
                "dense input of {xn} values, weight {ws:?}, bias {bs:?}"
            )));
        }
        let (m, n) = (ws[0], ws[1]);
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let out: Vec<T> = (0..m)
            .map(|i| {
                let row = &wv[i * n..(i + 1) * n];
                row.iter().zip(xv).fold(bv[i], |acc, (a, b)| acc + *a * *b)
            })
            .collect();
        let rg = self.rg(x.0) || self.rg(w.0) || self.rg(b.0);
        self.push(Tensor::new(vec![m], out)?, Op::Dense { x: x.0, w: w.0, b: b.0, n, m }, rg, "dense")
    }

    fn unary(&mut self, x: Var, op: Op<T>, name: &'static str, f: impl Fn(T) -> T) -> Result<Var> {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| f(a)).collect())?;
        let rg = self.rg(x.0);
        self.push(out, op, rg, name)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Op::Relu(x.0), "relu", |a| if a > T::zero() { a } else { T::zero() })
    }

    pub fn leaky_relu(&mut self, x: Var, alpha: T) -> Result<Var> {
        self.unary(x, Op::LeakyRelu(x.0, alpha), "leaky_relu", move |a| if a > T::zero() { a } else { alpha * a })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Op::Sigmoid(x.0), "sigmoid", sigmoid)
    }

    /// `scale·x + shift`.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Result<Var> {
        self.unary(x, Op::Affine(x.0, scale), "affine", move |a| scale * a + shift)
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Op::Square(x.0), "square", |a| a * a)
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Op::Ln(x.0), "ln", |a| a.ln())
    }

    /// Clamp into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Result<Var> {
        self.unary(x, Op::Clamp(x.0, lo, hi), "clamp", move |a| a.max(lo).min(hi))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, name: &'static str, f: impl Fn(T, T) -> T) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(TensorError::ShapeMismatch(format!("{name}: {:?} vs {:?}", av.shape(), bv.shape())));
        }
        let out = Tensor::new(av.shape().to_vec(), av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect())?;
        let rg = self.rg(a.0) || self.rg(b.0);
        self.push(out, op, rg, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a.0, b.0), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a.0, b.0), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a.0, b.0), "mul", |x, y| x * y)
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape().to_vec(), self.value(b).shape().to_vec());
        let compatible = sa.len() == sb.len()
            && axis < sa.len()
            && sa.iter().zip(&sb).enumerate().all(|(i, (x, y))| i == axis || x == y);
        if !compatible {
            return Err(TensorError::ShapeMismatch(format!("concat on axis {axis}: {sa:?} vs {sb:?}")));
        }
        let outer: usize = sa[..axis].iter().product();
        let tail: usize = sa[axis + 1..].iter().product();
        let (a_inner, b_inner) = (sa[axis] * tail, sb[axis] * tail);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(av.len() + bv.len());
        for o in 0..outer {
            out.extend_from_slice(&av[o * a_inner..(o + 1) * a_inner]);
            out.extend_from_slice(&bv[o * b_inner..(o + 1) * b_inner]);
        }
        let mut shape = sa.clone();
        shape[axis] += sb[axis];
        let rg = self.rg(a.0) || self.rg(b.0);
        self.push(Tensor::new(shape, out)?, Op::Concat { a: a.0, b: b.0, outer, a_inner, b_inner }, rg, "concat")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        let rg = self.rg(x.0);
        self.push(Tensor::scalar(s), Op::Sum(x.0), rg, "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let m = v.sum() / T::lit(v.len() as f64);
        let rg = self.rg(x.0);
        self.push(Tensor::scalar(m), Op::Mean(x.0), rg, "mean")
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x.0);
        self.push(t, Op::Reshape(x.0), rg, "reshape")
    }

    /// Reverse pass from a one-element `loss`. May be called once per graph.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(TensorError::GraphConsumed);
        }
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.propagate(i, &gy, &mut grads)?;
            grads[i] = Some(gy);
        }
        // only requires_grad nodes keep their gradients
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, gy: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let nodes = &self.nodes;
        let mut send = |p: usize, g: Tensor<T>| -> Result<()> {
            if !nodes[p].requires_grad {
                return Ok(());
            }
            if !g.all_finite() {
                return Err(TensorError::NonFinite("backward"));
            }
            match &mut grads[p] {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
            Ok(())
        };
        let val = |p: usize| &nodes[p].value;
        let map1 = |x: usize, f: &dyn Fn(usize, T) -> T| -> Tensor<T> {
            let xv = val(x);
            Tensor::from_fn(xv.shape(), |j| f(j, gy.data()[j]))
        };
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { x, k, b, geom } => {
                if nodes[*x].requires_grad {
                    let mut gx = Tensor::zeros(val(*x).shape());
                    geom.backward_input(gy.data(), val(*k).data(), gx.data_mut());
                    send(*x, gx)?;
                }
                if nodes[*k].requires_grad {
                    let mut gk = Tensor::zeros(val(*k).shape());
                    geom.backward_kernel(val(*x).data(), gy.data(), gk.data_mut());
                    send(*k, gk)?;
                }
                send(*b, channel_sums(gy))?;
            }
            Op::ConvTranspose { x, k, b, geom } => {
                // out = A^T x, so dL/dx = A gy and dL/dK pairs gy (as conv input) with x
                if nodes[*x].requires_grad {
                    let mut gx = Tensor::zeros(val(*x).shape());
                    geom.forward(gy.data(), val(*k).data(), gx.data_mut());
                    send(*x, gx)?;
                }
                if nodes[*k].requires_grad {
                    let mut gk = Tensor::zeros(val(*k).shape());
                    geom.backward_kernel(gy.data(), val(*x).data(), gk.data_mut());
                    send(*k, gk)?;
                }
                send(*b, channel_sums(gy))?;
            }
            Op::Dense { x, w, b, n, m } => {
                let (n, m) = (*n, *m);
                let g = gy.data();
                if nodes[*x].requires_grad {
                    let wv = val(*w).data();
                    let mut gx = vec![T::zero(); n];
                    for r in 0..m {
                        let row = &wv[r * n..(r + 1) * n];
                        for (acc, &wij) in gx.iter_mut().zip(row) {
                            *acc = *acc + wij * g[r];
                        }
                    }
                    send(*x, Tensor::new(val(*x).shape().to_vec(), gx)?)?;
                }
                if nodes[*w].requires_grad {
                    let xv = val(*x).data();
                    let gw = Tensor::from_fn(&[m, n], |j| g[j / n] * xv[j % n]);
                    send(*w, gw)?;
                }
                send(*b, gy.clone())?;
            }
            Op::Relu(x) => {
                let xv = val(*x).data();
                send(*x, map1(*x, &|j, g| if xv[j] > T::zero() { g } else { T::zero() }))?;
            }
            Op::LeakyRelu(x, alpha) => {
                let xv = val(*x).data();
                let alpha = *alpha;
                send(*x, map1(*x, &|j, g| if xv[j] > T::zero() { g } else { alpha * g }))?;
            }
            Op::Sigmoid(x) => {
                let yv = nodes[i].value.data();
                send(*x, map1(*x, &|j, g| g * yv[j] * (T::one() - yv[j])))?;
            }
            Op::Affine(x, scale) => {
                let scale = *scale;
                send(*x, map1(*x, &|_, g| g * scale))?;
            }
            Op::Square(x) => {
                let xv = val(*x).data();
                let two = T::lit(2.0);
                send(*x, map1(*x, &|j, g| two * xv[j] * g))?;
            }
            Op::Ln(x) => {
                let xv = val(*x).data();
                send(*x, map1(*x, &|j, g| g / xv[j]))?;
            }
            Op::Clamp(x, lo, hi) => {
                let xv = val(*x).data();
                let (lo, hi) = (*lo, *hi);
                send(*x, map1(*x, &|j, g| if xv[j] >= lo && xv[j] <= hi { g } else { T::zero() }))?;
            }
            Op::Add(a, b) => {
                send(*a, gy.clone())?;
                send(*b, gy.clone())?;
            }
            Op::Sub(a, b) => {
                send(*a, gy.clone())?;
                send(*b, map1(*b, &|_, g| -g))?;
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a).data(), val(*b).data());
                send(*a, map1(*a, &|j, g| g * bv[j]))?;
                send(*b, map1(*b, &|j, g| g * av[j]))?;
            }
            Op::Concat { a, b, outer, a_inner, b_inner } => {
                let (outer, ai, bi) = (*outer, *a_inner, *b_inner);
                let g = gy.data();
                let mut ga = Vec::with_capacity(outer * ai);
                let mut gb = Vec::with_capacity(outer * bi);
                for o in 0..outer {
                    let base = o * (ai + bi);
                    ga.extend_from_slice(&g[base..base + ai]);
                    gb.extend_from_slice(&g[base + ai..base + ai + bi]);
                }
                send(*a, Tensor::new(val(*a).shape().to_vec(), ga)?)?;
                send(*b, Tensor::new(val(*b).shape().to_vec(), gb)?)?;
            }
            Op::Sum(x) => {
                let g = gy.data()[0];
                send(*x, Tensor::full(val(*x).shape(), g))?;
            }
            Op::Mean(x) => {
                let xv = val(*x);
                let g = gy.data()[0] / T::lit(xv.len() as f64);
                send(*x, Tensor::full(xv.shape(), g))?;
            }
            Op::Reshape(x) => {
                send(*x, gy.clone().reshape(val(*x).shape())?)?;
            }
        }
        Ok(())
    }

    /// Add this graph's parameter gradients into `set`'s accumulators.
    /// Parameters of other sets are ignored.
    pub fn accumulate_param_grads(&self, set: &mut ParamSet<T>) {
        for (key, &node) in &self.params {
            if key.set != set.id() {
                continue;
            }
            if let Some(g) = self.grads.get(node).and_then(|g| g.as_ref()) {
                set.grad_mut(key.index).add_assign(g);
            }
        }
    }
}

fn sigmoid<T: Real>(a: T) -> T {
    if a >= T::zero() {
        T::one() / (T::one() + (-a).exp())
    } else {
        let e = a.exp();
        e / (T::one() + e)
    }
}

fn add_channel_bias<T: Real>(out: &mut Tensor<T>, bias: &[T]) {
    let c = out.shape()[0];
    let hw = out.len() / c;
    for (ch, chunk) in out.data_mut().chunks_mut(hw).enumerate() {
        let b = bias[ch];
        chunk.iter_mut().for_each(|v| *v = *v + b);
    }
}

fn channel_sums<T: Real>(gy: &Tensor<T>) -> Tensor<T> {
    let c = gy.shape()[0];
    let hw = gy.len() / c;
    Tensor::from_fn(&[c], |ch| gy.data()[ch * hw..(ch + 1) * hw].iter().copied().sum())
}
