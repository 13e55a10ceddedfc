use super::ops::{conv_backward, conv_forward, sigmoid, softplus, ConvDims};
use super::Tensor;
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Sum(Var),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        dims: ConvDims,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of one forward computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    // Accumulated gradients of tracked leaves.
    leaf_grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Tracked leaf: its gradient is accumulated by `backward`.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a tracked leaf, if `backward` has reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.leaf_grads[v.0].as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    fn binary_shapes(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(ta.shape(), data).expect("same shape as operand")
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.requires_grad(*v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes(a, b, "add")?;
        let out = self.zip_with(a, b, |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes(a, b, "sub")?;
        let out = self.zip_with(a, b, |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes(a, b, "hadamard")?;
        let out = self.zip_with(a, b, |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Hadamard(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, factor), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        let rg = self.rg(&[a]);
        self.push(out, Op::Softplus(a), rg)
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Zero-padded "same" convolution of `[C_in, H, W]` by `[C_out, C_in, k, k]`.
    pub fn conv2d_same(&mut self, input: Var, kernel: Var, bias: Option<Var>) -> Result<Var> {
        let dims = ConvDims::check(
            self.value(input).shape(),
            self.value(kernel).shape(),
            bias.map(|b| self.value(b).shape()),
        )?;
        let out = conv_forward(
            dims,
            self.value(input).data(),
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
        );
        let out = Tensor::new(&[dims.c_out, dims.h, dims.w], out)?;
        let mut deps = vec![input, kernel];
        deps.extend(bias);
        let rg = self.rg(&deps);
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                kernel,
                bias,
                dims,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`, adding `∂loss/∂leaf` into every
    /// tracked leaf's gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        if !self.requires_grad(loss) {
            return Ok(());
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            match node.op {
                Op::Leaf => {
                    let slot = &mut self.leaf_grads[id];
                    match slot {
                        Some(t) => t.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(Tensor::new(node.value.shape(), g)?),
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, a, |dst| add_into(dst, &g));
                    self.accumulate(&mut adj, b, |dst| add_into(dst, &g));
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, a, |dst| add_into(dst, &g));
                    self.accumulate(&mut adj, b, |dst| {
                        dst.iter_mut().zip(&g).for_each(|(d, s)| *d -= s)
                    });
                }
                Op::Hadamard(a, b) => {
                    let (va, vb) = (self.value(a).data(), self.value(b).data());
                    self.accumulate(&mut adj, a, |dst| {
                        for ((d, gi), bi) in dst.iter_mut().zip(&g).zip(vb) {
                            *d += gi * bi;
                        }
                    });
                    self.accumulate(&mut adj, b, |dst| {
                        for ((d, gi), ai) in dst.iter_mut().zip(&g).zip(va) {
                            *d += gi * ai;
                        }
                    });
                }
                Op::Scale(a, factor) => {
                    self.accumulate(&mut adj, a, |dst| {
                        dst.iter_mut().zip(&g).for_each(|(d, s)| *d += factor * s)
                    });
                }
                Op::Sigmoid(a) => {
                    let out = node.value.data();
                    self.accumulate(&mut adj, a, |dst| {
                        for ((d, gi), s) in dst.iter_mut().zip(&g).zip(out) {
                            *d += gi * s * (1.0 - s);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let out = node.value.data();
                    self.accumulate(&mut adj, a, |dst| {
                        for ((d, gi), t) in dst.iter_mut().zip(&g).zip(out) {
                            *d += gi * (1.0 - t * t);
                        }
                    });
                }
                Op::Softplus(a) => {
                    let x = self.value(a).data();
                    self.accumulate(&mut adj, a, |dst| {
                        for ((d, gi), xi) in dst.iter_mut().zip(&g).zip(x) {
                            *d += gi * sigmoid(*xi);
                        }
                    });
                }
                Op::Sum(a) => {
                    let g0 = g[0];
                    self.accumulate(&mut adj, a, |dst| dst.iter_mut().for_each(|d| *d += g0));
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    dims,
                } => {
                    let want_in = self.requires_grad(input);
                    let want_k = self.requires_grad(kernel);
                    let want_b = bias.is_some_and(|b| self.requires_grad(b));
                    let mut gi = want_in.then(|| take_or_zero(&mut adj, input, self.value(input).len()));
                    let mut gk = want_k.then(|| take_or_zero(&mut adj, kernel, self.value(kernel).len()));
                    let mut gb = if want_b {
                        let b = bias.expect("checked");
                        Some(take_or_zero(&mut adj, b, self.value(b).len()))
                    } else {
                        None
                    };
                    conv_backward(
                        dims,
                        self.value(input).data(),
                        self.value(kernel).data(),
                        &g,
                        gi.as_deref_mut(),
                        gk.as_deref_mut(),
                        gb.as_deref_mut(),
                    );
                    if let Some(v) = gi {
                        adj[input.0] = Some(v);
                    }
                    if let Some(v) = gk {
                        adj[kernel.0] = Some(v);
                    }
                    if let (Some(v), Some(b)) = (gb, bias) {
                        adj[b.0] = Some(v);
                    }
                }
            }
        }
        Ok(())
    }

    fn accumulate(&self, adj: &mut [Option<Vec<f64>>], target: Var, f: impl FnOnce(&mut [f64])) {
        if !self.requires_grad(target) {
            return;
        }
        let slot = &mut adj[target.0];
        let buf = slot.get_or_insert_with(|| vec![0.0; self.nodes[target.0].value.len()]);
        f(buf);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn take_or_zero(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> Vec<f64> {
    adj[v.0].take().unwrap_or_else(|| vec![0.0; len])
}
