use super::kernels::{
    conv_out_dim, conv_transpose_out_dim, kernel_from_transpose_layout,
    kernel_to_transpose_layout, Window,
};
use super::{concat_channels, Element, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T: Element> {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        window: Window,
        cols: Vec<T>,
    },
    ConvTranspose2d {
        input: Var,
        kernel: Var,
        window: Window,
    },
    BiasAdd {
        input: Var,
        bias: Var,
    },
    Relu {
        input: Var,
    },
    MaxPool2x2 {
        input: Var,
        argmax: Vec<usize>,
    },
    GlobalAvgPool {
        input: Var,
    },
    FullyConnected {
        input: Var,
        weights: Var,
        bias: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Softmax {
        input: Var,
    },
    ChannelMap {
        input: Var,
        matrix: Tensor<T>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<T>,
    },
    BinaryCrossEntropy {
        logits: Var,
        targets: Vec<T>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        input: Var,
        factor: T,
    },
}

struct Node<T: Element> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A tape of operations recorded in execution order. Nodes only refer to
/// earlier nodes, so the tape is always topologically sorted.
pub struct Graph<T: Element = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant leaf; no gradient is tracked for it.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = self.needs(inputs);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, pad: usize) -> Result<Var> {
        let (h, w, cin) = self.value(input).hwc("conv2d")?;
        let (kh, kw, kcin, cout) = kernel_dims(self.value(kernel), "conv2d")?;
        if kcin != cin {
            return Err(Error::dim(
                "conv2d",
                format!("input has {cin} channels, kernel expects {kcin}"),
            ));
        }
        let (Some(oh), Some(ow)) = (conv_out_dim(h, kh, stride, pad), conv_out_dim(w, kw, stride, pad))
        else {
            return Err(Error::dim(
                "conv2d",
                format!("{kh}×{kw} kernel does not fit {h}×{w} input with padding {pad}, stride {stride}"),
            ));
        };
        let window = Window {
            big_h: h,
            big_w: w,
            small_h: oh,
            small_w: ow,
            kh,
            kw,
            stride,
            pad,
            channels: cin,
        };
        let cols = window.gather(self.value(input).data());
        let mut out = vec![T::zero(); oh * ow * cout];
        T::gemm(
            oh * ow,
            window.patch_len(),
            cout,
            &cols,
            false,
            self.value(kernel).data(),
            false,
            T::zero(),
            &mut out,
        );
        let cols = if self.needs(&[kernel]) { cols } else { Vec::new() };
        let value = Tensor::new(&[oh, ow, cout], out)?;
        self.push(
            "conv2d",
            value,
            Op::Conv2d {
                input,
                kernel,
                window,
                cols,
            },
            &[input, kernel],
        )
    }

    /// Transposed convolution with a kh×kw×Cin×Cout kernel; the adjoint of
    /// [`Graph::conv2d`] with the same stride and padding.
    pub fn conv2d_transpose(
        &mut self,
        input: Var,
        kernel: Var,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let (h, w, cin) = self.value(input).hwc("conv2d_transpose")?;
        let (kh, kw, kcin, cout) = kernel_dims(self.value(kernel), "conv2d_transpose")?;
        if kcin != cin {
            return Err(Error::dim(
                "conv2d_transpose",
                format!("input has {cin} channels, kernel expects {kcin}"),
            ));
        }
        let (Some(oh), Some(ow)) = (
            conv_transpose_out_dim(h, kh, stride, pad),
            conv_transpose_out_dim(w, kw, stride, pad),
        ) else {
            return Err(Error::dim(
                "conv2d_transpose",
                format!("padding {pad} leaves no output for {h}×{w} input"),
            ));
        };
        let window = Window {
            big_h: oh,
            big_w: ow,
            small_h: h,
            small_w: w,
            kh,
            kw,
            stride,
            pad,
            channels: cout,
        };
        let taps = kh * kw;
        let wt = kernel_to_transpose_layout(self.value(kernel).data(), taps, cin, cout);
        let mut cols = vec![T::zero(); h * w * taps * cout];
        T::gemm(
            h * w,
            cin,
            taps * cout,
            self.value(input).data(),
            false,
            &wt,
            false,
            T::zero(),
            &mut cols,
        );
        let value = Tensor::new(&[oh, ow, cout], window.scatter(&cols))?;
        self.push(
            "conv2d_transpose",
            value,
            Op::ConvTranspose2d {
                input,
                kernel,
                window,
            },
            &[input, kernel],
        )
    }

    /// Adds a per-channel bias along the last dimension.
    pub fn bias_add(&mut self, input: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let b = self.value(bias);
        let c = *x.shape().last().unwrap_or(&0);
        if b.len() != c || c == 0 {
            return Err(Error::dim(
                "bias_add",
                format!("bias of length {} for {c} channels", b.len()),
            ));
        }
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(c) {
            for (o, &bv) in row.iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        let value = Tensor::new(x.shape(), out)?;
        self.push("bias_add", value, Op::BiasAdd { input, bias }, &[input, bias])
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let value = self
            .value(input)
            .map(|v| if v > T::zero() { v } else { T::zero() });
        self.push("relu", value, Op::Relu { input }, &[input])
    }

    pub fn max_pool2x2(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let (h, w, c) = x.hwc("max_pool2x2")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::dim("max_pool2x2", format!("odd spatial dims {h}×{w}")));
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut out = vec![T::zero(); oh * ow * c];
        let mut argmax = vec![0usize; oh * ow * c];
        let xd = x.data();
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((2 * oy) * w + 2 * ox) * c + ch;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if xd[idx] > xd[best_idx] {
                            best_idx = idx;
                        }
                    }
                    let o = (oy * ow + ox) * c + ch;
                    out[o] = xd[best_idx];
                    argmax[o] = best_idx;
                }
            }
        }
        let value = Tensor::new(&[oh, ow, c], out)?;
        self.push("max_pool2x2", value, Op::MaxPool2x2 { input, argmax }, &[input])
    }

    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let (h, w, c) = x.hwc("global_avg_pool")?;
        let mut out = vec![T::zero(); c];
        for px in x.data().chunks_exact(c) {
            for (o, &v) in out.iter_mut().zip(px) {
                *o += v;
            }
        }
        let n = T::from_f64((h * w) as f64);
        out.iter_mut().for_each(|o| *o = *o / n);
        let value = Tensor::new(&[c], out)?;
        self.push("global_avg_pool", value, Op::GlobalAvgPool { input }, &[input])
    }

    /// `x·W + b` for a flattened input and a Din×Dout weight matrix.
    pub fn fully_connected(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let wt = self.value(weights);
        let b = self.value(bias);
        let [din, dout] = wt.shape()[..] else {
            return Err(Error::dim(
                "fully_connected",
                format!("weights must be rank 2, got {:?}", wt.shape()),
            ));
        };
        if x.len() != din || b.len() != dout {
            return Err(Error::dim(
                "fully_connected",
                format!(
                    "input of {} values, weights {din}×{dout}, bias of {}",
                    x.len(),
                    b.len()
                ),
            ));
        }
        let mut out = b.data().to_vec();
        T::gemm(1, din, dout, x.data(), false, wt.data(), false, T::one(), &mut out);
        let value = Tensor::new(&[dout], out)?;
        self.push(
            "fully_connected",
            value,
            Op::FullyConnected {
                input,
                weights,
                bias,
            },
            &[input, weights, bias],
        )
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = concat_channels(self.value(a), self.value(b))?;
        self.push("concat_channels", value, Op::Concat { a, b }, &[a, b])
    }

    /// Softmax over the last dimension.
    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let c = *x.shape().last().unwrap_or(&0);
        if c == 0 {
            return Err(Error::dim("softmax", "empty class dimension"));
        }
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(c) {
            softmax_in_place(row);
        }
        let value = Tensor::new(x.shape(), out)?;
        self.push("softmax", value, Op::Softmax { input }, &[input])
    }

    /// Per-row linear map `y = x·M` over the last dimension with a constant
    /// Cin×Cout matrix.
    pub fn channel_map(&mut self, input: Var, matrix: Tensor<T>) -> Result<Var> {
        let x = self.value(input);
        let cin = *x.shape().last().unwrap_or(&0);
        let [mr, cout] = matrix.shape()[..] else {
            return Err(Error::dim("channel_map", "matrix must be rank 2"));
        };
        if mr != cin {
            return Err(Error::dim(
                "channel_map",
                format!("{cin} input channels, matrix has {mr} rows"),
            ));
        }
        let rows = x.len() / cin;
        let mut out = vec![T::zero(); rows * cout];
        T::gemm(rows, cin, cout, x.data(), false, matrix.data(), false, T::zero(), &mut out);
        let mut shape = x.shape().to_vec();
        *shape.last_mut().expect("rank ≥ 1") = cout;
        let value = Tensor::new(&shape, out)?;
        self.push("channel_map", value, Op::ChannelMap { input, matrix }, &[input])
    }

    /// Mean softmax cross-entropy. Rows are taken along the last dimension;
    /// `targets` holds one class index per row.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        let c = *x.shape().last().unwrap_or(&0);
        if c == 0 || x.len() / c != targets.len() {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!(
                    "{} rows of logits, {} targets",
                    if c == 0 { 0 } else { x.len() / c },
                    targets.len()
                ),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::InvalidTarget {
                op: "softmax_cross_entropy",
                detail: format!("class {bad} outside 0..{c}"),
            });
        }
        let mut probs = x.data().to_vec();
        let mut total = 0.0f64;
        for (row, &t) in probs.chunks_exact_mut(c).zip(targets) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
            total += (lse - row[t]).to_f64().unwrap_or(f64::NAN);
            softmax_in_place(row);
        }
        let value = Tensor::scalar(T::from_f64(total / targets.len() as f64));
        self.push(
            "softmax_cross_entropy",
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            &[logits],
        )
    }

    /// Mean per-bin binary cross-entropy on logits; targets must be 0 or 1.
    pub fn binary_cross_entropy(&mut self, logits: Var, targets: &[T]) -> Result<Var> {
        let x = self.value(logits);
        if x.len() != targets.len() || targets.is_empty() {
            return Err(Error::dim(
                "binary_cross_entropy",
                format!("{} logits, {} targets", x.len(), targets.len()),
            ));
        }
        if targets.iter().any(|&t| t != T::zero() && t != T::one()) {
            return Err(Error::InvalidTarget {
                op: "binary_cross_entropy",
                detail: "targets must be 0 or 1".into(),
            });
        }
        let total: T = x
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &t)| z.max(T::zero()) - z * t + (-z.abs()).exp().ln_1p())
            .sum();
        let value = Tensor::scalar(total / T::from_f64(targets.len() as f64));
        self.push(
            "binary_cross_entropy",
            value,
            Op::BinaryCrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
            &[logits],
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::dim(
                "add",
                format!("shapes {:?} and {:?}", x.shape(), y.shape()),
            ));
        }
        let out = x.data().iter().zip(y.data()).map(|(&p, &q)| p + q).collect();
        let value = Tensor::new(x.shape(), out)?;
        self.push("add", value, Op::Add { a, b }, &[a, b])
    }

    pub fn scale(&mut self, input: Var, factor: T) -> Result<Var> {
        let value = self.value(input).map(|v| v * factor);
        self.push("scale", value, Op::Scale { input, factor }, &[input])
    }

    /// Reverse-mode sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::dim(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(self.value(loss).shape(), vec![T::one()])?);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(gout);
            } else {
                self.backward_node(node, &gout, &mut grads)?;
            }
        }

        for (node, g) in self.nodes.iter().zip(grads.iter_mut()) {
            if !node.requires_grad {
                *g = None;
            } else if g.as_ref().is_some_and(|g| !g.is_finite()) {
                return Err(Error::NonFinite { op: "backward" });
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Vec<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, x) in existing.data_mut().iter_mut().zip(g) {
                    *e += x;
                }
            }
            slot @ None => {
                *slot = Some(Tensor {
                    shape: self.nodes[v.0].value.shape().to_vec(),
                    data: g,
                });
            }
        }
    }

    fn backward_node(
        &self,
        node: &Node<T>,
        gout: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) -> Result<()> {
        let g = gout.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                window,
                cols,
            } => {
                let p = window.small_h * window.small_w;
                let plen = window.patch_len();
                let kv = self.value(*kernel);
                let cout = kv.shape()[3];
                if self.nodes[kernel.0].requires_grad {
                    let mut dk = vec![T::zero(); plen * cout];
                    T::gemm(plen, p, cout, cols, true, g, false, T::zero(), &mut dk);
                    self.accumulate(grads, *kernel, dk);
                }
                if self.nodes[input.0].requires_grad {
                    let mut dcols = vec![T::zero(); p * plen];
                    T::gemm(p, cout, plen, g, false, kv.data(), true, T::zero(), &mut dcols);
                    self.accumulate(grads, *input, window.scatter(&dcols));
                }
            }
            Op::ConvTranspose2d {
                input,
                kernel,
                window,
            } => {
                let kv = self.value(*kernel);
                let (cin, cout) = (kv.shape()[2], kv.shape()[3]);
                let taps = window.kh * window.kw;
                let p = window.small_h * window.small_w;
                let l = taps * cout;
                let dcols = window.gather(g);
                if self.nodes[input.0].requires_grad {
                    let wt = kernel_to_transpose_layout(kv.data(), taps, cin, cout);
                    let mut dx = vec![T::zero(); p * cin];
                    T::gemm(p, l, cin, &dcols, false, &wt, true, T::zero(), &mut dx);
                    self.accumulate(grads, *input, dx);
                }
                if self.nodes[kernel.0].requires_grad {
                    let mut dwt = vec![T::zero(); cin * l];
                    T::gemm(
                        cin,
                        p,
                        l,
                        self.value(*input).data(),
                        true,
                        &dcols,
                        false,
                        T::zero(),
                        &mut dwt,
                    );
                    self.accumulate(
                        grads,
                        *kernel,
                        kernel_from_transpose_layout(&dwt, taps, cin, cout),
                    );
                }
            }
            Op::BiasAdd { input, bias } => {
                let c = self.value(*bias).len();
                if self.nodes[bias.0].requires_grad {
                    let mut db = vec![T::zero(); c];
                    for row in g.chunks_exact(c) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *bias, db);
                }
                self.accumulate(grads, *input, g.to_vec());
            }
            Op::Relu { input } => {
                let x = self.value(*input).data();
                let dx = x
                    .iter()
                    .zip(g)
                    .map(|(&xv, &gv)| if xv > T::zero() { gv } else { T::zero() })
                    .collect();
                self.accumulate(grads, *input, dx);
            }
            Op::MaxPool2x2 { input, argmax } => {
                let mut dx = vec![T::zero(); self.value(*input).len()];
                for (&src, &gv) in argmax.iter().zip(g) {
                    dx[src] += gv;
                }
                self.accumulate(grads, *input, dx);
            }
            Op::GlobalAvgPool { input } => {
                let x = self.value(*input);
                let c = g.len();
                let scale = T::one() / T::from_f64((x.len() / c) as f64);
                let dx = (0..x.len()).map(|i| g[i % c] * scale).collect();
                self.accumulate(grads, *input, dx);
            }
            Op::FullyConnected {
                input,
                weights,
                bias,
            } => {
                let w = self.value(*weights);
                let (din, dout) = (w.shape()[0], w.shape()[1]);
                if self.nodes[input.0].requires_grad {
                    let mut dx = vec![T::zero(); din];
                    T::gemm(1, dout, din, g, false, w.data(), true, T::zero(), &mut dx);
                    self.accumulate(grads, *input, dx);
                }
                if self.nodes[weights.0].requires_grad {
                    let mut dw = vec![T::zero(); din * dout];
                    T::gemm(din, 1, dout, self.value(*input).data(), false, g, false, T::zero(), &mut dw);
                    self.accumulate(grads, *weights, dw);
                }
                self.accumulate(grads, *bias, g.to_vec());
            }
            Op::Concat { a, b } => {
                let ca = *self.value(*a).shape().last().expect("rank 3");
                let cb = *self.value(*b).shape().last().expect("rank 3");
                let mut da = Vec::with_capacity(self.value(*a).len());
                let mut db = Vec::with_capacity(self.value(*b).len());
                for px in g.chunks_exact(ca + cb) {
                    da.extend_from_slice(&px[..ca]);
                    db.extend_from_slice(&px[ca..]);
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Softmax { input } => {
                let y = node.value.data();
                let c = *node.value.shape().last().expect("rank ≥ 1");
                let mut dx = Vec::with_capacity(y.len());
                for (yr, gr) in y.chunks_exact(c).zip(g.chunks_exact(c)) {
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    dx.extend(yr.iter().zip(gr).map(|(&yv, &gv)| yv * (gv - dot)));
                }
                self.accumulate(grads, *input, dx);
            }
            Op::ChannelMap { input, matrix } => {
                let (cin, cout) = (matrix.shape()[0], matrix.shape()[1]);
                let rows = g.len() / cout;
                let mut dx = vec![T::zero(); rows * cin];
                T::gemm(rows, cout, cin, g, false, matrix.data(), true, T::zero(), &mut dx);
                self.accumulate(grads, *input, dx);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let c = probs.len() / targets.len();
                let scale = g[0] / T::from_f64(targets.len() as f64);
                let mut dx: Vec<T> = probs.iter().map(|&p| p * scale).collect();
                for (row, &t) in dx.chunks_exact_mut(c).zip(targets) {
                    row[t] = row[t] - scale;
                }
                self.accumulate(grads, *logits, dx);
            }
            Op::BinaryCrossEntropy { logits, targets } => {
                let scale = g[0] / T::from_f64(targets.len() as f64);
                let dx = self
                    .value(*logits)
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&z, &t)| (sigmoid(z) - t) * scale)
                    .collect();
                self.accumulate(grads, *logits, dx);
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Scale { input, factor } => {
                self.accumulate(grads, *input, g.iter().map(|&v| v * *factor).collect());
            }
        }
        Ok(())
    }
}

/// Gradients of a loss with respect to the trainable leaves of a graph.
pub struct Gradients<T: Element> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Element> Gradients<T> {
    /// Gradient for a trainable leaf; `None` when the leaf does not reach the
    /// loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn kernel_dims<T: Element>(k: &Tensor<T>, op: &'static str) -> Result<(usize, usize, usize, usize)> {
    match k.shape()[..] {
        [kh, kw, cin, cout] => Ok((kh, kw, cin, cout)),
        _ => Err(Error::dim(
            op,
            format!("kernel must be kh×kw×Cin×Cout, got {:?}", k.shape()),
        )),
    }
}

pub(crate) fn softmax_in_place<T: Element>(row: &mut [T]) {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

pub fn sigmoid<T: Element>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
