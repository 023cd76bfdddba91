//! The three toy networks: Part-3 and Part-6 (encoder–decoder segmenters on
//! RGB and RGB-S input) and the State network (RGB-S → state-bin logits).
//!
//! Part network:  conv3×3 → relu → pool, conv3×3 → relu → pool, conv3×3 → relu,
//!                up×2 → relu, up×2 → relu, conv1×1 → softmax over k+1 classes.
//! State network: conv3×3 → relu → pool, conv3×3 → relu → pool, conv3×3 → relu,
//!                global average pool, fully connected → D logits.

mod checkpoint;

pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};

use rand::Rng;

use crate::data::{PartLabelMap, PartStateVector};
use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchConfig {
    pub input_size: usize,
    pub input_channels: usize,
    pub conv_widths: [usize; 3],
    pub num_parts: usize,
    pub num_state_bins: usize,
}

impl ArchConfig {
    pub fn new(input_size: usize, input_channels: usize, num_parts: usize, num_state_bins: usize) -> Self {
        ArchConfig {
            input_size,
            input_channels,
            conv_widths: [16, 32, 32],
            num_parts,
            num_state_bins,
        }
    }

    pub fn with_channels(&self, input_channels: usize) -> Self {
        ArchConfig {
            input_channels,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 4 != 0 {
            return Err(Error::Config(format!(
                "input_size must be a positive multiple of 4, got {}",
                self.input_size
            )));
        }
        if !matches!(self.input_channels, 3 | 6) {
            return Err(Error::Config(format!(
                "input_channels must be 3 or 6, got {}",
                self.input_channels
            )));
        }
        if self.conv_widths.contains(&0) || self.num_parts == 0 || self.num_state_bins == 0 {
            return Err(Error::Config("network widths and sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    Part,
    State,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Part => "part",
            NetKind::State => "state",
        }
    }
}

/// Parameter shapes in declaration order.
pub fn param_shapes(kind: NetKind, arch: &ArchConfig) -> Vec<(&'static str, Vec<usize>)> {
    let [w1, w2, w3] = arch.conv_widths;
    let cin = arch.input_channels;
    let mut shapes = vec![
        ("conv1.weight", vec![3, 3, cin, w1]),
        ("conv1.bias", vec![w1]),
        ("conv2.weight", vec![3, 3, w1, w2]),
        ("conv2.bias", vec![w2]),
        ("conv3.weight", vec![3, 3, w2, w3]),
        ("conv3.bias", vec![w3]),
    ];
    match kind {
        NetKind::Part => shapes.extend([
            ("up1.weight", vec![2, 2, w3, w2]),
            ("up1.bias", vec![w2]),
            ("up2.weight", vec![2, 2, w2, w1]),
            ("up2.bias", vec![w1]),
            ("head.weight", vec![1, 1, w1, arch.num_parts + 1]),
            ("head.bias", vec![arch.num_parts + 1]),
        ]),
        NetKind::State => shapes.extend([
            ("fc.weight", vec![w3, arch.num_state_bins]),
            ("fc.bias", vec![arch.num_state_bins]),
        ]),
    }
    shapes
}

/// Trainable tensors of one network (Θ_f or Θ_g).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T: Element = f32> {
    pub kind: NetKind,
    pub arch: ArchConfig,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Element> NetworkParams<T> {
    /// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), biases zero.
    pub fn init(kind: NetKind, arch: &ArchConfig, rng: &mut impl Rng) -> Result<Self> {
        arch.validate()?;
        let tensors = param_shapes(kind, arch)
            .into_iter()
            .map(|(name, shape)| {
                if shape.len() == 1 {
                    return Tensor::zeros(&shape);
                }
                let (fan_in, fan_out) = match shape[..] {
                    // Stride-2 transpose: each output pixel sees one tap per
                    // input channel.
                    [kh, kw, cin, cout] if name.starts_with("up") => (kh * kw * cin / 4, kh * kw * cout),
                    [kh, kw, cin, cout] => (kh * kw * cin, kh * kw * cout),
                    [din, dout] => (din, dout),
                    _ => unreachable!(),
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let n = shape.iter().product();
                let data = (0..n).map(|_| T::from_f64(rng.gen_range(-bound..bound))).collect();
                Tensor::new(&shape, data).expect("shape product")
            })
            .collect();
        Ok(NetworkParams {
            kind,
            arch: arch.clone(),
            tensors,
        })
    }

    pub fn from_tensors(kind: NetKind, arch: &ArchConfig, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let shapes = param_shapes(kind, arch);
        if shapes.len() != tensors.len()
            || shapes.iter().zip(&tensors).any(|((_, s), t)| s[..] != *t.shape())
        {
            return Err(Error::Checkpoint(format!(
                "parameter shapes do not match {}",
                fingerprint(kind, arch)
            )));
        }
        Ok(NetworkParams {
            kind,
            arch: arch.clone(),
            tensors,
        })
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self.kind, &self.arch)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Adds the parameters to a graph as trainable (or constant) leaves.
    pub fn register(&self, g: &mut Graph<T>, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| if trainable { g.param(t.clone()) } else { g.input(t.clone()) })
            .collect()
    }

    pub fn cast<U: Element>(&self) -> NetworkParams<U> {
        NetworkParams {
            kind: self.kind,
            arch: self.arch.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    /// CRC32 over the little-endian bytes of every value.
    pub fn checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for t in &self.tensors {
            for v in t.data() {
                h.update(&v.to_f64().unwrap_or(f64::NAN).to_le_bytes());
            }
        }
        h.finalize()
    }

    fn check_input(&self, input: &Tensor<T>, op: &'static str) -> Result<()> {
        let (h, w, c) = input.hwc(op)?;
        if c != self.arch.input_channels {
            return Err(Error::dim(
                op,
                format!("network expects {} channels, input has {c}", self.arch.input_channels),
            ));
        }
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::dim(op, format!("spatial dims {h}×{w} not divisible by 4")));
        }
        Ok(())
    }
}

pub fn fingerprint(kind: NetKind, arch: &ArchConfig) -> String {
    let [a, b, c] = arch.conv_widths;
    format!(
        "{}:in={}:size={}:widths={a},{b},{c}:parts={}:bins={}",
        kind.name(),
        arch.input_channels,
        arch.input_size,
        arch.num_parts,
        arch.num_state_bins
    )
}

fn conv_relu<T: Element>(g: &mut Graph<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.conv2d(x, w, 1, 1)?;
    let y = g.bias_add(y, b)?;
    g.relu(y)
}

fn encoder<T: Element>(g: &mut Graph<T>, p: &[Var], input: Var) -> Result<Var> {
    let x = conv_relu(g, input, p[0], p[1])?;
    let x = g.max_pool2x2(x)?;
    let x = conv_relu(g, x, p[2], p[3])?;
    let x = g.max_pool2x2(x)?;
    conv_relu(g, x, p[4], p[5])
}

/// Part network up to the per-pixel class logits (H×W×(k+1)).
pub fn part_net_logits<T: Element>(g: &mut Graph<T>, p: &[Var], input: Var) -> Result<Var> {
    let x = encoder(g, p, input)?;
    let x = g.conv2d_transpose(x, p[6], 2, 0)?;
    let x = g.bias_add(x, p[7])?;
    let x = g.relu(x)?;
    let x = g.conv2d_transpose(x, p[8], 2, 0)?;
    let x = g.bias_add(x, p[9])?;
    let x = g.relu(x)?;
    let x = g.conv2d(x, p[10], 1, 0)?;
    g.bias_add(x, p[11])
}

/// State network: D logits, one per state bin.
pub fn state_net_logits<T: Element>(g: &mut Graph<T>, p: &[Var], input: Var) -> Result<Var> {
    let x = encoder(g, p, input)?;
    let x = g.global_avg_pool(x)?;
    g.fully_connected(x, p[6], p[7])
}

/// Per-pixel part probabilities, H×W×(k+1) with background as channel 0.
pub fn part_net_forward<T: Element>(params: &NetworkParams<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    if params.kind != NetKind::Part {
        return Err(Error::Config("not a part network".into()));
    }
    params.check_input(input, "part_net_forward")?;
    let mut g = Graph::new();
    let p = params.register(&mut g, false);
    let x = g.input(input.clone());
    let logits = part_net_logits(&mut g, &p, x)?;
    let probs = g.softmax(logits)?;
    Ok(g.value(probs).clone())
}

pub fn state_net_forward<T: Element>(params: &NetworkParams<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    if params.kind != NetKind::State {
        return Err(Error::Config("not a state network".into()));
    }
    params.check_input(input, "state_net_forward")?;
    let mut g = Graph::new();
    let p = params.register(&mut g, false);
    let x = g.input(input.clone());
    let logits = state_net_logits(&mut g, &p, x)?;
    Ok(g.value(logits).clone())
}

/// Mean pixelwise cross-entropy of a probability volume against a label map.
pub fn seg_loss<T: Element>(probs: &Tensor<T>, labels: &PartLabelMap) -> Result<f64> {
    let (h, w, c) = probs.hwc("seg_loss")?;
    if (h, w) != (labels.height(), labels.width()) {
        return Err(Error::dim(
            "seg_loss",
            format!("{h}×{w} volume vs {}×{} labels", labels.height(), labels.width()),
        ));
    }
    if labels.max_label() as usize >= c {
        return Err(Error::InvalidTarget {
            op: "seg_loss",
            detail: format!("label {} with {} part classes", labels.max_label(), c - 1),
        });
    }
    let total: f64 = probs
        .data()
        .chunks_exact(c)
        .zip(labels.labels())
        .map(|(px, &l)| -px[l as usize].to_f64().unwrap_or(0.0).max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(total / (h * w) as f64)
}

/// Mean per-bin binary cross-entropy of state logits.
pub fn state_loss<T: Element>(logits: &Tensor<T>, states: &PartStateVector) -> Result<f64> {
    let mut g = Graph::new();
    let x = g.input(logits.clone());
    let targets: Vec<T> = states.bits().iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
    let l = g.binary_cross_entropy(x, &targets)?;
    Ok(g.value(l).item().expect("scalar").to_f64().unwrap_or(f64::NAN))
}
