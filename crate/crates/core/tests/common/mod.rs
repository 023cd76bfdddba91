//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use isin::networks::{ArchConfig, NetKind, NetworkParams};
use isin::rng::substream;
use isin::tensor::{concat_channels, Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Relative error with the denominator floored at 1e-3, so gradients that
/// vanish are compared on an absolute scale instead of dividing by ~0.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Reduces any node to a scalar through a fixed random projection, so that
/// vector-valued ops can be gradient-checked.
pub fn project(g: &mut Graph<f64>, v: Var, seed: u64) -> Var {
    let n = g.value(v).len();
    let mut r = rng(seed ^ 0x5eed);
    let w = random_tensor(&mut r, &[n, 1]);
    let w = g.input(w);
    let b = g.input(Tensor::zeros(&[1]));
    g.fully_connected(v, w, b).unwrap()
}

/// Central finite-difference check of every element of every input.
/// `build` receives the inputs registered as trainable leaves and must return
/// a scalar. Returns the maximum elementwise relative error.
pub fn gradcheck<F>(inputs: &[Tensor<f64>], build: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let eval = |vals: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.param(t.clone())).collect();
        let out = build(&mut g, &vars);
        g.value(out).item().unwrap()
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out).unwrap();

    let mut worst = 0.0f64;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        for j in 0..inputs[i].len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.data()[j], numeric));
        }
    }
    worst
}

/// Brute-force precision/recall oracle for one class. Each entry of
/// `detections` is `(image, score, mask)`, each ground truth `(image, mask)`.
/// For every distinct score threshold the detections at or above it are
/// re-matched from scratch, and AP is the area under the monotone precision
/// envelope of the resulting (recall, precision) points.
pub fn brute_force_ap(
    detections: &[(usize, f64, Vec<bool>)],
    ground_truths: &[(usize, Vec<bool>)],
    iou_threshold: f64,
) -> f64 {
    if ground_truths.is_empty() {
        return if detections.is_empty() { 1.0 } else { 0.0 };
    }
    let mut thresholds: Vec<f64> = detections.iter().map(|d| d.1).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    let mut points = Vec::new();
    for &t in &thresholds {
        let mut kept: Vec<usize> = (0..detections.len())
            .filter(|&i| detections[i].1 >= t)
            .collect();
        kept.sort_by(|&a, &b| detections[b].1.partial_cmp(&detections[a].1).unwrap().then(a.cmp(&b)));
        let mut used = vec![false; ground_truths.len()];
        let mut tp = 0usize;
        for &d in &kept {
            let (img, _, ref mask) = detections[d];
            let mut best: Option<(usize, f64)> = None;
            for (gi, (gimg, gmask)) in ground_truths.iter().enumerate() {
                if *gimg != img || used[gi] {
                    continue;
                }
                let o = mask_iou(mask, gmask);
                if best.map_or(true, |(_, b)| o > b) {
                    best = Some((gi, o));
                }
            }
            if let Some((gi, o)) = best {
                if o > iou_threshold {
                    used[gi] = true;
                    tp += 1;
                }
            }
        }
        let recall = tp as f64 / ground_truths.len() as f64;
        let precision = tp as f64 / kept.len() as f64;
        points.push((recall, precision));
    }

    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
    recalls.push(0.0);
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut ap = 0.0;
    for w in recalls.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let best = points
            .iter()
            .filter(|p| p.0 >= hi)
            .map(|p| p.1)
            .fold(0.0, f64::max);
        ap += (hi - lo) * best;
    }
    ap
}

pub fn mask_iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Tiny Part-6 and State nets with random biases, so that no ReLU input
/// sits exactly on its kink.
pub fn tiny_nets(seed: u64) -> (NetworkParams<f64>, NetworkParams<f64>) {
    let arch = ArchConfig { conv_widths: [2, 2, 2], ..ArchConfig::new(8, 6, 3, 6) };
    let mut r = rng(seed ^ 0xb1a5);
    let mut nets = [
        NetworkParams::init(NetKind::Part, &arch, &mut substream(seed, "init", 1)).unwrap(),
        NetworkParams::init(NetKind::State, &arch, &mut substream(seed, "init", 2)).unwrap(),
    ];
    for net in &mut nets {
        for t in net.tensors.iter_mut().filter(|t| t.shape().len() == 1) {
            t.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.2..0.2));
        }
    }
    let [part6, state] = nets;
    (part6, state)
}

pub struct Problem {
    pub u: Tensor<f64>,
    pub rgb: Tensor<f64>,
    pub labels: Vec<usize>,
    pub targets: Vec<f64>,
}

pub fn problem(seed: u64) -> Problem {
    let mut r = rng(seed);
    let rgb = random_tensor(&mut r, &[8, 8, 3]).map(|v| 0.5 + 0.5 * v);
    let s = random_tensor(&mut r, &[8, 8, 3]).map(|v| 0.5 + 0.5 * v);
    Problem {
        u: concat_channels(&s, &rgb).unwrap(),
        rgb,
        labels: (0..64).map(|_| r.gen_range(0..4)).collect(),
        targets: (0..6).map(|_| r.gen_range(0..2) as f64).collect(),
    }
}
