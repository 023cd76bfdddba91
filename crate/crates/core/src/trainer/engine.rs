use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{should_stop, IterationLoss, Mode, TrainConfig, TrainState};
use crate::colormap::{build_colormap, render_s, render_s_graph, ColorMap};
use crate::data::{PartStateSchema, Sample};
use crate::error::{Error, Result};
use crate::networks::{
    part_net_forward, part_net_logits, state_net_logits, ArchConfig, NetKind, NetworkParams,
};
use crate::rng::substream;
use crate::tensor::{concat_channels, sgd_step, Element, Graph, SgdConfig, Tensor, Var, Velocity};

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    /// 0 for Part-3 bootstrap epochs.
    pub iteration: usize,
    pub epoch: usize,
    pub seg_loss: f64,
    pub state_loss: f64,
    pub total: f64,
}

impl EpochLog {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6}",
            self.iteration, self.epoch, self.seg_loss, self.state_loss, self.total
        )
    }
}

struct Prepared {
    rgb: Tensor<f32>,
    labels: Vec<usize>,
    targets: Vec<f32>,
}

/// Summed objective over `window` consecutive iterations starting from the
/// RGB-S image `u`:
///
/// ```text
/// Σ_t  l_state(g({M·f(u_t); I}), a) + λ·l_seg(f(u_t), s),   u_{t+1} = {M·f(u_t); I}
/// ```
///
/// With `window == 1` this is the single-iteration objective. Returns the
/// total and the (seg, state) loss nodes of every step.
#[allow(clippy::too_many_arguments)]
pub fn joint_objective<T: Element>(
    g: &mut Graph<T>,
    part6: &[Var],
    state: &[Var],
    u: Var,
    rgb: Var,
    labels: &[usize],
    targets: &[T],
    lambda: f64,
    window: usize,
    cmap: &ColorMap,
) -> Result<(Var, Vec<(Var, Var)>)> {
    let mut u = u;
    let mut total: Option<Var> = None;
    let mut steps = Vec::with_capacity(window);
    for _ in 0..window {
        let logits = part_net_logits(g, part6, u)?;
        let probs = g.softmax(logits)?;
        let s = render_s_graph(g, probs, cmap)?;
        let next = g.concat_channels(s, rgb)?;
        let a = state_net_logits(g, state, next)?;
        let state_loss = g.binary_cross_entropy(a, targets)?;
        let seg_loss = g.softmax_cross_entropy(logits, labels)?;
        let weighted = g.scale(seg_loss, T::from_f64(lambda))?;
        let step = g.add(state_loss, weighted)?;
        total = Some(match total {
            Some(t) => g.add(t, step)?,
            None => step,
        });
        steps.push((seg_loss, state_loss));
        u = next;
    }
    let total = total.ok_or_else(|| Error::Training("empty objective window".into()))?;
    Ok((total, steps))
}

type SampleLoss<'a> = dyn Fn(&mut Graph<f32>, &[Vec<Var>], usize) -> Result<(Var, Vec<f64>)> + Sync + 'a;

/// Minibatch SGD over `n` samples. Per-sample gradients are computed in
/// parallel and summed in batch order, so results do not depend on thread
/// count. With `anneal` the step size falls linearly from the configured
/// rate to zero over all steps of the call. Returns the mean loss components
/// of each epoch.
#[allow(clippy::too_many_arguments)]
fn run_epochs(
    nets: &mut [&mut NetworkParams<f32>],
    n: usize,
    sgd: &SgdConfig,
    anneal: bool,
    epochs: usize,
    seed: u64,
    stream_base: u64,
    loss: &SampleLoss<'_>,
) -> Result<Vec<Vec<f64>>> {
    let mut velocities: Vec<Velocity<f32>> = nets.iter().map(|_| Velocity::new()).collect();
    let mut history = Vec::with_capacity(epochs);
    let total_steps = epochs * n.div_ceil(sgd.batch_size);
    let mut step = 0usize;
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(seed, "shuffle", stream_base + epoch as u64));
        let mut sums: Vec<f64> = Vec::new();
        for batch in order.chunks(sgd.batch_size) {
            let shared: Vec<&NetworkParams<f32>> = nets.iter().map(|p| &**p).collect();
            let results: Vec<Result<(Vec<Vec<Tensor<f32>>>, Vec<f64>)>> = batch
                .par_iter()
                .map(|&j| {
                    let mut g = Graph::new();
                    let vars: Vec<Vec<Var>> = shared.iter().map(|p| p.register(&mut g, true)).collect();
                    let (l, comps) = loss(&mut g, &vars, j)?;
                    let mut grads = g.backward(l)?;
                    let per_net = vars
                        .iter()
                        .zip(&shared)
                        .map(|(vs, p)| {
                            vs.iter()
                                .zip(&p.tensors)
                                .map(|(v, t)| grads.take(*v).unwrap_or_else(|| Tensor::zeros(t.shape())))
                                .collect()
                        })
                        .collect();
                    Ok((per_net, comps))
                })
                .collect();

            let mut acc: Option<Vec<Vec<Tensor<f32>>>> = None;
            for r in results {
                let (grads, comps) = r?;
                if sums.is_empty() {
                    sums = vec![0.0; comps.len()];
                }
                for (s, c) in sums.iter_mut().zip(&comps) {
                    *s += c;
                }
                match &mut acc {
                    None => acc = Some(grads),
                    Some(a) => {
                        for (an, gn) in a.iter_mut().zip(grads) {
                            for (at, gt) in an.iter_mut().zip(gn) {
                                for (x, y) in at.data_mut().iter_mut().zip(gt.data()) {
                                    *x += *y;
                                }
                            }
                        }
                    }
                }
            }
            let mut acc = acc.expect("nonempty batch");
            let inv = 1.0 / batch.len() as f32;
            let mut cfg = *sgd;
            if anneal {
                cfg.learning_rate *= 1.0 - step as f64 / total_steps as f64;
            }
            step += 1;
            for ((net, grads), vel) in nets.iter_mut().zip(&mut acc).zip(&mut velocities) {
                for t in grads.iter_mut() {
                    t.data_mut().iter_mut().for_each(|v| *v *= inv);
                }
                sgd_step(&mut net.tensors, grads, vel, &cfg)?;
            }
        }
        history.push(sums.iter().map(|s| s / n as f64).collect());
    }
    Ok(history)
}

/// Owns the training set, its current S images and the evolving networks.
pub struct Trainer {
    cfg: TrainConfig,
    cmap: ColorMap,
    data: Vec<Prepared>,
    s_images: Vec<Tensor<f32>>,
    state: TrainState,
    log: Vec<EpochLog>,
}

impl Trainer {
    /// Initializes all three networks, trains Part-3 on RGB, and forms
    /// u₁ = {S₁; I} for every training sample.
    pub fn bootstrap(samples: &[Sample], schema: &PartStateSchema, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let first = samples
            .first()
            .ok_or_else(|| Error::Training("empty training set".into()))?;
        let (h, w, _) = first.image.hwc("bootstrap")?;
        if h != w {
            return Err(Error::Config(format!("images must be square, got {h}×{w}")));
        }
        let k = schema.num_parts();
        let d = schema.total_state_bins();
        let arch = ArchConfig {
            conv_widths: cfg.conv_widths,
            ..ArchConfig::new(h, 3, k, d)
        };
        arch.validate()?;

        let mut data = Vec::with_capacity(samples.len());
        for s in samples {
            s.validate(schema)?;
            if s.image.shape() != first.image.shape() {
                return Err(Error::dim(
                    "bootstrap",
                    format!("sample {} has shape {:?}", s.id, s.image.shape()),
                ));
            }
            data.push(Prepared {
                rgb: s.image.clone(),
                labels: s.labels.class_indices(),
                targets: s.states.as_f32(),
            });
        }

        let mut state = TrainState {
            mode: cfg.mode,
            part3: NetworkParams::init(NetKind::Part, &arch, &mut substream(cfg.seed, "init", 0))?,
            part6: NetworkParams::init(NetKind::Part, &arch.with_channels(6), &mut substream(cfg.seed, "init", 1))?,
            state: NetworkParams::init(NetKind::State, &arch.with_channels(6), &mut substream(cfg.seed, "init", 2))?,
            current_iteration: 0,
            loss_history: Vec::new(),
        };
        let cmap = build_colormap(k)?;

        let loss = |g: &mut Graph<f32>, vars: &[Vec<Var>], j: usize| -> Result<(Var, Vec<f64>)> {
            let x = g.input(data[j].rgb.clone());
            let logits = part_net_logits(g, &vars[0], x)?;
            let l = g.softmax_cross_entropy(logits, &data[j].labels)?;
            Ok((l, vec![g.value(l).data()[0] as f64]))
        };
        let history = run_epochs(
            &mut [&mut state.part3],
            data.len(),
            &cfg.sgd,
            cfg.anneal_lr,
            cfg.bootstrap_epochs,
            cfg.seed,
            0,
            &loss,
        )?;
        let log = history
            .iter()
            .enumerate()
            .map(|(e, c)| EpochLog {
                iteration: 0,
                epoch: e,
                seg_loss: c[0],
                state_loss: 0.0,
                total: c[0],
            })
            .collect();

        if cfg.warm_start_part6 {
            state.part6 = part6_from_part3(&state.part3)?;
        }
        let part3 = &state.part3;
        let s_images = data
            .par_iter()
            .map(|p| render_s(&part_net_forward(part3, &p.rgb)?, &cmap))
            .collect::<Result<Vec<_>>>()?;

        Ok(Trainer {
            cfg: cfg.clone(),
            cmap,
            data,
            s_images,
            state,
            log,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn colormap(&self) -> &ColorMap {
        &self.cmap
    }

    pub fn log(&self) -> &[EpochLog] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Current RGB-S image of training sample `j`: channels 0–2 are S,
    /// channels 3–5 the original RGB.
    pub fn rgb_s(&self, j: usize) -> Tensor<f32> {
        concat_channels(&self.s_images[j], &self.data[j].rgb).expect("matching dims")
    }

    pub fn should_stop(&self) -> bool {
        should_stop(&self.state, &self.cfg)
    }

    /// One outer iteration of joint Part-6 + State training.
    pub fn train_iteration(&mut self) -> Result<()> {
        self.train_window(1)
    }

    /// Trains the objective summed over the next `h` iterations (clamped to
    /// the remaining ones) for `h` iterations' worth of epochs, then advances
    /// u by that many Part-6 passes. The sum is divided by `h` so a window
    /// takes steps of the same scale as a single iteration.
    pub fn train_window(&mut self, h: usize) -> Result<()> {
        if self.cfg.mode == Mode::Baseline1 {
            return Err(Error::Training("baseline1 has no iterative stage".into()));
        }
        let cap = self.cfg.iteration_cap();
        if self.state.current_iteration >= cap {
            return Err(Error::Training(format!(
                "already completed {} of {cap} iterations",
                self.state.current_iteration
            )));
        }
        let h = h.clamp(1, cap - self.state.current_iteration);
        let start = self.state.current_iteration;
        let lambda = self.cfg.lambda;
        let (data, s_images, cmap) = (&self.data, &self.s_images, &self.cmap);

        let loss = |g: &mut Graph<f32>, vars: &[Vec<Var>], j: usize| -> Result<(Var, Vec<f64>)> {
            let p = &data[j];
            let u = g.input(concat_channels(&s_images[j], &p.rgb)?);
            let rgb = g.input(p.rgb.clone());
            let (total, steps) =
                joint_objective(g, &vars[0], &vars[1], u, rgb, &p.labels, &p.targets, lambda, h, cmap)?;
            let total = g.scale(total, 1.0 / h as f32)?;
            let comps = steps
                .iter()
                .flat_map(|&(seg, st)| [g.value(seg).data()[0] as f64, g.value(st).data()[0] as f64])
                .collect();
            Ok((total, comps))
        };

        let epochs = self.cfg.epochs_per_iteration * h;
        let mut history = run_epochs(
            &mut [&mut self.state.part6, &mut self.state.state],
            data.len(),
            &self.cfg.sgd,
            self.cfg.anneal_lr,
            epochs,
            self.cfg.seed,
            ((start as u64) + 1) << 20,
            &loss,
        )?;
        if history.is_empty() {
            // No training: measure the objective at the unchanged parameters.
            let nets = [&self.state.part6, &self.state.state];
            let per_sample = (0..data.len())
                .into_par_iter()
                .map(|j| {
                    let mut g = Graph::new();
                    let vars: Vec<Vec<Var>> = nets.iter().map(|p| p.register(&mut g, false)).collect();
                    loss(&mut g, &vars, j).map(|(_, c)| c)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut mean = vec![0.0; 2 * h];
            for c in &per_sample {
                for (m, v) in mean.iter_mut().zip(c) {
                    *m += v / data.len() as f64;
                }
            }
            history.push(mean);
        }

        for (e, comps) in history.iter().enumerate() {
            for t in 0..h {
                let (seg, st) = (comps[2 * t], comps[2 * t + 1]);
                if epochs > 0 {
                    self.log.push(EpochLog {
                        iteration: start + t + 1,
                        epoch: e,
                        seg_loss: seg,
                        state_loss: st,
                        total: st + lambda * seg,
                    });
                }
            }
        }
        let last = history.last().expect("at least one entry");
        for t in 0..h {
            let (seg, st) = (last[2 * t], last[2 * t + 1]);
            self.state.loss_history.push(IterationLoss {
                seg_loss: seg,
                state_loss: st,
                total: st + lambda * seg,
            });
        }

        self.advance_u(h)?;
        self.state.current_iteration += h;
        Ok(())
    }

    /// uᵢ = {M·f(u_{i−1}); I}, applied `steps` times to every sample.
    fn advance_u(&mut self, steps: usize) -> Result<()> {
        let part6 = &self.state.part6;
        let cmap = &self.cmap;
        let data = &self.data;
        self.s_images
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(j, s)| -> Result<()> {
                for _ in 0..steps {
                    let u = concat_channels(s, &data[j].rgb)?;
                    *s = render_s(&part_net_forward(part6, &u)?, cmap)?;
                }
                Ok(())
            })
    }

    /// Baseline 1: the State network on RGB with all-zero S channels.
    fn train_baseline(&mut self) -> Result<()> {
        let data = &self.data;
        let loss = |g: &mut Graph<f32>, vars: &[Vec<Var>], j: usize| -> Result<(Var, Vec<f64>)> {
            let (h, w, _) = data[j].rgb.hwc("baseline")?;
            let u = concat_channels(&Tensor::zeros(&[h, w, 3]), &data[j].rgb)?;
            let x = g.input(u);
            let a = state_net_logits(g, &vars[0], x)?;
            let l = g.binary_cross_entropy(a, &data[j].targets)?;
            Ok((l, vec![g.value(l).data()[0] as f64]))
        };
        let history = run_epochs(
            &mut [&mut self.state.state],
            data.len(),
            &self.cfg.sgd,
            self.cfg.anneal_lr,
            self.cfg.epochs_per_iteration,
            self.cfg.seed,
            1 << 20,
            &loss,
        )?;
        for (e, c) in history.iter().enumerate() {
            self.log.push(EpochLog {
                iteration: 1,
                epoch: e,
                seg_loss: 0.0,
                state_loss: c[0],
                total: c[0],
            });
        }
        let last = history.last().map_or(0.0, |c| c[0]);
        self.state.loss_history.push(IterationLoss {
            seg_loss: 0.0,
            state_loss: last,
            total: last,
        });
        self.state.current_iteration = 1;
        Ok(())
    }

    /// Full unfolded training: windows of `subsequence_length` iterations
    /// until the iteration cap.
    pub fn train_unfolded(&mut self) -> Result<()> {
        if self.cfg.mode != Mode::Setting3 {
            return Err(Error::Training(format!(
                "unfolded training requires setting3, configured {}",
                self.cfg.mode
            )));
        }
        while self.state.current_iteration < self.cfg.iteration_cap() {
            self.train_window(self.cfg.subsequence_length)?;
        }
        Ok(())
    }

    /// Runs the configured mode to completion. `observer` is called after
    /// every completed iteration or window.
    pub fn train(
        samples: &[Sample],
        schema: &PartStateSchema,
        cfg: &TrainConfig,
        mut observer: impl FnMut(&Trainer) -> Result<()>,
    ) -> Result<Trainer> {
        let mut t = Trainer::bootstrap(samples, schema, cfg)?;
        match cfg.mode {
            Mode::Baseline1 => {
                t.train_baseline()?;
                observer(&t)?;
            }
            Mode::Setting3 => {
                while t.state.current_iteration < cfg.iteration_cap() {
                    t.train_window(cfg.subsequence_length)?;
                    observer(&t)?;
                }
            }
            Mode::Setting1 | Mode::Setting2 => loop {
                t.train_iteration()?;
                observer(&t)?;
                if t.should_stop() {
                    break;
                }
            },
        }
        Ok(t)
    }
}

/// Part-6 parameters that compute exactly what `part3` computes: the RGB
/// taps of the first layer are copied and the S taps start at zero.
pub fn part6_from_part3(part3: &NetworkParams<f32>) -> Result<NetworkParams<f32>> {
    let arch = part3.arch.with_channels(6);
    let mut tensors = part3.tensors.clone();
    let w = &part3.tensors[0];
    let &[kh, kw, cin, cout] = w.shape() else {
        return Err(Error::dim("part6_from_part3", format!("first kernel {:?}", w.shape())));
    };
    let mut data = vec![0.0f32; kh * kw * 2 * cin * cout];
    for tap in 0..kh * kw {
        for c in 0..cin {
            let src = (tap * cin + c) * cout;
            let dst = (tap * 2 * cin + cin + c) * cout;
            data[dst..dst + cout].copy_from_slice(&w.data()[src..src + cout]);
        }
    }
    tensors[0] = Tensor::new(&[kh, kw, 2 * cin, cout], data)?;
    NetworkParams::from_tensors(NetKind::Part, &arch, tensors)
}
