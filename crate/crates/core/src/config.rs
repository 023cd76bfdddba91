//! `key = value` run configuration. Every key is also a `--key` flag.

use std::path::Path;

use crate::data::{read_text, GenConfig};
use crate::error::{Error, Result};
use crate::relationship::RelateConfig;
use crate::trainer::TrainConfig;

/// (key, help) for every configurable setting.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "seed for every random substream"),
    ("gen.image_size", "side length of generated images, a multiple of 4, at least 16"),
    ("gen.num_samples", "number of generated samples"),
    ("gen.occluder_probability", "chance of a distractor blob next to an idle panel"),
    ("gen.detach_probability", "chance that the knob is absent"),
    ("gen.noise_sigma", "std-dev of per-channel pixel noise"),
    ("train.mode", "setting1 | setting2 | setting3 | baseline1"),
    ("train.lambda", "weight of the segmentation term"),
    ("train.max_iterations", "iteration cap M"),
    ("train.epochs_per_iteration", "SGD epochs per outer iteration; a setting3 window of h gets h times as many"),
    ("train.bootstrap_epochs", "Part-3 epochs before the first iteration"),
    ("train.subsequence_length", "window length h of setting3"),
    ("train.stop_rel_improvement", "stop when the total loss improves less than this (relative)"),
    ("train.learning_rate", "SGD learning rate"),
    ("train.momentum", "SGD momentum"),
    ("train.batch_size", "SGD minibatch size"),
    ("train.weight_decay", "L2 weight decay"),
    ("train.conv_widths", "three comma-separated channel widths"),
    ("train.warm_start_part6", "start Part-6 from the trained Part-3 (true|false)"),
    ("train.anneal_lr", "decay the learning rate linearly to zero within each stage (true|false)"),
    ("relate.pad_len", "state vector padding length"),
    ("relate.epochs", "hinge SGD epochs"),
    ("relate.learning_rate", "hinge SGD step size"),
    ("relate.regularization", "L2 regularization of the predicate classifiers"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub relate: RelateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gen: GenConfig::default(),
            train: TrainConfig::default(),
            relate: RelateConfig::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => {
                let seed = num(key, v)?;
                self.gen.seed = seed;
                self.train.seed = seed;
                self.relate.seed = seed;
            }
            "gen.image_size" => self.gen.image_size = num(key, v)?,
            "gen.num_samples" => self.gen.num_samples = num(key, v)?,
            "gen.occluder_probability" => self.gen.occluder_probability = num(key, v)?,
            "gen.detach_probability" => self.gen.detach_probability = num(key, v)?,
            "gen.noise_sigma" => self.gen.noise_sigma = num(key, v)?,
            "train.mode" => self.train.mode = v.parse()?,
            "train.lambda" => self.train.lambda = num(key, v)?,
            "train.max_iterations" => self.train.max_iterations = num(key, v)?,
            "train.epochs_per_iteration" => self.train.epochs_per_iteration = num(key, v)?,
            "train.bootstrap_epochs" => self.train.bootstrap_epochs = num(key, v)?,
            "train.subsequence_length" => self.train.subsequence_length = num(key, v)?,
            "train.stop_rel_improvement" => self.train.stop_rel_improvement = num(key, v)?,
            "train.learning_rate" => self.train.sgd.learning_rate = num(key, v)?,
            "train.momentum" => self.train.sgd.momentum = num(key, v)?,
            "train.batch_size" => self.train.sgd.batch_size = num(key, v)?,
            "train.weight_decay" => self.train.sgd.weight_decay = num(key, v)?,
            "train.conv_widths" => {
                let widths = v
                    .split(',')
                    .map(|w| num::<usize>(key, w.trim()))
                    .collect::<Result<Vec<_>>>()?;
                self.train.conv_widths = widths
                    .try_into()
                    .map_err(|_| Error::Config(format!("{key}: expected three widths, got {v:?}")))?;
            }
            "train.warm_start_part6" => self.train.warm_start_part6 = num(key, v)?,
            "train.anneal_lr" => self.train.anneal_lr = num(key, v)?,
            "relate.pad_len" => self.relate.pad_len = num(key, v)?,
            "relate.epochs" => self.relate.epochs = num(key, v)?,
            "relate.learning_rate" => self.relate.learning_rate = num(key, v)?,
            "relate.regularization" => self.relate.regularization = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected key = value"))?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}:{}: {msg}", path.display(), n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_text(&read_text(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.train.validate()?;
        self.relate.validate()?;
        for &w in &self.train.conv_widths {
            if w == 0 {
                return Err(Error::Config("train.conv_widths must be positive".into()));
            }
        }
        Ok(())
    }

    /// The configuration as a file `apply_text` reads back unchanged.
    pub fn to_text(&self) -> String {
        let (g, t, r) = (&self.gen, &self.train, &self.relate);
        let w = t.conv_widths;
        [
            format!("seed = {}", t.seed),
            format!("gen.image_size = {}", g.image_size),
            format!("gen.num_samples = {}", g.num_samples),
            format!("gen.occluder_probability = {}", g.occluder_probability),
            format!("gen.detach_probability = {}", g.detach_probability),
            format!("gen.noise_sigma = {}", g.noise_sigma),
            format!("train.mode = {}", t.mode),
            format!("train.lambda = {}", t.lambda),
            format!("train.max_iterations = {}", t.max_iterations),
            format!("train.epochs_per_iteration = {}", t.epochs_per_iteration),
            format!("train.bootstrap_epochs = {}", t.bootstrap_epochs),
            format!("train.subsequence_length = {}", t.subsequence_length),
            format!("train.stop_rel_improvement = {}", t.stop_rel_improvement),
            format!("train.learning_rate = {}", t.sgd.learning_rate),
            format!("train.momentum = {}", t.sgd.momentum),
            format!("train.batch_size = {}", t.sgd.batch_size),
            format!("train.weight_decay = {}", t.sgd.weight_decay),
            format!("train.conv_widths = {},{},{}", w[0], w[1], w[2]),
            format!("train.warm_start_part6 = {}", t.warm_start_part6),
            format!("train.anneal_lr = {}", t.anneal_lr),
            format!("relate.pad_len = {}", r.pad_len),
            format!("relate.epochs = {}", r.epochs),
            format!("relate.learning_rate = {}", r.learning_rate),
            format!("relate.regularization = {}", r.regularization),
        ]
        .join("\n")
            + "\n"
    }
}
