//! The synthetic ablation benchmark: one seed trains setting 2 (whose first
//! iteration is setting 1), baseline 1 and optionally setting 3 on the same
//! generated data, and scores each on a held-out test set.

use std::time::{Duration, Instant};

use crate::data::{default_schema, generate, GenConfig, PartStateSchema, Sample};
use crate::error::Result;
use crate::tensor::SgdConfig;
use crate::trainer::{evaluate, Mode, TrainConfig, Trainer};

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub num_train: usize,
    pub num_test: usize,
    pub image_size: usize,
    pub train: TrainConfig,
    pub run_setting3: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            num_train: 1000,
            num_test: 200,
            image_size: 32,
            train: TrainConfig {
                lambda: 2.0,
                epochs_per_iteration: 8,
                bootstrap_epochs: 30,
                anneal_lr: true,
                sgd: SgdConfig {
                    learning_rate: 0.02,
                    ..SgdConfig::default()
                },
                ..TrainConfig::default()
            },
            run_setting3: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub map: f64,
    pub seg_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// Setting 2 scored after every outer iteration; entry 0 is setting 1.
    pub iterations: Vec<IterationMetrics>,
    /// Final setting 2 state network fed ground-truth S.
    pub gt_seg_map: f64,
    pub baseline1_map: f64,
    pub setting3_map: Option<f64>,
    /// Wall time of everything but setting 3.
    pub elapsed: Duration,
}

impl SeedResult {
    pub fn setting1_map(&self) -> f64 {
        self.iterations[0].map
    }

    pub fn setting2_map(&self) -> f64 {
        self.iterations.last().expect("at least one iteration").map
    }
}

/// Train and test samples for one seed: one generator run, split in order.
pub fn benchmark_data(cfg: &BenchConfig, seed: u64, schema: &PartStateSchema) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let mut all = generate(
        &GenConfig {
            seed,
            image_size: cfg.image_size,
            num_samples: cfg.num_train + cfg.num_test,
            ..GenConfig::default()
        },
        schema,
    )?;
    let test = all.split_off(cfg.num_train);
    Ok((all, test))
}

pub fn run_seed(cfg: &BenchConfig, seed: u64) -> Result<SeedResult> {
    let start = Instant::now();
    let schema = default_schema();
    let (train, test) = benchmark_data(cfg, seed, &schema)?;

    let mut iterations = Vec::new();
    let s2_cfg = TrainConfig {
        mode: Mode::Setting2,
        seed,
        ..cfg.train.clone()
    };
    let s2 = Trainer::train(&train, &schema, &s2_cfg, |t| {
        let report = evaluate(t.state(), &test, &schema, false)?;
        iterations.push(IterationMetrics {
            iteration: t.state().current_iteration,
            map: report.map.map,
            seg_acc: report.seg_acc,
        });
        Ok(())
    })?;
    let gt_seg_map = evaluate(s2.state(), &test, &schema, true)?.map.map;
    drop(s2);

    let b1_cfg = TrainConfig {
        mode: Mode::Baseline1,
        ..s2_cfg.clone()
    };
    let b1 = Trainer::train(&train, &schema, &b1_cfg, |_| Ok(()))?;
    let baseline1_map = evaluate(b1.state(), &test, &schema, false)?.map.map;
    drop(b1);
    let elapsed = start.elapsed();

    let setting3_map = if cfg.run_setting3 {
        let s3_cfg = TrainConfig {
            mode: Mode::Setting3,
            ..s2_cfg
        };
        let s3 = Trainer::train(&train, &schema, &s3_cfg, |_| Ok(()))?;
        Some(evaluate(s3.state(), &test, &schema, false)?.map.map)
    } else {
        None
    };

    Ok(SeedResult {
        seed,
        iterations,
        gt_seg_map,
        baseline1_map,
        setting3_map,
        elapsed,
    })
}

/// Median of a nonempty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-iteration median seg accuracy across seeds, over the iterations every
/// seed reached.
pub fn median_seg_acc_curve(results: &[SeedResult]) -> Vec<f64> {
    let len = results.iter().map(|r| r.iterations.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| median(&results.iter().map(|r| r.iterations[i].seg_acc).collect::<Vec<_>>()))
        .collect()
}
