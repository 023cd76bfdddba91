//! Compares iterative training (setting 2) with the unfolded variant
//! (setting 3), whose windows back-propagate through recomputed S images.
//!
//! ```bash
//! cargo run --release -p isin --example unfolded_training -- 300
//! ```

use isin::bench::BenchConfig;
use isin::data::{default_schema, generate, GenConfig};
use isin::trainer::{evaluate, Mode, TrainConfig, Trainer};

fn main() -> isin::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let schema = default_schema();
    let all = generate(&GenConfig { seed: 2, num_samples: n + n / 5, ..GenConfig::default() }, &schema)?;
    let (train, test) = all.split_at(n);

    for (mode, h) in [(Mode::Setting2, 1), (Mode::Setting3, 3)] {
        let cfg = TrainConfig {
            mode,
            subsequence_length: h,
            max_iterations: 6,
            stop_rel_improvement: f64::MIN,
            ..BenchConfig::default().train
        };
        let t = Trainer::train(train, &schema, &cfg, |_| Ok(()))?;
        let report = evaluate(t.state(), test, &schema, false)?;
        let last = t.state().loss_history.last().expect("trained");
        println!("{mode}: final training loss {:.4}  test {}", last.total, report.summary_line());
    }
    Ok(())
}
