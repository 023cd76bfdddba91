//! Trains the iterative model on a freshly generated dataset and reports
//! per-iteration losses and held-out accuracy.
//!
//! ```bash
//! cargo run --release -p isin --example train_isin -- setting2 400
//! ```

use std::time::Instant;

use isin::bench::BenchConfig;
use isin::data::{default_schema, generate, GenConfig};
use isin::trainer::{evaluate, Mode, TrainConfig, Trainer};

fn main() -> isin::Result<()> {
    let mut args = std::env::args().skip(1);
    let mode: Mode = args.next().unwrap_or_else(|| "setting2".into()).parse()?;
    let n_train: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(400);
    let n_test = n_train / 5;

    let schema = default_schema();
    let all = generate(
        &GenConfig {
            seed: 1,
            num_samples: n_train + n_test,
            ..GenConfig::default()
        },
        &schema,
    )?;
    let (train, test) = all.split_at(n_train);

    // The benchmark's training settings, which suit this dataset size.
    let cfg = TrainConfig {
        mode,
        seed: 1,
        ..BenchConfig::default().train
    };
    let start = Instant::now();
    let trainer = Trainer::train(train, &schema, &cfg, |t| {
        let st = t.state();
        let report = evaluate(st, test, &schema, false)?;
        let loss = st.loss_history.last().expect("one iteration done");
        println!(
            "iter {:>2}  total {:.4}  state {:.4}  seg {:.4}  {}  [{:.0?}]",
            st.current_iteration,
            loss.total,
            loss.state_loss,
            loss.seg_loss,
            report.summary_line(),
            start.elapsed()
        );
        Ok(())
    })?;
    if mode != Mode::Baseline1 {
        let gt = evaluate(trainer.state(), test, &schema, true)?;
        println!("with ground-truth S: {}", gt.summary_line());
    }
    println!("finished after {} iterations", trainer.state().current_iteration);
    Ok(())
}
