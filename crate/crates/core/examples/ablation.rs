//! Runs the synthetic ablation benchmark for a few seeds and prints the
//! setting 1 / setting 2 / baseline 1 / GT-segmentation comparison.
//!
//! ```bash
//! cargo run --release -p isin --example ablation -- 3 --setting3
//! ```

use isin::bench::{median, median_seg_acc_curve, run_seed, BenchConfig};

fn main() -> isin::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: u64 = args.iter().find_map(|a| a.parse().ok()).unwrap_or(3);
    let cfg = BenchConfig {
        run_setting3: args.iter().any(|a| a == "--setting3"),
        ..BenchConfig::default()
    };

    let mut results = Vec::new();
    for seed in 0..seeds {
        let r = run_seed(&cfg, seed)?;
        let curve: Vec<String> = r.iterations.iter().map(|m| format!("{:.3}", m.seg_acc)).collect();
        let maps: Vec<String> = r.iterations.iter().map(|m| format!("{:.3}", m.map)).collect();
        println!(
            "seed {seed}: s1 {:.3}  s2 {:.3}  b1 {:.3}  gt {:.3}  s3 {}  [{:.0?}]",
            r.setting1_map(),
            r.setting2_map(),
            r.baseline1_map,
            r.gt_seg_map,
            r.setting3_map.map_or("-".into(), |v| format!("{v:.3}")),
            r.elapsed
        );
        println!("  mAP     {}", maps.join(" "));
        println!("  seg acc {}", curve.join(" "));
        results.push(r);
    }
    let col = |f: &dyn Fn(&isin::bench::SeedResult) -> f64| median(&results.iter().map(f).collect::<Vec<_>>());
    println!(
        "median: s1 {:.3}  s2 {:.3}  b1 {:.3}  gt {:.3}",
        col(&|r| r.setting1_map()),
        col(&|r| r.setting2_map()),
        col(&|r| r.baseline1_map),
        col(&|r| r.gt_seg_map)
    );
    let curve: Vec<String> = median_seg_acc_curve(&results).iter().map(|v| format!("{v:.3}")).collect();
    println!("median seg acc {}", curve.join(" "));
    Ok(())
}
