//! Scores corrupted copies of the ground truth with the segment-IoU mAP
//! and segmentation accuracy, to show how each corruption moves the metrics.
//!
//! ```bash
//! cargo run -p isin --example evaluate_predictions
//! ```

use isin::data::{default_schema, generate, GenConfig, PartLabelMap};
use isin::eval::{EvalReport, ScoredSample};
use isin::rng::substream;
use rand::Rng;

fn main() -> isin::Result<()> {
    let schema = default_schema();
    let samples = generate(&GenConfig { num_samples: 100, ..GenConfig::default() }, &schema)?;
    let gt: Vec<_> = samples.iter().map(|s| (s.labels.clone(), s.states.clone())).collect();
    let mut r = substream(3, "data", 0);

    for (name, flip_pixels, score_noise) in [
        ("ground truth", 0.0, 0.0),
        ("noisy scores", 0.0, 0.6),
        ("noisy masks", 0.3, 0.0),
        ("both", 0.3, 0.6),
    ] {
        let preds = samples
            .iter()
            .map(|s| {
                let labels = s
                    .labels
                    .labels()
                    .iter()
                    .map(|&l| if r.gen_bool(flip_pixels) { r.gen_range(0..=3) } else { l })
                    .collect();
                Ok(ScoredSample {
                    labels: PartLabelMap::new(s.labels.height(), s.labels.width(), labels)?,
                    state_scores: s
                        .states
                        .bits()
                        .iter()
                        .map(|&b| (b as u8 as f64 + r.gen_range(-score_noise..=score_noise)).clamp(0.0, 1.0))
                        .collect(),
                })
            })
            .collect::<isin::Result<Vec<_>>>()?;
        let report = EvalReport::evaluate(&preds, &gt, &schema)?;
        println!("{name:<13} {}", report.summary_line());
    }
    Ok(())
}
