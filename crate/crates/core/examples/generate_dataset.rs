//! Generates a small synthetic part-state dataset and writes it to disk.
//!
//! ```bash
//! cargo run -p isin --example generate_dataset -- /tmp/widgets 64
//! ```

use std::path::PathBuf;

use isin::data::{default_schema, generate, read_dataset, write_dataset, Dataset, GenConfig};

fn main() -> isin::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "widgets".into()));
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(64);

    let schema = default_schema();
    let cfg = GenConfig {
        seed: 7,
        num_samples: n,
        ..GenConfig::default()
    };
    let dataset = Dataset {
        samples: generate(&cfg, &schema)?,
        schema,
    };
    write_dataset(&dir, &dataset)?;

    let back = read_dataset(&dir)?;
    assert_eq!(back, dataset);

    let bins = dataset.schema.total_state_bins();
    let mut counts = vec![0usize; bins];
    for s in &dataset.samples {
        for (b, c) in counts.iter_mut().enumerate() {
            *c += s.states.get(b) as usize;
        }
    }
    println!("wrote {} samples to {}", n, dir.display());
    for (b, c) in counts.iter().enumerate() {
        let (part, phrase) = dataset.schema.bin_label(b);
        println!("  {part:>6} {phrase:<9} {c}");
    }
    Ok(())
}
