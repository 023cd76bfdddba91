//! Prints the part palette and writes a sample's ground-truth S image next
//! to its RGB image.
//!
//! ```bash
//! cargo run -p isin --example colormap_palette -- 5 /tmp/palette
//! ```

use std::path::PathBuf;

use isin::colormap::{build_colormap, one_hot, render_s};
use isin::data::netpbm::write_ppm;
use isin::data::{default_schema, generate, GenConfig};

fn to_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

fn main() -> isin::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "palette".into()));

    let cmap = build_colormap(k)?;
    for part in 0..=k {
        let [r, g, b] = cmap.color(part);
        println!("part {part:>2}: ({r:.4}, {g:.4}, {b:.4})");
    }

    let schema = default_schema();
    let sample = generate(&GenConfig { num_samples: 1, ..GenConfig::default() }, &schema)?.remove(0);
    let widget = build_colormap(schema.num_parts())?;
    let (h, w) = (sample.labels.height(), sample.labels.width());
    let s = render_s(&one_hot::<f32>(sample.labels.labels(), h, w, schema.num_parts() + 1), &widget)?;
    std::fs::create_dir_all(&out).map_err(|e| isin::Error::Config(format!("{}: {e}", out.display())))?;
    write_ppm(&out.join("rgb.ppm"), w, h, &to_bytes(sample.image.data()))?;
    write_ppm(&out.join("s.ppm"), w, h, &to_bytes(s.data()))?;
    println!("wrote {} and {}", out.join("rgb.ppm").display(), out.join("s.ppm").display());
    Ok(())
}
