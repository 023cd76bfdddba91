//! Part-state samples, the synthetic generator, and the on-disk dataset
//! format.

mod io;
pub mod netpbm;
mod schema;
mod synth;

pub(crate) use io::read_text;
pub(crate) use synth::bytes_to_image;
pub use io::{read_dataset, write_dataset};
pub use schema::{default_schema, PartDef, PartStateSchema};
pub use synth::{generate, generate_scenes, Disc, GenConfig, Rect, Scene};

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Dense H×W×F image; F = 3 for RGB, 6 for RGB-S.
pub type ImageTensor = Tensor<f32>;

/// Per-pixel part ids, row-major; 0 is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartLabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl PartLabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::dim(
                "label map",
                format!("{height}×{width} map with {} labels", labels.len()),
            ));
        }
        Ok(PartLabelMap {
            height,
            width,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn max_label(&self) -> u8 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn mask(&self, part_id: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l as usize == part_id).collect()
    }

    pub fn count(&self, part_id: usize) -> usize {
        self.labels.iter().filter(|&&l| l as usize == part_id).count()
    }

    pub fn class_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l as usize).collect()
    }
}

/// Binary vector over all state bins of a category. A part that is not in
/// the image contributes only zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartStateVector(Vec<bool>);

impl PartStateVector {
    pub fn zeros(len: usize) -> Self {
        PartStateVector(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        PartStateVector(bits)
    }

    /// Parses a string of '0'/'1' characters.
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(PartStateVector)
    }

    /// Thresholds per-bin scores at 0.5.
    pub fn from_scores(scores: &[f32]) -> Self {
        PartStateVector(scores.iter().map(|&s| s >= 0.5).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, bin: usize) -> bool {
        self.0[bin]
    }

    pub fn set(&mut self, bin: usize, value: bool) {
        self.0[bin] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn as_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

impl fmt::Display for PartStateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub category: String,
    /// H×W×3, values in [0, 1] on the 8-bit grid.
    pub image: ImageTensor,
    pub labels: PartLabelMap,
    pub states: PartStateVector,
}

impl Sample {
    pub fn validate(&self, schema: &PartStateSchema) -> Result<()> {
        let (h, w, c) = self.image.hwc("sample")?;
        if c != 3 || (h, w) != (self.labels.height, self.labels.width) {
            return Err(Error::dim(
                "sample",
                format!(
                    "image {h}×{w}×{c} vs labels {}×{}",
                    self.labels.height, self.labels.width
                ),
            ));
        }
        let k = schema.num_parts();
        if self.labels.max_label() as usize > k {
            return Err(Error::SchemaMismatch(format!(
                "sample {}: label {} exceeds part count {k}",
                self.id,
                self.labels.max_label()
            )));
        }
        if self.states.len() != schema.total_state_bins() {
            return Err(Error::SchemaMismatch(format!(
                "sample {}: {} state bits, schema has {}",
                self.id,
                self.states.len(),
                schema.total_state_bins()
            )));
        }
        for part in 1..=k {
            if self.labels.count(part) == 0
                && schema.bins_of_part(part).any(|b| self.states.get(b))
            {
                return Err(Error::SchemaMismatch(format!(
                    "sample {}: absent part {} has state bits set",
                    self.id, schema.parts[part - 1].name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: PartStateSchema,
    pub samples: Vec<Sample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    /// 70/15/15 assignment by CRC32 of the sample id.
    pub fn of(id: &str) -> Split {
        match crc32fast::hash(id.as_bytes()) % 100 {
            0..=69 => Split::Train,
            70..=84 => Split::Val,
            _ => Split::Test,
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<Sample> {
        self.samples
            .iter()
            .filter(|s| Split::of(&s.id) == split)
            .cloned()
            .collect()
    }
}
