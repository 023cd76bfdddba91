//! Dataset directory layout:
//!
//! ```text
//! schema.txt      category, then one `part<TAB>phrase|phrase|...` line per part
//! manifest.txt    id<TAB>image_rel_path<TAB>labels_rel_path<TAB>state_bits
//! images/<id>.ppm
//! labels/<id>.pgm
//! ```

use std::fs;
use std::path::Path;

use super::netpbm::{read_pgm, read_ppm, write_pgm, write_ppm};
use super::synth::bytes_to_image;
use super::{Dataset, PartLabelMap, PartStateSchema, PartStateVector, Sample};
use crate::error::{Error, Result};

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn image_to_bytes(image: &crate::tensor::Tensor<f32>) -> Vec<u8> {
    image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    create_dir(&dir.join("images"))?;
    create_dir(&dir.join("labels"))?;
    let schema_path = dir.join("schema.txt");
    fs::write(&schema_path, dataset.schema.to_text()).map_err(|e| Error::io(&schema_path, e))?;

    let mut manifest = String::new();
    for s in &dataset.samples {
        s.validate(&dataset.schema)?;
        if s.id.is_empty() || s.id.contains(['\t', '\n', '/', '\\']) {
            return Err(Error::Config(format!("sample id {:?} is not a file name", s.id)));
        }
        let (h, w, _) = s.image.hwc("write_dataset")?;
        let img_rel = format!("images/{}.ppm", s.id);
        let lab_rel = format!("labels/{}.pgm", s.id);
        write_ppm(&dir.join(&img_rel), w, h, &image_to_bytes(&s.image))?;
        write_pgm(&dir.join(&lab_rel), w, h, s.labels.labels())?;
        manifest.push_str(&format!("{}\t{img_rel}\t{lab_rel}\t{}\n", s.id, s.states));
    }
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    match fs::read(path) {
        Ok(b) => String::from_utf8(b).map_err(|_| Error::parse(path, 1, "file is not valid UTF-8")),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let schema_path = dir.join("schema.txt");
    let schema = PartStateSchema::parse(&read_text(&schema_path)?, &schema_path)?;
    let manifest_path = dir.join("manifest.txt");
    let manifest = read_text(&manifest_path)?;
    let k = schema.num_parts();

    let mut samples = Vec::new();
    for (i, line) in manifest.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, img_rel, lab_rel, bits] = fields[..] else {
            return Err(Error::parse(
                &manifest_path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        };
        let states = PartStateVector::parse(bits)
            .filter(|v| v.len() == schema.total_state_bins())
            .ok_or_else(|| {
                Error::parse(
                    &manifest_path,
                    lineno,
                    format!(
                        "state bits {bits:?} must be {} characters of 0/1",
                        schema.total_state_bins()
                    ),
                )
            })?;

        let img_path = dir.join(img_rel);
        let img = read_ppm(&img_path)?;
        let lab_path = dir.join(lab_rel);
        let lab = read_pgm(&lab_path)?;
        if (img.width, img.height) != (lab.width, lab.height) {
            return Err(Error::parse(
                &manifest_path,
                lineno,
                format!(
                    "image is {}×{} but labels are {}×{}",
                    img.width, img.height, lab.width, lab.height
                ),
            ));
        }
        if let Some(off) = lab.data.iter().position(|&v| v as usize > k) {
            return Err(Error::parse(
                &lab_path,
                format!("pixel {off}"),
                format!("label {} exceeds part count {k}", lab.data[off]),
            ));
        }
        let sample = Sample {
            id: id.to_string(),
            category: schema.category.clone(),
            image: bytes_to_image(img.height, img.width, &img.data),
            labels: PartLabelMap::new(lab.height, lab.width, lab.data)?,
            states,
        };
        sample
            .validate(&schema)
            .map_err(|e| Error::parse(&manifest_path, lineno, e.to_string()))?;
        samples.push(sample);
    }
    Ok(Dataset { schema, samples })
}
