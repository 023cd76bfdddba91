//! The `gen`, `train`, `infer`, `eval` and `relate` commands. Each writes
//! only under its output directory and returns a short report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::colormap::build_colormap;
use crate::config::RunConfig;
use crate::data::netpbm::{read_pgm, read_ppm, write_pgm, write_ppm};
use crate::data::{
    read_dataset, read_text, write_dataset, Dataset, PartLabelMap, PartStateSchema, PartStateVector, Sample, Split,
};
use crate::error::{Error, Result};
use crate::eval::{recall_at_k, EvalReport, ScoredSample};
use crate::networks::Checkpoint;
use crate::relationship::{
    generate_relationships, predict_relationships, read_priors, read_relationships, train_predicate_model,
    write_relationships, PriorScores, PREDICATES,
};
use crate::trainer::{infer, Prediction, TrainState, Trainer};

/// Which samples of a dataset a command works on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitSel {
    All,
    Only(Split),
}

impl std::str::FromStr for SplitSel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(SplitSel::All);
        }
        Split::parse(s)
            .map(SplitSel::Only)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?} (expected train, val, test or all)")))
    }
}

impl SplitSel {
    pub fn select(self, dataset: &Dataset) -> Vec<Sample> {
        match self {
            SplitSel::All => dataset.samples.clone(),
            SplitSel::Only(s) => dataset.split(s),
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn bin_names(schema: Option<&PartStateSchema>, bins: usize) -> Vec<String> {
    (0..bins)
        .map(|b| match schema {
            Some(s) => {
                let (part, phrase) = s.bin_label(b);
                format!("{part}:{phrase}")
            }
            None => format!("bin{b}"),
        })
        .collect()
}

/// `id,<bin>,...` with one row of per-bin scores per sample. Bins are named
/// `part:phrase` when the schema is known and `bin<i>` otherwise.
pub fn write_state_scores(
    path: &Path,
    schema: Option<&PartStateSchema>,
    rows: &[(String, Vec<f64>)],
) -> Result<()> {
    let bins = rows.first().map_or_else(|| schema.map_or(0, |s| s.total_state_bins()), |r| r.1.len());
    let mut out = format!("id,{}\n", bin_names(schema, bins).join(","));
    for (id, scores) in rows {
        out.push_str(id);
        for s in scores {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_state_scores(path: &Path, schema: &PartStateSchema) -> Result<Vec<(String, Vec<f64>)>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let d = schema.total_state_bins();
    let named = bin_names(Some(schema), d);
    let generic = bin_names(None, d);
    if header.first() != Some(&"id") || (header[1..] != named[..] && header[1..] != generic[..]) {
        return Err(Error::SchemaMismatch(format!(
            "{}: header does not list the {d} state bins of schema {:?}",
            path.display(),
            schema.category
        )));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or("").to_string();
            let scores = fields
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::parse(path, n + 2, "invalid score"))?;
            if id.is_empty() || scores.len() != d {
                return Err(Error::parse(path, n + 2, format!("expected an id and {d} scores")));
            }
            Ok((id, scores))
        })
        .collect()
}

pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<String> {
    cfg.validate()?;
    let schema = crate::data::default_schema();
    let samples = crate::data::generate(&cfg.gen, &schema)?;
    let relationships = generate_relationships(&samples, &schema, cfg.gen.seed)?;
    let dataset = Dataset { schema, samples };
    write_dataset(out, &dataset)?;
    write_relationships(&out.join("relationships.tsv"), &relationships)?;
    Ok(format!("wrote {} samples to {}\n", dataset.samples.len(), out.display()))
}

fn load_checkpoint(path: &Path, schema: Option<&PartStateSchema>) -> Result<TrainState> {
    let ckpt = Checkpoint::load(path)?;
    if let Some(s) = schema {
        if ckpt.header.schema_fingerprint != s.fingerprint() {
            return Err(Error::SchemaMismatch(format!(
                "{} was trained on a different part-state schema than {:?}",
                path.display(),
                s.category
            )));
        }
    }
    TrainState::from_checkpoint(&ckpt)
}

pub fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<String> {
    cfg.validate()?;
    let dataset = read_dataset(data)?;
    let train = dataset.split(Split::Train);
    if train.is_empty() {
        return Err(Error::Config(format!("{} has no training-split samples", data.display())));
    }
    create_dir(out)?;
    write_file(&out.join("config.txt"), &cfg.to_text())?;
    let fp = dataset.schema.fingerprint();
    let trainer = Trainer::train(&train, &dataset.schema, &cfg.train, |t| {
        let st = t.state();
        st.to_checkpoint(fp)
            .save(&out.join(format!("iter_{}.ckpt", st.current_iteration)))
    })?;
    let state = trainer.state();
    state.to_checkpoint(fp).save(&out.join("final.ckpt"))?;
    let mut log = String::from("iteration,epoch,seg_loss,state_loss,total\n");
    for l in trainer.log() {
        log.push_str(&l.csv_line());
        log.push('\n');
    }
    write_file(&out.join("train_log.csv"), &log)?;
    Ok(format!(
        "trained {} on {} samples for {} iterations; final loss {:.6}\n",
        cfg.train.mode,
        train.len(),
        state.current_iteration,
        state.loss_history.last().map_or(f64::NAN, |l| l.total)
    ))
}

pub enum InferInput {
    Image(PathBuf),
    Dataset { dir: PathBuf, split: SplitSel },
}

fn quantize(v: &[f32]) -> Vec<u8> {
    v.iter().map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

pub fn cmd_infer(checkpoint: &Path, input: &InferInput, out: &Path) -> Result<String> {
    let (state, schema, items) = match input {
        InferInput::Image(path) => {
            let r = read_ppm(path)?;
            let image = crate::data::bytes_to_image(r.height, r.width, &r.data);
            let id = path
                .file_stem()
                .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
            (load_checkpoint(checkpoint, None)?, None, vec![(id, image)])
        }
        InferInput::Dataset { dir, split } => {
            let dataset = read_dataset(dir)?;
            let state = load_checkpoint(checkpoint, Some(&dataset.schema))?;
            let items = split.select(&dataset).into_iter().map(|s| (s.id, s.image)).collect();
            (state, Some(dataset.schema), items)
        }
    };
    create_dir(&out.join("s"))?;
    create_dir(&out.join("labels"))?;
    let mut rows = Vec::with_capacity(items.len());
    for (id, image) in &items {
        let p: Prediction = infer(&state, image)?;
        let (h, w) = (p.labels.height(), p.labels.width());
        write_ppm(&out.join("s").join(format!("{id}.ppm")), w, h, &quantize(p.s_image.data()))?;
        write_pgm(&out.join("labels").join(format!("{id}.pgm")), w, h, p.labels.labels())?;
        rows.push((id.clone(), p.state_scores.iter().map(|&v| v as f64).collect()));
    }
    write_state_scores(&out.join("states.csv"), schema.as_ref(), &rows)?;
    Ok(format!("wrote predictions for {} images to {}\n", items.len(), out.display()))
}

pub enum EvalSource {
    Checkpoint(PathBuf),
    /// Either an `infer` output directory or a dataset directory, whose
    /// ground truth then serves as the prediction.
    Predictions(PathBuf),
}

pub fn cmd_eval(source: &EvalSource, data: &Path, split: SplitSel, out: Option<&Path>) -> Result<String> {
    let dataset = read_dataset(data)?;
    let samples = split.select(&dataset);
    if samples.is_empty() {
        return Err(Error::Config(format!("no samples in the selected split of {}", data.display())));
    }
    let predictions: Vec<ScoredSample> = match source {
        EvalSource::Checkpoint(path) => {
            let state = load_checkpoint(path, Some(&dataset.schema))?;
            samples
                .iter()
                .map(|s| {
                    let p = infer(&state, &s.image)?;
                    Ok(ScoredSample {
                        labels: p.labels,
                        state_scores: p.state_scores.iter().map(|&v| v as f64).collect(),
                    })
                })
                .collect::<Result<_>>()?
        }
        EvalSource::Predictions(dir) if dir.join("manifest.txt").exists() => {
            let pred = read_dataset(dir)?;
            if pred.schema != dataset.schema {
                return Err(Error::SchemaMismatch(format!(
                    "{} and {} use different schemas",
                    dir.display(),
                    data.display()
                )));
            }
            samples
                .iter()
                .map(|s| {
                    let p = pred
                        .samples
                        .iter()
                        .find(|p| p.id == s.id)
                        .ok_or_else(|| Error::MissingFile(dir.join("labels").join(format!("{}.pgm", s.id))))?;
                    Ok(ScoredSample {
                        labels: p.labels.clone(),
                        state_scores: p.states.bits().iter().map(|&b| b as u8 as f64).collect(),
                    })
                })
                .collect::<Result<_>>()?
        }
        EvalSource::Predictions(dir) => {
            let scores = read_state_scores(&dir.join("states.csv"), &dataset.schema)?;
            samples
                .iter()
                .map(|s| {
                    let path = dir.join("labels").join(format!("{}.pgm", s.id));
                    let r = read_pgm(&path)?;
                    let labels = PartLabelMap::new(r.height, r.width, r.data)?;
                    let state_scores = scores
                        .iter()
                        .find(|(id, _)| *id == s.id)
                        .map(|(_, v)| v.clone())
                        .ok_or_else(|| {
                            Error::parse(dir.join("states.csv"), "end", format!("no scores for sample {}", s.id))
                        })?;
                    Ok(ScoredSample { labels, state_scores })
                })
                .collect::<Result<_>>()?
        }
    };
    let gt: Vec<_> = samples.iter().map(|s| (s.labels.clone(), s.states.clone())).collect();
    let report = EvalReport::evaluate(&predictions, &gt, &dataset.schema)?;
    if let Some(out) = out {
        create_dir(out)?;
        write_file(&out.join("report.txt"), &report.to_text())?;
        write_file(&out.join("report.csv"), &report.to_csv())?;
    }
    Ok(report.to_text())
}

pub fn cmd_relate(
    cfg: &RunConfig,
    relationships: &Path,
    predictions: Option<&Path>,
    priors: Option<&Path>,
    out: &Path,
) -> Result<String> {
    cfg.validate()?;
    let mut records = read_relationships(relationships)?;
    if let Some(p) = predictions {
        let text = read_text(p)?;
        let bins = text.lines().next().map_or(0, |h| h.split(',').count().saturating_sub(1));
        let scores = read_state_scores_any(p, &text, bins)?;
        for r in &mut records {
            if let Some((_, s)) = scores.iter().find(|(id, _)| *id == r.id) {
                if s.len() != r.subject_states.len() {
                    return Err(Error::SchemaMismatch(format!(
                        "{} has {} state bins, relationship {} has {}",
                        p.display(),
                        s.len(),
                        r.id,
                        r.subject_states.len()
                    )));
                }
                let f: Vec<f32> = s.iter().map(|&v| v as f32).collect();
                r.subject_states = PartStateVector::from_scores(&f);
            }
        }
    }
    let priors = match priors {
        Some(p) => read_priors(p)?,
        None => PriorScores::default(),
    };
    let (train, test): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| Split::of(&r.id) == Split::Train);
    let test = if test.is_empty() { train.clone() } else { test };
    let model = train_predicate_model(&train, PREDICATES.len(), &cfg.relate)?;
    let ranked = predict_relationships(&model, &test, &priors)?;
    let ranked_ids: Vec<Vec<usize>> = ranked.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
    let gt: Vec<Vec<usize>> = test.iter().map(|r| vec![r.predicate]).collect();

    create_dir(out)?;
    write_file(&out.join("model.txt"), &model.to_text())?;
    let mut report = String::new();
    for k in [1, 50, 100] {
        writeln!(report, "recall@{k}={:.4}", recall_at_k(&ranked_ids, &gt, k)?).unwrap();
    }
    write_file(&out.join("report.txt"), &report)?;
    Ok(report)
}

fn read_state_scores_any(path: &Path, text: &str, bins: usize) -> Result<Vec<(String, Vec<f64>)>> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(n, line)| {
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or("").to_string();
            let scores = fields
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .filter(|s| s.len() == bins && !id.is_empty())
                .ok_or_else(|| Error::parse(path, n + 1, format!("expected an id and {bins} scores")))?;
            Ok((id, scores))
        })
        .collect()
}

/// Colormap rows of the default schema, for documentation output.
pub fn palette_text(num_parts: usize) -> Result<String> {
    let cmap = build_colormap(num_parts)?;
    let mut s = String::new();
    for (i, c) in cmap.rows().iter().enumerate() {
        writeln!(s, "{}\t{:.4}\t{:.4}\t{:.4}", i + 1, c[0], c[1], c[2]).unwrap();
    }
    Ok(s)
}
