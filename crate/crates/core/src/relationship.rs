//! Predicate classification from the part-state vectors of two objects.
//!
//! Record file: `id<TAB>subject_cat<TAB>object_cat<TAB>s1_bits<TAB>s2_bits<TAB>predicate_id`.
//! Prior file: `pair_id<TAB>predicate_id<TAB>score`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{read_text, PartStateSchema, PartStateVector, Sample};
use crate::error::{Error, Result};
use crate::rng::substream;

pub const PREDICATES: [&str; 4] = ["uses", "leans_on", "attached_to", "next_to"];

pub const DEFAULT_PAD_LEN: usize = 72;

#[derive(Clone, Debug, PartialEq)]
pub struct RelationshipSample {
    pub id: String,
    pub subject_category: String,
    pub object_category: String,
    pub subject_states: PartStateVector,
    pub object_states: PartStateVector,
    pub predicate: usize,
}

/// concat(pad(s1), pad(s2)) with zeros appended up to `pad_len` each.
pub fn build_feature(s1: &PartStateVector, s2: &PartStateVector, pad_len: usize) -> Result<Vec<f64>> {
    for s in [s1, s2] {
        if s.len() > pad_len {
            return Err(Error::Config(format!(
                "state vector of length {} exceeds pad_len {pad_len}",
                s.len()
            )));
        }
    }
    let mut f = vec![0.0; 2 * pad_len];
    for (i, &b) in s1.bits().iter().enumerate() {
        f[i] = b as u8 as f64;
    }
    for (i, &b) in s2.bits().iter().enumerate() {
        f[pad_len + i] = b as u8 as f64;
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelateConfig {
    pub pad_len: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for RelateConfig {
    fn default() -> Self {
        RelateConfig {
            pad_len: DEFAULT_PAD_LEN,
            epochs: 30,
            learning_rate: 0.05,
            regularization: 1e-4,
            seed: 0,
        }
    }
}

impl RelateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pad_len == 0 {
            return Err(Error::Config("relate.pad_len must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "relate.learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::Config(format!(
                "relate.regularization must be ≥ 0, got {}",
                self.regularization
            )));
        }
        Ok(())
    }
}

/// One-vs-rest linear scorers over `build_feature` vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPredicateModel {
    pub pad_len: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearPredicateModel {
    pub fn num_predicates(&self) -> usize {
        self.biases.len()
    }

    pub fn scores(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != 2 * self.pad_len {
            return Err(Error::dim(
                "predicate scores",
                format!("feature length {} for pad_len {}", feature.len(), self.pad_len),
            ));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(feature).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect())
    }

    pub fn score_pair(&self, s1: &PartStateVector, s2: &PartStateVector) -> Result<Vec<f64>> {
        self.scores(&build_feature(s1, s2, self.pad_len)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("pad_len={}\npredicates={}\n", self.pad_len, self.num_predicates());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            write!(s, "{b}").unwrap();
            for v in w {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<usize> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 1, format!("missing {key} line")))?;
            line.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(path, n + 1, format!("expected {key}=<integer>")))
        };
        let pad_len = header("pad_len")?;
        let count = header("predicates")?;
        let mut weights = Vec::with_capacity(count);
        let mut biases = Vec::with_capacity(count);
        for (n, line) in lines {
            let values = line
                .split(' ')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
            if values.len() != 2 * pad_len + 1 {
                return Err(Error::parse(
                    path,
                    n + 1,
                    format!("expected {} values, found {}", 2 * pad_len + 1, values.len()),
                ));
            }
            biases.push(values[0]);
            weights.push(values[1..].to_vec());
        }
        if biases.len() != count {
            return Err(Error::parse(
                path,
                text.lines().count(),
                format!("expected {count} predicate rows, found {}", biases.len()),
            ));
        }
        Ok(LinearPredicateModel {
            pad_len,
            weights,
            biases,
        })
    }
}

/// Hinge-loss SGD, one binary problem per predicate, sharing one shuffled
/// order per epoch.
pub fn train_predicate_model(
    samples: &[RelationshipSample],
    num_predicates: usize,
    cfg: &RelateConfig,
) -> Result<LinearPredicateModel> {
    cfg.validate()?;
    if let Some(s) = samples.iter().find(|s| s.predicate >= num_predicates) {
        return Err(Error::InvalidTarget {
            op: "train_predicate_model",
            detail: format!("sample {} has predicate {} of {num_predicates}", s.id, s.predicate),
        });
    }
    let mut present = vec![false; num_predicates];
    for s in samples {
        present[s.predicate] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Training("predicate training needs at least two classes".into()));
    }
    let features = samples
        .iter()
        .map(|s| build_feature(&s.subject_states, &s.object_states, cfg.pad_len))
        .collect::<Result<Vec<_>>>()?;

    let dim = 2 * cfg.pad_len;
    let mut weights = vec![vec![0.0; dim]; num_predicates];
    let mut biases = vec![0.0; num_predicates];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut substream(cfg.seed, "shuffle", epoch as u64));
        for &i in &order {
            let x = &features[i];
            for (p, (w, b)) in weights.iter_mut().zip(biases.iter_mut()).enumerate() {
                let y = if samples[i].predicate == p { 1.0 } else { -1.0 };
                let margin = y * (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + *b);
                let shrink = 1.0 - cfg.learning_rate * cfg.regularization;
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj *= shrink;
                    if margin < 1.0 {
                        *wj += cfg.learning_rate * y * xj;
                    }
                }
                if margin < 1.0 {
                    *b += cfg.learning_rate * y;
                }
            }
        }
    }
    Ok(LinearPredicateModel {
        pad_len: cfg.pad_len,
        weights,
        biases,
    })
}

pub fn fuse_scores(part_state_score: f64, prior_score: f64) -> f64 {
    (part_state_score + prior_score) / 2.0
}

/// Predicates ranked by fused score, descending, ties by predicate id.
/// Without priors the part-state scores are ranked alone.
pub fn rank_predicates(scores: &[f64], priors: Option<&[f64]>) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .map(|(p, &s)| (p, priors.map_or(s, |pr| fuse_scores(s, pr[p]))))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Prior scores keyed by (pair id, predicate id).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriorScores(pub HashMap<(String, usize), f64>);

impl PriorScores {
    /// The full prior row for `pair`, or None unless every predicate has one.
    pub fn row(&self, pair: &str, num_predicates: usize) -> Option<Vec<f64>> {
        (0..num_predicates)
            .map(|p| self.0.get(&(pair.to_string(), p)).copied())
            .collect()
    }
}

pub fn predict_relationships(
    model: &LinearPredicateModel,
    samples: &[RelationshipSample],
    priors: &PriorScores,
) -> Result<Vec<Vec<(usize, f64)>>> {
    samples
        .iter()
        .map(|s| {
            let scores = model.score_pair(&s.subject_states, &s.object_states)?;
            let prior = priors.row(&s.id, model.num_predicates());
            Ok(rank_predicates(&scores, prior.as_deref()))
        })
        .collect()
}

/// Toy predicate of a widget pair, decided by the subject's states:
/// uses if its panel is in use, else leans_on if tilted, else attached_to if
/// its knob is attached, else next_to.
pub fn toy_predicate(subject: &PartStateVector, schema: &PartStateSchema) -> Result<usize> {
    let bin = |part: &str, phrase: &str| {
        schema
            .bin(part, phrase)
            .ok_or_else(|| Error::SchemaMismatch(format!("schema has no {part} {phrase:?} state")))
    };
    let (in_use, tilted, attached) = (bin("panel", "in use")?, bin("body", "tilted")?, bin("knob", "attached")?);
    Ok(if subject.get(in_use) {
        0
    } else if subject.get(tilted) {
        1
    } else if subject.get(attached) {
        2
    } else {
        3
    })
}

/// Pairs every sample (as subject) with a seeded random other sample.
pub fn generate_relationships(
    samples: &[Sample],
    schema: &PartStateSchema,
    seed: u64,
) -> Result<Vec<RelationshipSample>> {
    if samples.len() < 2 {
        return Err(Error::Config("relationship pairs need at least two samples".into()));
    }
    let mut rng = substream(seed, "data", u64::MAX);
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut j = rng.gen_range(0..samples.len() - 1);
            if j >= i {
                j += 1;
            }
            Ok(RelationshipSample {
                id: s.id.clone(),
                subject_category: schema.category.clone(),
                object_category: schema.category.clone(),
                subject_states: s.states.clone(),
                object_states: samples[j].states.clone(),
                predicate: toy_predicate(&s.states, schema)?,
            })
        })
        .collect()
}

fn check_field(path: &Path, line: usize, value: &str, what: &str) -> Result<()> {
    if value.is_empty() || value.contains(['\t', '\n']) {
        return Err(Error::parse(path, line, format!("invalid {what} {value:?}")));
    }
    Ok(())
}

pub fn write_relationships(path: &Path, records: &[RelationshipSample]) -> Result<()> {
    let mut out = String::new();
    for (n, r) in records.iter().enumerate() {
        check_field(path, n + 1, &r.id, "id")?;
        check_field(path, n + 1, &r.subject_category, "subject category")?;
        check_field(path, n + 1, &r.object_category, "object category")?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.id, r.subject_category, r.object_category, r.subject_states, r.object_states, r.predicate
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_relationships(path: &Path) -> Result<Vec<RelationshipSample>> {
    let text = read_text(path)?;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, sc, oc, s1, s2, p] = fields[..] else {
            return Err(Error::parse(path, n + 1, format!("expected 6 tab-separated fields, found {}", fields.len())));
        };
        let bits = |s: &str| {
            PartStateVector::parse(s).ok_or_else(|| Error::parse(path, n + 1, format!("invalid state bits {s:?}")))
        };
        records.push(RelationshipSample {
            id: id.into(),
            subject_category: sc.into(),
            object_category: oc.into(),
            subject_states: bits(s1)?,
            object_states: bits(s2)?,
            predicate: p
                .parse()
                .map_err(|_| Error::parse(path, n + 1, format!("invalid predicate id {p:?}")))?,
        });
    }
    Ok(records)
}

pub fn read_priors(path: &Path) -> Result<PriorScores> {
    let text = read_text(path)?;
    let mut map = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let [pair, p, score] = fields[..] else {
            return Err(Error::parse(path, n + 1, format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let p: usize = p
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("invalid predicate id {p:?}")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(path, n + 1, format!("invalid score {score:?}")))?;
        map.insert((pair.to_string(), p), score);
    }
    Ok(PriorScores(map))
}
