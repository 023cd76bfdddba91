use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartDef {
    pub name: String,
    pub states: Vec<String>,
}

/// Enumerated part states of one object category. Part ids run 1..=k in
/// listed order; 0 is background. State bins are laid out part by part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartStateSchema {
    pub category: String,
    pub parts: Vec<PartDef>,
}

impl PartStateSchema {
    pub fn new(category: impl Into<String>, parts: Vec<PartDef>) -> Result<Self> {
        let schema = PartStateSchema {
            category: category.into(),
            parts,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        if self.category.is_empty() || self.category.contains(['\t', '\n']) {
            return Err(Error::SchemaMismatch(format!(
                "bad category name {:?}",
                self.category
            )));
        }
        if self.parts.is_empty() || self.parts.len() > 254 {
            return Err(Error::SchemaMismatch(format!(
                "schema needs 1..=254 parts, got {}",
                self.parts.len()
            )));
        }
        for (i, p) in self.parts.iter().enumerate() {
            if p.name.is_empty() || p.name.contains(['\t', '\n', '|']) {
                return Err(Error::SchemaMismatch(format!("bad part name {:?}", p.name)));
            }
            if self.parts[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::SchemaMismatch(format!("duplicate part {:?}", p.name)));
            }
            if p.states.is_empty() {
                return Err(Error::SchemaMismatch(format!("part {:?} has no states", p.name)));
            }
            for (j, s) in p.states.iter().enumerate() {
                if s.is_empty() || s.contains(['\t', '\n', '|']) {
                    return Err(Error::SchemaMismatch(format!("bad state phrase {s:?}")));
                }
                if p.states[..j].contains(s) {
                    return Err(Error::SchemaMismatch(format!(
                        "duplicate state {s:?} for part {:?}",
                        p.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn total_state_bins(&self) -> usize {
        self.parts.iter().map(|p| p.states.len()).sum()
    }

    /// Bins belonging to part `part_id` (1-based).
    pub fn bins_of_part(&self, part_id: usize) -> Range<usize> {
        let start: usize = self.parts[..part_id - 1].iter().map(|p| p.states.len()).sum();
        start..start + self.parts[part_id - 1].states.len()
    }

    /// Part id (1-based) owning `bin`.
    pub fn part_of_bin(&self, bin: usize) -> usize {
        let mut acc = 0;
        for (i, p) in self.parts.iter().enumerate() {
            acc += p.states.len();
            if bin < acc {
                return i + 1;
            }
        }
        panic!("bin {bin} out of range");
    }

    pub fn bin_label(&self, bin: usize) -> (&str, &str) {
        let part = self.part_of_bin(bin);
        let offset = bin - self.bins_of_part(part).start;
        let p = &self.parts[part - 1];
        (&p.name, &p.states[offset])
    }

    pub fn part_id(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.name == name).map(|i| i + 1)
    }

    /// Index of the bin for `(part, phrase)`.
    pub fn bin(&self, part: &str, phrase: &str) -> Option<usize> {
        let id = self.part_id(part)?;
        let offset = self.parts[id - 1].states.iter().position(|s| s == phrase)?;
        Some(self.bins_of_part(id).start + offset)
    }

    /// `schema.txt` contents.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.category);
        for p in &self.parts {
            let _ = writeln!(s, "{}\t{}", p.name, p.states.join("|"));
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let category = lines
            .next()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::parse(path, 1, "missing category line"))?;
        let mut parts = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (name, phrases) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 2, "expected part<TAB>phrase|phrase"))?;
            parts.push(PartDef {
                name: name.to_string(),
                states: phrases.split('|').map(str::to_string).collect(),
            });
        }
        PartStateSchema::new(category, parts).map_err(|e| Error::parse(path, "-", e.to_string()))
    }

    /// CRC32 of the serialized schema; stored in checkpoints.
    pub fn fingerprint(&self) -> u32 {
        crc32fast::hash(self.to_text().as_bytes())
    }
}

/// The toy "widget" schema used by the synthetic generator.
pub fn default_schema() -> PartStateSchema {
    let part = |name: &str, states: [&str; 2]| PartDef {
        name: name.into(),
        states: states.iter().map(|s| s.to_string()).collect(),
    };
    PartStateSchema::new(
        "widget",
        vec![
            part("body", ["upright", "tilted"]),
            part("panel", ["in use", "idle"]),
            part("knob", ["attached", "detached"]),
        ],
    )
    .expect("static schema is valid")
}
