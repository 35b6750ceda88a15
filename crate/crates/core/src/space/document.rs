use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::SpaceSpec;
use crate::error::{Error, Result};

/// On-disk form of a space. Indices are 1-based; numbers may be JSON numbers
/// or exact rationals written as strings such as `"2/3"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDocument {
    pub name: String,
    pub modules: Vec<ModuleEntry>,
    #[serde(default)]
    pub triples: Vec<TripleEntry>,
    #[serde(default)]
    pub base_partitions: BTreeMap<String, Vec<Vec<i64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleEntry {
    pub dim: i64,
    pub b: Number,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleEntry {
    pub i: i64,
    pub j: i64,
    pub k: i64,
    pub value: Number,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Exact(String),
}

impl Number {
    /// Converts to double precision. Rational strings are parsed exactly and
    /// rounded once.
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Float(v) => Ok(*v),
            Number::Exact(s) => {
                let q: Ratio<i64> = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Malformed(format!("not a rational number: {s:?}")))?;
                Ok(*q.numer() as f64 / *q.denom() as f64)
            }
        }
    }
}

fn index(v: i64, r: usize, what: &str) -> Result<usize> {
    if v < 1 || v as usize > r {
        return Err(Error::Malformed(format!("{what} index {v} outside 1..={r}")));
    }
    Ok(v as usize - 1)
}

impl SpaceDocument {
    pub fn into_space(self) -> Result<SpaceSpec> {
        let r = self.modules.len();
        let mut dims = Vec::with_capacity(r);
        let mut killing = Vec::with_capacity(r);
        for (n, m) in self.modules.iter().enumerate() {
            if m.dim < 1 {
                return Err(Error::InvalidSpace(format!("module {} has dimension {}", n + 1, m.dim)));
            }
            dims.push(u32::try_from(m.dim).map_err(|_| Error::Malformed("dimension too large".into()))?);
            killing.push(m.b.value()?);
        }
        let mut triples = Vec::with_capacity(self.triples.len());
        for t in &self.triples {
            triples.push((
                index(t.i, r, "triple")?,
                index(t.j, r, "triple")?,
                index(t.k, r, "triple")?,
                t.value.value()?,
            ));
        }
        let mut partitions = BTreeMap::new();
        for (key, blocks) in &self.base_partitions {
            let mut stratum = Vec::new();
            for part in key.split(',') {
                let v: i64 = part
                    .trim()
                    .parse()
                    .map_err(|_| Error::Malformed(format!("bad stratum key {key:?}")))?;
                stratum.push(index(v, r, "stratum")?);
            }
            let mut converted = Vec::new();
            for block in blocks {
                converted.push(block.iter().map(|&v| index(v, r, "partition")).collect::<Result<Vec<_>>>()?);
            }
            partitions.insert(stratum, converted);
        }
        SpaceSpec::new(self.name, dims, killing, &triples, partitions)
    }

    pub fn from_space(space: &SpaceSpec) -> Self {
        SpaceDocument {
            name: space.name().to_string(),
            modules: space
                .dims()
                .iter()
                .zip(space.killing())
                .map(|(&d, &b)| ModuleEntry { dim: d as i64, b: Number::Float(b) })
                .collect(),
            triples: space
                .triples()
                .into_iter()
                .map(|(i, j, k, v)| TripleEntry {
                    i: i as i64 + 1,
                    j: j as i64 + 1,
                    k: k as i64 + 1,
                    value: Number::Float(v),
                })
                .collect(),
            base_partitions: space
                .base_partitions()
                .iter()
                .map(|(s, blocks)| {
                    let key: Vec<String> = s.iter().map(|i| (i + 1).to_string()).collect();
                    let blocks = blocks.iter().map(|b| b.iter().map(|&i| i as i64 + 1).collect()).collect();
                    (key.join(","), blocks)
                })
                .collect(),
        }
    }
}

/// Parses and validates a JSON space document.
pub fn load_space(document: &str) -> Result<SpaceSpec> {
    let doc: SpaceDocument =
        serde_json::from_str(document).map_err(|e| Error::Malformed(e.to_string()))?;
    doc.into_space()
}
