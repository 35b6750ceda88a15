use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use ricci_lab::space::{catalog, load_space, SpaceSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Curvature,
    Levels,
    Flow,
    Saddle,
    Classify,
    Sweep,
    Image,
    Locus,
}

impl CommandKind {
    pub fn default_format(self) -> Format {
        match self {
            CommandKind::Sweep | CommandKind::Image | CommandKind::Locus => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Every tunable input. Each field is optional so that flags, a config file
/// and built-in defaults can be layered in that order.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Catalog name or path to a space document.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<String>,
    /// Candidate tensor components, comma separated.
    #[arg(long = "T", value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    /// Metric eigenvalues, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Worker thread cap.
    #[arg(long, env = "RICCI_LAB_THREADS")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    /// Newton multistart count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    /// Relative step tolerance of the flow integrator.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Trajectory sampling stride for CSV output of `flow`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    /// Path nodes for `saddle`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,

    /// Grid resolution such as `200x200`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    /// Fixed components such as `T3=0.375` (1-based), repeatable.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<Vec<String>>,
    /// `plane` (three-module Wallach coordinates) or `components`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axes: Option<String>,
    /// Two free components (1-based) for component axes or continuation.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_range: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_range: Option<Vec<f64>>,

    /// Sample count for `image`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Sampling range of metric coordinates (`image`) or curve parameter (`locus`).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<Vec<f64>>,
    /// `log_uniform` or `uniform`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<String>,
    /// Also write an SVG scatter plot of the projected points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,

    /// `closed` or `continuation`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Continuation start metric.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    /// Box for continuation coordinates.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<f64>>,
}

macro_rules! layer {
    ($top:expr, $below:expr, $($field:ident),+) => {
        RunConfig { $($field: $top.$field.or($below.$field)),+ }
    };
}

impl RunConfig {
    /// Fields set here win; the rest come from `below`.
    pub fn over(self, below: RunConfig) -> RunConfig {
        layer!(
            self, below, space, t, x, seed, output, format, threads, starts, rtol, max_steps, record_every, nodes,
            max_rounds, grid, slice, axes, free, u_range, v_range, n, range, sampling, svg, mode, samples, start,
            step, max_points, bounds
        )
    }

    pub fn load_space(&self) -> anyhow::Result<SpaceSpec> {
        let Some(name) = self.space.as_deref() else { bail!("missing --space") };
        let path = Path::new(name);
        if path.is_file() {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {name}"))?;
            Ok(load_space(&text)?)
        } else {
            Ok(catalog(name)?)
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }
}

/// A config file or manifest: the command plus its inputs. Unknown keys
/// (such as the `run` block of a manifest) are ignored.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(flatten)]
    pub run: RunConfig,
}

pub fn read_config(path: &Path) -> anyhow::Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Parses a pair such as `0.1,10`.
pub fn pair(name: &str, v: Option<&Vec<f64>>, default: (f64, f64)) -> anyhow::Result<(f64, f64)> {
    match v {
        None => Ok(default),
        Some(v) if v.len() == 2 && v[0] < v[1] => Ok((v[0], v[1])),
        Some(v) => bail!("--{name} needs two increasing values, got {v:?}"),
    }
}

/// Parses `NxM`.
pub fn grid_size(spec: &str) -> anyhow::Result<(usize, usize)> {
    let parse = || -> Option<(usize, usize)> {
        let (a, b) = spec.split_once(['x', 'X'])?;
        Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
    };
    parse().with_context(|| format!("grid must look like 200x200, got {spec:?}"))
}

/// Parses `T3=0.375` into a 0-based index and value.
pub fn slice_entry(spec: &str, r: usize) -> anyhow::Result<(usize, f64)> {
    let parse = || -> Option<(usize, f64)> {
        let (name, value) = spec.split_once('=')?;
        let index: usize = name.trim().strip_prefix(['T', 't'])?.parse().ok()?;
        Some((index.checked_sub(1)?, value.trim().parse().ok()?))
    };
    match parse() {
        Some((i, v)) if i < r => Ok((i, v)),
        _ => bail!("slice must look like T3=0.375 with index 1..={r}, got {spec:?}"),
    }
}
