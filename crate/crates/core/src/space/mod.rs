//! Homogeneous-space data: module dimensions, Killing constants, structure
//! constants, strata of the simplex, chart conversions and restrictions to
//! fibers and bases of intermediate fibrations.

mod catalog;
mod document;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub use catalog::{catalog, catalog_names, CatalogShape};
pub use document::{load_space, SpaceDocument};

/// Tolerance below which a structure constant is treated as zero.
pub const TRIPLE_ZERO: f64 = 1e-14;

/// A compact homogeneous space `G/H` with pairwise inequivalent isotropy
/// summands, described by its structure-constant data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    name: String,
    dims: Vec<u32>,
    dimf: Vec<f64>,
    killing: Vec<f64>,
    /// Dense `r^3` array, symmetric under all index permutations.
    tensor: Vec<f64>,
    base_partitions: BTreeMap<Vec<usize>, Vec<Vec<usize>>>,
}

impl SpaceSpec {
    /// Builds and validates a space. Triples use 0-based indices and may be
    /// listed in any order; repeated triples must agree.
    pub fn new(
        name: impl Into<String>,
        dims: Vec<u32>,
        killing: Vec<f64>,
        triples: &[(usize, usize, usize, f64)],
        base_partitions: BTreeMap<Vec<usize>, Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let r = dims.len();
        if r == 0 {
            return Err(Error::InvalidSpace("no modules".into()));
        }
        if killing.len() != r {
            return Err(Error::Length { expected: r, got: killing.len() });
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidSpace(format!("module {} has dimension 0", i + 1)));
        }
        for (i, &b) in killing.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::InvalidSpace(format!("negative Killing constant b{} = {b}", i + 1)));
            }
        }
        if killing.iter().all(|&b| b == 0.0) {
            return Err(Error::Flat);
        }
        let mut seen: BTreeMap<[usize; 3], f64> = BTreeMap::new();
        for &(i, j, k, v) in triples {
            if i >= r || j >= r || k >= r {
                return Err(Error::InvalidSpace(format!(
                    "triple index out of range: [{}{}{}]",
                    i + 1,
                    j + 1,
                    k + 1
                )));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSpace(format!(
                    "negative structure constant [{}{}{}] = {v}",
                    i + 1,
                    j + 1,
                    k + 1
                )));
            }
            let mut key = [i, j, k];
            key.sort_unstable();
            if let Some(&old) = seen.get(&key) {
                if (old - v).abs() > 1e-12 * (1.0 + old.abs()) {
                    return Err(Error::InvalidSpace(format!(
                        "conflicting values for [{}{}{}]: {old} and {v}",
                        key[0] + 1,
                        key[1] + 1,
                        key[2] + 1
                    )));
                }
            }
            seen.insert(key, v);
        }
        let mut space = Self::from_parts(name.into(), dims, killing, &seen);
        for (stratum, blocks) in base_partitions {
            space.set_base_partition(&stratum, blocks)?;
        }
        Ok(space)
    }

    /// Assembles a space from canonical triples without validation. Used for
    /// derived spaces (fibers, bases) whose constants may fall outside the
    /// user-facing invariants, e.g. a toral fiber with all `b = 0`.
    fn from_parts(
        name: String,
        dims: Vec<u32>,
        killing: Vec<f64>,
        triples: &BTreeMap<[usize; 3], f64>,
    ) -> Self {
        let r = dims.len();
        let mut tensor = vec![0.0; r * r * r];
        for (&[i, j, k], &v) in triples {
            for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                tensor[(a * r + b) * r + c] = v;
            }
        }
        let dimf = dims.iter().map(|&d| d as f64).collect();
        Self { name, dims, dimf, killing, tensor, base_partitions: BTreeMap::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of irreducible isotropy summands.
    pub fn r(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    /// Module dimension as a float.
    #[inline]
    pub fn d(&self, i: usize) -> f64 {
        self.dimf[i]
    }

    pub fn dimf(&self) -> &[f64] {
        &self.dimf
    }

    pub fn killing(&self) -> &[f64] {
        &self.killing
    }

    /// Structure constant `[ijk]` for any ordering of the indices.
    #[inline]
    pub fn triple(&self, i: usize, j: usize, k: usize) -> f64 {
        let r = self.r();
        self.tensor[(i * r + j) * r + k]
    }

    /// Nonzero triples, each unordered triple listed once with `i <= j <= k`.
    pub fn triples(&self) -> Vec<(usize, usize, usize, f64)> {
        let r = self.r();
        let mut out = Vec::new();
        for i in 0..r {
            for j in i..r {
                for k in j..r {
                    let v = self.triple(i, j, k);
                    if v != 0.0 {
                        out.push((i, j, k, v));
                    }
                }
            }
        }
        out
    }

    pub fn base_partitions(&self) -> &BTreeMap<Vec<usize>, Vec<Vec<usize>>> {
        &self.base_partitions
    }

    /// True when `[123]` (in some ordering) is the only nonzero structure
    /// constant of a three-module space.
    pub fn is_generalized_wallach(&self) -> bool {
        if self.r() != 3 {
            return false;
        }
        let t = self.triples();
        t.len() == 1 && t[0].0 == 0 && t[0].1 == 1 && t[0].2 == 2
    }

    /// Subalgebra test: `[jkl] = 0` whenever `j, k` lie in `members` and `l` does not.
    pub fn is_closed(&self, members: &[usize]) -> bool {
        let r = self.r();
        let inside = membership(r, members);
        for &j in members {
            for &k in members {
                for l in (0..r).filter(|&l| !inside[l]) {
                    if self.triple(j, k, l) > TRIPLE_ZERO {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn stratum(&self, members: &[usize]) -> Result<Stratum> {
        let r = self.r();
        let mut m = members.to_vec();
        m.sort_unstable();
        m.dedup();
        if m.is_empty() || m.len() >= r || m.iter().any(|&i| i >= r) {
            return Err(Error::InvalidSpace(format!(
                "{} is not a nonempty proper subset of the module indices",
                fmt_set(&m)
            )));
        }
        let kind = if self.is_closed(&m) { StratumKind::Subalgebra } else { StratumKind::Infinity };
        Ok(Stratum { members: m, kind })
    }

    /// All `2^r - 2` strata ordered by size, then lexicographically.
    pub fn enumerate_strata(&self) -> Vec<Stratum> {
        let r = self.r();
        let mut sets: Vec<Vec<usize>> = (1..(1u32 << r) - 1)
            .map(|mask| (0..r).filter(|&i| mask & (1 << i) != 0).collect())
            .collect();
        sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        sets.into_iter()
            .map(|m| {
                let kind = if self.is_closed(&m) { StratumKind::Subalgebra } else { StratumKind::Infinity };
                Stratum { members: m, kind }
            })
            .collect()
    }

    pub fn subalgebra_strata(&self) -> Vec<Stratum> {
        self.enumerate_strata().into_iter().filter(Stratum::is_subalgebra).collect()
    }

    /// Fiber `K/H` of the fibration attached to a subalgebra stratum. Killing
    /// constants are corrected by the ordered-pair sum over the complement.
    pub fn restrict_to_fiber(&self, stratum: &Stratum) -> Result<SpaceSpec> {
        if !stratum.is_subalgebra() || !self.is_closed(&stratum.members) {
            return Err(Error::NotSubalgebra(stratum.label()));
        }
        let r = self.r();
        let inside = membership(r, &stratum.members);
        let outside: Vec<usize> = (0..r).filter(|&i| !inside[i]).collect();
        let killing = stratum
            .members
            .iter()
            .map(|&j| {
                let mut sum = 0.0;
                for &k in &outside {
                    for &l in &outside {
                        sum += self.triple(j, k, l);
                    }
                }
                self.killing[j] - sum / self.d(j)
            })
            .collect();
        let dims = stratum.members.iter().map(|&j| self.dims[j]).collect();
        let singletons: Vec<Vec<usize>> = stratum.members.iter().map(|&i| vec![i]).collect();
        let triples = self.sub_triples(&singletons);
        Ok(Self::from_parts(
            format!("{}|fiber{}", self.name, stratum.label()),
            dims,
            killing,
            &triples,
        ))
    }

    /// Linkage classes of the complement of `members`: `p ~ q` whenever
    /// `[jpq] > 0` for some `j` in `members`. A base metric of a canonical
    /// variation must be constant on each class.
    pub fn linkage_classes(&self, members: &[usize]) -> Vec<Vec<usize>> {
        let r = self.r();
        let inside = membership(r, members);
        let outside: Vec<usize> = (0..r).filter(|&i| !inside[i]).collect();
        let mut parent: Vec<usize> = (0..r).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for &p in &outside {
            for &q in &outside {
                if p < q && members.iter().any(|&j| self.triple(j, p, q) > TRIPLE_ZERO) {
                    let (a, b) = (find(&mut parent, p), find(&mut parent, q));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &p in &outside {
            let root = find(&mut parent, p);
            classes.entry(root).or_default().push(p);
        }
        classes.into_values().collect()
    }

    /// Base partition for a stratum: the supplied one if present, otherwise
    /// the linkage classes.
    pub fn base_partition(&self, stratum: &Stratum) -> Vec<Vec<usize>> {
        self.base_partitions
            .get(&stratum.members)
            .cloned()
            .unwrap_or_else(|| self.linkage_classes(&stratum.members))
    }

    /// Installs a base partition (0-based indices) after validating it.
    pub fn set_base_partition(&mut self, members: &[usize], blocks: Vec<Vec<usize>>) -> Result<()> {
        let stratum = self.stratum(members)?;
        let label = stratum.label();
        let bad = |reason: String| Error::BadPartition { stratum: label.clone(), reason };
        let r = self.r();
        let inside = membership(r, &stratum.members);
        let mut owner = vec![usize::MAX; r];
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort();
        for (n, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(bad("empty block".into()));
            }
            for &i in block {
                if i >= r || inside[i] {
                    return Err(bad(format!("index {} is not in the complement", i + 1)));
                }
                if owner[i] != usize::MAX {
                    return Err(bad(format!("index {} appears in two blocks", i + 1)));
                }
                owner[i] = n;
            }
        }
        if let Some(i) = (0..r).find(|&i| !inside[i] && owner[i] == usize::MAX) {
            return Err(bad(format!("index {} is not covered", i + 1)));
        }
        for class in self.linkage_classes(&stratum.members) {
            if class.iter().any(|&i| owner[i] != owner[class[0]]) {
                return Err(bad(format!(
                    "indices {} are linked through the fiber and must share a block",
                    fmt_set(&class)
                )));
            }
        }
        self.base_partitions.insert(stratum.members, blocks);
        Ok(())
    }

    /// Base `G/K` restricted to metrics constant on the blocks of its
    /// partition, presented as a space whose modules are the blocks.
    pub fn restrict_to_base(&self, stratum: &Stratum) -> Result<BaseSpace> {
        if !stratum.is_subalgebra() {
            return Err(Error::NotSubalgebra(stratum.label()));
        }
        let blocks = self.base_partition(stratum);
        let dims: Vec<u32> = blocks.iter().map(|b| b.iter().map(|&i| self.dims[i]).sum()).collect();
        let killing = blocks
            .iter()
            .zip(&dims)
            .map(|(b, &d)| b.iter().map(|&i| self.d(i) * self.killing[i]).sum::<f64>() / d as f64)
            .collect();
        let triples = self.sub_triples(&blocks);
        let space = Self::from_parts(format!("{}|base{}", self.name, stratum.label()), dims, killing, &triples);
        Ok(BaseSpace { space, blocks })
    }

    /// Aggregated structure constants `[ABC]` between groups of modules.
    fn sub_triples(&self, groups: &[Vec<usize>]) -> BTreeMap<[usize; 3], f64> {
        let n = groups.len();
        let mut out = BTreeMap::new();
        for a in 0..n {
            for b in a..n {
                for c in b..n {
                    let mut sum = 0.0;
                    for &i in &groups[a] {
                        for &j in &groups[b] {
                            for &k in &groups[c] {
                                sum += self.triple(i, j, k);
                            }
                        }
                    }
                    if sum != 0.0 {
                        out.insert([a, b, c], sum);
                    }
                }
            }
        }
        out
    }

    /// Weights `d_i T_i` of the trace functional in the y-chart.
    pub fn trace_weights(&self, t: &Candidate) -> Vec<f64> {
        self.dimf.iter().zip(&t.t).map(|(d, t)| d * t).collect()
    }

    /// Solves `sum d_j T_j y_j = 1` for the single unknown coordinate.
    pub fn solve_constraint(&self, t: &Candidate, y_partial: &[Option<f64>]) -> Result<MetricPoint> {
        let r = self.r();
        check_len(r, y_partial.len())?;
        check_len(r, t.len())?;
        let unknown: Vec<usize> = (0..r).filter(|&i| y_partial[i].is_none()).collect();
        if unknown.len() != 1 {
            return Err(Error::Infeasible(format!("expected one unknown coordinate, found {}", unknown.len())));
        }
        let u = unknown[0];
        if t.t[u] == 0.0 {
            return Err(Error::Infeasible(format!("T{} vanishes at the unknown index", u + 1)));
        }
        let mut y = vec![0.0; r];
        let mut rest = 0.0;
        for i in (0..r).filter(|&i| i != u) {
            let v = y_partial[i].unwrap_or_default();
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::NonPositive);
            }
            y[i] = v;
            rest += self.d(i) * t.t[i] * v;
        }
        let value = (1.0 - rest) / (self.d(u) * t.t[u]);
        if value <= 0.0 || !value.is_finite() {
            return Err(Error::Infeasible(format!("solved y{} = {value} is not positive", u + 1)));
        }
        y[u] = value;
        MetricPoint::from_y(y)
    }

    pub fn to_document(&self) -> SpaceDocument {
        SpaceDocument::from_space(self)
    }
}

/// Base space of a fibration together with the original indices in each block.
#[derive(Debug, Clone)]
pub struct BaseSpace {
    pub space: SpaceSpec,
    pub blocks: Vec<Vec<usize>>,
}

impl BaseSpace {
    /// Block values of a candidate: `T_A = sum d_i T_i / d_A`.
    pub fn candidate(&self, full: &SpaceSpec, t: &Candidate) -> Candidate {
        let t = self
            .blocks
            .iter()
            .zip(self.space.dimf())
            .map(|(b, &d)| b.iter().map(|&i| full.d(i) * t.t[i]).sum::<f64>() / d)
            .collect();
        Candidate::new(t)
    }

    /// Spreads block coordinates back onto the original complement indices.
    pub fn expand(&self, r: usize, block_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; r];
        for (b, &v) in self.blocks.iter().zip(block_values) {
            for &i in b {
                out[i] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StratumKind {
    Subalgebra,
    Infinity,
}

/// Boundary face of the simplex where the coordinates outside `members` vanish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    /// Sorted 0-based module indices.
    pub members: Vec<usize>,
    pub kind: StratumKind,
}

impl Stratum {
    pub fn is_subalgebra(&self) -> bool {
        self.kind == StratumKind::Subalgebra
    }

    /// 1-based label such as `{2,4}`.
    pub fn label(&self) -> String {
        fmt_set(&self.members)
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.members.iter().map(|i| i + 1).collect()
    }

    pub fn complement(&self, r: usize) -> Vec<usize> {
        let inside = membership(r, &self.members);
        (0..r).filter(|&i| !inside[i]).collect()
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl Serialize for Stratum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Stratum", 2)?;
        st.serialize_field("J", &self.one_based())?;
        st.serialize_field("kind", &self.kind)?;
        st.end()
    }
}

/// Diagonal invariant tensor `T = sum T_i Q|m_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub t: Vec<f64>,
}

impl Candidate {
    pub fn new(t: Vec<f64>) -> Self {
        Self { t }
    }

    pub fn definite(&self) -> bool {
        self.t.iter().all(|&v| v > 0.0)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Restriction to a subset of indices.
    pub fn restrict(&self, members: &[usize]) -> Candidate {
        Candidate::new(members.iter().map(|&i| self.t[i]).collect())
    }

    /// Rescaled so that the component at `index` equals one.
    pub fn normalized_at(&self, index: usize) -> Candidate {
        let s = self.t[index];
        Candidate::new(self.t.iter().map(|v| v / s).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    X,
    Y,
}

/// Diagonal metric `g = sum x_i Q|m_i`, stored in either chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricPoint {
    coords: Vec<f64>,
    chart: Chart,
}

impl MetricPoint {
    pub fn from_x(x: Vec<f64>) -> Result<Self> {
        Self::checked(x, Chart::X)
    }

    pub fn from_y(y: Vec<f64>) -> Result<Self> {
        Self::checked(y, Chart::Y)
    }

    fn checked(coords: Vec<f64>, chart: Chart) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Length { expected: 1, got: 0 });
        }
        if coords.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::NonPositive);
        }
        Ok(Self { coords, chart })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn x(&self) -> Vec<f64> {
        match self.chart {
            Chart::X => self.coords.clone(),
            Chart::Y => self.coords.iter().map(|v| 1.0 / v).collect(),
        }
    }

    pub fn y(&self) -> Vec<f64> {
        match self.chart {
            Chart::Y => self.coords.clone(),
            Chart::X => self.coords.iter().map(|v| 1.0 / v).collect(),
        }
    }

    pub fn to_x(&self) -> MetricPoint {
        MetricPoint { coords: self.x(), chart: Chart::X }
    }

    pub fn to_y(&self) -> MetricPoint {
        MetricPoint { coords: self.y(), chart: Chart::Y }
    }
}

pub fn x_to_y(p: &MetricPoint) -> MetricPoint {
    p.to_y()
}

pub fn y_to_x(p: &MetricPoint) -> MetricPoint {
    p.to_x()
}

pub(crate) fn membership(r: usize, members: &[usize]) -> Vec<bool> {
    let mut inside = vec![false; r];
    for &i in members {
        inside[i] = true;
    }
    inside
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Length { expected, got })
    }
}

/// Formats 0-based indices as a 1-based set, e.g. `{1,3}`.
pub fn fmt_set(members: &[usize]) -> String {
    let inner: Vec<String> = members.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", inner.join(","))
}
