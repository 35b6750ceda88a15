use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::region::{region_label, RegionLabel};
use crate::error::{Error, Result};
use crate::space::{Candidate, SpaceSpec};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Plane coordinates of a candidate with `T1 + T2 + T3 = 1` on the
/// three-module Wallach space.
pub fn wallach_plane(t: &[f64]) -> (f64, f64) {
    let sum: f64 = t.iter().sum();
    let (t1, t2, t3) = (t[0] / sum, t[1] / sum, t[2] / sum);
    (4.0 * SQRT3 / 3.0 * (t1 - t2), 4.0 * t3 - 4.0 / 3.0)
}

/// Inverse of [`wallach_plane`] on `T1 + T2 + T3 = 1`.
pub fn wallach_from_plane(x: f64, y: f64) -> [f64; 3] {
    let t3 = (y + 4.0 / 3.0) / 4.0;
    let diff = x * 3.0 / (4.0 * SQRT3);
    let rest = 1.0 - t3;
    [(rest + diff) / 2.0, (rest - diff) / 2.0, t3]
}

/// What the two grid axes parametrize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Axes {
    /// The `(x, y)` plane of normalized three-component candidates.
    WallachPlane,
    /// Two candidate components (0-based) varied, the rest held at `fixed`.
    Components { first: usize, second: usize, fixed: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Axes,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub resolution: (usize, usize),
}

impl GridSpec {
    pub fn validate(&self, r: usize) -> Result<()> {
        let (nu, nv) = self.resolution;
        if nu < 2 || nv < 2 {
            return Err(Error::Grid(format!("resolution {nu}x{nv} needs at least 2 points per axis")));
        }
        for (lo, hi) in [self.u_range, self.v_range] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Grid(format!("empty range ({lo}, {hi})")));
            }
        }
        match &self.axes {
            Axes::WallachPlane if r != 3 => Err(Error::Grid("plane axes need three modules".into())),
            Axes::Components { first, second, fixed } => {
                if fixed.len() != r || *first >= r || *second >= r || first == second {
                    Err(Error::Grid(format!("axes ({first}, {second}) with {} fixed values on {r} modules", fixed.len())))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn candidate(&self, u: f64, v: f64) -> Vec<f64> {
        match &self.axes {
            Axes::WallachPlane => wallach_from_plane(u, v).to_vec(),
            Axes::Components { first, second, fixed } => {
                let mut t = fixed.clone();
                t[*first] = u;
                t[*second] = v;
                t
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub u: f64,
    pub v: f64,
    pub t: Vec<f64>,
    /// Absent when the candidate is not positive definite.
    pub label: Option<RegionLabel>,
}

/// Labels every node of a rectangular grid, row by row in `v`.
pub fn sweep_plane(space: &SpaceSpec, grid: &GridSpec) -> Result<Vec<SweepRecord>> {
    grid.validate(space.r())?;
    let (nu, nv) = grid.resolution;
    let at = |k: usize, n: usize, (lo, hi): (f64, f64)| lo + (hi - lo) * k as f64 / (n - 1) as f64;
    (0..nu * nv)
        .into_par_iter()
        .map(|idx| {
            let (u, v) = (at(idx % nu, nu, grid.u_range), at(idx / nu, nv, grid.v_range));
            let t = grid.candidate(u, v);
            let candidate = Candidate::new(t.clone());
            let label = if candidate.definite() { Some(region_label(space, &candidate)?) } else { None };
            Ok(SweepRecord { u, v, t, label })
        })
        .collect()
}

/// CSV with columns `T1..Tr,u,v,label` followed by the predicate values
/// (`name_lhs,name_rhs`) of the first labeled record.
pub fn write_sweep_csv<W: std::io::Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let r = records.first().map_or(0, |rec| rec.t.len());
    let names: Vec<String> = records
        .iter()
        .find_map(|rec| rec.label.as_ref())
        .map(|l| l.predicates.iter().map(|p| p.name.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = (1..=r).map(|i| format!("T{i}")).collect();
    header.extend(["u".into(), "v".into(), "label".into()]);
    for n in &names {
        header.push(format!("{n}_lhs"));
        header.push(format!("{n}_rhs"));
    }
    w.write_record(&header)?;
    for rec in records {
        let mut row: Vec<String> = rec.t.iter().map(f64::to_string).collect();
        row.push(rec.u.to_string());
        row.push(rec.v.to_string());
        match &rec.label {
            Some(l) => {
                row.push(l.kind.as_str().into());
                for n in &names {
                    match l.predicates.iter().find(|p| &p.name == n) {
                        Some(p) => row.extend([p.lhs.to_string(), p.rhs.to_string()]),
                        None => row.extend([String::new(), String::new()]),
                    }
                }
            }
            None => {
                row.push("indefinite".into());
                row.extend(std::iter::repeat_n(String::new(), 2 * names.len()));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
