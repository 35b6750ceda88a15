//! Mountain-pass saddle search: a path between two strata is pushed up by
//! the gradient flow and the minimax level is tracked until it settles.

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{gradient_norm_y, scalar_y};
use crate::dynamics::{advance, newton_critical, CriticalPoint};
use crate::error::{Error, Result};
use crate::invariants::{level_report, optimal_variation, LevelReport};
use crate::search::normalize;
use crate::space::{check_len, Candidate, SpaceSpec, Stratum};

/// Canonical-variation parameter at which path endpoints are anchored.
pub const ANCHOR_T: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelaxParams {
    pub nodes: usize,
    pub max_rounds: usize,
    /// Flow time applied to every interior node per round.
    pub flow_time: f64,
    pub rtol: f64,
    /// Stop once `c_estimate` moved less than `stable_tol` over this many rounds.
    pub stable_rounds: usize,
    pub stable_tol: f64,
    pub degeneracy_rel: f64,
}

impl Default for RelaxParams {
    fn default() -> Self {
        Self {
            nodes: 201,
            max_rounds: 20_000,
            flow_time: 0.05,
            rtol: 1e-8,
            stable_rounds: 10,
            stable_tol: 1e-8,
            degeneracy_rel: 1e-7,
        }
    }
}

/// One row of relaxation telemetry.
#[derive(Debug, Clone, Serialize)]
pub struct RelaxRow {
    pub round: usize,
    pub inf_s: f64,
    pub argmin: usize,
    pub c_estimate: f64,
}

/// A discretized path on `tr_g T = 1` in the y-chart.
#[derive(Debug, Clone, Serialize)]
pub struct PathState {
    pub from: Stratum,
    pub to: Stratum,
    pub nodes: Vec<Vec<f64>>,
    /// Running sup over rounds of the minimum of `S` on the path.
    pub c_estimate: f64,
    pub argmin: usize,
    /// Nearest `alpha` levels below and above `c_estimate` (infinite when absent).
    pub bracket: (f64, f64),
    pub rounds: usize,
    /// Interior nodes that hit the boundary and were held in place.
    pub flagged: Vec<usize>,
    pub telemetry: Vec<RelaxRow>,
}

impl PathState {
    fn new(space: &SpaceSpec, from: Stratum, to: Stratum, nodes: Vec<Vec<f64>>) -> Self {
        let mut path = PathState {
            from,
            to,
            nodes,
            c_estimate: f64::NEG_INFINITY,
            argmin: 0,
            bracket: (f64::NEG_INFINITY, f64::INFINITY),
            rounds: 0,
            flagged: Vec::new(),
            telemetry: Vec::new(),
        };
        let (inf, argmin) = path.minimum(space);
        path.c_estimate = inf;
        path.argmin = argmin;
        path
    }

    pub fn scalars(&self, space: &SpaceSpec) -> Vec<f64> {
        self.nodes.iter().map(|y| scalar_y(space, y)).collect()
    }

    fn minimum(&self, space: &SpaceSpec) -> (f64, usize) {
        self.scalars(space)
            .into_iter()
            .enumerate()
            .fold((f64::INFINITY, 0), |acc, (i, s)| if s < acc.0 { (s, i) } else { acc })
    }

    /// Largest step between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| distance(&w[0], &w[1])).fold(0.0, f64::max)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Redistributes `count` nodes uniformly in arc length along the polyline.
/// Linear interpolation preserves `tr_g T = 1` since the constraint is linear in y.
fn reparametrize(polyline: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    let mut cumulative = vec![0.0];
    for w in polyline.windows(2) {
        cumulative.push(cumulative.last().unwrap() + distance(&w[0], &w[1]));
    }
    let total = *cumulative.last().unwrap();
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let target = total * k as f64 / (count - 1) as f64;
        while seg + 2 < polyline.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let w = if len > 0.0 { ((target - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(polyline[seg].iter().zip(&polyline[seg + 1]).map(|(a, b)| a + w * (b - a)).collect());
    }
    out
}

fn anchor(space: &SpaceSpec, t: &Candidate, stratum: &Stratum) -> Result<Vec<f64>> {
    Ok(optimal_variation(space, t, stratum)?.point(ANCHOR_T)?.y())
}

/// The metric with all `y_i` equal on `tr_g T = 1`.
pub fn center(space: &SpaceSpec, t: &Candidate) -> Vec<f64> {
    normalize(space, &t.t, vec![1.0; space.r()])
}

fn through_center(space: &SpaceSpec, t: &Candidate, from: &Stratum, to: &Stratum, nodes: usize) -> Result<PathState> {
    if nodes < 3 {
        return Err(Error::InvalidSpace("a path needs at least 3 nodes".into()));
    }
    let polyline = vec![anchor(space, t, from)?, center(space, t), anchor(space, t, to)?];
    Ok(PathState::new(space, from.clone(), to.clone(), reparametrize(&polyline, nodes)))
}

fn reports(space: &SpaceSpec, t: &Candidate) -> Result<Vec<LevelReport>> {
    space.subalgebra_strata().iter().map(|s| level_report(space, t, s)).collect()
}

/// Path for the three-module case with two strata of negative derivative:
/// optimal canonical variation anchors at both joined through the center.
pub fn build_path_wallach(space: &SpaceSpec, t: &Candidate, nodes: usize) -> Result<PathState> {
    check_len(space.r(), t.len())?;
    if !t.definite() {
        return Err(Error::Indefinite);
    }
    if !space.is_generalized_wallach() {
        return Err(Error::Hypothesis("space is not of generalized Wallach shape".into()));
    }
    let mut lv = reports(space, t)?;
    lv.sort_by(|a, b| b.alpha.partial_cmp(&a.alpha).unwrap());
    let negative: Vec<&LevelReport> = lv.iter().filter(|l| l.derivative_at_infinity < 0.0).collect();
    if negative.len() < 2 {
        return Err(Error::Hypothesis(format!(
            "need beta - alpha < 0 at two strata, found {}: {}",
            negative.len(),
            gaps(&lv)
        )));
    }
    let (top, second) = (negative[0], negative[1]);
    let lowest = lv.last().unwrap();
    if !(second.alpha > lowest.alpha) || std::ptr::eq(second, lowest) {
        return Err(Error::Hypothesis(format!(
            "need alpha at {} above alpha at {}: {} <= {}",
            second.stratum, lowest.stratum, second.alpha, lowest.alpha
        )));
    }
    let path = through_center(space, t, &top.stratum, &second.stratum, nodes)?;
    if !(path.c_estimate > lowest.alpha) {
        return Err(Error::Hypothesis(format!(
            "initial path dips to {} below alpha at {} = {}",
            path.c_estimate, lowest.stratum, lowest.alpha
        )));
    }
    Ok(path)
}

fn gaps(lv: &[LevelReport]) -> String {
    lv.iter().map(|l| format!("{}: {:.6}", l.stratum, l.gap())).collect::<Vec<_>>().join(", ")
}

/// Path from the stratum of lowest `alpha` (negative derivative there) to the
/// other subalgebra stratum of highest `alpha`, passing through the center.
/// With `k_low = None` the lowest stratum is chosen, ties going to the
/// lowest dimension.
pub fn build_path_flag(space: &SpaceSpec, t: &Candidate, k_low: Option<&Stratum>, nodes: usize) -> Result<PathState> {
    check_len(space.r(), t.len())?;
    if !t.definite() {
        return Err(Error::Indefinite);
    }
    let lv = reports(space, t)?;
    if lv.len() < 2 {
        return Err(Error::Hypothesis("need at least two subalgebra strata".into()));
    }
    let dim = |s: &Stratum| s.members.iter().map(|&i| space.d(i)).sum::<f64>();
    let min_alpha = lv.iter().map(|l| l.alpha).fold(f64::INFINITY, f64::min);
    let tie = 1e-9 * (1.0 + min_alpha.abs());
    let low = match k_low {
        Some(k) => lv
            .iter()
            .find(|l| l.stratum.members == k.members)
            .ok_or_else(|| Error::NotSubalgebra(k.label()))?,
        None => lv
            .iter()
            .filter(|l| l.alpha <= min_alpha + tie)
            .min_by(|a, b| dim(&a.stratum).partial_cmp(&dim(&b.stratum)).unwrap())
            .unwrap(),
    };
    if low.alpha > min_alpha + tie {
        return Err(Error::Hypothesis(format!(
            "alpha at {} is {}, above the lowest level {}",
            low.stratum, low.alpha, min_alpha
        )));
    }
    if let Some(rival) = lv
        .iter()
        .find(|l| l.stratum != low.stratum && l.alpha <= min_alpha + tie && dim(&l.stratum) < dim(&low.stratum))
    {
        return Err(Error::Hypothesis(format!("{} ties the lowest level with smaller dimension", rival.stratum)));
    }
    if !(low.derivative_at_infinity < 0.0) {
        return Err(Error::Hypothesis(format!(
            "need beta - alpha < 0 at {}, got {:.6}",
            low.stratum,
            low.gap()
        )));
    }
    let other = lv
        .iter()
        .filter(|l| l.stratum != low.stratum)
        .max_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap().then(dim(&b.stratum).partial_cmp(&dim(&a.stratum)).unwrap()))
        .unwrap();
    through_center(space, t, &low.stratum, &other.stratum, nodes)
}

/// Pushes interior nodes along the flow until `c_estimate` settles.
pub fn relax(space: &SpaceSpec, t: &Candidate, mut path: PathState, params: &RelaxParams) -> Result<PathState> {
    check_len(space.r(), t.len())?;
    let n = path.nodes.len();
    if n < 3 {
        return Err(Error::InvalidSpace("a path needs at least 3 nodes".into()));
    }
    let mut history = vec![path.c_estimate];
    for round in 1..=params.max_rounds {
        let moved: Vec<(Vec<f64>, bool)> = path.nodes[1..n - 1]
            .par_iter()
            .map(|y| {
                let next = advance(space, &t.t, y, params.flow_time, params.rtol);
                if next.iter().cloned().fold(f64::INFINITY, f64::min) < 1e-12 {
                    (y.clone(), true)
                } else {
                    (next, false)
                }
            })
            .collect();
        let mut polyline = Vec::with_capacity(n);
        polyline.push(path.nodes[0].clone());
        for (i, (y, flagged)) in moved.into_iter().enumerate() {
            if flagged && !path.flagged.contains(&(i + 1)) {
                path.flagged.push(i + 1);
            }
            polyline.push(y);
        }
        polyline.push(path.nodes[n - 1].clone());
        path.nodes = reparametrize(&polyline, n);
        let (inf, argmin) = path.minimum(space);
        path.argmin = argmin;
        path.c_estimate = path.c_estimate.max(inf);
        path.rounds = round;
        path.telemetry.push(RelaxRow { round, inf_s: inf, argmin, c_estimate: path.c_estimate });
        history.push(path.c_estimate);
        let k = history.len();
        if k > params.stable_rounds && history[k - 1] - history[k - 1 - params.stable_rounds] < params.stable_tol {
            break;
        }
    }
    let alphas: Vec<f64> = reports(space, t)?.iter().map(|l| l.alpha).collect();
    let c = path.c_estimate;
    path.bracket = (
        alphas.iter().cloned().filter(|a| *a < c).fold(f64::NEG_INFINITY, f64::max),
        alphas.iter().cloned().filter(|a| *a > c).fold(f64::INFINITY, f64::min),
    );
    Ok(path)
}

/// A critical point of co-index at most one at the minimax level.
#[derive(Debug, Clone, Serialize)]
pub struct Saddle {
    pub critical: CriticalPoint,
    pub c_estimate: f64,
    pub node: usize,
}

/// Newton refinement from the minimizing node, falling back to nearby nodes
/// in order of increasing gradient norm.
pub fn extract_saddle(space: &SpaceSpec, t: &Candidate, path: &PathState, degeneracy_rel: f64) -> Option<Saddle> {
    let n = path.nodes.len();
    let lo = path.argmin.saturating_sub(5);
    let hi = (path.argmin + 5).min(n - 1);
    let mut order: Vec<usize> = (lo..=hi).collect();
    let gnorm: Vec<f64> = order.iter().map(|&i| gradient_norm_y(space, &t.t, &path.nodes[i])).collect();
    let argmin = path.argmin;
    let mut keyed: Vec<(usize, f64)> = order.drain(..).zip(gnorm).collect();
    keyed.sort_by(|a, b| (a.0 != argmin).cmp(&(b.0 != argmin)).then(a.1.partial_cmp(&b.1).unwrap()));
    let c = path.c_estimate;
    for (node, _) in keyed {
        let start = crate::space::MetricPoint::from_y(path.nodes[node].clone()).ok()?;
        if let Some(cp) = newton_critical(space, t, &start, degeneracy_rel) {
            if cp.spectrum.co_index <= 1 && (cp.c - c).abs() <= 1e-3 * (1.0 + c.abs()) {
                return Some(Saddle { critical: cp, c_estimate: c, node });
            }
        }
    }
    None
}

/// Writes telemetry as CSV with header `round,inf_S,argmin_node,c_estimate`.
pub fn write_telemetry_csv<W: std::io::Write>(rows: &[RelaxRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "inf_S", "argmin_node", "c_estimate"])?;
    for row in rows {
        w.write_record([
            row.round.to_string(),
            row.inf_s.to_string(),
            row.argmin.to_string(),
            row.c_estimate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
