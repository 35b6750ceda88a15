//! Constrained gradient flow of scalar curvature, Newton refinement of
//! critical points, and diagnosis of divergent Palais-Smale tails.

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{gradient_norm_y, gradient_y, inner_y, ricci_y, scalar_y, tangent_spectrum, trace_y, Spectrum};
use crate::error::{Error, Result};
use crate::invariants::alpha;
use crate::search::{lagrange_newton, log_uniform_starts, normalize, same_point, NewtonOptions};
use crate::space::{check_len, Candidate, MetricPoint, SpaceSpec, Stratum, StratumKind};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowParams {
    pub initial_dt: f64,
    /// Relative local error tolerance of the embedded Euler/Heun pair.
    pub rtol: f64,
    pub max_steps: usize,
    /// Convergence threshold on `|grad|_g`, relative to `1 + |S|`.
    pub grad_tol: f64,
    /// A coordinate `y_i` at or below this value counts as having reached the boundary.
    pub eps_bd: f64,
    /// Accepted steps without progress before declaring a stall.
    pub stall_window: usize,
    /// Degeneracy tolerance for the Hessian of converged points.
    pub degeneracy_rel: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            initial_dt: 1e-2,
            rtol: 1e-8,
            max_steps: 5_000_000,
            grad_tol: 1e-10,
            eps_bd: 1e-6,
            stall_window: 2_000,
            degeneracy_rel: 1e-7,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.initial_dt, self.rtol, self.grad_tol, self.eps_bd, self.degeneracy_rel];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_steps == 0 || self.stall_window == 0 {
            return Err(Error::InvalidSpace("flow tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// A critical point of `S|M_T`.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    /// y-chart coordinates.
    pub point: MetricPoint,
    pub x: Vec<f64>,
    /// Constant in `Ric = cT`; equals `S` on `tr_g T = 1`.
    pub c: f64,
    pub spectrum: Spectrum,
    /// `|Ric - cT|_g`.
    pub residual: f64,
}

/// Limit data of a divergent Palais-Smale tail.
#[derive(Debug, Clone, Serialize)]
pub struct Divergence {
    pub stratum: Stratum,
    pub kind: StratumKind,
    /// Extrapolated limit of `S`.
    pub lambda: f64,
    /// Unit-trace fiber metric (y-chart, on the stratum members).
    pub fiber_point: Vec<f64>,
    /// `|Ric(g_F) - lambda T|_{K/H}|_{g_F}`; absent for Infinity strata.
    pub ps_residual: Option<f64>,
    /// Nearest `alpha` over subalgebra strata and its distance to `lambda`.
    pub matched_alpha: Option<(Stratum, f64, f64)>,
    /// Set when the tail limits onto an Infinity stratum, which signals numerical failure.
    pub anomaly: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status")]
pub enum FlowResult {
    Converged { critical: CriticalPoint, steps: usize, time: f64 },
    Diverged { divergence: Divergence, last: MetricPoint, steps: usize, time: f64 },
    Stalled { last: MetricPoint, scalar: f64, grad_norm: f64, reason: String, steps: usize, time: f64 },
}

impl FlowResult {
    pub fn is_converged(&self) -> bool {
        matches!(self, FlowResult::Converged { .. })
    }
}

/// One recorded flow state.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub time: f64,
    pub y: Vec<f64>,
    pub scalar: f64,
    pub grad_norm: f64,
}

fn velocity(space: &SpaceSpec, t: &[f64], y: &[f64]) -> Vec<f64> {
    let g = gradient_y(space, t, y);
    y.iter().zip(&g).map(|(y, g)| -y * y * g).collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// One embedded Euler/Heun step of size `h`. Returns the re-projected point,
/// its scalar curvature and the error ratio, or a shrink factor for `h`.
fn try_step(space: &SpaceSpec, t: &[f64], y: &[f64], s: f64, h: f64, rtol: f64) -> std::result::Result<(Vec<f64>, f64, f64), f64> {
    let k1 = velocity(space, t, y);
    let euler: Vec<f64> = y.iter().zip(&k1).map(|(y, k)| y + h * k).collect();
    if euler.iter().any(|v| !(*v > 0.0)) {
        return Err(0.25);
    }
    let k2 = velocity(space, t, &euler);
    let heun: Vec<f64> = (0..y.len()).map(|i| y[i] + 0.5 * h * (k1[i] + k2[i])).collect();
    let err = (0..y.len())
        .map(|i| (heun[i] - euler[i]).abs() / (rtol * y[i].abs().max(heun[i].abs())))
        .fold(0.0f64, f64::max);
    if !(err <= 1.0) || heun.iter().any(|v| !(*v > 0.0)) {
        return Err((0.9 / err.sqrt()).clamp(0.1, 0.5));
    }
    let next = normalize(space, t, heun);
    let next_s = scalar_y(space, &next);
    if next_s < s - 1e-13 * (1.0 + s.abs()) {
        return Err(0.5);
    }
    Ok((next, next_s, err))
}

/// Flows `y` for time `duration` (shorter if the step size collapses).
pub(crate) fn advance(space: &SpaceSpec, t: &[f64], y: &[f64], duration: f64, rtol: f64) -> Vec<f64> {
    let mut y = y.to_vec();
    let mut s = scalar_y(space, &y);
    let mut h = duration;
    let mut elapsed = 0.0;
    while elapsed < duration && h > 1e-16 {
        let step = h.min(duration - elapsed);
        match try_step(space, t, &y, s, step, rtol) {
            Ok((next, next_s, err)) => {
                y = next;
                s = next_s;
                elapsed += step;
                h = step * (0.9 / err.max(1e-12).sqrt()).clamp(0.2, 4.0);
            }
            Err(shrink) => h = step * shrink,
        }
    }
    y
}

/// Gradient ascent of `S` on `tr_g T = 1` from a feasible start.
pub fn flow(space: &SpaceSpec, t: &Candidate, start: &MetricPoint, params: &FlowParams) -> Result<FlowResult> {
    flow_traced(space, t, start, params, 0).map(|(r, _)| r)
}

/// Like [`flow`], also returning every `record_every`-th accepted state
/// (none when zero).
pub fn flow_traced(
    space: &SpaceSpec,
    t: &Candidate,
    start: &MetricPoint,
    params: &FlowParams,
    record_every: usize,
) -> Result<(FlowResult, Vec<TrajectoryRow>)> {
    params.validate()?;
    check_len(space.r(), t.len())?;
    check_len(space.r(), start.len())?;
    if !t.definite() {
        return Err(Error::Indefinite);
    }
    let tt = &t.t;
    let mut y = start.y();
    let tr = trace_y(space, tt, &y);
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::ConstraintViolated(tr));
    }
    let mut s = scalar_y(space, &y);
    let mut h = params.initial_dt;
    let mut time = 0.0;
    let mut rows = Vec::new();
    let mut tail: Vec<Vec<f64>> = vec![y.clone()];
    let mut next_decade = (min_of(&y).log10().floor()) as i32;
    let mut best_s = s;
    let mut since_progress = 0usize;
    let mut step = 0usize;
    let record = |step: usize, time: f64, y: &[f64], s: f64, rows: &mut Vec<TrajectoryRow>| {
        if record_every > 0 && step.is_multiple_of(record_every) {
            rows.push(TrajectoryRow {
                step,
                time,
                y: y.to_vec(),
                scalar: s,
                grad_norm: gradient_norm_y(space, tt, y),
            });
        }
    };
    record(0, 0.0, &y, s, &mut rows);
    while step < params.max_steps {
        let gnorm = gradient_norm_y(space, tt, &y);
        if gnorm <= params.grad_tol * (1.0 + s.abs()) {
            let critical = match polish(space, t, &y, params) {
                Some(c) => c,
                None => critical_at(space, tt, &y, params.degeneracy_rel)?,
            };
            return Ok((FlowResult::Converged { critical, steps: step, time }, rows));
        }
        if min_of(&y) <= params.eps_bd {
            tail.push(y.clone());
            let last = MetricPoint::from_y(y.clone())?;
            let tail_points: Vec<MetricPoint> = tail.iter().map(|v| MetricPoint::from_y(v.clone())).collect::<Result<_>>()?;
            let divergence = diagnose_divergence(space, t, &tail_points)?;
            return Ok((FlowResult::Diverged { divergence, last, steps: step, time }, rows));
        }
        if h < 1e-16 {
            let reason = format!("step size collapsed to {h:e}");
            let last = MetricPoint::from_y(y)?;
            return Ok((FlowResult::Stalled { last, scalar: s, grad_norm: gnorm, reason, steps: step, time }, rows));
        }
        let (candidate, cs, err) = match try_step(space, tt, &y, s, h, params.rtol) {
            Ok(accepted) => accepted,
            Err(shrink) => {
                h *= shrink;
                continue;
            }
        };
        y = candidate;
        s = cs;
        time += h;
        step += 1;
        h *= (0.9 / err.max(1e-12).sqrt()).clamp(0.2, 4.0);
        record(step, time, &y, s, &mut rows);
        let m = min_of(&y);
        while m < 10f64.powi(next_decade) {
            tail.push(y.clone());
            next_decade -= 1;
        }
        if s > best_s + 1e-15 * (1.0 + s.abs()) {
            best_s = s;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress >= params.stall_window {
                // The explicit pair can park just short of a critical point
                // once S stops resolving; let Newton finish if it agrees.
                if let Some(critical) = polish(space, t, &y, params) {
                    return Ok((FlowResult::Converged { critical, steps: step, time }, rows));
                }
                let reason = format!("no increase of S over {} steps", params.stall_window);
                let last = MetricPoint::from_y(y.clone())?;
                return Ok((FlowResult::Stalled { last, scalar: s, grad_norm: gnorm, reason, steps: step, time }, rows));
            }
        }
    }
    let gnorm = gradient_norm_y(space, tt, &y);
    let reason = format!("step budget of {} exhausted", params.max_steps);
    let last = MetricPoint::from_y(y)?;
    Ok((FlowResult::Stalled { last, scalar: s, grad_norm: gnorm, reason, steps: step, time }, rows))
}

fn polish(space: &SpaceSpec, t: &Candidate, y: &[f64], params: &FlowParams) -> Option<CriticalPoint> {
    let c = newton_critical(space, t, &MetricPoint::from_y(y.to_vec()).ok()?, params.degeneracy_rel)?;
    let tol = params.grad_tol * (1.0 + c.c.abs());
    (same_point(&c.point.y(), y, 1e-6) && gradient_norm_y(space, &t.t, &c.point.y()) <= tol).then_some(c)
}

fn critical_at(space: &SpaceSpec, t: &[f64], y: &[f64], degeneracy_rel: f64) -> Result<CriticalPoint> {
    let ric = ricci_y(space, y);
    let c = scalar_y(space, y);
    let diff: Vec<f64> = ric.iter().zip(t).map(|(r, t)| r - c * t).collect();
    let point = MetricPoint::from_y(y.to_vec())?;
    Ok(CriticalPoint {
        x: point.x(),
        point,
        c,
        spectrum: tangent_spectrum(space, t, y, degeneracy_rel),
        residual: inner_y(space, &diff, &diff, y).sqrt(),
    })
}

/// Damped Newton solve of `Ric(g) = cT`, `tr_g T = 1` from `start`.
pub fn newton_critical(space: &SpaceSpec, t: &Candidate, start: &MetricPoint, degeneracy_rel: f64) -> Option<CriticalPoint> {
    if space.r() != t.len() || space.r() != start.len() || !t.definite() {
        return None;
    }
    let (y, _) = lagrange_newton(space, &t.t, &start.y(), NewtonOptions::default())?;
    critical_at(space, &t.t, &y, degeneracy_rel).ok()
}

/// Critical points reached by Newton from `starts` low-discrepancy points,
/// log-uniform per coordinate over `[1e-2, 1e2]`, deduplicated and sorted
/// by decreasing `S`.
pub fn critical_inventory(space: &SpaceSpec, t: &Candidate, starts: usize, degeneracy_rel: f64) -> Vec<CriticalPoint> {
    if !t.definite() || space.r() != t.len() {
        return Vec::new();
    }
    let seeds = log_uniform_starts(space, &t.t, starts, 1e-2, 1e2);
    let mut found: Vec<CriticalPoint> = seeds
        .par_iter()
        .filter_map(|y0| {
            let (y, _) = lagrange_newton(space, &t.t, y0, NewtonOptions::default())?;
            critical_at(space, &t.t, &y, degeneracy_rel).ok()
        })
        .collect();
    found.sort_by(|a, b| {
        b.c.partial_cmp(&a.c).unwrap().then_with(|| a.point.coords().partial_cmp(b.point.coords()).unwrap())
    });
    // Newton only resolves a degenerate root to about the square root of the
    // residual, so degenerate roots are clustered more coarsely.
    let mut unique: Vec<CriticalPoint> = Vec::new();
    for cp in found {
        let near = |u: &CriticalPoint| {
            let rel = if u.spectrum.degenerate && cp.spectrum.degenerate { 1e-4 } else { 1e-6 };
            same_point(u.point.coords(), cp.point.coords(), rel)
        };
        match unique.iter_mut().find(|u| near(u)) {
            Some(u) if cp.residual < u.residual => *u = cp,
            Some(_) => {}
            None => unique.push(cp),
        }
    }
    unique.sort_by(|a, b| b.c.partial_cmp(&a.c).unwrap());
    unique
}

/// Identifies the stratum, limit level and fiber metric of a divergent tail.
/// The tail should list points in order with decreasing minimal coordinate.
pub fn diagnose_divergence(space: &SpaceSpec, t: &Candidate, tail: &[MetricPoint]) -> Result<Divergence> {
    check_len(space.r(), t.len())?;
    let r = space.r();
    let ys: Vec<Vec<f64>> = tail.iter().map(|p| normalize(space, &t.t, p.y())).collect();
    let last = ys.last().ok_or_else(|| Error::Infeasible("empty tail".into()))?;
    let m_last = min_of(last);
    let prev = ys.iter().rev().skip(1).find(|y| min_of(y) > 2.0 * m_last);
    let members: Vec<usize> = match prev {
        Some(p) => {
            let m_prev = min_of(p);
            let denom = (m_last / m_prev).ln();
            (0..r).filter(|&i| (last[i] / p[i]).ln() / denom < 0.5).collect()
        }
        None => {
            let cut = m_last.sqrt() * last.iter().cloned().fold(0.0, f64::max).sqrt();
            (0..r).filter(|&i| last[i] >= cut).collect()
        }
    };
    let stratum = space.stratum(&members)?;
    let complement = stratum.complement(r);
    let scalar = |y: &[f64]| scalar_y(space, y);
    let m_of = |y: &[f64]| complement.iter().map(|&i| y[i]).fold(f64::INFINITY, f64::min);
    let (lambda, fiber_raw): (f64, Vec<f64>) = match prev {
        Some(p) => {
            let (m1, m0) = (m_of(last), m_of(p));
            let w = m1 / (m0 - m1);
            let lam = scalar(last) - w * (scalar(p) - scalar(last));
            let fib = stratum.members.iter().map(|&i| last[i] - w * (p[i] - last[i])).collect();
            (lam, fib)
        }
        None => (scalar(last), stratum.members.iter().map(|&i| last[i]).collect()),
    };
    let sub_t = t.restrict(&stratum.members);
    let (ps_residual, fiber_point) = if stratum.is_subalgebra() {
        let fiber = space.restrict_to_fiber(&stratum)?;
        let g = normalize(&fiber, &sub_t.t, fiber_raw);
        let ric = ricci_y(&fiber, &g);
        let diff: Vec<f64> = ric.iter().zip(&sub_t.t).map(|(r, t)| r - lambda * t).collect();
        (Some(inner_y(&fiber, &diff, &diff, &g).sqrt()), g)
    } else {
        let tr: f64 = stratum.members.iter().zip(&fiber_raw).map(|(&i, y)| space.d(i) * t.t[i] * y).sum();
        (None, fiber_raw.iter().map(|v| v / tr).collect())
    };
    let mut matched: Option<(Stratum, f64, f64)> = None;
    for s in space.subalgebra_strata() {
        if let Ok(level) = alpha(space, t, &s) {
            let dist = (level.value - lambda).abs();
            if matched.as_ref().is_none_or(|m| dist < m.2) {
                matched = Some((s, level.value, dist));
            }
        }
    }
    Ok(Divergence {
        kind: stratum.kind,
        anomaly: !stratum.is_subalgebra(),
        stratum,
        lambda,
        fiber_point,
        ps_residual,
        matched_alpha: matched,
    })
}

/// Writes rows as CSV with header `step,t,y1..yr,S,grad_norm`.
pub fn write_trajectory_csv<W: std::io::Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let r = rows.first().map_or(0, |row| row.y.len());
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((1..=r).map(|i| format!("y{i}")));
    header.extend(["S".to_string(), "grad_norm".to_string()]);
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.step.to_string(), row.time.to_string()];
        rec.extend(row.y.iter().map(f64::to_string));
        rec.extend([row.scalar.to_string(), row.grad_norm.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `|grad S|_{M_T}|_g` at a point after rescaling onto `tr_g T = 1`.
pub fn normalized_grad_norm(space: &SpaceSpec, t: &Candidate, p: &MetricPoint) -> f64 {
    let y = normalize(space, &t.t, p.y());
    gradient_norm_y(space, &t.t, &y)
}
