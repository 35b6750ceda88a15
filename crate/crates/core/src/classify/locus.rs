use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::image::project;
use crate::curvature::{jacobian_x, rank_report_x, ricci_y};
use crate::error::{Error, Result};
use crate::space::{CatalogShape, SpaceSpec};

/// How to produce points of the degenerate locus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TraceSpec {
    /// Sample the known closed-form branches with parameter in `range`.
    Closed { range: (f64, f64), samples: usize },
    /// Pseudo-arclength continuation in the plane of the free coordinates
    /// `free` (0-based) through `start`, other coordinates held fixed.
    Continuation { start: Vec<f64>, free: (usize, usize), step: f64, max_points: usize, bounds: (f64, f64) },
}

#[derive(Debug, Clone, Serialize)]
pub struct LocusPoint {
    pub x: Vec<f64>,
    pub projected: Vec<f64>,
    /// `sigma_min / sigma_max` of `dRic` restricted to the complement of the radial direction.
    pub sigma_ratio: f64,
}

/// `x1^4 - (2x2^2 + 2)x1^2 + x2^4 - 2x2^2 + 1` at `x3 = 1`.
pub fn wallach_quartic(x: &[f64]) -> f64 {
    let (a, b) = (x[0] / x[2], x[1] / x[2]);
    a.powi(4) - (2.0 * b * b + 2.0) * a * a + b.powi(4) - 2.0 * b * b + 1.0
}

/// `3x1^5 - (6x2^2 + 6x3^2)x1^3 + 3(x2 - x3)^2(x2 + x3)^2 x1 - 8x2^2x3^3`.
pub fn g2_quintic(x: &[f64]) -> f64 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    3.0 * x1.powi(5) - (6.0 * x2 * x2 + 6.0 * x3 * x3) * x1.powi(3)
        + 3.0 * (x2 - x3).powi(2) * (x2 + x3).powi(2) * x1
        - 8.0 * x2 * x2 * x3.powi(3)
}

/// Closed-form branches `x2(t)` of the degenerate curve of `G2/U(2)` at
/// `x1 = t`, `x3 = 1`; a branch is absent where its radicand is negative.
pub fn g2_branches(t: f64) -> [Option<f64>; 2] {
    let root = (9.0 * t.powi(4) + 6.0 * t.powi(3) + 6.0 * t + 4.0).sqrt();
    let base = t * t + 1.0 + 4.0 / (3.0 * t);
    [1.0, -1.0].map(|sign| {
        let sq = base + sign * 2.0 / (3.0 * t) * root;
        (sq > 0.0).then(|| sq.sqrt())
    })
}

fn point(space: &SpaceSpec, x: Vec<f64>) -> LocusPoint {
    let y: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
    LocusPoint {
        projected: project(space, &ricci_y(space, &y)),
        sigma_ratio: rank_report_x(space, &x).ratio,
        x,
    }
}

/// Normalized leading principal minor of the symmetric matrix
/// `d_m dR_m/dx_n x_n^2`. Its null space always contains `y`, so the minor
/// vanishes exactly where the rank drops below `r - 1`.
pub fn degeneracy_function(space: &SpaceSpec, x: &[f64]) -> f64 {
    let r = space.r();
    let j = jacobian_x(space, x);
    let m = DMatrix::from_fn(r - 1, r - 1, |a, b| space.d(a) * j[(a, b)] * x[b] * x[b]);
    let scale: f64 = m.row_iter().map(|row| row.norm()).product();
    if scale > 0.0 { m.determinant() / scale } else { 0.0 }
}

/// Points of the set where `dRic` has rank below `r - 1`.
pub fn degenerate_locus(space: &SpaceSpec, spec: &TraceSpec) -> Result<Vec<LocusPoint>> {
    match spec {
        TraceSpec::Closed { range, samples } => closed(space, *range, *samples),
        TraceSpec::Continuation { start, free, step, max_points, bounds } => {
            continuation(space, start, *free, *step, *max_points, *bounds)
        }
    }
}

fn closed(space: &SpaceSpec, (lo, hi): (f64, f64), samples: usize) -> Result<Vec<LocusPoint>> {
    if samples < 2 || !(lo < hi) {
        return Err(Error::Grid(format!("{samples} samples on ({lo}, {hi})")));
    }
    let params = (0..samples).map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64);
    let mut out = Vec::new();
    match CatalogShape::of(space) {
        CatalogShape::WallachSu3 => {
            for s in params.filter(|s| *s > 0.0) {
                out.push(point(space, vec![s, s + 1.0, 1.0]));
                out.push(point(space, vec![s + 1.0, s, 1.0]));
                if s < 1.0 {
                    out.push(point(space, vec![s, 1.0 - s, 1.0]));
                }
            }
        }
        CatalogShape::G2U2 => {
            for t in params.filter(|t| *t > 0.0) {
                for x2 in g2_branches(t).into_iter().flatten() {
                    out.push(point(space, vec![t, x2, 1.0]));
                }
            }
        }
        _ => {
            return Err(Error::Continuation(format!(
                "no closed-form locus for {}; use continuation",
                space.name()
            )))
        }
    }
    Ok(out)
}

fn continuation(
    space: &SpaceSpec,
    start: &[f64],
    (a, b): (usize, usize),
    step: f64,
    max_points: usize,
    (lo, hi): (f64, f64),
) -> Result<Vec<LocusPoint>> {
    let r = space.r();
    if start.len() != r {
        return Err(Error::Length { expected: r, got: start.len() });
    }
    if a >= r || b >= r || a == b || !(step > 0.0) || !(0.0 < lo && lo < hi) {
        return Err(Error::Continuation("invalid continuation parameters".into()));
    }
    let embed = |p: Vector2<f64>| {
        let mut x = start.to_vec();
        x[a] = p[0];
        x[b] = p[1];
        x
    };
    let f = |p: Vector2<f64>| degeneracy_function(space, &embed(p));
    let grad = |p: Vector2<f64>| {
        let h = 1e-7 * (1.0 + p.norm());
        let dx = Vector2::new(h, 0.0);
        let dy = Vector2::new(0.0, h);
        Vector2::new((f(p + dx) - f(p - dx)) / (2.0 * h), (f(p + dy) - f(p - dy)) / (2.0 * h))
    };
    let inside = |p: Vector2<f64>| p.iter().all(|v| *v >= lo && *v <= hi);
    let tol = 1e-13;

    // Project the start onto the zero set along the gradient, moving at most
    // a tenth of the distance to the origin per step.
    let mut p = Vector2::new(start[a], start[b]);
    for _ in 0..200 {
        let (v, g) = (f(p), grad(p));
        if v.abs() <= tol {
            break;
        }
        let full = g * (v / g.norm_squared());
        p -= full * (0.1 * p.norm() / full.norm()).min(1.0);
    }
    if !(f(p).abs() <= 1e3 * tol) {
        return Err(Error::Continuation(format!("no locus point near the start (residual {:e})", f(p))));
    }
    if !inside(p) {
        return Err(Error::Continuation(format!("projection of the start left the bounds at ({}, {})", p[0], p[1])));
    }

    let mut branches = Vec::new();
    for orientation in [1.0, -1.0] {
        let mut branch = Vec::new();
        let mut cur = p;
        let g = grad(cur);
        let mut tangent = Vector2::new(-g[1], g[0]).normalize() * orientation;
        let mut h = step;
        while branch.len() < max_points / 2 {
            let predicted = cur + tangent * h;
            let mut q = predicted;
            let mut converged = false;
            for _ in 0..20 {
                let (v, g) = (f(q), grad(q));
                if v.abs() <= tol {
                    converged = true;
                    break;
                }
                let m = Matrix2::new(g[0], g[1], tangent[0], tangent[1]);
                let rhs = Vector2::new(-v, -tangent.dot(&(q - predicted)));
                match m.lu().solve(&rhs) {
                    Some(dq) => q += dq,
                    None => break,
                }
            }
            if !converged || (q - cur).norm() > 2.0 * h {
                h *= 0.5;
                if h < 1e-9 * step.max(1.0) {
                    break;
                }
                continue;
            }
            if !inside(q) {
                break;
            }
            let g = grad(q);
            let mut next = Vector2::new(-g[1], g[0]).normalize();
            if next.dot(&tangent) < 0.0 {
                next = -next;
            }
            tangent = next;
            cur = q;
            branch.push(cur);
            h = (h * 1.5).min(step);
        }
        branches.push(branch);
    }
    let mut ordered: Vec<Vector2<f64>> = branches[1].iter().rev().copied().collect();
    ordered.push(p);
    ordered.extend(branches[0].iter().copied());
    Ok(ordered.into_iter().map(|q| point(space, embed(q))).collect())
}

/// CSV with columns `x1..xr,p1..pk,sigma_ratio`.
pub fn write_locus_csv<W: std::io::Write>(points: &[LocusPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = points.first() {
        let mut header: Vec<String> = (1..=first.x.len()).map(|i| format!("x{i}")).collect();
        header.extend((1..=first.projected.len()).map(|i| format!("p{i}")));
        header.push("sigma_ratio".into());
        w.write_record(&header)?;
    }
    for p in points {
        let mut row: Vec<String> = p.x.iter().chain(&p.projected).map(f64::to_string).collect();
        row.push(p.sigma_ratio.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::sweep::wallach_plane;
    use crate::curvature::RANK_THRESHOLD;
    use crate::space::catalog;

    #[test]
    fn wallach_branches_project_to_red_dots() {
        let w = catalog("wallach_su3").unwrap();
        let pts = degenerate_locus(&w, &TraceSpec::Closed { range: (0.1, 3.0), samples: 12 }).unwrap();
        let dots: Vec<(f64, f64)> =
            [[1.0, 1.0, 2.0], [1.0, 2.0, 1.0], [2.0, 1.0, 1.0]].iter().map(|t| wallach_plane(t)).collect();
        for p in &pts {
            assert!(wallach_quartic(&p.x).abs() < 1e-10);
            assert!(p.sigma_ratio <= RANK_THRESHOLD);
            assert!(dots.iter().any(|d| (d.0 - p.projected[0]).hypot(d.1 - p.projected[1]) < 1e-9));
        }
    }

    #[test]
    fn g2_plus_branch_at_one() {
        let x2 = g2_branches(1.0)[0].unwrap();
        assert!((x2 - (20.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!(g2_quintic(&[1.0, x2, 1.0]).abs() < 1e-9);
        let g = catalog("g2_u2").unwrap();
        assert!(rank_report_x(&g, &[1.0, x2, 1.0]).deficient);
        assert!(degeneracy_function(&g, &[1.0, x2, 1.0]).abs() < 1e-12);
    }

    #[test]
    fn continuation_recovers_quartic() {
        let w = catalog("wallach_su3").unwrap();
        let spec = TraceSpec::Continuation {
            start: vec![0.3, 0.75, 1.0],
            free: (0, 1),
            step: 0.02,
            max_points: 400,
            bounds: (0.01, 5.0),
        };
        let pts = degenerate_locus(&w, &spec).unwrap();
        assert!(pts.len() > 40);
        for p in &pts {
            assert!(wallach_quartic(&p.x).abs() < 1e-6, "{:?}", p.x);
        }
    }

    #[test]
    fn closed_form_needs_catalog() {
        let f = catalog("f4_u3su2").unwrap();
        assert!(matches!(
            degenerate_locus(&f, &TraceSpec::Closed { range: (0.1, 1.0), samples: 3 }),
            Err(Error::Continuation(_))
        ));
    }
}
