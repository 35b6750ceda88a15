use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::region::{region_label, RegionKind};
use super::sweep::wallach_plane;
use crate::curvature::ricci_y;
use crate::error::{Error, Result};
use crate::space::{Candidate, CatalogShape, SpaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Log-uniform per coordinate.
    #[default]
    LogUniform,
    /// Uniform per coordinate on `(0, hi)`.
    Uniform,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImageOptions {
    /// Range of the free coordinates `x_1..x_{r-1}`; `x_r = 1`.
    pub range: (f64, f64),
    pub seed: u64,
    pub sampling: Sampling,
    /// Attach a region label to definite image points.
    pub labels: bool,
}

impl Default for ImageOptions {
    fn default() -> Self {
        Self { range: (0.1, 10.0), seed: 1, sampling: Sampling::LogUniform, labels: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ImagePoint {
    pub x: Vec<f64>,
    pub ric: Vec<f64>,
    /// Plane coordinates for the three-module Wallach space, otherwise
    /// `ric_i / ric_r` for `i < r`.
    pub projected: Vec<f64>,
    pub definite: bool,
    pub label: Option<RegionKind>,
}

/// Projection of a candidate (or Ricci coefficient vector) used for plotting.
pub fn project(space: &SpaceSpec, t: &[f64]) -> Vec<f64> {
    if CatalogShape::of(space) == CatalogShape::WallachSu3 {
        let (x, y) = wallach_plane(t);
        vec![x, y]
    } else {
        let last = t[t.len() - 1];
        t[..t.len() - 1].iter().map(|v| v / last).collect()
    }
}

/// Ricci coefficients of `n` seeded random metrics with `x_r = 1`.
pub fn ricci_image_sample(space: &SpaceSpec, n: usize, opts: &ImageOptions) -> Result<Vec<ImagePoint>> {
    let (lo, hi) = opts.range;
    if n == 0 {
        return Err(Error::Grid("sample count must be positive".into()));
    }
    let valid = match opts.sampling {
        Sampling::LogUniform => lo > 0.0 && lo < hi,
        Sampling::Uniform => hi > 0.0,
    };
    if !valid || !hi.is_finite() {
        return Err(Error::OutOfRange { value: lo, lo: 0.0, hi });
    }
    let r = space.r();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let metrics: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..r - 1)
                .map(|_| match opts.sampling {
                    Sampling::LogUniform => (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp(),
                    Sampling::Uniform => hi * (1.0 - rng.random::<f64>()),
                })
                .collect();
            x.push(1.0);
            x
        })
        .collect();
    metrics
        .into_par_iter()
        .map(|x| {
            let y: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
            let ric = ricci_y(space, &y);
            let definite = ric.iter().all(|v| *v > 0.0);
            let label = if opts.labels && definite {
                Some(region_label(space, &Candidate::new(ric.clone()))?.kind)
            } else {
                None
            };
            Ok(ImagePoint { projected: project(space, &ric), x, ric, definite, label })
        })
        .collect()
}

/// CSV with columns `x1..xr,R1..Rr,p1..pk,definite,label`.
pub fn write_image_csv<W: std::io::Write>(points: &[ImagePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = points.first() else {
        w.flush()?;
        return Ok(());
    };
    let r = first.x.len();
    let mut header: Vec<String> = (1..=r).map(|i| format!("x{i}")).collect();
    header.extend((1..=r).map(|i| format!("R{i}")));
    header.extend((1..=first.projected.len()).map(|i| format!("p{i}")));
    header.extend(["definite".into(), "label".into()]);
    w.write_record(&header)?;
    for p in points {
        let mut row: Vec<String> = p.x.iter().chain(&p.ric).chain(&p.projected).map(f64::to_string).collect();
        row.push(p.definite.to_string());
        row.push(p.label.map_or("", |k| k.as_str()).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::catalog;

    #[test]
    fn kahler_metrics_share_ricci_direction() {
        let w = catalog("wallach_su3").unwrap();
        let p = |x: [f64; 3]| project(&w, &ricci_y(&w, &x.map(|v| 1.0 / v)));
        let (a, b) = (p([1.0, 1.0, 2.0]), p([1.0, 2.0, 3.0]));
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let w = catalog("wallach_su3").unwrap();
        let opts = ImageOptions { seed: 7, ..Default::default() };
        let a = ricci_image_sample(&w, 500, &opts).unwrap();
        let b = ricci_image_sample(&w, 500, &opts).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.x == q.x && p.label == q.label));
        assert!(a.iter().any(|p| p.definite) && a.iter().any(|p| !p.definite));
        let mut buf = Vec::new();
        write_image_csv(&a, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 501);
    }

    #[test]
    fn definiteness_interface_is_sampled() {
        let w = catalog("wallach_su3").unwrap();
        let pts = ricci_image_sample(&w, 100_000, &ImageOptions { labels: false, ..Default::default() }).unwrap();
        let near = pts.iter().any(|p| {
            let sum: f64 = p.ric.iter().sum();
            let m = p.ric.iter().cloned().fold(f64::INFINITY, f64::min) / sum;
            m.abs() < 1e-3
        });
        assert!(near);
    }
}
