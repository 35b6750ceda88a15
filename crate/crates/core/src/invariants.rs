//! Critical levels at infinity: `alpha` (fiber suprema) and `beta` (base
//! suprema) for each intermediate subalgebra, canonical variations and the
//! scalar curvature along them.

use serde::Serialize;

use crate::curvature::{scalar_y, trace_y};
use crate::error::{Error, Result};
use crate::search::{supremum, SupOptions, Supremum};
use crate::space::{check_len, Candidate, CatalogShape, MetricPoint, SpaceSpec, Stratum};

/// A supremum over fiber or base metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub value: f64,
    pub attained: bool,
    /// 0-based module indices of the face carrying the witness. For `beta`
    /// these are original indices of the complement.
    pub face: Vec<usize>,
    /// Unit-trace witness in the y-chart on `face`.
    pub witness: Vec<f64>,
}

fn require_subalgebra(space: &SpaceSpec, stratum: &Stratum) -> Result<()> {
    if stratum.is_subalgebra() && space.is_closed(&stratum.members) {
        Ok(())
    } else {
        Err(Error::NotSubalgebra(stratum.label()))
    }
}

fn require_definite(t: &Candidate) -> Result<()> {
    if t.definite() {
        Ok(())
    } else {
        Err(Error::Indefinite)
    }
}

/// `alpha_k = sup S(h) / tr_h T|_{K/H}` over metrics `h` on the fiber.
pub fn alpha(space: &SpaceSpec, t: &Candidate, stratum: &Stratum) -> Result<Level> {
    alpha_with(space, t, stratum, SupOptions::default())
}

pub fn alpha_with(space: &SpaceSpec, t: &Candidate, stratum: &Stratum, opts: SupOptions) -> Result<Level> {
    check_len(space.r(), t.len())?;
    require_definite(t)?;
    require_subalgebra(space, stratum)?;
    let fiber = space.restrict_to_fiber(stratum)?;
    let sub = t.restrict(&stratum.members);
    let Supremum { value, attained, face, witness } = supremum(&fiber, &sub.t, opts);
    let face = face.iter().map(|&i| stratum.members[i]).collect();
    Ok(Level { value, attained, face, witness })
}

/// `beta_k = sup S(h) / tr_h T|_{G/K}` over base metrics constant on the
/// blocks of the stratum's base partition.
pub fn beta(space: &SpaceSpec, t: &Candidate, stratum: &Stratum) -> Result<Level> {
    beta_with(space, t, stratum, SupOptions::default())
}

pub fn beta_with(space: &SpaceSpec, t: &Candidate, stratum: &Stratum, opts: SupOptions) -> Result<Level> {
    check_len(space.r(), t.len())?;
    require_definite(t)?;
    require_subalgebra(space, stratum)?;
    let base = space.restrict_to_base(stratum)?;
    let bt = base.candidate(space, t);
    let Supremum { value, attained, face, witness } = supremum(&base.space, &bt.t, opts);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (&block, &v) in face.iter().zip(&witness) {
        for &i in &base.blocks[block] {
            indices.push(i);
            values.push(v);
        }
    }
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by_key(|&k| indices[k]);
    Ok(Level {
        value,
        attained,
        face: order.iter().map(|&k| indices[k]).collect(),
        witness: order.iter().map(|&k| values[k]).collect(),
    })
}

/// Both levels of one subalgebra stratum.
#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub stratum: Stratum,
    pub alpha: f64,
    pub alpha_attained: bool,
    pub alpha_witness: Option<Vec<f64>>,
    pub beta: f64,
    pub beta_attained: bool,
    pub beta_witness: Option<Vec<f64>>,
    /// Slope at `t = 0` of the optimal canonical variation; has the sign of `beta - alpha`.
    pub derivative_at_infinity: f64,
    #[serde(skip)]
    pub alpha_level: Level,
    #[serde(skip)]
    pub beta_level: Level,
}

impl LevelReport {
    pub fn gap(&self) -> f64 {
        self.beta - self.alpha
    }
}

pub fn level_report(space: &SpaceSpec, t: &Candidate, stratum: &Stratum) -> Result<LevelReport> {
    let a = alpha(space, t, stratum)?;
    let b = beta(space, t, stratum)?;
    let derivative = if a.attained && b.attained {
        let gf = MetricPoint::from_y(a.witness.clone())?;
        let gb = MetricPoint::from_y(b.witness.clone())?;
        canonical_variation(space, t, stratum, &gf, &gb)?.slope_at_zero()
    } else {
        b.value - a.value
    };
    Ok(LevelReport {
        stratum: stratum.clone(),
        alpha: a.value,
        alpha_attained: a.attained,
        alpha_witness: a.attained.then(|| a.witness.clone()),
        beta: b.value,
        beta_attained: b.attained,
        beta_witness: b.attained.then(|| b.witness.clone()),
        derivative_at_infinity: derivative,
        alpha_level: a,
        beta_level: b,
    })
}

/// Levels for every subalgebra stratum, in stratum order.
pub fn levels(space: &SpaceSpec, t: &Candidate) -> Result<Vec<LevelReport>> {
    space.subalgebra_strata().iter().map(|s| level_report(space, t, s)).collect()
}

/// Closed-form `(alpha, beta)` per subalgebra stratum for the catalog spaces.
pub fn closed_form_levels(space: &SpaceSpec, t: &Candidate) -> Option<Vec<(Vec<usize>, f64, f64)>> {
    let v = &t.t;
    match CatalogShape::of(space) {
        CatalogShape::WallachSu3 => Some(
            (0..3)
                .map(|i| {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    (vec![i], 1.0 / (3.0 * v[i]), 1.0 / (v[j] + v[k]))
                })
                .collect(),
        ),
        CatalogShape::G2U2 => Some(vec![
            (vec![1], 1.0 / (12.0 * v[1]), 1.0 / (v[0] + v[2])),
            (vec![2], 3.0 / (8.0 * v[2]), 5.0 / (8.0 * v[0] + 4.0 * v[1])),
        ]),
        CatalogShape::F4U3Su2 => {
            let alpha24 = alpha(space, t, &space.stratum(&[1, 3]).ok()?).ok()?.value;
            let beta24 = beta(space, t, &space.stratum(&[1, 3]).ok()?).ok()?.value;
            Some(vec![
                (vec![2], 1.0 / (12.0 * v[2]), 5.0 / (4.0 * v[0] + 6.0 * v[1] + 2.0 * v[3])),
                (vec![3], 2.0 / (9.0 * v[3]), f4_beta4(v)),
                (vec![1, 3], alpha24, beta24),
            ])
        }
        _ => None,
    }
}

/// Two-branch closed form of `beta` for the stratum `{4}` of `F4/U(3)SU(2)`.
///
/// With `u = 3T1 + T3` the base functional is `I1/y + I2 y + I3` where
/// `I1 = -1/(16u^2)`, `I2 = (28u^2 - 144uT2 - 81T2^2)/(4u^2)` and
/// `I3 = (16u + 18T2)/(8u^2)`, maximized over `0 < y < 1/(18 T2)`.
pub fn f4_beta4(t: &[f64]) -> f64 {
    let u = 3.0 * t[0] + t[2];
    if 7.0 * u >= 36.0 * t[1] {
        7.0 / (18.0 * t[1])
    } else {
        let disc = -28.0 * u * u + 144.0 * u * t[1] + 81.0 * t[1] * t[1];
        (16.0 * u + 18.0 * t[1] - 2.0 * disc.sqrt()) / (8.0 * u * u)
    }
}

/// Left-hand side of the third `F4/U(3)SU(2)` collection as usually stated,
/// `(2 sqrt(D) + 16u + 27 T2) / (8 u^2)`. It bounds [`f4_beta4`] from above
/// on its branch, so the inequality `< 2/9` remains a sufficient condition.
pub fn f4_collection3_lhs(t: &[f64]) -> f64 {
    let u = 3.0 * t[0] + t[2];
    let disc = -28.0 * u * u + 144.0 * u * t[1] + 81.0 * t[1] * t[1];
    (2.0 * disc.max(0.0).sqrt() + 16.0 * u + 27.0 * t[1]) / (8.0 * u * u)
}

/// Canonical variation `y = s y_F + t y_B` with `s = (1 - t T2*) / T1*`.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalVariation {
    pub stratum: Stratum,
    /// Fiber coordinates (y-chart) on the stratum's members.
    pub fiber: Vec<f64>,
    /// Base coordinates (y-chart) on the complement, constant on blocks.
    pub base: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
    pub s_fiber: f64,
    pub s_base: f64,
    pub a_norm: f64,
    pub t_max: f64,
    #[serde(skip)]
    full: SpaceSpec,
    #[serde(skip)]
    complement: Vec<usize>,
}

pub fn canonical_variation(
    space: &SpaceSpec,
    t: &Candidate,
    stratum: &Stratum,
    g_f: &MetricPoint,
    g_b: &MetricPoint,
) -> Result<CanonicalVariation> {
    check_len(space.r(), t.len())?;
    require_subalgebra(space, stratum)?;
    let r = space.r();
    let complement = stratum.complement(r);
    check_len(stratum.members.len(), g_f.len())?;
    check_len(complement.len(), g_b.len())?;
    let fiber_y = g_f.y();
    let base_y = g_b.y();
    let base = space.restrict_to_base(stratum)?;
    for block in &base.blocks {
        let pos = |i: usize| complement.iter().position(|&c| c == i).unwrap();
        let v0 = base_y[pos(block[0])];
        if block.iter().any(|&i| (base_y[pos(i)] - v0).abs() > 1e-12 * v0) {
            return Err(Error::BadPartition {
                stratum: stratum.label(),
                reason: "base metric is not constant on a block".into(),
            });
        }
    }
    let fiber_space = space.restrict_to_fiber(stratum)?;
    let t1 = trace_y(&fiber_space, &t.restrict(&stratum.members).t, &fiber_y);
    let t2: f64 = complement.iter().zip(&base_y).map(|(&i, &y)| space.d(i) * t.t[i] * y).sum();
    let s_fiber = scalar_y(&fiber_space, &fiber_y);
    let s_base = base_scalar(space, &complement, &base_y);
    let mut a = 0.0;
    for (fa, &k) in stratum.members.iter().enumerate() {
        for (bi, &i) in complement.iter().enumerate() {
            for (bj, &j) in complement.iter().enumerate() {
                a += space.triple(i, j, k) * base_y[bi] * base_y[bj] / fiber_y[fa];
            }
        }
    }
    Ok(CanonicalVariation {
        stratum: stratum.clone(),
        fiber: fiber_y,
        base: base_y,
        t1,
        t2,
        s_fiber,
        s_base,
        a_norm: 0.25 * a,
        t_max: 0.9 / t2,
        full: space.clone(),
        complement,
    })
}

/// Scalar curvature of a base metric given on the original complement indices.
fn base_scalar(space: &SpaceSpec, complement: &[usize], y: &[f64]) -> f64 {
    let mut linear = 0.0;
    for (n, &i) in complement.iter().enumerate() {
        linear += space.d(i) * space.killing()[i] * y[n];
    }
    let mut cubic = 0.0;
    for (a, &i) in complement.iter().enumerate() {
        for (b, &j) in complement.iter().enumerate() {
            for (c, &k) in complement.iter().enumerate() {
                cubic += space.triple(i, j, k) * y[a] * y[b] / y[c];
            }
        }
    }
    0.5 * linear - 0.25 * cubic
}

impl CanonicalVariation {
    fn check(&self, t: f64) -> Result<()> {
        let hi = 1.0 / self.t2;
        if !(t > 0.0 && t < hi) {
            return Err(Error::OutOfRange { value: t, lo: 0.0, hi });
        }
        Ok(())
    }

    pub fn s_of(&self, t: f64) -> f64 {
        (1.0 - t * self.t2) / self.t1
    }

    /// Assembled metric at parameter `t`, in the y-chart.
    pub fn point(&self, t: f64) -> Result<MetricPoint> {
        self.check(t)?;
        let s = self.s_of(t);
        let mut y = vec![0.0; self.full.r()];
        for (n, &i) in self.stratum.members.iter().enumerate() {
            y[i] = s * self.fiber[n];
        }
        for (n, &i) in self.complement.iter().enumerate() {
            y[i] = t * self.base[n];
        }
        MetricPoint::from_y(y)
    }

    /// Scalar curvature along the variation from the fiber/base decomposition.
    pub fn scal(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.s_fiber / self.t1 + self.t2 * (self.s_base / self.t2 - self.s_fiber / self.t1) * t
            - t * t * self.t1 / (1.0 - t * self.t2) * self.a_norm)
    }

    pub fn limit_at_zero(&self) -> f64 {
        self.s_fiber / self.t1
    }

    pub fn slope_at_zero(&self) -> f64 {
        self.t2 * (self.s_base / self.t2 - self.s_fiber / self.t1)
    }
}

/// Canonical variation built from the optimal witnesses of a stratum. When
/// `alpha` is only approached on a smaller subalgebra, the variation is taken
/// for that subalgebra instead. An unattained `beta` witness lives on a face
/// of the base; missing blocks are filled with a small positive value.
pub fn optimal_variation(space: &SpaceSpec, t: &Candidate, stratum: &Stratum) -> Result<CanonicalVariation> {
    let a = alpha(space, t, stratum)?;
    let target = if a.attained { stratum.clone() } else { space.stratum(&a.face)? };
    let a = if a.attained { a } else { alpha(space, t, &target)? };
    let b = beta(space, t, &target)?;
    let complement = target.complement(space.r());
    let floor = b.witness.iter().cloned().fold(f64::MAX, f64::min) * 1e-3;
    let mut base_y: Vec<f64> = complement
        .iter()
        .map(|i| b.face.iter().position(|f| f == i).map_or(floor, |p| b.witness[p]))
        .collect();
    let t2: f64 = complement.iter().zip(&base_y).map(|(&i, &y)| space.d(i) * t.t[i] * y).sum();
    for v in &mut base_y {
        *v /= t2;
    }
    canonical_variation(space, t, &target, &MetricPoint::from_y(a.witness)?, &MetricPoint::from_y(base_y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::scalar_curvature;
    use crate::space::catalog;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * (1.0 + b.abs())
    }

    #[test]
    fn wallach_levels() {
        let w = catalog("wallach_su3").unwrap();
        let t = Candidate::new(vec![0.15, 0.15, 0.7]);
        let lv = levels(&w, &t).unwrap();
        assert!(close(lv[0].alpha, 20.0 / 9.0, 1e-12));
        assert!(close(lv[2].alpha, 1.0 / 2.1, 1e-12));
        assert!(close(lv[0].beta, 1.0 / 0.85, 1e-12));
        assert!(lv[0].derivative_at_infinity < 0.0);
        assert!(lv[2].derivative_at_infinity > 0.0);
    }

    #[test]
    fn red_dot_gaps() {
        let w = catalog("wallach_su3").unwrap();
        let lv = levels(&w, &Candidate::new(vec![0.25, 0.25, 0.5])).unwrap();
        assert!(lv[0].gap().abs() < 1e-12 && lv[1].gap().abs() < 1e-12);
        assert!(close(lv[2].gap(), 2.0 - 2.0 / 3.0, 1e-12));
    }

    #[test]
    fn g2_and_f4_levels() {
        let g = catalog("g2_u2").unwrap();
        let t = Candidate::new(vec![1.6, 0.22, 1.0]);
        let lv = levels(&g, &t).unwrap();
        assert!(close(lv[0].alpha, 25.0 / 66.0, 1e-12));
        assert!(close(lv[1].alpha, 3.0 / 8.0, 1e-12));
        assert!(close(lv[0].beta, 5.0 / 13.0, 1e-12));
        assert!(close(lv[1].beta, 125.0 / 342.0, 1e-12));

        let f = catalog("f4_u3su2").unwrap();
        let t = Candidate::new(vec![2.0, 1.0, 1.0, 1.0]);
        let b4 = beta(&f, &t, &f.stratum(&[3]).unwrap()).unwrap();
        assert!(close(b4.value, 7.0 / 18.0, 1e-12));
        assert!(!b4.attained);
        let t = Candidate::new(vec![1.0; 4]);
        let b4 = beta(&f, &t, &f.stratum(&[3]).unwrap()).unwrap();
        assert!(close(b4.value, (82.0 - 2.0 * 209f64.sqrt()) / 128.0, 1e-12));
        assert!(close(f4_beta4(&t.t), b4.value, 1e-14));
        assert!(f4_collection3_lhs(&t.t) > b4.value);
    }

    #[test]
    fn alpha_is_monotone_under_inclusion() {
        let f = catalog("f4_u3su2").unwrap();
        for t in [[1.0, 1.0, 1.0, 1.0], [2.0, 2.0, 0.25, 1.0], [0.3, 3.0, 0.5, 0.2]] {
            let t = Candidate::new(t.to_vec());
            let a4 = alpha(&f, &t, &f.stratum(&[3]).unwrap()).unwrap().value;
            let a24 = alpha(&f, &t, &f.stratum(&[1, 3]).unwrap()).unwrap().value;
            assert!(a4 <= a24 + 1e-9);
        }
    }

    #[test]
    fn variation_formula_matches_direct_evaluation() {
        let w = catalog("wallach_su3").unwrap();
        let t = Candidate::new(vec![1.0, 1.0, 1.0]);
        let j = w.stratum(&[2]).unwrap();
        let cv = optimal_variation(&w, &t, &j).unwrap();
        for s in [0.01, 0.1, 0.3] {
            let direct = scalar_curvature(&w, &cv.point(s).unwrap()).unwrap();
            assert!(close(cv.scal(s).unwrap(), direct, 1e-12), "{s}");
        }
        assert!(close(cv.limit_at_zero(), 1.0 / 3.0, 1e-12));
        assert!(cv.point(1.5 / cv.t2).is_err());
        let small = cv.scal(1e-7).unwrap();
        assert!(close(small, cv.limit_at_zero(), 1e-6));
    }

    #[test]
    fn center_lies_on_wallach_variations() {
        let w = catalog("wallach_su3").unwrap();
        let t = Candidate::new(vec![0.15, 0.15, 0.7]);
        let wc = 1.0 / (2.0 * (0.15 + 0.15 + 0.7));
        for i in 0..2 {
            let cv = optimal_variation(&w, &t, &w.stratum(&[i]).unwrap()).unwrap();
            let tc = (1.0 - t.t[i]) / 1.0;
            let y = cv.point(tc).unwrap().y();
            assert!(y.iter().all(|v| (v - wc).abs() < 1e-14), "{y:?}");
            let s0 = scalar_curvature(&w, &cv.point(tc).unwrap()).unwrap();
            assert!(close(s0, (6.0 - 1.0) / 2.0 * wc, 1e-12));
        }
    }
}
