use serde::Serialize;

use crate::error::Result;
use crate::invariants::{closed_form_levels, f4_collection3_lhs, levels};
use crate::space::{Candidate, CatalogShape, SpaceSpec};

/// Which existence result applies at a candidate tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// The supremum is attained.
    GlobalMax,
    /// Three-module saddle from two strata with negative derivative.
    SaddleTwoStrata,
    /// Saddle below the lowest level at infinity.
    SaddleLowestLevel,
    MaxAndSaddle,
    NoPrediction,
}

impl RegionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionKind::GlobalMax => "global_max",
            RegionKind::SaddleTwoStrata => "saddle_two_strata",
            RegionKind::SaddleLowestLevel => "saddle_lowest_level",
            RegionKind::MaxAndSaddle => "max_and_saddle",
            RegionKind::NoPrediction => "no_prediction",
        }
    }
}

/// One evaluated inequality `lhs < rhs` (or `<=`, see `name`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Predicate {
    fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Predicate { name: name.into(), lhs, rhs, holds: lhs < rhs }
    }

    fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Predicate { name: name.into(), lhs, rhs, holds: lhs <= rhs }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionLabel {
    pub kind: RegionKind,
    pub global_max: bool,
    pub saddle: bool,
    pub predicates: Vec<Predicate>,
}

impl RegionLabel {
    fn from_flags(global_max: bool, saddle: bool, saddle_kind: RegionKind, predicates: Vec<Predicate>) -> Self {
        let kind = match (global_max, saddle) {
            (true, true) => RegionKind::MaxAndSaddle,
            (true, false) => RegionKind::GlobalMax,
            (false, true) => saddle_kind,
            (false, false) => RegionKind::NoPrediction,
        };
        RegionLabel { kind, global_max, saddle, predicates }
    }
}

/// Region label of `t`, by closed-form inequalities for the catalog spaces
/// and from numerically computed levels otherwise.
pub fn region_label(space: &SpaceSpec, t: &Candidate) -> Result<RegionLabel> {
    match CatalogShape::of(space) {
        CatalogShape::WallachSu3 => Ok(wallach(&t.t)),
        CatalogShape::G2U2 => Ok(g2(space, t)),
        CatalogShape::F4U3Su2 => Ok(f4(space, t)),
        _ => generic(space, t),
    }
}

fn wallach(t: &[f64]) -> RegionLabel {
    let ratio = |i: usize| (t[(i + 1) % 3] + t[(i + 2) % 3]) / (3.0 * t[i]);
    let mut predicates: Vec<Predicate> = (0..3).map(|i| Predicate::lt(format!("ratio_{}", i + 1), ratio(i), 1.0)).collect();
    let lowest = (0..3).min_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap()).unwrap();
    let global_max = ratio(lowest) < 1.0;
    let above = (0..3).filter(|&i| ratio(i) > 1.0).count();
    predicates.push(Predicate { name: "ratios_above_one".into(), lhs: above as f64, rhs: 2.0, holds: above >= 2 });
    RegionLabel::from_flags(global_max, above >= 2, RegionKind::SaddleTwoStrata, predicates)
}

/// Attainment test on `(members, alpha, beta)` triples: `beta - alpha > 0`
/// at a top-`alpha` stratum of lowest dimension.
fn top_level_positive(space: &SpaceSpec, lv: &[(Vec<usize>, f64, f64)], predicates: &mut Vec<Predicate>) -> bool {
    let dim = |m: &[usize]| m.iter().map(|&i| space.d(i)).sum::<f64>();
    let top = lv.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-12 * (1.0 + top.abs());
    let Some(best) = lv
        .iter()
        .filter(|l| l.1 >= top - tie)
        .min_by(|a, b| dim(&a.0).partial_cmp(&dim(&b.0)).unwrap())
    else {
        return false;
    };
    let p = Predicate::lt(format!("top_gap_{}", crate::space::fmt_set(&best.0)), 0.0, best.2 - best.1);
    let holds = p.holds;
    predicates.push(p);
    holds
}

fn g2(space: &SpaceSpec, t: &Candidate) -> RegionLabel {
    let t = t.normalized_at(2);
    let (t1, t2) = (t.t[0], t.t[1]);
    let mut predicates = vec![
        Predicate::lt("lower_branch_left", 2.0 / 9.0, t2),
        Predicate::lt("lower_branch_right", t2, (t1 + 1.0) / 12.0),
        Predicate::lt("upper_branch_left", (10.0 - 6.0 * t1) / 3.0, t2),
        Predicate::lt("upper_branch_right", t2, 2.0 / 9.0),
    ];
    let saddle = (predicates[0].holds && predicates[1].holds) || (predicates[2].holds && predicates[3].holds);
    let lv = closed_form_levels(space, &t).expect("catalog closed forms");
    let global_max = top_level_positive(space, &lv, &mut predicates);
    RegionLabel::from_flags(global_max, saddle, RegionKind::SaddleLowestLevel, predicates)
}

fn f4(space: &SpaceSpec, t: &Candidate) -> RegionLabel {
    let t = t.normalized_at(3);
    let (t1, t2, t3) = (t.t[0], t.t[1], t.t[2]);
    let u = 3.0 * t1 + t3;
    let mut predicates = vec![
        Predicate::le("c1_t3_at_least", 3.0 / 8.0, t3),
        Predicate::lt("c1_main", 30.0 * t3, 2.0 * t1 + 3.0 * t2 + 1.0),
        Predicate::le("c2_t3_at_most", t3, 3.0 / 8.0),
        Predicate::le("c2_branch", 36.0 * t2, 7.0 * u),
        Predicate::lt("c2_t2", 7.0 / 4.0, t2),
        Predicate::le("c3_t3_at_most", t3, 3.0 / 8.0),
        Predicate::lt("c3_branch", 7.0 * u, 36.0 * t2),
        Predicate::lt("c3_main", f4_collection3_lhs(&t.t), 2.0 / 9.0),
    ];
    let all = |r: std::ops::Range<usize>| predicates[r].iter().all(|p| p.holds);
    let saddle = all(0..2) || all(2..5) || all(5..8);
    let lv = closed_form_levels(space, &t).expect("catalog closed forms");
    let global_max = top_level_positive(space, &lv, &mut predicates);
    RegionLabel::from_flags(global_max, saddle, RegionKind::SaddleLowestLevel, predicates)
}

fn generic(space: &SpaceSpec, t: &Candidate) -> Result<RegionLabel> {
    let reports = levels(space, t)?;
    let lv: Vec<(Vec<usize>, f64, f64)> = reports.iter().map(|l| (l.stratum.members.clone(), l.alpha, l.beta)).collect();
    let mut predicates = Vec::new();
    let global_max = !lv.is_empty() && top_level_positive(space, &lv, &mut predicates);
    let dim = |m: &[usize]| m.iter().map(|&i| space.d(i)).sum::<f64>();
    if space.is_generalized_wallach() {
        let negative = reports.iter().filter(|l| l.derivative_at_infinity < 0.0).count();
        let p = Predicate { name: "negative_derivatives".into(), lhs: negative as f64, rhs: 2.0, holds: negative >= 2 };
        let saddle = p.holds;
        predicates.push(p);
        return Ok(RegionLabel::from_flags(global_max, saddle, RegionKind::SaddleTwoStrata, predicates));
    }
    let mut saddle = false;
    if reports.len() >= 2 {
        let low = reports.iter().map(|l| l.alpha).fold(f64::INFINITY, f64::min);
        let tie = 1e-9 * (1.0 + low.abs());
        let k = reports
            .iter()
            .filter(|l| l.alpha <= low + tie)
            .min_by(|a, b| dim(&a.stratum.members).partial_cmp(&dim(&b.stratum.members)).unwrap())
            .unwrap();
        let unique_dim = reports
            .iter()
            .filter(|l| l.alpha <= low + tie)
            .all(|l| l.stratum == k.stratum || dim(&l.stratum.members) > dim(&k.stratum.members));
        let small_fibers = reports.iter().all(|l| l.stratum == k.stratum || l.stratum.members.len() <= 2);
        let p = Predicate::lt(format!("lowest_gap_{}", k.stratum.label()), k.derivative_at_infinity, 0.0);
        saddle = p.holds && unique_dim && small_fibers;
        predicates.push(p);
        predicates.push(Predicate {
            name: "other_fibers_at_most_two_modules".into(),
            lhs: reports.iter().filter(|l| l.stratum != k.stratum).map(|l| l.stratum.members.len()).max().unwrap_or(0) as f64,
            rhs: 2.0,
            holds: small_fibers,
        });
    }
    Ok(RegionLabel::from_flags(global_max, saddle, RegionKind::SaddleLowestLevel, predicates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::catalog;

    fn label(name: &str, t: &[f64]) -> RegionLabel {
        region_label(&catalog(name).unwrap(), &Candidate::new(t.to_vec())).unwrap()
    }

    #[test]
    fn catalog_examples() {
        assert_eq!(label("wallach_su3", &[1.0 / 3.0; 3]).kind, RegionKind::GlobalMax);
        assert_eq!(label("wallach_su3", &[0.15, 0.15, 0.7]).kind, RegionKind::SaddleTwoStrata);
        assert_eq!(label("wallach_su3", &[0.49, 0.49, 0.02]).kind, RegionKind::NoPrediction);
        assert_eq!(label("g2_u2", &[1.6, 0.22, 1.0]).kind, RegionKind::MaxAndSaddle);
        let f = label("f4_u3su2", &[2.0, 2.0, 0.25, 1.0]);
        assert!(!f.predicates.iter().find(|p| p.name == "c2_branch").unwrap().holds);
        assert!(f.predicates.iter().find(|p| p.name == "c2_t2").unwrap().holds);
        assert!(!f.saddle);
    }

    #[test]
    fn red_dots_sit_on_equality() {
        for perm in [[0.25, 0.25, 0.5], [0.25, 0.5, 0.25], [0.5, 0.25, 0.25]] {
            let l = label("wallach_su3", &perm);
            let lowest = (0..3).filter(|&i| perm[i] == 0.25).collect::<Vec<_>>();
            for i in lowest {
                assert!((l.predicates[i].lhs - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn generic_rules_agree_with_closed_forms() {
        let w = catalog("generalized_wallach(2,2,2,1/3)").unwrap();
        for t in [[1.0 / 3.0; 3], [0.15, 0.15, 0.7], [0.49, 0.49, 0.02]] {
            let g = region_label(&w, &Candidate::new(t.to_vec())).unwrap();
            assert_eq!(g.kind, label("wallach_su3", &t).kind, "{t:?}");
        }
    }

    #[test]
    fn pink_triangle_vertices_on_boundaries() {
        let g = catalog("g2_u2").unwrap();
        for (t1, t2) in [(39.0 / 25.0, 16.0 / 75.0), (5.0 / 3.0, 2.0 / 9.0), (14.0 / 9.0, 2.0 / 9.0)] {
            let l = region_label(&g, &Candidate::new(vec![t1, t2, 1.0])).unwrap();
            let tight = l.predicates.iter().filter(|p| (p.lhs - p.rhs).abs() < 1e-12).count();
            assert!(tight >= 1, "({t1}, {t2}): {:?}", l.predicates);
        }
    }
}
