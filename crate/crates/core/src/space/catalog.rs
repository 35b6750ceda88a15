use std::collections::BTreeMap;

use super::{load_space, SpaceSpec};
use crate::error::{Error, Result};

const WALLACH_SU3: &str = include_str!("../../catalog/wallach_su3.json");
const G2_U2: &str = include_str!("../../catalog/g2_u2.json");
const F4_U3SU2: &str = include_str!("../../catalog/f4_u3su2.json");

/// Which closed-form family a space belongs to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogShape {
    WallachSu3,
    G2U2,
    F4U3Su2,
    GeneralizedWallach,
    Other,
}

impl CatalogShape {
    pub fn of(space: &SpaceSpec) -> Self {
        match space.name() {
            "wallach_su3" => CatalogShape::WallachSu3,
            "g2_u2" => CatalogShape::G2U2,
            "f4_u3su2" => CatalogShape::F4U3Su2,
            _ if space.is_generalized_wallach() => CatalogShape::GeneralizedWallach,
            _ => CatalogShape::Other,
        }
    }
}

pub fn catalog_names() -> &'static [&'static str] {
    &["wallach_su3", "g2_u2", "f4_u3su2", "generalized_wallach(d1,d2,d3,c)"]
}

/// Bundled example spaces, plus `generalized_wallach(d1,d2,d3,c)` for the
/// three-module family whose only structure constant is `[123] = c`.
pub fn catalog(name: &str) -> Result<SpaceSpec> {
    let name = name.trim();
    match name {
        "wallach_su3" => load_space(WALLACH_SU3),
        "g2_u2" => load_space(G2_U2),
        "f4_u3su2" => load_space(F4_U3SU2),
        _ => match name.strip_prefix("generalized_wallach(").and_then(|s| s.strip_suffix(')')) {
            Some(args) => generalized_wallach(name, args),
            None => Err(Error::UnknownSpace(name.to_string())),
        },
    }
}

fn generalized_wallach(name: &str, args: &str) -> Result<SpaceSpec> {
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let bad = || Error::UnknownSpace(format!("{name}: expected generalized_wallach(d1,d2,d3,c)"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let mut dims = Vec::with_capacity(3);
    for p in &parts[..3] {
        dims.push(p.parse::<u32>().map_err(|_| bad())?);
    }
    let c = super::document::Number::Exact(parts[3].to_string()).value().map_err(|_| bad())?;
    SpaceSpec::new(
        name.replace(' ', ""),
        dims,
        vec![1.0; 3],
        &[(0, 1, 2, c)],
        BTreeMap::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_constants() {
        let g = catalog("g2_u2").unwrap();
        assert_eq!(g.dims(), &[4, 2, 4]);
        assert_eq!(g.triple(0, 0, 1), 2.0 / 3.0);
        assert_eq!(g.triple(2, 1, 0), 0.5);
        assert_eq!(g.killing(), &[1.0; 3]);

        let f = catalog("f4_u3su2").unwrap();
        assert_eq!(f.dims(), &[12, 18, 4, 6]);
        let mut t = f.triples();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            t,
            vec![(0, 0, 1, 2.0), (0, 1, 2, 1.0), (0, 2, 3, 2.0 / 3.0), (1, 1, 3, 2.0)]
        );
        assert_eq!(f.base_partitions()[&vec![3]], vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn generalized_wallach_family() {
        let s = catalog("generalized_wallach(1, 2, 3, 1/4)").unwrap();
        assert_eq!(s.dims(), &[1, 2, 3]);
        assert_eq!(s.triple(0, 1, 2), 0.25);
        assert!(s.is_generalized_wallach());
        assert_eq!(CatalogShape::of(&s), CatalogShape::GeneralizedWallach);
        assert!(matches!(catalog("generalized_wallach(1,2)"), Err(Error::UnknownSpace(_))));
        assert!(matches!(catalog("so5"), Err(Error::UnknownSpace(_))));
    }
}
