//! Maximization of scalar curvature over the trace simplex of a space:
//! low-discrepancy multistart ascent, Lagrange-Newton polishing, and
//! recursion over closed faces for suprema approached at the boundary.

use nalgebra::{DMatrix, DVector};

use crate::curvature::{inner_y, jacobian_x, ricci_y, scalar_y, trace_y};
use crate::space::SpaceSpec;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in base `base`.
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    out
}

/// First `count` points of the Halton sequence in `[0,1)^dim`, skipping the origin.
pub(crate) fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton dimension {dim} unsupported");
    (1..=count as u64)
        .map(|n| (0..dim).map(|k| radical_inverse(n, PRIMES[k])).collect())
        .collect()
}

/// Start points log-uniform per coordinate over `[lo, hi]` in the x-chart,
/// returned in the y-chart and scaled onto `tr = 1`.
pub(crate) fn log_uniform_starts(space: &SpaceSpec, t: &[f64], count: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let (a, b) = (lo.ln(), hi.ln());
    halton(count, space.r())
        .into_iter()
        .map(|u| {
            let y: Vec<f64> = u.iter().map(|v| 1.0 / (a + (b - a) * v).exp()).collect();
            normalize(space, t, y)
        })
        .collect()
}

pub(crate) fn normalize(space: &SpaceSpec, t: &[f64], mut y: Vec<f64>) -> Vec<f64> {
    let tr = trace_y(space, t, &y);
    for v in &mut y {
        *v /= tr;
    }
    y
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub max_halvings: usize,
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 200, max_halvings: 40, tol: 1e-12 }
    }
}

fn lagrange_residual(space: &SpaceSpec, t: &[f64], y: &[f64], mu: f64) -> Vec<f64> {
    let ric = ricci_y(space, y);
    let mut f: Vec<f64> = ric.iter().zip(t).map(|(r, t)| r - mu * t).collect();
    f.push(trace_y(space, t, y) - 1.0);
    f
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// Damped Newton on `{Ric(y) = mu T, tr_y T = 1}` in the unknowns `(y, mu)`.
/// Steps come from an SVD least-squares solve so that rank-deficient
/// Jacobians at degenerate roots do not abort the iteration.
pub(crate) fn lagrange_newton(space: &SpaceSpec, t: &[f64], y0: &[f64], opts: NewtonOptions) -> Option<(Vec<f64>, f64)> {
    let r = space.r();
    let mut y = normalize(space, t, y0.to_vec());
    let ric = ricci_y(space, &y);
    let mut mu = inner_y(space, &ric, t, &y) / inner_y(space, t, t, &y);
    let scale = 1.0 + max_abs(t);
    let mut f = lagrange_residual(space, t, &y, mu);
    let mut fnorm = max_abs(&f);
    for _ in 0..opts.max_iter {
        if fnorm <= opts.tol * (1.0 + mu.abs()) * scale {
            return Some((y, mu));
        }
        let x: Vec<f64> = y.iter().map(|v| 1.0 / v).collect();
        let jx = jacobian_x(space, &x);
        let mut jac = DMatrix::zeros(r + 1, r + 1);
        for m in 0..r {
            for n in 0..r {
                jac[(m, n)] = -jx[(m, n)] * x[n] * x[n];
            }
            jac[(m, r)] = -t[m];
            jac[(r, m)] = space.d(m) * t[m];
        }
        let rhs = DVector::from_iterator(r + 1, f.iter().map(|v| -v));
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd.solve(&rhs, smax * 1e-13).ok()?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = (0..r).map(|i| y[i] + lambda * step[i]).collect();
            if cand.iter().all(|&v| v > 0.0 && v.is_finite()) {
                let cmu = mu + lambda * step[r];
                let cf = lagrange_residual(space, t, &cand, cmu);
                let cnorm = max_abs(&cf);
                if cnorm < fnorm {
                    y = cand;
                    mu = cmu;
                    f = cf;
                    fnorm = cnorm;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Stuck at the floating-point floor of a (possibly degenerate) root.
            let loose = 1e-9 * (1.0 + mu.abs()) * scale;
            return (fnorm <= loose).then_some((y, mu));
        }
    }
    (fnorm <= 1e-9 * (1.0 + mu.abs()) * scale).then_some((y, mu))
}

/// Gradient ascent of `S/tr` in logarithmic coordinates. Returns the final
/// point on `tr = 1`, or `None` when the iterate runs off toward a face.
fn log_ascent(space: &SpaceSpec, t: &[f64], y0: &[f64], iters: usize) -> Option<Vec<f64>> {
    let r = space.r();
    let ratio = |y: &[f64]| scalar_y(space, y) / trace_y(space, t, y);
    let mut y = normalize(space, t, y0.to_vec());
    let mut value = ratio(&y);
    let mut step = 0.1;
    for _ in 0..iters {
        let s = scalar_y(space, &y);
        let ric = ricci_y(space, &y);
        let grad: Vec<f64> = (0..r).map(|m| y[m] * (space.d(m) * ric[m] - s * space.d(m) * t[m])).collect();
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-9 * (1.0 + s.abs()) {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = (0..r).map(|m| y[m] * (step * grad[m] / gnorm).exp()).collect();
            let cv = ratio(&cand);
            if cv > value + 1e-4 * step * gnorm {
                y = normalize(space, t, cand);
                value = cv;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        let (lo, hi) = y.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo / hi < 1e-10 {
            return None;
        }
    }
    Some(y)
}

pub(crate) fn same_point(a: &[f64], b: &[f64], rel: f64) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(p, q)| (p - q).abs() <= rel * scale)
}

/// Interior critical points of `S` on `tr = 1`, deduplicated, as `(S, y)`.
pub(crate) fn interior_critical_points(space: &SpaceSpec, t: &[f64], starts: usize) -> Vec<(f64, Vec<f64>)> {
    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    for y0 in log_uniform_starts(space, t, starts, 1e-2, 1e2) {
        let Some(y1) = log_ascent(space, t, &y0, 200) else { continue };
        let Some((y, mu)) = lagrange_newton(space, t, &y1, NewtonOptions::default()) else { continue };
        if found.iter().any(|(_, z)| same_point(z, &y, 1e-6)) {
            continue;
        }
        found.push((mu, y));
    }
    found.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    found
}

/// Supremum of `S/tr_T` over all metrics of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Supremum {
    pub value: f64,
    /// True when an interior critical point realizes the value.
    pub attained: bool,
    /// Indices (of the searched space) spanning the face holding the witness;
    /// all indices when attained.
    pub face: Vec<usize>,
    /// Unit-trace witness on `face`.
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SupOptions {
    pub starts: usize,
}

impl Default for SupOptions {
    fn default() -> Self {
        Self { starts: 64 }
    }
}

const ATTAIN_TOL: f64 = 1e-7;

pub(crate) fn supremum(space: &SpaceSpec, t: &[f64], opts: SupOptions) -> Supremum {
    let r = space.r();
    if r == 1 {
        let y = vec![1.0 / (space.d(0) * t[0])];
        return Supremum { value: scalar_y(space, &y), attained: true, face: vec![0], witness: y };
    }
    let mut best_face: Option<Supremum> = None;
    for stratum in space.subalgebra_strata() {
        let Ok(fiber) = space.restrict_to_fiber(&stratum) else { continue };
        let sub_t: Vec<f64> = stratum.members.iter().map(|&i| t[i]).collect();
        let sub = supremum(&fiber, &sub_t, opts);
        if best_face.as_ref().is_none_or(|b| sub.value > b.value) {
            let face: Vec<usize> = sub.face.iter().map(|&i| stratum.members[i]).collect();
            best_face = Some(Supremum { value: sub.value, attained: false, face, witness: sub.witness });
        }
    }
    let interior = interior_critical_points(space, t, opts.starts);
    match (interior.first(), best_face) {
        (Some((v, y)), face) => {
            let face_value = face.as_ref().map_or(f64::NEG_INFINITY, |f| f.value);
            if *v >= face_value - ATTAIN_TOL * (1.0 + face_value.abs()) {
                Supremum { value: v.max(face_value), attained: true, face: (0..r).collect(), witness: y.clone() }
            } else {
                face.unwrap()
            }
        }
        (None, Some(face)) => face,
        (None, None) => Supremum { value: f64::NEG_INFINITY, attained: false, face: Vec::new(), witness: Vec::new() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{catalog, Candidate};

    #[test]
    fn halton_first_points() {
        let h = halton(3, 2);
        assert_eq!(h[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(h[1], vec![0.25, 2.0 / 3.0]);
        assert_eq!(h[2], vec![0.75, 1.0 / 9.0]);
    }

    #[test]
    fn newton_finds_wallach_einstein_point() {
        let w = catalog("wallach_su3").unwrap();
        let t = [1.0; 3];
        let (y, mu) = lagrange_newton(&w, &t, &[0.1, 0.2, 0.15], NewtonOptions::default()).unwrap();
        assert!(same_point(&y, &[1.0 / 6.0; 3], 1e-12), "{y:?}");
        assert!((mu - scalar_y(&w, &y)).abs() < 1e-13);
    }

    #[test]
    fn wallach_supremum_is_attained_at_einstein_point() {
        let w = catalog("wallach_su3").unwrap();
        let sup = supremum(&w, &[1.0; 3], SupOptions::default());
        assert!(sup.attained);
        assert!((sup.value - 5.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn f4_base_supremum_is_a_face_limit_in_one_branch() {
        // Base of the stratum {4}: blocks {1,3} and {2}.
        let f = catalog("f4_u3su2").unwrap();
        let j = f.stratum(&[3]).unwrap();
        let base = f.restrict_to_base(&j).unwrap();
        let t = base.candidate(&f, &Candidate::new(vec![2.0, 1.0, 1.0, 1.0]));
        let sup = supremum(&base.space, &t.t, SupOptions::default());
        assert!(!sup.attained);
        assert!((sup.value - 7.0 / 18.0).abs() < 1e-12);
        let t = base.candidate(&f, &Candidate::new(vec![1.0; 4]));
        let sup = supremum(&base.space, &t.t, SupOptions::default());
        assert!(sup.attained);
        // maximum of -1/(256 y) - (209/64) y + 41/64
        let want = (82.0 - 2.0 * 209f64.sqrt()) / 128.0;
        assert!((sup.value - want).abs() < 1e-12 * want);
    }
}
