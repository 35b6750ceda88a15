//! Scalar and Ricci curvature of diagonal metrics, the constrained gradient
//! and Hessian of scalar curvature on `tr_g T = 1`, and rank tests for the
//! differential of the Ricci map.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{check_len, Candidate, MetricPoint, SpaceSpec};

/// Coefficients of a diagonal invariant tensor `A = sum a_i Q|m_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagTensor {
    pub a: Vec<f64>,
}

impl DiagTensor {
    pub fn new(a: Vec<f64>) -> Self {
        Self { a }
    }
}

/// Eigenvalues of the constrained Hessian at a critical point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub co_index: usize,
    pub degenerate: bool,
    /// Largest asymmetry of the assembled tangent matrix before symmetrizing.
    pub asymmetry: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct HessianOptions {
    /// Criticality required before the Hessian formula is applied, relative
    /// to `1 + |S|`.
    pub critical_tol: f64,
    /// Eigenvalues below `degeneracy_rel * (spectral radius + 1)` count as zero.
    pub degeneracy_rel: f64,
}

impl Default for HessianOptions {
    fn default() -> Self {
        Self { critical_tol: 1e-6, degeneracy_rel: 1e-7 }
    }
}

/// Singular values of `dRic` on the complement of the radial direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `sigma_min / sigma_max`.
    pub ratio: f64,
    pub deficient: bool,
}

pub const RANK_THRESHOLD: f64 = 1e-8;

// Slice kernels in the y-chart. Every public entry point funnels into these.

pub(crate) fn scalar_y(space: &SpaceSpec, y: &[f64]) -> f64 {
    let r = space.r();
    let mut linear = 0.0;
    for i in 0..r {
        linear += space.d(i) * space.killing()[i] * y[i];
    }
    let mut cubic = 0.0;
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let c = space.triple(i, j, k);
                if c != 0.0 {
                    cubic += c * y[i] * y[j] / y[k];
                }
            }
        }
    }
    0.5 * linear - 0.25 * cubic
}

pub(crate) fn ricci_y(space: &SpaceSpec, y: &[f64]) -> Vec<f64> {
    let r = space.r();
    (0..r)
        .map(|i| {
            let mut mixed = 0.0;
            let mut own = 0.0;
            for j in 0..r {
                for k in 0..r {
                    let c = space.triple(i, j, k);
                    if c != 0.0 {
                        mixed += c * y[j] / y[k];
                        own += c * y[j] * y[k];
                    }
                }
            }
            let d = space.d(i);
            0.5 * space.killing()[i] - mixed / (2.0 * d) + own / (4.0 * d * y[i] * y[i])
        })
        .collect()
}

/// `tr_g T = sum d_i T_i y_i`.
pub(crate) fn trace_y(space: &SpaceSpec, t: &[f64], y: &[f64]) -> f64 {
    (0..space.r()).map(|i| space.d(i) * t[i] * y[i]).sum()
}

/// `<A, B>_g = sum d_i a_i b_i y_i^2`.
pub(crate) fn inner_y(space: &SpaceSpec, a: &[f64], b: &[f64], y: &[f64]) -> f64 {
    (0..space.r()).map(|i| space.d(i) * a[i] * b[i] * y[i] * y[i]).sum()
}

/// Projection of `-Ric` onto the tangent space of `tr_g T = const`.
pub(crate) fn gradient_y(space: &SpaceSpec, t: &[f64], y: &[f64]) -> Vec<f64> {
    let ric = ricci_y(space, y);
    let c = inner_y(space, &ric, t, y) / inner_y(space, t, t, y);
    ric.iter().zip(t).map(|(r, t)| -r + c * t).collect()
}

pub(crate) fn gradient_norm_y(space: &SpaceSpec, t: &[f64], y: &[f64]) -> f64 {
    let g = gradient_y(space, t, y);
    inner_y(space, &g, &g, y).sqrt()
}

/// `dR_i / dx_n` at the point with x-coordinates `x`.
pub(crate) fn jacobian_x(space: &SpaceSpec, x: &[f64]) -> DMatrix<f64> {
    let r = space.r();
    DMatrix::from_fn(r, r, |i, n| {
        let d = space.d(i);
        let mut first = 0.0;
        for j in 0..r {
            first += space.triple(i, j, n) / x[j];
        }
        let mut back = 0.0;
        let mut own = 0.0;
        for k in 0..r {
            let c = space.triple(i, n, k);
            back += c * x[k];
            own += c / x[k];
        }
        first -= back / (x[n] * x[n]);
        let mut second = -2.0 * x[i] * x[i] * own / (x[n] * x[n]);
        if i == n {
            let mut diag = 0.0;
            for j in 0..r {
                for k in 0..r {
                    diag += space.triple(i, j, k) / (x[j] * x[k]);
                }
            }
            second += 2.0 * x[i] * diag;
        }
        -first / (2.0 * d) + second / (4.0 * d)
    })
}

/// Hessian of `S` in the y-chart: `d(d_m R_m)/dy_n = -d_m J_mn x_n^2`.
#[cfg(test)]
fn hessian_y(space: &SpaceSpec, y: &[f64]) -> DMatrix<f64> {
    let x: Vec<f64> = y.iter().map(|v| 1.0 / v).collect();
    let j = jacobian_x(space, &x);
    DMatrix::from_fn(space.r(), space.r(), |m, n| -space.d(m) * j[(m, n)] * x[n] * x[n])
}

/// Orthonormal basis (as columns) of the complement of `v`, via a Householder
/// reflection sending `v` to a multiple of the first unit vector.
pub(crate) fn orthonormal_complement(v: &[f64]) -> DMatrix<f64> {
    let r = v.len();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut u = DVector::from_column_slice(v) / norm;
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += sign;
    let uu = u.dot(&u);
    let h = DMatrix::identity(r, r) - (&u * u.transpose()) * (2.0 / uu);
    h.columns(1, r - 1).into_owned()
}

fn spectrum_from_matrix(m: DMatrix<f64>, degeneracy_rel: f64) -> Spectrum {
    let asymmetry = (&m - m.transpose()).amax();
    let sym = (&m + m.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = if sym.nrows() == 0 {
        Vec::new()
    } else {
        SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
    };
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let radius = eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = degeneracy_rel * (radius + 1.0);
    let co_index = eigenvalues.iter().filter(|&&v| v > tol).count();
    let degenerate = eigenvalues.iter().any(|v| v.abs() <= tol);
    Spectrum { eigenvalues, co_index, degenerate, asymmetry }
}

/// Spectrum of `-<dRic(X), Y>_g` on `{X : <X, T>_g = 0}` without checking
/// criticality.
pub(crate) fn tangent_spectrum(space: &SpaceSpec, t: &[f64], y: &[f64], degeneracy_rel: f64) -> Spectrum {
    let r = space.r();
    let x: Vec<f64> = y.iter().map(|v| 1.0 / v).collect();
    let j = jacobian_x(space, &x);
    // A = -D^{1/2} J D^{-1/2} with D = diag(d_i / x_i^2)
    let sqrt_d: Vec<f64> = (0..r).map(|i| space.d(i).sqrt() / x[i]).collect();
    let a = DMatrix::from_fn(r, r, |i, n| -sqrt_d[i] * j[(i, n)] / sqrt_d[n]);
    let normal: Vec<f64> = (0..r).map(|i| sqrt_d[i] * t[i]).collect();
    let e = orthonormal_complement(&normal);
    let h = e.transpose() * a * &e;
    spectrum_from_matrix(h, degeneracy_rel)
}

pub(crate) fn rank_report_x(space: &SpaceSpec, x: &[f64]) -> RankReport {
    let j = jacobian_x(space, x);
    let e = orthonormal_complement(x);
    let je = j * e;
    let mut singular_values: Vec<f64> = je.singular_values().iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max = singular_values.first().copied().unwrap_or(0.0);
    let min = singular_values.last().copied().unwrap_or(0.0);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    RankReport { singular_values, ratio, deficient: ratio <= RANK_THRESHOLD }
}

// Public API over MetricPoint.

pub fn scalar_curvature(space: &SpaceSpec, p: &MetricPoint) -> Result<f64> {
    check_len(space.r(), p.len())?;
    Ok(scalar_y(space, &p.y()))
}

pub fn ricci_coefficients(space: &SpaceSpec, p: &MetricPoint) -> Result<DiagTensor> {
    check_len(space.r(), p.len())?;
    Ok(DiagTensor::new(ricci_y(space, &p.y())))
}

/// `tr_g T = sum d_i T_i / x_i`.
pub fn trace_t(space: &SpaceSpec, p: &MetricPoint, t: &Candidate) -> Result<f64> {
    check_len(space.r(), p.len())?;
    check_len(space.r(), t.len())?;
    Ok(trace_y(space, &t.t, &p.y()))
}

/// `<A, B>_g = sum d_i a_i b_i / x_i^2`.
pub fn inner_g(space: &SpaceSpec, a: &DiagTensor, b: &DiagTensor, p: &MetricPoint) -> Result<f64> {
    check_len(space.r(), p.len())?;
    check_len(space.r(), a.a.len())?;
    check_len(space.r(), b.a.len())?;
    Ok(inner_y(space, &a.a, &b.a, &p.y()))
}

/// Gradient of `S` restricted to `tr_g T = 1`, with respect to `g`.
pub fn grad_constrained(space: &SpaceSpec, p: &MetricPoint, t: &Candidate) -> Result<DiagTensor> {
    let tr = trace_t(space, p, t)?;
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::ConstraintViolated(tr));
    }
    Ok(DiagTensor::new(gradient_y(space, &t.t, &p.y())))
}

/// `|grad S|_{M_T}|_g` at a feasible point.
pub fn grad_norm(space: &SpaceSpec, p: &MetricPoint, t: &Candidate) -> Result<f64> {
    let g = grad_constrained(space, p, t)?;
    Ok(inner_y(space, &g.a, &g.a, &p.y()).sqrt())
}

/// Analytic `dR_i/dx_j`.
pub fn jacobian_dric(space: &SpaceSpec, p: &MetricPoint) -> Result<DMatrix<f64>> {
    check_len(space.r(), p.len())?;
    Ok(jacobian_x(space, &p.x()))
}

/// Central-difference `dR_i/dx_j` with step `1e-5 * max(1, |x_j|)`.
pub fn jacobian_dric_fd(space: &SpaceSpec, p: &MetricPoint) -> Result<DMatrix<f64>> {
    check_len(space.r(), p.len())?;
    let r = space.r();
    let x = p.x();
    let mut out = DMatrix::zeros(r, r);
    for n in 0..r {
        let h = 1e-5 * x[n].abs().max(1.0);
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[n] += h;
        minus[n] -= h;
        let yp: Vec<f64> = plus.iter().map(|v| 1.0 / v).collect();
        let ym: Vec<f64> = minus.iter().map(|v| 1.0 / v).collect();
        let (rp, rm) = (ricci_y(space, &yp), ricci_y(space, &ym));
        for i in 0..r {
            out[(i, n)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Spectrum of the Hessian of `S|M_T` at a critical point.
pub fn hessian_constrained(
    space: &SpaceSpec,
    p: &MetricPoint,
    t: &Candidate,
    opts: HessianOptions,
) -> Result<Spectrum> {
    let norm = grad_norm(space, p, t)?;
    let s = scalar_y(space, &p.y());
    if norm > opts.critical_tol * (1.0 + s.abs()) {
        return Err(Error::NotCritical(norm));
    }
    Ok(tangent_spectrum(space, &t.t, &p.y(), opts.degeneracy_rel))
}

/// Rank of `dRic` modulo the radial direction.
pub fn rank_test(space: &SpaceSpec, p: &MetricPoint) -> Result<RankReport> {
    check_len(space.r(), p.len())?;
    Ok(rank_report_x(space, &p.x()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::catalog;

    fn px(x: &[f64]) -> MetricPoint {
        MetricPoint::from_x(x.to_vec()).unwrap()
    }

    // Hand-expanded formulas for the two smallest catalog spaces.
    fn wallach_scalar(x: &[f64]) -> f64 {
        1.0 / x[0] + 1.0 / x[1] + 1.0 / x[2]
            - (x[0] / (x[1] * x[2]) + x[1] / (x[0] * x[2]) + x[2] / (x[0] * x[1])) / 6.0
    }

    fn wallach_ric_doubled(x: &[f64], i: usize) -> f64 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        1.0 + (x[i] * x[i] / (x[j] * x[k]) - x[j] / x[k] - x[k] / x[j]) / 6.0
    }

    fn g2_scalar(x: &[f64]) -> f64 {
        2.0 / x[0] + 1.0 / x[1] + 2.0 / x[2]
            - 0.25
                * (4.0 / (3.0 * x[1])
                    + 2.0 / 3.0 * x[1] / (x[0] * x[0])
                    + x[0] / (x[1] * x[2])
                    + x[1] / (x[0] * x[2])
                    + x[2] / (x[0] * x[1]))
    }

    fn g2_ric(x: &[f64]) -> [f64; 3] {
        [
            0.5 - x[1] / (12.0 * x[0]) + x[0] * x[0] / (16.0 * x[1] * x[2]) - x[1] / (16.0 * x[2])
                - x[2] / (16.0 * x[1]),
            1.0 / 3.0 + x[1] * x[1] / (12.0 * x[0] * x[0]) - x[0] / (8.0 * x[2])
                + x[1] * x[1] / (8.0 * x[0] * x[2])
                - x[2] / (8.0 * x[0]),
            0.5 - x[0] / (16.0 * x[1]) - x[1] / (16.0 * x[0]) + x[2] * x[2] / (16.0 * x[0] * x[1]),
        ]
    }

    #[test]
    fn scalar_curvature_values() {
        let w = catalog("wallach_su3").unwrap();
        let g = catalog("g2_u2").unwrap();
        assert!((scalar_curvature(&w, &px(&[1.0; 3])).unwrap() - 2.5).abs() < 1e-15);
        assert!((scalar_curvature(&g, &px(&[1.0; 3])).unwrap() - 3.75).abs() < 1e-14);
        assert!((scalar_curvature(&w, &px(&[6.0; 3])).unwrap() - 5.0 / 12.0).abs() < 1e-15);
        for x in [[0.3, 1.7, 2.2], [5.0, 0.1, 1.0], [1.0, 2.0, 3.0]] {
            let sw = scalar_curvature(&w, &px(&x)).unwrap();
            assert!((sw - wallach_scalar(&x)).abs() < 1e-12 * (1.0 + sw.abs()));
            let sg = scalar_curvature(&g, &px(&x)).unwrap();
            assert!((sg - g2_scalar(&x)).abs() < 1e-12 * (1.0 + sg.abs()));
            let yp = MetricPoint::from_y(x.iter().map(|v| 1.0 / v).collect()).unwrap();
            assert!((scalar_curvature(&g, &yp).unwrap() - sg).abs() < 1e-13 * (1.0 + sg.abs()));
        }
    }

    #[test]
    fn ricci_values() {
        let w = catalog("wallach_su3").unwrap();
        let r = ricci_coefficients(&w, &px(&[1.0, 1.0, 2.0])).unwrap();
        for (got, want) in r.a.iter().zip([1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        let g = catalog("g2_u2").unwrap();
        let r = ricci_coefficients(&g, &px(&[1.0; 3])).unwrap();
        for (got, want) in r.a.iter().zip([17.0 / 48.0, 7.0 / 24.0, 7.0 / 16.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        for x in [[0.3, 1.7, 2.2], [5.0, 0.1, 1.0]] {
            let rg = ricci_coefficients(&g, &px(&x)).unwrap();
            let want = g2_ric(&x);
            let rw = ricci_coefficients(&w, &px(&x)).unwrap();
            for i in 0..3 {
                assert!((rg.a[i] - want[i]).abs() < 1e-12 * (1.0 + want[i].abs()));
                // the expanded Wallach display carries a factor of two
                assert!((2.0 * rw.a[i] - wallach_ric_doubled(&x, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_and_inner_product() {
        let w = catalog("wallach_su3").unwrap();
        let one = Candidate::new(vec![1.0; 3]);
        assert!((trace_t(&w, &px(&[6.0; 3]), &one).unwrap() - 1.0).abs() < 1e-15);
        assert!((trace_t(&w, &px(&[2.0; 3]), &one).unwrap() - 3.0).abs() < 1e-15);
        let f = catalog("f4_u3su2").unwrap();
        let t = Candidate::new(vec![0.5, 2.0, 3.0, 0.25]);
        let y = [0.1, 0.2, 0.3, 0.4];
        let p = MetricPoint::from_y(y.to_vec()).unwrap();
        let want = 12.0 * 0.5 * 0.1 + 18.0 * 2.0 * 0.2 + 4.0 * 3.0 * 0.3 + 6.0 * 0.25 * 0.4;
        assert!((trace_t(&f, &p, &t).unwrap() - want).abs() < 1e-14);
        let p = px(&[0.7, 1.3, 2.9]);
        let g = DiagTensor::new(p.x());
        let ric = ricci_coefficients(&w, &p).unwrap();
        let s = scalar_curvature(&w, &p).unwrap();
        assert!((inner_g(&w, &g, &ric, &p).unwrap() - s).abs() < 1e-14);
    }

    #[test]
    fn einstein_and_kahler_gradients_vanish() {
        let w = catalog("wallach_su3").unwrap();
        let one = Candidate::new(vec![1.0; 3]);
        assert!(grad_norm(&w, &px(&[6.0; 3]), &one).unwrap() < 1e-12);
        // x = (4, 4, 8) has tr = 1 against T = (1, 1, 2)/4 * 2
        let t = Candidate::new(vec![1.0, 1.0, 2.0]);
        let scale = trace_t(&w, &px(&[4.0, 4.0, 8.0]), &t).unwrap();
        let p = px(&[4.0 * scale, 4.0 * scale, 8.0 * scale]);
        assert!(grad_norm(&w, &p, &t).unwrap() < 1e-10);
        let err = grad_constrained(&w, &px(&[1.0; 3]), &one).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolated(_)));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for name in ["wallach_su3", "g2_u2", "f4_u3su2"] {
            let s = catalog(name).unwrap();
            let x: Vec<f64> = (0..s.r()).map(|i| 0.5 + 0.7 * i as f64).collect();
            let p = px(&x);
            let a = jacobian_dric(&s, &p).unwrap();
            let f = jacobian_dric_fd(&s, &p).unwrap();
            assert!((&a - &f).amax() <= 1e-6 * a.amax());
            let null = &a * DVector::from_vec(x.clone());
            assert!(null.amax() < 1e-13);
        }
    }

    #[test]
    fn wallach_hessians() {
        let w = catalog("wallach_su3").unwrap();
        let one = Candidate::new(vec![1.0; 3]);
        let spec = hessian_constrained(&w, &px(&[6.0; 3]), &one, HessianOptions::default()).unwrap();
        assert_eq!(spec.co_index, 0);
        assert!(spec.eigenvalues.iter().all(|&v| v < 0.0));
        assert!(!spec.degenerate);

        let t = Candidate::new(vec![1.0, 1.0, 2.0]);
        let scale = trace_t(&w, &px(&[1.0, 1.0, 2.0]), &t).unwrap();
        let p = px(&[scale, scale, 2.0 * scale]);
        let spec = hessian_constrained(&w, &p, &t, HessianOptions::default()).unwrap();
        assert!(spec.degenerate);
        assert!(spec.eigenvalues[0] < 0.0);
        assert!(spec.eigenvalues[1].abs() < 1e-12);
        assert!(spec.asymmetry < 1e-9);

        let err = hessian_constrained(&w, &px(&[3.0, 6.0, 18.0]), &one, HessianOptions::default());
        assert!(matches!(err, Err(Error::NotCritical(_)) | Err(Error::ConstraintViolated(_))));
    }

    #[test]
    fn rank_deficiency_on_the_quartic() {
        let w = catalog("wallach_su3").unwrap();
        assert!(rank_test(&w, &px(&[0.5, 0.5, 1.0])).unwrap().deficient);
        assert!(rank_test(&w, &px(&[1.7, 0.7, 1.0])).unwrap().deficient);
        assert!(!rank_test(&w, &px(&[1.0, 1.0, 1.0])).unwrap().deficient);
    }

    #[test]
    fn orthonormal_complement_is_orthonormal() {
        let v = [0.3, -2.0, 1.1, 0.4];
        let e = orthonormal_complement(&v);
        let gram = e.transpose() * &e;
        assert!((gram - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);
        let dots = e.transpose() * DVector::from_column_slice(&v);
        assert!(dots.amax() < 1e-14);
    }

    #[test]
    fn y_hessian_is_symmetric_and_matches_differences() {
        let g = catalog("g2_u2").unwrap();
        let y = [0.3, 0.7, 0.45];
        let h = hessian_y(&g, &y);
        let grad = |y: &[f64]| -> Vec<f64> { ricci_y(&g, y).iter().enumerate().map(|(m, r)| g.d(m) * r).collect() };
        for n in 0..3 {
            let mut up = y.to_vec();
            let mut down = y.to_vec();
            up[n] += 1e-6;
            down[n] -= 1e-6;
            let (gu, gd) = (grad(&up), grad(&down));
            for m in 0..3 {
                assert!((h[(m, n)] - h[(n, m)]).abs() < 1e-10);
                assert!((h[(m, n)] - (gu[m] - gd[m]) / 2e-6).abs() < 1e-6);
            }
        }
    }
}
