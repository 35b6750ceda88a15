//! Property checks shared by the property tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ricci_lab::curvature::{
    grad_constrained, hessian_constrained, inner_g, jacobian_dric, jacobian_dric_fd, ricci_coefficients,
    scalar_curvature, trace_t, DiagTensor, HessianOptions,
};
use ricci_lab::dynamics::critical_inventory;
use ricci_lab::invariants::{alpha, optimal_variation};
use ricci_lab::space::{Candidate, MetricPoint, SpaceSpec};

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Rescales `x` onto `tr_g T = 1`.
pub fn feasible(space: &SpaceSpec, x: &[f64], t: &Candidate) -> MetricPoint {
    let p = MetricPoint::from_x(x.to_vec()).unwrap();
    let tr = trace_t(space, &p, t).unwrap();
    MetricPoint::from_x(x.iter().map(|v| v * tr).collect()).unwrap()
}

pub fn trace_identity(space: &SpaceSpec, x: &[f64]) -> Check {
    let p = MetricPoint::from_x(x.to_vec()).unwrap();
    let ric = ricci_coefficients(space, &p).unwrap();
    let traced: f64 = (0..space.r()).map(|i| space.d(i) * ric.a[i] / x[i]).sum();
    let s = scalar_curvature(space, &p).unwrap();
    ensure((traced - s).abs() <= 1e-12 * (1.0 + s.abs()), || format!("tr Ric {traced} vs S {s} at {x:?}"))
}

pub fn scale_invariance(space: &SpaceSpec, x: &[f64], lambda: f64) -> Check {
    let p = MetricPoint::from_x(x.to_vec()).unwrap();
    let q = MetricPoint::from_x(x.iter().map(|v| v * lambda).collect()).unwrap();
    let (a, b) = (ricci_coefficients(space, &p).unwrap(), ricci_coefficients(space, &q).unwrap());
    for (u, v) in a.a.iter().zip(&b.a) {
        ensure((u - v).abs() <= 1e-12 * (1.0 + u.abs()), || format!("Ric changed under scaling by {lambda} at {x:?}"))?;
    }
    let (s, sl) = (scalar_curvature(space, &p).unwrap(), scalar_curvature(space, &q).unwrap());
    ensure((s - lambda * sl).abs() <= 1e-11 * (1.0 + s.abs()), || format!("S not homogeneous at {x:?}"))
}

pub fn gradient_tangency(space: &SpaceSpec, x: &[f64], t: &Candidate) -> Check {
    let p = feasible(space, x, t);
    let g = grad_constrained(space, &p, t).unwrap();
    let tt = DiagTensor::new(t.t.clone());
    let along = inner_g(space, &g, &tt, &p).unwrap();
    let scale = inner_g(space, &g, &g, &p).unwrap().sqrt() * inner_g(space, &tt, &tt, &p).unwrap().sqrt();
    ensure(along.abs() <= 1e-12 * (1.0 + scale), || format!("<grad, T> = {along:e} at {x:?}"))
}

pub fn jacobian_vs_differences(space: &SpaceSpec, x: &[f64]) -> Check {
    let p = MetricPoint::from_x(x.to_vec()).unwrap();
    let exact = jacobian_dric(space, &p).unwrap();
    let fd = jacobian_dric_fd(space, &p).unwrap();
    let err = (&exact - &fd).amax() / exact.amax().max(1e-12);
    ensure(err <= 1e-6, || format!("Jacobian relative error {err:e} at {x:?}"))
}

/// Canonical-variation closed form against direct evaluation at `s * t_max`.
pub fn variation_formula(space: &SpaceSpec, t: &Candidate, s: f64) -> Check {
    for stratum in space.subalgebra_strata() {
        let cv = optimal_variation(space, t, &stratum).unwrap();
        let param = s * cv.t_max;
        let direct = scalar_curvature(space, &cv.point(param).unwrap()).unwrap();
        let formula = cv.scal(param).unwrap();
        ensure((direct - formula).abs() <= 1e-10 * (1.0 + direct.abs()), || {
            format!("{stratum}: formula {formula} vs direct {direct} at t = {param}")
        })?;
    }
    Ok(())
}

pub fn alpha_monotone(space: &SpaceSpec, t: &Candidate) -> Check {
    let strata = space.subalgebra_strata();
    for small in &strata {
        for large in &strata {
            if small != large && small.members.iter().all(|m| large.members.contains(m)) {
                let (a, b) = (alpha(space, t, small).unwrap().value, alpha(space, t, large).unwrap().value);
                ensure(a <= b + 1e-9, || format!("alpha {small} = {a} above alpha {large} = {b}"))?;
            }
        }
    }
    Ok(())
}

/// Second differences of `S` along straight lines inside `tr_g T = 1`
/// (linear in the y-chart) against the constrained Hessian spectrum at each
/// critical point found.
pub fn hessian_vs_differences(space: &SpaceSpec, t: &Candidate) -> Check {
    let r = space.r();
    let k = r - 1;
    for cp in critical_inventory(space, t, 64, 1e-7) {
        let spectrum = hessian_constrained(space, &cp.point, t, HessianOptions::default()).map_err(|e| e.to_string())?;
        let y = cp.point.y();
        // g-orthonormal tangent frame: delta y_i = w_i y_i / sqrt(d_i)
        let scale: Vec<f64> = (0..r).map(|i| y[i] / space.d(i).sqrt()).collect();
        let normal = DVector::from_fn(r, |i, _| space.d(i).sqrt() * t.t[i] * y[i]).normalize();
        let projector = DMatrix::identity(r, r) - &normal * normal.transpose();
        let frame = projector.svd(true, false).u.unwrap().columns(0, k).into_owned();
        let s_at = |w: &DVector<f64>| {
            let dw = &frame * w;
            let shifted: Vec<f64> = (0..r).map(|i| y[i] + scale[i] * dw[i]).collect();
            scalar_curvature(space, &MetricPoint::from_y(shifted).unwrap()).unwrap()
        };
        let h = 1e-4;
        let unit = |i: usize, v: f64| DVector::from_fn(k, |j, _| if j == i { v } else { 0.0 });
        let s0 = s_at(&DVector::zeros(k));
        let fd = DMatrix::from_fn(k, k, |a, b| {
            if a == b {
                (s_at(&unit(a, h)) - 2.0 * s0 + s_at(&unit(a, -h))) / (h * h)
            } else {
                let pp = s_at(&(unit(a, h) + unit(b, h)));
                let pm = s_at(&(unit(a, h) - unit(b, h)));
                let mp = s_at(&(unit(b, h) - unit(a, h)));
                let mm = s_at(&(-unit(a, h) - unit(b, h)));
                (pp - pm - mp + mm) / (4.0 * h * h)
            }
        });
        let mut eig: Vec<f64> = SymmetricEigen::new(fd).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (u, v) in eig.iter().zip(&spectrum.eigenvalues) {
            ensure((u - v).abs() <= 1e-5 * (1.0 + v.abs()), || {
                format!("{}: differences {eig:?} vs spectrum {:?}", space.name(), spectrum.eigenvalues)
            })?;
        }
    }
    Ok(())
}
