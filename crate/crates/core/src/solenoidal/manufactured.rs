//! Closed-form potentials with known `d_a`, for convergence studies of the
//! elliptic solver and of boundary-trace recovery.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::{boundary_trace_recover, elliptic_solve, EllipticSystem, RecoveryOptions, Stiffness};
use crate::c64;
use crate::error::Result;
use crate::geometry::{ModelPair, Region};
use crate::mesh::{d_a_pointwise, CovScalarPair, Discretization, DiskMesh, PairField};
use crate::Vec2;

/// Values of `(w1, w2, φ)` and their partial derivatives `[∂_1, ∂_2]`.
pub type PotentialJet = ([Complex64; 3], [[Complex64; 3]; 2]);

/// A smooth potential with nonzero boundary trace.
pub fn potential(x: &Vec2) -> PotentialJet {
    let (s, c) = (x[0] + 0.5 * x[1]).sin_cos();
    let e = (0.7 * x[1]).exp();
    let (s2, c2) = (2.0 * x[0]).sin_cos();
    let u = [
        c64(s, 0.2 * x[0]),
        c64(x[0] * x[1] + 0.3, -x[1] * x[1]),
        c64(c2 * e, 0.5 * s),
    ];
    let du = [
        [c64(c, 0.2), c64(x[1], 0.0), c64(-2.0 * s2 * e, 0.5 * c)],
        [
            c64(0.5 * c, 0.0),
            c64(x[0], -2.0 * x[1]),
            c64(0.7 * c2 * e, 0.25 * c),
        ],
    ];
    (u, du)
}

/// [`potential`] times `1 - |x|²/r²`, vanishing on the circle of radius `r`.
pub fn vanishing_potential(x: &Vec2, r: f64) -> PotentialJet {
    let (u, du) = potential(x);
    let c = 1.0 - x.norm_squared() / (r * r);
    let dc = [-2.0 * x[0] / (r * r), -2.0 * x[1] / (r * r)];
    let mut dv = [[Complex64::new(0.0, 0.0); 3]; 2];
    for k in 0..2 {
        for j in 0..3 {
            dv[k][j] = du[k][j] * c + u[j] * dc[k];
        }
    }
    (u.map(|z| z * c), dv)
}

/// `d_a` of a potential jet at `x`.
pub fn analytic_d_a(model: &ModelPair, x: &Vec2, (u, du): PotentialJet) -> [Complex64; 5] {
    d_a_pointwise(
        &model.metric.metric(x),
        &model.metric.christoffel(x),
        model.attenuation.value(x),
        &u,
        &du,
    )
}

/// Relative `L²` error of the elliptic solve of `δ_a d_a W = δ_a d_a W₀`
/// with the trace of `W₀ =` [`potential`] as Dirichlet data.
pub fn manufactured_error(h: f64, model: &ModelPair, kind: Stiffness) -> Result<f64> {
    let d = Discretization::new(Arc::new(DiskMesh::new(h)?), model.clone());
    let sys = EllipticSystem::new(&d, Region::Inner, kind)?;
    let load = sys.function_load(|qp| analytic_d_a(model, &qp.x, potential(&qp.x)));
    let exact = CovScalarPair::from_fn(d.mesh(), Region::Inner, |x| potential(x).0);
    let w = elliptic_solve(&sys, &load, Some(&exact))?;
    Ok(d.cov_norm(&(&w - &exact))? / d.cov_norm(&exact)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceExperiment {
    /// Relative error of the recovered `[w, φ]|∂M`.
    pub trace_error: f64,
    /// Relative error of the interior solve with the recovered trace.
    pub interior_error: f64,
    /// Fewest admissible directions at any boundary node.
    pub min_directions: usize,
}

/// Recovers `[w, φ]|∂M` of a potential vanishing on `∂M₁` from
/// `-d_a[w, φ]` on the annulus, then solves for `[w, φ]` inside `M` with
/// the recovered trace.
pub fn trace_experiment(model: &ModelPair, h: f64) -> Result<TraceExperiment> {
    let d = Discretization::new(Arc::new(DiskMesh::new(h)?), model.clone());
    let r1 = d.mesh().domain().radius_m1;
    let g = PairField::from_fn(d.mesh(), Region::Middle, |x| {
        analytic_d_a(model, x, vanishing_potential(x, r1)).map(|z| -z)
    });
    let rec = boundary_trace_recover(model, &g, &RecoveryOptions::for_mesh_spacing(h))?;
    let exact: Vec<[Complex64; 3]> = rec
        .nodes
        .iter()
        .map(|&i| vanishing_potential(&d.mesh().node(i), r1).0)
        .collect();
    let diff: f64 = rec
        .values
        .iter()
        .zip(&exact)
        .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).norm_sqr()))
        .sum();
    let size: f64 = exact.iter().flatten().map(|z| z.norm_sqr()).sum();

    let sys = EllipticSystem::new(&d, Region::Inner, Stiffness::Galerkin)?;
    let load = sys.function_load(|qp| analytic_d_a(model, &qp.x, vanishing_potential(&qp.x, r1)));
    let w = sys.solve(&load, Some(&rec.boundary_field(d.mesh())))?;
    let truth = CovScalarPair::from_fn(d.mesh(), Region::Inner, |x| vanishing_potential(x, r1).0);
    Ok(TraceExperiment {
        trace_error: (diff / size).sqrt(),
        interior_error: d.cov_norm(&(&w - &truth))? / d.cov_norm(&truth)?,
        min_directions: rec.directions_used.iter().copied().min().unwrap_or(0),
    })
}
