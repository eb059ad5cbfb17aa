//! Forward transform `𝐈_a`, integrating factor and transport solution.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{FanBeamData, FanBeamGrid};
use crate::error::{GeoError, Result};
use crate::geometry::{geodesic_trace, Geodesic, ModelPair, TraceOptions};
use crate::mesh::{sphere_weights, CovScalarPair, DiskMesh, PairField};
use crate::Vec2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `U_a(x, v) = exp(-∫_0^{τ(x,-v)} a(γ_{x,-v}(s)) ds)`: the integrating
/// factor, equal to one on `∂_+SM` of the disk of radius `radius`.
pub fn integrating_factor(
    model: &ModelPair,
    x: &Vec2,
    v: &Vec2,
    radius: f64,
    opts: &TraceOptions,
) -> Result<Complex64> {
    let back = geodesic_trace(&model.metric, x, &-v, radius, opts)?;
    Ok((-back.integrate(|s| model.attenuation.value(&s.x))).exp())
}

/// Trapezoid weights `exp(∫_0^{t_k} a) · Δ_k` on the samples of a traced
/// geodesic, so that `Σ_k w_k F(γ_k, γ̇_k)` approximates the attenuated
/// line integral.
pub fn attenuated_weights(model: &ModelPair, geo: &Geodesic) -> Vec<Complex64> {
    let phase = geo.cumulative(|s| model.attenuation.value(&s.x));
    let n = geo.samples.len();
    (0..n)
        .map(|k| {
            let left = if k > 0 {
                geo.samples[k].t - geo.samples[k - 1].t
            } else {
                0.0
            };
            let right = if k + 1 < n {
                geo.samples[k + 1].t - geo.samples[k].t
            } else {
                0.0
            };
            phase[k].exp() * (0.5 * (left + right))
        })
        .collect()
}

/// One quadrature node of a cached ray.
#[derive(Debug, Clone, Copy)]
struct RaySample {
    tri: u32,
    bary: [f64; 3],
    v: Vec2,
    weight: Complex64,
}

/// Cached geometry of every ray of a fan-beam grid: sample locations in the
/// mesh, directions, and attenuated quadrature weights. The transform is
/// then an explicit linear map on nodal coefficients with an exact adjoint.
#[derive(Debug)]
pub struct RayPlan {
    grid: FanBeamGrid,
    mesh: Arc<DiskMesh>,
    weights: Vec<f64>,
    offsets: Vec<usize>,
    samples: Vec<RaySample>,
}

impl RayPlan {
    pub fn new(
        model: &ModelPair,
        mesh: &Arc<DiskMesh>,
        grid: FanBeamGrid,
        opts: &TraceOptions,
    ) -> Result<Self> {
        let rays: Vec<Vec<RaySample>> = (0..grid.len())
            .into_par_iter()
            .map(|r| {
                let (k, j) = (r / grid.n_theta, r % grid.n_theta);
                let (x, v) = grid.ray(&model.metric, grid.beta(k), grid.theta(j));
                let geo = geodesic_trace(&model.metric, &x, &v, grid.radius, opts)?;
                let w = attenuated_weights(model, &geo);
                geo.samples
                    .iter()
                    .zip(w)
                    .map(|(s, weight)| {
                        let loc = mesh.locate(&s.x, grid.region)?;
                        Ok(RaySample {
                            tri: loc.tri,
                            bary: loc.bary,
                            v: s.v,
                            weight,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(rays.len() + 1);
        offsets.push(0);
        let mut samples = Vec::with_capacity(rays.iter().map(Vec::len).sum());
        for r in rays {
            samples.extend(r);
            offsets.push(samples.len());
        }
        let weights = (0..grid.len())
            .map(|r| grid.weight(&model.metric, r / grid.n_theta, r % grid.n_theta))
            .collect();
        Ok(RayPlan {
            grid,
            mesh: mesh.clone(),
            weights,
            offsets,
            samples,
        })
    }

    pub fn grid(&self) -> &FanBeamGrid {
        &self.grid
    }

    pub fn mesh(&self) -> &Arc<DiskMesh> {
        &self.mesh
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Empty data on the plan's grid.
    pub fn zero_data(&self) -> FanBeamData {
        FanBeamData {
            grid: self.grid,
            values: vec![ZERO; self.grid.len()],
            weights: self.weights.clone(),
        }
    }

    fn check(&self, f: &PairField) -> Result<()> {
        if f.region() != self.grid.region || !Arc::ptr_eq(f.mesh(), &self.mesh) {
            return Err(GeoError::Contract(
                "pair field does not live on the plan's mesh region".into(),
            ));
        }
        if !f.is_finite() {
            return Err(GeoError::NonFinite("forward input"));
        }
        Ok(())
    }

    /// `𝐈_a F` on every ray.
    pub fn apply(&self, f: &PairField) -> Result<FanBeamData> {
        self.check(f)?;
        let tris = self.mesh.triangles();
        let vals = f.values();
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|r| {
                let mut acc = ZERO;
                for s in &self.samples[self.offsets[r]..self.offsets[r + 1]] {
                    let t = tris[s.tri as usize];
                    let e = sphere_weights(&s.v);
                    let mut y = ZERO;
                    for k in 0..3 {
                        let p = &vals[t[k] as usize];
                        let mut pv = ZERO;
                        for c in 0..5 {
                            pv += p[c] * e[c];
                        }
                        y += pv * s.bary[k];
                    }
                    acc += y * s.weight;
                }
                acc
            })
            .collect();
        Ok(FanBeamData {
            grid: self.grid,
            values,
            weights: self.weights.clone(),
        })
    }

    /// Hermitian transpose of [`RayPlan::apply`] with respect to the plain
    /// coefficient inner products on both sides.
    pub fn transpose(&self, y: &[Complex64]) -> Result<PairField> {
        if y.len() != self.grid.len() {
            return Err(GeoError::Contract(
                "data length does not match the plan".into(),
            ));
        }
        let n = self.mesh.node_count(self.grid.region);
        let mut out = vec![[ZERO; 5]; n];
        let tris = self.mesh.triangles();
        for (r, &yr) in y.iter().enumerate() {
            if yr == ZERO {
                continue;
            }
            for s in &self.samples[self.offsets[r]..self.offsets[r + 1]] {
                let t = tris[s.tri as usize];
                let e = sphere_weights(&s.v);
                let c = s.weight.conj() * yr;
                for k in 0..3 {
                    let ck = c * s.bary[k];
                    let o = &mut out[t[k] as usize];
                    for m in 0..5 {
                        o[m] += ck * e[m];
                    }
                }
            }
        }
        PairField::from_values(&self.mesh, self.grid.region, out)
    }
}

/// `𝐈_a F` on a fan-beam grid (builds a one-off plan).
pub fn forward(
    model: &ModelPair,
    f: &PairField,
    grid: FanBeamGrid,
    opts: &TraceOptions,
) -> Result<FanBeamData> {
    RayPlan::new(model, f.mesh(), grid, opts)?.apply(f)
}

/// `𝐈_a F` along the single geodesic from the boundary point `x` in the
/// inward direction `v`, without a ray cache.
pub fn ray_integral(
    model: &ModelPair,
    f: &PairField,
    x: &Vec2,
    v: &Vec2,
    opts: &TraceOptions,
) -> Result<Complex64> {
    let radius = f.mesh().domain().radius(f.region());
    let geo = geodesic_trace(&model.metric, x, v, radius, opts)?;
    let w = attenuated_weights(model, &geo);
    let mut acc = ZERO;
    for (s, wk) in geo.samples.iter().zip(w) {
        acc += f.eval_on_sphere(&s.x, &s.v)? * wk;
    }
    Ok(acc)
}

/// `𝓘_a[w, φ] = 𝐈_a[φ g, w]`.
pub fn forward_lower(
    model: &ModelPair,
    w: &CovScalarPair,
    grid: FanBeamGrid,
    opts: &TraceOptions,
) -> Result<FanBeamData> {
    forward(model, &w.embed(&model.metric), grid, opts)
}

/// Solution `u(x, v)` of `Xu + au = -F` with `u = 0` on `∂_-SM`, obtained
/// by integrating the transport equation backwards from the exit point:
/// `u_k = e^{A_k} u_{k+1} + Δ_k/2 (F_k + e^{A_k} F_{k+1})`, with `A_k` the
/// trapezoid integral of `a` over the step.
pub fn transport_solve(
    model: &ModelPair,
    f: &PairField,
    x: &Vec2,
    v: &Vec2,
    opts: &TraceOptions,
) -> Result<Complex64> {
    let radius = f.mesh().domain().radius(f.region());
    let geo = geodesic_trace(&model.metric, x, v, radius, opts)?;
    let s = &geo.samples;
    let mut u = ZERO;
    let mut next: Option<(Complex64, Complex64)> = None;
    for k in (0..s.len()).rev() {
        let fk = f.eval_on_sphere(&s[k].x, &s[k].v)?;
        let ak = model.attenuation.value(&s[k].x);
        if let Some((f1, a1)) = next {
            let dt = s[k + 1].t - s[k].t;
            let growth = ((ak + a1) * (0.5 * dt)).exp();
            u = growth * u + (fk + growth * f1) * (0.5 * dt);
        }
        next = Some((fk, ak));
    }
    Ok(u)
}
