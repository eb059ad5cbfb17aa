//! Recovery of `[w, φ]|∂M` from `G = -d_a[w, φ]` on the annulus `M₁ ∖ M`.
//!
//! Along a unit-speed geodesic `γ` leaving `∂M`, `u(t) = w(γ̇) + φ` obeys
//! `u' + a u = (d_a[w, φ])(γ, γ̇)`. With `[w, φ] = 0` on `∂M₁` this gives
//! `w(v) + φ = ∫_0^ℓ exp(∫_0^t a) G(γ, γ̇) dt` at the start point, one
//! linear equation per direction `v`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{geodesic_trace, ModelPair, Region, TraceOptions as GeodesicOptions};
use crate::mesh::{CovScalarPair, PairField};
use crate::Vec2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Minimum number of admissible directions for a least-squares fit.
pub const MIN_DIRECTIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    /// Directions per boundary node.
    pub directions: usize,
    /// Largest angle between a direction and the outward normal.
    pub max_angle: f64,
    pub trace: GeodesicOptions,
}

impl RecoveryOptions {
    pub fn for_mesh_spacing(h: f64) -> Self {
        RecoveryOptions {
            directions: 16,
            max_angle: 1.2,
            trace: GeodesicOptions::for_mesh_spacing(h),
        }
    }
}

/// Recovered boundary values of `[w, φ]` on `∂M`.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecovery {
    /// Node indices of the `∂M` circle.
    pub nodes: Vec<usize>,
    /// `(w1, w2, φ)` at those nodes.
    #[serde(skip)]
    pub values: Vec<[Complex64; 3]>,
    /// Admissible directions used at each node.
    pub directions_used: Vec<usize>,
    /// Nodes whose value was interpolated from their neighbors.
    pub flagged: Vec<usize>,
    /// Largest least-squares residual over the fitted nodes.
    pub max_fit_residual: f64,
}

impl TraceRecovery {
    /// A field on `M` carrying the recovered values on `∂M` and zero inside,
    /// suitable as Dirichlet data.
    pub fn boundary_field(&self, mesh: &std::sync::Arc<crate::mesh::DiskMesh>) -> CovScalarPair {
        let mut f = CovScalarPair::zeros(mesh, Region::Inner);
        for (&i, v) in self.nodes.iter().zip(&self.values) {
            f.values_mut()[i] = *v;
        }
        f
    }
}

struct NodeFit {
    value: Option<[Complex64; 3]>,
    used: usize,
    residual: f64,
}

/// Recovers `[w, φ]|∂M` from `G = -d_a[w, φ]` sampled on `M₁` (values
/// inside `M` are not used), assuming `[w, φ]` vanishes on `∂M₁`.
pub fn boundary_trace_recover(
    model: &ModelPair,
    g: &PairField,
    opts: &RecoveryOptions,
) -> Result<TraceRecovery> {
    if g.region() != Region::Middle {
        return Err(GeoError::Contract(
            "annulus data must live on the M₁ region".into(),
        ));
    }
    if opts.directions < MIN_DIRECTIONS {
        return Err(GeoError::Contract(format!(
            "at least {MIN_DIRECTIONS} directions are needed, got {}",
            opts.directions
        )));
    }
    let mesh = g.mesh();
    let inner = mesh.domain().radius_m;
    let outer = mesh.domain().radius_m1;
    let nodes: Vec<usize> = mesh.boundary_nodes(Region::Inner).collect();
    let fits: Vec<NodeFit> = nodes
        .par_iter()
        .map(|&i| fit_node(model, g, &mesh.node(i), inner, outer, opts))
        .collect::<Result<_>>()?;

    let count = nodes.len();
    let mut values: Vec<Option<[Complex64; 3]>> = fits.iter().map(|f| f.value).collect();
    let flagged: Vec<usize> = nodes
        .iter()
        .zip(&fits)
        .filter(|(_, f)| f.value.is_none())
        .map(|(&i, _)| i)
        .collect();
    if flagged.len() == count {
        return Err(GeoError::Resolution(
            "no boundary node has enough admissible annulus directions".into(),
        ));
    }
    // Fill flagged nodes from the nearest fitted neighbors along the circle.
    for k in 0..count {
        if values[k].is_some() {
            continue;
        }
        let find = |step: isize| {
            (1..count as isize).find_map(|d| {
                let j = (k as isize + step * d).rem_euclid(count as isize) as usize;
                fits[j].value.map(|v| (d as f64, v))
            })
        };
        let (dl, vl) = find(-1).expect("some node is fitted");
        let (dr, vr) = find(1).expect("some node is fitted");
        let wl = dr / (dl + dr);
        values[k] = Some([0, 1, 2].map(|c| vl[c] * wl + vr[c] * (1.0 - wl)));
    }
    Ok(TraceRecovery {
        nodes,
        values: values.into_iter().map(|v| v.expect("filled")).collect(),
        directions_used: fits.iter().map(|f| f.used).collect(),
        flagged,
        max_fit_residual: fits.iter().map(|f| f.residual).fold(0.0, f64::max),
    })
}

fn fit_node(
    model: &ModelPair,
    g: &PairField,
    x: &Vec2,
    inner: f64,
    outer: f64,
    opts: &RecoveryOptions,
) -> Result<NodeFit> {
    let (nu, tangent) = model.metric.circle_frame(x);
    let n = opts.directions;
    let mut rows: Vec<[Complex64; 3]> = Vec::with_capacity(n);
    let mut rhs: Vec<Complex64> = Vec::with_capacity(n);
    for k in 0..n {
        let theta = -opts.max_angle + 2.0 * opts.max_angle * (k as f64 + 0.5) / n as f64;
        let v = nu * theta.cos() + tangent * theta.sin();
        let geo = geodesic_trace(&model.metric, x, &v, outer, &opts.trace)?;
        // Reject rays that dip back into M.
        if geo
            .samples
            .iter()
            .skip(1)
            .any(|s| s.x.norm() < inner * (1.0 - 1e-9))
        {
            continue;
        }
        let phase = geo.cumulative(|s| model.attenuation.value(&s.x));
        let mut acc = ZERO;
        let mut prev: Option<(f64, Complex64)> = None;
        for (s, p) in geo.samples.iter().zip(&phase) {
            let y = p.exp() * g.eval_on_sphere(&s.x, &s.v)?;
            if let Some((t0, y0)) = prev {
                acc += (y + y0) * (0.5 * (s.t - t0));
            }
            prev = Some((s.t, y));
        }
        rows.push([
            Complex64::new(v[0], 0.0),
            Complex64::new(v[1], 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        rhs.push(acc);
    }
    let used = rows.len();
    if used < MIN_DIRECTIONS {
        return Ok(NodeFit {
            value: None,
            used,
            residual: 0.0,
        });
    }
    let a = DMatrix::from_fn(used, 3, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let sol = svd
        .solve(&b, 1e-12)
        .map_err(|e| GeoError::LinearAlgebra(format!("trace least squares: {e}")))?;
    let residual = (&a * &sol - &b).norm() / b.norm().max(1e-300);
    Ok(NodeFit {
        value: Some([sol[0], sol[1], sol[2]]),
        used,
        residual,
    })
}
