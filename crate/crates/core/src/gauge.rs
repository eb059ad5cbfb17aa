//! Boundary gauge: a potential `[w, φ]` vanishing on `∂M` whose removal
//! makes the normal components `f_in`, `α_n` of a pair vanish in a collar.
//!
//! In boundary normal coordinates `(s, n)` the conditions read
//! `∂_n w_n + a φ = f_nn`, `∂_n φ + a w_n = α_n` and
//! `∂_n w_s - 2 Γ^s_sn w_s = 2 f_sn - ∂_s w_n`, integrated inward from zero
//! data along the normal geodesics.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{BoundaryNormalCoords, ModelPair, Region, DEFAULT_COLLAR};
use crate::mesh::{CovScalarPair, Discretization, PairField};
use crate::{Mat2, Vec2};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fraction of the collar on which the cutoff equals one.
pub const PLATEAU: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeOptions {
    /// Collar width in g-distance.
    pub collar: f64,
    /// Number of normal rays around the boundary.
    pub rays: usize,
    /// Integration steps across the collar.
    pub steps: usize,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        GaugeOptions {
            collar: DEFAULT_COLLAR,
            rays: 720,
            steps: 96,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeResult {
    #[serde(skip)]
    pub normalized: PairField,
    #[serde(skip)]
    pub generator: CovScalarPair,
    pub collar: f64,
    /// Largest `|f̃_nn|, |f̃_sn|, |α̃_n|` over nodes where the cutoff is one.
    pub max_normal_residual: f64,
    /// `max |F|` over the nodes of `M`.
    pub input_max: f64,
    /// Largest nodal `|F - d_a[w, φ] - F̃|` inside the collar.
    pub identity_residual: f64,
    /// Largest generator value on `∂M`.
    pub boundary_generator: f64,
    pub collar_nodes: usize,
}

/// `1` on `[0, PLATEAU c]`, `0` beyond `c`, quintic smoothstep between.
pub fn collar_cutoff(n: f64, collar: f64) -> f64 {
    let u = (n - PLATEAU * collar) / ((1.0 - PLATEAU) * collar);
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

/// Values carried by each node of the `(s, n)` table.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayPoint {
    /// Unit normal `∂_n`.
    pub normal: Vec2,
    /// Coordinate field `∂_s`.
    pub tangent: Vec2,
    pub w_n: Complex64,
    pub w_s: Complex64,
    pub phi: Complex64,
}

/// ODE solutions on `rays × (2 steps + 1)` points, equispaced in arclength
/// `s` and in `n` (half steps included).
#[derive(Debug)]
pub(crate) struct GaugeTable {
    pub rays: usize,
    pub points_per_ray: usize,
    pub ds: f64,
    pub dn: f64,
    pub data: Vec<RayPoint>,
}

impl GaugeTable {
    pub fn at(&self, k: usize, j: usize) -> &RayPoint {
        &self.data[k * self.points_per_ray + j]
    }
}

struct State {
    x: Vec2,
    v: Vec2,
    w_n: Complex64,
    phi: Complex64,
}

/// Pass one: geodesic and `(w_n, φ)` along every normal ray; pass two:
/// tangential component with `∂_s` by centered differences across rays.
/// `f` samples the pair at a point.
pub(crate) fn solve_rays<F>(
    model: &ModelPair,
    f: F,
    bn: &BoundaryNormalCoords,
    opts: &GaugeOptions,
) -> Result<GaugeTable>
where
    F: Fn(&Vec2) -> Result<[Complex64; 5]> + Sync,
{
    let k_rays = opts.rays;
    let half = 2 * opts.steps;
    let m = half + 1;
    let len = bn.boundary_length();
    let ds = len / k_rays as f64;
    let dn = opts.collar / half as f64;
    let metric = &model.metric;

    let rhs = |s: &State| -> Result<(Vec2, Vec2, Complex64, Complex64)> {
        let p = f(&s.x)?;
        let a = model.attenuation.value(&s.x);
        let f_nn =
            p[0] * (s.v[0] * s.v[0]) + p[1] * (2.0 * s.v[0] * s.v[1]) + p[2] * (s.v[1] * s.v[1]);
        let alpha_n = p[3] * s.v[0] + p[4] * s.v[1];
        Ok((
            s.v,
            metric.acceleration(&s.x, &s.v),
            f_nn - a * s.phi,
            alpha_n - a * s.w_n,
        ))
    };

    let first: Vec<Vec<State>> = (0..k_rays)
        .into_par_iter()
        .map(|k| {
            let beta = bn.angle_of(k as f64 * ds);
            let mut s = State {
                x: bn.boundary_point(beta),
                v: bn.inward_normal(beta),
                w_n: ZERO,
                phi: ZERO,
            };
            let mut out = Vec::with_capacity(m);
            let h = dn;
            for j in 0..m {
                out.push(State { ..s });
                if j + 1 == m {
                    break;
                }
                let k1 = rhs(&s)?;
                let s2 = State {
                    x: s.x + k1.0 * (0.5 * h),
                    v: s.v + k1.1 * (0.5 * h),
                    w_n: s.w_n + k1.2 * (0.5 * h),
                    phi: s.phi + k1.3 * (0.5 * h),
                };
                let k2 = rhs(&s2)?;
                let s3 = State {
                    x: s.x + k2.0 * (0.5 * h),
                    v: s.v + k2.1 * (0.5 * h),
                    w_n: s.w_n + k2.2 * (0.5 * h),
                    phi: s.phi + k2.3 * (0.5 * h),
                };
                let k3 = rhs(&s3)?;
                let s4 = State {
                    x: s.x + k3.0 * h,
                    v: s.v + k3.1 * h,
                    w_n: s.w_n + k3.2 * h,
                    phi: s.phi + k3.3 * h,
                };
                let k4 = rhs(&s4)?;
                s = State {
                    x: s.x + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0),
                    v: s.v + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0),
                    w_n: s.w_n + (k1.2 + k2.2 * 2.0 + k3.2 * 2.0 + k4.2) * (h / 6.0),
                    phi: s.phi + (k1.3 + k2.3 * 2.0 + k3.3 * 2.0 + k4.3) * (h / 6.0),
                };
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    // Pass two on the same half-step grid, RK4 with step 2 dn.
    let data: Vec<Vec<RayPoint>> = (0..k_rays)
        .into_par_iter()
        .map(|k| {
            let (kp, km) = ((k + 1) % k_rays, (k + k_rays - 1) % k_rays);
            let coeffs: Vec<(Vec2, Complex64, Complex64)> = (0..m)
                .map(|j| {
                    let s = &first[k][j];
                    let tangent = (first[kp][j].x - first[km][j].x) / (2.0 * ds);
                    let tangent_n = (first[kp][j].v - first[km][j].v) / (2.0 * ds);
                    let (g, dg) = metric.metric_jet1(&s.x);
                    let dg_n = dg[0] * s.v[0] + dg[1] * s.v[1];
                    let big_g = (tangent.transpose() * g * tangent)[(0, 0)];
                    let dgn = (tangent.transpose() * dg_n * tangent)[(0, 0)]
                        + 2.0 * (tangent.transpose() * g * tangent_n)[(0, 0)];
                    let christoffel = 0.5 * dgn / big_g;
                    let p = f(&s.x)?;
                    let f_sn = p[0] * (tangent[0] * s.v[0])
                        + p[1] * (tangent[0] * s.v[1] + tangent[1] * s.v[0])
                        + p[2] * (tangent[1] * s.v[1]);
                    let dw_n = (first[kp][j].w_n - first[km][j].w_n) / (2.0 * ds);
                    Ok((
                        tangent,
                        Complex64::new(2.0 * christoffel, 0.0),
                        2.0 * f_sn - dw_n,
                    ))
                })
                .collect::<Result<_>>()?;
            let mut w_s = vec![ZERO; m];
            // Odd half-step points are midpoints of the RK4 step 2 dn.
            let h = 2.0 * dn;
            let mut j = 0;
            while j + 2 < m {
                let rhs = |i: usize, w: Complex64| coeffs[i].1 * w + coeffs[i].2;
                let k1 = rhs(j, w_s[j]);
                let k2 = rhs(j + 1, w_s[j] + k1 * (0.5 * h));
                let k3 = rhs(j + 1, w_s[j] + k2 * (0.5 * h));
                let k4 = rhs(j + 2, w_s[j] + k3 * h);
                w_s[j + 2] = w_s[j] + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                // Midpoint value by cubic Hermite on the step.
                let (y0, y1) = (w_s[j], w_s[j + 2]);
                let (d0, d1) = (k1, rhs(j + 2, y1));
                w_s[j + 1] = (y0 + y1) * 0.5 + (d0 - d1) * (h / 8.0);
                j += 2;
            }
            Ok((0..m)
                .map(|j| {
                    let s = &first[k][j];
                    RayPoint {
                        normal: s.v,
                        tangent: coeffs[j].0,
                        w_n: s.w_n,
                        w_s: w_s[j],
                        phi: s.phi,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(GaugeTable {
        rays: k_rays,
        points_per_ray: m,
        ds,
        dn,
        data: data.into_iter().flatten().collect(),
    })
}

/// Lagrange weights of the four nodes `start..start+4` at fractional
/// position `u` measured from `start`.
fn cubic_weights(u: f64) -> [f64; 4] {
    let nodes = [0.0, 1.0, 2.0, 3.0];
    std::array::from_fn(|i| {
        let mut w = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if j != i {
                w *= (u - xj) / (nodes[i] - xj);
            }
        }
        w
    })
}

/// Bicubic interpolation of a table quantity at `(s, n)`: periodic in `s`,
/// one-sided windows at the ends in `n`.
fn interpolate<T>(table: &GaugeTable, s: f64, n: f64, value: impl Fn(&RayPoint) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Copy,
{
    let us = s / table.ds;
    let ks = us.floor() as isize - 1;
    let ws = cubic_weights(us - ks as f64);
    let un = n / table.dn;
    let last = table.points_per_ray as isize - 4;
    let jn = (un.floor() as isize - 1).clamp(0, last);
    let wn = cubic_weights(un - jn as f64);
    let mut acc: Option<T> = None;
    for (a, wa) in ws.iter().enumerate() {
        let k = (ks + a as isize).rem_euclid(table.rays as isize) as usize;
        for (b, wb) in wn.iter().enumerate() {
            let term = value(table.at(k, (jn + b as isize) as usize)) * (wa * wb);
            acc = Some(match acc {
                Some(v) => v + term,
                None => term,
            });
        }
    }
    acc.expect("nonempty stencil")
}

#[derive(Clone, Copy)]
struct Gen([Complex64; 3]);

impl std::ops::Add for Gen {
    type Output = Gen;
    fn add(self, o: Gen) -> Gen {
        Gen([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl std::ops::Mul<f64> for Gen {
    type Output = Gen;
    fn mul(self, c: f64) -> Gen {
        Gen(self.0.map(|z| z * c))
    }
}

/// Cartesian covector `w = w_s ds + w_n dn` and `φ` at a table point.
fn cartesian(p: &RayPoint) -> Gen {
    let jac = Mat2::from_columns(&[p.tangent, p.normal]);
    let inv_t = jac
        .try_inverse()
        .expect("normal coordinates are regular in the collar")
        .transpose();
    let w1 = p.w_s * inv_t[(0, 0)] + p.w_n * inv_t[(0, 1)];
    let w2 = p.w_s * inv_t[(1, 0)] + p.w_n * inv_t[(1, 1)];
    Gen([w1, w2, p.phi])
}

/// Builds the collar gauge potential of `F` and returns `F - d_a[w, φ]`.
pub fn boundary_gauge_normalize(
    disc: &Discretization,
    f: &PairField,
    opts: &GaugeOptions,
) -> Result<GaugeResult> {
    if f.region() != Region::Inner {
        return Err(GeoError::Contract(
            "gauge normalization acts on pairs over M".into(),
        ));
    }
    if !f.is_finite() {
        return Err(GeoError::NonFinite("gauge input"));
    }
    let mesh = disc.mesh();
    if opts.collar < 3.0 * mesh.spacing() {
        return Err(GeoError::Resolution(format!(
            "collar {} is narrower than three mesh cells of size {}",
            opts.collar,
            mesh.spacing()
        )));
    }
    if opts.rays < 8 || opts.steps < 4 {
        return Err(GeoError::Contract(
            "gauge table needs at least 8 rays and 4 steps".into(),
        ));
    }
    let model = disc.model();
    let radius = mesh.domain().radius_m;
    let bn = BoundaryNormalCoords::new(&model.metric, radius, opts.collar);
    let table = solve_rays(model, |x| f.interpolate(x), &bn, opts)?;

    let n_nodes = mesh.node_count(Region::Inner);
    let coords: Vec<Option<(f64, f64)>> = (0..n_nodes)
        .into_par_iter()
        .map(|i| {
            let x = mesh.node(i);
            // Cheap Euclidean pre-filter; the metric is close to conformal.
            if radius - x.norm() > 3.0 * opts.collar {
                return None;
            }
            match bn.angle_coords(&x) {
                Ok((beta, n)) if n >= -1e-12 && n < opts.collar => {
                    Some((bn.arclength(beta), n.max(0.0)))
                }
                _ => None,
            }
        })
        .collect();

    let mut generator = CovScalarPair::zeros(mesh, Region::Inner);
    for (i, c) in coords.iter().enumerate() {
        if let Some((s, n)) = *c {
            let g = interpolate(&table, s, n, cartesian);
            let chi = collar_cutoff(n, opts.collar);
            generator.values_mut()[i] = g.0.map(|z| z * chi);
        }
    }
    for i in mesh.boundary_nodes(Region::Inner) {
        generator.values_mut()[i] = [ZERO; 3];
    }

    let da = disc.apply_d_a(&generator);
    let mut normalized = f.clone();
    normalized.axpy(Complex64::new(-1.0, 0.0), &da);

    let stencil = disc.stencil(Region::Inner);
    let mut max_res: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut collar_nodes = 0;
    for (i, c) in coords.iter().enumerate() {
        let Some((s, n)) = *c else { continue };
        collar_nodes += 1;
        let p = normalized.values()[i];
        let q = f.values()[i];
        let d = da.values()[i];
        for k in 0..5 {
            identity = identity.max((q[k] - d[k] - p[k]).norm());
        }
        // Only nodes whose gradient stencil lies where the cutoff is one.
        let plateau = |j: usize| matches!(coords[j], Some((_, m)) if m <= PLATEAU * opts.collar);
        if !plateau(i) || !stencil.row(i).iter().all(|&(j, _)| plateau(j as usize)) {
            continue;
        }
        let normal = interpolate(&table, s, n, |r| r.normal);
        let tangent = interpolate(&table, s, n, |r| r.tangent);
        let f_nn = p[0] * (normal[0] * normal[0])
            + p[1] * (2.0 * normal[0] * normal[1])
            + p[2] * (normal[1] * normal[1]);
        let f_sn = p[0] * (tangent[0] * normal[0])
            + p[1] * (tangent[0] * normal[1] + tangent[1] * normal[0])
            + p[2] * (tangent[1] * normal[1]);
        let alpha_n = p[3] * normal[0] + p[4] * normal[1];
        max_res = max_res
            .max(f_nn.norm())
            .max(f_sn.norm())
            .max(alpha_n.norm());
    }
    let boundary_generator = mesh
        .boundary_nodes(Region::Inner)
        .flat_map(|i| generator.values()[i])
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(GaugeResult {
        input_max: f.max_abs(),
        normalized,
        generator,
        collar: opts.collar,
        max_normal_residual: max_res,
        identity_residual: identity,
        boundary_generator,
        collar_nodes,
    })
}

#[cfg(test)]
mod tests;
