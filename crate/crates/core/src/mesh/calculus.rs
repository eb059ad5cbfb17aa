//! Nodal tensor calculus: least-squares gradients, `d_a` and `δ_a`.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, Matrix5, Vector5};
use num_complex::Complex64;
use rayon::prelude::*;

use super::quadrature::{CovKind, PairKind, Quadrature};
use super::{CovScalarPair, DiskMesh, Field, PairField};
use crate::error::Result;
use crate::geometry::{Christoffel, ModelPair, Region};
use crate::linalg::CsrMatrix;
use crate::{Mat2, Vec2};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-node gradient weights: `∂_k u(x_i) ≈ Σ_j c_ij[k] u(x_j)` (the node
/// itself included), from a least-squares quadratic fit. Interior nodes fit
/// over their 1-ring; nodes on the region boundary, whose 1-ring is
/// one-sided, fit over the 2-ring. Gradients are exact for quadratics.
#[derive(Debug, Clone)]
pub struct GradientStencil {
    region: Region,
    offset: Vec<usize>,
    entries: Vec<(u32, Vec2)>,
}

impl GradientStencil {
    pub fn new(mesh: &DiskMesh, region: Region) -> Self {
        let n = mesh.node_count(region);
        let rows: Vec<Vec<(u32, Vec2)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ring = mesh
                    .neighbors(i)
                    .iter()
                    .filter(|&&j| (j as usize) < n)
                    .count();
                if i == 0 {
                    linear_fit(mesh, i, n)
                } else {
                    quadratic_fit(mesh, i, n, mesh.is_boundary_node(region, i) || ring < 6)
                }
            })
            .collect();
        let mut offset = Vec::with_capacity(n + 1);
        let mut entries = Vec::new();
        offset.push(0);
        for r in rows {
            entries.extend(r);
            offset.push(entries.len());
        }
        GradientStencil {
            region,
            offset,
            entries,
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn row(&self, i: usize) -> &[(u32, Vec2)] {
        &self.entries[self.offset[i]..self.offset[i + 1]]
    }

    /// `(∂_1 F, ∂_2 F)` at node `i`.
    #[inline]
    pub fn gradient<const N: usize>(&self, f: &Field<N>, i: usize) -> [[Complex64; N]; 2] {
        let mut d = [[ZERO; N]; 2];
        let vals = f.values();
        for &(j, c) in self.row(i) {
            let v = &vals[j as usize];
            for k in 0..N {
                d[0][k] += v[k] * c[0];
                d[1][k] += v[k] * c[1];
            }
        }
        d
    }
}

fn linear_fit(mesh: &DiskMesh, i: usize, n: usize) -> Vec<(u32, Vec2)> {
    let xi = mesh.node(i);
    let nb: Vec<u32> = mesh
        .neighbors(i)
        .iter()
        .copied()
        .filter(|&j| (j as usize) < n)
        .collect();
    let mut a = Mat2::zeros();
    for &j in &nb {
        let d = mesh.node(j as usize) - xi;
        a += d * d.transpose();
    }
    let ainv = a.try_inverse().expect("1-ring spans the plane");
    let mut out = Vec::with_capacity(nb.len() + 1);
    let mut own = Vec2::zeros();
    for &j in &nb {
        let c = ainv * (mesh.node(j as usize) - xi);
        own -= c;
        out.push((j, c));
    }
    out.push((i as u32, own));
    out.sort_by_key(|e| e.0);
    out
}

fn quadratic_fit(mesh: &DiskMesh, i: usize, n: usize, two_ring: bool) -> Vec<(u32, Vec2)> {
    let xi = mesh.node(i);
    let mut set: Vec<u32> = Vec::new();
    for &j in mesh.neighbors(i) {
        if (j as usize) < n {
            set.push(j);
            if two_ring {
                for &k in mesh.neighbors(j as usize) {
                    if (k as usize) < n && k as usize != i {
                        set.push(k);
                    }
                }
            }
        }
    }
    set.sort_unstable();
    set.dedup();
    let h = mesh.ring_step();
    let rows = DMatrix::from_fn(set.len(), 5, |r, c| {
        let d = (mesh.node(set[r] as usize) - xi) / h;
        match c {
            0 => d[0],
            1 => d[1],
            2 => 0.5 * d[0] * d[0],
            3 => d[0] * d[1],
            _ => 0.5 * d[1] * d[1],
        }
    });
    let normal: Matrix5<f64> = (rows.transpose() * &rows).fixed_view::<5, 5>(0, 0).into();
    let ninv = normal.try_inverse().expect("2-ring determines a quadratic");
    let mut out = Vec::with_capacity(set.len() + 1);
    let mut own = Vec2::zeros();
    for (r, &j) in set.iter().enumerate() {
        let row: Vector5<f64> = rows.row(r).transpose().fixed_view::<5, 1>(0, 0).into();
        let c = ninv * row;
        let cj = Vec2::new(c[0], c[1]) / h;
        own -= cj;
        out.push((j, cj));
    }
    out.push((i as u32, own));
    out.sort_by_key(|e| e.0);
    out
}

/// `d_a[w, φ]` at one point from values `u = (w1, w2, φ)` and their
/// partial derivatives `du[k] = ∂_k u`.
pub fn d_a_pointwise(
    g: &Mat2,
    gamma: &Christoffel,
    a: Complex64,
    u: &[Complex64; 3],
    du: &[[Complex64; 3]; 2],
) -> [Complex64; 5] {
    let mut out = [ZERO; 5];
    for (r, (p, q)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
        let mut f = 0.5 * (du[p][q] + du[q][p]);
        for k in 0..2 {
            f -= u[k] * gamma.0[k][p][q];
        }
        out[r] = f + a * u[2] * g[(p, q)];
    }
    out[3] = du[0][2] + a * u[0];
    out[4] = du[1][2] + a * u[1];
    out
}

/// Analytic geometry sampled at a node.
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    pub g: Mat2,
    pub ginv: Mat2,
    pub gamma: Christoffel,
    pub a: Complex64,
}

fn region_slot(r: Region) -> usize {
    match r {
        Region::Inner => 0,
        Region::Middle => 1,
        Region::Extended => 2,
    }
}

/// A mesh together with a model: the setting for all discrete calculus.
#[derive(Debug)]
pub struct Discretization {
    mesh: Arc<DiskMesh>,
    model: ModelPair,
    geometry: Vec<NodeGeometry>,
    stencils: [OnceLock<GradientStencil>; 3],
    quadratures: [OnceLock<Quadrature>; 3],
    d_matrices: [OnceLock<CsrMatrix>; 3],
}

impl Discretization {
    pub fn new(mesh: Arc<DiskMesh>, model: ModelPair) -> Self {
        let geometry = mesh
            .nodes()
            .par_iter()
            .map(|x| {
                let g = model.metric.metric(x);
                NodeGeometry {
                    g,
                    ginv: g.try_inverse().expect("metric is positive definite"),
                    gamma: model.metric.christoffel(x),
                    a: model.attenuation.value(x),
                }
            })
            .collect();
        Discretization {
            mesh,
            model,
            geometry,
            stencils: Default::default(),
            quadratures: Default::default(),
            d_matrices: Default::default(),
        }
    }

    pub fn mesh(&self) -> &Arc<DiskMesh> {
        &self.mesh
    }

    pub fn model(&self) -> &ModelPair {
        &self.model
    }

    pub fn node_geometry(&self, i: usize) -> &NodeGeometry {
        &self.geometry[i]
    }

    pub fn stencil(&self, region: Region) -> &GradientStencil {
        self.stencils[region_slot(region)].get_or_init(|| GradientStencil::new(&self.mesh, region))
    }

    pub fn quadrature(&self, region: Region) -> &Quadrature {
        self.quadratures[region_slot(region)]
            .get_or_init(|| Quadrature::new(&self.mesh, &self.model.metric, region))
    }

    /// Sparse matrix of `d_a` from `(w1, w2, φ)` to `(f11, f12, f22, α1, α2)`
    /// nodal coefficients.
    pub fn d_matrix(&self, region: Region) -> &CsrMatrix {
        self.d_matrices[region_slot(region)].get_or_init(|| self.assemble_d(region))
    }

    fn assemble_d(&self, region: Region) -> CsrMatrix {
        let n = self.mesh.node_count(region);
        let st = self.stencil(region);
        let mut t: Vec<(u32, u32, Complex64)> = Vec::new();
        let re = |v: f64| Complex64::new(v, 0.0);
        for i in 0..n {
            let geo = &self.geometry[i];
            let gam = &geo.gamma.0;
            let row = |c: usize| (5 * i + c) as u32;
            let col = |j: usize, c: usize| (3 * j + c) as u32;
            for &(j, c) in st.row(i) {
                let j = j as usize;
                t.push((row(0), col(j, 0), re(c[0])));
                t.push((row(1), col(j, 1), re(0.5 * c[0])));
                t.push((row(1), col(j, 0), re(0.5 * c[1])));
                t.push((row(2), col(j, 1), re(c[1])));
                t.push((row(3), col(j, 2), re(c[0])));
                t.push((row(4), col(j, 2), re(c[1])));
            }
            for (r, (p, q)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                for k in 0..2 {
                    t.push((row(r), col(i, k), re(-gam[k][p][q])));
                }
                t.push((row(r), col(i, 2), geo.a * geo.g[(p, q)]));
            }
            t.push((row(3), col(i, 0), geo.a));
            t.push((row(4), col(i, 1), geo.a));
        }
        CsrMatrix::from_triplets(5 * n, 3 * n, t)
    }

    /// `d_a[w, φ] = [d^s w + a φ g, dφ + a w]` at every node of the field's
    /// region.
    pub fn apply_d_a(&self, w: &CovScalarPair) -> PairField {
        let d = self.d_matrix(w.region());
        PairField::from_flat(&self.mesh, w.region(), &d.mul_vec(w.as_flat()))
            .expect("d_a preserves the region")
    }

    /// `δ_a[f, α] = [δf - ā α, δα - ā tr f]` with `(δf)_j = g^{ik} ∇_k f_ij`
    /// and `δα = g^{ij} ∇_i α_j`.
    pub fn apply_delta_a(&self, f: &PairField) -> CovScalarPair {
        let region = f.region();
        let st = self.stencil(region);
        let vals: Vec<[Complex64; 3]> = (0..f.len())
            .into_par_iter()
            .map(|i| {
                let geo = &self.geometry[i];
                let gam = &geo.gamma.0;
                let d = st.gradient(f, i);
                let p = &f.values()[i];
                let ft = |a: usize, b: usize| p[a + b];
                let dft = |k: usize, a: usize, b: usize| d[k][a + b];
                let mut div_f = [ZERO; 2];
                for (j, dj) in div_f.iter_mut().enumerate() {
                    for ii in 0..2 {
                        for k in 0..2 {
                            let mut cov = dft(k, ii, j);
                            for m in 0..2 {
                                cov -= ft(m, j) * gam[m][k][ii] + ft(ii, m) * gam[m][k][j];
                            }
                            *dj += cov * geo.ginv[(ii, k)];
                        }
                    }
                }
                let mut div_alpha = ZERO;
                let mut trace = ZERO;
                for ii in 0..2 {
                    for j in 0..2 {
                        let mut cov = d[ii][3 + j];
                        for m in 0..2 {
                            cov -= p[3 + m] * gam[m][ii][j];
                        }
                        div_alpha += cov * geo.ginv[(ii, j)];
                        trace += ft(ii, j) * geo.ginv[(ii, j)];
                    }
                }
                let ab = geo.a.conj();
                [
                    div_f[0] - ab * p[3],
                    div_f[1] - ab * p[4],
                    div_alpha - ab * trace,
                ]
            })
            .collect();
        CovScalarPair::from_values(&self.mesh, region, vals).expect("δ_a preserves the region")
    }

    pub fn pair_inner(&self, f: &PairField, g: &PairField) -> Result<Complex64> {
        self.quadrature(f.region()).inner::<5, PairKind>(f, g)
    }

    pub fn cov_inner(&self, f: &CovScalarPair, g: &CovScalarPair) -> Result<Complex64> {
        self.quadrature(f.region()).inner::<3, CovKind>(f, g)
    }

    pub fn pair_norm(&self, f: &PairField) -> Result<f64> {
        self.quadrature(f.region()).pair_norm(f)
    }

    pub fn cov_norm(&self, f: &CovScalarPair) -> Result<f64> {
        self.quadrature(f.region()).cov_norm(f)
    }

    pub fn pair_h1_norm(&self, f: &PairField) -> Result<f64> {
        self.quadrature(f.region()).pair_h1_norm(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::geometry::{AttenuationModel, MetricModel};

    fn disc(h: f64, model: ModelPair) -> Discretization {
        Discretization::new(Arc::new(DiskMesh::new(h).unwrap()), model)
    }

    fn bump_model() -> ModelPair {
        ModelPair::new(
            MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
            AttenuationModel::default_bump(),
        )
    }

    /// Smooth bump supported in `|x| <= radius`.
    fn compact_bump(x: &Vec2, center: Vec2, radius: f64) -> f64 {
        let r2 = (x - center).norm_squared() / (radius * radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - r2).powi(4)
        }
    }

    #[test]
    fn gradient_is_exact_for_quadratics_everywhere() {
        let mesh = DiskMesh::new(1.0 / 16.0).unwrap();
        let st = GradientStencil::new(&mesh, Region::Inner);
        let mesh = Arc::new(mesh);
        let f = CovScalarPair::from_fn(&mesh, Region::Inner, |x| {
            [
                c64(x[0] * x[1], 0.0),
                c64(x[0] * x[0] - 2.0 * x[1], 0.0),
                c64(3.0 * x[1] * x[1], 1.0),
            ]
        });
        for i in 0..f.len() {
            let x = mesh.node(i);
            let d = st.gradient(&f, i);
            let boundary = mesh.is_boundary_node(Region::Inner, i);
            let tol = 1e-10;
            assert!(
                (d[0][0] - x[1]).norm() < tol && (d[1][0] - x[0]).norm() < tol,
                "{i} {boundary}"
            );
            assert!((d[0][1] - 2.0 * x[0]).norm() < tol && (d[1][1] + 2.0).norm() < tol);
            assert!(d[0][2].norm() < tol && (d[1][2] - 6.0 * x[1]).norm() < tol);
        }
    }

    #[test]
    fn constant_pair_is_annihilated_in_flat_unattenuated_case() {
        let d = disc(1.0 / 16.0, ModelPair::euclidean_unattenuated());
        let w = CovScalarPair::from_fn(d.mesh(), Region::Inner, |_| {
            [c64(0.3, 0.1), c64(-1.0, 0.0), c64(2.0, 0.0)]
        });
        assert!(d.apply_d_a(&w).max_abs() < 1e-11);
    }

    #[test]
    fn unit_attenuation_reads_off_metric() {
        let model = ModelPair::new(
            MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
            AttenuationModel::constant(c64(1.0, 0.0)),
        );
        let d = disc(1.0 / 16.0, model.clone());
        let w = CovScalarPair::from_fn(d.mesh(), Region::Inner, |_| {
            [c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]
        });
        let f = d.apply_d_a(&w);
        let g = PairField::metric_pair(d.mesh(), Region::Inner, &model.metric);
        assert!((&f - &g).max_abs() < 1e-12);
    }

    #[test]
    fn symmetric_gradient_of_quadratic_one_form() {
        // w = (0, (x¹)²): d^s w has f11 = 0, f12 = x¹, f22 = 0.
        let d = disc(1.0 / 16.0, ModelPair::euclidean_unattenuated());
        let w = CovScalarPair::from_fn(d.mesh(), Region::Inner, |x| {
            [c64(0.0, 0.0), c64(x[0] * x[0], 0.0), c64(0.0, 0.0)]
        });
        let f = d.apply_d_a(&w);
        for (i, p) in f.values().iter().enumerate() {
            let x = d.mesh().node(i);
            assert!(p[0].norm() < 1e-10 && p[2].norm() < 1e-10);
            assert!((p[1] - x[0]).norm() < 1e-10);
            assert!(p[3].norm() < 1e-10 && p[4].norm() < 1e-10);
        }
    }

    #[test]
    fn metric_is_divergence_free() {
        let model = ModelPair::new(
            MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
            AttenuationModel::zero(),
        );
        let errs: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0]
            .iter()
            .map(|&h| {
                let d = disc(h, model.clone());
                let g = PairField::metric_pair(d.mesh(), Region::Inner, &model.metric);
                let r = d.apply_delta_a(&g);
                r.max_abs()
            })
            .collect();
        assert!(errs[1] < 5e-3 && errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn trace_term_with_unit_attenuation() {
        let model = ModelPair::new(
            MetricModel::euclidean(),
            AttenuationModel::constant(c64(1.0, 0.0)),
        );
        let d = disc(1.0 / 16.0, model.clone());
        let g = PairField::metric_pair(d.mesh(), Region::Inner, &model.metric);
        let r = d.apply_delta_a(&g);
        for v in r.values() {
            assert!(v[0].norm() < 1e-12 && v[1].norm() < 1e-12);
            assert!((v[2] + 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn integration_by_parts_for_compact_support() {
        let d = disc(1.0 / 32.0, bump_model());
        let c1 = Vec2::new(0.1, -0.2);
        let c2 = Vec2::new(-0.15, 0.1);
        let w = CovScalarPair::from_fn(d.mesh(), Region::Inner, |x| {
            let b = compact_bump(x, c1, 0.5);
            [c64(b, 0.3 * b), c64(-0.5 * b, 0.0), c64(0.0, b)]
        });
        let f = PairField::from_fn(d.mesh(), Region::Inner, |x| {
            let b = compact_bump(x, c2, 0.5);
            [
                c64(b * x[0], 0.0),
                c64(0.2 * b, 0.1),
                c64(b, -b),
                c64(0.0, 0.5 * b),
                c64(b * x[1], 0.0),
            ]
        });
        let lhs = d.cov_inner(&d.apply_delta_a(&f), &w).unwrap();
        let rhs = d.pair_inner(&f, &d.apply_d_a(&w)).unwrap();
        let scale = d.pair_norm(&f).unwrap() * d.cov_norm(&w).unwrap();
        assert!(
            (lhs + rhs).norm() <= 1e-3 * scale,
            "{}",
            (lhs + rhs).norm() / scale
        );
    }
}
