//! Three-point triangle quadrature of metric contractions.

use std::sync::Arc;

use nalgebra::{Matrix3, SMatrix};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{DiskMesh, Field};
use crate::error::Result;
use crate::geometry::{MetricModel, Region};
use crate::linalg::{ordered_sum, CsrMatrix};
use crate::{Mat2, Vec2};

pub type Mat5 = SMatrix<f64, 5, 5>;

const RULE: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub tri: u32,
    pub bary: [f64; 3],
    pub x: Vec2,
    /// `|T| / 3 · √det g(x)`
    pub weight: f64,
    pub inv_metric: Mat2,
    /// Gram matrix of `⟨f, h⟩_g + ⟨α, β⟩_g` on `(f11, f12, f22, α1, α2)`.
    pub pair_metric: Mat5,
    /// Gram matrix of `⟨w, v⟩_g + φ ψ` on `(w1, w2, φ)`.
    pub cov_metric: Matrix3<f64>,
}

/// Storage slot of the symmetric index pair `(i, j)`.
#[inline]
pub fn sym_index(i: usize, j: usize) -> usize {
    i + j
}

pub fn pair_gram(ginv: &Mat2) -> Mat5 {
    let mut q = Mat5::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    q[(sym_index(i, j), sym_index(k, l))] += ginv[(i, k)] * ginv[(j, l)];
                }
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            q[(3 + i, 3 + j)] = ginv[(i, j)];
        }
    }
    q
}

pub fn cov_gram(ginv: &Mat2) -> Matrix3<f64> {
    let mut q = Matrix3::zeros();
    for i in 0..2 {
        for j in 0..2 {
            q[(i, j)] = ginv[(i, j)];
        }
    }
    q[(2, 2)] = 1.0;
    q
}

/// Quadrature over the triangles of one region.
#[derive(Debug)]
pub struct Quadrature {
    mesh: Arc<DiskMesh>,
    region: Region,
    points: Vec<QuadPoint>,
}

/// Fields whose pointwise inner product has a Gram matrix.
pub trait Contraction<const N: usize> {
    fn gram(qp: &QuadPoint) -> SMatrix<f64, N, N>;
}

pub struct PairKind;
pub struct CovKind;

impl Contraction<5> for PairKind {
    fn gram(qp: &QuadPoint) -> Mat5 {
        qp.pair_metric
    }
}

impl Contraction<3> for CovKind {
    fn gram(qp: &QuadPoint) -> Matrix3<f64> {
        qp.cov_metric
    }
}

#[inline]
fn quad_form<const N: usize>(
    q: &SMatrix<f64, N, N>,
    a: &[Complex64; N],
    b: &[Complex64; N],
) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..N {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..N {
            row += b[j].conj() * q[(i, j)];
        }
        s += a[i] * row;
    }
    s
}

impl Quadrature {
    pub fn new(mesh: &Arc<DiskMesh>, metric: &MetricModel, region: Region) -> Self {
        let nt = mesh.triangle_count(region);
        let points = (0..nt)
            .into_par_iter()
            .flat_map_iter(|t| {
                let tri = mesh.triangles()[t];
                let p = tri.map(|i| mesh.node(i as usize));
                let area = mesh.triangle_area(t);
                RULE.iter().map(move |b| {
                    let x = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
                    let g = metric.metric(&x);
                    let ginv = g.try_inverse().expect("metric is positive definite");
                    QuadPoint {
                        tri: t as u32,
                        bary: *b,
                        x,
                        weight: area / 3.0 * g.determinant().sqrt(),
                        inv_metric: ginv,
                        pair_metric: pair_gram(&ginv),
                        cov_metric: cov_gram(&ginv),
                    }
                })
            })
            .collect();
        Quadrature {
            mesh: mesh.clone(),
            region,
            points,
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn points(&self) -> &[QuadPoint] {
        &self.points
    }

    #[inline]
    fn eval<const N: usize>(&self, f: &Field<N>, qp: &QuadPoint) -> [Complex64; N] {
        let t = self.mesh.triangles()[qp.tri as usize];
        let mut out = [Complex64::new(0.0, 0.0); N];
        for k in 0..3 {
            let v = &f.values()[t[k] as usize];
            for c in 0..N {
                out[c] += v[c] * qp.bary[k];
            }
        }
        out
    }

    fn check<const N: usize>(&self, f: &Field<N>) -> Result<()> {
        if !Arc::ptr_eq(f.mesh(), &self.mesh) || f.len() < self.mesh.node_count(self.region) {
            return Err(crate::GeoError::Contract(
                "field does not cover the quadrature region".into(),
            ));
        }
        Ok(())
    }

    /// `(F, G)_{L²} = ∫ ⟨F, Ḡ⟩_g dVol_g`
    pub fn inner<const N: usize, K: Contraction<N>>(
        &self,
        f: &Field<N>,
        g: &Field<N>,
    ) -> Result<Complex64> {
        f.check_same_space(g)?;
        self.check(f)?;
        Ok(ordered_sum(self.points.len(), |k| {
            let qp = &self.points[k];
            quad_form(&K::gram(qp), &self.eval(f, qp), &self.eval(g, qp)) * qp.weight
        }))
    }

    pub fn pair_inner(&self, f: &Field<5>, g: &Field<5>) -> Result<Complex64> {
        self.inner::<5, PairKind>(f, g)
    }

    pub fn cov_inner(&self, f: &Field<3>, g: &Field<3>) -> Result<Complex64> {
        self.inner::<3, CovKind>(f, g)
    }

    pub fn pair_norm(&self, f: &Field<5>) -> Result<f64> {
        Ok(self.pair_inner(f, f)?.re.max(0.0).sqrt())
    }

    pub fn cov_norm(&self, f: &Field<3>) -> Result<f64> {
        Ok(self.cov_inner(f, f)?.re.max(0.0).sqrt())
    }

    /// Broken-gradient H¹ norm `(‖F‖² + ∫ g^{kl} ⟨∂_k F, ∂_l F̄⟩_g)^{1/2}`.
    pub fn h1_norm<const N: usize, K: Contraction<N>>(&self, f: &Field<N>) -> Result<f64> {
        self.check(f)?;
        let semi: f64 = ordered_sum(self.points.len(), |idx| {
            let qp = &self.points[idx];
            let t = qp.tri as usize;
            let tri = self.mesh.triangles()[t];
            let grads = self.mesh.barycentric_gradients(t);
            let mut d = [[Complex64::new(0.0, 0.0); N]; 2];
            for k in 0..3 {
                let v = &f.values()[tri[k] as usize];
                for c in 0..N {
                    d[0][c] += v[c] * grads[k][0];
                    d[1][c] += v[c] * grads[k][1];
                }
            }
            let q = K::gram(qp);
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    s += qp.inv_metric[(k, l)] * quad_form(&q, &d[k], &d[l]).re;
                }
            }
            s * qp.weight
        });
        let l2 = self.inner::<N, K>(f, f)?.re;
        Ok((l2 + semi).max(0.0).sqrt())
    }

    pub fn pair_h1_norm(&self, f: &Field<5>) -> Result<f64> {
        self.h1_norm::<5, PairKind>(f)
    }

    /// `Σ_q w_q φ_a(x_q) Q_q G(x_q)` for every node `a` of the region:
    /// the load vector pairing nodal fields with the function `g`.
    pub fn load<const N: usize, K: Contraction<N>>(
        &self,
        g: impl Fn(&QuadPoint) -> [Complex64; N] + Sync,
    ) -> Vec<Complex64> {
        let n = self.mesh.node_count(self.region);
        let mut out = vec![Complex64::new(0.0, 0.0); n * N];
        let contributions: Vec<[Complex64; N]> = self
            .points
            .par_iter()
            .map(|qp| {
                let v = g(qp);
                let q = K::gram(qp);
                let mut qv = [Complex64::new(0.0, 0.0); N];
                for i in 0..N {
                    for j in 0..N {
                        qv[i] += v[j] * q[(i, j)];
                    }
                }
                qv.map(|z| z * qp.weight)
            })
            .collect();
        for (qp, qv) in self.points.iter().zip(&contributions) {
            let t = self.mesh.triangles()[qp.tri as usize];
            for k in 0..3 {
                let base = t[k] as usize * N;
                for c in 0..N {
                    out[base + c] += qv[c] * qp.bary[k];
                }
            }
        }
        out
    }

    /// Mass matrix `M` with `(F, G)_{L²} = G^H M F` for nodal coefficient
    /// vectors.
    pub fn mass<const N: usize, K: Contraction<N>>(&self) -> CsrMatrix {
        let n = self.mesh.node_count(self.region);
        let mut t = Vec::with_capacity(self.points.len() * 9 * N * N);
        for qp in &self.points {
            let tri = self.mesh.triangles()[qp.tri as usize];
            let q = K::gram(qp);
            for a in 0..3 {
                for b in 0..3 {
                    let s = qp.weight * qp.bary[a] * qp.bary[b];
                    for i in 0..N {
                        for j in 0..N {
                            let v = q[(i, j)] * s;
                            if v != 0.0 {
                                t.push((
                                    (tri[a] as usize * N + i) as u32,
                                    (tri[b] as usize * N + j) as u32,
                                    Complex64::new(v, 0.0),
                                ));
                            }
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n * N, n * N, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::mesh::{CovScalarPair, PairField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_pair(mesh: &Arc<DiskMesh>, seed: u64) -> PairField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..mesh.node_count(Region::Inner))
            .map(|_| {
                std::array::from_fn(|_| {
                    c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        PairField::from_values(mesh, Region::Inner, vals).unwrap()
    }

    #[test]
    fn metric_pair_norm_is_twice_the_area() {
        let mesh = Arc::new(DiskMesh::new(1.0 / 32.0).unwrap());
        let q = Quadrature::new(&mesh, &MetricModel::euclidean(), Region::Inner);
        let g = PairField::metric_pair(&mesh, Region::Inner, &MetricModel::euclidean());
        let n2 = q.pair_inner(&g, &g).unwrap().re;
        assert!((n2 - 2.0 * PI).abs() < 1e-3, "{n2}");
    }

    #[test]
    fn linear_component_norm_matches_polar_integral() {
        let mesh = Arc::new(DiskMesh::new(1.0 / 32.0).unwrap());
        let q = Quadrature::new(&mesh, &MetricModel::euclidean(), Region::Inner);
        let f = PairField::from_fn(&mesh, Region::Inner, |x| {
            [
                c64(x[0], 0.0),
                c64(0.0, 0.0),
                c64(0.0, 0.0),
                c64(0.0, 0.0),
                c64(0.0, 0.0),
            ]
        });
        assert!((q.pair_norm(&f).unwrap() - (PI / 4.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn inner_product_is_sesquilinear_and_hermitian() {
        let mesh = Arc::new(DiskMesh::new(1.0 / 16.0).unwrap());
        let metric = MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2);
        let q = Quadrature::new(&mesh, &metric, Region::Inner);
        let (f, g, h) = (
            random_pair(&mesh, 1),
            random_pair(&mesh, 2),
            random_pair(&mesh, 3),
        );
        let c = c64(0.3, -1.2);
        let fg = q.pair_inner(&f, &g).unwrap();
        let gf = q.pair_inner(&g, &f).unwrap();
        assert!((fg - gf.conj()).norm() < 1e-14 * fg.norm().max(1.0) * 10.0);
        let lhs = q.pair_inner(&(&(&f * c) + &h), &g).unwrap();
        let rhs = c * fg + q.pair_inner(&h, &g).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
        let lhs = q.pair_inner(&f, &(&g * c)).unwrap();
        assert!((lhs - c.conj() * fg).norm() < 1e-13);
    }

    #[test]
    fn mass_matrix_reproduces_inner_product() {
        let mesh = Arc::new(DiskMesh::new(1.0 / 8.0).unwrap());
        let metric = MetricModel::conformal_bump([0.1, 0.0], 0.2, 0.3);
        let q = Quadrature::new(&mesh, &metric, Region::Inner);
        let (f, g) = (random_pair(&mesh, 4), random_pair(&mesh, 5));
        let m = q.mass::<5, PairKind>();
        let mf = m.mul_vec(f.as_flat());
        let via_mass = crate::linalg::dot(&mf, g.as_flat());
        assert!((via_mass - q.pair_inner(&f, &g).unwrap()).norm() < 1e-12);
        let w = CovScalarPair::from_fn(&mesh, Region::Inner, |x| {
            [c64(x[0], 1.0), c64(0.0, x[1]), c64(2.0, 0.0)]
        });
        let m3 = q.mass::<3, CovKind>();
        let a = crate::linalg::dot(&m3.mul_vec(w.as_flat()), w.as_flat());
        assert!((a - q.cov_inner(&w, &w).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn h1_norm_of_linear_field() {
        // ‖x¹‖²_{H¹} = π/4 + π on the unit disk.
        let mesh = Arc::new(DiskMesh::new(1.0 / 32.0).unwrap());
        let q = Quadrature::new(&mesh, &MetricModel::euclidean(), Region::Inner);
        let f = CovScalarPair::from_fn(&mesh, Region::Inner, |x| {
            [c64(0.0, 0.0), c64(0.0, 0.0), c64(x[0], 0.0)]
        });
        let h1 = q.h1_norm::<3, CovKind>(&f).unwrap();
        assert!((h1 * h1 - (PI / 4.0 + PI)).abs() < 2e-3);
    }
}
