use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{DiskMesh, Location};
use crate::error::{GeoError, Result};
use crate::geometry::{MetricModel, Region};
use crate::Vec2;

pub const PAIR_LABELS: [&str; 5] = ["f11", "f12", "f22", "alpha1", "alpha2"];
pub const COV_LABELS: [&str; 3] = ["w1", "w2", "phi"];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex nodal field with `N` Cartesian components per node, defined on
/// the nodes of one region of a mesh.
#[derive(Debug, Clone)]
pub struct Field<const N: usize> {
    mesh: Arc<DiskMesh>,
    region: Region,
    values: Vec<[Complex64; N]>,
}

/// Symmetric 2-tensor and 1-form: `(f11, f12, f22, α1, α2)`.
pub type PairField = Field<5>;
/// 1-form and scalar: `(w1, w2, φ)`.
pub type CovScalarPair = Field<3>;

impl<const N: usize> Field<N> {
    pub fn zeros(mesh: &Arc<DiskMesh>, region: Region) -> Self {
        Field {
            mesh: mesh.clone(),
            region,
            values: vec![[ZERO; N]; mesh.node_count(region)],
        }
    }

    /// Samples `f` at every node of `region`.
    pub fn from_fn(
        mesh: &Arc<DiskMesh>,
        region: Region,
        f: impl Fn(&Vec2) -> [Complex64; N],
    ) -> Self {
        let n = mesh.node_count(region);
        Field {
            mesh: mesh.clone(),
            region,
            values: mesh.nodes()[..n].iter().map(f).collect(),
        }
    }

    pub fn from_values(
        mesh: &Arc<DiskMesh>,
        region: Region,
        values: Vec<[Complex64; N]>,
    ) -> Result<Self> {
        if values.len() != mesh.node_count(region) {
            return Err(GeoError::Contract(format!(
                "expected {} nodal values, got {}",
                mesh.node_count(region),
                values.len()
            )));
        }
        Ok(Field {
            mesh: mesh.clone(),
            region,
            values,
        })
    }

    pub fn from_flat(mesh: &Arc<DiskMesh>, region: Region, flat: &[Complex64]) -> Result<Self> {
        if !flat.len().is_multiple_of(N) {
            return Err(GeoError::Contract(
                "flat length is not a multiple of the component count".into(),
            ));
        }
        let values = flat
            .chunks_exact(N)
            .map(|c| {
                let mut a = [ZERO; N];
                a.copy_from_slice(c);
                a
            })
            .collect();
        Self::from_values(mesh, region, values)
    }

    pub fn mesh(&self) -> &Arc<DiskMesh> {
        &self.mesh
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn values(&self) -> &[[Complex64; N]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[Complex64; N]] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_flat(&self) -> &[Complex64] {
        self.values.as_flattened()
    }

    pub fn as_flat_mut(&mut self) -> &mut [Complex64] {
        self.values.as_flattened_mut()
    }

    /// Errors unless `other` lives on the same mesh and region.
    pub fn check_same_space(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.mesh, &other.mesh) || self.region != other.region {
            return Err(GeoError::Contract(
                "fields live on different meshes or regions".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn interpolate_at(&self, loc: &Location) -> [Complex64; N] {
        let t = self.mesh.triangles()[loc.tri as usize];
        let mut out = [ZERO; N];
        for (k, &node) in t.iter().enumerate() {
            let v = &self.values[node as usize];
            let b = loc.bary[k];
            for c in 0..N {
                out[c] += v[c] * b;
            }
        }
        out
    }

    /// Barycentric interpolation at `x`.
    pub fn interpolate(&self, x: &Vec2) -> Result<[Complex64; N]> {
        let loc = self.mesh.locate(x, self.region)?;
        Ok(self.interpolate_at(&loc))
    }

    /// Zero extension to a larger region.
    pub fn extend_by_zero(&self, target: Region) -> Result<Self> {
        let n = self.mesh.node_count(target);
        if n < self.values.len() {
            return Err(GeoError::Contract(
                "extension target is smaller than the field region".into(),
            ));
        }
        let mut values = self.values.clone();
        values.resize(n, [ZERO; N]);
        Ok(Field {
            mesh: self.mesh.clone(),
            region: target,
            values,
        })
    }

    /// Restriction to a smaller region.
    pub fn restrict(&self, target: Region) -> Result<Self> {
        let n = self.mesh.node_count(target);
        if n > self.values.len() {
            return Err(GeoError::Contract(
                "restriction target is larger than the field region".into(),
            ));
        }
        Ok(Field {
            mesh: self.mesh.clone(),
            region: target,
            values: self.values[..n].to_vec(),
        })
    }

    /// Sets the values on the boundary circle of the field's region to zero.
    pub fn zero_boundary(&mut self) {
        for i in self.mesh.boundary_nodes(self.region) {
            self.values[i] = [ZERO; N];
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().flatten().for_each(|z| *z *= c);
        out
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: Complex64, other: &Self) {
        debug_assert!(self.check_same_space(other).is_ok());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for k in 0..N {
                a[k] += c * b[k];
            }
        }
    }

    pub fn map_nodes(&self, f: impl Fn(usize, &[Complex64; N]) -> [Complex64; N]) -> Self {
        Field {
            mesh: self.mesh.clone(),
            region: self.region,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| f(i, v))
                .collect(),
        }
    }

    /// Complex white Gaussian nodal noise smoothed by `passes` Jacobi sweeps.
    pub fn smoothed_noise<R: Rng + ?Sized>(
        mesh: &Arc<DiskMesh>,
        region: Region,
        rng: &mut R,
        passes: usize,
    ) -> Self {
        let n = mesh.node_count(region);
        let values = (0..n)
            .map(|_| {
                std::array::from_fn(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im)
                })
            })
            .collect();
        Field {
            mesh: mesh.clone(),
            region,
            values,
        }
        .smooth(passes)
    }

    /// `passes` sweeps of `u_i <- (u_i + Σ_j u_j) / (1 + deg i)` over the
    /// neighbors inside the region.
    pub fn smooth(&self, passes: usize) -> Self {
        let n = self.values.len();
        let mut cur = self.values.clone();
        for _ in 0..passes {
            cur = (0..n)
                .map(|i| {
                    let mut acc = cur[i];
                    let mut count = 1.0;
                    for &j in self.mesh.neighbors(i) {
                        if (j as usize) < n {
                            for k in 0..N {
                                acc[k] += cur[j as usize][k];
                            }
                            count += 1.0;
                        }
                    }
                    acc.map(|z| z / count)
                })
                .collect();
        }
        Field {
            mesh: self.mesh.clone(),
            region: self.region,
            values: cur,
        }
    }

    /// Largest component modulus over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Euclidean norm of the nodal coefficient vector.
    pub fn coefficient_norm(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<const N: usize> Add for &Field<N> {
    type Output = Field<N>;
    fn add(self, rhs: &Field<N>) -> Field<N> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl<const N: usize> Sub for &Field<N> {
    type Output = Field<N>;
    fn sub(self, rhs: &Field<N>) -> Field<N> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), rhs);
        out
    }
}

impl<const N: usize> Mul<Complex64> for &Field<N> {
    type Output = Field<N>;
    fn mul(self, c: Complex64) -> Field<N> {
        self.scale(c)
    }
}

/// `f_ij v^i v^j + α_j v^j` for one coefficient vector.
#[inline]
pub fn sphere_value(p: &[Complex64; 5], v: &Vec2) -> Complex64 {
    p[0] * (v[0] * v[0])
        + p[1] * (2.0 * v[0] * v[1])
        + p[2] * (v[1] * v[1])
        + p[3] * v[0]
        + p[4] * v[1]
}

/// Coefficients `e(v)` with `sphere_value(p, v) = Σ_c p_c e_c(v)`.
#[inline]
pub fn sphere_weights(v: &Vec2) -> [f64; 5] {
    [v[0] * v[0], 2.0 * v[0] * v[1], v[1] * v[1], v[0], v[1]]
}

impl PairField {
    /// `f_ij(x) v^i v^j + α_j(x) v^j` with interpolated components.
    pub fn eval_on_sphere(&self, x: &Vec2, v: &Vec2) -> Result<Complex64> {
        Ok(sphere_value(&self.interpolate(x)?, v))
    }

    /// The pair `[g, 0]` sampled at the nodes.
    pub fn metric_pair(mesh: &Arc<DiskMesh>, region: Region, metric: &MetricModel) -> Self {
        Field::from_fn(mesh, region, |x| {
            let g = metric.metric(x);
            [
                Complex64::new(g[(0, 0)], 0.0),
                Complex64::new(g[(0, 1)], 0.0),
                Complex64::new(g[(1, 1)], 0.0),
                ZERO,
                ZERO,
            ]
        })
    }
}

impl CovScalarPair {
    /// The pair `[φ g, w]`, whose transform is `𝓘_a[w, φ]`.
    pub fn embed(&self, metric: &MetricModel) -> PairField {
        let nodes = self.mesh.nodes();
        Field {
            mesh: self.mesh.clone(),
            region: self.region,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, &[w1, w2, phi])| {
                    let g = metric.metric(&nodes[i]);
                    [phi * g[(0, 0)], phi * g[(0, 1)], phi * g[(1, 1)], w1, w2]
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn mesh() -> Arc<DiskMesh> {
        Arc::new(DiskMesh::new(1.0 / 16.0).unwrap())
    }

    #[test]
    fn metric_pair_has_unit_sphere_value() {
        let m = mesh();
        let metric = MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2);
        let f = PairField::metric_pair(&m, Region::Inner, &metric);
        let x = Vec2::new(0.2, -0.3);
        let v = Vec2::new(0.6, 0.8);
        let v = v / metric.norm(&x, &v);
        // P1 interpolation of g is only approximately g(x).
        assert!((f.eval_on_sphere(&x, &v).unwrap() - 1.0).norm() < 1e-2);
        let e = PairField::metric_pair(&m, Region::Inner, &MetricModel::euclidean());
        assert!((e.eval_on_sphere(&x, &Vec2::new(0.6, 0.8)).unwrap() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn one_form_dx1_reads_cosine() {
        let m = mesh();
        let f = PairField::from_fn(&m, Region::Inner, |_| {
            [ZERO, ZERO, ZERO, c64(1.0, 0.0), ZERO]
        });
        let th = 0.7f64;
        let val = f
            .eval_on_sphere(&Vec2::new(0.1, 0.1), &Vec2::new(th.cos(), th.sin()))
            .unwrap();
        assert!((val - th.cos()).norm() < 1e-14);
    }

    #[test]
    fn sphere_value_matches_componentwise_sum() {
        let m = mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vals = (0..m.node_count(Region::Extended))
            .map(|_| {
                std::array::from_fn(|_| {
                    c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        let f = PairField::from_values(&m, Region::Extended, vals).unwrap();
        for _ in 0..20 {
            let x = Vec2::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
            let th: f64 = rng.random_range(0.0..TAU);
            let v = Vec2::new(th.cos(), th.sin());
            let p = f.interpolate(&x).unwrap();
            let mut s = ZERO;
            let full = [[p[0], p[1]], [p[1], p[2]]];
            for i in 0..2 {
                for j in 0..2 {
                    s += full[i][j] * v[i] * v[j];
                }
                s += p[3 + i] * v[i];
            }
            assert!((s - f.eval_on_sphere(&x, &v).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let m = mesh();
        let f = CovScalarPair::from_fn(&m, Region::Extended, |x| {
            [
                c64(x[0], 0.0),
                c64(0.0, x[1]),
                c64(1.0 + x[0] - 2.0 * x[1], 0.5),
            ]
        });
        let x = Vec2::new(0.313, -0.77);
        let v = f.interpolate(&x).unwrap();
        assert!((v[0] - x[0]).norm() < 1e-13);
        assert!((v[1] - c64(0.0, x[1])).norm() < 1e-13);
        assert!((v[2] - c64(1.0 + x[0] - 2.0 * x[1], 0.5)).norm() < 1e-13);
        for i in 0..m.node_count(Region::Extended) {
            let v = f.interpolate(&m.node(i)).unwrap();
            for c in 0..3 {
                assert!((v[c] - f.values()[i][c]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_extension_support() {
        let m = mesh();
        let f = PairField::from_fn(&m, Region::Inner, |_| [c64(1.0, 0.0); 5]);
        let e = f.extend_by_zero(Region::Extended).unwrap();
        assert_eq!(e.interpolate(&Vec2::new(1.15, 0.0)).unwrap(), [ZERO; 5]);
        let z = PairField::zeros(&m, Region::Inner)
            .extend_by_zero(Region::Extended)
            .unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert_eq!(e.restrict(Region::Inner).unwrap().values(), f.values());
    }
}
