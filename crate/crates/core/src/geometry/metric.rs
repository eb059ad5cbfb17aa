//! Closed-form metric families on the extended disk.
//!
//! Every metric here has the form
//! `g(x) = exp(2 λ(x)) δ + Σ_k b_k(x) S_k`
//! where `λ` and each `b_k` are Gaussian bumps and `S_k` constant symmetric
//! matrices. Values, first and second derivatives are exact.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::{Mat2, Vec2};

/// `amplitude * exp(-|x - center|^2 / width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub width: f64,
}

impl Bump {
    pub fn new(center: [f64; 2], amplitude: f64, width: f64) -> Self {
        Bump {
            center,
            amplitude,
            width,
        }
    }

    #[inline]
    pub fn value(&self, x: &Vec2) -> f64 {
        let d = x - Vec2::new(self.center[0], self.center[1]);
        self.amplitude * (-d.norm_squared() / self.width).exp()
    }

    /// Value, gradient and Hessian.
    #[inline]
    pub fn jet(&self, x: &Vec2) -> (f64, Vec2, Mat2) {
        let d = x - Vec2::new(self.center[0], self.center[1]);
        let b = self.amplitude * (-d.norm_squared() / self.width).exp();
        let w = self.width;
        let grad = d * (-2.0 * b / w);
        let hess = (d * d.transpose()) * (4.0 * b / (w * w)) - Mat2::identity() * (2.0 * b / w);
        (b, grad, hess)
    }

    /// Value and gradient only.
    #[inline]
    pub fn jet1(&self, x: &Vec2) -> (f64, Vec2) {
        let d = x - Vec2::new(self.center[0], self.center[1]);
        let b = self.amplitude * (-d.norm_squared() / self.width).exp();
        (b, d * (-2.0 * b / self.width))
    }
}

/// A bump-weighted constant symmetric tensor `b(x) S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorBump {
    pub bump: Bump,
    /// `[S_11, S_12, S_22]`
    pub tensor: [f64; 3],
}

impl TensorBump {
    fn matrix(&self) -> Mat2 {
        let [a, b, c] = self.tensor;
        Mat2::new(a, b, b, c)
    }

    pub fn scaled(&self, s: f64) -> TensorBump {
        TensorBump {
            bump: self.bump,
            tensor: [self.tensor[0] * s, self.tensor[1] * s, self.tensor[2] * s],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricFamily {
    Euclidean,
    ConformalBump,
    GenericAnalytic,
}

/// Metric and its derivatives at a point: `dg[k] = ∂_k g`, `ddg[k][l] = ∂_k ∂_l g`.
#[derive(Debug, Clone, Copy)]
pub struct MetricJet {
    pub g: Mat2,
    pub dg: [Mat2; 2],
    pub ddg: [[Mat2; 2]; 2],
}

/// Christoffel symbols of the second kind, `gamma[k][i][j] = Γ^k_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffel(pub [[[f64; 2]; 2]; 2]);

impl Christoffel {
    pub fn zero() -> Self {
        Christoffel([[[0.0; 2]; 2]; 2])
    }

    /// `Γ^k_ij v^i v^j`
    #[inline]
    pub fn contract(&self, v: &Vec2) -> Vec2 {
        let g = &self.0;
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            *o = g[k][0][0] * v[0] * v[0]
                + 2.0 * g[k][0][1] * v[0] * v[1]
                + g[k][1][1] * v[1] * v[1];
        }
        Vec2::new(out[0], out[1])
    }

    /// `Γ^k_ij u^i v^j`
    #[inline]
    pub fn bilinear(&self, u: &Vec2, v: &Vec2) -> Vec2 {
        let g = &self.0;
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += g[k][i][j] * u[i] * v[j];
                }
            }
            *o = s;
        }
        Vec2::new(out[0], out[1])
    }
}

/// Analytic Riemannian metric on the extended disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    pub family: MetricFamily,
    /// Conformal exponent `λ`; the metric carries `exp(2λ) δ`.
    pub conformal: Option<Bump>,
    pub anisotropic: Vec<TensorBump>,
    /// Radius of the disk on which the model may be evaluated.
    pub extent: f64,
}

/// Default radius of the extended disk.
pub const DEFAULT_EXTENT: f64 = 1.2;

impl MetricModel {
    pub fn euclidean() -> Self {
        MetricModel {
            family: MetricFamily::Euclidean,
            conformal: None,
            anisotropic: Vec::new(),
            extent: DEFAULT_EXTENT,
        }
    }

    /// `g = exp(2 λ) δ` with `λ(x) = amplitude * exp(-|x - center|^2 / width)`.
    pub fn conformal_bump(center: [f64; 2], amplitude: f64, width: f64) -> Self {
        MetricModel {
            family: MetricFamily::ConformalBump,
            conformal: Some(Bump::new(center, amplitude, width)),
            anisotropic: Vec::new(),
            extent: DEFAULT_EXTENT,
        }
    }

    /// Conformal bump plus an anisotropic tensor bump.
    pub fn generic_analytic(conformal: Bump, tensor: TensorBump) -> Self {
        MetricModel {
            family: MetricFamily::GenericAnalytic,
            conformal: Some(conformal),
            anisotropic: vec![tensor],
            extent: DEFAULT_EXTENT,
        }
    }

    /// Adds `eps * direction` to the metric.
    pub fn perturbed(&self, direction: &TensorBump, eps: f64) -> Self {
        let mut out = self.clone();
        if eps != 0.0 {
            out.anisotropic.push(direction.scaled(eps));
        }
        out
    }

    pub fn with_extent(mut self, extent: f64) -> Self {
        self.extent = extent;
        self
    }

    pub fn is_flat(&self) -> bool {
        self.conformal.is_none() && self.anisotropic.is_empty()
    }

    fn check(&self, x: &Vec2) -> Result<()> {
        if !(x.norm() <= self.extent + 1e-9) || !x.iter().all(|c| c.is_finite()) {
            return Err(GeoError::OutsideDomain {
                x: x[0],
                y: x[1],
                radius: self.extent,
                what: "extended disk",
            });
        }
        Ok(())
    }

    /// Metric tensor at `x`, checked against the extended disk.
    pub fn metric_at(&self, x: &Vec2) -> Result<Mat2> {
        self.check(x)?;
        Ok(self.metric(x))
    }

    /// Metric tensor without a domain check.
    #[inline]
    pub fn metric(&self, x: &Vec2) -> Mat2 {
        let mut g = match &self.conformal {
            Some(b) => Mat2::identity() * (2.0 * b.value(x)).exp(),
            None => Mat2::identity(),
        };
        for t in &self.anisotropic {
            g += t.matrix() * t.bump.value(x);
        }
        g
    }

    /// Metric with first derivatives.
    #[inline]
    pub fn metric_jet1(&self, x: &Vec2) -> (Mat2, [Mat2; 2]) {
        let mut g = Mat2::identity();
        let mut dg = [Mat2::zeros(); 2];
        if let Some(b) = &self.conformal {
            let (l, dl) = b.jet1(x);
            let e = (2.0 * l).exp();
            g = Mat2::identity() * e;
            for k in 0..2 {
                dg[k] = Mat2::identity() * (2.0 * e * dl[k]);
            }
        }
        for t in &self.anisotropic {
            let (b, db) = t.bump.jet1(x);
            let s = t.matrix();
            g += s * b;
            for k in 0..2 {
                dg[k] += s * db[k];
            }
        }
        (g, dg)
    }

    /// Metric with first and second derivatives.
    pub fn metric_jet(&self, x: &Vec2) -> MetricJet {
        let mut jet = MetricJet {
            g: Mat2::identity(),
            dg: [Mat2::zeros(); 2],
            ddg: [[Mat2::zeros(); 2]; 2],
        };
        if let Some(b) = &self.conformal {
            let (l, dl, hl) = b.jet(x);
            let e = (2.0 * l).exp();
            jet.g = Mat2::identity() * e;
            for k in 0..2 {
                jet.dg[k] = Mat2::identity() * (2.0 * e * dl[k]);
                for m in 0..2 {
                    jet.ddg[k][m] =
                        Mat2::identity() * (e * (4.0 * dl[k] * dl[m] + 2.0 * hl[(k, m)]));
                }
            }
        }
        for t in &self.anisotropic {
            let (b, db, hb) = t.bump.jet(x);
            let s = t.matrix();
            jet.g += s * b;
            for k in 0..2 {
                jet.dg[k] += s * db[k];
                for m in 0..2 {
                    jet.ddg[k][m] += s * hb[(k, m)];
                }
            }
        }
        jet
    }

    /// `√det g`
    #[inline]
    pub fn volume_density(&self, x: &Vec2) -> f64 {
        self.metric(x).determinant().sqrt()
    }

    /// Christoffel symbols, checked against the extended disk.
    pub fn christoffel_at(&self, x: &Vec2) -> Result<Christoffel> {
        self.check(x)?;
        Ok(self.christoffel(x))
    }

    #[inline]
    pub fn christoffel(&self, x: &Vec2) -> Christoffel {
        if self.is_flat() {
            return Christoffel::zero();
        }
        let (g, dg) = self.metric_jet1(x);
        christoffel_from(&g, &dg)
    }

    /// Geodesic acceleration `-Γ^k_ij v^i v^j`.
    #[inline]
    pub fn acceleration(&self, x: &Vec2, v: &Vec2) -> Vec2 {
        if self.anisotropic.is_empty() {
            return match &self.conformal {
                // Γ(v, v) = 2 (dλ·v) v - |v|² ∇λ for g = exp(2λ) δ.
                Some(b) => {
                    let (_, dl) = b.jet1(x);
                    dl * v.norm_squared() - v * (2.0 * dl.dot(v))
                }
                None => Vec2::zeros(),
            };
        }
        -self.christoffel(x).contract(v)
    }

    /// Gaussian curvature.
    pub fn gaussian_curvature(&self, x: &Vec2) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        let jet = self.metric_jet(x);
        let gam = christoffel_from(&jet.g, &jet.dg).0;
        let g = &jet.g;
        let dd = |a: usize, b: usize, i: usize, j: usize| jet.ddg[a][b][(i, j)];
        // R_1212 in 0-based indices (0,1,0,1)
        let (a, b, c, d) = (0, 1, 0, 1);
        let mut r = 0.5 * (dd(b, c, a, d) + dd(a, d, b, c) - dd(a, c, b, d) - dd(b, d, a, c));
        for p in 0..2 {
            for q in 0..2 {
                r += g[(p, q)] * (gam[p][b][c] * gam[q][a][d] - gam[p][b][d] * gam[q][a][c]);
            }
        }
        r / g.determinant()
    }

    /// `|v|_g`
    #[inline]
    pub fn norm(&self, x: &Vec2, v: &Vec2) -> f64 {
        (v.transpose() * self.metric(x) * v)[(0, 0)].sqrt()
    }

    /// `g`-orthonormal frame `(ν, τ)` at a point of a centered circle: `ν`
    /// is the outward unit normal and `τ` the counter-clockwise tangent.
    pub fn circle_frame(&self, x: &Vec2) -> (Vec2, Vec2) {
        let g = self.metric(x);
        let ginv = g.try_inverse().expect("metric is positive definite");
        let n = ginv * x;
        let nu = n / (n.dot(x)).sqrt();
        let t = Vec2::new(-x[1], x[0]);
        let t = t / (t.transpose() * g * t)[(0, 0)].sqrt();
        (nu, t)
    }

    /// A `g`-orthonormal frame at `x`, obtained by Gram-Schmidt from the
    /// Cartesian axes.
    pub fn orthonormal_frame(&self, x: &Vec2) -> (Vec2, Vec2) {
        let g = self.metric(x);
        let e1 = Vec2::new(1.0 / g[(0, 0)].sqrt(), 0.0);
        let ip = |u: &Vec2, w: &Vec2| (u.transpose() * g * w)[(0, 0)];
        let mut e2 = Vec2::new(0.0, 1.0);
        e2 -= e1 * ip(&e1, &e2);
        let n = ip(&e2, &e2).sqrt();
        (e1, e2 / n)
    }
}

/// `Γ^k_ij = ½ g^{kl} (∂_i g_jl + ∂_j g_il - ∂_l g_ij)`
#[inline]
pub fn christoffel_from(g: &Mat2, dg: &[Mat2; 2]) -> Christoffel {
    let ginv = g.try_inverse().unwrap_or_else(Mat2::identity);
    let mut first = [[[0.0; 2]; 2]; 2]; // [l][i][j]
    for (l, fl) in first.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                fl[i][j] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
            }
        }
    }
    let mut out = [[[0.0; 2]; 2]; 2];
    for (k, ok) in out.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                ok[i][j] = ginv[(k, 0)] * first[0][i][j] + ginv[(k, 1)] * first[1][i][j];
            }
        }
    }
    Christoffel(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn generic() -> MetricModel {
        MetricModel::generic_analytic(
            Bump::new([0.0, 0.0], 0.1, 0.2),
            TensorBump {
                bump: Bump::new([0.2, -0.1], 1.0, 0.3),
                tensor: [0.08, 0.05, -0.04],
            },
        )
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let r = 1.1 * rng.random::<f64>().sqrt();
                let t = rng.random::<f64>() * std::f64::consts::TAU;
                Vec2::new(r * t.cos(), r * t.sin())
            })
            .collect()
    }

    #[test]
    fn euclidean_metric_is_identity() {
        let m = MetricModel::euclidean();
        assert_eq!(m.metric_at(&Vec2::new(0.3, 0.1)).unwrap(), Mat2::identity());
        assert_eq!(
            m.christoffel_at(&Vec2::new(0.3, 0.1)).unwrap(),
            Christoffel::zero()
        );
    }

    #[test]
    fn conformal_metric_at_center() {
        let m = MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2);
        let g = m.metric_at(&Vec2::zeros()).unwrap();
        assert!((g - Mat2::identity() * 0.2f64.exp()).norm() < 1e-15);
    }

    #[test]
    fn outside_extended_disk_is_rejected() {
        let m = MetricModel::euclidean();
        assert!(matches!(
            m.metric_at(&Vec2::new(1.3, 0.0)),
            Err(GeoError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn metric_derivatives_match_central_differences() {
        let m = generic();
        let h = 1e-5;
        for x in random_points(20, 7) {
            let jet = m.metric_jet(&x);
            for k in 0..2 {
                let mut e = Vec2::zeros();
                e[k] = h;
                let fd = (m.metric(&(x + e)) - m.metric(&(x - e))) / (2.0 * h);
                assert!(
                    (fd - jet.dg[k]).norm() < 1e-8,
                    "dg mismatch {}",
                    (fd - jet.dg[k]).norm()
                );
                let (_, dp) = m.metric_jet1(&(x + e));
                let (_, dm) = m.metric_jet1(&(x - e));
                for l in 0..2 {
                    let fd2 = (dp[l] - dm[l]) / (2.0 * h);
                    assert!((fd2 - jet.ddg[k][l]).norm() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn conformal_christoffels_match_closed_form() {
        // Γ^k_ij = δ^k_i ∂_j λ + δ^k_j ∂_i λ - δ_ij ∂_k λ, with ∂λ by differences.
        let m = MetricModel::conformal_bump([0.1, -0.2], 0.3, 0.4);
        let lambda = |x: &Vec2| 0.5 * m.metric(x)[(0, 0)].ln();
        let h = 1e-5;
        for x in random_points(20, 11) {
            let dl = Vec2::new(
                (lambda(&(x + Vec2::new(h, 0.0))) - lambda(&(x - Vec2::new(h, 0.0)))) / (2.0 * h),
                (lambda(&(x + Vec2::new(0.0, h))) - lambda(&(x - Vec2::new(0.0, h)))) / (2.0 * h),
            );
            let gam = m.christoffel(&x).0;
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        let expect = d(k, i) * dl[j] + d(k, j) * dl[i] - d(i, j) * dl[k];
                        assert!((gam[k][i][j] - expect).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn christoffels_are_symmetric() {
        let m = generic();
        for x in random_points(50, 3) {
            let g = m.christoffel(&x).0;
            for k in 0..2 {
                assert_eq!(g[k][0][1], g[k][1][0]);
            }
        }
    }

    #[test]
    fn conformal_curvature_matches_laplacian_formula() {
        // K = -exp(-2λ) Δλ
        let b = Bump::new([0.1, 0.0], 0.4, 0.3);
        let m = MetricModel::conformal_bump(b.center, b.amplitude, b.width);
        for x in random_points(20, 5) {
            let (l, _, hl) = b.jet(&x);
            let k = -(-2.0 * l).exp() * (hl[(0, 0)] + hl[(1, 1)]);
            assert!((m.gaussian_curvature(&x) - k).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormal_frame_is_orthonormal() {
        let m = generic();
        for x in random_points(10, 9) {
            let g = m.metric(&x);
            let (e1, e2) = m.orthonormal_frame(&x);
            let ip = |u: &Vec2, w: &Vec2| (u.transpose() * g * w)[(0, 0)];
            assert!((ip(&e1, &e1) - 1.0).abs() < 1e-14);
            assert!((ip(&e2, &e2) - 1.0).abs() < 1e-14);
            assert!(ip(&e1, &e2).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_frame_is_normal_and_tangent() {
        let m = generic();
        for x in random_points(10, 11) {
            let g = m.metric(&x);
            let (nu, t) = m.circle_frame(&x);
            let ip = |u: &Vec2, w: &Vec2| (u.transpose() * g * w)[(0, 0)];
            assert!((ip(&nu, &nu) - 1.0).abs() < 1e-14 && (ip(&t, &t) - 1.0).abs() < 1e-14);
            assert!(ip(&nu, &t).abs() < 1e-14);
            assert!(nu.dot(&x) > 0.0 && t.perp(&x) < 0.0);
            // ν is g-orthogonal to every vector tangent to the circle.
            assert!(ip(&nu, &Vec2::new(-x[1], x[0])).abs() < 1e-14);
        }
    }

    #[test]
    fn acceleration_contracts_christoffels() {
        for m in [
            MetricModel::conformal_bump([0.1, -0.2], 0.3, 0.4),
            generic(),
        ] {
            for (k, x) in random_points(10, 13).into_iter().enumerate() {
                let v = Vec2::new((k as f64).cos(), 0.5 * (k as f64).sin());
                let a = m.acceleration(&x, &v);
                let b = -m.christoffel(&x).contract(&v);
                assert!((a - b).norm() < 1e-13 * (1.0 + b.norm()));
            }
        }
    }
}
