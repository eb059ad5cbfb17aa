//! Principal symbol of `Ñ_a`, its ellipticity on solenoidal pairs, and a
//! numerical check of the symbol against oscillatory inputs.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Matrix5, SMatrix, Vector5};
use num_complex::Complex64;
use serde::Serialize;

use super::{normal_apply_direct_at, NormalOptions};
use crate::error::{GeoError, Result};
use crate::geometry::{trace_with, ModelPair, Region, TraceOptions};
use crate::mesh::{pair_gram, sphere_weights, DiskMesh, PairField};
use crate::xray::lowered_moments;
use crate::{Mat2, Vec2};

/// Largest `λ |ξ| h` accepted by the oscillatory test.
pub const MAX_PHASE_PER_CELL: f64 = 0.7;

/// The principal symbol `σ_p(Ñ_a)(x, ξ)` acting on coefficient vectors
/// `(f11, f12, f22, α1, α2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolMatrix {
    pub x: [f64; 2],
    pub xi: [f64; 2],
    /// Row-major 5×5 matrix.
    pub matrix: [[f64; 5]; 5],
    /// The two unit directions annihilated by `ξ`, with their weights
    /// `2π Ũ_{-2 Re a}(x, ω) / |ξ|_g`.
    pub directions: [([f64; 2], f64); 2],
    #[serde(skip)]
    metric: Mat2,
}

/// The symbol split by tensor order of input and output: `b22` maps
/// tensors to tensors, `b21` one-forms to tensors, `b12` tensors to
/// one-forms and `b11` one-forms to one-forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolBlocks {
    pub b22: [[f64; 3]; 3],
    pub b21: [[f64; 2]; 3],
    pub b12: [[f64; 3]; 2],
    pub b11: [[f64; 2]; 2],
}

impl SymbolMatrix {
    fn as_matrix(&self) -> Matrix5<f64> {
        Matrix5::from_fn(|i, j| self.matrix[i][j])
    }

    fn gram(&self) -> Matrix5<f64> {
        pair_gram(
            &self
                .metric
                .try_inverse()
                .expect("metric is positive definite"),
        )
    }

    /// `σ P` for a coefficient vector `P`.
    pub fn apply(&self, p: &[Complex64; 5]) -> [Complex64; 5] {
        let mut out = [Complex64::new(0.0, 0.0); 5];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, pj) in p.iter().enumerate() {
                *o += pj * self.matrix[i][j];
            }
        }
        out
    }

    /// `√(P̄ᵀ G P)` in the pair inner product at `x`.
    pub fn pair_norm(&self, p: &[Complex64; 5]) -> f64 {
        let g = self.gram();
        let mut s = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                s += (p[i].conj() * p[j]).re * g[(i, j)];
            }
        }
        s.max(0.0).sqrt()
    }

    /// The quadratic form `⟨σ P, P⟩`, a real symmetric matrix.
    pub fn quadratic_form(&self) -> [[f64; 5]; 5] {
        let q = self.gram() * self.as_matrix();
        let q = (q + q.transpose()) * 0.5;
        std::array::from_fn(|i| std::array::from_fn(|j| q[(i, j)]))
    }

    /// Eigenvalues of `σ` (self-adjoint for the pair inner product), in
    /// increasing order.
    pub fn eigenvalues(&self) -> [f64; 5] {
        let g = self.gram();
        let l = g.cholesky().expect("gram matrix is positive definite").l();
        let li = l.try_inverse().expect("triangular factor is invertible");
        let q = Matrix5::from_fn(|i, j| self.quadratic_form()[i][j]);
        let h = li * q * li.transpose();
        let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        [e[0], e[1], e[2], e[3], e[4]]
    }

    pub fn blocks(&self) -> SymbolBlocks {
        let m = &self.matrix;
        SymbolBlocks {
            b22: std::array::from_fn(|i| std::array::from_fn(|j| m[i][j])),
            b21: std::array::from_fn(|i| std::array::from_fn(|j| m[i][3 + j])),
            b12: std::array::from_fn(|i| std::array::from_fn(|j| m[3 + i][j])),
            b11: std::array::from_fn(|i| std::array::from_fn(|j| m[3 + i][3 + j])),
        }
    }

    /// Restriction of the quadratic form to `{f(ξ♯, ·) = 0, α(ξ♯) = 0}`, in
    /// the orthonormal basis `(ω♭⊗ω♭, ω♭)`.
    pub fn restricted_form(&self) -> [[f64; 2]; 2] {
        let w = Vec2::from(self.directions[0].0);
        let l = self.metric * w;
        let basis = [
            Vector5::new(l[0] * l[0], l[0] * l[1], l[1] * l[1], 0.0, 0.0),
            Vector5::new(0.0, 0.0, 0.0, l[0], l[1]),
        ];
        let q = self.gram() * self.as_matrix();
        std::array::from_fn(|i| std::array::from_fn(|j| basis[i].dot(&(q * basis[j]))))
    }

    /// Smallest eigenvalue of [`SymbolMatrix::restricted_form`].
    pub fn min_restricted_eig(&self) -> f64 {
        let r = self.restricted_form();
        let (a, b, d) = (r[0][0], 0.5 * (r[0][1] + r[1][0]), r[1][1]);
        let mean = 0.5 * (a + d);
        mean - (0.25 * (a - d) * (a - d) + b * b).sqrt()
    }
}

/// `σ_p(Ñ_a)(x, ξ) = Σ_{ω = ±ω⊥} 2π Ũ_{-2 Re a}(x, ω) / |ξ|_g · L(ω) e(ω)ᵀ`,
/// where `e(ω)` evaluates a pair on `ω` and `L(ω) = (ω♭⊗ω♭, ω♭)`.
pub fn principal_symbol(
    model: &ModelPair,
    radius: f64,
    x: &Vec2,
    xi: &Vec2,
    opts: &TraceOptions,
) -> Result<SymbolMatrix> {
    if !(xi.norm() > 0.0) || !xi.iter().all(|c| c.is_finite()) {
        return Err(GeoError::Contract("the covector ξ must be nonzero".into()));
    }
    if !(x.norm() < radius) {
        return Err(GeoError::OutsideDomain {
            x: x[0],
            y: x[1],
            radius,
            what: "extended disk interior",
        });
    }
    let g = model.metric.metric(x);
    let gi = g.try_inverse().expect("metric is positive definite");
    let xi_norm = (xi.transpose() * gi * xi)[(0, 0)].sqrt();
    let perp = Vec2::new(-xi[1], xi[0]);
    let perp = perp / model.metric.norm(x, &perp);
    let mut matrix = SMatrix::<f64, 5, 5>::zeros();
    let mut directions = [([0.0; 2], 0.0); 2];
    for (k, w) in [perp, -perp].into_iter().enumerate() {
        // Ũ_{-2 Re a}(x, ω) = exp(2 Re ∫ a) along the backward geodesic.
        let mut acc = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        trace_with(&model.metric, x, &-w, radius, opts, |t, y, _| {
            let a = model.attenuation.value(y).re;
            if let Some((t0, a0)) = prev {
                acc += (a + a0) * 0.5 * (t - t0);
            }
            prev = Some((t, a));
        })?;
        let c = TAU * (2.0 * acc).exp() / xi_norm;
        let l = Vector5::from(lowered_moments(&g, &w));
        let e = Vector5::from(sphere_weights(&w));
        matrix += l * e.transpose() * c;
        directions[k] = ([w[0], w[1]], c);
    }
    Ok(SymbolMatrix {
        x: [x[0], x[1]],
        xi: [xi[0], xi[1]],
        matrix: std::array::from_fn(|i| std::array::from_fn(|j| matrix[(i, j)])),
        directions,
        metric: g,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub min_restricted_eig: f64,
    /// Sample attaining the minimum.
    pub argmin: usize,
    pub samples: usize,
}

/// Minimum over the samples of the symbol restricted to solenoidal pairs.
pub fn ellipticity_check(
    model: &ModelPair,
    radius: f64,
    samples: &[(Vec2, Vec2)],
    opts: &TraceOptions,
) -> Result<EllipticityReport> {
    let mut report = EllipticityReport {
        min_restricted_eig: f64::INFINITY,
        argmin: 0,
        samples: samples.len(),
    };
    for (i, (x, xi)) in samples.iter().enumerate() {
        let e = principal_symbol(model, radius, x, xi, opts)?.min_restricted_eig();
        if e < report.min_restricted_eig {
            report.min_restricted_eig = e;
            report.argmin = i;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryOptions {
    /// Radius of the cutoff `χ` around the evaluation point.
    pub cutoff_radius: f64,
    pub normal: NormalOptions,
}

impl OscillatoryOptions {
    pub fn for_mesh_spacing(h: f64) -> Self {
        OscillatoryOptions {
            cutoff_radius: 0.3,
            normal: NormalOptions {
                n_dir: 1024,
                trace: TraceOptions::for_mesh_spacing(h),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillatoryReport {
    pub lambda: f64,
    pub defect: f64,
    #[serde(skip)]
    pub numeric: [Complex64; 5],
    #[serde(skip)]
    pub predicted: [Complex64; 5],
}

/// Applies `Ñ_a` to `χ(y) e^{iλ (y - x)·ξ} P₀` and compares `λ Ñ(...)(x)`
/// with `σ_p(x, ξ) χ(x) P₀`, relative to the latter.
pub fn symbol_oscillatory_test(
    model: &ModelPair,
    mesh: &Arc<DiskMesh>,
    x: &Vec2,
    xi: &Vec2,
    lambda: f64,
    p0: &[Complex64; 5],
    opts: &OscillatoryOptions,
) -> Result<OscillatoryReport> {
    if lambda * xi.norm() * mesh.spacing() > MAX_PHASE_PER_CELL {
        return Err(GeoError::Resolution(format!(
            "frequency {lambda} is not resolved at mesh spacing {}",
            mesh.spacing()
        )));
    }
    let r = opts.cutoff_radius;
    if x.norm() + r > mesh.domain().radius_m {
        return Err(GeoError::Contract(
            "the cutoff must be supported in M".into(),
        ));
    }
    let field = PairField::from_fn(mesh, Region::Inner, |y| {
        let d = y - x;
        let s = d.norm_squared() / (r * r);
        if s >= 1.0 {
            return [Complex64::new(0.0, 0.0); 5];
        }
        let phase = Complex64::from_polar((1.0 - s).powi(4), lambda * d.dot(xi));
        p0.map(|p| p * phase)
    });
    let out = normal_apply_direct_at(
        model,
        std::slice::from_ref(&field),
        std::slice::from_ref(x),
        &opts.normal,
    )?;
    let numeric = out[0][0].map(|z| z * lambda);
    let sigma = principal_symbol(
        model,
        mesh.domain().radius(Region::Extended),
        x,
        xi,
        &opts.normal.trace,
    )?;
    let predicted = sigma.apply(p0);
    let diff: [Complex64; 5] = std::array::from_fn(|c| numeric[c] - predicted[c]);
    Ok(OscillatoryReport {
        lambda,
        defect: sigma.pair_norm(&diff) / sigma.pair_norm(&predicted),
        numeric,
        predicted,
    })
}
