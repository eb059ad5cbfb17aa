//! Least-squares recovery of the solenoidal part of a pair from fan-beam
//! data, and the stability and perturbation studies built on the normal
//! operator.

mod perturb;
mod stability;

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::Region;
use crate::linalg;
use crate::mesh::{Discretization, DiskMesh, PairField};
use crate::solenoidal::Projector;
use crate::xray::{FanBeamData, RayPlan};
use crate::Vec2;

pub use perturb::{
    c3_proxy, perturbation_study, PerturbationDirection, PerturbationOptions, PerturbationReport,
};
pub use stability::{stability_ratio_experiment, StabilityReport};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Growth of the normal-equation residual over its running minimum that is
/// treated as a forward/transpose mismatch.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconOptions {
    pub max_iter: usize,
    /// Relative normal-equation residual at which iteration stops.
    pub tolerance: f64,
    /// Complex Gaussian noise level relative to the data norm.
    pub noise: f64,
    /// With noise, iteration also stops once the data misfit drops below
    /// `discrepancy · noise · ‖y‖_μ`.
    pub discrepancy: f64,
    pub seed: u64,
}

impl Default for ReconOptions {
    fn default() -> Self {
        ReconOptions {
            max_iter: 200,
            tolerance: 1e-6,
            noise: 0.0,
            discrepancy: 1.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconReport {
    pub iterations: usize,
    pub converged: bool,
    /// Whether iteration stopped on the noise discrepancy.
    pub discrepancy_stop: bool,
    /// `‖𝐈 F - y‖_μ / ‖y‖_μ` at the returned iterate.
    pub data_misfit: f64,
    /// Relative normal-equation residual, starting with 1 at the zero
    /// initial guess.
    pub residual_history: Vec<f64>,
    /// `‖S_a(recovered) - S_a(truth)‖ / ‖S_a(truth)‖` when a ground truth
    /// is supplied.
    pub relative_error: Option<f64>,
    /// Relative error of the projected iterate after each iteration, starting
    /// with the zero guess; empty without a ground truth.
    pub error_history: Vec<f64>,
    pub noise_level: f64,
    /// Weak `δ_a` of the recovered field relative to its norm.
    pub divergence_dual: f64,
}

impl ReconReport {
    pub fn is_monotone(&self) -> bool {
        self.residual_history
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12))
    }
}

/// Lumped P1 node areas of a region.
fn lumped_areas(mesh: &DiskMesh, region: Region) -> Vec<f64> {
    let n = mesh.node_count(region);
    let mut out = vec![0.0; n];
    for (t, tri) in mesh.triangles()[..mesh.triangle_count(region)]
        .iter()
        .enumerate()
    {
        let a = mesh.triangle_area(t) / 3.0;
        for &i in tri {
            out[i as usize] += a;
        }
    }
    out
}

/// Adds complex Gaussian noise with `‖noise‖_μ = level · ‖data‖_μ`.
pub fn add_noise(data: &FanBeamData, level: f64, seed: u64) -> Result<FanBeamData> {
    if level == 0.0 {
        return Ok(data.clone());
    }
    if !(level > 0.0) || !level.is_finite() {
        return Err(GeoError::Contract(format!(
            "noise level must be nonnegative, got {level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Complex64> = (0..data.values.len())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let noise = data.with_values(raw)?;
    let scale = level * data.norm() / noise.norm();
    let values = data
        .values
        .iter()
        .zip(&noise.values)
        .map(|(y, e)| y + e * scale)
        .collect();
    data.with_values(values)
}

/// Solves `min ‖𝐈 F - y‖_μ` over nodal pairs on the plan's region by
/// conjugate residuals on the normal equations in the lumped-mass inner
/// product, which makes the normal-equation residual monotone. With noisy
/// data the iteration stops at the discrepancy level. The iterate is
/// projected onto its `a`-solenoidal part.
pub fn reconstruct_solenoidal(
    disc: &Discretization,
    plan: &RayPlan,
    data: &FanBeamData,
    truth: Option<&PairField>,
    opts: &ReconOptions,
) -> Result<(ReconReport, PairField)> {
    if data.grid != *plan.grid() {
        return Err(GeoError::Contract(
            "data and plan use different fan-beam grids".into(),
        ));
    }
    if !Arc::ptr_eq(disc.mesh(), plan.mesh()) {
        return Err(GeoError::Contract(
            "plan and discretization use different meshes".into(),
        ));
    }
    if !(opts.tolerance > 0.0) || opts.max_iter == 0 {
        return Err(GeoError::Contract(
            "tolerance and iteration cap must be positive".into(),
        ));
    }
    if !data.is_finite() {
        return Err(GeoError::NonFinite("reconstruction data"));
    }
    let region = plan.grid().region;
    let mesh = disc.mesh();
    let y = add_noise(data, opts.noise, opts.seed)?;
    let mass: Vec<f64> = lumped_areas(mesh, region)
        .into_iter()
        .flat_map(|m| [m; 5])
        .collect();
    let weights = &y.weights;

    // N v = D⁻¹ Aᴴ W A v, self-adjoint in ⟨u, v⟩_D = Σ D_i u_i v̄_i.
    let back = |d: &[Complex64]| -> Result<Vec<Complex64>> {
        let wd: Vec<Complex64> = d.iter().zip(weights).map(|(z, w)| z * w).collect();
        let mut out = plan.transpose(&wd)?.as_flat().to_vec();
        for (o, m) in out.iter_mut().zip(&mass) {
            *o /= m;
        }
        Ok(out)
    };
    let fwd = |v: &[Complex64]| -> Result<FanBeamData> {
        plan.apply(&PairField::from_flat(mesh, region, v)?)
    };
    let d_norm = |v: &[Complex64]| {
        v.iter()
            .zip(&mass)
            .map(|(z, m)| z.norm_sqr() * m)
            .sum::<f64>()
            .sqrt()
    };

    let projector = Projector::new(disc, region)?;
    let reference = match truth {
        Some(t) => {
            let st = projector.solenoidal(t)?;
            let scale = disc.pair_norm(&st)?;
            Some((st, if scale > 0.0 { scale } else { 1.0 }))
        }
        None => None,
    };
    let error_of = |x: &[Complex64]| -> Result<Option<f64>> {
        match &reference {
            Some((st, scale)) => {
                let s = projector.solenoidal(&PairField::from_flat(mesh, region, x)?)?;
                Ok(Some(disc.pair_norm(&(&s - st))? / scale))
            }
            None => Ok(None),
        }
    };

    let c = back(&y.values)?;
    let c_norm = d_norm(&c);
    let mut x = vec![ZERO; c.len()];
    let mut history = vec![1.0];
    let mut error_history: Vec<f64> = error_of(&x)?.into_iter().collect();
    let mut converged = c_norm == 0.0;
    let mut discrepancy_stop = false;
    let y_norm = y.norm();
    // Data residual y - A x, updated through A p.
    let mut misfit = y.values.clone();
    let misfit_norm = |m: &[Complex64]| -> Result<f64> { Ok(y.with_values(m.to_vec())?.norm()) };
    let target = opts.discrepancy * opts.noise * y_norm;
    if !converged {
        let mut r = c.clone();
        let mut ar = fwd(&r)?;
        let mut nr = back(&ar.values)?;
        let mut p = r.clone();
        let mut np = nr.clone();
        let mut ap = ar.values.clone();
        let mut rho = ar.norm().powi(2);
        let mut best = 1.0f64;
        for it in 0..opts.max_iter {
            let np_norm = d_norm(&np);
            if np_norm == 0.0 {
                break;
            }
            let alpha = Complex64::new(rho / (np_norm * np_norm), 0.0);
            linalg::axpy(&mut x, alpha, &p);
            linalg::axpy(&mut r, -alpha, &np);
            linalg::axpy(&mut misfit, -alpha, &ap);
            let rel = d_norm(&r) / c_norm;
            if !rel.is_finite() {
                return Err(GeoError::NonFinite("reconstruction residual"));
            }
            if rel > DIVERGENCE_FACTOR * best {
                return Err(GeoError::Divergence {
                    factor: rel / best,
                    iteration: it + 1,
                });
            }
            best = best.min(rel);
            history.push(rel);
            error_history.extend(error_of(&x)?);
            if rel <= opts.tolerance {
                converged = true;
                break;
            }
            if opts.noise > 0.0 && misfit_norm(&misfit)? <= target {
                discrepancy_stop = true;
                break;
            }
            ar = fwd(&r)?;
            nr = back(&ar.values)?;
            let rho_new = ar.norm().powi(2);
            let beta = Complex64::new(rho_new / rho, 0.0);
            rho = rho_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            for (qi, ni) in np.iter_mut().zip(&nr) {
                *qi = ni + beta * *qi;
            }
            for (qi, ai) in ap.iter_mut().zip(&ar.values) {
                *qi = ai + beta * *qi;
            }
        }
    }

    let recovered = PairField::from_flat(mesh, region, &x)?;
    let split = projector.project(&recovered)?;
    let relative_error = match &reference {
        Some((st, scale)) => Some(disc.pair_norm(&(&split.solenoidal - st))? / scale),
        None => None,
    };
    let sol_norm = disc.pair_norm(&split.solenoidal)?;
    let divergence = projector.divergence_dual(&split.solenoidal)?;
    Ok((
        ReconReport {
            iterations: history.len() - 1,
            converged,
            discrepancy_stop,
            data_misfit: if y_norm > 0.0 {
                misfit_norm(&misfit)? / y_norm
            } else {
                0.0
            },
            residual_history: history,
            relative_error,
            error_history,
            noise_level: opts.noise,
            divergence_dual: if sol_norm > 0.0 {
                divergence / sol_norm
            } else {
                divergence
            },
        },
        split.solenoidal,
    ))
}

/// A smooth random pair: a sum of `bumps` Gaussian bumps of width `width`
/// with random centers inside `|x| < 0.7` and random complex coefficients.
pub fn random_smooth_pair<R: Rng + ?Sized>(
    mesh: &Arc<DiskMesh>,
    region: Region,
    rng: &mut R,
    bumps: usize,
    width: f64,
) -> PairField {
    let terms: Vec<(Vec2, [Complex64; 5])> = (0..bumps)
        .map(|_| {
            let r = 0.7 * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            let c = Vec2::new(r * t.cos(), r * t.sin());
            let coef = std::array::from_fn(|_| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            (c, coef)
        })
        .collect();
    PairField::from_fn(mesh, region, |x| {
        let mut out = [ZERO; 5];
        for (c, coef) in &terms {
            let e = (-(x - c).norm_squared() / (width * width)).exp();
            for k in 0..5 {
                out[k] += coef[k] * e;
            }
        }
        out
    })
}

#[cfg(test)]
mod tests;
