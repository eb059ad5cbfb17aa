use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{
    simplicity_check_radius, AttenuationBump, Bump, DiskDomain, ModelPair, Region, TensorBump,
    TraceOptions,
};
use crate::linalg::{self, Cholesky};
use crate::mesh::{Discretization, DiskMesh, PairField, PairKind};
use crate::normal_op::{ComposedNormal, NormalOptions};
use crate::solenoidal::Projector;
use crate::xray::DEFAULT_DIRECTIONS;
use crate::Vec2;

/// Closed-form perturbation `(δg, δa)` added with weight `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationDirection {
    pub metric: TensorBump,
    pub attenuation: AttenuationBump,
}

impl Default for PerturbationDirection {
    fn default() -> Self {
        PerturbationDirection {
            metric: TensorBump {
                bump: Bump::new([0.2, -0.1], 1.0, 0.3),
                tensor: [1.0, 0.3, 0.5],
            },
            attenuation: AttenuationBump {
                center: [-0.2, 0.1],
                width: 0.4,
                amplitude: Complex64::new(1.0, 0.5),
            },
        }
    }
}

impl PerturbationDirection {
    pub fn apply(&self, base: &ModelPair, eps: f64) -> ModelPair {
        ModelPair::new(
            base.metric.perturbed(&self.metric, eps),
            base.attenuation.perturbed(&self.attenuation, eps),
        )
    }

    /// The direction rescaled to unit C³ proxy norm.
    pub fn normalized(&self, base: &ModelPair, probe_grid: usize) -> Result<Self> {
        let size = c3_proxy(base, &self.apply(base, 1.0), probe_grid);
        if !(size > 0.0) || !size.is_finite() {
            return Err(GeoError::Contract("perturbation direction vanishes".into()));
        }
        Ok(PerturbationDirection {
            metric: self.metric.scaled(1.0 / size),
            attenuation: AttenuationBump {
                amplitude: self.attenuation.amplitude / size,
                ..self.attenuation
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationOptions {
    pub domain: DiskDomain,
    /// Mesh spacing of the study.
    pub spacing: f64,
    /// Number of random unit pairs probing the operator distances.
    pub probes: usize,
    pub lanczos_steps: usize,
    /// Points per side of the square probe grid of the C³ proxy.
    pub probe_grid: usize,
    pub max_proxy: f64,
    pub n_dir: usize,
    pub seed: u64,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        PerturbationOptions {
            domain: DiskDomain::default(),
            spacing: 1.0 / 16.0,
            probes: 20,
            lanczos_steps: 20,
            probe_grid: 64,
            max_proxy: 0.05,
            n_dir: DEFAULT_DIRECTIONS,
            seed: 0,
        }
    }
}

/// Ratios `dist(ε) / dist(ε/2)` of the two operator distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub normal_ratio: f64,
    pub projection_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub eps: Vec<f64>,
    pub c3_proxy: Vec<f64>,
    /// `max_F ‖(Ñ_{g,a} - Ñ_{g̃,ã}) F‖_{H¹(M̃)}` over unit probes.
    pub normal_distance: Vec<f64>,
    /// `max_F ‖(S_{g,a} - S_{g̃,ã}) F‖_{L²(M)}` over unit probes.
    pub projection_distance: Vec<f64>,
    /// `max / min` of the stability ratio over the probes.
    pub stability_spread: Vec<f64>,
    /// Smallest Ritz value of `Ñ` compressed to the solenoidal subspace.
    pub singular_floor: Vec<f64>,
    pub scaling: Vec<ScalingRow>,
}

impl PerturbationReport {
    pub fn is_valid(&self) -> bool {
        [
            &self.eps,
            &self.c3_proxy,
            &self.normal_distance,
            &self.projection_distance,
            &self.stability_spread,
            &self.singular_floor,
        ]
        .iter()
        .all(|v| v.iter().all(|x| x.is_finite() && *x >= 0.0))
    }
}

/// Scaled C³ proxy of `perturbed - base`: the largest modulus of the
/// difference of the metric components and the attenuation, and of all
/// forward differences up to order three divided by `step^order`, on a
/// `grid × grid` lattice covering the extended disk.
pub fn c3_proxy(base: &ModelPair, perturbed: &ModelPair, grid: usize) -> f64 {
    let r = base.metric.extent.min(perturbed.metric.extent);
    let step = 2.0 * r / (grid - 1) as f64;
    let point = |p: usize, q: usize| Vec2::new(-r + p as f64 * step, -r + q as f64 * step);
    let values: Vec<Option<[Complex64; 4]>> = (0..grid * grid)
        .map(|idx| {
            let x = point(idx / grid, idx % grid);
            if x.norm() > r {
                return None;
            }
            let dg = perturbed.metric.metric(&x) - base.metric.metric(&x);
            let da = perturbed.attenuation.value(&x) - base.attenuation.value(&x);
            let re = |v: f64| Complex64::new(v, 0.0);
            Some([re(dg[(0, 0)]), re(dg[(0, 1)]), re(dg[(1, 1)]), da])
        })
        .collect();
    let binom = [
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0],
        [1.0, 3.0, 3.0, 1.0],
    ];
    let mut worst: f64 = 0.0;
    for order in 0..=3usize {
        let scale = step.powi(order as i32);
        for i in 0..=order {
            let j = order - i;
            for p in 0..grid - i {
                'node: for q in 0..grid - j {
                    let mut acc = [Complex64::new(0.0, 0.0); 4];
                    for a in 0..=i {
                        for b in 0..=j {
                            let Some(v) = values[(p + a) * grid + q + b] else {
                                continue 'node;
                            };
                            let sign = if (i - a + j - b) % 2 == 0 { 1.0 } else { -1.0 };
                            let c = sign * binom[i][a] * binom[j][b];
                            for k in 0..4 {
                                acc[k] += v[k] * c;
                            }
                        }
                    }
                    for z in acc {
                        worst = worst.max(z.norm() / scale);
                    }
                }
            }
        }
    }
    worst
}

struct Evaluation {
    normal: Vec<PairField>,
    solenoidal: Vec<PairField>,
    floor: f64,
}

/// Applies `Ñ` and `S` of one model to the probes and estimates the
/// smallest eigenvalue of `S Ñ S` on `M` by Lanczos from a fixed start.
fn evaluate(
    model: &ModelPair,
    mesh: &Arc<DiskMesh>,
    probes: &[PairField],
    start: &PairField,
    opts: &PerturbationOptions,
) -> Result<Evaluation> {
    let disc = Discretization::new(mesh.clone(), model.clone());
    let projector = Projector::new(&disc, Region::Inner)?;
    let nopts = NormalOptions {
        n_dir: opts.n_dir,
        trace: TraceOptions::for_mesh_spacing(opts.spacing),
    };
    let normal = ComposedNormal::new(model, mesh, &nopts)?;
    let mut out = Evaluation {
        normal: Vec::with_capacity(probes.len()),
        solenoidal: Vec::with_capacity(probes.len()),
        floor: 0.0,
    };
    for f in probes {
        out.normal.push(normal.apply(f)?);
        out.solenoidal.push(projector.solenoidal(f)?);
    }

    // ⟨Ñ F, F⟩ = ‖𝐈̃ F‖²_μ for F supported in M, so the compressed operator
    // is M⁻¹ Eᵀ Aᴴ W A E between solenoidal projections.
    let mass = disc.quadrature(Region::Inner).mass::<5, PairKind>();
    let llt = Cholesky::factor(&mass)?;
    let plan = normal.forward_plan();
    let failure = std::cell::RefCell::new(None);
    let apply = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let f = projector.solenoidal(&PairField::from_flat(mesh, Region::Inner, v)?)?;
        let data = plan.apply(&f.extend_by_zero(Region::Extended)?)?;
        let wd: Vec<Complex64> = data
            .values
            .iter()
            .zip(&data.weights)
            .map(|(z, w)| z * w)
            .collect();
        let back = plan.transpose(&wd)?.restrict(Region::Inner)?;
        let y = llt.solve(back.as_flat());
        Ok(projector
            .solenoidal(&PairField::from_flat(mesh, Region::Inner, &y)?)?
            .as_flat()
            .to_vec())
    };
    let start = projector.solenoidal(start)?;
    let (lo, _) = linalg::lanczos_extremes(
        |v| {
            apply(v).unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                vec![Complex64::new(0.0, 0.0); v.len()]
            })
        },
        |v| mass.mul_vec(v),
        start.as_flat(),
        opts.lanczos_steps,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    out.floor = lo.max(0.0);
    Ok(out)
}

/// Operator distances, stability spreads and solenoidal floors for the
/// models `base + ε · direction`, with the direction normalized to unit C³
/// proxy norm so that `ε` is the size of the perturbation. Distances are
/// also evaluated at `ε / 2` for every positive `ε` to report the scaling.
pub fn perturbation_study(
    base: &ModelPair,
    direction: &PerturbationDirection,
    eps: &[f64],
    opts: &PerturbationOptions,
) -> Result<PerturbationReport> {
    if eps.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(GeoError::Contract(
            "perturbation sizes must be nonnegative".into(),
        ));
    }
    let direction = direction.normalized(base, opts.probe_grid)?;
    let mut all: Vec<f64> = std::iter::once(0.0)
        .chain(eps.iter().copied())
        .chain(eps.iter().filter(|e| **e > 0.0).map(|e| 0.5 * e))
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup();

    let mut proxies = Vec::with_capacity(all.len());
    let mut models = Vec::with_capacity(all.len());
    for &e in &all {
        let model = direction.apply(base, e);
        let proxy = c3_proxy(base, &model, opts.probe_grid);
        if proxy > opts.max_proxy {
            return Err(GeoError::Contract(format!(
                "perturbation of size {proxy:.3e} exceeds the admissible {:.3e}",
                opts.max_proxy
            )));
        }
        for radius in [opts.domain.radius_m, opts.domain.radius_mt] {
            let report = simplicity_check_radius(&model.metric, radius);
            if !report.is_simple() {
                return Err(GeoError::NotSimple(format!(
                    "perturbation ε = {e} on the disk of radius {radius}: {}",
                    report.describe_failure()
                )));
            }
        }
        proxies.push(proxy);
        models.push(model);
    }

    let mesh = Arc::new(DiskMesh::with_domain(opts.spacing, opts.domain)?);
    let base_disc = Discretization::new(mesh.clone(), base.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probes = Vec::with_capacity(opts.probes);
    for _ in 0..opts.probes {
        let f = PairField::smoothed_noise(&mesh, Region::Inner, &mut rng, 2);
        let n = base_disc.pair_norm(&f)?;
        probes.push(f.scale(Complex64::new(1.0 / n, 0.0)));
    }
    let start = PairField::smoothed_noise(&mesh, Region::Inner, &mut rng, 2);

    let evals = models
        .iter()
        .map(|m| evaluate(m, &mesh, &probes, &start, opts))
        .collect::<Result<Vec<_>>>()?;
    let reference = &evals[0];
    let mut normal_distance = Vec::with_capacity(all.len());
    let mut projection_distance = Vec::with_capacity(all.len());
    let mut stability_spread = Vec::with_capacity(all.len());
    for ev in &evals {
        let (mut dn, mut ds) = (0.0f64, 0.0f64);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..probes.len() {
            dn = dn.max(base_disc.pair_h1_norm(&(&ev.normal[k] - &reference.normal[k]))?);
            ds = ds.max(base_disc.pair_norm(&(&ev.solenoidal[k] - &reference.solenoidal[k]))?);
            let r =
                base_disc.pair_norm(&ev.solenoidal[k])? / base_disc.pair_h1_norm(&ev.normal[k])?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        normal_distance.push(dn);
        projection_distance.push(ds);
        stability_spread.push(if probes.is_empty() { 1.0 } else { hi / lo });
    }

    let position = |e: f64| {
        all.iter()
            .position(|x| *x == e)
            .expect("size was evaluated")
    };
    let scaling = eps
        .iter()
        .filter(|e| **e > 0.0)
        .map(|&e| {
            let (i, j) = (position(e), position(0.5 * e));
            ScalingRow {
                eps: e,
                normal_ratio: normal_distance[i] / normal_distance[j],
                projection_ratio: projection_distance[i] / projection_distance[j],
            }
        })
        .collect();
    let pick = |v: &[f64]| eps.iter().map(|&e| v[position(e)]).collect::<Vec<f64>>();
    let floors: Vec<f64> = evals.iter().map(|e| e.floor).collect();
    Ok(PerturbationReport {
        eps: eps.to_vec(),
        c3_proxy: pick(&proxies),
        normal_distance: pick(&normal_distance),
        projection_distance: pick(&projection_distance),
        stability_spread: pick(&stability_spread),
        singular_floor: pick(&floors),
        scaling,
    })
}
