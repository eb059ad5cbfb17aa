use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::c64;
use crate::geometry::{AttenuationModel, MetricModel, ModelPair, TraceOptions};
use crate::normal_op::{ComposedNormal, NormalOptions};
use crate::solenoidal::project;
use crate::xray::{FanBeamGrid, DEFAULT_DELTA_THETA};

fn bump_model() -> ModelPair {
    ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::default_bump(),
    )
}

#[test]
fn noise_has_the_requested_level() {
    let grid = FanBeamGrid::new(
        20,
        10,
        DEFAULT_DELTA_THETA,
        Region::Inner,
        &Default::default(),
    )
    .unwrap();
    let metric = MetricModel::euclidean();
    let data = FanBeamData::from_fn(grid, &metric, |b, t| c64(b.cos(), t));
    let noisy = add_noise(&data, 0.05, 7).unwrap();
    let diff = data
        .with_values(
            noisy
                .values
                .iter()
                .zip(&data.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
        .unwrap();
    assert!((diff.norm() / data.norm() - 0.05).abs() < 1e-12);
    assert_eq!(add_noise(&data, 0.05, 7).unwrap(), noisy);
    assert_eq!(add_noise(&data, 0.0, 7).unwrap(), data);
    assert!(add_noise(&data, -1.0, 7).is_err());
}

#[test]
fn coarse_reconstruction_is_monotone_and_accurate() {
    let h = 1.0 / 16.0;
    let mesh = Arc::new(DiskMesh::new(h).unwrap());
    let model = bump_model();
    let disc = Discretization::new(mesh.clone(), model.clone());
    let grid = FanBeamGrid::new(90, 45, DEFAULT_DELTA_THETA, Region::Inner, mesh.domain()).unwrap();
    let plan = RayPlan::new(&model, &mesh, grid, &TraceOptions::for_mesh_spacing(h)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw = random_smooth_pair(&mesh, Region::Inner, &mut rng, 4, 0.4);
    let truth = project(&disc, &raw).unwrap().solenoidal;
    let data = plan.apply(&truth).unwrap();
    let (report, recovered) =
        reconstruct_solenoidal(&disc, &plan, &data, Some(&truth), &ReconOptions::default())
            .unwrap();
    assert!(report.is_monotone(), "{:?}", report.residual_history);
    assert_eq!(report.residual_history.len(), report.iterations + 1);
    assert_eq!(report.error_history.len(), report.iterations + 1);
    assert!(
        (report.error_history[report.iterations] - report.relative_error.unwrap()).abs() < 1e-12
    );
    assert!(report.relative_error.unwrap() < 0.1, "{report:?}");
    assert!(report.divergence_dual < 1e-5);
    assert_eq!(recovered.region(), Region::Inner);
}

#[test]
fn zero_data_gives_zero() {
    let h = 1.0 / 8.0;
    let mesh = Arc::new(DiskMesh::new(h).unwrap());
    let model = ModelPair::euclidean_unattenuated();
    let disc = Discretization::new(mesh.clone(), model.clone());
    let grid = FanBeamGrid::new(30, 15, DEFAULT_DELTA_THETA, Region::Inner, mesh.domain()).unwrap();
    let plan = RayPlan::new(&model, &mesh, grid, &TraceOptions::for_mesh_spacing(h)).unwrap();
    let (report, out) = reconstruct_solenoidal(
        &disc,
        &plan,
        &plan.zero_data(),
        None,
        &ReconOptions::default(),
    )
    .unwrap();
    assert!(report.converged);
    assert_eq!(report.iterations, 0);
    assert_eq!(out.max_abs(), 0.0);
}

#[test]
fn proxy_is_linear_in_the_size() {
    let base = bump_model();
    let dir = PerturbationDirection::default()
        .normalized(&base, 32)
        .unwrap();
    assert!((c3_proxy(&base, &dir.apply(&base, 1.0), 32) - 1.0).abs() < 1e-9);
    for eps in [0.0, 0.01, 0.04] {
        let p = c3_proxy(&base, &dir.apply(&base, eps), 32);
        assert!((p - eps).abs() < 1e-9 * (1.0 + eps), "{eps}: {p}");
    }
}

#[test]
fn stability_ratio_is_scale_invariant() {
    let h = 1.0 / 8.0;
    let mesh = Arc::new(DiskMesh::new(h).unwrap());
    let model = bump_model();
    let disc = Discretization::new(mesh.clone(), model.clone());
    let normal = ComposedNormal::new(&model, &mesh, &NormalOptions::for_mesh_spacing(h)).unwrap();
    let projector = Projector::new(&disc, Region::Inner).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = PairField::smoothed_noise(&mesh, Region::Inner, &mut rng, 2);
    let r1 = stability::stability_ratio(&disc, &projector, &normal, &f)
        .unwrap()
        .unwrap();
    let r2 = stability::stability_ratio(&disc, &projector, &normal, &f.scale(c64(-3.5, 2.0)))
        .unwrap()
        .unwrap();
    assert!((r1 - r2).abs() <= 1e-10 * r1);

    // A gauge pair is rejected.
    let w = crate::mesh::CovScalarPair::from_fn(&mesh, Region::Inner, |x| {
        let b = (1.0 - x.norm_squared()).max(0.0);
        [c64(b * x[0], 0.0), c64(0.0, b), c64(b, b * x[1])]
    });
    let mut w = w;
    w.zero_boundary();
    let g = disc.apply_d_a(&w);
    assert_eq!(
        stability::stability_ratio(&disc, &projector, &normal, &g).unwrap(),
        None
    );

    let report = stability_ratio_experiment(&disc, &normal, 4, 5).unwrap();
    assert_eq!(report.samples, 4);
    assert!(report.spread >= 1.0 && report.min > 0.0);
}
