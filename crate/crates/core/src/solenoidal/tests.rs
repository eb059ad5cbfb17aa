use std::sync::Arc;

use super::manufactured::{manufactured_error, potential, trace_experiment};
use super::*;
use crate::c64;
use crate::geometry::{AttenuationModel, MetricModel, ModelPair};
use crate::mesh::DiskMesh;
use crate::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bump_model() -> ModelPair {
    ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::default_bump(),
    )
}

fn disc(h: f64, model: ModelPair) -> Discretization {
    Discretization::new(Arc::new(DiskMesh::new(h).unwrap()), model)
}

/// Interior bump potential supported in `|x - center| < radius`.
fn interior_potential(
    d: &Discretization,
    region: Region,
    center: Vec2,
    radius: f64,
) -> CovScalarPair {
    CovScalarPair::from_fn(d.mesh(), region, |x| {
        let r2 = (x - center).norm_squared() / (radius * radius);
        let b = if r2 < 1.0 { (1.0 - r2).powi(4) } else { 0.0 };
        [
            c64(b * x[1], 0.5 * b),
            c64(-b, 0.2 * b * x[0]),
            c64(0.7 * b, -0.3 * b),
        ]
    })
}

#[test]
fn zero_data_gives_zero_solution() {
    let d = disc(1.0 / 16.0, bump_model());
    for kind in [Stiffness::Nodal, Stiffness::Galerkin] {
        let sys = EllipticSystem::new(&d, Region::Inner, kind).unwrap();
        let w = sys.solve(&vec![ZERO; sys.matrix().nrows], None).unwrap();
        assert_eq!(w.max_abs(), 0.0);
    }
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    for model in [bump_model(), ModelPair::euclidean_unattenuated()] {
        for kind in [Stiffness::Nodal, Stiffness::Galerkin] {
            let e0 = manufactured_error(1.0 / 16.0, &model, kind).unwrap();
            let e1 = manufactured_error(1.0 / 32.0, &model, kind).unwrap();
            let order = (e0 / e1).log2();
            assert!(
                order >= 1.8,
                "{kind:?}: errors {e0:.3e} {e1:.3e}, order {order:.2}"
            );
        }
    }
}

#[test]
fn dirichlet_trace_is_reproduced_exactly() {
    let model = bump_model();
    let d = disc(1.0 / 16.0, model.clone());
    let sys = EllipticSystem::new(&d, Region::Inner, Stiffness::Galerkin).unwrap();
    let data = CovScalarPair::from_fn(d.mesh(), Region::Inner, |x| potential(x).0);
    let w = sys
        .solve(&vec![ZERO; sys.matrix().nrows], Some(&data))
        .unwrap();
    for i in d.mesh().boundary_nodes(Region::Inner) {
        assert_eq!(w.values()[i], data.values()[i]);
    }
}

#[test]
fn stiffness_is_hermitian_and_coercive() {
    let d = disc(1.0 / 16.0, bump_model());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = CovScalarPair::smoothed_noise(d.mesh(), Region::Inner, &mut rng, 0);
    for kind in [Stiffness::Nodal, Stiffness::Galerkin] {
        let sys = EllipticSystem::new(&d, Region::Inner, kind).unwrap();
        assert!(sys.matrix().hermitian_defect() < 1e-12);
        let (lo, hi) = sys.coercivity(30, &start).unwrap();
        assert!(lo > 0.0 && hi > lo, "{kind:?}: {lo} {hi}");
    }
}

#[test]
fn gauge_pairs_have_no_solenoidal_part() {
    let model = ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::default_bump_scaled(c64(0.0, 0.3)),
    );
    let d = disc(1.0 / 32.0, model);
    let w0 = interior_potential(&d, Region::Inner, Vec2::new(0.2, -0.1), 0.6);
    let f = d.apply_d_a(&w0);
    let r = project(&d, &f).unwrap();
    assert!(r.residuals.solenoidal_norm <= 1e-2 * r.residuals.input_norm);
    assert!((&r.potential_generator - &w0).max_abs() < 1e-8 * w0.max_abs());
}

#[test]
fn projection_identities() {
    let d = disc(1.0 / 32.0, bump_model());
    let proj = Projector::new(&d, Region::Inner).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let f = PairField::smoothed_noise(d.mesh(), Region::Inner, &mut rng, 2);
        let r = proj.project(&f).unwrap();
        let norm = r.residuals.input_norm;
        assert!(r.residuals.divergence_dual <= 1e-6);
        assert!(r.residuals.completeness <= 1e-10 * f.max_abs());
        assert!(r.residuals.solenoidal_norm <= 1.1 * norm);
        let twice = proj.solenoidal(&r.solenoidal).unwrap();
        assert!(d.pair_norm(&(&twice - &r.solenoidal)).unwrap() <= 1e-6 * norm);
    }
}

#[test]
fn zero_annulus_data_gives_zero_trace() {
    let model = bump_model();
    let d = disc(1.0 / 16.0, model.clone());
    let g = PairField::zeros(d.mesh(), Region::Middle);
    let rec =
        boundary_trace_recover(&model, &g, &RecoveryOptions::for_mesh_spacing(1.0 / 16.0)).unwrap();
    assert!(rec.values.iter().flatten().all(|z| *z == ZERO));
    assert!(rec.flagged.is_empty());
}

#[test]
fn annulus_trace_recovery_and_chained_solve() {
    let r = trace_experiment(&bump_model(), 1.0 / 32.0).unwrap();
    assert!(r.min_directions >= MIN_DIRECTIONS);
    assert!(r.trace_error <= 5e-2 && r.interior_error <= 5e-2, "{r:?}");
}
