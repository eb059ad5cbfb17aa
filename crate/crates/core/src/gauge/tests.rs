use std::sync::Arc;

use super::*;
use crate::c64;
use crate::geometry::{AttenuationModel, MetricModel};
use crate::mesh::DiskMesh;

#[test]
fn cutoff_is_smooth_and_bounded() {
    let c = 0.15;
    assert_eq!(collar_cutoff(0.0, c), 1.0);
    assert_eq!(collar_cutoff(0.6 * c, c), 1.0);
    assert_eq!(collar_cutoff(c, c), 0.0);
    let e = 1e-6;
    for n in [0.6 * c, c] {
        let slope = (collar_cutoff(n + e, c) - collar_cutoff(n - e, c)) / (2.0 * e);
        assert!(slope.abs() < 1e-4);
    }
    for k in 0..=100 {
        let v = collar_cutoff(c * k as f64 / 100.0, c);
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn radial_normal_component_gives_linear_potential() {
    // f = dn ⊗ dn with dn = -x/|x| · dx: w_n = x^n, φ = 0, w_s = 0.
    let model = ModelPair::new(MetricModel::euclidean(), AttenuationModel::zero());
    let opts = GaugeOptions::default();
    let bn = BoundaryNormalCoords::new(&model.metric, 1.0, opts.collar);
    let table = solve_rays(
        &model,
        |x: &Vec2| {
            let u = x / x.norm();
            Ok([
                c64(u[0] * u[0], 0.0),
                c64(u[0] * u[1], 0.0),
                c64(u[1] * u[1], 0.0),
                ZERO,
                ZERO,
            ])
        },
        &bn,
        &opts,
    )
    .unwrap();
    for k in (0..table.rays).step_by(37) {
        for j in 0..table.points_per_ray {
            let p = table.at(k, j);
            let n = j as f64 * table.dn;
            assert!((p.w_n - n).norm() < 1e-6);
            assert!(p.phi.norm() < 1e-12);
            assert!(p.w_s.norm() < 1e-6);
        }
    }
}

#[test]
fn pair_without_collar_support_is_unchanged() {
    let mesh = Arc::new(DiskMesh::new(1.0 / 32.0).unwrap());
    let model = ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::default_bump(),
    );
    let disc = Discretization::new(mesh.clone(), model);
    let f = PairField::from_fn(&mesh, Region::Inner, |x| {
        let b = (1.0 - x.norm_squared() / 0.5).max(0.0).powi(3);
        [
            c64(b, 0.1 * b),
            c64(-b * x[0], 0.0),
            c64(0.5 * b, b),
            c64(b * x[1], 0.0),
            c64(0.0, -b),
        ]
    });
    let r = boundary_gauge_normalize(&disc, &f, &GaugeOptions::default()).unwrap();
    assert_eq!(r.generator.max_abs(), 0.0);
    assert_eq!(r.normalized.values(), f.values());
    assert_eq!(r.max_normal_residual, 0.0);
}

#[test]
fn narrow_collar_is_rejected() {
    let mesh = Arc::new(DiskMesh::new(1.0 / 8.0).unwrap());
    let disc = Discretization::new(mesh.clone(), ModelPair::euclidean_unattenuated());
    let f = PairField::zeros(&mesh, Region::Inner);
    let opts = GaugeOptions {
        collar: 0.3,
        ..GaugeOptions::default()
    };
    assert!(matches!(
        boundary_gauge_normalize(&disc, &f, &opts),
        Err(GeoError::Resolution(_))
    ));
}

#[test]
fn normal_components_vanish_in_the_collar() {
    let mesh = Arc::new(DiskMesh::new(1.0 / 32.0).unwrap());
    let model = ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::default_bump_scaled(c64(0.0, 0.3)),
    );
    let disc = Discretization::new(mesh.clone(), model);
    let f = PairField::from_fn(&mesh, Region::Inner, |x| {
        [
            c64(1.0 + x[0], 0.3 * x[1]),
            c64(x[0] * x[1], -0.2),
            c64((1.5 * x[1]).cos(), x[0]),
            c64(0.4 - x[1], 0.1),
            c64((x[0] + x[1]).sin(), 0.2 * x[0]),
        ]
    });
    let r = boundary_gauge_normalize(&disc, &f, &GaugeOptions::default()).unwrap();
    assert!(r.collar_nodes > 0);
    assert!(r.boundary_generator < 1e-10);
    assert!(r.identity_residual <= 1e-8);
    assert!(
        r.max_normal_residual <= 1e-2 * r.input_max,
        "residual {} vs {}",
        r.max_normal_residual,
        r.input_max
    );
}
