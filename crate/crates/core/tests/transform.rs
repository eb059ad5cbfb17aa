use std::sync::Arc;

use geotomo::geometry::{
    AttenuationModel, DiskDomain, MetricModel, ModelPair, Region, TraceOptions,
};
use geotomo::mesh::{sphere_value, CovScalarPair, Discretization, DiskMesh, PairField};
use geotomo::xray::{FanBeamGrid, RayPlan};
use geotomo::{c64, Complex64, Vec2};
use proptest::prelude::*;

fn bump_model() -> ModelPair {
    ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::default_bump(),
    )
}

#[test]
fn gauge_pairs_are_nearly_invisible() {
    let h = 1.0 / 32.0;
    let model = bump_model();
    let mesh = Arc::new(DiskMesh::new(h).unwrap());
    let disc = Discretization::new(mesh.clone(), model.clone());
    let grid = FanBeamGrid::standard(Region::Inner, &DiskDomain::default());
    let plan = RayPlan::new(&model, &mesh, grid, &TraceOptions::for_mesh_spacing(h)).unwrap();
    let w = CovScalarPair::from_fn(&mesh, Region::Inner, |x| {
        let b = (1.0 - x.norm_squared() / 0.25).max(0.0).powi(4);
        [
            c64(b * (1.0 + x[0]), 0.0),
            c64(0.0, b * x[1]),
            c64(b, 0.5 * b),
        ]
    });
    let f = disc.apply_d_a(&w);
    let ratio = plan.apply(&f).unwrap().norm() / disc.pair_norm(&f).unwrap();
    assert!(ratio <= 1e-2, "ratio {ratio}");
}

fn flat_plan(h: f64) -> (Arc<DiskMesh>, RayPlan, FanBeamGrid) {
    let model = ModelPair::euclidean_unattenuated();
    let mesh = Arc::new(DiskMesh::new(h).unwrap());
    let grid = FanBeamGrid::new(24, 12, 0.05, Region::Inner, &DiskDomain::default()).unwrap();
    let plan = RayPlan::new(&model, &mesh, grid, &TraceOptions::for_mesh_spacing(h)).unwrap();
    (mesh, plan, grid)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_pairs_integrate_along_chords(p in prop::array::uniform5(-1.0f64..1.0)) {
        let (mesh, plan, grid) = flat_plan(1.0 / 16.0);
        let coef = p.map(|c| c64(c, 0.0));
        let f = PairField::from_fn(&mesh, Region::Inner, |_| coef);
        let data = plan.apply(&f).unwrap();
        let metric = MetricModel::euclidean();
        for k in 0..grid.n_beta {
            for j in 0..grid.n_theta {
                let (beta, theta) = (grid.beta(k), grid.theta(j));
                let (_, v) = grid.ray(&metric, beta, theta);
                let expect = sphere_value(&coef, &v) * (2.0 * theta.cos());
                let got = data.values[grid.index(k, j)];
                prop_assert!((got - expect).norm() < 1e-3, "β = {beta}, θ = {theta}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn forward_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, s in 0.0f64..6.0) {
        let (mesh, plan, _) = flat_plan(1.0 / 8.0);
        let f = PairField::from_fn(&mesh, Region::Inner, |x| {
            [c64(x[0], 0.0), c64(0.0, x[1]), c64(1.0, 0.0), c64((s * x[0]).sin(), 0.0), c64(0.0, x.norm_squared())]
        });
        let g = PairField::from_fn(&mesh, Region::Inner, |x: &Vec2| [c64(x[1] * x[0], 1.0); 5]);
        let mut combo = f.scale(Complex64::new(a, 0.0));
        combo.axpy(c64(0.0, b), &g);
        let lhs = plan.apply(&combo).unwrap();
        let (pf, pg) = (plan.apply(&f).unwrap(), plan.apply(&g).unwrap());
        for i in 0..lhs.values.len() {
            let rhs = pf.values[i] * a + pg.values[i] * c64(0.0, b);
            prop_assert!((lhs.values[i] - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }
    }
}
