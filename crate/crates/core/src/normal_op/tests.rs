use std::f64::consts::PI;

use super::*;
use crate::c64;
use crate::geometry::{AttenuationModel, MetricModel};

fn euclidean() -> ModelPair {
    ModelPair::new(MetricModel::euclidean(), AttenuationModel::zero())
}

#[test]
fn euclidean_symbol_blocks() {
    let opts = TraceOptions::default();
    let xi = Vec2::new(0.6, 0.8);
    let s = principal_symbol(&euclidean(), 1.2, &Vec2::new(0.1, -0.2), &xi, &opts).unwrap();
    let w = Vec2::new(-0.8, 0.6);
    let l = [w[0] * w[0], w[0] * w[1], w[1] * w[1]];
    let e = [w[0] * w[0], 2.0 * w[0] * w[1], w[1] * w[1]];
    let b = s.blocks();
    for i in 0..3 {
        for j in 0..3 {
            assert!((b.b22[i][j] - 4.0 * PI * l[i] * e[j]).abs() < 1e-12);
        }
        for j in 0..2 {
            assert!(b.b21[i][j].abs() < 1e-12);
            assert!(b.b12[j][i].abs() < 1e-12);
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            assert!((b.b11[i][j] - 4.0 * PI * w[i] * w[j]).abs() < 1e-12);
        }
    }
    assert!((s.min_restricted_eig() - 4.0 * PI).abs() < 1e-10);
}

#[test]
fn symbol_is_homogeneous_and_positive() {
    let opts = TraceOptions::default();
    let model = ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::bump([0.2, -0.1], 0.4, c64(0.8, 0.0)),
    );
    for k in 0..20 {
        let t = k as f64;
        let x = Vec2::new(0.7 * (1.3 * t).cos(), 0.7 * (0.7 * t).sin());
        let xi = Vec2::new((2.1 * t).cos(), (2.1 * t).sin()) * (0.5 + 0.1 * t);
        let s = principal_symbol(&model, 1.2, &x, &xi, &opts).unwrap();
        let s2 = principal_symbol(&model, 1.2, &x, &(xi * 2.0), &opts).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!(
                    (s2.matrix[i][j] - 0.5 * s.matrix[i][j]).abs()
                        < 1e-12 * (1.0 + s.matrix[i][j].abs())
                );
            }
        }
        assert!(s.eigenvalues()[0] >= -1e-12);
        assert!(s.min_restricted_eig() > 0.0);
        assert!(
            (s2.min_restricted_eig() - 0.5 * s.min_restricted_eig()).abs()
                < 1e-12 * s.min_restricted_eig()
        );
    }
    assert!(principal_symbol(&model, 1.2, &Vec2::zeros(), &Vec2::zeros(), &opts).is_err());
}

#[test]
fn direct_normal_is_linear_and_vanishes_on_zero() {
    let mesh = Arc::new(DiskMesh::new(0.25).unwrap());
    let model = ModelPair::new(
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2),
        AttenuationModel::default_bump(),
    );
    let opts = NormalOptions {
        n_dir: 16,
        trace: TraceOptions::for_mesh_spacing(0.25),
    };
    let zero = PairField::zeros(&mesh, Region::Inner);
    assert_eq!(
        normal_apply_direct(&model, &zero, &opts).unwrap().max_abs(),
        0.0
    );
    let f = PairField::from_fn(&mesh, Region::Inner, |x| {
        [
            c64(1.0, x[0]),
            c64(0.2, 0.0),
            c64(x[1], 0.5),
            c64(0.3, 0.0),
            c64(0.0, x[0] * x[1]),
        ]
    });
    let c = c64(0.3, -1.7);
    let out = normal_apply_direct_batch(&model, &[f.clone(), f.scale(c)], &opts).unwrap();
    let scale = out[0].max_abs();
    for (p, q) in out[0].values().iter().zip(out[1].values()) {
        for k in 0..5 {
            assert!((p[k] * c - q[k]).norm() <= 1e-12 * scale);
        }
    }
}

#[test]
fn flat_oscillatory_vector_symbol() {
    let h = 1.0 / 32.0;
    let mesh = Arc::new(DiskMesh::new(h).unwrap());
    let xi = Vec2::new(1.0, 0.0);
    let p0 = [
        c64(0.0, 0.0),
        c64(0.0, 0.0),
        c64(0.0, 0.0),
        c64(0.0, 0.0),
        c64(1.0, 0.0),
    ];
    let opts = OscillatoryOptions::for_mesh_spacing(h);
    let r = symbol_oscillatory_test(&euclidean(), &mesh, &Vec2::zeros(), &xi, 20.0, &p0, &opts)
        .unwrap();
    assert!(r.defect <= 0.2, "defect {}", r.defect);
}
