//! Boundary normal coordinates `(x', x^n)` in a collar of the circle
//! `|x| = radius`: `x'` is g-arclength of the foot point measured
//! counter-clockwise from angle 0, `x^n` the signed g-distance along the
//! inward normal geodesic (positive inside).

use std::f64::consts::TAU;

use super::metric::MetricModel;
use crate::error::{GeoError, Result};
use crate::Vec2;

/// Collar width (g-distance) used by default.
pub const DEFAULT_COLLAR: f64 = 0.15;

const TABLE_INTERVALS: usize = 1024;
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPoint {
    /// Arclength coordinate `x'` of the foot point.
    pub tangential: f64,
    /// Signed distance `x^n` to the boundary, positive inside.
    pub normal: f64,
}

#[derive(Debug, Clone)]
pub struct BoundaryNormalCoords {
    metric: MetricModel,
    radius: f64,
    collar: f64,
    step: f64,
    /// Arclength at `β_k = 2π k / TABLE_INTERVALS`.
    table: Vec<f64>,
}

impl BoundaryNormalCoords {
    pub fn new(metric: &MetricModel, radius: f64, collar: f64) -> Self {
        let mut bn = BoundaryNormalCoords {
            metric: metric.clone(),
            radius,
            collar,
            step: 1.0 / 128.0,
            table: Vec::with_capacity(TABLE_INTERVALS + 1),
        };
        let db = TAU / TABLE_INTERVALS as f64;
        let mut s = 0.0;
        bn.table.push(0.0);
        for k in 0..TABLE_INTERVALS {
            s += bn.speed_integral(k as f64 * db, (k + 1) as f64 * db);
            bn.table.push(s);
        }
        bn
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn collar(&self) -> f64 {
        self.collar
    }

    /// Total g-length of the boundary circle.
    pub fn boundary_length(&self) -> f64 {
        self.table[TABLE_INTERVALS]
    }

    /// Boundary point at angle `beta`.
    pub fn boundary_point(&self, beta: f64) -> Vec2 {
        Vec2::new(self.radius * beta.cos(), self.radius * beta.sin())
    }

    /// `|dc/dβ|_g` for the boundary parametrization by angle.
    pub fn boundary_speed(&self, beta: f64) -> f64 {
        let x = self.boundary_point(beta);
        let d = Vec2::new(-self.radius * beta.sin(), self.radius * beta.cos());
        self.metric.norm(&x, &d)
    }

    fn speed_integral(&self, a: f64, b: f64) -> f64 {
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        GL5.iter()
            .map(|&(z, w)| w * self.boundary_speed(m + r * z))
            .sum::<f64>()
            * r
    }

    /// Arclength from angle 0 to `beta` (`beta` taken modulo 2π).
    pub fn arclength(&self, beta: f64) -> f64 {
        let b = beta.rem_euclid(TAU);
        let db = TAU / TABLE_INTERVALS as f64;
        let k = ((b / db) as usize).min(TABLE_INTERVALS - 1);
        self.table[k] + self.speed_integral(k as f64 * db, b)
    }

    /// Angle of the foot point with arclength coordinate `s`.
    pub fn angle_of(&self, s: f64) -> f64 {
        let len = self.boundary_length();
        let s = s.rem_euclid(len);
        let k = self
            .table
            .partition_point(|&v| v <= s)
            .clamp(1, TABLE_INTERVALS)
            - 1;
        let db = TAU / TABLE_INTERVALS as f64;
        let mut beta =
            k as f64 * db + db * (s - self.table[k]) / (self.table[k + 1] - self.table[k]);
        for _ in 0..8 {
            let r = self.arclength(beta) - s;
            beta -= r / self.boundary_speed(beta);
            if r.abs() < 1e-15 {
                break;
            }
        }
        beta
    }

    /// Unit inward normal at angle `beta`.
    pub fn inward_normal(&self, beta: f64) -> Vec2 {
        let x = self.boundary_point(beta);
        let g = self.metric.metric(&x);
        let ginv = g.try_inverse().expect("metric is positive definite");
        let n = -x / self.radius;
        let up = ginv * n;
        up / (n.dot(&up)).sqrt()
    }

    /// Point and velocity at signed distance `t` along the normal geodesic
    /// from the foot point at angle `beta`.
    pub fn normal_flow(&self, beta: f64, t: f64) -> (Vec2, Vec2) {
        let mut x = self.boundary_point(beta);
        let mut v = self.inward_normal(beta);
        if t == 0.0 {
            return (x, v);
        }
        let n = (t.abs() / self.step).ceil().max(1.0) as usize;
        let dt = t / n as f64;
        let m = &self.metric;
        for _ in 0..n {
            let a1 = m.acceleration(&x, &v);
            let x2 = x + v * (0.5 * dt);
            let v2 = v + a1 * (0.5 * dt);
            let a2 = m.acceleration(&x2, &v2);
            let x3 = x + v2 * (0.5 * dt);
            let v3 = v + a2 * (0.5 * dt);
            let a3 = m.acceleration(&x3, &v3);
            let x4 = x + v3 * dt;
            let v4 = v + a3 * dt;
            let a4 = m.acceleration(&x4, &v4);
            x += (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0);
            v += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
        }
        (x, v)
    }

    /// Inverse map `(x', x^n) -> x`.
    pub fn to_point(&self, p: &NormalPoint) -> Result<Vec2> {
        if p.normal.abs() > self.collar + 1e-12 {
            return Err(GeoError::OutsideDomain {
                x: p.tangential,
                y: p.normal,
                radius: self.collar,
                what: "boundary collar",
            });
        }
        Ok(self.normal_flow(self.angle_of(p.tangential), p.normal).0)
    }

    /// Angle-parametrized coordinates `(β, x^n)` of `x` by Newton iteration.
    pub fn angle_coords(&self, x: &Vec2) -> Result<(f64, f64)> {
        let r = x.norm();
        let outside = || GeoError::OutsideDomain {
            x: x[0],
            y: x[1],
            radius: self.collar,
            what: "boundary collar",
        };
        let mut beta = x[1].atan2(x[0]);
        let scale = self.metric.metric(x)[(0, 0)].sqrt();
        let mut t = (self.radius - r) * scale;
        if t.abs() > 1.5 * self.collar {
            return Err(outside());
        }
        let eps = 1e-6;
        for _ in 0..40 {
            let (p, v) = self.normal_flow(beta, t);
            let res = p - x;
            if res.norm() < 1e-14 {
                break;
            }
            let (pp, _) = self.normal_flow(beta + eps, t);
            let (pm, _) = self.normal_flow(beta - eps, t);
            let jb = (pp - pm) / (2.0 * eps);
            let jac = crate::Mat2::from_columns(&[jb, v]);
            let delta = jac.try_inverse().ok_or_else(|| {
                GeoError::LinearAlgebra("singular normal-coordinate Jacobian".into())
            })? * res;
            beta -= delta[0];
            t -= delta[1];
            if delta.norm() < 1e-15 {
                break;
            }
            if t.abs() > 2.0 * self.collar {
                return Err(outside());
            }
        }
        if t.abs() > self.collar + 1e-12 {
            return Err(outside());
        }
        Ok((beta.rem_euclid(TAU), t))
    }

    /// Forward map `x -> (x', x^n)`.
    pub fn to_coords(&self, x: &Vec2) -> Result<NormalPoint> {
        let (beta, t) = self.angle_coords(x)?;
        Ok(NormalPoint {
            tangential: self.arclength(beta),
            normal: t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_coordinates_are_polar() {
        let bn = BoundaryNormalCoords::new(&MetricModel::euclidean(), 1.0, DEFAULT_COLLAR);
        assert!((bn.boundary_length() - TAU).abs() < 1e-12);
        let x = Vec2::new(0.9 * 2.0f64.cos(), 0.9 * 2.0f64.sin());
        let p = bn.to_coords(&x).unwrap();
        assert!((p.normal - 0.1).abs() < 1e-12);
        assert!((p.tangential - 2.0).abs() < 1e-12);
    }

    #[test]
    fn point_outside_collar_is_rejected() {
        let bn = BoundaryNormalCoords::new(&MetricModel::euclidean(), 1.0, DEFAULT_COLLAR);
        assert!(bn.to_coords(&Vec2::new(0.5, 0.0)).is_err());
        assert!(bn
            .to_point(&NormalPoint {
                tangential: 0.0,
                normal: 0.3
            })
            .is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let m = MetricModel::conformal_bump([0.3, 0.2], 0.3, 0.3);
        let bn = BoundaryNormalCoords::new(&m, 1.0, DEFAULT_COLLAR);
        for k in 0..12 {
            let p = NormalPoint {
                tangential: 0.53 * k as f64,
                normal: -0.12 + 0.02 * k as f64,
            };
            let x = bn.to_point(&p).unwrap();
            let q = bn.to_coords(&x).unwrap();
            let len = bn.boundary_length();
            let dt = (q.tangential - p.tangential.rem_euclid(len)).abs();
            assert!(dt.min(len - dt) < 1e-8, "{p:?} {q:?}");
            assert!((q.normal - p.normal).abs() < 1e-8);
        }
    }

    #[test]
    fn metric_is_normal_in_boundary_coordinates() {
        // g_nn = 1 and g_{n'} = 0 from finite differences of the inverse map.
        let m = MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2);
        let bn = BoundaryNormalCoords::new(&m, 1.0, DEFAULT_COLLAR);
        let e = 1e-5;
        for k in 0..16 {
            let s = 0.37 * k as f64;
            let t = 0.01 * (k % 12) as f64;
            let at = |s: f64, t: f64| {
                bn.to_point(&NormalPoint {
                    tangential: s,
                    normal: t,
                })
                .unwrap()
            };
            let x = at(s, t);
            let ds = (at(s + e, t) - at(s - e, t)) / (2.0 * e);
            let dn = (at(s, t + e) - at(s, t - e)) / (2.0 * e);
            let g = m.metric(&x);
            let gnn = (dn.transpose() * g * dn)[(0, 0)];
            let gsn = (ds.transpose() * g * dn)[(0, 0)];
            assert!((gnn - 1.0).abs() < 1e-6, "g_nn {gnn}");
            assert!(gsn.abs() < 1e-6, "g_sn {gsn}");
        }
    }
}
