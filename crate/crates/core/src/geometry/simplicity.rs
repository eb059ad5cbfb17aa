//! Numerical simplicity diagnostics: strict convexity of the boundary
//! circles and absence of conjugate points along a fan of chords.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::metric::MetricModel;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub boundary_convex: bool,
    pub conjugate_point_free: bool,
    /// Smallest normal Jacobi field magnitude after the first tenth of each
    /// sampled geodesic.
    pub min_jacobi: f64,
    /// Smallest geodesic curvature of the boundary circles.
    pub min_boundary_curvature: f64,
    /// Number of sampled geodesics that exhausted the step budget.
    pub trapped: usize,
}

impl SimplicityReport {
    pub fn is_simple(&self) -> bool {
        self.boundary_convex && self.conjugate_point_free
    }

    pub fn describe_failure(&self) -> String {
        let mut parts = Vec::new();
        if !self.boundary_convex {
            parts.push(format!(
                "boundary not strictly convex (min curvature {:.3e})",
                self.min_boundary_curvature
            ));
        }
        if !self.conjugate_point_free {
            parts.push(format!(
                "conjugate point detected (min Jacobi {:.3e}, trapped {})",
                self.min_jacobi, self.trapped
            ));
        }
        parts.join("; ")
    }
}

const BOUNDARY_SAMPLES: usize = 256;
const FOOT_POINTS: usize = 8;
const ANGLES: usize = 8;
const JACOBI_STEP: f64 = 1.0 / 64.0;
const INITIAL_FRACTION: f64 = 0.1;

/// Geodesic curvature of the circle `|x| = radius` with respect to the
/// inward normal, at angle `s`.
fn boundary_curvature(metric: &MetricModel, radius: f64, s: f64) -> f64 {
    let x = Vec2::new(radius * s.cos(), radius * s.sin());
    let xdot = Vec2::new(-radius * s.sin(), radius * s.cos());
    let accel = -x + metric.christoffel(&x).contract(&xdot);
    let g = metric.metric(&x);
    let ginv = g.try_inverse().expect("metric is positive definite");
    let n = -x / radius;
    let nn = (n.transpose() * ginv * n)[(0, 0)].sqrt();
    let speed2 = (xdot.transpose() * g * xdot)[(0, 0)];
    n.dot(&accel) / nn / speed2
}

#[derive(Clone, Copy)]
struct State {
    x: Vec2,
    v: Vec2,
    y: f64,
    dy: f64,
}

fn rhs(metric: &MetricModel, s: &State) -> State {
    let k = metric.gaussian_curvature(&s.x);
    State {
        x: s.v,
        v: metric.acceleration(&s.x, &s.v),
        y: s.dy,
        dy: -k * s.y,
    }
}

fn axpy(s: &State, d: &State, h: f64) -> State {
    State {
        x: s.x + d.x * h,
        v: s.v + d.v * h,
        y: s.y + d.y * h,
        dy: s.dy + d.dy * h,
    }
}

fn rk4(metric: &MetricModel, s: &State, h: f64) -> State {
    let k1 = rhs(metric, s);
    let k2 = rhs(metric, &axpy(s, &k1, 0.5 * h));
    let k3 = rhs(metric, &axpy(s, &k2, 0.5 * h));
    let k4 = rhs(metric, &axpy(s, &k3, h));
    State {
        x: s.x + (k1.x + k2.x * 2.0 + k3.x * 2.0 + k4.x) * (h / 6.0),
        v: s.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * (h / 6.0),
        y: s.y + (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y) * (h / 6.0),
        dy: s.dy + (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy) * (h / 6.0),
    }
}

/// Outcome of one Jacobi sweep: `None` if the geodesic was trapped.
fn jacobi_along(metric: &MetricModel, radius: f64, x0: Vec2, v0: Vec2) -> Option<(bool, f64)> {
    let mut s = State {
        x: x0,
        v: v0,
        y: 0.0,
        dy: 1.0,
    };
    let mut trace: Vec<(f64, f64)> = Vec::with_capacity(256);
    let max_steps = (30.0 / JACOBI_STEP) as usize;
    let mut t = 0.0;
    for _ in 0..max_steps {
        s = rk4(metric, &s, JACOBI_STEP);
        t += JACOBI_STEP;
        if s.x.norm() > radius {
            let cut = INITIAL_FRACTION * t;
            let mut sign_change = false;
            let mut min_abs = f64::INFINITY;
            for &(tk, yk) in &trace {
                if yk <= 0.0 {
                    sign_change = true;
                }
                if tk >= cut {
                    min_abs = min_abs.min(yk.abs());
                }
            }
            return Some((!sign_change, min_abs));
        }
        trace.push((t, s.y));
    }
    None
}

/// Checks the disk `|x| <= radius` for strict boundary convexity and
/// conjugate points along 64 chords (8 foot points × 8 inward angles).
pub fn simplicity_check_radius(metric: &MetricModel, radius: f64) -> SimplicityReport {
    let min_curv = (0..BOUNDARY_SAMPLES)
        .map(|k| boundary_curvature(metric, radius, TAU * k as f64 / BOUNDARY_SAMPLES as f64))
        .fold(f64::INFINITY, f64::min);

    let mut free = true;
    let mut min_jacobi = f64::INFINITY;
    let mut trapped = 0;
    for i in 0..FOOT_POINTS {
        let beta = TAU * i as f64 / FOOT_POINTS as f64;
        let x0 = Vec2::new(radius * beta.cos(), radius * beta.sin());
        let inward = -x0 / radius;
        let tangent = Vec2::new(-inward[1], inward[0]);
        for j in 0..ANGLES {
            let theta = -FRAC_PI_2 + PI * (j as f64 + 0.5) / ANGLES as f64;
            let d = inward * theta.cos() + tangent * theta.sin();
            let v0 = d / metric.norm(&x0, &d);
            match jacobi_along(metric, radius, x0, v0) {
                Some((ok, m)) => {
                    free &= ok;
                    min_jacobi = min_jacobi.min(m);
                }
                None => {
                    free = false;
                    trapped += 1;
                }
            }
        }
    }
    SimplicityReport {
        boundary_convex: min_curv > 0.0,
        conjugate_point_free: free,
        min_jacobi,
        min_boundary_curvature: min_curv,
        trapped,
    }
}

/// Simplicity of both the unit disk and the extended disk of the model.
pub fn simplicity_check(metric: &MetricModel) -> SimplicityReport {
    let inner = simplicity_check_radius(metric, 1.0);
    let outer = simplicity_check_radius(metric, metric.extent);
    SimplicityReport {
        boundary_convex: inner.boundary_convex && outer.boundary_convex,
        conjugate_point_free: inner.conjugate_point_free && outer.conjugate_point_free,
        min_jacobi: inner.min_jacobi.min(outer.min_jacobi),
        min_boundary_curvature: inner
            .min_boundary_curvature
            .min(outer.min_boundary_curvature),
        trapped: inner.trapped + outer.trapped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_disk_is_simple() {
        let r = simplicity_check(&MetricModel::euclidean());
        assert!(r.boundary_convex && r.conjugate_point_free);
        assert!((r.min_boundary_curvature - 1.0 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn weak_bump_is_simple() {
        let r = simplicity_check(&MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2));
        assert!(r.is_simple(), "{r:?}");
        assert!(r.min_jacobi > 0.0);
    }

    #[test]
    fn strong_bump_has_conjugate_points() {
        let r = simplicity_check(&MetricModel::conformal_bump([0.0, 0.0], 2.0, 0.2));
        assert!(!r.conjugate_point_free, "{r:?}");
    }

    #[test]
    fn flat_jacobi_field_is_linear() {
        let m = MetricModel::euclidean();
        let (ok, min) = jacobi_along(&m, 1.0, Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert!(ok);
        assert!((min - 0.2).abs() < JACOBI_STEP + 1e-12);
    }
}
