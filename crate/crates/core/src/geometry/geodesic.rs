//! Fixed-step RK4 geodesic flow with an exit crossing refined to the
//! target circle.

use num_complex::Complex64;

use super::metric::MetricModel;
use crate::error::{GeoError, Result};
use crate::Vec2;

/// Tolerance on `|v|_g - 1` for inputs and traced samples.
pub const UNIT_SPEED_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec2,
    pub v: Vec2,
}

/// A traced geodesic segment from its start to the first exit through the
/// target circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Geodesic {
    pub samples: Vec<GeodesicSample>,
    pub exit_time: f64,
    pub exit_point: Vec2,
    pub exit_direction: Vec2,
}

impl Geodesic {
    /// Composite trapezoid of `f` over the samples.
    pub fn integrate(&self, mut f: impl FnMut(&GeodesicSample) -> Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut prev: Option<(f64, Complex64)> = None;
        for s in &self.samples {
            let y = f(s);
            if let Some((t0, y0)) = prev {
                acc += (y + y0) * (0.5 * (s.t - t0));
            }
            prev = Some((s.t, y));
        }
        acc
    }

    /// Running trapezoid `∫_0^{t_k} f` at every sample.
    pub fn cumulative(&self, mut f: impl FnMut(&GeodesicSample) -> Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut acc = Complex64::new(0.0, 0.0);
        let mut prev: Option<(f64, Complex64)> = None;
        for s in &self.samples {
            let y = f(s);
            if let Some((t0, y0)) = prev {
                acc += (y + y0) * (0.5 * (s.t - t0));
            }
            out.push(acc);
            prev = Some((s.t, y));
        }
        out
    }
}

/// Integration step and step budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub step: f64,
    pub max_steps: usize,
}

impl TraceOptions {
    /// Step `h / 2` for mesh spacing `h`.
    pub fn for_mesh_spacing(h: f64) -> Self {
        Self::with_step(0.5 * h)
    }

    pub fn with_step(step: f64) -> Self {
        TraceOptions {
            step,
            max_steps: (30.0 / step).ceil() as usize,
        }
    }
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self::for_mesh_spacing(1.0 / 32.0)
    }
}

#[inline]
fn rk4(metric: &MetricModel, x: &Vec2, v: &Vec2, dt: f64) -> (Vec2, Vec2) {
    let a1 = metric.acceleration(x, v);
    let x2 = x + v * (0.5 * dt);
    let v2 = v + a1 * (0.5 * dt);
    let a2 = metric.acceleration(&x2, &v2);
    let x3 = x + v2 * (0.5 * dt);
    let v3 = v + a2 * (0.5 * dt);
    let a3 = metric.acceleration(&x3, &v3);
    let x4 = x + v3 * dt;
    let v4 = v + a3 * dt;
    let a4 = metric.acceleration(&x4, &v4);
    (
        x + (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0),
        v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0),
    )
}

fn check_start(metric: &MetricModel, x: &Vec2, v: &Vec2, radius: f64) -> Result<()> {
    if !(x.norm() <= radius * (1.0 + 1e-9)) {
        return Err(GeoError::OutsideDomain {
            x: x[0],
            y: x[1],
            radius,
            what: "target disk",
        });
    }
    let speed = metric.norm(x, v);
    if !((speed - 1.0).abs() <= UNIT_SPEED_TOL) {
        return Err(GeoError::Contract(format!(
            "tangent vector must have unit g-length, got {speed}"
        )));
    }
    Ok(())
}

/// Core tracer: calls `visit` on every interior sample and returns the exit
/// `(time, point, direction)`.
pub fn trace_with(
    metric: &MetricModel,
    x0: &Vec2,
    v0: &Vec2,
    radius: f64,
    opts: &TraceOptions,
    mut visit: impl FnMut(f64, &Vec2, &Vec2),
) -> Result<(f64, Vec2, Vec2)> {
    check_start(metric, x0, v0, radius)?;
    let r2 = radius * radius;
    let on_boundary = x0.norm_squared() >= r2 * (1.0 - 1e-12);
    if on_boundary && x0.dot(v0) >= 0.0 {
        visit(0.0, x0, v0);
        return Ok((0.0, *x0, *v0));
    }

    let dt = opts.step;
    let (mut x, mut v) = (*x0, *v0);
    let mut t = 0.0;
    for _ in 0..opts.max_steps {
        visit(t, &x, &v);
        let (xn, vn) = rk4(metric, &x, &v, dt);
        if xn.norm_squared() < r2 {
            x = xn;
            v = vn;
            t += dt;
            continue;
        }
        let phi = |s: f64| {
            let (xs, vs) = rk4(metric, &x, &v, s);
            (xs.norm_squared() - r2, xs, vs)
        };
        let (mut lo, mut flo) = (0.0, x.norm_squared() - r2);
        if flo >= 0.0 {
            // Started on the circle: find an interior point of this step.
            let mut s = 0.5 * dt;
            let mut found = false;
            for _ in 0..40 {
                let (f, _, _) = phi(s);
                if f < 0.0 {
                    lo = s;
                    flo = f;
                    found = true;
                    break;
                }
                s *= 0.5;
            }
            if !found {
                return Ok((t, x, v));
            }
        }
        let (mut hi, mut fhi) = (dt, xn.norm_squared() - r2);
        let (mut xe, mut ve) = (xn, vn);
        // Illinois regula falsi, with bisection if the secant stalls.
        let mut side = 0i32;
        for it in 0..100 {
            let s = if it % 8 == 7 {
                0.5 * (lo + hi)
            } else {
                (lo * fhi - hi * flo) / (fhi - flo)
            };
            let (f, xs, vs) = phi(s);
            xe = xs;
            ve = vs;
            if f.abs() < 1e-15 * r2 || hi - lo < 1e-14 {
                lo = s;
                hi = s;
                break;
            }
            if f < 0.0 {
                lo = s;
                flo = f;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = s;
                fhi = f;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
        }
        let s = 0.5 * (lo + hi);
        let xe = xe * (radius / xe.norm());
        visit(t + s, &xe, &ve);
        return Ok((t + s, xe, ve));
    }
    Err(GeoError::Trapped {
        x: x0[0],
        y: x0[1],
        steps: opts.max_steps,
    })
}

/// Traces the unit-speed geodesic from `(x, v)` until it leaves the disk of
/// radius `target_radius`.
pub fn geodesic_trace(
    metric: &MetricModel,
    x: &Vec2,
    v: &Vec2,
    target_radius: f64,
    opts: &TraceOptions,
) -> Result<Geodesic> {
    let mut samples = Vec::with_capacity(64);
    let (exit_time, exit_point, exit_direction) =
        trace_with(metric, x, v, target_radius, opts, |t, x, v| {
            samples.push(GeodesicSample { t, x: *x, v: *v })
        })?;
    Ok(Geodesic {
        samples,
        exit_time,
        exit_point,
        exit_direction,
    })
}

/// Exit time `τ(x, v)` without storing samples.
pub fn exit_time(
    metric: &MetricModel,
    x: &Vec2,
    v: &Vec2,
    target_radius: f64,
    opts: &TraceOptions,
) -> Result<f64> {
    trace_with(metric, x, v, target_radius, opts, |_, _, _| {}).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn bump() -> MetricModel {
        MetricModel::conformal_bump([0.0, 0.0], 0.1, 0.2)
    }

    fn unit(m: &MetricModel, x: &Vec2, theta: f64) -> Vec2 {
        let v = Vec2::new(theta.cos(), theta.sin());
        v / m.norm(x, &v)
    }

    #[test]
    fn chord_from_center() {
        let m = MetricModel::euclidean();
        let g = geodesic_trace(
            &m,
            &Vec2::zeros(),
            &Vec2::new(1.0, 0.0),
            1.0,
            &TraceOptions::default(),
        )
        .unwrap();
        assert!((g.exit_time - 1.0).abs() < 1e-12);
        assert!((g.exit_point - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        for s in &g.samples {
            assert!(s.x[1].abs() < 1e-15);
        }
    }

    #[test]
    fn non_unit_tangent_is_rejected() {
        let m = MetricModel::euclidean();
        let r = geodesic_trace(
            &m,
            &Vec2::zeros(),
            &Vec2::new(2.0, 0.0),
            1.0,
            &TraceOptions::default(),
        );
        assert!(matches!(r, Err(GeoError::Contract(_))));
    }

    #[test]
    fn outgoing_boundary_start_exits_immediately() {
        let m = MetricModel::euclidean();
        let t = exit_time(
            &m,
            &Vec2::new(1.0, 0.0),
            &Vec2::new(0.6, 0.8),
            1.0,
            &TraceOptions::default(),
        )
        .unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn step_budget_reports_trapped_geodesic() {
        let m = MetricModel::euclidean();
        let opts = TraceOptions {
            step: 1e-3,
            max_steps: 10,
        };
        let r = exit_time(&m, &Vec2::zeros(), &Vec2::new(1.0, 0.0), 1.0, &opts);
        assert!(matches!(r, Err(GeoError::Trapped { .. })));
    }

    #[test]
    fn fourth_order_self_convergence() {
        let m = MetricModel::conformal_bump([0.1, 0.0], 0.4, 0.2);
        let x = Vec2::new(-0.7, -0.3);
        let v = unit(&m, &x, 0.5);
        let end = |dt: f64| {
            let g = geodesic_trace(&m, &x, &v, 1.0, &TraceOptions::with_step(dt)).unwrap();
            (g.exit_point, g.exit_time)
        };
        let (p1, _) = end(1.0 / 8.0);
        let (p2, _) = end(1.0 / 16.0);
        let (p3, _) = end(1.0 / 32.0);
        let ratio = (p1 - p2).norm() / (p2 - p3).norm();
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn samples_stay_unit_speed_and_exit_on_circle() {
        let m = bump();
        for k in 0..16 {
            let th = k as f64 * 0.4;
            let x = Vec2::new(0.3 * th.cos(), -0.2);
            let g =
                geodesic_trace(&m, &x, &unit(&m, &x, th), 1.0, &TraceOptions::default()).unwrap();
            for s in &g.samples {
                assert!((m.norm(&s.x, &s.v) - 1.0).abs() < UNIT_SPEED_TOL);
            }
            assert!((g.exit_point.norm() - 1.0).abs() < 1e-10);
            assert!(g.exit_time > 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn euclidean_exit_time_is_chord_length(r in 0.0f64..0.95, phi in 0.0f64..TAU, th in 0.0f64..TAU) {
            let m = MetricModel::euclidean();
            let x = Vec2::new(r * phi.cos(), r * phi.sin());
            let v = Vec2::new(th.cos(), th.sin());
            let t = exit_time(&m, &x, &v, 1.0, &TraceOptions::default()).unwrap();
            let xv = x.dot(&v);
            let expect = -xv + (xv * xv + 1.0 - x.norm_squared()).sqrt();
            prop_assert!((t - expect).abs() < 1e-10);
        }

        #[test]
        fn time_reversal_returns_to_start(r in 0.0f64..0.9, phi in 0.0f64..TAU, th in 0.0f64..TAU) {
            let m = bump();
            let x = Vec2::new(r * phi.cos(), r * phi.sin());
            let v = unit(&m, &x, th);
            let opts = TraceOptions::default();
            let g = geodesic_trace(&m, &x, &v, 1.0, &opts).unwrap();
            let back = geodesic_trace(&m, &g.exit_point, &(-g.exit_direction / m.norm(&g.exit_point, &g.exit_direction)), 1.0, &opts).unwrap();
            // Walk back exactly the forward exit time.
            let t = g.exit_time;
            let s = back.samples.iter().min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap()).unwrap();
            let rest = t - s.t;
            let x_back = if rest.abs() < 1e-15 { s.x } else { rk4(&m, &s.x, &s.v, rest).0 };
            prop_assert!((x_back - x).norm() < 1e-6);
        }

        #[test]
        fn forward_plus_backward_is_full_chord(r in 0.0f64..0.9, phi in 0.0f64..TAU, th in 0.0f64..TAU) {
            let m = bump();
            let x = Vec2::new(r * phi.cos(), r * phi.sin());
            let v = unit(&m, &x, th);
            let opts = TraceOptions::default();
            let fwd = exit_time(&m, &x, &v, 1.0, &opts).unwrap();
            let bwd = geodesic_trace(&m, &x, &(-v), 1.0, &opts).unwrap();
            let d = -bwd.exit_direction;
            let full = exit_time(&m, &bwd.exit_point, &(d / m.norm(&bwd.exit_point, &d)), 1.0, &opts).unwrap();
            prop_assert!((fwd + bwd.exit_time - full).abs() < 1e-6);
        }
    }
}
