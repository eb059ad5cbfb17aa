//! Fan-beam parametrization of `∂_+SM` and data living on it.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{DiskDomain, MetricModel, Region};
use crate::linalg::ordered_sum;
use crate::Vec2;

/// Default θ-margin keeping rays away from tangency.
pub const DEFAULT_DELTA_THETA: f64 = 0.05;

/// Boundary angles `β_k = 2πk / n_β` times direction angles `θ_j` spanning
/// `[-π/2 + δ_θ, π/2 - δ_θ]` (endpoints included), measured from the inward
/// normal towards the counter-clockwise tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanBeamGrid {
    pub n_beta: usize,
    pub n_theta: usize,
    pub delta_theta: f64,
    pub region: Region,
    pub radius: f64,
}

impl FanBeamGrid {
    pub fn new(
        n_beta: usize,
        n_theta: usize,
        delta_theta: f64,
        region: Region,
        domain: &DiskDomain,
    ) -> Result<Self> {
        if n_beta < 4 || n_theta < 2 {
            return Err(GeoError::Contract(format!(
                "fan-beam grid {n_beta}x{n_theta} is too small"
            )));
        }
        if !(delta_theta > 0.0 && delta_theta < FRAC_PI_2) {
            return Err(GeoError::Contract(format!(
                "θ-margin {delta_theta} outside (0, π/2)"
            )));
        }
        Ok(FanBeamGrid {
            n_beta,
            n_theta,
            delta_theta,
            region,
            radius: domain.radius(region),
        })
    }

    /// The 180×90 grid with the default margin.
    pub fn standard(region: Region, domain: &DiskDomain) -> Self {
        Self::new(180, 90, DEFAULT_DELTA_THETA, region, domain).expect("valid defaults")
    }

    pub fn len(&self) -> usize {
        self.n_beta * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, k: usize, j: usize) -> usize {
        k * self.n_theta + j
    }

    pub fn beta_step(&self) -> f64 {
        TAU / self.n_beta as f64
    }

    pub fn theta_max(&self) -> f64 {
        FRAC_PI_2 - self.delta_theta
    }

    pub fn theta_step(&self) -> f64 {
        2.0 * self.theta_max() / (self.n_theta - 1) as f64
    }

    pub fn beta(&self, k: usize) -> f64 {
        k as f64 * self.beta_step()
    }

    pub fn theta(&self, j: usize) -> f64 {
        -self.theta_max() + j as f64 * self.theta_step()
    }

    pub fn boundary_point(&self, beta: f64) -> Vec2 {
        Vec2::new(self.radius * beta.cos(), self.radius * beta.sin())
    }

    /// The inward unit vector with fan angles `(β, θ)`.
    pub fn ray(&self, metric: &MetricModel, beta: f64, theta: f64) -> (Vec2, Vec2) {
        let x = self.boundary_point(beta);
        let (nu, tangent) = metric.circle_frame(&x);
        (x, -nu * theta.cos() + tangent * theta.sin())
    }

    /// Fan angles of an inward unit vector `v` at a point `x` of the circle.
    pub fn angles(&self, metric: &MetricModel, x: &Vec2, v: &Vec2) -> (f64, f64) {
        let g = metric.metric(x);
        let (nu, tangent) = metric.circle_frame(x);
        let c = -(nu.transpose() * g * v)[(0, 0)];
        let s = (tangent.transpose() * g * v)[(0, 0)];
        (x[1].atan2(x[0]).rem_euclid(TAU), s.atan2(c))
    }

    /// Quadrature weight of node `(k, j)`: `Δβ · w_θ · |x'(β)|_g · cos θ`,
    /// with trapezoid weights in `θ`.
    pub fn weight(&self, metric: &MetricModel, k: usize, j: usize) -> f64 {
        let beta = self.beta(k);
        let x = self.boundary_point(beta);
        let dx = Vec2::new(-x[1], x[0]);
        let speed = metric.norm(&x, &dx);
        let end = j == 0 || j + 1 == self.n_theta;
        let wt = if end { 0.5 } else { 1.0 } * self.theta_step();
        self.beta_step() * wt * speed * self.theta(j).cos()
    }
}

/// Complex values on a fan-beam grid together with the weights of the
/// `L²_μ` quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct FanBeamData {
    pub grid: FanBeamGrid,
    pub values: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl FanBeamData {
    pub fn zeros(grid: FanBeamGrid, metric: &MetricModel) -> Self {
        Self::from_fn(grid, metric, |_, _| Complex64::new(0.0, 0.0))
    }

    /// Samples `f(β, θ)` at the grid nodes.
    pub fn from_fn(
        grid: FanBeamGrid,
        metric: &MetricModel,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for k in 0..grid.n_beta {
            for j in 0..grid.n_theta {
                values.push(f(grid.beta(k), grid.theta(j)));
                weights.push(grid.weight(metric, k, j));
            }
        }
        FanBeamData {
            grid,
            values,
            weights,
        }
    }

    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(GeoError::Contract(
                "data length does not match the grid".into(),
            ));
        }
        Ok(FanBeamData {
            grid: self.grid,
            values,
            weights: self.weights.clone(),
        })
    }

    /// `⟨u, w⟩_{L²_μ} = Σ μ-weight · u · w̄`
    pub fn inner(&self, other: &FanBeamData) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(GeoError::Contract(
                "data on different fan-beam grids".into(),
            ));
        }
        Ok(ordered_sum(self.values.len(), |i| {
            self.values[i] * other.values[i].conj() * self.weights[i]
        }))
    }

    pub fn norm(&self) -> f64 {
        ordered_sum(self.values.len(), |i| {
            self.values[i].norm_sqr() * self.weights[i]
        })
        .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Bilinear interpolation, periodic in `β`. Returns `None` when `θ` lies
    /// in the excluded margin.
    pub fn interpolate(&self, beta: f64, theta: f64) -> Option<Complex64> {
        let (idx, w) = self.grid.stencil(beta, theta)?;
        Some((0..4).map(|m| self.values[idx[m]] * w[m]).sum())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "beta_index",
            "theta_index",
            "beta",
            "theta",
            "re",
            "im",
            "weight",
        ])?;
        for k in 0..self.grid.n_beta {
            for j in 0..self.grid.n_theta {
                let i = self.grid.index(k, j);
                w.write_record(&[
                    k.to_string(),
                    j.to_string(),
                    format!("{:.17e}", self.grid.beta(k)),
                    format!("{:.17e}", self.grid.theta(j)),
                    format!("{:.17e}", self.values[i].re),
                    format!("{:.17e}", self.values[i].im),
                    format!("{:.17e}", self.weights[i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads values written by [`FanBeamData::write_csv`] onto `grid`.
    pub fn read_csv<R: Read>(input: R, grid: FanBeamGrid, metric: &MetricModel) -> Result<Self> {
        let mut data = Self::zeros(grid, metric);
        let mut seen = vec![false; grid.len()];
        let mut r = csv::Reader::from_reader(input);
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| {
                rec.get(i)
                    .ok_or_else(|| GeoError::Io(format!("missing column {i}")))
            };
            let parse_idx = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| GeoError::Io(e.to_string()))
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| GeoError::Io(e.to_string()))
            };
            let k = parse_idx(field(0)?)?;
            let j = parse_idx(field(1)?)?;
            if k >= grid.n_beta || j >= grid.n_theta {
                return Err(GeoError::Io(format!(
                    "row ({k}, {j}) outside the {}x{} grid",
                    grid.n_beta, grid.n_theta
                )));
            }
            let i = grid.index(k, j);
            data.values[i] = Complex64::new(parse(field(4)?)?, parse(field(5)?)?);
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(GeoError::Io(format!("fan-beam row {i} missing")));
        }
        Ok(data)
    }
}

impl FanBeamGrid {
    /// Lower-left cell index `k0 · n_theta + j0` and fractional offsets of
    /// `(β, θ)`, or `None` inside the grazing margin.
    pub(crate) fn cell(&self, beta: f64, theta: f64) -> Option<(usize, f64, f64)> {
        let tm = self.theta_max();
        if !(theta >= -tm && theta <= tm) {
            return None;
        }
        let sb = beta.rem_euclid(TAU) / self.beta_step();
        let k0 = (sb.floor() as usize).min(self.n_beta - 1);
        let st = (theta + tm) / self.theta_step();
        let j0 = (st.floor() as usize).min(self.n_theta - 2);
        Some((self.index(k0, j0), sb - k0 as f64, st - j0 as f64))
    }

    /// Indices and weights of the bilinear stencil at `(β, θ)`.
    pub(crate) fn stencil(&self, beta: f64, theta: f64) -> Option<([usize; 4], [f64; 4])> {
        let (cell, fb, ft) = self.cell(beta, theta)?;
        let (k0, j0) = (cell / self.n_theta, cell % self.n_theta);
        let k1 = (k0 + 1) % self.n_beta;
        Some((
            [cell, cell + 1, self.index(k1, j0), self.index(k1, j0 + 1)],
            [
                (1.0 - fb) * (1.0 - ft),
                (1.0 - fb) * ft,
                fb * (1.0 - ft),
                fb * ft,
            ],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FanBeamGrid {
        FanBeamGrid::new(
            36,
            18,
            DEFAULT_DELTA_THETA,
            Region::Inner,
            &DiskDomain::default(),
        )
        .unwrap()
    }

    #[test]
    fn rays_point_inward_with_unit_speed() {
        let m = MetricModel::conformal_bump([0.2, 0.0], 0.1, 0.2);
        let g = grid();
        for k in 0..g.n_beta {
            for j in 0..g.n_theta {
                let (x, v) = g.ray(&m, g.beta(k), g.theta(j));
                let (nu, _) = m.circle_frame(&x);
                let mu = -(nu.transpose() * m.metric(&x) * v)[(0, 0)];
                assert!(mu > 0.0 && (mu - g.theta(j).cos()).abs() < 1e-14);
                assert!((m.norm(&x, &v) - 1.0).abs() < 1e-14);
                let (b, t) = g.angles(&m, &x, &v);
                assert!((b - g.beta(k)).abs() < 1e-12 && (t - g.theta(j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weights_integrate_the_measure() {
        // ∫_{∂M} ∫ cos θ dθ ds = 2π · 2 cos δ on the euclidean unit circle.
        let g = FanBeamGrid::new(
            180,
            90,
            DEFAULT_DELTA_THETA,
            Region::Inner,
            &DiskDomain::default(),
        )
        .unwrap();
        let d = FanBeamData::from_fn(g, &MetricModel::euclidean(), |_, _| {
            Complex64::new(1.0, 0.0)
        });
        let total: f64 = d.weights.iter().sum();
        let exact = TAU * 2.0 * DEFAULT_DELTA_THETA.cos();
        assert!((total - exact).abs() < 1e-3 * exact);
        assert!(d.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn bilinear_interpolation_is_exact_on_nodes_and_linear_in_theta() {
        let m = MetricModel::euclidean();
        let g = grid();
        let d = FanBeamData::from_fn(g, &m, |b, t| Complex64::new(b.cos(), 2.0 * t));
        for k in 0..g.n_beta {
            for j in 0..g.n_theta {
                let z = d.interpolate(g.beta(k), g.theta(j)).unwrap();
                assert!((z - d.values[g.index(k, j)]).norm() < 1e-12);
            }
        }
        let z = d.interpolate(g.beta(3) + 1e-3 + TAU, 0.123).unwrap();
        assert!((z.im - 0.246).abs() < 1e-12);
        assert!(d.interpolate(0.0, g.theta_max() + 1e-3).is_none());
    }

    #[test]
    fn csv_round_trip() {
        let m = MetricModel::euclidean();
        let g = grid();
        let d = FanBeamData::from_fn(g, &m, |b, t| Complex64::new(b.sin() * t, 1.0 / (1.0 + b)));
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = FanBeamData::read_csv(buf.as_slice(), g, &m).unwrap();
        assert_eq!(back, d);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("beta_index,theta_index,beta,theta,re,im,weight\n"));
    }
}
