//! Analytic adjoint `𝐈_a*` by quadrature over the unit circle at each node.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{FanBeamData, FanBeamGrid};
use crate::error::{GeoError, Result};
use crate::geometry::{trace_with, ModelPair, TraceOptions};
use crate::mesh::{DiskMesh, PairField};
use crate::Vec2;

/// Default number of directions in the circle quadrature.
pub const DEFAULT_DIRECTIONS: usize = 256;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lowered moments `(v♭⊗v♭, v♭)` in coefficient order.
#[inline]
pub(crate) fn lowered_moments(g: &crate::Mat2, v: &Vec2) -> [f64; 5] {
    let l = g * v;
    [l[0] * l[0], l[0] * l[1], l[1] * l[1], l[0], l[1]]
}

/// `k`-th of `n` equispaced unit directions in the frame `(e1, e2)`.
#[inline]
pub(crate) fn direction(frame: &(Vec2, Vec2), k: usize, n: usize) -> Vec2 {
    let phi = TAU * k as f64 / n as f64;
    frame.0 * phi.cos() + frame.1 * phi.sin()
}

#[derive(Debug, Clone, Copy)]
struct Footpoint {
    dir: u32,
    /// Lower-left corner `k0 · n_theta + j0` of the bilinear cell.
    cell: u32,
    fb: f64,
    ft: f64,
    /// `U_{-ā}(x, v) · 2π / n_dir`.
    factor: Complex64,
}

/// Footpoints on `∂_+SM` and integrating factors for every (node, direction)
/// pair, so that repeated adjoints only interpolate data.
#[derive(Debug)]
pub struct AdjointPlan {
    grid: FanBeamGrid,
    mesh: Arc<DiskMesh>,
    n_dir: usize,
    frames: Vec<(Vec2, Vec2)>,
    metrics: Vec<crate::Mat2>,
    offsets: Vec<usize>,
    feet: Vec<Footpoint>,
    clipped: usize,
}

impl AdjointPlan {
    pub fn new(
        model: &ModelPair,
        mesh: &Arc<DiskMesh>,
        grid: FanBeamGrid,
        n_dir: usize,
        opts: &TraceOptions,
    ) -> Result<Self> {
        if n_dir == 0 || n_dir > u32::MAX as usize {
            return Err(GeoError::Contract(format!(
                "invalid direction count {n_dir}"
            )));
        }
        let n = mesh.node_count(grid.region);
        let metric = &model.metric;
        let frames: Vec<(Vec2, Vec2)> = (0..n)
            .map(|i| metric.orthonormal_frame(&mesh.node(i)))
            .collect();
        let metrics = (0..n).map(|i| metric.metric(&mesh.node(i))).collect();
        let scale = TAU / n_dir as f64;
        let per_node: Vec<(Vec<Footpoint>, usize)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = mesh.node(i);
                let mut feet = Vec::with_capacity(n_dir);
                let mut clipped = 0;
                for k in 0..n_dir {
                    let v = direction(&frames[i], k, n_dir);
                    let mut acc = ZERO;
                    let mut prev: Option<(f64, Complex64)> = None;
                    let (_, p, d) = trace_with(metric, &x, &-v, grid.radius, opts, |t, y, _| {
                        let ab = model.attenuation.value(y).conj();
                        if let Some((t0, a0)) = prev {
                            acc += (ab + a0) * (0.5 * (t - t0));
                        }
                        prev = Some((t, ab));
                    })?;
                    let (beta, theta) = grid.angles(metric, &p, &-d);
                    match grid.cell(beta, theta) {
                        Some((cell, fb, ft)) => feet.push(Footpoint {
                            dir: k as u32,
                            cell: cell as u32,
                            fb,
                            ft,
                            factor: acc.exp() * scale,
                        }),
                        None => clipped += 1,
                    }
                }
                Ok((feet, clipped))
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut feet = Vec::with_capacity(per_node.iter().map(|p| p.0.len()).sum());
        let mut clipped = 0;
        for (f, c) in per_node {
            feet.extend(f);
            clipped += c;
            offsets.push(feet.len());
        }
        Ok(AdjointPlan {
            grid,
            mesh: mesh.clone(),
            n_dir,
            frames,
            metrics,
            offsets,
            feet,
            clipped,
        })
    }

    pub fn grid(&self) -> &FanBeamGrid {
        &self.grid
    }

    pub fn directions(&self) -> usize {
        self.n_dir
    }

    /// Number of (node, direction) pairs whose footpoint fell in the
    /// excluded grazing margin and contributes zero.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// `𝐈_a* w` on the plan's mesh region.
    pub fn apply(&self, data: &FanBeamData) -> Result<PairField> {
        if data.grid != self.grid {
            return Err(GeoError::Contract(
                "data grid does not match the adjoint plan".into(),
            ));
        }
        if !data.is_finite() {
            return Err(GeoError::NonFinite("adjoint input"));
        }
        let nt = self.grid.n_theta;
        let nb = self.grid.n_beta;
        let w = &data.values;
        let values = (0..self.frames.len())
            .into_par_iter()
            .map(|i| {
                let mut out = [ZERO; 5];
                for f in &self.feet[self.offsets[i]..self.offsets[i + 1]] {
                    let cell = f.cell as usize;
                    let (k0, j0) = (cell / nt, cell % nt);
                    let k1 = (k0 + 1) % nb;
                    let val = w[cell] * ((1.0 - f.fb) * (1.0 - f.ft))
                        + w[cell + 1] * ((1.0 - f.fb) * f.ft)
                        + w[k1 * nt + j0] * (f.fb * (1.0 - f.ft))
                        + w[k1 * nt + j0 + 1] * (f.fb * f.ft);
                    let v = direction(&self.frames[i], f.dir as usize, self.n_dir);
                    let m = lowered_moments(&self.metrics[i], &v);
                    let c = val * f.factor;
                    for (o, mc) in out.iter_mut().zip(m) {
                        *o += c * mc;
                    }
                }
                out
            })
            .collect();
        PairField::from_values(&self.mesh, self.grid.region, values)
    }
}

/// `𝐈_a* w` on the data grid's region (builds a one-off plan).
pub fn adjoint(
    model: &ModelPair,
    data: &FanBeamData,
    mesh: &Arc<DiskMesh>,
    n_dir: usize,
    opts: &TraceOptions,
) -> Result<(PairField, usize)> {
    let plan = AdjointPlan::new(model, mesh, data.grid, n_dir, opts)?;
    Ok((plan.apply(data)?, plan.clipped()))
}
