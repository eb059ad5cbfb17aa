//! The normal operator `Ñ_a = 𝐈̃_a* 𝐈̃_a` on the extended disk, either by
//! quadrature of its kernel along full chords or as the adjoint of the
//! forward transform, and its principal symbol.

mod symbol;

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::geometry::{trace_with, ModelPair, Region, TraceOptions};
use crate::mesh::{sphere_weights, DiskMesh, PairField};
use crate::xray::{
    direction, lowered_moments, AdjointPlan, FanBeamGrid, RayPlan, DEFAULT_DIRECTIONS,
};
use crate::Vec2;

pub use symbol::{
    ellipticity_check, principal_symbol, symbol_oscillatory_test, EllipticityReport,
    OscillatoryOptions, OscillatoryReport, SymbolBlocks, SymbolMatrix, MAX_PHASE_PER_CELL,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Direction count and geodesic step for normal-operator quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalOptions {
    pub n_dir: usize,
    pub trace: TraceOptions,
}

impl NormalOptions {
    pub fn for_mesh_spacing(h: f64) -> Self {
        NormalOptions {
            n_dir: DEFAULT_DIRECTIONS,
            trace: TraceOptions::for_mesh_spacing(h),
        }
    }
}

#[derive(Clone, Copy)]
struct ChordSample {
    t: f64,
    x: Vec2,
    v: Vec2,
    a: Complex64,
}

/// Samples of the unit-speed geodesic from `(x, v)` to the boundary of `M̃`.
fn half_chord(
    model: &ModelPair,
    x: &Vec2,
    v: &Vec2,
    radius: f64,
    opts: &TraceOptions,
) -> Result<Vec<ChordSample>> {
    let mut out = Vec::with_capacity(128);
    trace_with(&model.metric, x, v, radius, opts, |t, y, w| {
        out.push(ChordSample {
            t,
            x: *y,
            v: *w,
            a: model.attenuation.value(y),
        })
    })?;
    Ok(out)
}

/// Running trapezoid integral of `a` and trapezoid weights on a half chord.
fn phase_and_weights(s: &[ChordSample]) -> (Vec<Complex64>, Vec<f64>) {
    let n = s.len();
    let mut phase = Vec::with_capacity(n);
    let mut acc = ZERO;
    for k in 0..n {
        if k > 0 {
            acc += (s[k].a + s[k - 1].a) * (0.5 * (s[k].t - s[k - 1].t));
        }
        phase.push(acc);
    }
    let weights = (0..n)
        .map(|k| {
            let left = if k > 0 { s[k].t - s[k - 1].t } else { 0.0 };
            let right = if k + 1 < n { s[k + 1].t - s[k].t } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    (phase, weights)
}

/// Fields of a batch sampled along a half chord: `values[k][b]` holds the
/// tensor and one-form parts of field `b` at sample `k`, evaluated on the
/// traced velocity. Samples outside the support are left empty.
fn sample_fields(
    fields: &[PairField],
    support: f64,
    s: &[ChordSample],
) -> Result<Vec<Vec<(Complex64, Complex64)>>> {
    let mesh = fields[0].mesh();
    let region = fields[0].region();
    let tris = mesh.triangles();
    s.iter()
        .map(|p| {
            if p.x.norm() > support {
                return Ok(Vec::new());
            }
            let loc = mesh.locate(&p.x, region)?;
            let t = tris[loc.tri as usize];
            let e = sphere_weights(&p.v);
            Ok(fields
                .iter()
                .map(|f| {
                    let vals = f.values();
                    let (mut even, mut odd) = (ZERO, ZERO);
                    for k in 0..3 {
                        let q = &vals[t[k] as usize];
                        even += (q[0] * e[0] + q[1] * e[1] + q[2] * e[2]) * loc.bary[k];
                        odd += (q[3] * e[3] + q[4] * e[4]) * loc.bary[k];
                    }
                    (even, odd)
                })
                .collect())
        })
        .collect()
}

/// Radius beyond which every field of the batch vanishes identically on
/// the P1 mesh.
fn support_radius(fields: &[PairField]) -> f64 {
    let mesh = fields[0].mesh();
    let region = fields[0].region();
    let nodes = mesh.nodes();
    let last = fields
        .iter()
        .flat_map(|f| {
            f.values()
                .iter()
                .enumerate()
                .filter(|(_, p)| p.iter().any(|z| *z != ZERO))
                .map(|(i, _)| nodes[i].norm())
        })
        .fold(0.0, f64::max);
    (last + 1.5 * mesh.ring_step()).min(mesh.domain().radius(region))
}

/// `Ñ_a F` for every field of `fields` at the points `xs`, by quadrature of
/// the kernel: for each direction `v`, the weight `Ũ_{-ā}(x, v)` times the
/// attenuated integral of `F` over the whole chord through `(x, v)`,
/// accumulated against the lowered moments of `v`.
pub fn normal_apply_direct_at(
    model: &ModelPair,
    fields: &[PairField],
    xs: &[Vec2],
    opts: &NormalOptions,
) -> Result<Vec<Vec<[Complex64; 5]>>> {
    if fields.is_empty() {
        return Ok(vec![Vec::new(); xs.len()]);
    }
    let mesh = fields[0].mesh();
    for f in fields {
        if !Arc::ptr_eq(f.mesh(), mesh) || f.region() != fields[0].region() {
            return Err(GeoError::Contract(
                "batched fields must share one mesh region".into(),
            ));
        }
        if !f.is_finite() {
            return Err(GeoError::NonFinite("normal operator input"));
        }
    }
    if opts.n_dir < 2 || !opts.n_dir.is_multiple_of(2) {
        return Err(GeoError::Contract(format!(
            "direction count must be even, got {}",
            opts.n_dir
        )));
    }
    let radius = mesh.domain().radius(Region::Extended);
    let support = support_radius(fields);
    let nb = fields.len();
    let half = opts.n_dir / 2;
    let scale = TAU / opts.n_dir as f64;
    xs.par_iter()
        .map(|x| {
            let g = model.metric.metric(x);
            let frame = model.metric.orthonormal_frame(x);
            let mut out = vec![[ZERO; 5]; nb];
            for k in 0..half {
                let v = direction(&frame, k, opts.n_dir);
                let fwd = half_chord(model, x, &v, radius, &opts.trace)?;
                let bwd = half_chord(model, x, &-v, radius, &opts.trace)?;
                let (pf, wf) = phase_and_weights(&fwd);
                let (pb, wb) = phase_and_weights(&bwd);
                let sf = sample_fields(fields, support, &fwd)?;
                let sb = sample_fields(fields, support, &bwd)?;
                let af = *pf.last().expect("chord has samples");
                let ab = *pb.last().expect("chord has samples");
                // Direction v enters where the backward half ends, -v where the
                // forward half ends. On the half behind x the traced velocity
                // opposes the chord, which flips the one-form part.
                let halves = [
                    (ab, v, (&pf, &wf, &sf), (&pb, &wb, &sb)),
                    (af, -v, (&pb, &wb, &sb), (&pf, &wf, &sf)),
                ];
                for (enter, dir, ahead, behind) in halves {
                    let mut acc = vec![ZERO; nb];
                    for (k, vals) in ahead.2.iter().enumerate() {
                        if !vals.is_empty() {
                            let c = (enter + ahead.0[k]).exp() * ahead.1[k];
                            for (y, (even, odd)) in acc.iter_mut().zip(vals) {
                                *y += c * (even + odd);
                            }
                        }
                    }
                    for (k, vals) in behind.2.iter().enumerate() {
                        if !vals.is_empty() {
                            let c = (enter - behind.0[k]).exp() * behind.1[k];
                            for (y, (even, odd)) in acc.iter_mut().zip(vals) {
                                *y += c * (even - odd);
                            }
                        }
                    }
                    let weight = enter.conj().exp() * scale;
                    let m = lowered_moments(&g, &dir);
                    for (o, y) in out.iter_mut().zip(&acc) {
                        let y = y * weight;
                        for c in 0..5 {
                            o[c] += y * m[c];
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// `Ñ_a F` at every node of `M̃` for a batch of fields on `M` (or any
/// sub-disk), extended by zero.
pub fn normal_apply_direct_batch(
    model: &ModelPair,
    fields: &[PairField],
    opts: &NormalOptions,
) -> Result<Vec<PairField>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let mesh = first.mesh().clone();
    let n = mesh.node_count(Region::Extended);
    let nodes = &mesh.nodes()[..n];
    let per_node = normal_apply_direct_at(model, fields, nodes, opts)?;
    (0..fields.len())
        .map(|b| {
            PairField::from_values(
                &mesh,
                Region::Extended,
                per_node.iter().map(|p| p[b]).collect(),
            )
        })
        .collect()
}

/// `Ñ_a F` at every node of `M̃` by kernel quadrature.
pub fn normal_apply_direct(
    model: &ModelPair,
    f: &PairField,
    opts: &NormalOptions,
) -> Result<PairField> {
    Ok(normal_apply_direct_batch(model, std::slice::from_ref(f), opts)?.remove(0))
}

/// `Ñ_a` as the analytic adjoint of the forward transform on `M̃`, with
/// both ray caches built once.
#[derive(Debug)]
pub struct ComposedNormal {
    forward: RayPlan,
    adjoint: AdjointPlan,
}

impl ComposedNormal {
    pub fn new(model: &ModelPair, mesh: &Arc<DiskMesh>, opts: &NormalOptions) -> Result<Self> {
        let grid = FanBeamGrid::standard(Region::Extended, mesh.domain());
        Self::with_grid(model, mesh, grid, opts)
    }

    pub fn with_grid(
        model: &ModelPair,
        mesh: &Arc<DiskMesh>,
        grid: FanBeamGrid,
        opts: &NormalOptions,
    ) -> Result<Self> {
        if grid.region != Region::Extended {
            return Err(GeoError::Contract(
                "the normal operator lives on the extended disk".into(),
            ));
        }
        Ok(ComposedNormal {
            forward: RayPlan::new(model, mesh, grid, &opts.trace)?,
            adjoint: AdjointPlan::new(model, mesh, grid, opts.n_dir, &opts.trace)?,
        })
    }

    pub fn forward_plan(&self) -> &RayPlan {
        &self.forward
    }

    pub fn adjoint_plan(&self) -> &AdjointPlan {
        &self.adjoint
    }

    /// `Ñ_a F` for `F` on any sub-disk of `M̃`, extended by zero.
    pub fn apply(&self, f: &PairField) -> Result<PairField> {
        let f = f.extend_by_zero(Region::Extended)?;
        self.adjoint.apply(&self.forward.apply(&f)?)
    }
}

/// `Ñ_a F` on `M̃` as adjoint after forward (builds one-off plans).
pub fn normal_apply_composed(
    model: &ModelPair,
    f: &PairField,
    opts: &NormalOptions,
) -> Result<PairField> {
    ComposedNormal::new(model, f.mesh(), opts)?.apply(f)
}

#[cfg(test)]
mod tests;
