//! The weighted elliptic system `δ_a d_a` with Dirichlet data, the
//! solenoidal projection, and boundary-trace recovery in the annulus.

pub mod manufactured;
mod trace;

pub use trace::{boundary_trace_recover, RecoveryOptions, TraceRecovery, MIN_DIRECTIONS};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::Region;
use crate::linalg::{self, Cholesky, CsrMatrix};
use crate::mesh::{
    d_a_pointwise, CovKind, CovScalarPair, Discretization, PairField, PairKind, QuadPoint,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Unknown count above which the solver switches to preconditioned CG.
pub const DIRECT_LIMIT: usize = 200_000;

/// Discretization of the form `(d_a W, d_a V)_{L²}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stiffness {
    /// `Dᴴ M D` with `D` the nodal `d_a` matrix and `M` the pair mass
    /// matrix. Discrete projections built on it are exact orthogonal
    /// projections of nodal pair fields.
    Nodal,
    /// Conforming P1 elements: `d_a` of the piecewise-linear interpolant
    /// evaluated at the quadrature points.
    Galerkin,
}

enum Solver {
    Direct(Cholesky),
    Iterative { diag: Vec<f64> },
}

/// Assembled stiffness of `(d_a W, d_a V)` on one region, factored on the
/// interior unknowns (Dirichlet conditions on the region's boundary circle).
pub struct EllipticSystem<'d> {
    disc: &'d Discretization,
    region: Region,
    kind: Stiffness,
    matrix: CsrMatrix,
    interior_block: CsrMatrix,
    coupling: CsrMatrix,
    n_interior: usize,
    solver: Solver,
    tolerance: f64,
}

impl std::fmt::Debug for EllipticSystem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticSystem")
            .field("region", &self.region)
            .field("kind", &self.kind)
            .field("unknowns", &self.matrix.nrows)
            .field("interior", &self.n_interior)
            .finish()
    }
}

impl<'d> EllipticSystem<'d> {
    pub fn new(disc: &'d Discretization, region: Region, kind: Stiffness) -> Result<Self> {
        let matrix = match kind {
            Stiffness::Nodal => {
                let d = disc.d_matrix(region);
                let m = disc.quadrature(region).mass::<5, PairKind>();
                d.adjoint().matmul(&m.matmul(d))
            }
            Stiffness::Galerkin => assemble_galerkin(disc, region),
        };
        let mesh = disc.mesh();
        let n_interior = 3 * mesh.boundary_nodes(region).start;
        let total = matrix.nrows;
        let interior: Vec<usize> = (0..n_interior).collect();
        let boundary: Vec<usize> = (n_interior..total).collect();
        let interior_block = matrix.submatrix(&interior, &interior);
        let coupling = matrix.submatrix(&interior, &boundary);
        let solver = if n_interior <= DIRECT_LIMIT {
            Solver::Direct(Cholesky::factor(&interior_block)?)
        } else {
            Solver::Iterative {
                diag: interior_block.diagonal().iter().map(|z| z.re).collect(),
            }
        };
        Ok(EllipticSystem {
            disc,
            region,
            kind,
            matrix,
            interior_block,
            coupling,
            n_interior,
            solver,
            tolerance: 1e-10,
        })
    }

    /// Relative residual tolerance of the iterative fallback.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn discretization(&self) -> &'d Discretization {
        self.disc
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn kind(&self) -> Stiffness {
        self.kind
    }

    /// Full stiffness matrix on all nodal unknowns of the region.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Stiffness restricted to interior unknowns.
    pub fn interior_block(&self) -> &CsrMatrix {
        &self.interior_block
    }

    pub fn interior_unknowns(&self) -> usize {
        self.n_interior
    }

    fn solve_interior(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        match &self.solver {
            Solver::Direct(llt) => Ok(llt.solve(b)),
            Solver::Iterative { diag } => {
                let (x, _) = linalg::preconditioned_cg(
                    |v| self.interior_block.mul_vec(v),
                    diag,
                    b,
                    self.tolerance,
                    20 * b.len(),
                )?;
                Ok(x)
            }
        }
    }

    /// Load vector of the functional `V ↦ (F, d_a V)` for a nodal pair.
    pub fn pair_load(&self, f: &PairField) -> Result<Vec<Complex64>> {
        if f.region() != self.region || !std::sync::Arc::ptr_eq(f.mesh(), self.disc.mesh()) {
            return Err(GeoError::Contract(
                "pair field lives on a different region or mesh".into(),
            ));
        }
        let tris = self.disc.mesh().triangles();
        Ok(self.function_load(|qp| {
            let t = tris[qp.tri as usize];
            let mut v = [ZERO; 5];
            for k in 0..3 {
                let p = &f.values()[t[k] as usize];
                for c in 0..5 {
                    v[c] += p[c] * qp.bary[k];
                }
            }
            v
        }))
    }

    /// Load vector of `V ↦ (G, d_a V)` for a pair given at quadrature points.
    pub fn function_load(&self, g: impl Fn(&QuadPoint) -> [Complex64; 5] + Sync) -> Vec<Complex64> {
        let quad = self.disc.quadrature(self.region);
        match self.kind {
            Stiffness::Nodal => self
                .disc
                .d_matrix(self.region)
                .adjoint_mul_vec(&quad.load::<5, PairKind>(g)),
            Stiffness::Galerkin => {
                let n = self.matrix.nrows;
                let mesh = self.disc.mesh();
                let parts: Vec<(u32, [Complex64; 9])> = quad
                    .points()
                    .par_iter()
                    .map(|qp| {
                        let e = element_d_a(self.disc, qp);
                        let v = g(qp);
                        let q = qp.pair_metric;
                        let mut qv = [ZERO; 5];
                        for i in 0..5 {
                            for j in 0..5 {
                                qv[i] += v[j] * q[(i, j)];
                            }
                        }
                        let mut out = [ZERO; 9];
                        for (col, o) in out.iter_mut().enumerate() {
                            for i in 0..5 {
                                *o += e[i][col].conj() * qv[i];
                            }
                            *o *= qp.weight;
                        }
                        (qp.tri, out)
                    })
                    .collect();
                let mut load = vec![ZERO; n];
                for (tri, vals) in parts {
                    let t = mesh.triangles()[tri as usize];
                    for k in 0..3 {
                        for c in 0..3 {
                            load[3 * t[k] as usize + c] += vals[3 * k + c];
                        }
                    }
                }
                load
            }
        }
    }

    /// Solves `(d_a W, d_a V) = ℓ(V)` for all interior `V`, with `W` equal
    /// to `boundary` on the boundary circle (zero when `None`).
    pub fn solve(
        &self,
        load: &[Complex64],
        boundary: Option<&CovScalarPair>,
    ) -> Result<CovScalarPair> {
        let total = self.matrix.nrows;
        if load.len() != total {
            return Err(GeoError::Contract(format!(
                "load has {} entries, expected {total}",
                load.len()
            )));
        }
        let mesh = self.disc.mesh();
        let mut w = CovScalarPair::zeros(mesh, self.region);
        let mut rhs = load[..self.n_interior].to_vec();
        if let Some(b) = boundary {
            if b.region() != self.region {
                return Err(GeoError::Contract(
                    "boundary data on a different region".into(),
                ));
            }
            let trace: Vec<Complex64> = b.as_flat()[self.n_interior..].to_vec();
            let lifted = self.coupling.mul_vec(&trace);
            linalg::axpy(&mut rhs, -Complex64::new(1.0, 0.0), &lifted);
            w.as_flat_mut()[self.n_interior..].copy_from_slice(&trace);
        }
        let x = self.solve_interior(&rhs)?;
        let res = {
            let mut r = rhs.clone();
            linalg::axpy(
                &mut r,
                -Complex64::new(1.0, 0.0),
                &self.interior_block.mul_vec(&x),
            );
            r
        };
        let scale = self.dual_norm(&rhs)?;
        let rel = if scale > 0.0 {
            self.dual_norm(&res)? / scale
        } else {
            0.0
        };
        if !(rel <= 1e-8) {
            return Err(GeoError::NoConvergence {
                residual: rel,
                iterations: 1,
            });
        }
        w.as_flat_mut()[..self.n_interior].copy_from_slice(&x);
        Ok(w)
    }

    /// `sup_V |ℓ(V)| / ‖d_a V‖` over interior test fields: `√(ℓᴴ B⁻¹ ℓ)`.
    pub fn dual_norm(&self, load: &[Complex64]) -> Result<f64> {
        let r = &load[..self.n_interior];
        let x = self.solve_interior(r)?;
        Ok(linalg::dot(r, &x).re.max(0.0).sqrt())
    }

    /// `‖d_a W‖²` for nodal `W`.
    pub fn energy(&self, w: &CovScalarPair) -> f64 {
        let v = w.as_flat();
        linalg::dot(&self.matrix.mul_vec(v), v).re
    }

    /// Estimates the extreme values of `‖d_a W‖² / ‖W‖²` over interior
    /// fields with `steps` Lanczos iterations on `B⁻¹ M`.
    pub fn coercivity(&self, steps: usize, start: &CovScalarPair) -> Result<(f64, f64)> {
        let mass = self.disc.quadrature(self.region).mass::<3, CovKind>();
        let idx: Vec<usize> = (0..self.n_interior).collect();
        let m_ii = mass.submatrix(&idx, &idx);
        let s = &start.as_flat()[..self.n_interior];
        let (lo, hi) = linalg::lanczos_extremes(
            |v| {
                self.solve_interior(&m_ii.mul_vec(v))
                    .expect("factored system")
            },
            |v| m_ii.mul_vec(v),
            s,
            steps,
        );
        Ok((1.0 / hi, 1.0 / lo))
    }
}

/// `d_a` of the nine P1 basis functions of a triangle at a quadrature
/// point, as a 5×9 matrix (columns ordered node-major, then `w1, w2, φ`).
fn element_d_a(disc: &Discretization, qp: &QuadPoint) -> [[Complex64; 9]; 5] {
    let model = disc.model();
    let mesh = disc.mesh();
    let g = model.metric.metric(&qp.x);
    let gamma = model.metric.christoffel(&qp.x);
    let a = model.attenuation.value(&qp.x);
    let grads = mesh.barycentric_gradients(qp.tri as usize);
    let mut e = [[ZERO; 9]; 5];
    for k in 0..3 {
        for c in 0..3 {
            let mut u = [ZERO; 3];
            u[c] = Complex64::new(qp.bary[k], 0.0);
            let mut du = [[ZERO; 3]; 2];
            du[0][c] = Complex64::new(grads[k][0], 0.0);
            du[1][c] = Complex64::new(grads[k][1], 0.0);
            let col = d_a_pointwise(&g, &gamma, a, &u, &du);
            for r in 0..5 {
                e[r][3 * k + c] = col[r];
            }
        }
    }
    e
}

fn assemble_galerkin(disc: &Discretization, region: Region) -> CsrMatrix {
    let mesh = disc.mesh();
    let n = mesh.node_count(region);
    let quad = disc.quadrature(region);
    let blocks: Vec<(u32, [[Complex64; 9]; 9])> = quad
        .points()
        .par_iter()
        .map(|qp| {
            let e = element_d_a(disc, qp);
            let q = qp.pair_metric;
            let mut b = [[ZERO; 9]; 9];
            for (r, row) in b.iter_mut().enumerate() {
                for (c, entry) in row.iter_mut().enumerate() {
                    let mut s = ZERO;
                    for i in 0..5 {
                        let mut qe = ZERO;
                        for j in 0..5 {
                            qe += q[(i, j)] * e[j][c];
                        }
                        s += e[i][r].conj() * qe;
                    }
                    *entry = s * qp.weight;
                }
            }
            (qp.tri, b)
        })
        .collect();
    let mut t = Vec::with_capacity(blocks.len() * 81);
    for (tri, b) in blocks {
        let nodes = mesh.triangles()[tri as usize];
        for r in 0..9 {
            for c in 0..9 {
                let row = 3 * nodes[r / 3] as usize + r % 3;
                let col = 3 * nodes[c / 3] as usize + c % 3;
                t.push((row as u32, col as u32, b[r][c]));
            }
        }
    }
    CsrMatrix::from_triplets(3 * n, 3 * n, t)
}

/// Solves the Dirichlet problem for `δ_a d_a` in weak form: finds `W` with
/// `(d_a W, d_a V) = ℓ(V)` for every interior `V` and `W = boundary` on the
/// boundary circle. For `-δ_a d_a W = R` the load is `ℓ(V) = (R, V)`.
pub fn elliptic_solve(
    system: &EllipticSystem<'_>,
    load: &[Complex64],
    boundary: Option<&CovScalarPair>,
) -> Result<CovScalarPair> {
    system.solve(load, boundary)
}

/// Outcome of the decomposition `F = S_a F + d_a W` with `W` vanishing on
/// the boundary.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub solenoidal: PairField,
    pub potential_generator: CovScalarPair,
    pub residuals: DecompositionResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionResiduals {
    pub input_norm: f64,
    pub solenoidal_norm: f64,
    pub potential_norm: f64,
    /// Weak `δ_a` of the solenoidal part in the interior dual norm,
    /// relative to `‖F‖`.
    pub divergence_dual: f64,
    /// Largest nodal entry of `S_a F + P_a F - F`.
    pub completeness: f64,
}

/// Solenoidal projection on one region, built on the nodal stiffness.
#[derive(Debug)]
pub struct Projector<'d> {
    system: EllipticSystem<'d>,
}

impl<'d> Projector<'d> {
    pub fn new(disc: &'d Discretization, region: Region) -> Result<Self> {
        Ok(Projector {
            system: EllipticSystem::new(disc, region, Stiffness::Nodal)?,
        })
    }

    pub fn system(&self) -> &EllipticSystem<'d> {
        &self.system
    }

    pub fn region(&self) -> Region {
        self.system.region
    }

    /// Splits `F` into its `a`-solenoidal part and a potential `d_a W`.
    pub fn project(&self, f: &PairField) -> Result<DecompositionResult> {
        let disc = self.system.disc;
        let load = self.system.pair_load(f)?;
        let w = self.system.solve(&load, None)?;
        let potential = disc.apply_d_a(&w);
        let solenoidal = f - &potential;
        let input_norm = disc.pair_norm(f)?;
        let divergence = self.divergence_dual(&solenoidal)?;
        let completeness = (&(&solenoidal + &potential) - f).max_abs();
        Ok(DecompositionResult {
            residuals: DecompositionResiduals {
                input_norm,
                solenoidal_norm: disc.pair_norm(&solenoidal)?,
                potential_norm: disc.pair_norm(&potential)?,
                divergence_dual: if input_norm > 0.0 {
                    divergence / input_norm
                } else {
                    divergence
                },
                completeness,
            },
            solenoidal,
            potential_generator: w,
        })
    }

    /// `S_a F`
    pub fn solenoidal(&self, f: &PairField) -> Result<PairField> {
        Ok(self.project(f)?.solenoidal)
    }

    /// Weak `δ_a F` in the dual norm against interior test fields.
    pub fn divergence_dual(&self, f: &PairField) -> Result<f64> {
        self.system.dual_norm(&self.system.pair_load(f)?)
    }
}

/// One-shot decomposition of `F` on its own region.
pub fn project(disc: &Discretization, f: &PairField) -> Result<DecompositionResult> {
    Projector::new(disc, f.region())?.project(f)
}

#[cfg(test)]
mod tests;
