//! Hexagonal-ring triangulation of the extended disk.
//!
//! Nodes sit on concentric rings `r_k = k Δr`, ring `k` carrying `6k`
//! equispaced nodes. `Δr` divides 0.1, so the circles of radius 1.0, 1.1
//! and 1.2 are rings and each of `M`, `M₁`, `M̃` is a prefix of the node and
//! triangle arrays.

mod calculus;
mod fields;
pub mod io;
mod quadrature;

pub use calculus::{d_a_pointwise, Discretization, GradientStencil, NodeGeometry};
pub use fields::{
    sphere_value, sphere_weights, CovScalarPair, Field, PairField, COV_LABELS, PAIR_LABELS,
};
pub use quadrature::{
    cov_gram, pair_gram, Contraction, CovKind, Mat5, PairKind, QuadPoint, Quadrature,
};

use std::f64::consts::TAU;

use crate::error::{GeoError, Result};
use crate::geometry::{DiskDomain, Region};
use crate::Vec2;

/// Point location result: containing triangle and barycentric weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub tri: u32,
    pub bary: [f64; 3],
}

#[derive(Debug)]
pub struct DiskMesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[u32; 3]>,
    /// Affine inverse per triangle: `bary[1..3] = inv * (x - p0)`.
    inverse: Vec<([f64; 4], Vec2)>,
    neighbors_offset: Vec<usize>,
    neighbors: Vec<u32>,
    domain: DiskDomain,
    spacing: f64,
    ring_step: f64,
    /// Ring index of M, M₁, M̃ boundaries.
    rings: [usize; 3],
    buckets: BucketGrid,
}

#[derive(Debug)]
struct BucketGrid {
    origin: f64,
    cell: f64,
    n: usize,
    offset: Vec<usize>,
    items: Vec<u32>,
}

fn ring_offset(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        1 + 3 * k * (k - 1)
    }
}

impl DiskMesh {
    /// Mesh with target spacing `h` over the default radii.
    pub fn new(h: f64) -> Result<Self> {
        Self::with_domain(h, DiskDomain::default())
    }

    pub fn with_domain(h: f64, domain: DiskDomain) -> Result<Self> {
        domain.validate()?;
        if !(h > 0.0 && h <= 0.25) {
            return Err(GeoError::Contract(format!(
                "mesh spacing {h} outside (0, 0.25]"
            )));
        }
        // The ring step must divide all three radii.
        let unit = gcd_step(&[domain.radius_m, domain.radius_m1, domain.radius_mt])?;
        let per_unit = (unit / (h * 3f64.sqrt() / 2.0)).ceil().max(1.0);
        let dr = unit / per_unit;
        let ring_of = |r: f64| (r / dr).round() as usize;
        let rings = [
            ring_of(domain.radius_m),
            ring_of(domain.radius_m1),
            ring_of(domain.radius_mt),
        ];
        let k_max = rings[2];

        let mut nodes = Vec::with_capacity(ring_offset(k_max + 1));
        nodes.push(Vec2::zeros());
        for k in 1..=k_max {
            let r = if k == rings[0] {
                domain.radius_m
            } else if k == rings[1] {
                domain.radius_m1
            } else if k == rings[2] {
                domain.radius_mt
            } else {
                k as f64 * dr
            };
            let n = 6 * k;
            for m in 0..n {
                let a = TAU * m as f64 / n as f64;
                nodes.push(Vec2::new(r * a.cos(), r * a.sin()));
            }
        }

        let node = |k: usize, m: usize| -> u32 {
            if k == 0 {
                0
            } else {
                (ring_offset(k) + m % (6 * k)) as u32
            }
        };
        let mut triangles = Vec::with_capacity(6 * k_max * k_max);
        for k in 0..k_max {
            for s in 0..6 {
                for j in 0..=k {
                    let outer_j = node(k + 1, s * (k + 1) + j);
                    let outer_j1 = node(k + 1, s * (k + 1) + j + 1);
                    let inner_j = node(k, s * k + j);
                    triangles.push([outer_j, outer_j1, inner_j]);
                    if j < k {
                        let inner_j1 = node(k, s * k + j + 1);
                        triangles.push([inner_j, outer_j1, inner_j1]);
                    }
                }
            }
        }
        for t in triangles.iter_mut() {
            let (a, b, c) = (
                nodes[t[0] as usize],
                nodes[t[1] as usize],
                nodes[t[2] as usize],
            );
            if (b - a).perp(&(c - a)) < 0.0 {
                t.swap(1, 2);
            }
        }

        let inverse = triangles
            .iter()
            .map(|t| {
                let p0 = nodes[t[0] as usize];
                let e1 = nodes[t[1] as usize] - p0;
                let e2 = nodes[t[2] as usize] - p0;
                let det = e1.perp(&e2);
                ([e2[1] / det, -e2[0] / det, -e1[1] / det, e1[0] / det], p0)
            })
            .collect();

        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
        for t in &triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b && !adj[t[a] as usize].contains(&t[b]) {
                        adj[t[a] as usize].push(t[b]);
                    }
                }
            }
        }
        let mut neighbors_offset = Vec::with_capacity(nodes.len() + 1);
        let mut neighbors = Vec::new();
        neighbors_offset.push(0);
        for mut a in adj {
            a.sort_unstable();
            neighbors.extend(a);
            neighbors_offset.push(neighbors.len());
        }

        let buckets = BucketGrid::build(&nodes, &triangles, domain.radius_mt, h);
        Ok(DiskMesh {
            nodes,
            triangles,
            inverse,
            neighbors_offset,
            neighbors,
            domain,
            spacing: h,
            ring_step: dr,
            rings,
            buckets,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn ring_step(&self) -> f64 {
        self.ring_step
    }

    pub fn domain(&self) -> &DiskDomain {
        &self.domain
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i]
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    fn ring(&self, region: Region) -> usize {
        match region {
            Region::Inner => self.rings[0],
            Region::Middle => self.rings[1],
            Region::Extended => self.rings[2],
        }
    }

    /// Number of nodes with `|x| <= radius(region)`.
    pub fn node_count(&self, region: Region) -> usize {
        ring_offset(self.ring(region) + 1)
    }

    /// Number of triangles inside the polygon of `region`.
    pub fn triangle_count(&self, region: Region) -> usize {
        let k = self.ring(region);
        6 * k * k
    }

    /// Node indices on the boundary circle of `region`, counter-clockwise
    /// from angle 0.
    pub fn boundary_nodes(&self, region: Region) -> std::ops::Range<usize> {
        let k = self.ring(region);
        ring_offset(k)..ring_offset(k + 1)
    }

    pub fn is_boundary_node(&self, region: Region, i: usize) -> bool {
        self.boundary_nodes(region).contains(&i)
    }

    /// Neighbors of node `i` (all regions).
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.neighbors_offset[i]..self.neighbors_offset[i + 1]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i as usize]);
        0.5 * (b - a).perp(&(c - a))
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut best = f64::INFINITY;
        for t in &self.triangles {
            let p = t.map(|i| self.nodes[i as usize]);
            for k in 0..3 {
                let u = p[(k + 1) % 3] - p[k];
                let w = p[(k + 2) % 3] - p[k];
                let ang = (u.dot(&w) / (u.norm() * w.norm())).clamp(-1.0, 1.0).acos();
                best = best.min(ang.to_degrees());
            }
        }
        best
    }

    /// Barycentric coordinates of `x` in triangle `t`.
    #[inline]
    pub fn barycentric(&self, t: usize, x: &Vec2) -> [f64; 3] {
        let (m, p0) = &self.inverse[t];
        let d = x - p0;
        let l1 = m[0] * d[0] + m[1] * d[1];
        let l2 = m[2] * d[0] + m[3] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Vec2; 3] {
        let (m, _) = &self.inverse[t];
        let g1 = Vec2::new(m[0], m[1]);
        let g2 = Vec2::new(m[2], m[3]);
        [-g1 - g2, g1, g2]
    }

    /// Locates `x` among the triangles of `region`. Points of the disk that
    /// fall between the boundary circle and the polygon are assigned to the
    /// nearest boundary triangle with (slightly) negative weights, so fields
    /// extend linearly into the sliver.
    pub fn locate(&self, x: &Vec2, region: Region) -> Result<Location> {
        let radius = self.domain.radius(region);
        if !(x.norm() <= radius * (1.0 + 1e-9)) {
            return Err(GeoError::OutsideDomain {
                x: x[0],
                y: x[1],
                radius,
                what: "mesh region",
            });
        }
        let limit = self.triangle_count(region) as u32;
        let mut best: Option<Location> = None;
        let mut best_min = f64::NEG_INFINITY;
        for &t in self.buckets.candidates(x) {
            if t >= limit {
                continue;
            }
            let b = self.barycentric(t as usize, x);
            let m = b[0].min(b[1]).min(b[2]);
            if m >= -1e-12 {
                return Ok(Location { tri: t, bary: b });
            }
            if m > best_min {
                best_min = m;
                best = Some(Location { tri: t, bary: b });
            }
        }
        best.ok_or(GeoError::OutsideDomain {
            x: x[0],
            y: x[1],
            radius,
            what: "mesh region",
        })
    }
}

/// Largest step of the form `0.1 / m`, `m` integer, dividing all radii.
fn gcd_step(radii: &[f64]) -> Result<f64> {
    for m in 1..=1000 {
        let step = 0.1 / m as f64;
        if radii
            .iter()
            .all(|r| ((r / step) - (r / step).round()).abs() < 1e-9)
        {
            return Ok(step);
        }
    }
    Err(GeoError::Contract(
        "radii must be commensurate with 0.1/m".into(),
    ))
}

impl BucketGrid {
    fn build(nodes: &[Vec2], triangles: &[[u32; 3]], radius: f64, h: f64) -> Self {
        let origin = -radius - 1e-6;
        let cell = h;
        let n = ((2.0 * radius + 2e-6) / cell).ceil() as usize + 1;
        let margin = 0.05 * h;
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n * n];
        for (ti, t) in triangles.iter().enumerate() {
            let p = t.map(|i| nodes[i as usize]);
            let lo = Vec2::new(
                p[0][0].min(p[1][0]).min(p[2][0]) - margin,
                p[0][1].min(p[1][1]).min(p[2][1]) - margin,
            );
            let hi = Vec2::new(
                p[0][0].max(p[1][0]).max(p[2][0]) + margin,
                p[0][1].max(p[1][1]).max(p[2][1]) + margin,
            );
            let ix0 = (((lo[0] - origin) / cell).floor().max(0.0) as usize).min(n - 1);
            let ix1 = (((hi[0] - origin) / cell).floor().max(0.0) as usize).min(n - 1);
            let iy0 = (((lo[1] - origin) / cell).floor().max(0.0) as usize).min(n - 1);
            let iy1 = (((hi[1] - origin) / cell).floor().max(0.0) as usize).min(n - 1);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    lists[iy * n + ix].push(ti as u32);
                }
            }
        }
        let mut offset = Vec::with_capacity(n * n + 1);
        let mut items = Vec::new();
        offset.push(0);
        for l in lists {
            items.extend(l);
            offset.push(items.len());
        }
        BucketGrid {
            origin,
            cell,
            n,
            offset,
            items,
        }
    }

    #[inline]
    fn candidates(&self, x: &Vec2) -> &[u32] {
        let ix = (((x[0] - self.origin) / self.cell).floor().max(0.0) as usize).min(self.n - 1);
        let iy = (((x[1] - self.origin) / self.cell).floor().max(0.0) as usize).min(self.n - 1);
        let c = iy * self.n + ix;
        &self.items[self.offset[c]..self.offset[c + 1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_and_ring_step() {
        let m = DiskMesh::new(1.0 / 32.0).unwrap();
        assert!((m.ring_step() - 0.025).abs() < 1e-15);
        let k = 48;
        assert_eq!(m.nodes().len(), 1 + 3 * k * (k + 1));
        assert_eq!(m.triangles().len(), 6 * k * k);
        assert_eq!(m.node_count(Region::Inner), 1 + 3 * 40 * 41);
        let m16 = DiskMesh::new(1.0 / 16.0).unwrap();
        assert!((m16.ring_step() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn circles_are_exact_and_triangles_well_shaped() {
        let m = DiskMesh::new(1.0 / 32.0).unwrap();
        for (region, r) in [
            (Region::Inner, 1.0),
            (Region::Middle, 1.1),
            (Region::Extended, 1.2),
        ] {
            for i in m.boundary_nodes(region) {
                assert!((m.node(i).norm() - r).abs() < 1e-12);
            }
        }
        assert!(m.min_angle_degrees() >= 20.0, "{}", m.min_angle_degrees());
        for t in 0..m.triangles().len() {
            assert!(m.triangle_area(t) > 0.0);
        }
    }

    #[test]
    fn region_prefixes_are_consistent() {
        let m = DiskMesh::new(1.0 / 16.0).unwrap();
        let nm = m.node_count(Region::Inner);
        for t in &m.triangles()[..m.triangle_count(Region::Inner)] {
            assert!(t.iter().all(|&i| (i as usize) < nm));
        }
    }

    #[test]
    fn polygon_area_approaches_disk_area() {
        let m = DiskMesh::new(1.0 / 32.0).unwrap();
        let a: f64 = (0..m.triangle_count(Region::Inner))
            .map(|t| m.triangle_area(t))
            .sum();
        assert!((a - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn locate_rejects_outside_points() {
        let m = DiskMesh::new(1.0 / 16.0).unwrap();
        assert!(m.locate(&Vec2::new(1.05, 0.0), Region::Inner).is_err());
        assert!(m.locate(&Vec2::new(1.05, 0.0), Region::Middle).is_ok());
    }

    proptest! {
        #[test]
        fn located_barycentrics_reproduce_point(r in 0.0f64..1.2, a in 0.0f64..6.3) {
            let m = DiskMesh::new(1.0 / 16.0).unwrap();
            let x = Vec2::new(r * a.cos(), r * a.sin());
            let loc = m.locate(&x, Region::Extended).unwrap();
            let t = m.triangles()[loc.tri as usize];
            let y = m.node(t[0] as usize) * loc.bary[0]
                + m.node(t[1] as usize) * loc.bary[1]
                + m.node(t[2] as usize) * loc.bary[2];
            prop_assert!((x - y).norm() < 1e-12);
            prop_assert!(loc.bary.iter().all(|&b| b > -1e-2));
        }
    }
}
