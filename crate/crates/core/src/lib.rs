//! Attenuated geodesic X-ray transform of symmetric 2-tensor / 1-form pairs
//! on simple Riemannian disks.
//!
//! Geometry (metric, attenuation) is analytic; unknown fields live on a
//! triangulated disk covering `|x| <= 1.2` with boundary-fitted circles at
//! radii 1.0 and 1.1.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gauge;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod normal_op;
pub mod recon;
pub mod solenoidal;
pub mod xray;

pub use error::{GeoError, Result};
pub use num_complex::Complex64;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Shorthand for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
