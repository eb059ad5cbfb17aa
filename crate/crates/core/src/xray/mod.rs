//! The attenuated transform on fan-beam data, its analytic adjoint and the
//! transport equation along single rays.

mod adjoint;
mod forward;
mod grid;

pub use adjoint::{adjoint, AdjointPlan, DEFAULT_DIRECTIONS};
pub(crate) use adjoint::{direction, lowered_moments};
pub use forward::{
    attenuated_weights, forward, forward_lower, integrating_factor, ray_integral, transport_solve,
    RayPlan,
};
pub use grid::{FanBeamData, FanBeamGrid, DEFAULT_DELTA_THETA};
