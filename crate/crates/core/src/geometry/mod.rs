//! Analytic geometry of the nested disks `M ⊂ M₁ ⊂ M̃`.

mod attenuation;
mod geodesic;
mod metric;
mod normal_coords;
mod simplicity;

pub use attenuation::{AttenuationBump, AttenuationFamily, AttenuationModel};
pub use geodesic::{
    exit_time, geodesic_trace, trace_with, Geodesic, GeodesicSample, TraceOptions, UNIT_SPEED_TOL,
};
pub use metric::{
    christoffel_from, Bump, Christoffel, MetricFamily, MetricJet, MetricModel, TensorBump,
    DEFAULT_EXTENT,
};
pub use normal_coords::{BoundaryNormalCoords, NormalPoint, DEFAULT_COLLAR};
pub use simplicity::{simplicity_check, simplicity_check_radius, SimplicityReport};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Which of the three nested disks a quantity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// The manifold `M`.
    Inner,
    /// The intermediate disk `M₁`.
    Middle,
    /// The extended disk `M̃`.
    Extended,
}

/// Radii of the three nested disks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskDomain {
    pub radius_m: f64,
    pub radius_m1: f64,
    pub radius_mt: f64,
}

impl Default for DiskDomain {
    fn default() -> Self {
        DiskDomain {
            radius_m: 1.0,
            radius_m1: 1.1,
            radius_mt: 1.2,
        }
    }
}

impl DiskDomain {
    pub fn new(radius_m: f64, radius_m1: f64, radius_mt: f64) -> Result<Self> {
        let d = DiskDomain {
            radius_m,
            radius_m1,
            radius_mt,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.radius_m
            && self.radius_m < self.radius_m1
            && self.radius_m1 < self.radius_mt)
        {
            return Err(GeoError::Contract(format!(
                "radii must satisfy 0 < {} < {} < {}",
                self.radius_m, self.radius_m1, self.radius_mt
            )));
        }
        Ok(())
    }

    pub fn radius(&self, region: Region) -> f64 {
        match region {
            Region::Inner => self.radius_m,
            Region::Middle => self.radius_m1,
            Region::Extended => self.radius_mt,
        }
    }
}

/// Metric and attenuation evaluated together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub metric: MetricModel,
    pub attenuation: AttenuationModel,
}

impl ModelPair {
    pub fn new(metric: MetricModel, attenuation: AttenuationModel) -> Self {
        ModelPair {
            metric,
            attenuation,
        }
    }

    pub fn euclidean_unattenuated() -> Self {
        ModelPair::new(MetricModel::euclidean(), AttenuationModel::zero())
    }
}
