//! JSON run configuration.

use std::path::{Path, PathBuf};

use geotomo::geometry::{
    AttenuationModel, Bump, DiskDomain, MetricModel, ModelPair, Region, TensorBump, TraceOptions,
};
use geotomo::normal_op::NormalOptions;
use geotomo::recon::ReconOptions;
use geotomo::xray::{FanBeamGrid, DEFAULT_DELTA_THETA, DEFAULT_DIRECTIONS};
use geotomo::{c64, Complex64};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    Euclidean,
    ConformalBump {
        center: [f64; 2],
        amplitude: f64,
        width: f64,
    },
    GenericAnalytic {
        conformal: Bump,
        tensor: TensorBump,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttenuationConfig {
    Zero,
    Constant {
        value: Complex64,
    },
    AnalyticBump {
        center: [f64; 2],
        width: f64,
        amplitude: Complex64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FanBeamConfig {
    pub n_beta: usize,
    pub n_theta: usize,
    pub delta_theta: f64,
}

impl Default for FanBeamConfig {
    fn default() -> Self {
        FanBeamConfig {
            n_beta: 180,
            n_theta: 90,
            delta_theta: DEFAULT_DELTA_THETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tolerance: f64,
    pub noise: f64,
    pub discrepancy: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let r = ReconOptions::default();
        SolverConfig {
            max_iter: r.max_iter,
            tolerance: r.tolerance,
            noise: r.noise,
            discrepancy: r.discrepancy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    /// `F = [g, 0]`
    MetricPair,
    /// Sum of random Gaussian bumps.
    RandomSmooth,
    /// Pair field CSV on `M`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub kind: PhantomKind,
    pub path: Option<PathBuf>,
    pub bumps: usize,
    pub width: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            kind: PhantomKind::RandomSmooth,
            path: None,
            bumps: 6,
            width: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub transport_rays: usize,
    pub ellipticity_samples: usize,
    pub stability_samples: usize,
    pub symbol_point: [f64; 2],
    pub symbol_covector: [f64; 2],
    pub frequencies: Vec<f64>,
    pub gauge_collar: f64,
    pub perturbation_eps: Vec<f64>,
    pub perturbation_spacing: f64,
    pub perturbation_probes: usize,
    pub lanczos_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            transport_rays: 100,
            ellipticity_samples: 200,
            stability_samples: 50,
            symbol_point: [0.1, 0.2],
            symbol_covector: [0.6, 0.8],
            frequencies: vec![20.0, 40.0],
            gauge_collar: 0.15,
            perturbation_eps: vec![0.0, 0.02, 0.04],
            perturbation_spacing: 1.0 / 16.0,
            perturbation_probes: 20,
            lanczos_steps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub attenuation: AttenuationConfig,
    /// Radii of `M`, `M₁` and `M̃`.
    pub radii: [f64; 3],
    pub mesh_spacing: f64,
    pub fan_beam: FanBeamConfig,
    pub n_dir: usize,
    pub solver: SolverConfig,
    pub seed: u64,
    /// Default artifact directory; not part of the configuration hash.
    #[serde(skip_serializing)]
    pub output: PathBuf,
    pub phantom: PhantomConfig,
    pub experiments: ExperimentConfig,
}

impl Default for Config {
    fn default() -> Self {
        let d = DiskDomain::default();
        Config {
            geometry: GeometryConfig::ConformalBump {
                center: [0.0, 0.0],
                amplitude: 0.1,
                width: 0.2,
            },
            attenuation: AttenuationConfig::AnalyticBump {
                center: [0.1, 0.2],
                width: 0.5,
                amplitude: c64(0.5, 0.0),
            },
            radii: [d.radius_m, d.radius_m1, d.radius_mt],
            mesh_spacing: 1.0 / 32.0,
            fan_beam: FanBeamConfig::default(),
            n_dir: DEFAULT_DIRECTIONS,
            solver: SolverConfig::default(),
            seed: 0,
            output: PathBuf::from("out"),
            phantom: PhantomConfig::default(),
            experiments: ExperimentConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn finite_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| invalid(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let domain = self.domain()?;
        finite_positive("mesh_spacing", self.mesh_spacing)?;
        if self.mesh_spacing > 0.25 {
            return Err(invalid(format!(
                "mesh_spacing {} is coarser than 1/4",
                self.mesh_spacing
            )));
        }
        let fb = &self.fan_beam;
        if fb.n_beta < 4 || fb.n_theta < 3 {
            return Err(invalid("fan_beam needs n_beta >= 4 and n_theta >= 3"));
        }
        if !(fb.delta_theta > 0.0 && fb.delta_theta < std::f64::consts::FRAC_PI_2) {
            return Err(invalid(format!(
                "fan_beam.delta_theta must lie in (0, π/2), got {}",
                fb.delta_theta
            )));
        }
        if self.n_dir < 4 || !self.n_dir.is_multiple_of(2) {
            return Err(invalid(format!(
                "n_dir must be even and at least 4, got {}",
                self.n_dir
            )));
        }
        finite_positive("solver.tolerance", self.solver.tolerance)?;
        finite_positive("solver.discrepancy", self.solver.discrepancy)?;
        if self.solver.max_iter == 0 {
            return Err(invalid("solver.max_iter must be positive"));
        }
        if !(self.solver.noise >= 0.0 && self.solver.noise.is_finite()) {
            return Err(invalid("solver.noise must be nonnegative"));
        }
        match &self.geometry {
            GeometryConfig::Euclidean => {}
            GeometryConfig::ConformalBump {
                width, amplitude, ..
            } => {
                finite_positive("geometry.width", *width)?;
                if !amplitude.is_finite() {
                    return Err(invalid("geometry.amplitude must be finite"));
                }
            }
            GeometryConfig::GenericAnalytic { conformal, tensor } => {
                finite_positive("geometry.conformal.width", conformal.width)?;
                finite_positive("geometry.tensor.bump.width", tensor.bump.width)?;
            }
        }
        match &self.attenuation {
            AttenuationConfig::Zero => {}
            AttenuationConfig::Constant { value } => {
                if !value.is_finite() {
                    return Err(invalid("attenuation.value must be finite"));
                }
            }
            AttenuationConfig::AnalyticBump {
                width, amplitude, ..
            } => {
                finite_positive("attenuation.width", *width)?;
                if !amplitude.is_finite() {
                    return Err(invalid("attenuation.amplitude must be finite"));
                }
            }
        }
        if self.phantom.kind == PhantomKind::File && self.phantom.path.is_none() {
            return Err(invalid("phantom.kind = file requires phantom.path"));
        }
        if self.phantom.kind == PhantomKind::RandomSmooth {
            finite_positive("phantom.width", self.phantom.width)?;
        }
        let e = &self.experiments;
        finite_positive("experiments.gauge_collar", e.gauge_collar)?;
        if e.gauge_collar >= domain.radius_m {
            return Err(invalid(
                "experiments.gauge_collar must be smaller than the inner radius",
            ));
        }
        finite_positive("experiments.perturbation_spacing", e.perturbation_spacing)?;
        if e.perturbation_eps
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(invalid("experiments.perturbation_eps must be nonnegative"));
        }
        if e.frequencies.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(invalid("experiments.frequencies must be positive"));
        }
        let xi = e.symbol_covector;
        if xi[0] == 0.0 && xi[1] == 0.0 {
            return Err(invalid("experiments.symbol_covector must be nonzero"));
        }
        if (e.symbol_point[0].powi(2) + e.symbol_point[1].powi(2)).sqrt() >= domain.radius_m {
            return Err(invalid("experiments.symbol_point must lie inside M"));
        }
        if e.lanczos_steps == 0 || e.perturbation_probes == 0 {
            return Err(invalid(
                "experiments.lanczos_steps and perturbation_probes must be positive",
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DiskDomain, CliError> {
        let [m, m1, mt] = self.radii;
        DiskDomain::new(m, m1, mt).map_err(|e| invalid(format!("radii: {e}")))
    }

    pub fn model(&self) -> Result<ModelPair, CliError> {
        let extent = self.domain()?.radius_mt;
        let metric = match &self.geometry {
            GeometryConfig::Euclidean => MetricModel::euclidean(),
            GeometryConfig::ConformalBump {
                center,
                amplitude,
                width,
            } => MetricModel::conformal_bump(*center, *amplitude, *width),
            GeometryConfig::GenericAnalytic { conformal, tensor } => {
                MetricModel::generic_analytic(*conformal, *tensor)
            }
        };
        let attenuation = match &self.attenuation {
            AttenuationConfig::Zero => AttenuationModel::zero(),
            AttenuationConfig::Constant { value } => AttenuationModel::constant(*value),
            AttenuationConfig::AnalyticBump {
                center,
                width,
                amplitude,
            } => AttenuationModel::bump(*center, *width, *amplitude),
        };
        Ok(ModelPair::new(metric.with_extent(extent), attenuation))
    }

    pub fn grid(&self, region: Region) -> Result<FanBeamGrid, CliError> {
        let fb = &self.fan_beam;
        FanBeamGrid::new(
            fb.n_beta,
            fb.n_theta,
            fb.delta_theta,
            region,
            &self.domain()?,
        )
        .map_err(|e| invalid(format!("fan_beam: {e}")))
    }

    pub fn trace(&self) -> TraceOptions {
        TraceOptions::for_mesh_spacing(self.mesh_spacing)
    }

    pub fn normal(&self) -> NormalOptions {
        NormalOptions {
            n_dir: self.n_dir,
            trace: self.trace(),
        }
    }

    pub fn recon(&self) -> ReconOptions {
        ReconOptions {
            max_iter: self.solver.max_iter,
            tolerance: self.solver.tolerance,
            noise: self.solver.noise,
            discrepancy: self.solver.discrepancy,
            seed: self.seed,
        }
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = Config::default();
        c.validate().unwrap();
        let back: Config = serde_json::from_str(&c.canonical_json()).unwrap();
        assert_eq!(back.canonical_json(), c.canonical_json());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: Config = serde_json::from_str(r#"{"geometry": {"family": "euclidean"}, "attenuation": {"family": "zero"}, "mesh_spacing": 0.0625}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.fan_beam, FanBeamConfig::default());
        assert!(c.model().unwrap().metric.is_flat());
        assert!(c.model().unwrap().attenuation.is_zero());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            r#"{"radii": [1.0, 0.9, 1.2]}"#,
            r#"{"mesh_spacing": -0.1}"#,
            r#"{"solver": {"tolerance": 0.0}}"#,
            r#"{"n_dir": 7}"#,
            r#"{"phantom": {"kind": "file"}}"#,
        ];
        for text in bad {
            let c: Config = serde_json::from_str(text).unwrap();
            assert!(matches!(c.validate(), Err(CliError::Config(_))), "{text}");
        }
        assert!(serde_json::from_str::<Config>(r#"{"unknown": 1}"#).is_err());
    }
}
