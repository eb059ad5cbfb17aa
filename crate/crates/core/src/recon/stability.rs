use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::Region;
use crate::mesh::{Discretization, PairField};
use crate::normal_op::ComposedNormal;
use crate::solenoidal::Projector;

/// Samples with `‖S_a F‖ < REJECT · ‖F‖` are treated as gauge pairs.
pub const REJECT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub samples: usize,
    pub rejected: usize,
    pub min: f64,
    pub max: f64,
    /// `max / min`
    pub spread: f64,
    pub ratios: Vec<f64>,
}

impl StabilityReport {
    pub fn from_ratios(ratios: Vec<f64>, rejected: usize) -> Self {
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(0.0, f64::max);
        StabilityReport {
            samples: ratios.len(),
            rejected,
            min,
            max,
            spread: max / min,
            ratios,
        }
    }
}

/// `r(F) = ‖S_a F‖_{L²(M)} / ‖Ñ_a F‖_{H¹(M̃)}` for `F` drawn as nodal white
/// noise on `M` smoothed by two Jacobi passes.
pub(crate) fn stability_ratio(
    disc: &Discretization,
    projector: &Projector,
    normal: &ComposedNormal,
    f: &PairField,
) -> Result<Option<f64>> {
    let s = disc.pair_norm(&projector.solenoidal(f)?)?;
    if !(s >= REJECT * disc.pair_norm(f)?) {
        return Ok(None);
    }
    let n = disc.pair_h1_norm(&normal.apply(f)?)?;
    if !(n > 0.0) {
        return Err(GeoError::NonFinite("normal operator of a non-gauge sample"));
    }
    Ok(Some(s / n))
}

/// Ratio statistics over `n_samples` accepted samples. At most
/// `4 · n_samples` draws are made.
pub fn stability_ratio_experiment(
    disc: &Discretization,
    normal: &ComposedNormal,
    n_samples: usize,
    seed: u64,
) -> Result<StabilityReport> {
    let mesh = disc.mesh();
    let projector = Projector::new(disc, Region::Inner)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(n_samples);
    let mut rejected = 0;
    for _ in 0..4 * n_samples.max(1) {
        if ratios.len() == n_samples {
            break;
        }
        let f = PairField::smoothed_noise(mesh, Region::Inner, &mut rng, 2);
        match stability_ratio(disc, &projector, normal, &f)? {
            Some(r) => ratios.push(r),
            None => rejected += 1,
        }
    }
    Ok(StabilityReport::from_ratios(ratios, rejected))
}
