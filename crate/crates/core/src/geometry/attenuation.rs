use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttenuationFamily {
    Zero,
    Constant,
    AnalyticBump,
}

/// `amplitude * exp(-|x - center|^2 / width)` with a complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationBump {
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: Complex64,
}

impl AttenuationBump {
    #[inline]
    fn profile(&self, x: &Vec2) -> (f64, Vec2) {
        let d = x - Vec2::new(self.center[0], self.center[1]);
        let e = (-d.norm_squared() / self.width).exp();
        (e, d * (-2.0 * e / self.width))
    }
}

/// Complex attenuation `a(x) = c + Σ_k bump_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationModel {
    pub family: AttenuationFamily,
    pub constant: Complex64,
    pub bumps: Vec<AttenuationBump>,
}

impl AttenuationModel {
    pub fn zero() -> Self {
        AttenuationModel {
            family: AttenuationFamily::Zero,
            constant: Complex64::new(0.0, 0.0),
            bumps: Vec::new(),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        AttenuationModel {
            family: AttenuationFamily::Constant,
            constant: c,
            bumps: Vec::new(),
        }
    }

    pub fn bump(center: [f64; 2], width: f64, amplitude: Complex64) -> Self {
        AttenuationModel {
            family: AttenuationFamily::AnalyticBump,
            constant: Complex64::new(0.0, 0.0),
            bumps: vec![AttenuationBump {
                center,
                width,
                amplitude,
            }],
        }
    }

    /// Default analytic attenuation: `0.5 exp(-|x - (0.1, 0.2)|^2 / 0.5)`.
    pub fn default_bump() -> Self {
        Self::bump([0.1, 0.2], 0.5, Complex64::new(0.5, 0.0))
    }

    /// The default bump profile scaled by a complex factor.
    pub fn default_bump_scaled(scale: Complex64) -> Self {
        Self::bump([0.1, 0.2], 0.5, scale * 0.5)
    }

    /// Adds `eps * direction` to the attenuation.
    pub fn perturbed(&self, direction: &AttenuationBump, eps: f64) -> Self {
        let mut out = self.clone();
        if eps != 0.0 {
            out.bumps.push(AttenuationBump {
                amplitude: direction.amplitude * eps,
                ..*direction
            });
            if out.family == AttenuationFamily::Zero {
                out.family = AttenuationFamily::AnalyticBump;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Complex64::new(0.0, 0.0)
            && self
                .bumps
                .iter()
                .all(|b| b.amplitude == Complex64::new(0.0, 0.0))
    }

    #[inline]
    pub fn value(&self, x: &Vec2) -> Complex64 {
        let mut a = self.constant;
        for b in &self.bumps {
            a += b.amplitude * b.profile(x).0;
        }
        a
    }

    /// `(∂_1 a, ∂_2 a)`
    pub fn gradient(&self, x: &Vec2) -> [Complex64; 2] {
        let mut g = [Complex64::new(0.0, 0.0); 2];
        for b in &self.bumps {
            let (_, d) = b.profile(x);
            g[0] += b.amplitude * d[0];
            g[1] += b.amplitude * d[1];
        }
        g
    }

    /// The model with `a` replaced by `scale * a` (used for `-ā`, `-2 Re a`).
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        AttenuationModel {
            family: self.family,
            constant: f(self.constant),
            bumps: self
                .bumps
                .iter()
                .map(|b| AttenuationBump {
                    amplitude: f(b.amplitude),
                    ..*b
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_differences() {
        let a = AttenuationModel::bump([0.1, -0.3], 0.4, Complex64::new(0.2, -0.7));
        let x = Vec2::new(0.35, 0.2);
        let h = 1e-6;
        let g = a.gradient(&x);
        for k in 0..2 {
            let mut e = Vec2::zeros();
            e[k] = h;
            let fd = (a.value(&(x + e)) - a.value(&(x - e))) / (2.0 * h);
            assert!((fd - g[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn map_conjugates_every_coefficient() {
        let a = AttenuationModel::default_bump_scaled(Complex64::new(0.0, 0.3));
        let b = a.map(|z| -z.conj());
        let x = Vec2::new(-0.2, 0.5);
        assert!((b.value(&x) + a.value(&x).conj()).norm() < 1e-15);
    }
}
