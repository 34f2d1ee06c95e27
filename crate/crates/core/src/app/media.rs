//! Random Gaussian-sum contrasts.
//!
//! Each field draws from its own ChaCha20 stream of the configured seed: stream 1
//! for `γ`, stream 2 for `η`. Unseparated media draw amplitude, radius, angle and
//! width factor per Gaussian; separated media draw both amplitudes, the radius,
//! the angle, then one width factor per Gaussian. The optional peak magnitude is
//! the next draw of the same stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::grids::{PixelGrid, RealField};

pub const GAMMA_STREAM: u64 = 1;
pub const ETA_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    /// `J` Gaussians with peaks inside radius 0.5.
    Unseparated,
    /// Two Gaussians with peaks offset by `±0.3` in both coordinates.
    Separated,
}

/// Parameters of a random medium pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaSpec {
    pub kind: MediaKind,
    #[serde(rename = "J", default = "default_j")]
    pub j: usize,
    #[serde(default)]
    pub seed: u64,
    /// When set, each field is rescaled so its sup norm is drawn uniformly from `[lo, hi)`.
    #[serde(default)]
    pub magnitude: Option<[f64; 2]>,
}

fn default_j() -> usize {
    5
}

/// One Gaussian bump `c exp(−|x − x₀|² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub sigma: f64,
}

impl Gaussian {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let d2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
        self.amplitude * (-d2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// `σ = R (8 ln 2)^{-1/2}`.
pub fn sigma_from_fwhm(r: f64) -> f64 {
    r / (8.0 * 2f64.ln()).sqrt()
}

/// Parameters drawn for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDraw {
    pub gaussians: Vec<Gaussian>,
    pub scale: f64,
}

impl MediaSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind == MediaKind::Unseparated && self.j == 0 {
            return invalid("J must be at least 1");
        }
        if let Some([lo, hi]) = self.magnitude {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return invalid(format!("magnitude range must satisfy 0 <= lo < hi, got [{lo}, {hi})"));
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> Vec<Gaussian> {
        match self.kind {
            MediaKind::Unseparated => (0..self.j)
                .map(|_| {
                    let c = rng.random_range(0.0..1.0 / self.j as f64);
                    let r = rng.random_range(0.0..0.5);
                    let t = rng.random_range(0.0..2.0 * PI);
                    let center = [r * t.cos(), r * t.sin()];
                    let f = rng.random_range(0.3..1.0);
                    let width = (1.0 - center[0].abs().max(center[1].abs())) * f;
                    Gaussian { amplitude: c, center, sigma: sigma_from_fwhm(width) }
                })
                .collect(),
            MediaKind::Separated => {
                let cp = rng.random_range(0.0..0.5);
                let cm = rng.random_range(0.0..0.5);
                let r = rng.random_range(0.0..0.5);
                let t = rng.random_range(0.0..2.0 * PI);
                let mut out = Vec::with_capacity(2);
                for (c, s) in [(cp, 1.0), (cm, -1.0)] {
                    let center = [r * t.cos() + 0.3 * s, r * t.sin() + 0.3 * s];
                    let f = rng.random_range(0.3..1.0);
                    let width = (1.0 - (center[0] + 0.2).abs().max((center[1] + 0.2).abs())) * f;
                    out.push(Gaussian { amplitude: c, center, sigma: sigma_from_fwhm(width) });
                }
                out
            }
        }
    }

    fn field(&self, grid: PixelGrid, stream: u64) -> (RealField, FieldDraw) {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let gaussians = self.draw(&mut rng);
        let raw = RealField::from_fn(grid, |x| gaussians.iter().map(|g| g.eval(x)).sum());
        let scale = match self.magnitude {
            Some([lo, hi]) => {
                let target = rng.random_range(lo..hi);
                let sup = raw.sup_norm();
                if sup > 0.0 {
                    target / sup
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        (raw.scale(scale), FieldDraw { gaussians, scale })
    }
}

/// Samples `(γ, η)` on the grid (masked to the disk) with independent draws.
pub fn generate_media(spec: &MediaSpec, grid: PixelGrid) -> Result<(RealField, RealField)> {
    let (g, e, _) = generate_media_with_params(spec, grid)?;
    Ok((g, e))
}

/// As [`generate_media`], also returning the drawn parameters.
pub fn generate_media_with_params(spec: &MediaSpec, grid: PixelGrid) -> Result<(RealField, RealField, [FieldDraw; 2])> {
    spec.validate()?;
    let (g, dg) = spec.field(grid, GAMMA_STREAM);
    let (e, de) = spec.field(grid, ETA_STREAM);
    Ok((g, e, [dg, de]))
}
