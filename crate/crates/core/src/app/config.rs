//! Run configuration read from JSON.

use serde::{Deserialize, Serialize};

use crate::app::media::{MediaKind, MediaSpec};
use crate::error::{invalid, Error, Result};
use crate::grids::{build_pnodes, PNodeSet, PixelGrid};
use crate::inverse::{FrequencyPair, ReconParams, MAX_ORDER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionsConfig {
    #[serde(default = "default_n")]
    pub n_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqConfig {
    pub k: f64,
    pub ell: f64,
}

/// Node counts; missing values follow the defaults for `k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PNodeConfig {
    #[serde(rename = "T", default)]
    pub t: Option<usize>,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    #[serde(default = "default_alpha_tilde")]
    pub alpha_tilde: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(rename = "N", default = "default_terms")]
    pub n: usize,
    /// `[k, ℓk]` per term index `≥ 2`.
    #[serde(default)]
    pub term_frequencies: Vec<[f64; 2]>,
    #[serde(default = "default_true")]
    pub real_inputs: bool,
    #[serde(default)]
    pub compare_real_projection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(rename = "J_max", default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_noise")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Full configuration of `synth`, `invert` and `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "GridConfig::default")]
    pub grid: GridConfig,
    #[serde(default = "DirectionsConfig::default")]
    pub directions: DirectionsConfig,
    pub freq: FreqConfig,
    #[serde(default)]
    pub pnodes: PNodeConfig,
    #[serde(default = "ReconConfig::default")]
    pub recon: ReconConfig,
    #[serde(default = "SynthConfig::default")]
    pub synth: SynthConfig,
    #[serde(default = "NoiseConfig::default")]
    pub noise: NoiseConfig,
    #[serde(default = "default_media")]
    pub media: MediaSpec,
}

fn default_n() -> usize {
    64
}
fn default_alpha_tilde() -> f64 {
    0.9
}
fn default_terms() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_j_max() -> usize {
    20
}
fn default_tol() -> f64 {
    1e-6
}
fn default_noise() -> f64 {
    0.02
}
fn default_media() -> MediaSpec {
    MediaSpec { kind: MediaKind::Unseparated, j: 5, seed: 0, magnitude: None }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_out: default_n() }
    }
}

impl Default for DirectionsConfig {
    fn default() -> Self {
        DirectionsConfig { n_in: default_n() }
    }
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            alpha_tilde: default_alpha_tilde(),
            epsilon: None,
            n: default_terms(),
            term_frequencies: Vec::new(),
            real_inputs: true,
            compare_real_projection: false,
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { j_max: default_j_max(), tol: default_tol() }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { level: default_noise(), seed: 0 }
    }
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.n_out < 8 {
            return invalid(format!("grid.n_out must be at least 8, got {}", self.grid.n_out));
        }
        if self.directions.n_in < 4 {
            return invalid(format!("directions.n_in must be at least 4, got {}", self.directions.n_in));
        }
        FrequencyPair::new(self.freq.k, self.freq.k * self.freq.ell)?;
        if self.synth.j_max < 1 || !(self.synth.tol > 0.0) {
            return invalid("synth.J_max must be at least 1 and synth.tol positive");
        }
        if !(self.noise.level >= 0.0) || !self.noise.level.is_finite() {
            return invalid("noise.level must be non-negative");
        }
        if self.recon.n > MAX_ORDER {
            return invalid(format!("recon.N must not exceed {MAX_ORDER}"));
        }
        self.recon_params()?;
        self.pnode_set()?;
        self.media.validate()
    }

    pub fn grid(&self) -> Result<PixelGrid> {
        PixelGrid::new(self.grid.n_out)
    }

    pub fn pair(&self) -> Result<FrequencyPair> {
        FrequencyPair::new(self.freq.k, self.freq.k * self.freq.ell)
    }

    /// `T` defaults to `⌈k⌉ + 8`, `M` to `4T`.
    pub fn pnode_set(&self) -> Result<PNodeSet> {
        let default = PNodeSet::default_for(self.freq.k)?;
        let t = self.pnodes.t.unwrap_or(default.radial_count());
        let m = self.pnodes.m.unwrap_or(4 * t);
        build_pnodes(t, m)
    }

    pub fn recon_params(&self) -> Result<ReconParams> {
        let params = ReconParams {
            alpha_tilde: self.recon.alpha_tilde,
            epsilon: self.recon.epsilon,
            n_terms: self.recon.n,
            term_frequencies: self
                .recon
                .term_frequencies
                .iter()
                .map(|[k, lk]| FrequencyPair::new(*k, *lk))
                .collect::<Result<_>>()?,
            real_inputs: self.recon.real_inputs,
            compare_real_projection: self.recon.compare_real_projection,
        };
        params.validate()?;
        Ok(params)
    }
}
