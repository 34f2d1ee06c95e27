//! Configuration, media, file formats, rendering and the end-to-end pipelines
//! behind the command-line tool.

pub mod config;
pub mod io;
pub mod media;
pub mod render;

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use crate::analysis::{bounds_report, measure_m, projection_tail, rel_l2_error, BoundsInputs, BoundsReport, RelErrors};
use crate::born::{add_noise, build_kernels, synthesize, Contrast, ScatterDataset};
use crate::error::Result;
use crate::grids::{PNodeSet, PixelGrid, RealField};
use crate::inverse::{convergence_diagnostics, ibs_reconstruct, ConvergenceReport, FrequencyOperators, FrequencyPair, ReconResult};
use crate::pswf::BasisCaps;

use config::RunConfig;
use io::load_or_build_basis;
use media::generate_media;

/// Padding factor of the convolution grids.
pub const PAD: usize = 2;

/// Output of [`synth_run`].
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: ScatterDataset,
    pub gamma: RealField,
    pub eta: RealField,
}

/// Media generation, Born-series synthesis at `(k, ℓk)` and additive noise.
pub fn synth_run(cfg: &RunConfig) -> Result<SynthOutput> {
    let grid = cfg.grid()?;
    let (gamma, eta) = generate_media(&cfg.media, grid)?;
    let dataset = synth_from_media(cfg, &gamma, &eta)?;
    Ok(SynthOutput { dataset, gamma, eta })
}

/// Synthesis and noise for given contrasts.
pub fn synth_from_media(cfg: &RunConfig, gamma: &RealField, eta: &RealField) -> Result<ScatterDataset> {
    let grid = gamma.grid();
    let pair = cfg.pair()?;
    let pnodes = cfg.pnode_set()?;
    let low = build_kernels(pair.k, grid, PAD)?;
    let high = build_kernels(pair.lk, grid, PAD)?;
    let clean = synthesize(gamma, eta, &pnodes, &low, &high, pair.ell(), cfg.synth.j_max, cfg.synth.tol)?;
    add_noise(&clean, cfg.noise.level, cfg.noise.seed)
}

/// Operators for the data pair and every configured term pair, on one node set.
pub fn build_operators(cfg: &RunConfig, grid: PixelGrid, pnodes: &PNodeSet, data_pair: FrequencyPair, cache_dir: Option<&Path>) -> Result<Vec<FrequencyOperators>> {
    let params = cfg.recon_params()?;
    let mut pairs = vec![data_pair];
    for j in 2..=params.n_terms {
        let p = params.pair_for_term(j, data_pair);
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    let mut kernels: Vec<(f64, Arc<crate::born::ConvKernelSet>)> = Vec::new();
    let mut kernel_for = |k: f64| -> Result<Arc<crate::born::ConvKernelSet>> {
        if let Some((_, ks)) = kernels.iter().find(|(kk, _)| *kk == k) {
            return Ok(ks.clone());
        }
        let ks = Arc::new(build_kernels(k, grid, PAD)?);
        kernels.push((k, ks.clone()));
        Ok(ks)
    };
    let mut ops = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let c = 2.0 * pair.k;
        let (basis, _) = load_or_build_basis(c, params.alpha_tilde, BasisCaps::default_for(c), cache_dir)?;
        let low = kernel_for(pair.k)?;
        let high = kernel_for(pair.lk)?;
        ops.push(FrequencyOperators::new(pair, basis, grid, pnodes, params.epsilon, low, high)?);
    }
    Ok(ops)
}

/// Runs the inverse Born series on a dataset with the configured parameters.
pub fn invert_run(cfg: &RunConfig, data: &ScatterDataset, cache_dir: Option<&Path>) -> Result<(ReconResult, Vec<FrequencyOperators>)> {
    let grid = cfg.grid()?;
    let pair = FrequencyPair::new(data.k, data.high.k)?;
    let ops = build_operators(cfg, grid, data.pnodes(), pair, cache_dir)?;
    let result = ibs_reconstruct(data, &cfg.recon_params()?, &ops)?;
    Ok((result, ops))
}

/// Errors of every partial sum against a known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermMetrics {
    pub term: usize,
    pub term_norm: f64,
    pub imag_residual: [f64; 2],
    pub errors: Option<RelErrors>,
}

/// Machine-readable summary of an inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertReport {
    pub k: f64,
    pub lk: f64,
    pub epsilon: f64,
    pub retained_modes: usize,
    pub terms: Vec<TermMetrics>,
    pub term_ratios: Vec<f64>,
    pub pairs: Vec<FrequencyPair>,
    pub tuple_counts: Vec<usize>,
    pub truncated_at: Option<usize>,
    pub warnings: Vec<String>,
    pub real_projection_delta: Option<Vec<f64>>,
    pub convergence: Option<ConvergenceReport>,
}

/// Summarizes a reconstruction, with errors when the truth is known.
pub fn invert_report(result: &ReconResult, ops: &FrequencyOperators, truth: Option<(&RealField, &RealField)>, bounds: Option<&BoundsReport>) -> Result<InvertReport> {
    let mut terms = Vec::with_capacity(result.len());
    for (j, s) in result.partial_sums.iter().enumerate() {
        let errors = match truth {
            Some((g, e)) => Some(rel_l2_error((g, e), (&s.gamma.re(), &s.eta.re()))?),
            None => None,
        };
        terms.push(TermMetrics {
            term: j + 1,
            term_norm: result.term_norms[j],
            imag_residual: result.imag_residuals[j],
            errors,
        });
    }
    let convergence = match bounds {
        Some(b) => Some(convergence_diagnostics(result, b.radius)?),
        None => None,
    };
    Ok(InvertReport {
        k: ops.pair.k,
        lk: ops.pair.lk,
        epsilon: ops.epsilon,
        retained_modes: ops.basis().len(),
        terms,
        term_ratios: result.term_ratios.clone(),
        pairs: result.pairs.clone(),
        tuple_counts: result.tuple_counts.clone(),
        truncated_at: result.truncated_at,
        warnings: result.warnings.clone(),
        real_projection_delta: result.real_projection_delta.clone(),
        convergence,
    })
}

/// Bounds for a configuration; uses the truth (validation mode) and a reconstruction
/// when given, otherwise only the configuration-level constants with `M` from the
/// generated media.
pub fn bounds_run(cfg: &RunConfig, gamma: &RealField, eta: &RealField, ops: &FrequencyOperators, result: Option<&ReconResult>) -> Result<BoundsReport> {
    let measure = measure_m(gamma, eta)?;
    let truth = Contrast::from_real(gamma, eta)?;
    bounds_report(&BoundsInputs {
        k: ops.pair.k,
        ell: ops.pair.ell(),
        alpha_tilde: cfg.recon.alpha_tilde,
        epsilon: ops.epsilon,
        measure,
        alpha00: ops.basis().alpha00().norm(),
        first_norm: result.map(|r| r.term_norms[0]),
        truth_norm: Some(truth.l2_norm()),
        sum_norm: result.map(|r| r.final_sum().l2_norm()),
        delta_alpha: projection_tail(&truth, ops.basis())?,
        n_terms: cfg.recon.n,
    })
}
