//! The regularized first inverse `K₁† = (F^k)† ∘ A†(p)` and the inverse Born series.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::born::{build_kernels, multilinear_batch, ConvKernelSet, Contrast, ScatterDataset};
use crate::error::{invalid, Error, Result};
use crate::fourier::FkPseudoInverse;
use crate::grids::{PData, PNodeSet, PixelGrid};
use crate::pswf::{build_basis, BasisCaps, PswfBasis};

/// Largest accepted truncation order; the tuple count grows like `2^{N−1}`.
pub const MAX_ORDER: usize = 12;

/// `A(p) = [[2|p|²−1, 1], [2ℓ⁻²|p|²−1, 1]]`.
pub fn a_matrix(p: [f64; 2], ell: f64) -> Result<[[f64; 2]; 2]> {
    check_ell(ell)?;
    let r2 = p[0] * p[0] + p[1] * p[1];
    Ok([[2.0 * r2 - 1.0, 1.0], [2.0 * r2 / (ell * ell) - 1.0, 1.0]])
}

/// `A†(p) = ℓ² / (2 max(ε,|p|)² (ℓ²−1)) · [[1, −1], [1−2ℓ⁻²|p|², 2|p|²−1]]`.
pub fn a_dagger(p: [f64; 2], ell: f64, epsilon: f64) -> Result<[[f64; 2]; 2]> {
    check_ell(ell)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let r2 = p[0] * p[0] + p[1] * p[1];
    let m = r2.sqrt().max(epsilon);
    let s = ell * ell / (2.0 * m * m * (ell * ell - 1.0));
    Ok([
        [s, -s],
        [s * (1.0 - 2.0 * r2 / (ell * ell)), s * (2.0 * r2 - 1.0)],
    ])
}

fn check_ell(ell: f64) -> Result<()> {
    if !(ell > 1.0) || !ell.is_finite() {
        return invalid(format!("ell must exceed 1, got {ell}"));
    }
    Ok(())
}

/// A frequency pair `(k, ℓk)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPair {
    pub k: f64,
    pub lk: f64,
}

impl FrequencyPair {
    pub fn new(k: f64, lk: f64) -> Result<Self> {
        if !(k > 0.0) || !(lk > k) || !lk.is_finite() {
            return invalid(format!("frequency pair must satisfy 0 < k < lk, got ({k}, {lk})"));
        }
        Ok(FrequencyPair { k, lk })
    }

    pub fn ell(&self) -> f64 {
        self.lk / self.k
    }

    fn matches(&self, other: &FrequencyPair) -> bool {
        (self.k - other.k).abs() <= 1e-12 * self.k && (self.lk - other.lk).abs() <= 1e-12 * self.lk
    }
}

/// Parameters of a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconParams {
    pub alpha_tilde: f64,
    /// `None` uses the smallest node radius.
    pub epsilon: Option<f64>,
    pub n_terms: usize,
    /// Pair used for term `j` is `term_frequencies[j − 2]`; missing entries use the data pair.
    pub term_frequencies: Vec<FrequencyPair>,
    /// Feed the real parts of earlier terms into `K_m` (default); `false` feeds
    /// the complex terms.
    pub real_inputs: bool,
    /// Also run the series with the other input choice and report the difference.
    pub compare_real_projection: bool,
}

impl ReconParams {
    pub fn new(alpha_tilde: f64, n_terms: usize) -> Result<Self> {
        let p = ReconParams {
            alpha_tilde,
            epsilon: None,
            n_terms,
            term_frequencies: Vec::new(),
            real_inputs: true,
            compare_real_projection: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_tilde > 0.0 && self.alpha_tilde < 1.0) {
            return invalid(format!("alpha_tilde must lie in (0, 1), got {}", self.alpha_tilde));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return invalid(format!("epsilon must be positive, got {e}"));
            }
        }
        if self.n_terms < 1 {
            return invalid("N must be at least 1");
        }
        if self.n_terms > MAX_ORDER {
            return invalid(format!("N = {} exceeds the supported maximum {MAX_ORDER}", self.n_terms));
        }
        for f in &self.term_frequencies {
            FrequencyPair::new(f.k, f.lk)?;
        }
        Ok(())
    }

    /// Frequency pair for term `j ≥ 2`.
    pub fn pair_for_term(&self, j: usize, data: FrequencyPair) -> FrequencyPair {
        if j >= 2 {
            if let Some(f) = self.term_frequencies.get(j - 2) {
                return *f;
            }
        }
        data
    }
}

/// Everything needed to evaluate `K₁†` and `K_m` at one frequency pair.
#[derive(Debug, Clone)]
pub struct FrequencyOperators {
    pub pair: FrequencyPair,
    pub epsilon: f64,
    pseudo_inverse: FkPseudoInverse,
    pnodes: PNodeSet,
    pub low: Arc<ConvKernelSet>,
    pub high: Arc<ConvKernelSet>,
}

impl FrequencyOperators {
    /// Assembles operators from a basis at `c = 2k` and kernel sets at `k` and `ℓk`.
    pub fn new(
        pair: FrequencyPair,
        basis: Arc<PswfBasis>,
        grid: PixelGrid,
        pnodes: &PNodeSet,
        epsilon: Option<f64>,
        low: Arc<ConvKernelSet>,
        high: Arc<ConvKernelSet>,
    ) -> Result<Self> {
        if (basis.c - 2.0 * pair.k).abs() > 1e-12 * basis.c {
            return invalid(format!("basis bandwidth {} does not match 2k = {}", basis.c, 2.0 * pair.k));
        }
        if (low.k() - pair.k).abs() > 1e-12 * pair.k || (high.k() - pair.lk).abs() > 1e-12 * pair.lk {
            return invalid("kernel frequencies do not match the pair");
        }
        if low.grid() != grid || high.grid() != grid {
            return invalid("kernel grids do not match the output grid");
        }
        let epsilon = epsilon.unwrap_or_else(|| pnodes.min_radius());
        if !(epsilon > 0.0) {
            return invalid("epsilon must be positive");
        }
        Ok(FrequencyOperators {
            pair,
            epsilon,
            pseudo_inverse: FkPseudoInverse::new(basis, grid, pnodes)?,
            pnodes: pnodes.clone(),
            low,
            high,
        })
    }

    /// Builds the basis (default caps) and kernels (padding factor 2) from scratch.
    pub fn build(pair: FrequencyPair, alpha_tilde: f64, grid: PixelGrid, pnodes: &PNodeSet, epsilon: Option<f64>) -> Result<Self> {
        let c = 2.0 * pair.k;
        let basis = Arc::new(build_basis(c, alpha_tilde, BasisCaps::default_for(c))?);
        let low = Arc::new(build_kernels(pair.k, grid, 2)?);
        let high = Arc::new(build_kernels(pair.lk, grid, 2)?);
        FrequencyOperators::new(pair, basis, grid, pnodes, epsilon, low, high)
    }

    pub fn basis(&self) -> &PswfBasis {
        self.pseudo_inverse.basis()
    }

    pub fn pnodes(&self) -> &PNodeSet {
        &self.pnodes
    }

    pub fn grid(&self) -> PixelGrid {
        self.pseudo_inverse.grid()
    }

    /// `K₁†` applied to data `(f(p; k), f(ℓ⁻¹p; ℓk))` sampled on this operator's nodes.
    pub fn k1_dagger_pair(&self, low: &PData, high: &PData) -> Result<Contrast> {
        if (low.k - self.pair.k).abs() > 1e-12 * self.pair.k || (high.k - self.pair.lk).abs() > 1e-12 * self.pair.lk {
            return invalid("data frequencies do not match the operator pair");
        }
        if low.pnodes != self.pnodes || high.pnodes != self.pnodes {
            return invalid("data node set differs from the operator's node set");
        }
        let (g, e) = decouple(low, high, self.pair, self.epsilon)?;
        Contrast::new(self.pseudo_inverse.apply(&g)?, self.pseudo_inverse.apply(&e)?)
    }

    /// `K₁†φ` for a dataset at this operator's pair.
    pub fn k1_dagger(&self, phi: &ScatterDataset) -> Result<Contrast> {
        self.k1_dagger_pair(&phi.low, &phi.high)
    }

    /// `Σ_tuples K_m(args[t₁], …, args[t_m])` at this pair, as two-component data.
    pub fn multilinear_sum(&self, args: &[Contrast], tuples: &[Vec<usize>]) -> Result<(PData, PData)> {
        let low = multilinear_batch(args, tuples, &self.pnodes, 1.0, &self.low)?;
        let high = multilinear_batch(args, tuples, &self.pnodes, self.pair.ell(), &self.high)?;
        let sum = |rows: Vec<Vec<Complex64>>| -> Vec<Complex64> {
            let mut acc = vec![Complex64::default(); self.pnodes.len()];
            for r in rows {
                for (a, v) in acc.iter_mut().zip(r) {
                    *a += v;
                }
            }
            acc
        };
        Ok((
            PData::new(self.pnodes.clone(), self.pair.k, sum(low))?,
            PData::new(self.pnodes.clone(), self.pair.lk, sum(high))?,
        ))
    }
}

/// `K₁†(φ)` with freshly built operators.
pub fn k1_dagger(phi: &ScatterDataset, basis: Arc<PswfBasis>, grid: PixelGrid, epsilon: Option<f64>) -> Result<Contrast> {
    let pair = FrequencyPair::new(phi.k, phi.high.k)?;
    if (basis.c - 2.0 * pair.k).abs() > 1e-12 * basis.c {
        return invalid(format!("basis bandwidth {} does not match 2k = {}", basis.c, 2.0 * pair.k));
    }
    let epsilon = epsilon.unwrap_or_else(|| phi.pnodes().min_radius());
    let op = FkPseudoInverse::new(basis, grid, phi.pnodes())?;
    let (g, e) = decouple(&phi.low, &phi.high, pair, epsilon)?;
    Contrast::new(op.apply(&g)?, op.apply(&e)?)
}

/// `A†(p_n)` applied nodewise; both outputs are labelled with the lower frequency.
fn decouple(low: &PData, high: &PData, pair: FrequencyPair, epsilon: f64) -> Result<(PData, PData)> {
    let ell = pair.ell();
    let n = low.values.len();
    let mut g = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for (i, p) in low.pnodes.nodes().iter().enumerate() {
        let ad = a_dagger(*p, ell, epsilon)?;
        let (a, b) = (low.values[i], high.values[i]);
        g.push(ad[0][0] * a + ad[0][1] * b);
        e.push(ad[1][0] * a + ad[1][1] * b);
    }
    Ok((PData::new(low.pnodes.clone(), pair.k, g)?, PData::new(low.pnodes.clone(), pair.k, e)?))
}

/// Ordered compositions of `j` into `m ≥ 2` positive parts, ordered by length then
/// lexicographically.
pub fn compositions(j: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(prefix.clone());
            return;
        }
        for first in 1..=rest {
            prefix.push(first);
            rec(rest - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(j, &mut Vec::new(), &mut out);
    out.retain(|c| c.len() >= 2);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Output of the inverse Born series.
#[derive(Debug, Clone)]
pub struct ReconResult {
    /// `ψ_1, …, ψ_J` (complex).
    pub terms: Vec<Contrast>,
    /// `Σ_{i≤j} ψ_i` (complex).
    pub partial_sums: Vec<Contrast>,
    /// `‖ψ_j‖_{(L²)²}`.
    pub term_norms: Vec<f64>,
    /// `‖Im γ̂_j‖`, `‖Im η̂_j‖` per partial sum.
    pub imag_residuals: Vec<[f64; 2]>,
    /// `‖ψ_{j+1}‖ / ‖ψ_j‖`.
    pub term_ratios: Vec<f64>,
    /// Frequency pair used for each term.
    pub pairs: Vec<FrequencyPair>,
    /// Number of `K_m` tuples evaluated for each term (zero for term 1).
    pub tuple_counts: Vec<usize>,
    /// Set when a forward divergence stopped the series; holds the failing term.
    pub truncated_at: Option<usize>,
    pub warnings: Vec<String>,
    /// Relative difference per term against a run with the other input choice.
    pub real_projection_delta: Option<Vec<f64>>,
}

impl ReconResult {
    pub fn final_sum(&self) -> &Contrast {
        self.partial_sums.last().expect("at least one term")
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

fn real_part(c: &Contrast) -> Contrast {
    Contrast {
        gamma: c.gamma.re().to_complex(),
        eta: c.eta.re().to_complex(),
    }
}

fn find_ops<'a>(ops: &'a [FrequencyOperators], pair: &FrequencyPair) -> Result<&'a FrequencyOperators> {
    ops.iter()
        .find(|o| o.pair.matches(pair))
        .ok_or_else(|| Error::InvalidArgument(format!("no operators for frequency pair ({}, {})", pair.k, pair.lk)))
}

fn run_series(
    phi: &ScatterDataset,
    params: &ReconParams,
    ops: &[FrequencyOperators],
    project_inputs: bool,
) -> Result<ReconResult> {
    params.validate()?;
    let data_pair = FrequencyPair::new(phi.k, phi.high.k)?;
    let first = find_ops(ops, &data_pair)?;
    let psi1 = first.k1_dagger(phi)?;
    let mut terms = vec![psi1];
    let mut pairs = vec![data_pair];
    let mut tuple_counts = vec![0];
    let mut warnings = Vec::new();
    let mut truncated_at = None;
    for j in 2..=params.n_terms {
        let pair = params.pair_for_term(j, data_pair);
        let op = find_ops(ops, &pair)?;
        let args: Vec<Contrast> = terms
            .iter()
            .map(|t| if project_inputs { real_part(t) } else { t.clone() })
            .collect();
        let tuples: Vec<Vec<usize>> = compositions(j)
            .into_iter()
            .map(|c| c.into_iter().map(|i| i - 1).collect())
            .collect();
        let (low, high) = match op.multilinear_sum(&args, &tuples) {
            Ok(v) => v,
            Err(Error::DivergenceDetected { node, frequency }) => {
                warnings.push(format!(
                    "forward recursion diverged at node {node}, frequency {frequency}; series truncated at term {}",
                    j - 1
                ));
                truncated_at = Some(j);
                break;
            }
            Err(e) => return Err(e),
        };
        let psi = op.k1_dagger_pair(&low, &high)?.scale(Complex64::new(-1.0, 0.0));
        terms.push(psi);
        pairs.push(pair);
        tuple_counts.push(tuples.len());
    }
    let mut partial_sums: Vec<Contrast> = Vec::with_capacity(terms.len());
    for t in &terms {
        let next = match partial_sums.last() {
            Some(s) => Contrast::new(s.gamma.add(&t.gamma)?, s.eta.add(&t.eta)?)?,
            None => t.clone(),
        };
        partial_sums.push(next);
    }
    let term_norms: Vec<f64> = terms.iter().map(|t| t.l2_norm()).collect();
    let term_ratios = term_norms
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
        .collect();
    let imag_residuals = partial_sums
        .iter()
        .map(|s| [s.gamma.im().l2_norm(), s.eta.im().l2_norm()])
        .collect();
    Ok(ReconResult {
        terms,
        partial_sums,
        term_norms,
        imag_residuals,
        term_ratios,
        pairs,
        tuple_counts,
        truncated_at,
        warnings,
        real_projection_delta: None,
    })
}

/// Runs `ψ₁ = K₁†φ`, `ψ_j = −K₁†(Σ_{m≥2} Σ_{i₁+…+i_m=j} K_m(ψ_{i₁}, …, ψ_{i_m}))`.
/// `ops` must contain operators for the data pair and every configured term pair.
pub fn ibs_reconstruct(phi: &ScatterDataset, params: &ReconParams, ops: &[FrequencyOperators]) -> Result<ReconResult> {
    let mut result = run_series(phi, params, ops, params.real_inputs)?;
    if params.compare_real_projection && params.n_terms >= 2 {
        let projected = run_series(phi, params, ops, !params.real_inputs)?;
        let delta = result
            .terms
            .iter()
            .zip(&projected.terms)
            .map(|(a, b)| {
                let d = Contrast::new(
                    a.gamma.add(&b.gamma.scale(Complex64::new(-1.0, 0.0))).expect("same grid"),
                    a.eta.add(&b.eta.scale(Complex64::new(-1.0, 0.0))).expect("same grid"),
                )
                .expect("same grid");
                let n = a.l2_norm();
                if n > 0.0 {
                    d.l2_norm() / n
                } else {
                    d.l2_norm()
                }
            })
            .collect();
        result.real_projection_delta = Some(delta);
    }
    Ok(result)
}

/// Convergence diagnostics of a reconstruction against the radius `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub first_norm: f64,
    pub radius: f64,
    /// `‖K₁†φ‖ / r`.
    pub c_ratio: f64,
    /// `‖ψ₁‖ < r`.
    pub within_radius: bool,
    pub term_ratios: Vec<f64>,
    /// Term ratio above 1 for three consecutive terms.
    pub empirically_divergent: bool,
}

pub fn convergence_diagnostics(result: &ReconResult, radius: f64) -> Result<ConvergenceReport> {
    if !(radius > 0.0) {
        return invalid(format!("radius must be positive, got {radius}"));
    }
    let first_norm = result.term_norms.first().copied().unwrap_or(0.0);
    let empirically_divergent = result
        .term_ratios
        .windows(3)
        .any(|w| w.iter().all(|&r| r > 1.0));
    Ok(ConvergenceReport {
        first_norm,
        radius,
        c_ratio: first_norm / radius,
        within_radius: first_norm < radius,
        term_ratios: result.term_ratios.clone(),
        empirically_divergent,
    })
}

/// `K₁(γ, η)` on a node set through the Fourier route, with the second component
/// labelled `ℓk`.
pub fn k1_forward(contrast: &Contrast, pnodes: &PNodeSet, pair: FrequencyPair) -> Result<(PData, PData)> {
    use crate::fourier::apply_fk;
    let fg = apply_fk(&contrast.gamma, pnodes, pair.k)?;
    let fe = apply_fk(&contrast.eta, pnodes, pair.k)?;
    let ell = pair.ell();
    let mut low = Vec::with_capacity(pnodes.len());
    let mut high = Vec::with_capacity(pnodes.len());
    for ((p, g), e) in pnodes.nodes().iter().zip(&fg.values).zip(&fe.values) {
        let a = a_matrix(*p, ell)?;
        low.push(a[0][0] * g + a[0][1] * e);
        high.push(a[1][0] * g + a[1][1] * e);
    }
    Ok((PData::new(pnodes.clone(), pair.k, low)?, PData::new(pnodes.clone(), pair.lk, high)?))
}

/// Relative `(L²)²` distance `‖a − b‖ / ‖b‖` between complex contrast pairs.
pub fn relative_distance(a: &Contrast, b: &Contrast) -> Result<f64> {
    let minus = Complex64::new(-1.0, 0.0);
    let d = Contrast::new(a.gamma.add(&b.gamma.scale(minus))?, a.eta.add(&b.eta.scale(minus))?)?;
    let n = b.l2_norm();
    if n == 0.0 {
        return invalid("reference has zero norm");
    }
    Ok(d.l2_norm() / n)
}
