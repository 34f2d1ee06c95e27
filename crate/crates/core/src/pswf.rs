//! Disk prolate spheroidal wave functions.
//!
//! For each angular order `m` the radial parts are eigenvectors of the Galerkin
//! matrix of
//! `𝒟_c = −(1/r)∂_r(r(1 − r²)∂_r) + m²/r² + c²r²`
//! in the orthonormal Zernike radial basis `R̄_{m,j}(r) = sqrt(2(2j+m+1)) r^m P_j^{(0,m)}(2r² − 1)`.
//! The prolate eigenvalue of each eigenfunction under
//! `F^k ψ(p) = ∫_B e^{i c p·y} ψ(y) dy` (with `c = 2k`) is measured by a
//! weighted least-squares ratio on a node set, together with its residual.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::grids::{build_pnodes, PNodeSet};
use crate::quadrature::gauss_legendre_on;
use crate::specfun::bessel_j_seq;

/// Fraction of each truncated spectrum kept as resolved.
const RESOLVED_FRACTION: f64 = 0.75;
/// Extra Zernike rows beyond the largest radial index of interest.
const BUFFER_ROWS: usize = 16;
/// Residual gate relative to `|α₀,₀|`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-4;

/// Largest angular order and radial index searched when building a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisCaps {
    pub m_max: usize,
    pub n_max: usize,
}

impl BasisCaps {
    pub fn default_for(c: f64) -> Self {
        BasisCaps {
            m_max: c.ceil() as usize + 12,
            n_max: (c / 2.0).ceil() as usize + 8,
        }
    }
}

/// One eigenfunction `ψ_{m,n,l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PswfEntry {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub chi: f64,
    pub alpha: Complex64,
    pub radial_coeffs: Vec<f64>,
    pub residual: f64,
}

impl PswfEntry {
    /// Radial part `R_{m,n}(r)`.
    pub fn radial(&self, r: f64) -> f64 {
        let z = zernike_radial(self.m, self.radial_coeffs.len(), r);
        z.iter().zip(&self.radial_coeffs).map(|(z, c)| z * c).sum()
    }

    /// Angular part `Θ_{m,l}(θ)`.
    pub fn angular(&self, theta: f64) -> f64 {
        angular(self.m, self.l, theta)
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let r = p[0].hypot(p[1]);
        self.radial(r) * self.angular(p[1].atan2(p[0]))
    }
}

fn angular(m: usize, l: usize, theta: f64) -> f64 {
    if m == 0 {
        1.0 / (2.0 * PI).sqrt()
    } else if l == 1 {
        (m as f64 * theta).cos() / PI.sqrt()
    } else {
        (m as f64 * theta).sin() / PI.sqrt()
    }
}

/// Retained disk PSWFs for bandwidth `c`, sorted by descending `|α|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PswfBasis {
    pub c: f64,
    pub alpha_tilde: f64,
    pub caps: BasisCaps,
    /// Zernike rows per angular order.
    pub j_trunc: usize,
    /// Radial Gauss–Legendre points used for assembly (for the largest order).
    pub assembly_points: usize,
    modes: Vec<PswfEntry>,
    retained: usize,
}

impl PswfBasis {
    /// Retained entries, `|α| ≥ α̃·|α₀,₀|`.
    pub fn entries(&self) -> &[PswfEntry] {
        &self.modes[..self.retained]
    }

    /// Resolved but discarded entries, sorted by descending `|α|`.
    pub fn discarded(&self) -> &[PswfEntry] {
        &self.modes[self.retained..]
    }

    pub fn len(&self) -> usize {
        self.retained
    }

    pub fn is_empty(&self) -> bool {
        self.retained == 0
    }

    pub fn alpha00(&self) -> Complex64 {
        self.modes
            .iter()
            .find(|e| e.m == 0 && e.n == 0)
            .map(|e| e.alpha)
            .expect("basis always contains (0,0)")
    }

    /// Cutoff `α = α̃·|α₀,₀|`.
    pub fn cutoff(&self) -> f64 {
        self.alpha_tilde * self.alpha00().norm()
    }

    /// Values of every retained entry at `points`: `out[e][i] = ψ_e(points[i])`.
    pub fn evaluate(&self, points: &[[f64; 2]]) -> Vec<Vec<f64>> {
        evaluate_entries(self.entries(), self.j_trunc, points)
    }
}

/// Values of `entries` at `points`, sharing Zernike evaluations between entries of equal `m`.
pub fn evaluate_entries(entries: &[PswfEntry], j_trunc: usize, points: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; points.len()]; entries.len()];
    let mut orders: Vec<usize> = entries.iter().map(|e| e.m).collect();
    orders.sort_unstable();
    orders.dedup();
    for (i, p) in points.iter().enumerate() {
        let r = p[0].hypot(p[1]);
        let theta = p[1].atan2(p[0]);
        for &m in &orders {
            let z = zernike_radial(m, j_trunc, r);
            for (e, row) in entries.iter().zip(out.iter_mut()) {
                if e.m != m {
                    continue;
                }
                let radial: f64 = z.iter().zip(&e.radial_coeffs).map(|(z, c)| z * c).sum();
                row[i] = radial * angular(m, e.l, theta);
            }
        }
    }
    out
}

/// `ψ_{m,n,l}` at `points` in the closed unit disk.
pub fn eval_pswf(entry: &PswfEntry, points: &[[f64; 2]]) -> Result<Vec<f64>> {
    if let Some(p) = points.iter().find(|p| p[0].hypot(p[1]) > 1.0 + 1e-12) {
        return invalid(format!("point {p:?} lies outside the unit disk"));
    }
    Ok(points.iter().map(|&p| entry.eval(p)).collect())
}

/// Normalized Zernike radial functions `R̄_{m,j}(r)`, `j < count`.
pub fn zernike_radial(m: usize, count: usize, r: f64) -> Vec<f64> {
    zernike_radial_with_derivative(m, count, r).0
}

/// `R̄_{m,j}(r)` and `d/dr R̄_{m,j}(r)`, `j < count`.
pub fn zernike_radial_with_derivative(m: usize, count: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
    let x = 2.0 * r * r - 1.0;
    let (p, dp) = jacobi_alpha0(m, count, x);
    let mf = m as f64;
    let rm = r.powi(m as i32);
    let drm = if m == 0 { 0.0 } else { mf * r.powi(m as i32 - 1) };
    let mut v = Vec::with_capacity(count);
    let mut d = Vec::with_capacity(count);
    for j in 0..count {
        let norm = (2.0 * (2.0 * j as f64 + mf + 1.0)).sqrt();
        v.push(norm * rm * p[j]);
        d.push(norm * (drm * p[j] + rm * dp[j] * 4.0 * r));
    }
    (v, d)
}

/// Jacobi polynomials `P_j^{(0,b)}(x)` and derivatives for `j < count`.
fn jacobi_alpha0(b: usize, count: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let bf = b as f64;
    let mut p = vec![0.0; count];
    let mut dp = vec![0.0; count];
    if count == 0 {
        return (p, dp);
    }
    p[0] = 1.0;
    if count == 1 {
        return (p, dp);
    }
    p[1] = 1.0 + (bf + 2.0) * (x - 1.0) / 2.0;
    dp[1] = (bf + 2.0) / 2.0;
    for n in 2..count {
        let nf = n as f64;
        let s = 2.0 * nf + bf;
        let a1 = 2.0 * nf * (nf + bf) * (s - 2.0);
        let lin = (s - 1.0) * (s * (s - 2.0) * x - bf * bf);
        let lin_dx = (s - 1.0) * s * (s - 2.0);
        let a3 = 2.0 * (nf - 1.0) * (nf + bf - 1.0) * s;
        p[n] = (lin * p[n - 1] - a3 * p[n - 2]) / a1;
        dp[n] = (lin_dx * p[n - 1] + lin * dp[n - 1] - a3 * dp[n - 2]) / a1;
    }
    (p, dp)
}

/// Galerkin matrix of `𝒟_c` at angular order `m` on `J` Zernike rows.
pub fn assemble_sturm_liouville(m: usize, c: f64, j: usize) -> Result<DMatrix<f64>> {
    Ok(assemble_checked(m, c, j)?.0)
}

fn assemble_checked(m: usize, c: f64, j: usize) -> Result<(DMatrix<f64>, usize)> {
    if j < 4 {
        return invalid(format!("Zernike truncation must be at least 4, got {j}"));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return invalid(format!("bandwidth must be non-negative, got {c}"));
    }
    let q = m + 2 * j + 4;
    let a = assemble_with(m, c, j, q);
    let b = assemble_with(m, c, j, q + 8);
    let scale = a.amax().max(1.0);
    let diff = (&a - &b).amax();
    if diff > 1e-10 * scale {
        return Err(Error::AssemblyFailure(format!(
            "m={m}: entries moved by {diff:e} under quadrature refinement"
        )));
    }
    Ok((a, q))
}

fn assemble_with(m: usize, c: f64, j: usize, q: usize) -> DMatrix<f64> {
    let (rs, ws) = gauss_legendre_on(q, 0.0, 1.0);
    let mut a = DMatrix::<f64>::zeros(j, j);
    let m2 = (m * m) as f64;
    for (&r, &w) in rs.iter().zip(&ws) {
        let (v, d) = zernike_radial_with_derivative(m, j, r);
        let stiff = (1.0 - r * r) * r * w;
        let mass = (m2 / (r * r) + c * c * r * r) * r * w;
        for a_i in 0..j {
            for b_i in a_i..j {
                a[(a_i, b_i)] += stiff * d[a_i] * d[b_i] + mass * v[a_i] * v[b_i];
            }
        }
    }
    for a_i in 0..j {
        for b_i in 0..a_i {
            a[(a_i, b_i)] = a[(b_i, a_i)];
        }
    }
    a
}

/// Full symmetric eigendecomposition: eigenvalues ascending, eigenvectors as
/// columns, first nonzero coefficient of each eigenvector positive.
pub fn solve_radial_eigs(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = matrix.nrows();
    if n != matrix.ncols() || n == 0 {
        return invalid("eigenproblem needs a non-empty square matrix");
    }
    let scale = matrix.amax().max(f64::MIN_POSITIVE);
    if (matrix - matrix.transpose()).amax() > 1e-12 * scale {
        return invalid("matrix is not symmetric");
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::NumericFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let top = v.amax();
        let lead = v.iter().find(|x| x.abs() > 1e-10 * top).copied().unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }
    Ok((values, vectors))
}

/// Radial samples of `H(r) = 2π ∫₀¹ J_m(c r ρ) R(ρ) ρ dρ`, shared across modes.
struct HankelTable {
    radii: Vec<f64>,
    rho: Vec<f64>,
    weights: Vec<f64>,
    /// `bessel[t][q][m] = J_m(c · radii[t] · rho[q])`
    bessel: Vec<Vec<Vec<f64>>>,
}

impl HankelTable {
    fn new(c: f64, radii: &[f64], m_max: usize, points: usize) -> Self {
        let (rho, weights) = gauss_legendre_on(points, 0.0, 1.0);
        let bessel = radii
            .iter()
            .map(|&r| rho.iter().map(|&s| bessel_j_seq(m_max, c * r * s)).collect())
            .collect();
        HankelTable {
            radii: radii.to_vec(),
            rho,
            weights,
            bessel,
        }
    }

    fn transform(&self, m: usize, radial_at_rho: &[f64]) -> Vec<f64> {
        (0..self.radii.len())
            .map(|t| {
                2.0 * PI
                    * self
                        .rho
                        .iter()
                        .enumerate()
                        .map(|(q, &s)| self.weights[q] * self.bessel[t][q][m] * radial_at_rho[q] * s)
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Prolate eigenvalue `α` of `entry` under `F^k` (`c = 2k`) by the weighted
/// least-squares ratio over `P`, with the residual `‖F^k ψ − αψ‖_{L²(B)}`.
pub fn prolate_eigenvalue(entry: &PswfEntry, c: f64, p: &PNodeSet) -> Result<(Complex64, f64)> {
    let points = entry.m + entry.radial_coeffs.len() * 2 + c.ceil() as usize + 40;
    let table = HankelTable::new(c, p.radii(), entry.m, points);
    Ok(measure_alpha(entry, &table, p))
}

fn measure_alpha(entry: &PswfEntry, table: &HankelTable, p: &PNodeSet) -> (Complex64, f64) {
    let at_rho: Vec<f64> = table.rho.iter().map(|&s| entry.radial(s)).collect();
    let h = table.transform(entry.m, &at_rho);
    let radial: Vec<f64> = table.radii.iter().map(|&r| entry.radial(r)).collect();
    let phase = Complex64::i().powu(entry.m as u32);
    let mcount = p.angular_count();
    let mut num = Complex64::default();
    let mut den = 0.0;
    let mut values = Vec::with_capacity(p.len());
    for (idx, (node, w)) in p.nodes().iter().zip(p.weights()).enumerate() {
        let t = idx / mcount;
        let theta = angular(entry.m, entry.l, node[1].atan2(node[0]));
        let psi = radial[t] * theta;
        let f = phase * h[t] * theta;
        num += w * psi * f;
        den += w * psi * psi;
        values.push((psi, f));
    }
    let alpha = num / den;
    let res2: f64 = values
        .iter()
        .zip(p.weights())
        .map(|((psi, f), w)| w * (f - alpha * psi).norm_sqr())
        .sum();
    (alpha, res2.sqrt())
}

/// Builds the retained basis `{ψ : |α| ≥ α̃·|α₀,₀|}` for bandwidth `c`.
pub fn build_basis(c: f64, alpha_tilde: f64, caps: BasisCaps) -> Result<PswfBasis> {
    if !(c > 0.0) || !c.is_finite() {
        return invalid(format!("bandwidth must be positive, got {c}"));
    }
    if !(alpha_tilde > 0.0 && alpha_tilde < 1.0) {
        return invalid(format!("alpha_tilde must lie in (0, 1), got {alpha_tilde}"));
    }
    let j = caps.n_max + BUFFER_ROWS;
    let resolved = ((RESOLVED_FRACTION * j as f64).floor() as usize).min(caps.n_max + 1);
    let radial_nodes = caps.m_max + j + 8;
    let probe = build_pnodes(radial_nodes, 2 * caps.m_max + 4)?;
    let hankel_points = caps.m_max + 2 * j + c.ceil() as usize + 40;
    let table = HankelTable::new(c, probe.radii(), caps.m_max, hankel_points);

    let per_order: Vec<Result<(Vec<PswfEntry>, usize)>> = (0..=caps.m_max)
        .into_par_iter()
        .map(|m| {
            let (matrix, q) = assemble_checked(m, c, j)?;
            let (chi, vectors) = solve_radial_eigs(&matrix)?;
            let mut out = Vec::new();
            for n in 0..resolved {
                let coeffs: Vec<f64> = vectors.column(n).iter().copied().collect();
                let ls: &[usize] = if m == 0 { &[1] } else { &[1, 2] };
                for &l in ls {
                    let mut e = PswfEntry {
                        m,
                        n,
                        l,
                        chi: chi[n],
                        alpha: Complex64::default(),
                        radial_coeffs: coeffs.clone(),
                        residual: 0.0,
                    };
                    let (alpha, residual) = measure_alpha(&e, &table, &probe);
                    e.alpha = alpha;
                    e.residual = residual;
                    out.push(e);
                }
            }
            Ok((out, q))
        })
        .collect();

    let mut modes = Vec::new();
    let mut assembly_points = 0;
    for r in per_order {
        let (entries, q) = r?;
        assembly_points = assembly_points.max(q);
        modes.extend(entries);
    }
    let a00 = modes
        .iter()
        .find(|e| e.m == 0 && e.n == 0)
        .map(|e| e.alpha.norm())
        .ok_or_else(|| Error::NumericFailure("missing (0,0) mode".into()))?;
    if !(a00 > 0.0) {
        return Err(Error::NumericFailure("vanishing leading prolate eigenvalue".into()));
    }
    // Moduli equal to ~10 digits count as ties and fall back to index order, so
    // numerically degenerate leading modes keep (0,0) first.
    let key = |e: &PswfEntry| (e.alpha.norm() / a00 * 1e10).round() as i64;
    modes.sort_by(|a, b| key(b).cmp(&key(a)).then((a.m, a.n, a.l).cmp(&(b.m, b.n, b.l))));
    let cutoff = alpha_tilde * a00;
    let retained = modes.iter().take_while(|e| e.alpha.norm() >= cutoff).count();
    for e in &modes[..retained] {
        if e.m == caps.m_max || e.n + 1 >= resolved {
            return Err(Error::CapTooSmall { m: e.m, n: e.n });
        }
        if e.residual > RESIDUAL_TOLERANCE * a00 {
            return Err(Error::EigenpairRejected {
                m: e.m,
                n: e.n,
                residual: e.residual,
            });
        }
    }
    Ok(PswfBasis {
        c,
        alpha_tilde,
        caps,
        j_trunc: j,
        assembly_points,
        modes,
        retained,
    })
}
