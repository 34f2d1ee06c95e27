//! The restricted Fourier operator `F^k(p; f) = ∫_B e^{i2k p·y} f(y) dy`, projection
//! onto the disk PSWFs and the spectral-cutoff pseudo-inverse `(F^k)†`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::grids::{ComplexField, PData, PNodeSet, PixelField, PixelGrid};
use crate::pswf::PswfBasis;

/// Coefficients `⟨f, ψ_e⟩_B` for every retained entry of a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    pub c: f64,
    pub coeffs: Vec<Complex64>,
}

/// `Σ_cells w_c f_c e^{iξ·y_c}` for weighted samples `wf` (row-major, `n × n`).
pub(crate) fn plane_wave_sum(grid: PixelGrid, rows: &[(usize, usize)], wf: &[Complex64], xi: [f64; 2]) -> Complex64 {
    let n = grid.n();
    let ex: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0, xi[0] * grid.coord(i)))
        .collect();
    let mut total = Complex64::default();
    for (iy, &(lo, hi)) in rows.iter().enumerate() {
        if lo >= hi {
            continue;
        }
        let row = &wf[iy * n..(iy + 1) * n];
        let mut acc = Complex64::default();
        for ix in lo..hi {
            acc += ex[ix] * row[ix];
        }
        total += acc * Complex64::from_polar(1.0, xi[1] * grid.coord(iy));
    }
    total
}

/// Column range `[lo, hi)` of disk cells in each row.
pub(crate) fn disk_rows(grid: PixelGrid) -> Vec<(usize, usize)> {
    let n = grid.n();
    (0..n)
        .map(|iy| {
            let inside: Vec<usize> = (0..n).filter(|&ix| grid.inside(ix, iy)).collect();
            match (inside.first(), inside.last()) {
                (Some(&a), Some(&b)) => (a, b + 1),
                _ => (0, 0),
            }
        })
        .collect()
}

fn weighted<T: Copy + Into<Complex64>>(f: &PixelField<T>) -> Vec<Complex64> {
    let q = f.grid().disk_quadrature();
    f.values()
        .iter()
        .zip(q.weights())
        .map(|(&v, &w)| v.into() * w)
        .collect()
}

fn check_frequency(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return invalid(format!("frequency must be positive, got {k}"));
    }
    Ok(())
}

/// `F^k(p_n; f)` at every node.
pub fn apply_fk<T: Copy + Into<Complex64> + Sync>(f: &PixelField<T>, p: &PNodeSet, k: f64) -> Result<PData> {
    apply_fk_scaled(f, p, k, 1.0)
}

/// `F^k(p_n / scale; f)` at every node, labelled with frequency `k`.
pub fn apply_fk_scaled<T: Copy + Into<Complex64> + Sync>(
    f: &PixelField<T>,
    p: &PNodeSet,
    k: f64,
    scale: f64,
) -> Result<PData> {
    check_frequency(k)?;
    if !(scale > 0.0) {
        return invalid(format!("node scale must be positive, got {scale}"));
    }
    let grid = f.grid();
    let wf = weighted(f);
    let rows = disk_rows(grid);
    let values = p
        .nodes()
        .par_iter()
        .map(|node| {
            let xi = [2.0 * k * node[0] / scale, 2.0 * k * node[1] / scale];
            plane_wave_sum(grid, &rows, &wf, xi)
        })
        .collect();
    PData::new(p.clone(), k, values)
}

fn check_bandwidth(basis: &PswfBasis, k: f64) -> Result<()> {
    if (basis.c - 2.0 * k).abs() > 1e-12 * basis.c.max(1.0) {
        return invalid(format!(
            "basis bandwidth {} does not match 2k = {}",
            basis.c,
            2.0 * k
        ));
    }
    Ok(())
}

/// `⟨f, ψ_e⟩_B` on the pixel grid.
pub fn project_field<T: Copy + Into<Complex64>>(f: &PixelField<T>, basis: &PswfBasis) -> SpectralCoeffs {
    let grid = f.grid();
    let centers: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.center_of(i)).collect();
    let wf = weighted(f);
    let raster = basis.evaluate(&centers);
    SpectralCoeffs {
        c: basis.c,
        coeffs: raster
            .iter()
            .map(|psi| psi.iter().zip(&wf).map(|(p, v)| v * p).sum())
            .collect(),
    }
}

/// `⟨g, ψ_e⟩_B` with the node weights; the basis must have `c = 2k`.
pub fn project_pdata(g: &PData, basis: &PswfBasis) -> Result<SpectralCoeffs> {
    check_bandwidth(basis, g.k)?;
    let vals = basis.evaluate(g.pnodes.nodes());
    Ok(SpectralCoeffs {
        c: basis.c,
        coeffs: vals.iter().map(|psi| node_inner(g, psi)).collect(),
    })
}

fn node_inner(g: &PData, psi: &[f64]) -> Complex64 {
    g.values
        .iter()
        .zip(psi)
        .zip(g.pnodes.weights())
        .map(|((v, p), w)| v * (p * w))
        .sum()
}

/// `(F^k)† g = Σ α_e⁻¹ ⟨g, ψ_e⟩_B ψ_e` rasterized on `grid`.
pub fn pseudo_inverse_fk(g: &PData, basis: &PswfBasis, grid: PixelGrid) -> Result<ComplexField> {
    let op = FkPseudoInverse::new(Arc::new(basis.clone()), grid, &g.pnodes)?;
    op.apply(g)
}

/// `d(k) = 2 sqrt(min(k, 2)) / k`, a lower bound for `‖F^k‖ = |α₀,₀(2k)|`.
pub fn norm_lower_bound(k: f64) -> f64 {
    2.0 * k.min(2.0).sqrt() / k
}

/// Precomputed `(F^k)†` for a fixed basis, grid and node set.
#[derive(Debug, Clone)]
pub struct FkPseudoInverse {
    basis: Arc<PswfBasis>,
    grid: PixelGrid,
    pnodes: PNodeSet,
    at_nodes: Vec<Vec<f64>>,
    raster: Vec<Vec<f64>>,
}

impl FkPseudoInverse {
    pub fn new(basis: Arc<PswfBasis>, grid: PixelGrid, pnodes: &PNodeSet) -> Result<Self> {
        if basis.is_empty() {
            return invalid("basis retains no entries");
        }
        let centers: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.center_of(i)).collect();
        let mask = grid.mask();
        let mut raster = basis.evaluate(&centers);
        for row in raster.iter_mut() {
            for (v, &inside) in row.iter_mut().zip(&mask) {
                if !inside {
                    *v = 0.0;
                }
            }
        }
        Ok(FkPseudoInverse {
            at_nodes: basis.evaluate(pnodes.nodes()),
            basis,
            grid,
            pnodes: pnodes.clone(),
            raster,
        })
    }

    pub fn basis(&self) -> &PswfBasis {
        &self.basis
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    /// `⟨g, ψ_e⟩_B` for data on this operator's node set.
    pub fn coefficients(&self, g: &PData) -> Result<SpectralCoeffs> {
        check_bandwidth(&self.basis, g.k)?;
        if g.pnodes != self.pnodes {
            return invalid("data node set differs from the operator's node set");
        }
        Ok(SpectralCoeffs {
            c: self.basis.c,
            coeffs: self.at_nodes.iter().map(|psi| node_inner(g, psi)).collect(),
        })
    }

    /// `Σ_e a_e ψ_e` on the grid.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Result<ComplexField> {
        if coeffs.len() != self.raster.len() {
            return invalid("coefficient count does not match the basis");
        }
        let mut values = vec![Complex64::default(); self.grid.len()];
        for (a, psi) in coeffs.iter().zip(&self.raster) {
            for (v, p) in values.iter_mut().zip(psi) {
                *v += a * p;
            }
        }
        ComplexField::from_values(self.grid, values)
    }

    pub fn apply(&self, g: &PData) -> Result<ComplexField> {
        let c = self.coefficients(g)?;
        let scaled: Vec<Complex64> = c
            .coeffs
            .iter()
            .zip(self.basis.entries())
            .map(|(c, e)| c / e.alpha)
            .collect();
        self.synthesize(&scaled)
    }
}
