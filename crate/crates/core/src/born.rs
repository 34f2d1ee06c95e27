//! Volume operators `F₀–F₃`, the Born recursion, far-field terms, the multilinear
//! operators `K_m` and synthetic two-frequency data.
//!
//! The operators are discrete convolutions on a zero-padded grid. Kernel samples
//! are point values of `G`, `∇G`, `∇∇G` at the lag, except within two cells of
//! the singularity where cell averages are used: `G` at lag 0 by polar
//! integration, the gradient and Hessian by the divergence theorem over the cell
//! boundary (which yields the `−δ/2` part of `∇∇G` at lag 0).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::fourier::{disk_rows, plane_wave_sum};
use crate::grids::{q_of_p, ComplexField, PData, PNodeSet, PixelGrid, RealField};
use crate::quadrature::gauss_legendre_on;
use crate::specfun::{green_hessian, hankel01};

/// Cells (Chebyshev distance) around the singularity that use cell averages.
const NEAR_CELLS: i64 = 2;
/// Growth factor over `‖u₁‖` treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e6;
/// RNG stream used for additive noise.
pub const NOISE_STREAM: u64 = 3;

type C = Complex64;

/// Fourier transforms of the kernels of `F₀–F₃` on a padded grid.
#[derive(Clone)]
pub struct ConvKernelSet {
    k: f64,
    grid: PixelGrid,
    pad: usize,
    size: usize,
    /// Spectra in transposed layout `[kx * L + ky]`: `G, ∂xG, ∂yG, ∂xxG, ∂xyG, ∂yyG`.
    spectra: [Vec<C>; 6],
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    rows: Vec<(usize, usize)>,
}

impl std::fmt::Debug for ConvKernelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvKernelSet")
            .field("k", &self.k)
            .field("n", &self.grid.n())
            .field("pad", &self.pad)
            .finish()
    }
}

/// Scratch buffers for one thread of convolutions.
struct Workspace {
    spec: [Vec<C>; 3],
    tmp: Vec<C>,
    scratch: Vec<C>,
}

impl Workspace {
    fn new(ks: &ConvKernelSet) -> Self {
        let l2 = ks.size * ks.size;
        let scratch_len = ks
            .fft
            .get_inplace_scratch_len()
            .max(ks.ifft.get_inplace_scratch_len());
        Workspace {
            spec: [vec![C::default(); l2], vec![C::default(); l2], vec![C::default(); l2]],
            tmp: vec![C::default(); l2],
            scratch: vec![C::default(); scratch_len],
        }
    }
}

fn transpose(src: &[C], dst: &mut [C], l: usize) {
    const B: usize = 16;
    for ib in (0..l).step_by(B) {
        for jb in (0..l).step_by(B) {
            for i in ib..(ib + B).min(l) {
                for j in jb..(jb + B).min(l) {
                    dst[j * l + i] = src[i * l + j];
                }
            }
        }
    }
}

/// Builds the kernel set for frequency `k` on `grid`, padding the grid by `pad`.
pub fn build_kernels(k: f64, grid: PixelGrid, pad: usize) -> Result<ConvKernelSet> {
    if !(k > 0.0) || !k.is_finite() {
        return invalid(format!("frequency must be positive, got {k}"));
    }
    if pad < 2 {
        return invalid(format!("pad factor must be at least 2, got {pad}"));
    }
    let n = grid.n();
    let size = pad * n;
    if size % 2 != 0 {
        return invalid("padded grid size must be even");
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let h = grid.spacing();
    let samples = kernel_samples(k, h, size);
    let mut ks = ConvKernelSet {
        k,
        grid,
        pad,
        size,
        spectra: Default::default(),
        fft,
        ifft,
        rows: disk_rows(grid),
    };
    let mut scratch = vec![C::default(); ks.fft.get_inplace_scratch_len()];
    let mut spectra: [Vec<C>; 6] = Default::default();
    for (s, mut buf) in spectra.iter_mut().zip(samples) {
        ks.fft.process_with_scratch(&mut buf, &mut scratch);
        let mut t = vec![C::default(); size * size];
        transpose(&buf, &mut t, size);
        ks.fft.process_with_scratch(&mut t, &mut scratch);
        *s = t;
    }
    ks.spectra = spectra;
    Ok(ks)
}

fn signed_lag(a: usize, size: usize) -> i64 {
    if a < size / 2 {
        a as i64
    } else {
        a as i64 - size as i64
    }
}

/// Kernel samples in row-major `[ay * L + ax]` layout.
fn kernel_samples(k: f64, h: f64, size: usize) -> [Vec<C>; 6] {
    let mut out: [Vec<C>; 6] = Default::default();
    for v in out.iter_mut() {
        *v = vec![C::default(); size * size];
    }
    let near = NearField::new(k, h);
    for ay in 0..size {
        for ax in 0..size {
            let (lx, ly) = (signed_lag(ax, size), signed_lag(ay, size));
            let d = [lx as f64 * h, ly as f64 * h];
            let r = d[0].hypot(d[1]);
            if r > 2.0 + h {
                continue;
            }
            let vals = if lx.abs().max(ly.abs()) <= NEAR_CELLS {
                near.cell_average(d, lx == 0 && ly == 0)
            } else {
                point_values(k, d)
            };
            for (o, v) in out.iter_mut().zip(vals) {
                o[ay * size + ax] = v;
            }
        }
    }
    out
}

fn point_values(k: f64, d: [f64; 2]) -> [C; 6] {
    let r = d[0].hypot(d[1]);
    let [h0, h1] = hankel01(k * r);
    let i4 = C::new(0.0, 0.25);
    let g = i4 * h0;
    let dg = -i4 * k * h1 / r;
    let hs = green_hessian(k, d);
    [g, dg * d[0], dg * d[1], hs[0], hs[1], hs[2]]
}

/// Cell averages of `G`, `∇G`, `∇∇G` over a cell of side `h`.
struct NearField {
    k: f64,
    h: f64,
    edge_nodes: Vec<f64>,
    edge_weights: Vec<f64>,
    cell_nodes: Vec<f64>,
    cell_weights: Vec<f64>,
    angle_nodes: Vec<f64>,
    angle_weights: Vec<f64>,
}

impl NearField {
    fn new(k: f64, h: f64) -> Self {
        let (edge_nodes, edge_weights) = gauss_legendre_on(24, -h / 2.0, h / 2.0);
        let (cell_nodes, cell_weights) = gauss_legendre_on(12, -h / 2.0, h / 2.0);
        let (angle_nodes, angle_weights) = gauss_legendre_on(24, 0.0, PI / 4.0);
        NearField {
            k,
            h,
            edge_nodes,
            edge_weights,
            cell_nodes,
            cell_weights,
            angle_nodes,
            angle_weights,
        }
    }

    fn cell_average(&self, center: [f64; 2], origin: bool) -> [C; 6] {
        let area = self.h * self.h;
        let g = if origin {
            self.origin_average_g()
        } else {
            let mut acc = C::default();
            for (x, wx) in self.cell_nodes.iter().zip(&self.cell_weights) {
                for (y, wy) in self.cell_nodes.iter().zip(&self.cell_weights) {
                    let r = (center[0] + x).hypot(center[1] + y);
                    acc += wx * wy * C::new(0.0, 0.25) * hankel01(self.k * r)[0];
                }
            }
            acc / area
        };
        // ∫_cell ∂_i F = ∮ n_i F ds over the four edges.
        let a = self.h / 2.0;
        let mut grad = [C::default(); 2];
        let mut hess = [C::default(); 3];
        for (s, w) in self.edge_nodes.iter().zip(&self.edge_weights) {
            for (normal, point) in [
                ([1.0, 0.0], [center[0] + a, center[1] + s]),
                ([-1.0, 0.0], [center[0] - a, center[1] + s]),
                ([0.0, 1.0], [center[0] + s, center[1] + a]),
                ([0.0, -1.0], [center[0] + s, center[1] - a]),
            ] {
                let r = point[0].hypot(point[1]);
                let [h0, h1] = hankel01(self.k * r);
                let gv = C::new(0.0, 0.25) * h0;
                let dg = -C::new(0.0, 0.25) * self.k * h1 / r;
                let gx = dg * point[0];
                let gy = dg * point[1];
                grad[0] += w * normal[0] * gv;
                grad[1] += w * normal[1] * gv;
                hess[0] += w * normal[0] * gx;
                hess[1] += w * 0.5 * (normal[0] * gy + normal[1] * gx);
                hess[2] += w * normal[1] * gy;
            }
        }
        if origin {
            grad = [C::default(); 2];
        }
        [
            g,
            grad[0] / area,
            grad[1] / area,
            hess[0] / area,
            hess[1] / area,
            hess[2] / area,
        ]
    }

    /// `(1/h²) ∫_{[-h/2,h/2]²} G` via `∫₀^R G(ρ) ρ dρ = (i/4)(R H₁(kR)/k + 2i/(πk²))`.
    fn origin_average_g(&self) -> C {
        let a = self.h / 2.0;
        let i4 = C::new(0.0, 0.25);
        let mut acc = C::default();
        for (t, w) in self.angle_nodes.iter().zip(&self.angle_weights) {
            let big_r = a / t.cos();
            let h1 = hankel01(self.k * big_r)[1];
            acc += w * i4 * (big_r * h1 / self.k + C::new(0.0, 2.0 / (PI * self.k * self.k)));
        }
        8.0 * acc / (self.h * self.h)
    }
}

impl ConvKernelSet {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    fn forward(&self, input: &[C], out: &mut [C], ws_tmp: &mut [C], scratch: &mut [C]) {
        let n = self.grid.n();
        let l = self.size;
        ws_tmp.fill(C::default());
        for iy in 0..n {
            ws_tmp[iy * l..iy * l + n].copy_from_slice(&input[iy * n..(iy + 1) * n]);
        }
        self.fft.process_with_scratch(&mut ws_tmp[..n * l], scratch);
        transpose(ws_tmp, out, l);
        self.fft.process_with_scratch(out, scratch);
    }

    fn inverse(&self, spec: &mut [C], output: &mut [C], ws_tmp: &mut [C], scratch: &mut [C]) {
        let n = self.grid.n();
        let l = self.size;
        self.ifft.process_with_scratch(spec, scratch);
        transpose(spec, ws_tmp, l);
        self.ifft.process_with_scratch(&mut ws_tmp[..n * l], scratch);
        let norm = 1.0 / (l * l) as f64;
        for (iy, &(lo, hi)) in self.rows.iter().enumerate() {
            let row = &mut output[iy * n..(iy + 1) * n];
            row.fill(C::default());
            for ix in lo..hi {
                row[ix] = ws_tmp[iy * l + ix] * norm;
            }
        }
    }

    /// With weighted inputs `a, b` (vector density) and `c` (scalar density), returns
    /// `u = ∇G∗(a,b) + k²G∗c` and `∇u = ∇∇G∗(a,b) + k²∇G∗c` on the disk cells.
    fn convolve(&self, ws: &mut Workspace, a: Option<&[C]>, b: Option<&[C]>, c: Option<&[C]>, outputs: [bool; 3]) -> [Vec<C>; 3] {
        let n2 = self.grid.len();
        let k2 = self.k * self.k;
        let mut present = [false; 3];
        for (slot, input) in [a, b, c].into_iter().enumerate() {
            if let Some(v) = input {
                let spec = std::mem::take(&mut ws.spec[slot]);
                let mut spec = spec;
                self.forward(v, &mut spec, &mut ws.tmp, &mut ws.scratch);
                ws.spec[slot] = spec;
                present[slot] = true;
            }
        }
        let [g, gx, gy, gxx, gxy, gyy] = &self.spectra;
        // kernels applied to (a, b, c) for each output
        let table: [[&Vec<C>; 3]; 3] = [[gx, gy, g], [gxx, gxy, gx], [gxy, gyy, gy]];
        let scales = [1.0, 1.0, k2];
        let mut result: [Vec<C>; 3] = Default::default();
        let mut acc = vec![C::default(); self.size * self.size];
        for (o, kernels) in table.iter().enumerate() {
            if !outputs[o] {
                continue;
            }
            acc.fill(C::default());
            for s in 0..3 {
                if !present[s] {
                    continue;
                }
                let kern = kernels[s];
                let inp = &ws.spec[s];
                let sc = scales[s];
                for ((a, kv), iv) in acc.iter_mut().zip(kern.iter()).zip(inp.iter()) {
                    *a += kv * iv * sc;
                }
            }
            let mut out = vec![C::default(); n2];
            self.inverse(&mut acc, &mut out, &mut ws.tmp, &mut ws.scratch);
            result[o] = out;
        }
        result
    }

    fn weighted(&self, f: &ComplexField) -> Result<Vec<C>> {
        if f.grid() != self.grid {
            return invalid("field grid does not match the kernel grid");
        }
        let w = self.grid.disk_quadrature();
        Ok(f.values().iter().zip(w.weights()).map(|(v, w)| v * w).collect())
    }

    fn field(&self, v: Vec<C>) -> ComplexField {
        ComplexField::from_values(self.grid, v).expect("convolution output is disk supported")
    }

    /// `F₀f = k² ∫_B G(·, y) f(y) dy`.
    pub fn apply_f0(&self, f: &ComplexField) -> Result<ComplexField> {
        let c = self.weighted(f)?;
        let mut ws = Workspace::new(self);
        let [u, _, _] = self.convolve(&mut ws, None, None, Some(&c), [true, false, false]);
        Ok(self.field(u))
    }

    /// `F₁f = ∫_B ∇_x G(·, y)·f(y) dy`.
    pub fn apply_f1(&self, f: [&ComplexField; 2]) -> Result<ComplexField> {
        let a = self.weighted(f[0])?;
        let b = self.weighted(f[1])?;
        let mut ws = Workspace::new(self);
        let [u, _, _] = self.convolve(&mut ws, Some(&a), Some(&b), None, [true, false, false]);
        Ok(self.field(u))
    }

    /// `F₂f = k² ∫_B ∇_x G(·, y) f(y) dy`.
    pub fn apply_f2(&self, f: &ComplexField) -> Result<[ComplexField; 2]> {
        let c = self.weighted(f)?;
        let mut ws = Workspace::new(self);
        let [_, dx, dy] = self.convolve(&mut ws, None, None, Some(&c), [false, true, true]);
        Ok([self.field(dx), self.field(dy)])
    }

    /// `F₃f = ∫_B ∇_x∇_x G(·, y) f(y) dy`.
    pub fn apply_f3(&self, f: [&ComplexField; 2]) -> Result<[ComplexField; 2]> {
        let a = self.weighted(f[0])?;
        let b = self.weighted(f[1])?;
        let mut ws = Workspace::new(self);
        let [_, dx, dy] = self.convolve(&mut ws, Some(&a), Some(&b), None, [false, true, true]);
        Ok([self.field(dx), self.field(dy)])
    }
}

/// Scattered field of order `j` for one incidence parameter `p` and frequency `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: ComplexField,
    pub grad_u: [ComplexField; 2],
    pub order: usize,
    pub k: f64,
    pub p: [f64; 2],
    /// `‖u₁‖_{L²(B)}`, recorded once order 1 is reached.
    pub first_norm: Option<f64>,
}

impl FieldState {
    /// Incident field `u⁰ = e^{ik(q+p)·y}`, `∇u⁰ = ik(q+p)u⁰`.
    pub fn incident(grid: PixelGrid, k: f64, p: [f64; 2]) -> Result<Self> {
        let q = q_of_p(p)?;
        let theta = [q[0] + p[0], q[1] + p[1]];
        let u = ComplexField::from_fn(grid, |y| C::from_polar(1.0, k * (theta[0] * y[0] + theta[1] * y[1])));
        let ik = C::new(0.0, k);
        let gx = u.map(|v| ik * theta[0] * v);
        let gy = u.map(|v| ik * theta[1] * v);
        Ok(FieldState {
            u,
            grad_u: [gx, gy],
            order: 0,
            k,
            p,
            first_norm: None,
        })
    }
}

/// A contrast pair `(γ, η)` as complex fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    pub gamma: ComplexField,
    pub eta: ComplexField,
}

impl Contrast {
    pub fn new(gamma: ComplexField, eta: ComplexField) -> Result<Self> {
        if gamma.grid() != eta.grid() {
            return invalid("gamma and eta live on different grids");
        }
        Ok(Contrast { gamma, eta })
    }

    pub fn from_real(gamma: &RealField, eta: &RealField) -> Result<Self> {
        Contrast::new(gamma.to_complex(), eta.to_complex())
    }

    pub fn grid(&self) -> PixelGrid {
        self.gamma.grid()
    }

    pub fn scale(&self, s: C) -> Contrast {
        Contrast {
            gamma: self.gamma.scale(s),
            eta: self.eta.scale(s),
        }
    }

    /// `‖(γ, η)‖_{(L²(B))²}`.
    pub fn l2_norm(&self) -> f64 {
        self.gamma.l2_norm().hypot(self.eta.l2_norm())
    }
}

fn check_state(state: &FieldState, contrast: &Contrast, kernels: &ConvKernelSet) -> Result<()> {
    if state.u.grid() != kernels.grid || contrast.grid() != kernels.grid {
        return invalid("state, contrast and kernels must share a grid");
    }
    if (state.k - kernels.k).abs() > 1e-12 * kernels.k {
        return invalid("state frequency does not match the kernels");
    }
    Ok(())
}

/// `u_{j+1} = F₁(γ∇u_j) + F₀(ηu_j)`, `∇u_{j+1} = F₃(γ∇u_j) + F₂(ηu_j)`.
pub fn born_step(state: &FieldState, contrast: &Contrast, kernels: &ConvKernelSet) -> Result<FieldState> {
    check_state(state, contrast, kernels)?;
    let mut ws = Workspace::new(kernels);
    step_with(state, contrast, kernels, &mut ws)
}

fn step_with(state: &FieldState, contrast: &Contrast, kernels: &ConvKernelSet, ws: &mut Workspace) -> Result<FieldState> {
    let w = kernels.grid.disk_quadrature();
    let w = w.weights();
    let g = contrast.gamma.values();
    let e = contrast.eta.values();
    let ux = state.grad_u[0].values();
    let uy = state.grad_u[1].values();
    let u = state.u.values();
    let a: Vec<C> = (0..w.len()).map(|i| w[i] * g[i] * ux[i]).collect();
    let b: Vec<C> = (0..w.len()).map(|i| w[i] * g[i] * uy[i]).collect();
    let c: Vec<C> = (0..w.len()).map(|i| w[i] * e[i] * u[i]).collect();
    let [nu, dx, dy] = kernels.convolve(ws, Some(&a), Some(&b), Some(&c), [true, true, true]);
    let u_next = kernels.field(nu);
    let norm = u_next.l2_norm();
    if !norm.is_finite() {
        return Err(Error::DivergenceDetected { node: 0, frequency: kernels.k });
    }
    let first_norm = match state.first_norm {
        Some(f) => {
            if norm > DIVERGENCE_FACTOR * f {
                return Err(Error::DivergenceDetected { node: 0, frequency: kernels.k });
            }
            Some(f)
        }
        None => Some(norm),
    };
    Ok(FieldState {
        u: u_next,
        grad_u: [kernels.field(dx), kernels.field(dy)],
        order: state.order + 1,
        k: state.k,
        p: state.p,
        first_norm,
    })
}

/// `u_j(p; k) = ik⁻¹𝔽₀(γ(q−p)·∇u_{j−1}) + 𝔽₀(ηu_{j−1})`, `𝔽₀f = ∫_B e^{ik(p−q)·y} f`.
pub fn farfield_term(state_prev: &FieldState, contrast: &Contrast, p: [f64; 2], k: f64) -> Result<C> {
    if state_prev.u.grid() != contrast.grid() {
        return invalid("state and contrast must share a grid");
    }
    let rows = disk_rows(contrast.grid());
    farfield_with(state_prev, contrast, p, k, &rows)
}

fn farfield_with(state: &FieldState, contrast: &Contrast, p: [f64; 2], k: f64, rows: &[(usize, usize)]) -> Result<C> {
    let q = q_of_p(p)?;
    let grid = contrast.grid();
    let w = grid.disk_quadrature();
    let w = w.weights();
    let qp = [q[0] - p[0], q[1] - p[1]];
    let ik = C::new(0.0, 1.0 / k);
    let g = contrast.gamma.values();
    let e = contrast.eta.values();
    let ux = state.grad_u[0].values();
    let uy = state.grad_u[1].values();
    let u = state.u.values();
    let integrand: Vec<C> = (0..w.len())
        .map(|i| w[i] * (ik * g[i] * (qp[0] * ux[i] + qp[1] * uy[i]) + e[i] * u[i]))
        .collect();
    Ok(plane_wave_sum(grid, rows, &integrand, [-k * qp[0], -k * qp[1]]))
}

/// `K_m(ψ₁, …, ψ_m)(p; k)`: the Born recursion with argument `t` used at step `t`.
pub fn multilinear_term(args: &[&Contrast], p: [f64; 2], kernels: &ConvKernelSet) -> Result<C> {
    if args.is_empty() {
        return invalid("multilinear term needs at least one argument");
    }
    let mut state = FieldState::incident(kernels.grid, kernels.k, p)?;
    let mut ws = Workspace::new(kernels);
    for a in &args[..args.len() - 1] {
        check_state(&state, a, kernels)?;
        state = step_with(&state, a, kernels, &mut ws)?;
    }
    let rows = disk_rows(kernels.grid);
    farfield_with(&state, args[args.len() - 1], p, kernels.k, &rows)
}

/// Evaluates `K_m` for every tuple in `tuples` at every node `p_n / scale`, sharing
/// recursion prefixes between tuples. `tuples` index into `args`. Returns
/// `out[tuple][node]`.
pub fn multilinear_batch(
    args: &[Contrast],
    tuples: &[Vec<usize>],
    pnodes: &PNodeSet,
    scale: f64,
    kernels: &ConvKernelSet,
) -> Result<Vec<Vec<C>>> {
    for t in tuples {
        if t.is_empty() || t.iter().any(|&i| i >= args.len()) {
            return invalid("tuple index out of range");
        }
    }
    for a in args {
        if a.grid() != kernels.grid {
            return invalid("arguments must share the kernel grid");
        }
    }
    let trie = PrefixTrie::build(tuples);
    let rows = disk_rows(kernels.grid);
    let per_node: Vec<Result<Vec<C>>> = pnodes
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(node, p)| {
            let p = [p[0] / scale, p[1] / scale];
            let mut ws = Workspace::new(kernels);
            let mut out = vec![C::default(); tuples.len()];
            let state = FieldState::incident(kernels.grid, kernels.k, p)?;
            trie.walk(0, &state, args, p, kernels, &rows, &mut ws, &mut out)
                .map_err(|e| with_node(e, node))?;
            Ok(out)
        })
        .collect();
    let mut result = vec![vec![C::default(); pnodes.len()]; tuples.len()];
    for (node, r) in per_node.into_iter().enumerate() {
        for (t, v) in r?.into_iter().enumerate() {
            result[t][node] = v;
        }
    }
    Ok(result)
}

fn with_node(e: Error, node: usize) -> Error {
    match e {
        Error::DivergenceDetected { frequency, .. } => Error::DivergenceDetected { node, frequency },
        other => other,
    }
}

/// Trie over tuple prefixes: each edge applies one Born step with an argument;
/// tuples ending at a node read the far-field term with their last argument.
struct PrefixTrie {
    nodes: Vec<TrieNode>,
}

#[derive(Default)]
struct TrieNode {
    children: Vec<(usize, usize)>,
    /// (tuple index, last argument)
    finals: Vec<(usize, usize)>,
}

impl PrefixTrie {
    fn build(tuples: &[Vec<usize>]) -> Self {
        let mut nodes = vec![TrieNode::default()];
        for (ti, t) in tuples.iter().enumerate() {
            let mut cur = 0;
            for &a in &t[..t.len() - 1] {
                let found = nodes[cur].children.iter().find(|(arg, _)| *arg == a).map(|c| c.1);
                cur = match found {
                    Some(c) => c,
                    None => {
                        nodes.push(TrieNode::default());
                        let id = nodes.len() - 1;
                        nodes[cur].children.push((a, id));
                        id
                    }
                };
            }
            nodes[cur].finals.push((ti, t[t.len() - 1]));
        }
        PrefixTrie { nodes }
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        at: usize,
        state: &FieldState,
        args: &[Contrast],
        p: [f64; 2],
        kernels: &ConvKernelSet,
        rows: &[(usize, usize)],
        ws: &mut Workspace,
        out: &mut [C],
    ) -> Result<()> {
        for &(ti, last) in &self.nodes[at].finals {
            out[ti] = farfield_with(state, &args[last], p, kernels.k, rows)?;
        }
        for &(arg, child) in &self.nodes[at].children {
            let next = step_with(state, &args[arg], kernels, ws)?;
            self.walk(child, &next, args, p, kernels, rows, ws, out)?;
        }
        Ok(())
    }
}

/// Origin of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthesized { j_max: usize, tol: f64 },
    Imported { source: String },
}

/// Additive noise applied to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub level: f64,
    pub seed: u64,
    pub model: String,
}

/// Two-frequency data `φ = (u(p; k), u(ℓ⁻¹p; ℓk))` on a shared node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterDataset {
    pub k: f64,
    pub ell: f64,
    pub low: PData,
    pub high: PData,
    pub provenance: Provenance,
    pub noise: Option<NoiseRecord>,
    /// Orders summed per node at `k` and `ℓk`.
    pub orders: [Vec<usize>; 2],
    /// Convergence flags per node at `k` and `ℓk`.
    pub converged: [Vec<bool>; 2],
}

impl ScatterDataset {
    pub fn new(low: PData, high: PData, ell: f64, provenance: Provenance) -> Result<Self> {
        if !(ell > 1.0) {
            return invalid(format!("ell must exceed 1, got {ell}"));
        }
        if low.pnodes != high.pnodes {
            return invalid("both components must share a node set");
        }
        if (high.k - ell * low.k).abs() > 1e-12 * high.k {
            return invalid("second component frequency must equal ell * k");
        }
        let n = low.values.len();
        Ok(ScatterDataset {
            k: low.k,
            ell,
            low,
            high,
            provenance,
            noise: None,
            orders: [vec![0; n], vec![0; n]],
            converged: [vec![false; n], vec![false; n]],
        })
    }

    pub fn pnodes(&self) -> &PNodeSet {
        &self.low.pnodes
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| c.iter().all(|&b| b))
    }
}

/// Result of summing the Born series at one node.
struct NodeSum {
    value: C,
    orders: usize,
    converged: bool,
}

fn synth_node(p: [f64; 2], contrast: &Contrast, kernels: &ConvKernelSet, rows: &[(usize, usize)], j_max: usize, tol: f64) -> Result<NodeSum> {
    let mut ws = Workspace::new(kernels);
    let mut state = FieldState::incident(kernels.grid, kernels.k, p)?;
    let mut value = farfield_with(&state, contrast, p, kernels.k, rows)?;
    let mut volume_sum: Option<ComplexField> = None;
    let mut orders = 1;
    while orders < j_max {
        state = step_with(&state, contrast, kernels, &mut ws)?;
        let sum = match volume_sum {
            Some(s) => s.add(&state.u)?,
            None => state.u.clone(),
        };
        value += farfield_with(&state, contrast, p, kernels.k, rows)?;
        orders += 1;
        let increment = state.u.l2_norm();
        let total = sum.l2_norm();
        volume_sum = Some(sum);
        if increment <= tol * total || total == 0.0 {
            return Ok(NodeSum { value, orders, converged: true });
        }
    }
    Ok(NodeSum { value, orders, converged: false })
}

/// Born-series data at every node, `u(p_n / scale; k)` with `k` the kernel frequency.
fn synth_component(contrast: &Contrast, pnodes: &PNodeSet, scale: f64, kernels: &ConvKernelSet, j_max: usize, tol: f64) -> Result<(PData, Vec<usize>, Vec<bool>)> {
    let rows = disk_rows(kernels.grid);
    let results: Vec<Result<NodeSum>> = pnodes
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            synth_node([p[0] / scale, p[1] / scale], contrast, kernels, &rows, j_max, tol).map_err(|e| with_node(e, i))
        })
        .collect();
    let mut values = Vec::with_capacity(pnodes.len());
    let mut orders = Vec::with_capacity(pnodes.len());
    let mut flags = Vec::with_capacity(pnodes.len());
    for r in results {
        let s = r?;
        values.push(s.value);
        orders.push(s.orders);
        flags.push(s.converged);
    }
    Ok((PData::new(pnodes.clone(), kernels.k, values)?, orders, flags))
}

/// Sums the Born series per node and frequency until the volume increment
/// `‖u^s_j‖ / ‖Σ_{i≤j} u^s_i‖` falls below `tol` or `J_max` far-field orders are used.
pub fn synthesize(
    gamma: &RealField,
    eta: &RealField,
    pnodes: &PNodeSet,
    kernels_low: &ConvKernelSet,
    kernels_high: &ConvKernelSet,
    ell: f64,
    j_max: usize,
    tol: f64,
) -> Result<ScatterDataset> {
    if !(ell > 1.0) {
        return invalid(format!("ell must exceed 1, got {ell}"));
    }
    if j_max < 1 {
        return invalid("J_max must be at least 1");
    }
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let k = kernels_low.k;
    if (kernels_high.k - ell * k).abs() > 1e-12 * kernels_high.k {
        return invalid("second kernel set must be built at ell * k");
    }
    let contrast = Contrast::from_real(gamma, eta)?;
    if contrast.grid() != kernels_low.grid || contrast.grid() != kernels_high.grid {
        return invalid("contrast grid does not match the kernels");
    }
    let (low, o1, c1) = synth_component(&contrast, pnodes, 1.0, kernels_low, j_max, tol)?;
    let (high, o2, c2) = synth_component(&contrast, pnodes, ell, kernels_high, j_max, tol)?;
    let mut ds = ScatterDataset::new(low, high, ell, Provenance::Synthesized { j_max, tol })?;
    ds.orders = [o1, o2];
    ds.converged = [c1, c2];
    Ok(ds)
}

/// Adds complex Gaussian noise scaled to `level · ‖component‖₂` per frequency component.
pub fn add_noise(data: &ScatterDataset, level: f64, seed: u64) -> Result<ScatterDataset> {
    if !(level >= 0.0) || !level.is_finite() {
        return invalid(format!("noise level must be non-negative, got {level}"));
    }
    let mut out = data.clone();
    if level == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    for comp in [&mut out.low, &mut out.high] {
        let delta: Vec<C> = (0..comp.values.len())
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C::new(re, im)
            })
            .collect();
        let dn = delta.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
        let target = level * comp.euclidean_norm();
        if dn == 0.0 || target == 0.0 {
            continue;
        }
        let s = target / dn;
        for (v, d) in comp.values.iter_mut().zip(delta) {
            *v += d * s;
        }
    }
    out.noise = Some(NoiseRecord {
        level,
        seed,
        model: "complex standard normal, rescaled per component to level * euclidean norm".into(),
    });
    Ok(out)
}
