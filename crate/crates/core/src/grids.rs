//! Pixel grids on [-1, 1)², fields supported in the unit disk, p-node quadrature,
//! incidence/observation directions and the far-field reorganization onto p-nodes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::diskquad::DiskQuadrature;
use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre;

/// Equispaced `n × n` cell-centered grid on [-1, 1)².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelGrid {
    n: usize,
}

impl PixelGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("pixel grid needs at least one cell per axis");
        }
        Ok(PixelGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Cell-center coordinate along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + (i as f64 + 0.5) * self.spacing()
    }

    /// Center of cell `(ix, iy)`.
    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.coord(ix), self.coord(iy)]
    }

    /// Center of the cell with row-major index `idx = iy * n + ix`.
    pub fn center_of(&self, idx: usize) -> [f64; 2] {
        self.center(idx % self.n, idx / self.n)
    }

    /// True when the cell center lies strictly inside the unit disk.
    pub fn inside(&self, ix: usize, iy: usize) -> bool {
        let [x, y] = self.center(ix, iy);
        x * x + y * y < 1.0
    }

    /// Disk mask in row-major order.
    pub fn mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.inside(i % self.n, i / self.n)).collect()
    }

    /// Quadrature weights for integrals over the disk, row-major.
    pub fn disk_quadrature(&self) -> Arc<DiskQuadrature> {
        DiskQuadrature::for_grid(self.n)
    }
}

/// Scalar field on a [`PixelGrid`], zero outside the disk mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelField<T> {
    grid: PixelGrid,
    values: Vec<T>,
}

pub type RealField = PixelField<f64>;
pub type ComplexField = PixelField<Complex64>;

impl<T> PixelField<T> {
    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl<T: Copy + Default + PartialEq> PixelField<T> {
    pub fn zeros(grid: PixelGrid) -> Self {
        PixelField {
            grid,
            values: vec![T::default(); grid.len()],
        }
    }

    /// Samples `f` at the cell centers inside the disk.
    pub fn from_fn(grid: PixelGrid, f: impl Fn([f64; 2]) -> T) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (ix, iy) = (i % grid.n, i / grid.n);
                if grid.inside(ix, iy) {
                    f(grid.center(ix, iy))
                } else {
                    T::default()
                }
            })
            .collect();
        PixelField { grid, values }
    }

    /// Wraps row-major values; entries outside the disk must be zero.
    pub fn from_values(grid: PixelGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            ));
        }
        for (i, v) in values.iter().enumerate() {
            if *v != T::default() && !grid.inside(i % grid.n, i / grid.n) {
                return invalid("field is nonzero outside the unit disk");
            }
        }
        Ok(PixelField { grid, values })
    }

    /// Wraps row-major values, zeroing anything outside the disk.
    pub fn masked(grid: PixelGrid, mut values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            ));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !grid.inside(i % grid.n, i / grid.n) {
                *v = T::default();
            }
        }
        Ok(PixelField { grid, values })
    }

    pub fn get(&self, ix: usize, iy: usize) -> T {
        self.values[iy * self.grid.n + ix]
    }

    /// Applies `f` cellwise; the result is re-masked.
    pub fn map<U: Copy + Default + PartialEq>(&self, f: impl Fn(T) -> U) -> PixelField<U> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if self.grid.inside(i % self.grid.n, i / self.grid.n) {
                    f(v)
                } else {
                    U::default()
                }
            })
            .collect();
        PixelField {
            grid: self.grid,
            values,
        }
    }
}

impl RealField {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }

    /// `‖f‖_{L²(B)}` with the disk quadrature.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.disk_quadrature();
        self.values
            .iter()
            .zip(w.weights())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> RealField {
        self.map(|v| v * s)
    }
}

impl ComplexField {
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.disk_quadrature();
        self.values
            .iter()
            .zip(w.weights())
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn re(&self) -> RealField {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> RealField {
        self.map(|v| v.im)
    }

    pub fn scale(&self, s: Complex64) -> ComplexField {
        self.map(|v| v * s)
    }

    /// Cellwise sum; grids must agree.
    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.grid != other.grid {
            return invalid("fields live on different grids");
        }
        Ok(PixelField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// `⟨f, g⟩_{L²(B)} = ∫ f ḡ` with the disk quadrature.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if self.grid != other.grid {
            return invalid("fields live on different grids");
        }
        let w = self.grid.disk_quadrature();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(w.weights())
            .map(|((a, b), w)| a * b.conj() * w)
            .sum())
    }
}

/// Equiangular unit directions `x̂_i = (cos 2πi/n, sin 2πi/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionSet {
    n_in: usize,
}

impl DirectionSet {
    pub fn new(n_in: usize) -> Result<Self> {
        if n_in == 0 {
            return invalid("direction set is empty");
        }
        Ok(DirectionSet { n_in })
    }

    pub fn len(&self) -> usize {
        self.n_in
    }

    pub fn is_empty(&self) -> bool {
        self.n_in == 0
    }

    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n_in as f64
    }

    pub fn direction(&self, i: usize) -> [f64; 2] {
        let (s, c) = self.angle(i).sin_cos();
        [c, s]
    }
}

/// Gauss–Legendre (radial, in `t = 2|p|² − 1`) × trapezoidal (angular) nodes on the disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PNodeSpec", into = "PNodeSpec")]
pub struct PNodeSet {
    t: usize,
    m: usize,
    radii: Vec<f64>,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PNodeSpec {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "M")]
    m: usize,
}

impl TryFrom<PNodeSpec> for PNodeSet {
    type Error = Error;
    fn try_from(s: PNodeSpec) -> Result<Self> {
        build_pnodes(s.t, s.m)
    }
}

impl From<PNodeSet> for PNodeSpec {
    fn from(p: PNodeSet) -> Self {
        PNodeSpec { t: p.t, m: p.m }
    }
}

/// Builds the `T·M` node set; node index is `j·M + i` for radial `j`, angular `i`.
pub fn build_pnodes(t: usize, m: usize) -> Result<PNodeSet> {
    if t < 1 {
        return invalid("radial node count T must be at least 1");
    }
    if m < 2 {
        return invalid("angular node count M must be at least 2");
    }
    let (tn, tw) = gauss_legendre(t);
    let radii: Vec<f64> = tn.iter().map(|&t| ((t + 1.0) / 2.0).sqrt()).collect();
    let dtheta = 2.0 * PI / m as f64;
    let mut nodes = Vec::with_capacity(t * m);
    let mut weights = Vec::with_capacity(t * m);
    for (r, w) in radii.iter().zip(&tw) {
        for i in 0..m {
            let (s, c) = (dtheta * i as f64).sin_cos();
            nodes.push([r * c, r * s]);
            weights.push(w * dtheta / 4.0);
        }
    }
    Ok(PNodeSet {
        t,
        m,
        radii,
        nodes,
        weights,
    })
}

impl PNodeSet {
    /// Default node counts for frequency `k`: `T = ⌈k⌉ + 8`, `M = 4T`.
    pub fn default_for(k: f64) -> Result<PNodeSet> {
        let t = k.ceil() as usize + 8;
        build_pnodes(t, 4 * t)
    }

    pub fn radial_count(&self) -> usize {
        self.t
    }

    pub fn angular_count(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Distinct node radii, ascending.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn min_radius(&self) -> f64 {
        self.radii[0]
    }

    /// `∫_B f` by the node rule.
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&p, w)| w * f(p)).sum()
    }
}

/// `q(p) = sqrt(1 − |p|²)/|p| · R_{90°} p`, so that `q + p` and `q − p` are unit vectors.
pub fn q_of_p(p: [f64; 2]) -> Result<[f64; 2]> {
    if !p[0].is_finite() || !p[1].is_finite() {
        return invalid("p must be finite");
    }
    let r2 = p[0] * p[0] + p[1] * p[1];
    if r2 == 0.0 {
        return Err(Error::SingularInput("q(p) is undefined at p = 0".into()));
    }
    if r2 > 1.0 + 1e-15 {
        return invalid(format!("|p| = {} exceeds 1", r2.sqrt()));
    }
    let s = (1.0 - r2).max(0.0).sqrt() / r2.sqrt();
    Ok([-s * p[1], s * p[0]])
}

/// Far-field samples `u^∞(x̂_i, θ̂_j; k)`, receiver-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldMatrix {
    k: f64,
    directions: DirectionSet,
    data: Vec<Complex64>,
}

impl FarFieldMatrix {
    pub fn new(k: f64, directions: DirectionSet, data: Vec<Complex64>) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return invalid(format!("frequency must be positive, got {k}"));
        }
        let n = directions.len();
        if data.len() != n * n {
            return invalid(format!("far-field matrix needs {} entries, got {}", n * n, data.len()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("far-field matrix has non-finite entries");
        }
        Ok(FarFieldMatrix { k, directions, data })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn directions(&self) -> DirectionSet {
        self.directions
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Entry for receiver `i`, incidence `j`.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.directions.len() + j]
    }
}

/// Multiplies every entry by `sqrt(8π) e^{−iπ/4} k^{−3/2}`.
pub fn scale_farfield(f: &FarFieldMatrix) -> FarFieldMatrix {
    let s = Complex64::from_polar((8.0 * PI).sqrt() * f.k.powf(-1.5), -PI / 4.0);
    FarFieldMatrix {
        k: f.k,
        directions: f.directions,
        data: f.data.iter().map(|z| z * s).collect(),
    }
}

/// Complex samples over a [`PNodeSet`] at frequency `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PData {
    pub pnodes: PNodeSet,
    pub k: f64,
    pub values: Vec<Complex64>,
}

impl PData {
    pub fn new(pnodes: PNodeSet, k: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != pnodes.len() {
            return invalid(format!(
                "data has {} values for {} nodes",
                values.len(),
                pnodes.len()
            ));
        }
        Ok(PData { pnodes, k, values })
    }

    pub fn zeros(pnodes: PNodeSet, k: f64) -> Self {
        let values = vec![Complex64::default(); pnodes.len()];
        PData { pnodes, k, values }
    }

    /// Euclidean norm of the value vector.
    pub fn euclidean_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖g‖_{L²(B)}` by the node rule.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.pnodes.weights())
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Nearest-pair reorganization: node `p_n` takes the entry `(i, j)` minimizing
/// `‖p_n − (θ̂_j − x̂_i)/2‖`, ties to the smallest `(i, j)`.
pub fn map_farfield_to_pnodes(f: &FarFieldMatrix, p: &PNodeSet) -> Result<PData> {
    map_farfield_to_scaled_pnodes(f, p, 1.0)
}

/// As [`map_farfield_to_pnodes`] but matching the scaled nodes `p_n / scale`
/// (used for the higher-frequency component sampled at `ℓ⁻¹p`).
pub fn map_farfield_to_scaled_pnodes(f: &FarFieldMatrix, p: &PNodeSet, scale: f64) -> Result<PData> {
    let n = f.directions.len();
    if n < 4 {
        return invalid(format!("need at least 4 directions, got {n}"));
    }
    if !(scale >= 1.0) {
        return invalid(format!("node scale must be at least 1, got {scale}"));
    }
    let dirs: Vec<[f64; 2]> = (0..n).map(|i| f.directions.direction(i)).collect();
    let values = p
        .nodes()
        .iter()
        .map(|node| {
            let target = [node[0] / scale, node[1] / scale];
            let (i, j) = nearest_pair(&dirs, target);
            f.get(i, j)
        })
        .collect();
    PData::new(p.clone(), f.k, values)
}

fn nearest_pair(dirs: &[[f64; 2]], target: [f64; 2]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_d = f64::INFINITY;
    for (i, x) in dirs.iter().enumerate() {
        for (j, t) in dirs.iter().enumerate() {
            let dx = target[0] - 0.5 * (t[0] - x[0]);
            let dy = target[1] - 0.5 * (t[1] - x[1]);
            let d = dx * dx + dy * dy;
            if d < best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    best
}
