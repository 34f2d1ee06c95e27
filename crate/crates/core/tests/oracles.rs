//! Library routines against quadrature oracles and closed forms.

mod common;

use std::f64::consts::PI;

use ibs2::born::build_kernels;
use ibs2::grids::{ComplexField, PixelGrid};
use ibs2::inverse::compositions;
use ibs2::specfun::{bessel_j, bessel_y01, green, hankel1};
use num_complex::Complex64;

use common::{bessel_j_integral, bessel_y_integral};

#[test]
fn bessel_j_matches_integral() {
    for n in 0..6u32 {
        for &x in &[0.1, 1.0, 3.7, 10.0, 24.5, 40.0] {
            let lib = bessel_j(n as usize, x).unwrap();
            let oracle = bessel_j_integral(n, x);
            assert!((lib - oracle).abs() < 1e-12, "J_{n}({x}): {lib} vs {oracle}");
        }
    }
}

#[test]
fn bessel_y_matches_integral_on_both_branches() {
    for &x in &[0.5, 1.0, 2.5, 7.0, 12.0, 24.9, 25.1, 33.0, 60.0] {
        let (y0, y1) = bessel_y01(x).unwrap();
        let o0 = bessel_y_integral(0, x);
        let o1 = bessel_y_integral(1, x);
        assert!((y0 - o0).abs() < 1e-10, "Y_0({x}): {y0} vs {o0}");
        assert!((y1 - o1).abs() < 1e-10, "Y_1({x}): {y1} vs {o1}");
    }
}

#[test]
fn green_is_quarter_i_hankel() {
    let k = 4.0;
    let x: [f64; 2] = [0.3, -0.2];
    let y: [f64; 2] = [-0.1, 0.4];
    let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
    let g = green(k, x, y).unwrap();
    let expect = Complex64::new(0.0, 0.25) * Complex64::new(bessel_j_integral(0, k * r), bessel_y_integral(0, k * r));
    assert!((g.value - expect).norm() < 1e-10);
    let h1 = hankel1(1, k * r).unwrap();
    let dh = Complex64::new(0.0, -0.25) * k * h1 / r;
    for c in 0..2 {
        let expect = dh * (x[c] - y[c]);
        assert!((g.gradient_x[c] - expect).norm() < 1e-10);
    }
}

/// `k²∫_B G(x, y) dy = −1 + (iπk/2) H₁(k) J₀(k|x|)` for `|x| < 1`.
#[test]
fn f0_of_indicator_matches_closed_form() {
    let k = 5.0;
    let grid = PixelGrid::new(64).unwrap();
    let kernels = build_kernels(k, grid, 2).unwrap();
    let one = ComplexField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
    let u = kernels.apply_f0(&one).unwrap();
    let h1 = Complex64::new(bessel_j_integral(1, k), bessel_y_integral(1, k));
    let coef = Complex64::new(0.0, PI * k / 2.0) * h1;
    let (mut num, mut den) = (0.0, 0.0);
    for iy in 0..grid.n() {
        for ix in 0..grid.n() {
            let [x, y] = grid.center(ix, iy);
            let r = x.hypot(y);
            if r > 0.9 {
                continue;
            }
            let exact = coef * bessel_j_integral(0, k * r) - 1.0;
            num += (u.get(ix, iy) - exact).norm_sqr();
            den += exact.norm_sqr();
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel < 3e-3, "relative error {rel}");
}

/// `φ = (1 − |y|²)⁴`, so `∇φ` and `∂ₙφ` vanish on the boundary.
fn bump(grid: PixelGrid) -> (ComplexField, ComplexField, ComplexField) {
    let u = |p: [f64; 2]| 1.0 - p[0] * p[0] - p[1] * p[1];
    let gx = ComplexField::from_fn(grid, |p| Complex64::from(-8.0 * p[0] * u(p).powi(3)));
    let gy = ComplexField::from_fn(grid, |p| Complex64::from(-8.0 * p[1] * u(p).powi(3)));
    let lap = ComplexField::from_fn(grid, |p| {
        let r2 = p[0] * p[0] + p[1] * p[1];
        Complex64::from(-16.0 * u(p).powi(3) + 48.0 * r2 * u(p).powi(2))
    });
    (gx, gy, lap)
}

fn rel(a: &ComplexField, b: &ComplexField) -> f64 {
    let d = a.add(&b.scale(Complex64::from(-1.0))).unwrap();
    d.l2_norm() / b.l2_norm()
}

#[test]
fn f1_of_gradient_is_scaled_f0_of_laplacian() {
    let k = 5.0;
    let grid = PixelGrid::new(64).unwrap();
    let kernels = build_kernels(k, grid, 2).unwrap();
    let (gx, gy, lap) = bump(grid);
    let lhs = kernels.apply_f1([&gx, &gy]).unwrap();
    let rhs = kernels.apply_f0(&lap).unwrap().scale(Complex64::from(1.0 / (k * k)));
    let e = rel(&lhs, &rhs);
    assert!(e < 1e-2, "relative defect {e}");
}

#[test]
fn f3_of_gradient_is_scaled_f2_of_laplacian() {
    let k = 5.0;
    let grid = PixelGrid::new(64).unwrap();
    let kernels = build_kernels(k, grid, 2).unwrap();
    let (gx, gy, lap) = bump(grid);
    let lhs = kernels.apply_f3([&gx, &gy]).unwrap();
    let rhs = kernels.apply_f2(&lap).unwrap();
    for c in 0..2 {
        let e = rel(&lhs[c], &rhs[c].scale(Complex64::from(1.0 / (k * k))));
        assert!(e < 1e-2, "component {c}: relative defect {e}");
    }
}

#[test]
fn composition_counts_and_sums() {
    for j in 1..=9usize {
        let c = compositions(j);
        assert_eq!(c.len(), (1usize << (j - 1)) - 1, "j = {j}");
        assert!(c.iter().all(|t| t.len() >= 2 && t.iter().sum::<usize>() == j && t.iter().all(|&x| x >= 1)));
        let mut sorted = c.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), c.len());
    }
}
