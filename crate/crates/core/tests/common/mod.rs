//! Oracles shared by the integration tests, written independently of the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `J_n(x)` from Bessel's integral `π⁻¹∫₀^π cos(nτ − x sin τ) dτ`; the trapezoid rule
/// on this periodic integrand converges geometrically.
pub fn bessel_j_integral(n: u32, x: f64) -> f64 {
    let m = 400;
    let h = PI / m as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..m {
        s += f(i as f64 * h);
    }
    s * h / PI
}

/// Gauss–Legendre nodes and weights on `[a, b]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (b - a) * z + 0.5 * (a + b);
        w[i] = (b - a) / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Polar product rule on the unit disk: Gauss–Legendre in `r` (weight `r` included),
/// trapezoid in `θ`.
pub fn polar_rule(nr: usize, nt: usize) -> Vec<([f64; 2], f64)> {
    let (r, wr) = gauss_legendre(nr, 0.0, 1.0);
    let mut out = Vec::with_capacity(nr * nt);
    for (ri, wi) in r.iter().zip(&wr) {
        for t in 0..nt {
            let th = 2.0 * PI * t as f64 / nt as f64;
            out.push(([ri * th.cos(), ri * th.sin()], wi * ri * 2.0 * PI / nt as f64));
        }
    }
    out
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `Y_n(x)` for `x > 0` from the integral
/// `π⁻¹∫₀^π sin(x sin τ − nτ) dτ − π⁻¹∫₀^∞ (e^{nt} + (−1)ⁿe^{−nt}) e^{−x sinh t} dt`.
pub fn bessel_y_integral(n: u32, x: f64) -> f64 {
    let nf = n as f64;
    let (t1, w1) = gauss_legendre(200, 0.0, PI);
    let a: f64 = t1.iter().zip(&w1).map(|(t, w)| w * (x * t.sin() - nf * t).sin()).sum();
    let upper = (60.0 / x).asinh();
    let (t2, w2) = gauss_legendre(400, 0.0, upper);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let b: f64 = t2
        .iter()
        .zip(&w2)
        .map(|(t, w)| w * ((nf * t).exp() + sign * (-nf * t).exp()) * (-x * t.sinh()).exp())
        .sum();
    (a - b) / PI
}
