//! Bessel and Hankel functions of integer order and the 2-D Helmholtz Green's function.
//!
//! `J_n` uses backward (Miller) recurrence normalized by `J_0 + 2 Σ J_{2k} = 1`.
//! `Y_0`, `Y_1` use the Neumann series built from the same sequence for
//! `x ≤ 25` and the Hankel asymptotic expansion beyond.

use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

use crate::error::{invalid, Error, Result};

/// Largest order accepted by [`bessel_j`].
pub const ORDER_MAX: usize = 200;

const ASYMPTOTIC_SWITCH: f64 = 25.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Bessel function of the first kind `J_order(x)` for `x ≥ 0`.
pub fn bessel_j(order: usize, x: f64) -> Result<f64> {
    if order > ORDER_MAX {
        return invalid(format!("order {order} exceeds maximum {ORDER_MAX}"));
    }
    check_arg(x)?;
    Ok(bessel_j_seq(order, x)[order])
}

/// `J_0(x), …, J_nmax(x)` for finite `x ≥ 0`.
pub fn bessel_j_seq(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = nmax.max(x.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut sum = 0.0;
    for m in (1..=start).rev() {
        let prev = 2.0 * m as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let idx = m - 1;
        if idx <= nmax {
            out[idx] = cur;
        }
        if idx > 0 && idx % 2 == 0 {
            sum += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            sum *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    sum += cur;
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Bessel functions of the second kind `(Y_0(x), Y_1(x))` for `x > 0`.
pub fn bessel_y01(x: f64) -> Result<(f64, f64)> {
    check_arg(x)?;
    if x == 0.0 {
        return Err(Error::SingularInput("Y_n(0) is unbounded".into()));
    }
    if x > ASYMPTOTIC_SWITCH {
        let h0 = hankel_asymptotic(0, x);
        let h1 = hankel_asymptotic(1, x);
        return Ok((h0.im, h1.im));
    }
    let n = x.ceil() as usize + 60;
    let j = bessel_j_seq(n + 1, x);
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k < n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * lg * j[0] - 2.0 * FRAC_2_PI * s0;
    let y1 = -FRAC_2_PI * j[0] / x + FRAC_2_PI * lg * j[1] + FRAC_2_PI * s1;
    Ok((y0, y1))
}

/// Hankel function of the first kind `H^{(1)}_order(x)`, order 0 or 1, `x > 0`.
pub fn hankel1(order: usize, x: f64) -> Result<Complex64> {
    if order > 1 {
        return invalid(format!("hankel1 supports orders 0 and 1, got {order}"));
    }
    if x.is_nan() {
        return invalid("hankel1 argument is NaN");
    }
    if x <= 0.0 {
        return Err(Error::SingularInput(format!("hankel1 requires x > 0, got {x}")));
    }
    if !x.is_finite() {
        return invalid("hankel1 argument is infinite");
    }
    Ok(hankel01(x)[order])
}

/// `(H_0^{(1)}(x), H_1^{(1)}(x))` for finite `x > 0`, no argument checks.
pub(crate) fn hankel01(x: f64) -> [Complex64; 2] {
    if x > ASYMPTOTIC_SWITCH {
        return [hankel_asymptotic(0, x), hankel_asymptotic(1, x)];
    }
    let j = bessel_j_seq(1, x);
    let (y0, y1) = bessel_y01(x).expect("positive finite argument");
    [Complex64::new(j[0], y0), Complex64::new(j[1], y1)]
}

fn hankel_asymptotic(order: usize, x: f64) -> Complex64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= Complex64::new(0.0, (mu - odd * odd) / (8.0 * kf * x));
        let mag = term.norm();
        if mag > last {
            break;
        }
        sum += term;
        last = mag;
        if mag < 1e-17 {
            break;
        }
    }
    let phase = x - order as f64 * PI / 2.0 - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() {
        return invalid(format!("Bessel argument must be finite, got {x}"));
    }
    if x < 0.0 {
        return invalid(format!("Bessel argument must be non-negative, got {x}"));
    }
    Ok(())
}

/// Green's function value and gradient in the first argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEval {
    pub k: f64,
    pub value: Complex64,
    pub gradient_x: [Complex64; 2],
}

/// `G^k(x, y) = (i/4) H_0^{(1)}(k|x − y|)` and `∇_x G^k(x, y)`.
pub fn green(k: f64, x: [f64; 2], y: [f64; 2]) -> Result<GreenEval> {
    if !(k > 0.0) || !k.is_finite() {
        return invalid(format!("frequency must be positive, got {k}"));
    }
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = d[0].hypot(d[1]);
    if r == 0.0 {
        return Err(Error::SingularInput("Green's function evaluated at x = y".into()));
    }
    let [h0, h1] = hankel01(k * r);
    let i4 = Complex64::new(0.0, 0.25);
    let g = -i4 * k * h1 / r;
    Ok(GreenEval {
        k,
        value: i4 * h0,
        gradient_x: [g * d[0], g * d[1]],
    })
}

/// Second derivatives `(∂xx, ∂xy, ∂yy)` of `G^k` at lag `d ≠ 0`.
pub(crate) fn green_hessian(k: f64, d: [f64; 2]) -> [Complex64; 3] {
    let r = d[0].hypot(d[1]);
    let [h0, h1] = hankel01(k * r);
    let i4 = Complex64::new(0.0, 0.25);
    // G' = -(ik/4) H1(kr), G'' = -(ik²/4) H1'(kr) with H1'(z) = H0(z) - H1(z)/z
    let g1 = -i4 * k * h1;
    let g2 = -i4 * k * k * (h0 - h1 / (k * r));
    let ux = d[0] / r;
    let uy = d[1] / r;
    let t = g1 / r;
    [
        g2 * ux * ux + t * (1.0 - ux * ux),
        (g2 - t) * ux * uy,
        g2 * uy * uy + t * (1.0 - uy * uy),
    ]
}
