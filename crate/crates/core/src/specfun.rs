//! Cylinder functions of order 0 and 1 for positive real arguments.
//!
//! Three regimes share one entry point, [`cylinder01`]:
//!
//! * `x <= 2`: ascending power series (no cancellation worth mentioning).
//! * `2 < x <= 25`: Miller backward recurrence for `J_n`, normalized by
//!   `J_0 + 2 sum J_2k = 1`, and the Neumann series for `Y_0`, `Y_1`.
//! * `x > 25`: Hankel asymptotic expansion with the phase built from
//!   `sin x` and `cos x` so large arguments keep their accuracy.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_MAX: f64 = 2.0;
const MILLER_MAX: f64 = 25.0;

/// `J_0, J_1, Y_0, Y_1` evaluated together at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder01 {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Cylinder01 {
    pub fn h0(&self) -> Complex64 {
        Complex64::new(self.j0, self.y0)
    }

    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j1, self.y1)
    }
}

/// All four functions at `x > 0`. No argument checking; callers that take
/// user input go through [`bessel_j`], [`bessel_y`] or [`hankel1`].
pub fn cylinder01(x: f64) -> Cylinder01 {
    if x <= SERIES_MAX {
        small_series(x)
    } else if x <= MILLER_MAX {
        miller(x)
    } else {
        asymptotic(x)
    }
}

fn check_order(order: u32) -> Result<()> {
    if order > 1 {
        return Err(Error::Domain(format!("only orders 0 and 1 are supported, got {order}")));
    }
    Ok(())
}

/// Bessel function of the first kind, `J_0` or `J_1`, for `x >= 0`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    check_order(order)?;
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("bessel_j needs finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    let c = cylinder01(x);
    Ok(if order == 0 { c.j0 } else { c.j1 })
}

/// Bessel function of the second kind, `Y_0` or `Y_1`, for `x > 0`.
pub fn bessel_y(order: u32, x: f64) -> Result<f64> {
    check_order(order)?;
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("bessel_y needs finite x > 0, got {x}")));
    }
    let c = cylinder01(x);
    Ok(if order == 0 { c.y0 } else { c.y1 })
}

/// Hankel function of the first kind, `H_n^(1) = J_n + i Y_n`.
pub fn hankel1(order: u32, x: f64) -> Result<Complex64> {
    check_order(order)?;
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("hankel1 needs finite x > 0, got {x}")));
    }
    let c = cylinder01(x);
    Ok(if order == 0 { c.h0() } else { c.h1() })
}

fn small_series(x: f64) -> Cylinder01 {
    let q = 0.25 * x * x;
    let half = 0.5 * x;
    let lg = (half).ln() + EULER_GAMMA;

    // term_m = (-q)^m / (m!)^2 for J0, and half * (-q)^m / (m! (m+1)!) for J1.
    let mut t0 = 1.0;
    let mut t1 = half;
    let mut j0 = t0;
    let mut j1 = t1;
    let mut harmonic = 0.0;
    // Y0 tail: sum_{m>=1} (-1)^{m+1} H_m q^m / (m!)^2 = -sum H_m t0_m.
    let mut y0_tail = 0.0;
    // Y1 tail: sum_{m>=0} (psi(m+1) + psi(m+2)) t1_m with psi(m+1) = H_m - C.
    let mut y1_tail = (1.0 - 2.0 * EULER_GAMMA) * t1;
    for m in 1..40 {
        let mf = m as f64;
        t0 *= -q / (mf * mf);
        t1 *= -q / (mf * (mf + 1.0));
        harmonic += 1.0 / mf;
        j0 += t0;
        j1 += t1;
        y0_tail -= harmonic * t0;
        y1_tail += (2.0 * harmonic + 1.0 / (mf + 1.0) - 2.0 * EULER_GAMMA) * t1;
        if t0.abs() < 1e-18 * j0.abs().max(1e-300) && t1.abs() < 1e-18 * j1.abs() {
            break;
        }
    }
    let two_pi = 2.0 / std::f64::consts::PI;
    let y0 = two_pi * (lg * j0 + y0_tail);
    let y1 = two_pi * (half.ln() * j1) - two_pi / x - y1_tail / std::f64::consts::PI;
    Cylinder01 { j0, j1, y0, y1 }
}

fn miller(x: f64) -> Cylinder01 {
    let top = 2 * ((x as usize + 46) / 2);
    let mut j = vec![0.0f64; top + 2];
    j[top] = 1e-30;
    for k in (1..=top).rev() {
        j[k - 1] = (2.0 * k as f64 / x) * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e200 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-200;
            }
        }
    }
    let mut norm = j[0];
    for k in (2..=top).step_by(2) {
        norm += 2.0 * j[k];
    }
    for v in j.iter_mut() {
        *v /= norm;
    }

    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut sign = -1.0;
    let mut k = 1;
    while 2 * k < top {
        let kf = k as f64;
        s0 += sign * j[2 * k] / kf;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / kf;
        sign = -sign;
        k += 1;
    }
    let two_pi = 2.0 / std::f64::consts::PI;
    let y0 = two_pi * lg * j[0] - 2.0 * two_pi * s0;
    let y1 = two_pi * lg * j[1] - two_pi * j[0] / x + two_pi * s1;
    Cylinder01 {
        j0: j[0],
        j1: j[1],
        y0,
        y1,
    }
}

/// Returns `(P, Q)` of the Hankel expansion for order `n`.
fn hankel_pq(n: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (n * n) as f64;
    let inv8x = 1.0 / (8.0 * x);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8x / k as f64;
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // a_k enters Q for odd k and P for even k, with alternating signs.
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    (p, q)
}

fn asymptotic(x: f64) -> Cylinder01 {
    let (s, c) = x.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amp = (2.0 / (std::f64::consts::PI * x)).sqrt();
    // chi_0 = x - pi/4, chi_1 = x - 3 pi/4.
    let (cos0, sin0) = ((c + s) * r, (s - c) * r);
    let (cos1, sin1) = ((s - c) * r, -(s + c) * r);
    let (p0, q0) = hankel_pq(0, x);
    let (p1, q1) = hankel_pq(1, x);
    Cylinder01 {
        j0: amp * (p0 * cos0 - q0 * sin0),
        y0: amp * (p0 * sin0 + q0 * cos0),
        j1: amp * (p1 * cos1 - q1 * sin1),
        y1: amp * (p1 * sin1 + q1 * cos1),
    }
}
