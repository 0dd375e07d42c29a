//! Modified Bessel functions of orders 0 and 1.
//!
//! Regimes:
//! - `I_n`: power series for `z < 7.75`; Steed's continued fractions
//!   (`I1/I0` ratio plus the Wronskian against `K`) on `[7.75, 20]`;
//!   Hankel asymptotic expansion above 20.
//! - `K_n`: logarithmic power series for `z <= 2`; Steed/Temme continued
//!   fraction on `(2, 20]`; Hankel asymptotic expansion above 20.
//!
//! The `K` series suffers cancellation of order `e^{2z}`, so its window is
//! narrower than the `I` window.

use super::{Regime, SpecFunResult, EULER_GAMMA};
use crate::error::{Error, Result};
use std::f64::consts::PI;

const EPS: f64 = f64::EPSILON;
const I_SERIES_MAX: f64 = 7.75;
const K_SERIES_MAX: f64 = 2.0;
const ASYMPTOTIC_MIN: f64 = 20.0;
const MAX_ITER: usize = 10_000;

/// Modified Bessel function of the first kind, `I_order(z)`, for `order ∈ {0, 1}`.
pub fn bessel_i(order: u32, z: f64) -> Result<SpecFunResult> {
    if order > 1 {
        return Err(Error::domain("bessel_i", format!("order {order} not in {{0, 1}}")));
    }
    if !z.is_finite() || z < 0.0 {
        return Err(Error::domain("bessel_i", format!("argument z = {z} must be finite and >= 0")));
    }
    let res = if z < I_SERIES_MAX {
        let (i0, i1, e0, e1) = i_series(z);
        pick(order, (i0, e0), (i1, e1), Regime::Series)
    } else if z <= ASYMPTOTIC_MIN {
        let (k0, k1) = k_steed(z);
        let ratio = i_ratio_cf(z);
        let i0 = 1.0 / (z * (k1 + ratio * k0));
        let i1 = ratio * i0;
        pick(order, (i0, 16.0 * EPS * i0), (i1, 16.0 * EPS * i1), Regime::Recurrence)
    } else {
        let (v, e) = hankel_i(order, z);
        if !v.is_finite() {
            return Err(Error::Overflow { func: "bessel_i", arg: z });
        }
        SpecFunResult::new(v, e, Regime::Asymptotic)
    };
    if !res.value.is_finite() {
        return Err(Error::Overflow { func: "bessel_i", arg: z });
    }
    Ok(res)
}

/// Modified Bessel function of the second kind, `K_order(z)`, for `order ∈ {0, 1}`.
///
/// `K` diverges at the origin, so `z <= 0` is a domain error; callers that need
/// the `z → 0` behaviour must take the limit analytically.
pub fn bessel_k(order: u32, z: f64) -> Result<SpecFunResult> {
    if order > 1 {
        return Err(Error::domain("bessel_k", format!("order {order} not in {{0, 1}}")));
    }
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::domain("bessel_k", format!("argument z = {z} must be finite and > 0")));
    }
    let res = if z <= K_SERIES_MAX {
        let (k0, k1, e0, e1) = k_series(z);
        pick(order, (k0, e0), (k1, e1), Regime::Series)
    } else if z <= ASYMPTOTIC_MIN {
        let (k0, k1) = k_steed(z);
        pick(order, (k0, 16.0 * EPS * k0), (k1, 16.0 * EPS * k1), Regime::Recurrence)
    } else {
        let (v, e) = hankel_k(order, z);
        SpecFunResult::new(v, e, Regime::Asymptotic)
    };
    if !res.value.is_finite() {
        return Err(Error::Overflow { func: "bessel_k", arg: z });
    }
    Ok(res)
}

fn pick(order: u32, r0: (f64, f64), r1: (f64, f64), regime: Regime) -> SpecFunResult {
    let (v, e) = if order == 0 { r0 } else { r1 };
    SpecFunResult::new(v, e, regime)
}

/// `I0, I1` from their power series; all terms are positive so the sum is
/// accurate to a few ulps for every `z` in the window.
fn i_series(z: f64) -> (f64, f64, f64, f64) {
    let q = 0.25 * z * z;
    let mut t0 = 1.0;
    let mut t1 = 0.5 * z;
    let mut s0 = t0;
    let mut s1 = t1;
    let mut n = 0;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        s0 += t0;
        s1 += t1;
        n = k;
        if t0 <= EPS * s0 && t1 <= EPS * s1.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let nf = (n + 2) as f64;
    (s0, s1, nf * EPS * s0 + t0, nf * EPS * s1 + t1)
}

/// `K0, K1` from the logarithmic series (A&S 9.6.11 / 9.6.13).
fn k_series(z: f64) -> (f64, f64, f64, f64) {
    let (i0, i1, ei0, ei1) = i_series(z);
    let q = 0.25 * z * z;
    let lz = (0.5 * z).ln();

    // K0 = -(ln(z/2) + γ) I0 + Σ_{k≥1} H_k q^k / (k!)^2
    // K1 = 1/z + ln(z/2) I1 - (z/4) Σ_{k≥0} (ψ(k+1) + ψ(k+2)) q^k / (k! (k+1)!)
    let mut harmonic = 0.0;
    let mut term0 = 1.0; // q^k / (k!)^2
    let mut term1 = 1.0; // q^k / (k! (k+1)!)
    let mut sum0 = 0.0;
    let mut sum1 = (-EULER_GAMMA) + (1.0 - EULER_GAMMA); // k = 0
    let mut abs0 = 0.0;
    let mut abs1 = sum1.abs();
    for k in 1..MAX_ITER {
        let kf = k as f64;
        harmonic += 1.0 / kf;
        term0 *= q / (kf * kf);
        term1 *= q / (kf * (kf + 1.0));
        let psi_k1 = harmonic - EULER_GAMMA;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0);
        let a0 = harmonic * term0;
        let a1 = (psi_k1 + psi_k2) * term1;
        sum0 += a0;
        sum1 += a1;
        abs0 += a0.abs();
        abs1 += a1.abs();
        if a0.abs() <= EPS * sum0.abs() && a1.abs() <= EPS * sum1.abs() {
            break;
        }
    }
    let k0 = -(lz + EULER_GAMMA) * i0 + sum0;
    let k1 = 1.0 / z + lz * i1 - 0.25 * z * sum1;
    // Rounding in the partial sums is bounded by eps times the absolute sums.
    let e0 = 4.0 * EPS * ((lz + EULER_GAMMA).abs() * i0 + abs0) + (lz + EULER_GAMMA).abs() * ei0;
    let e1 = 4.0 * EPS * (1.0 / z + lz.abs() * i1 + 0.25 * z * abs1) + lz.abs() * ei1;
    (k0, k1, e0 + EPS * k0.abs(), e1 + EPS * k1.abs())
}

/// Steed's method (Temme's CF2) for `K0(z), K1(z)`, valid for `z >= 2`.
fn k_steed(z: f64) -> (f64, f64) {
    let a1 = 0.25; // 1/4 - ν² with ν = 0
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * z)).sqrt() * (-z).exp() / s;
    let k1 = k0 * (z + 0.5 - h) / z;
    (k0, k1)
}

/// `I1(z) / I0(z)` by the modified Lentz evaluation of
/// `1 / (2/z + 1 / (4/z + 1 / (6/z + ...)))`.
fn i_ratio_cf(z: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = tiny;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..MAX_ITER {
        let bj = 2.0 * j as f64 / z;
        d += bj;
        if d == 0.0 {
            d = tiny;
        }
        c = bj + 1.0 / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    f
}

/// Hankel expansion coefficients share the recurrence
/// `a_k = a_{k-1} (4ν² - (2k-1)²) / (8 k z)`.
fn hankel_series(order: u32, z: f64, alternate: bool) -> (f64, f64) {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut last = 1.0_f64;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let mut next = term * (mu - odd * odd) / (8.0 * kf * z);
        if alternate {
            next = -next;
        }
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        last = term;
        if term.abs() <= EPS * sum.abs() {
            break;
        }
    }
    (sum, last.abs() + 4.0 * EPS * sum.abs())
}

fn hankel_i(order: u32, z: f64) -> (f64, f64) {
    // I_ν(z) ~ e^z / √(2πz) Σ (-1)^k a_k(ν) / z^k; the K-type remainder is e^{-2z} smaller.
    let (s, e) = hankel_series(order, z, true);
    let half = (0.5 * z).exp();
    let pref = half / (2.0 * PI * z).sqrt();
    let v = pref * s * half;
    (v, (pref * e * half).abs())
}

fn hankel_k(order: u32, z: f64) -> (f64, f64) {
    let (s, e) = hankel_series(order, z, false);
    let pref = (PI / (2.0 * z)).sqrt() * (-z).exp();
    (pref * s, pref * e)
}
