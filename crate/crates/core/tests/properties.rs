#![allow(clippy::excessive_precision)]

mod common;

use common::{cholesky_ok, log_points, rel_err};
use mvbridge_core::closed_form::{
    bracket_n, cov_power, cov_second_moment, g_fn, g_prime, mean_power, variance_second_moment, BesselKernel,
};
use mvbridge_core::specfun::{
    bessel_i, bessel_k, gamma, gaussian_expectation, gaussian_expectation_est, lower_inc_gamma, upper_inc_gamma, PhiFn,
};
use mvbridge_core::PowerMeanParams;
use proptest::prelude::*;

/// Frozen from the small-z expansion `z K1(z) - 1 ~ (z²/2)(ln(z/2) + γ - 1/2)`.
const SMALL_Z_K1_CONSTANT: f64 = 0.6;

#[test]
fn bessel_wronskian() {
    for z in log_points(1e-6, 50.0, 100) {
        let w = bessel_i(0, z).unwrap().value * bessel_k(1, z).unwrap().value
            + bessel_i(1, z).unwrap().value * bessel_k(0, z).unwrap().value;
        assert!(rel_err(w, 1.0 / z) <= 1e-10, "z = {z}: {w} vs {}", 1.0 / z);
    }
}

#[test]
fn k1_small_argument() {
    for z in log_points(1e-6, 1e-3, 40) {
        let d = (z * bessel_k(1, z).unwrap().value - 1.0).abs();
        let bound = SMALL_Z_K1_CONSTANT * z * z * z.ln().abs();
        assert!(d <= bound, "z = {z}: |zK1 - 1| = {d:e} > {bound:e}");
    }
}

#[test]
fn gamma_complementarity_grid() {
    for &b in &[0.1, 0.5, 1.0, 2.5, 7.0, 20.0] {
        for &x in &[1e-3, 0.1, 1.0, 3.0, 10.0, 40.0] {
            let s = lower_inc_gamma(b, x).unwrap().value + upper_inc_gamma(b, x).unwrap().value;
            assert!(rel_err(s, gamma(b)) <= 1e-12, "b = {b}, x = {x}: {s} vs {}", gamma(b));
        }
    }
}

#[test]
fn hermite_order_doubling_within_estimate() {
    for phi in PhiFn::catalog() {
        for &r in &[0.05, 0.5, 2.0, 8.0] {
            let est = gaussian_expectation_est(&phi, r, 64).unwrap();
            let fine = gaussian_expectation(&phi, r, 128).unwrap();
            assert!(
                (fine - est.value).abs() < est.est_abs_error,
                "{} r = {r}: change {:e} vs estimate {:e}",
                phi.label(),
                (fine - est.value).abs(),
                est.est_abs_error
            );
        }
    }
}

#[test]
fn variance_matches_g_ratio() {
    for &horizon in &[0.5, 1.0, 3.0] {
        assert_eq!(variance_second_moment(0.0, horizon).unwrap(), 0.0);
        for k in 1..50 {
            let t = horizon * k as f64 / 50.0;
            let g = g_fn(t, horizon).unwrap();
            let via_g = 0.5 * (horizon - t) * g_prime(t, horizon).unwrap() / g;
            assert!(rel_err(variance_second_moment(t, horizon).unwrap(), via_g) <= 1e-9, "T = {horizon}, t = {t}");
        }
    }
}

#[test]
fn g_prime_matches_finite_difference() {
    let horizon = 1.0;
    for &t in &[0.05, 0.3, 0.6, 0.9] {
        let h = 1e-4;
        let fd = (g_fn(t - 2.0 * h, horizon).unwrap() - 8.0 * g_fn(t - h, horizon).unwrap()
            + 8.0 * g_fn(t + h, horizon).unwrap()
            - g_fn(t + 2.0 * h, horizon).unwrap())
            / (12.0 * h);
        assert!(rel_err(g_prime(t, horizon).unwrap(), fd) <= 1e-8, "t = {t}");
    }
}

#[test]
fn variance_solves_riccati_equation() {
    let horizon = 1.0;
    let v = |t: f64| variance_second_moment(t, horizon).unwrap();
    for k in 0..200 {
        let t = (horizon - 1e-4) * k as f64 / 199.0;
        let h = (0.002 * (horizon - t)).min(1e-3);
        let dv = if t < 2.0 * h {
            (-25.0 * v(t) + 48.0 * v(t + h) - 36.0 * v(t + 2.0 * h) + 16.0 * v(t + 3.0 * h) - 3.0 * v(t + 4.0 * h))
                / (12.0 * h)
        } else {
            (v(t - 2.0 * h) - 8.0 * v(t - h) + 8.0 * v(t + h) - v(t + 2.0 * h)) / (12.0 * h)
        };
        let residual = dv + 2.0 * v(t).powi(2) / (horizon - t) - 1.0;
        assert!(residual.abs() <= 1e-7, "t = {t}: residual {residual:e}");
    }
}

#[test]
fn variance_and_bracket_endpoints() {
    let k = BesselKernel::new(1.0).unwrap();
    assert_eq!(variance_second_moment(1.0, 1.0).unwrap(), 0.0);
    assert_eq!(bracket_n(1.0, 1.0).unwrap(), k.bracket_limit());
    assert_eq!(bracket_n(0.0, 1.0).unwrap(), 0.0);
    let tail: Vec<f64> = [1e-3, 1e-6, 1e-9].iter().map(|e| variance_second_moment(1.0 - e, 1.0).unwrap()).collect();
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{tail:?}");
    // logarithmic decay, value from 40-digit arithmetic
    assert!(rel_err(tail[2], 0.026448241826231966825) <= 1e-8, "{}", tail[2]);
}

fn sorted_times(raw: Vec<f64>, horizon: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = raw.into_iter().map(|u| u * horizon).collect();
    ts.sort_by(f64::total_cmp);
    ts
}

fn psd(ts: &[f64], cov: impl Fn(f64, f64) -> f64) -> bool {
    let a: Vec<Vec<f64>> = ts.iter().map(|&s| ts.iter().map(|&t| cov(s, t)).collect()).collect();
    let sym = (0..ts.len()).all(|i| (0..i).all(|j| a[i][j] == a[j][i]));
    let trace: f64 = (0..ts.len()).map(|i| a[i][i]).sum();
    sym && cholesky_ok(&a, 1e-10 * trace.max(f64::MIN_POSITIVE))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complementarity_random(b in 0.05f64..30.0, x in 1e-4f64..60.0) {
        let s = lower_inc_gamma(b, x).unwrap().value + upper_inc_gamma(b, x).unwrap().value;
        prop_assert!(rel_err(s, gamma(b)) <= 1e-12);
    }

    #[test]
    fn power_covariance_is_psd(
        alpha in 0.1f64..3.0,
        x0 in 0.01f64..3.0,
        horizon in 0.2f64..4.0,
        raw in prop::collection::vec(0.0f64..0.999, 2..64),
    ) {
        let p = PowerMeanParams::new(alpha, x0, horizon).unwrap();
        let ts = sorted_times(raw, horizon);
        prop_assert!(psd(&ts, |s, t| cov_power(s, t, &p).unwrap()));
    }

    #[test]
    fn second_moment_covariance_is_psd(
        horizon in 0.2f64..4.0,
        raw in prop::collection::vec(0.0f64..0.999, 2..64),
    ) {
        let ts = sorted_times(raw, horizon);
        prop_assert!(psd(&ts, |s, t| cov_second_moment(s, t, horizon).unwrap()));
    }

    #[test]
    fn mean_power_positive_and_decreasing(
        alpha in 0.1f64..3.0,
        x0 in 0.01f64..5.0,
        horizon in 0.2f64..4.0,
        u in 0.0f64..0.99,
        gap in 1e-3f64..0.5,
    ) {
        let p = PowerMeanParams::new(alpha, x0, horizon).unwrap();
        let s = u * horizon;
        let t = (s + gap * (horizon - s)).min(horizon * (1.0 - 1e-9));
        let (ms, mt) = (mean_power(s, &p).unwrap(), mean_power(t, &p).unwrap());
        prop_assert!(mt > 0.0 && mt < ms, "m({s}) = {ms}, m({t}) = {mt}");
    }

    #[test]
    fn second_moment_covariance_factorises(horizon in 0.2f64..4.0, a in 0.0f64..0.999, b in 0.0f64..0.999) {
        let (s, t) = if a <= b { (a * horizon, b * horizon) } else { (b * horizon, a * horizon) };
        let k = BesselKernel::new(horizon).unwrap();
        let want = k.variance(s).unwrap() * (k.g(s).unwrap() / k.g(t).unwrap()).sqrt();
        prop_assert!(rel_err(k.covariance(s, t).unwrap(), want) <= 1e-10);
    }

    #[test]
    fn bracket_non_decreasing_and_bounded(horizon in 0.2f64..4.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let k = BesselKernel::new(horizon).unwrap();
        let (s, t) = if a <= b { (a * horizon, b * horizon) } else { (b * horizon, a * horizon) };
        let (bs, bt) = (k.bracket(s).unwrap(), k.bracket(t).unwrap());
        let limit = k.bracket_limit();
        prop_assert!(bs <= bt * (1.0 + 1e-12) && bt <= limit * (1.0 + 1e-12), "{bs} {bt} {limit}");
    }
}

#[test]
fn mean_power_vanishes_at_horizon() {
    // E[X_t]^{-α} grows like α ln(1/(T - t)), so the mean tends to 0
    let alpha = 1.5;
    let p = PowerMeanParams::new(alpha, 2.0, 1.0).unwrap();
    let inv = |eps: f64| mean_power(1.0 - eps, &p).unwrap().powf(-alpha);
    let slope = (inv(1e-8) - inv(1e-4)) / 1e4f64.ln();
    assert!(rel_err(slope, alpha) <= 1e-6, "slope {slope}");
    let tail: Vec<f64> = [1e-2, 1e-4, 1e-8].iter().map(|e| mean_power(1.0 - e, &p).unwrap()).collect();
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{tail:?}");
}
