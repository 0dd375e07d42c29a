//! Gauss–Hermite quadrature for `E[φ(W_r)]`, `W_r ~ N(0, r)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use super::{PhiFn, Regime, SpecFunResult};
use crate::error::{Error, Result};

pub const DEFAULT_HERMITE_ORDER: usize = 64;

/// Nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix with
    /// off-diagonal `sqrt(j/2)`, weights `√π v₀²` from the first eigenvector components.
    fn compute(n: usize) -> Self {
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], PI.sqrt() * eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        // symmetrise to remove eigensolver round-off
        for i in 0..n / 2 {
            let x = 0.5 * (pairs[i].0 - pairs[n - 1 - i].0);
            let w = 0.5 * (pairs[i].1 + pairs[n - 1 - i].1);
            pairs[i] = (x, w);
            pairs[n - 1 - i] = (-x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let (nodes, weights) = pairs.into_iter().unzip();
        GaussHermiteRule { nodes, weights }
    }
}

/// Cached Gauss–Hermite rule of the given order.
pub fn gauss_hermite_rule(order: usize) -> Arc<GaussHermiteRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermiteRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&order) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(GaussHermiteRule::compute(order));
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(order)
        .or_insert(rule)
        .clone()
}

/// `E[φ(W_r)] = ∫ φ(y) (2πr)^{-1/2} e^{-y²/2r} dy` by `order`-point Gauss–Hermite.
///
/// At `r = 0` the law is a point mass and the result is `φ(0)`.
pub fn gaussian_expectation(phi: &PhiFn, r: f64, order: usize) -> Result<f64> {
    Ok(weighted_sum(phi, r, order)?.0)
}

/// Quadrature value and `E|φ(W_r)|` under the same rule.
fn weighted_sum(phi: &PhiFn, r: f64, order: usize) -> Result<(f64, f64)> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::domain("gaussian_expectation", format!("variance r = {r} must be finite and >= 0")));
    }
    if order < 2 {
        return Err(Error::domain("gaussian_expectation", format!("order {order} must be >= 2")));
    }
    if r == 0.0 {
        let v = phi.eval(0.0);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: phi.label(),
                node: 0.0,
            });
        }
        return Ok((v, v.abs()));
    }
    let rule = gauss_hermite_rule(order);
    let scale = (2.0 * r).sqrt();
    let mut acc = 0.0;
    let mut acc_abs = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let y = scale * x;
        let v = phi.eval(y);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: phi.label(),
                node: y,
            });
        }
        acc += w * v;
        acc_abs += w * v.abs();
    }
    Ok((acc / PI.sqrt(), acc_abs / PI.sqrt()))
}

/// As [`gaussian_expectation`], with an error estimate from comparing against
/// the rule of half the order plus a rounding allowance scaled by `E|φ|`.
pub fn gaussian_expectation_est(phi: &PhiFn, r: f64, order: usize) -> Result<SpecFunResult> {
    let (v, magnitude) = weighted_sum(phi, r, order)?;
    let coarse = gaussian_expectation(phi, r, (order / 2).max(2))?;
    let err = (v - coarse).abs() + 4.0 * f64::EPSILON * (order as f64).sqrt() * magnitude;
    Ok(SpecFunResult::new(v, err, Regime::Quadrature))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_normalised() {
        for &n in &[2usize, 5, 16, 64, 128, 300, 512] {
            let rule = gauss_hermite_rule(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s / PI.sqrt() - 1.0).abs() < 1e-13, "n={n}: {s}");
            assert!(rule.nodes.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn two_point_rule_is_exact() {
        let rule = gauss_hermite_rule(2);
        assert!((rule.nodes[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn polynomial_moments() {
        for &r in &[0.0, 0.3, 1.0, 7.5] {
            assert!((gaussian_expectation(&PhiFn::Square, r, 16).unwrap() - r).abs() < 1e-13 * (1.0 + r));
            assert!((gaussian_expectation(&PhiFn::Identity, r, 16).unwrap()).abs() < 1e-13);
        }
        let one = PhiFn::tabulated(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!((gaussian_expectation(&one, 2.0, 64).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn point_mass_at_zero_variance() {
        assert_eq!(gaussian_expectation(&PhiFn::Sigmoid, 0.0, 64).unwrap(), 0.5);
    }

    #[test]
    fn non_finite_phi_reports_node() {
        let bad = PhiFn::Tabulated {
            xs: vec![-1.0, 1.0],
            ys: vec![f64::NAN, 0.0],
        };
        match gaussian_expectation(&bad, 1.0, 8) {
            Err(Error::Evaluation { node, .. }) => assert!(node.is_finite()),
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_variance_and_tiny_order() {
        assert!(gaussian_expectation(&PhiFn::Square, -1.0, 8).is_err());
        assert!(gaussian_expectation(&PhiFn::Square, 1.0, 1).is_err());
    }
}
