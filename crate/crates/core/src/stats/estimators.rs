use serde::{Deserialize, Serialize};

use crate::closed_form::{cov_power, mean_power, BesselKernel};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sde::PathEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub se_mean: f64,
    pub se_second_moment: f64,
    /// Standard error of `variance`, from the fourth central moment.
    pub se_variance: f64,
}

fn check_index(e: &PathEnsemble, t_index: usize) -> Result<()> {
    if t_index >= e.n_times() {
        return Err(Error::Usage(format!(
            "time index {t_index} out of range for a grid of {} points",
            e.n_times()
        )));
    }
    Ok(())
}

fn require_paths(e: &PathEnsemble, min: usize) -> Result<()> {
    if e.n_paths() < min {
        return Err(Error::Degenerate(format!(
            "{} path(s); at least {min} are needed for standard errors",
            e.n_paths()
        )));
    }
    Ok(())
}

/// Sample moments of the values at one grid index.
pub fn ensemble_moments(e: &PathEnsemble, t_index: usize) -> Result<Moments> {
    check_index(e, t_index)?;
    require_paths(e, 2)?;
    let xs = e.column(t_index);
    Ok(sample_moments(&xs))
}

pub(crate) fn sample_moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let second_moment = xs.iter().map(|x| x * x).sum::<f64>() / n;
    // central moments from values shifted by the first entry, exact for constant samples
    let shifted: Vec<f64> = xs.iter().map(|x| x - xs[0]).collect();
    let shift_mean = shifted.iter().sum::<f64>() / n;
    let m2 = shifted.iter().map(|x| (x - shift_mean).powi(2)).sum::<f64>() / n;
    let m4 = shifted.iter().map(|x| (x - shift_mean).powi(4)).sum::<f64>() / n;
    let var_sq = xs.iter().map(|x| (x * x - second_moment).powi(2)).sum::<f64>() / (n - 1.0);
    let variance = m2 * n / (n - 1.0);
    Moments {
        mean,
        second_moment,
        variance,
        se_mean: (variance / n).sqrt(),
        se_second_moment: (var_sq / n).sqrt(),
        se_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementTransform {
    /// `M_t = X_t / E[X_t]` for the power-mean family.
    MPower,
    /// `N_t = √g(t) Y_t` for the explicit second-moment family.
    NSecondMoment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    /// Grid times bounding the first increment.
    pub first: (f64, f64),
    pub second: (f64, f64),
    pub rho: f64,
    /// `1/√n`.
    pub se: f64,
}

/// Path-wise weights `w(t)` such that `w(t) X_t` is the named martingale.
pub fn transform_weights(e: &PathEnsemble, transform: IncrementTransform) -> Result<Vec<f64>> {
    let ts = e.grid.times();
    match (transform, &e.model) {
        (IncrementTransform::MPower, ModelSpec::PowerMean(p)) => {
            ts.iter().map(|&t| Ok(1.0 / mean_power(t, p)?)).collect()
        }
        (IncrementTransform::NSecondMoment, ModelSpec::PowerSecondMoment(p)) if p.is_explicit() => {
            let k = BesselKernel::new(p.horizon)?;
            ts.iter().map(|&t| Ok(k.g(t)?.sqrt())).collect()
        }
        (t, m) => Err(Error::Usage(format!(
            "transform {t:?} does not apply to the {} family with these parameters",
            m.family()
        ))),
    }
}

/// Up to `max` grid indices spread evenly from the first to the last point.
pub fn checkpoint_indices(n_times: usize, max: usize) -> Vec<usize> {
    let c = max.min(n_times).max(1);
    if c == 1 {
        return vec![0];
    }
    let mut idx: Vec<usize> = (0..c)
        .map(|i| ((i as f64) * (n_times - 1) as f64 / (c - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

/// Correlations between increments of `weights[j] X_j` over the consecutive
/// intervals defined by `indices`, for every pair of distinct intervals.
pub fn increment_correlations(e: &PathEnsemble, weights: &[f64], indices: &[usize]) -> Result<Vec<CorrelationRecord>> {
    if weights.len() != e.n_times() {
        return Err(Error::Usage("one weight per grid point is required".into()));
    }
    if indices.len() < 3 || indices.windows(2).any(|w| w[1] <= w[0]) || *indices.last().unwrap() >= e.n_times() {
        return Err(Error::Usage(
            "need at least 3 strictly increasing grid indices to form disjoint increments".into(),
        ));
    }
    require_paths(e, 3)?;
    let n = e.n_paths();
    let ts = e.grid.times();
    let incs: Vec<Vec<f64>> = indices
        .windows(2)
        .map(|w| {
            (0..n)
                .map(|i| weights[w[1]] * e.value(i, w[1]) - weights[w[0]] * e.value(i, w[0]))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for a in 0..incs.len() {
        for b in a + 1..incs.len() {
            out.push(CorrelationRecord {
                first: (ts[indices[a]], ts[indices[a + 1]]),
                second: (ts[indices[b]], ts[indices[b + 1]]),
                rho: correlation(&incs[a], &incs[b]),
                se: 1.0 / (n as f64).sqrt(),
            });
        }
    }
    Ok(out)
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Pairwise correlations of disjoint increments of the independent-increment
/// transform, at up to 10 evenly spaced grid points.
pub fn increment_independence(e: &PathEnsemble, transform: IncrementTransform) -> Result<Vec<CorrelationRecord>> {
    let weights = transform_weights(e, transform)?;
    if e.n_times() < 3 {
        return Err(Error::Usage("increment checks need at least 3 grid points".into()));
    }
    increment_correlations(e, &weights, &checkpoint_indices(e.n_times(), 10))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinnedRow {
    pub eps: f64,
    /// Grid time used for `T - eps` (the nearest grid point).
    pub t_used: f64,
    pub fraction: f64,
    /// Binomial standard error.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedDiagnostic {
    pub delta: f64,
    pub rows: Vec<PinnedRow>,
    pub non_decreasing: bool,
    /// Least-squares slope of the fraction against `log10(T/eps)`.
    pub trend_slope: f64,
}

/// Fraction of paths with `|X_{T-eps}| <= delta` for each `eps` (absolute, decreasing).
pub fn pinned_diagnostic(e: &PathEnsemble, delta: f64, eps_list: &[f64]) -> Result<PinnedDiagnostic> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::domain("pinned_diagnostic", format!("delta = {delta} must be > 0")));
    }
    let horizon = e.grid.horizon();
    if eps_list.iter().any(|&x| !(x > 0.0 && x < horizon)) {
        return Err(Error::domain("pinned_diagnostic", "every eps must lie in (0, T)"));
    }
    let n = e.n_paths() as f64;
    let rows: Vec<PinnedRow> = eps_list
        .iter()
        .map(|&eps| {
            let j = e.grid.nearest_index(horizon - eps);
            let inside = (0..e.n_paths()).filter(|&i| e.value(i, j).abs() <= delta).count();
            let fraction = inside as f64 / n;
            PinnedRow {
                eps,
                t_used: e.grid.times()[j],
                fraction,
                se: (fraction * (1.0 - fraction) / n).sqrt(),
            }
        })
        .collect();
    let non_decreasing = rows.windows(2).all(|w| w[1].fraction >= w[0].fraction);
    let xs: Vec<f64> = rows.iter().map(|r| (horizon / r.eps).log10()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
    Ok(PinnedDiagnostic {
        delta,
        rows,
        non_decreasing,
        trend_slope: slope(&xs, &ys),
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRecord {
    pub pair: (f64, f64),
    pub sample_cov: f64,
    pub target_cov: f64,
    /// Delta-method standard error `√((m22 - ĉ²)/n)`.
    pub se: f64,
    pub z_score: f64,
}

/// Closed-form covariance of the ensemble's model, where one exists.
pub fn target_covariance(model: &ModelSpec, s: f64, t: f64) -> Result<f64> {
    match model {
        ModelSpec::PowerMean(p) => cov_power(s, t, p),
        ModelSpec::PowerSecondMoment(p) if p.is_explicit() => BesselKernel::new(p.horizon)?.covariance(s, t),
        ModelSpec::ReferenceBrownianBridge { horizon, .. } => Ok(s.min(t) * (horizon - s.max(t)) / horizon),
        m => Err(Error::Unsupported(format!(
            "no closed-form covariance for the {} family with these parameters",
            m.family()
        ))),
    }
}

/// Sample covariance and its delta-method standard error, from values shifted
/// by their first entry so constant columns give exactly zero.
pub(crate) fn sample_covariance(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xs: Vec<f64> = x.iter().map(|v| v - x[0]).collect();
    let ys: Vec<f64> = y.iter().map(|v| v - y[0]).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let products: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).collect();
    let c = products.iter().sum::<f64>() / (n - 1.0);
    let m22 = products.iter().map(|p| p * p).sum::<f64>() / n;
    let m11 = products.iter().sum::<f64>() / n;
    (c, ((m22 - m11 * m11).max(0.0) / n).sqrt())
}

pub(crate) fn z_score(stat: f64, target: f64, se: f64) -> f64 {
    let d = stat - target;
    if se > 0.0 {
        d / se
    } else if d == 0.0 {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

/// z-scores of sample covariances against the closed form at grid pairs `(s, t)`.
pub fn covariance_check(e: &PathEnsemble, pairs: &[(f64, f64)]) -> Result<Vec<CovarianceRecord>> {
    require_paths(e, 2)?;
    pairs
        .iter()
        .map(|&(s, t)| {
            let locate = |x: f64| {
                e.grid
                    .index_of(x)
                    .ok_or_else(|| Error::Usage(format!("time {x} is not a grid point")))
            };
            let (i, j) = (locate(s)?, locate(t)?);
            let target = target_covariance(&e.model, s, t)?;
            let (c, se) = sample_covariance(&e.column(i), &e.column(j));
            Ok(CovarianceRecord {
                pair: (s, t),
                sample_cov: c,
                target_cov: target,
                se,
                z_score: z_score(c, target, se),
            })
        })
        .collect()
}
