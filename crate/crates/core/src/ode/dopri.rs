//! Dormand–Prince 5(4) for a scalar equation on `[0, T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Fraction of the remaining distance to the horizon a single step may cover.
pub const HORIZON_STEP_FRACTION: f64 = 0.1;
const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
}

pub(crate) struct Trajectory {
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub stats: StepStats,
}

/// Integrates `y' = rhs(t, y)` from `(0, y0)` and records `y` and `y'` at every
/// point of `stops` (strictly increasing, all in `[0, horizon)`).
///
/// Each step is clamped to `0.1 (T - t)` and never crosses a stop. When
/// `y0 == 0` the first step is an explicit Euler step of length `tol`.
/// Values falling below `-tol` are a fault; smaller undershoots are clamped to 0.
pub(crate) fn integrate<F>(mut rhs: F, y0: f64, horizon: f64, stops: &[f64], tol: f64) -> Result<Trajectory>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    debug_assert!(stops.windows(2).all(|w| w[0] < w[1]));
    let mut stats = StepStats {
        accepted: 0,
        rejected: 0,
        min_step: f64::INFINITY,
    };
    let mut values = Vec::with_capacity(stops.len());
    let mut slopes = Vec::with_capacity(stops.len());
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = rhs(t, y)?;
    let h_floor = 1e-13 * horizon;

    let mut micro_step = y0 == 0.0;
    let mut h = (1e-3 * horizon).min(HORIZON_STEP_FRACTION * horizon);

    for &stop in stops {
        while t < stop {
            let remaining = stop - t;
            if micro_step && remaining > tol {
                micro_step = false;
                y = tol * k1;
                t = tol;
                k1 = rhs(t, y)?;
                stats.accepted += 1;
                stats.min_step = tol;
                continue;
            }
            let cap = HORIZON_STEP_FRACTION * (horizon - t);
            let mut step = h.min(cap);
            let lands = step >= remaining * (1.0 - 1e-12);
            if lands {
                step = remaining;
            }
            if step < h_floor && !lands {
                return Err(Error::Convergence {
                    t,
                    h: step,
                    accepted: stats.accepted,
                    rejected: stats.rejected,
                });
            }
            if stats.accepted + stats.rejected > MAX_STEPS {
                return Err(Error::Convergence {
                    t,
                    h: step,
                    accepted: stats.accepted,
                    rejected: stats.rejected,
                });
            }
            let k2 = rhs(t + C2 * step, y + step * A21 * k1)?;
            let k3 = rhs(t + C3 * step, y + step * (A31 * k1 + A32 * k2))?;
            let k4 = rhs(t + C4 * step, y + step * (A41 * k1 + A42 * k2 + A43 * k3))?;
            let k5 = rhs(
                t + C5 * step,
                y + step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
            )?;
            let t_new = if lands { stop } else { t + step };
            let k6 = rhs(
                t_new,
                y + step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
            )?;
            let y_new = y + step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let k7 = rhs(t_new, y_new)?;
            let err_abs = (step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
            let scale = tol + tol * y.abs().max(y_new.abs());
            let err = err_abs / scale;
            if !err.is_finite() {
                return Err(Error::SolverFault {
                    t,
                    detail: format!("non-finite error estimate with step {step:e}"),
                });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                stats.accepted += 1;
                stats.min_step = stats.min_step.min(step);
                if y_new < -tol {
                    return Err(Error::SolverFault {
                        t: t_new,
                        detail: format!("solution became negative ({y_new:e})"),
                    });
                }
                t = t_new;
                if y_new < 0.0 {
                    y = 0.0;
                    k1 = rhs(t, y)?;
                } else {
                    y = y_new;
                    k1 = k7;
                }
                // keep the pre-landing step size so short hops to a stop do not shrink h
                if !lands || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor;
            }
        }
        values.push(y);
        slopes.push(k1);
    }
    if !stats.min_step.is_finite() {
        stats.min_step = 0.0;
    }
    Ok(Trajectory { values, slopes, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let stops = [0.0, 0.5, 1.0, 1.5];
        let tr = integrate(|_, y| Ok(-y), 1.0, 2.0, &stops, 1e-12).unwrap();
        for (t, y) in stops.iter().zip(&tr.values) {
            assert!((y - (-t).exp()).abs() < 1e-10, "t={t}: {y}");
        }
    }

    #[test]
    fn zero_start_uses_micro_step() {
        let tr = integrate(|_, _| Ok(1.0), 0.0, 1.0, &[0.0, 0.5], 1e-10).unwrap();
        assert_eq!(tr.values[0], 0.0);
        assert!((tr.values[1] - 0.5).abs() < 1e-14);
        assert_eq!(tr.stats.min_step.min(1e-10), 1e-10);
    }

    #[test]
    fn steps_respect_horizon_clamp() {
        let tr = integrate(|_, _| Ok(0.0), 1.0, 1.0, &[1.0 - 1e-4], 1e-8).unwrap();
        // each step covers at most a tenth of the remaining distance
        assert!(tr.stats.accepted as f64 >= (1e4f64).ln() / (1.0f64 / 0.9).ln() - 1.0);
    }

    #[test]
    fn negative_excursion_is_a_fault() {
        let r = integrate(|_, _| Ok(-1.0), 0.5, 1.0, &[0.9], 1e-8);
        assert!(matches!(r, Err(Error::SolverFault { .. })));
    }
}
