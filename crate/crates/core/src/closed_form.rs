//! Exact evaluators for the explicit cases.
//!
//! Power-mean family (`X_0 = x > 0`):
//!
//! ```text
//! E[X_t]          = (a_α - α ln(T - t))^{-1/α},   a_α = x^{-α} + α ln T
//! Cov(X_s, X_t)   = E[X_s] E[X_t] ∫_0^s (a_α - α ln(T - u))^{2/α} du     (s <= t)
//! ```
//!
//! and the integral is a difference of lower incomplete gamma functions.
//!
//! Second-moment family with `α = 1`, `Y_0 = 0`, with `c = 2√2`, `a = c√T`,
//! `z = c√(T - t)`:
//!
//! ```text
//! g(t)   = I1(a) K0(z) + K1(a) I0(z)
//! g'(t)  = (√2 / √(T - t)) [I1(a) K1(z) - K1(a) I1(z)]
//! ⟨N⟩_t  = ∫_0^t g = √((T - t)/2) [I1(a) K1(z) - K1(a) I1(z)],   ⟨N⟩_T = I1(a)/4
//! v(t)   = ⟨N⟩_t / g(t) = ((T - t)/2) g'(t)/g(t)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{ModelSpec, PowerMeanParams};
use crate::ode::{MeanFieldCoefficients, OdeSettings};
use crate::specfun::{bessel_i, bessel_k, lower_inc_gamma, upper_inc_gamma};

const BESSEL_SCALE: f64 = 2.0 * std::f64::consts::SQRT_2;

fn check_time(func: &'static str, t: f64, horizon: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::domain(func, format!("time t = {t} must be finite and >= 0")));
    }
    if t >= horizon {
        return Err(Error::domain(func, format!("time t = {t} must be < T = {horizon}")));
    }
    Ok(())
}

/// `E[X_t] = (a_α - α ln(T - t))^{-1/α}`.
pub fn mean_power(t: f64, p: &PowerMeanParams) -> Result<f64> {
    check_time("mean_power", t, p.horizon)?;
    Ok(drift_coeff_power(t, p)?.powf(1.0 / p.alpha))
}

/// `β(t) = 1 / (a_α - α ln(T - t)) = E[X_t]^α`.
pub fn drift_coeff_power(t: f64, p: &PowerMeanParams) -> Result<f64> {
    check_time("drift_coeff_power", t, p.horizon)?;
    Ok(1.0 / (p.a_alpha() - p.alpha * (p.horizon - t).ln()))
}

/// `∫_{w0}^{w1} u^{b-1} e^{-u} du`, choosing the incomplete-gamma branch that avoids cancellation.
fn gamma_increment(b: f64, w0: f64, w1: f64) -> Result<f64> {
    if w1 <= w0 {
        return Ok(0.0);
    }
    if w0 >= b + 1.0 {
        Ok(upper_inc_gamma(b, w0)?.value - upper_inc_gamma(b, w1)?.value)
    } else {
        Ok(lower_inc_gamma(b, w1)?.value - lower_inc_gamma(b, w0)?.value)
    }
}

/// `∫_0^s (a_α - α ln(T - u))^{2/α} du` in incomplete-gamma form.
pub fn power_variance_integral(s: f64, p: &PowerMeanParams) -> Result<f64> {
    check_time("power_variance_integral", s, p.horizon)?;
    let a = p.alpha;
    let b = (a + 2.0) / a;
    let w0 = 1.0 / (a * p.x0.powf(a));
    let w1 = w0 - ((p.horizon - s) / p.horizon).ln();
    let v = p.horizon * a.powf(2.0 / a) * w0.exp() * gamma_increment(b, w0, w1)?;
    if !v.is_finite() {
        return Err(Error::domain(
            "power_variance_integral",
            format!("result not representable for alpha = {}, x0 = {}", p.alpha, p.x0),
        ));
    }
    Ok(v)
}

/// `Cov(X_s, X_t)`; arguments are symmetrised when `s > t`.
pub fn cov_power(s: f64, t: f64, p: &PowerMeanParams) -> Result<f64> {
    let (s, t) = if s > t { (t, s) } else { (s, t) };
    check_time("cov_power", s, p.horizon)?;
    check_time("cov_power", t, p.horizon)?;
    Ok(mean_power(s, p)? * mean_power(t, p)? * power_variance_integral(s, p)?)
}

/// Bessel constants of the explicit second-moment solution for a given horizon.
#[derive(Debug, Clone, Copy)]
pub struct BesselKernel {
    horizon: f64,
    i1_a: f64,
    k1_a: f64,
}

impl BesselKernel {
    pub fn new(horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain("BesselKernel", format!("horizon T = {horizon} must be > 0")));
        }
        let a = BESSEL_SCALE * horizon.sqrt();
        Ok(BesselKernel {
            horizon,
            i1_a: bessel_i(1, a)?.value,
            k1_a: bessel_k(1, a)?.value,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn z(&self, t: f64) -> f64 {
        BESSEL_SCALE * (self.horizon - t).sqrt()
    }

    /// `I1(a) K1(z) - K1(a) I1(z)`.
    fn wronskian_mix(&self, t: f64) -> Result<f64> {
        let z = self.z(t);
        Ok(self.i1_a * bessel_k(1, z)?.value - self.k1_a * bessel_i(1, z)?.value)
    }

    pub fn g(&self, t: f64) -> Result<f64> {
        check_time("g_fn", t, self.horizon)?;
        let z = self.z(t);
        Ok(self.i1_a * bessel_k(0, z)?.value + self.k1_a * bessel_i(0, z)?.value)
    }

    pub fn g_prime(&self, t: f64) -> Result<f64> {
        check_time("g_prime", t, self.horizon)?;
        Ok(std::f64::consts::SQRT_2 / (self.horizon - t).sqrt() * self.wronskian_mix(t)?)
    }

    pub fn bracket(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return Err(Error::domain("bracket_N", format!("time t = {t} must lie in [0, T]")));
        }
        if t == self.horizon {
            return Ok(self.bracket_limit());
        }
        Ok((0.5 * (self.horizon - t)).sqrt() * self.wronskian_mix(t)?)
    }

    /// `⟨N⟩_T = I1(2√(2T)) / 4`.
    pub fn bracket_limit(&self) -> f64 {
        0.25 * self.i1_a
    }

    pub fn variance(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return Err(Error::domain(
                "variance_second_moment",
                format!("time t = {t} must lie in [0, T]"),
            ));
        }
        if t == self.horizon {
            return Ok(0.0);
        }
        Ok(self.bracket(t)? / self.g(t)?)
    }

    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        let (s, t) = if s > t { (t, s) } else { (s, t) };
        check_time("cov_second_moment", s, self.horizon)?;
        check_time("cov_second_moment", t, self.horizon)?;
        let gs = self.g(s)?;
        let gt = self.g(t)?;
        Ok(0.5 * (self.horizon - s) * self.g_prime(s)? / (gs * gt).sqrt())
    }
}

/// `g(t) = I1(2√2√T) K0(2√2√(T-t)) + K1(2√2√T) I0(2√2√(T-t))`.
pub fn g_fn(t: f64, horizon: f64) -> Result<f64> {
    BesselKernel::new(horizon)?.g(t)
}

/// Derivative of [`g_fn`] in `t`, from `K0' = -K1`, `I0' = I1`.
pub fn g_prime(t: f64, horizon: f64) -> Result<f64> {
    BesselKernel::new(horizon)?.g_prime(t)
}

/// Variance `v(t)` of the explicit second-moment solution; `v(T) = 0`.
pub fn variance_second_moment(t: f64, horizon: f64) -> Result<f64> {
    BesselKernel::new(horizon)?.variance(t)
}

/// `Cov(Y_s, Y_t) = ((T - s)/2) g'(s) / √(g(s) g(t))`, symmetrised when `s > t`.
pub fn cov_second_moment(s: f64, t: f64, horizon: f64) -> Result<f64> {
    BesselKernel::new(horizon)?.covariance(s, t)
}

/// Quadratic variation `⟨N⟩_t = ∫_0^t g`; at `t = T` returns `I1(2√(2T))/4`.
pub fn bracket_n(t: f64, horizon: f64) -> Result<f64> {
    BesselKernel::new(horizon)?.bracket(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "second_moment")]
    SecondMoment,
    #[serde(rename = "g")]
    G,
    #[serde(rename = "g_prime")]
    GPrime,
    /// Integrating factor `exp(-∫_0^t μ(s)/(T - s) ds)`.
    #[serde(rename = "G")]
    IntegratingFactor,
    #[serde(rename = "drift_coeff")]
    DriftCoeff,
    #[serde(rename = "bracket")]
    Bracket,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Mean => "mean",
            Quantity::SecondMoment => "second_moment",
            Quantity::G => "g",
            Quantity::GPrime => "g_prime",
            Quantity::IntegratingFactor => "G",
            Quantity::DriftCoeff => "drift_coeff",
            Quantity::Bracket => "bracket",
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mean" => Quantity::Mean,
            "second_moment" | "second-moment" => Quantity::SecondMoment,
            "g" => Quantity::G,
            "g_prime" | "g-prime" => Quantity::GPrime,
            "G" => Quantity::IntegratingFactor,
            "drift_coeff" | "drift-coeff" => Quantity::DriftCoeff,
            "bracket" => Quantity::Bracket,
            _ => return Err(Error::Usage(format!("unknown quantity '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Ode,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::Ode => "ode",
            Provenance::MonteCarlo => "monte_carlo",
        }
    }
}

/// Samples of a deterministic function of time on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub quantity: Quantity,
    pub provenance: Provenance,
}

/// The family's natural quantity: the mean for mean-driven families, the
/// second moment for the others.
pub fn default_quantity(model: &ModelSpec) -> Quantity {
    match model {
        ModelSpec::PowerMean(_) | ModelSpec::ReferenceBrownianBridge { .. } => Quantity::Mean,
        _ => Quantity::SecondMoment,
    }
}

pub fn moment_curve(model: &ModelSpec, grid: &TimeGrid) -> Result<MomentCurve> {
    moment_curve_of(model, grid, default_quantity(model))
}

/// Samples `quantity` for `model` on `grid`, from closed forms where they exist
/// and from the moment ODE otherwise.
pub fn moment_curve_of(model: &ModelSpec, grid: &TimeGrid, quantity: Quantity) -> Result<MomentCurve> {
    model.validate()?;
    let horizon = model.horizon();
    if (grid.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(Error::domain(
            "moment_curve",
            format!("grid horizon {} differs from model horizon {horizon}", grid.horizon()),
        ));
    }
    let ts = grid.times();
    let unsupported = || {
        Err(Error::Unsupported(format!(
            "quantity '{}' is not defined for the {} family with these parameters",
            quantity.as_str(),
            model.family()
        )))
    };
    let (values, provenance) = match model {
        ModelSpec::PowerMean(p) => {
            let values = match quantity {
                Quantity::Mean => ts.iter().map(|&t| mean_power(t, p)).collect::<Result<Vec<_>>>()?,
                Quantity::DriftCoeff => ts.iter().map(|&t| drift_coeff_power(t, p)).collect::<Result<_>>()?,
                Quantity::SecondMoment => ts
                    .iter()
                    .map(|&t| Ok(mean_power(t, p)?.powi(2) + cov_power(t, t, p)?))
                    .collect::<Result<_>>()?,
                Quantity::IntegratingFactor => ts.iter().map(|&t| Ok(mean_power(t, p)? / p.x0)).collect::<Result<_>>()?,
                _ => return unsupported(),
            };
            (values, Provenance::ClosedForm)
        }
        ModelSpec::PowerSecondMoment(p) if p.is_explicit() => {
            let k = BesselKernel::new(p.horizon)?;
            let values = match quantity {
                Quantity::SecondMoment | Quantity::DriftCoeff => {
                    ts.iter().map(|&t| k.variance(t)).collect::<Result<_>>()?
                }
                Quantity::Mean => vec![0.0; ts.len()],
                Quantity::G => ts.iter().map(|&t| k.g(t)).collect::<Result<_>>()?,
                Quantity::GPrime => ts.iter().map(|&t| k.g_prime(t)).collect::<Result<_>>()?,
                Quantity::Bracket => ts.iter().map(|&t| k.bracket(t)).collect::<Result<_>>()?,
                Quantity::IntegratingFactor => {
                    let g0 = k.g(0.0)?;
                    ts.iter().map(|&t| Ok((g0 / k.g(t)?).sqrt())).collect::<Result<_>>()?
                }
            };
            (values, Provenance::ClosedForm)
        }
        ModelSpec::ReferenceBrownianBridge { x0, horizon } => {
            let values = match quantity {
                Quantity::Mean => ts.iter().map(|&t| x0 * (horizon - t) / horizon).collect(),
                Quantity::SecondMoment => ts
                    .iter()
                    .map(|&t| (x0 * (horizon - t) / horizon).powi(2) + t * (horizon - t) / horizon)
                    .collect(),
                Quantity::DriftCoeff => vec![1.0; ts.len()],
                Quantity::IntegratingFactor => ts.iter().map(|&t| (horizon - t) / horizon).collect(),
                _ => return unsupported(),
            };
            (values, Provenance::ClosedForm)
        }
        ModelSpec::PowerSecondMoment(_) | ModelSpec::General(_) => {
            if matches!(quantity, Quantity::G | Quantity::GPrime | Quantity::Bracket) {
                return unsupported();
            }
            let coeffs = MeanFieldCoefficients::build(model, ts, grid.truncation_eps(), &OdeSettings::default())?;
            let x_start = model.initial_value();
            let values = ts
                .iter()
                .map(|&t| match quantity {
                    Quantity::SecondMoment => coeffs.second_moment(t),
                    Quantity::DriftCoeff => coeffs.drift(t),
                    Quantity::IntegratingFactor => coeffs.integrating_factor(t),
                    Quantity::Mean => Ok(x_start * coeffs.integrating_factor(t)?),
                    _ => unreachable!("filtered above"),
                })
                .collect::<Result<Vec<_>>>()?;
            (values, Provenance::Ode)
        }
    };
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::domain(
            "moment_curve",
            format!("non-finite value {v} at t = {}", ts[i]),
        ));
    }
    Ok(MomentCurve {
        grid: grid.clone(),
        values,
        quantity,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> PowerMeanParams {
        PowerMeanParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn mean_starts_at_x0() {
        for &(a, x, t) in &[(1.0, 1.0, 1.0), (0.5, 2.0, 3.0), (2.5, 0.3, 0.7)] {
            let p = PowerMeanParams::new(a, x, t).unwrap();
            assert!((mean_power(0.0, &p).unwrap() - x).abs() < 1e-14 * x);
            assert!((drift_coeff_power(0.0, &p).unwrap() - x.powf(a)).abs() < 1e-13 * x.powf(a));
        }
    }

    #[test]
    fn mean_rejects_horizon_and_negative_time() {
        assert!(mean_power(1.0, &unit()).is_err());
        assert!(mean_power(-0.1, &unit()).is_err());
        assert!(cov_power(0.1, 1.0, &unit()).is_err());
    }

    #[test]
    fn drift_equals_mean_for_unit_alpha() {
        for &t in &[0.0, 0.3, 0.9, 0.999] {
            assert_eq!(drift_coeff_power(t, &unit()).unwrap(), mean_power(t, &unit()).unwrap());
        }
    }

    #[test]
    fn covariance_vanishes_at_origin_and_is_symmetric() {
        assert_eq!(cov_power(0.0, 0.7, &unit()).unwrap(), 0.0);
        let a = cov_power(0.2, 0.6, &unit()).unwrap();
        let b = cov_power(0.6, 0.2, &unit()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bessel_kernel_endpoints() {
        let k = BesselKernel::new(1.0).unwrap();
        assert_eq!(k.variance(0.0).unwrap(), 0.0);
        assert_eq!(k.variance(1.0).unwrap(), 0.0);
        assert_eq!(k.bracket(0.0).unwrap(), 0.0);
        assert_eq!(k.bracket(1.0).unwrap(), k.bracket_limit());
        assert!(k.g(1.0).is_err());
        assert!(k.variance(1.5).is_err());
        assert_eq!(k.covariance(0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn moment_curve_power_mean_at_origin() {
        let grid = TimeGrid::new(vec![0.0], 1.0, 1e-6).unwrap();
        let c = moment_curve(&ModelSpec::PowerMean(PowerMeanParams::new(1.5, 0.8, 1.0).unwrap()), &grid).unwrap();
        assert_eq!(c.provenance, Provenance::ClosedForm);
        assert!((c.values[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn moment_curve_rejects_unsupported_quantity() {
        let grid = TimeGrid::uniform(1.0, 4, 1e-3).unwrap();
        let m = ModelSpec::PowerMean(unit());
        assert!(matches!(moment_curve_of(&m, &grid, Quantity::Bracket), Err(Error::Unsupported(_))));
        let wrong = TimeGrid::uniform(2.0, 4, 1e-3).unwrap();
        assert!(moment_curve(&m, &wrong).is_err());
    }
}
