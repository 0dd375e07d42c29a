//! Model families and their parameter records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::phi::parse_numbers;
use crate::specfun::PhiFn;

fn check_horizon(func: &'static str, horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(func, format!("horizon T = {horizon} must be finite and > 0")));
    }
    Ok(())
}

/// Drift `-(E[X_t])^α X_t / (T - t)`, unit noise, `X_0 = x0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMeanParams {
    pub alpha: f64,
    pub x0: f64,
    pub horizon: f64,
}

impl PowerMeanParams {
    pub fn new(alpha: f64, x0: f64, horizon: f64) -> Result<Self> {
        let p = PowerMeanParams { alpha, x0, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::domain("PowerMeanParams", format!("alpha = {} must be > 0", self.alpha)));
        }
        if !(self.x0.is_finite() && self.x0 > 0.0) {
            return Err(Error::domain("PowerMeanParams", format!("x0 = {} must be > 0", self.x0)));
        }
        check_horizon("PowerMeanParams", self.horizon)?;
        if !self.a_alpha().is_finite() {
            return Err(Error::domain("PowerMeanParams", "a_alpha = x0^-alpha + alpha ln T is not finite"));
        }
        Ok(())
    }

    /// `a_α = x0^{-α} + α ln T`.
    pub fn a_alpha(&self) -> f64 {
        self.x0.powf(-self.alpha) + self.alpha * self.horizon.ln()
    }
}

/// Drift `-(E[Y_t²])^α Y_t / (T - t)`, unit noise, initial second moment `x0 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentParams {
    pub alpha: f64,
    pub x0: f64,
    pub horizon: f64,
}

impl SecondMomentParams {
    pub fn new(alpha: f64, x0: f64, horizon: f64) -> Result<Self> {
        let p = SecondMomentParams { alpha, x0, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::domain("SecondMomentParams", format!("alpha = {} must be > 0", self.alpha)));
        }
        if !(self.x0.is_finite() && self.x0 >= 0.0) {
            return Err(Error::domain("SecondMomentParams", format!("x0 = {} must be >= 0", self.x0)));
        }
        check_horizon("SecondMomentParams", self.horizon)
    }

    /// The case with a Bessel-function closed form.
    pub fn is_explicit(&self) -> bool {
        self.alpha == 1.0 && self.x0 == 0.0
    }
}

/// Coefficient `c(t, m)` of time and an expectation value `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoeffFn {
    /// `base + slope m + time_slope t`
    Affine {
        base: f64,
        slope: f64,
        #[serde(default)]
        time_slope: f64,
    },
    /// `scale |m|^exponent`
    Power { scale: f64, exponent: f64 },
}

impl CoeffFn {
    pub fn constant(c: f64) -> Self {
        CoeffFn::Affine {
            base: c,
            slope: 0.0,
            time_slope: 0.0,
        }
    }

    pub fn identity() -> Self {
        CoeffFn::Affine {
            base: 0.0,
            slope: 1.0,
            time_slope: 0.0,
        }
    }

    pub fn eval(&self, t: f64, m: f64) -> f64 {
        match *self {
            CoeffFn::Affine {
                base,
                slope,
                time_slope,
            } => base + slope * m + time_slope * t,
            CoeffFn::Power { scale, exponent } => scale * m.abs().powf(exponent),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            CoeffFn::Affine {
                base,
                slope,
                time_slope,
            } => format!("affine:{base},{slope},{time_slope}"),
            CoeffFn::Power { scale, exponent } => format!("power:{scale},{exponent}"),
        }
    }
}

impl std::str::FromStr for CoeffFn {
    type Err = Error;

    /// Parses `const:c`, `identity`, `affine:a,b[,c]`, `power:c,p`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = if args.is_empty() { Vec::new() } else { parse_numbers(args)? };
        match (head.trim(), nums.as_slice()) {
            ("identity", []) => Ok(CoeffFn::identity()),
            ("const", [c]) => Ok(CoeffFn::constant(*c)),
            ("affine", [a, b]) => Ok(CoeffFn::Affine {
                base: *a,
                slope: *b,
                time_slope: 0.0,
            }),
            ("affine", [a, b, c]) => Ok(CoeffFn::Affine {
                base: *a,
                slope: *b,
                time_slope: *c,
            }),
            ("power", [c, p]) => Ok(CoeffFn::Power {
                scale: *c,
                exponent: *p,
            }),
            _ => Err(Error::Usage(format!("unknown coefficient descriptor '{s}'"))),
        }
    }
}

/// Bound `h(t)` on `σ²`; must be integrable on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvelopeFn {
    Constant { value: f64 },
    /// `base + slope t`
    Affine { base: f64, slope: f64 },
}

impl EnvelopeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            EnvelopeFn::Constant { value } => value,
            EnvelopeFn::Affine { base, slope } => base + slope * t,
        }
    }

    /// `∫_0^t h`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            EnvelopeFn::Constant { value } => value * t,
            EnvelopeFn::Affine { base, slope } => base * t + 0.5 * slope * t * t,
        }
    }
}

/// General family: drift `-μ(t, E[φ1(ξ)]) ξ / (T - t)`, noise `σ(t, E[φ2(ξ)])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralModelParams {
    pub mu: CoeffFn,
    pub sigma: CoeffFn,
    pub phi1: PhiFn,
    pub phi2: PhiFn,
    pub sigma_envelope: EnvelopeFn,
    pub x0: f64,
    pub horizon: f64,
}

impl GeneralModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.x0.is_finite() && self.x0 >= 0.0) {
            return Err(Error::domain("GeneralModelParams", format!("x0 = {} must be >= 0", self.x0)));
        }
        check_horizon("GeneralModelParams", self.horizon)?;
        self.phi1.validate()?;
        self.phi2.validate()?;
        let h_end = self.sigma_envelope.eval(self.horizon);
        let h0 = self.sigma_envelope.eval(0.0);
        if !(h0.is_finite() && h_end.is_finite() && h0 > 0.0 && h_end > 0.0) {
            return Err(Error::domain(
                "GeneralModelParams",
                "sigma envelope must be positive and finite on [0, T]",
            ));
        }
        Ok(())
    }

    /// Default example: `μ = 1 + m` with `φ1 = y²`, `σ = 1 + m/2` with a smoothed
    /// indicator for `φ2`, envelope `h ≡ 2.25`.
    pub fn example(x0: f64, horizon: f64) -> Self {
        GeneralModelParams {
            mu: CoeffFn::Affine {
                base: 1.0,
                slope: 1.0,
                time_slope: 0.0,
            },
            sigma: CoeffFn::Affine {
                base: 1.0,
                slope: 0.5,
                time_slope: 0.0,
            },
            phi1: PhiFn::Square,
            phi2: PhiFn::SmoothIndicator {
                half_width: 1.0,
                sharpness: 4.0,
            },
            sigma_envelope: EnvelopeFn::Constant { value: 2.25 },
            x0,
            horizon,
        }
    }
}

/// The model families, plus the classical Brownian bridge as a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec {
    PowerMean(PowerMeanParams),
    #[serde(rename = "second-moment")]
    PowerSecondMoment(SecondMomentParams),
    General(GeneralModelParams),
    #[serde(rename = "brownian-bridge")]
    ReferenceBrownianBridge { x0: f64, horizon: f64 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::PowerMean(p) => p.validate(),
            ModelSpec::PowerSecondMoment(p) => p.validate(),
            ModelSpec::General(p) => p.validate(),
            ModelSpec::ReferenceBrownianBridge { x0, horizon } => {
                if !x0.is_finite() {
                    return Err(Error::domain("ReferenceBrownianBridge", "x0 must be finite"));
                }
                check_horizon("ReferenceBrownianBridge", *horizon)
            }
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            ModelSpec::PowerMean(p) => p.horizon,
            ModelSpec::PowerSecondMoment(p) => p.horizon,
            ModelSpec::General(p) => p.horizon,
            ModelSpec::ReferenceBrownianBridge { horizon, .. } => *horizon,
        }
    }

    /// The `x0` parameter as given (a start value for the mean-type families,
    /// an initial second moment for the others).
    pub fn x0(&self) -> f64 {
        match self {
            ModelSpec::PowerMean(p) => p.x0,
            ModelSpec::PowerSecondMoment(p) => p.x0,
            ModelSpec::General(p) => p.x0,
            ModelSpec::ReferenceBrownianBridge { x0, .. } => *x0,
        }
    }

    /// Deterministic starting value of every simulated path.
    ///
    /// For the second-moment and general families `x0` is the initial second
    /// moment, so paths start at `√x0`.
    pub fn initial_value(&self) -> f64 {
        match self {
            ModelSpec::PowerMean(p) => p.x0,
            ModelSpec::PowerSecondMoment(p) => p.x0.sqrt(),
            ModelSpec::General(p) => p.x0.sqrt(),
            ModelSpec::ReferenceBrownianBridge { x0, .. } => *x0,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::PowerMean(_) => "power-mean",
            ModelSpec::PowerSecondMoment(_) => "second-moment",
            ModelSpec::General(_) => "general",
            ModelSpec::ReferenceBrownianBridge { .. } => "brownian-bridge",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_mean_rejects_non_positive() {
        assert!(PowerMeanParams::new(0.0, 1.0, 1.0).is_err());
        assert!(PowerMeanParams::new(1.0, 0.0, 1.0).is_err());
        assert!(PowerMeanParams::new(1.0, 1.0, -1.0).is_err());
        let p = PowerMeanParams::new(2.0, 0.5, 3.0).unwrap();
        assert!((p.a_alpha() - (4.0 + 2.0 * 3f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn second_moment_allows_zero_start() {
        assert!(SecondMomentParams::new(1.0, 0.0, 1.0).unwrap().is_explicit());
        assert!(!SecondMomentParams::new(2.0, 0.0, 1.0).unwrap().is_explicit());
        assert!(SecondMomentParams::new(1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn coefficient_descriptors_parse() {
        let c: CoeffFn = "affine:1,2".parse().unwrap();
        assert_eq!(c.eval(0.3, 0.5), 2.0);
        let p: CoeffFn = "power:2,0.5".parse().unwrap();
        assert_eq!(p.eval(0.0, 4.0), 4.0);
        assert_eq!("const:3".parse::<CoeffFn>().unwrap().eval(1.0, 9.0), 3.0);
        assert!("affine:1".parse::<CoeffFn>().is_err());
    }

    #[test]
    fn model_spec_serde_is_tagged() {
        let m = ModelSpec::PowerMean(PowerMeanParams::new(1.0, 1.0, 1.0).unwrap());
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"family\":\"power-mean\""), "{s}");
        let back: ModelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
