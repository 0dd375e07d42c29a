use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Catalog of scalar test functions `φ: ℝ → ℝ` whose Gaussian expectations
/// feed the general model's coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiFn {
    Identity,
    Square,
    Abs,
    /// Logistic `1 / (1 + e^{-y})`.
    Sigmoid,
    /// Smooth stand-in for `1{|y| < half_width}`:
    /// `1 / (1 + exp(sharpness (y² - half_width²)))`.
    SmoothIndicator { half_width: f64, sharpness: f64 },
    /// Piecewise-linear interpolation of `(xs, ys)`, constant beyond the ends.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

impl PhiFn {
    pub fn smooth_indicator(half_width: f64, sharpness: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite() && sharpness > 0.0 && sharpness.is_finite()) {
            return Err(Error::domain(
                "PhiFn::smooth_indicator",
                "half_width and sharpness must be positive and finite",
            ));
        }
        Ok(PhiFn::SmoothIndicator {
            half_width,
            sharpness,
        })
    }

    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let phi = PhiFn::Tabulated { xs, ys };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhiFn::SmoothIndicator {
                half_width,
                sharpness,
            } => PhiFn::smooth_indicator(*half_width, *sharpness).map(|_| ()),
            PhiFn::Tabulated { xs, ys } => {
                if xs.len() < 2 || xs.len() != ys.len() {
                    return Err(Error::domain(
                        "PhiFn::tabulated",
                        format!("need >= 2 points with matching lengths, got {} and {}", xs.len(), ys.len()),
                    ));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain("PhiFn::tabulated", "abscissae must be finite and strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            PhiFn::Identity => y,
            PhiFn::Square => y * y,
            PhiFn::Abs => y.abs(),
            PhiFn::Sigmoid => 1.0 / (1.0 + (-y).exp()),
            PhiFn::SmoothIndicator {
                half_width,
                sharpness,
            } => 1.0 / (1.0 + (sharpness * (y * y - half_width * half_width)).exp()),
            PhiFn::Tabulated { xs, ys } => interpolate(xs, ys, y),
        }
    }

    /// Short identifier used in file headers and cache keys.
    pub fn label(&self) -> String {
        match self {
            PhiFn::Identity => "identity".into(),
            PhiFn::Square => "square".into(),
            PhiFn::Abs => "abs".into(),
            PhiFn::Sigmoid => "sigmoid".into(),
            PhiFn::SmoothIndicator {
                half_width,
                sharpness,
            } => format!("smooth-indicator:{half_width},{sharpness}"),
            PhiFn::Tabulated { xs, .. } => format!("tabulated[{}]", xs.len()),
        }
    }

    /// The built-in catalog with default parameters (tabulated entries excluded).
    pub fn catalog() -> Vec<PhiFn> {
        vec![
            PhiFn::Identity,
            PhiFn::Square,
            PhiFn::Abs,
            PhiFn::Sigmoid,
            PhiFn::SmoothIndicator {
                half_width: 1.0,
                sharpness: 4.0,
            },
        ]
    }
}

fn interpolate(xs: &[f64], ys: &[f64], y: f64) -> f64 {
    let n = xs.len();
    if y <= xs[0] {
        return ys[0];
    }
    if y >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|&x| x <= y);
    let lo = hi - 1;
    let w = (y - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}

impl std::str::FromStr for PhiFn {
    type Err = Error;

    /// Parses `identity`, `square`, `abs`, `sigmoid`, `smooth-indicator[:w,k]`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a)),
            None => (s.trim(), None),
        };
        match (head, args) {
            ("identity", None) => Ok(PhiFn::Identity),
            ("square", None) => Ok(PhiFn::Square),
            ("abs", None) => Ok(PhiFn::Abs),
            ("sigmoid", None) => Ok(PhiFn::Sigmoid),
            ("smooth-indicator", None) => PhiFn::smooth_indicator(1.0, 4.0),
            ("smooth-indicator", Some(a)) => {
                let v = parse_numbers(a)?;
                if v.len() != 2 {
                    return Err(Error::Usage(format!("smooth-indicator takes 2 numbers, got '{a}'")));
                }
                PhiFn::smooth_indicator(v[0], v[1])
            }
            _ => Err(Error::Usage(format!("unknown phi descriptor '{s}'"))),
        }
    }
}

pub(crate) fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("cannot parse number '{p}'")))
        })
        .collect()
}
