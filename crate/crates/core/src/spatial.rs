//! Catalog of real functions on the state space: measure densities,
//! terminal functions and test functions are all drawn from here so they
//! can be named in a run file and carry their own breakpoints.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpatialFn {
    Constant {
        value: f64,
    },
    /// `value` on `[lower, upper]`, zero elsewhere.
    Indicator {
        lower: f64,
        upper: f64,
        #[serde(default = "one")]
        value: f64,
    },
    /// `height * exp(-(x - center)^2 / (2 width^2))`.
    GaussianBump {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        height: f64,
    },
    Linear {
        slope: f64,
        intercept: f64,
    },
    Product {
        factors: Vec<SpatialFn>,
    },
    Sum {
        terms: Vec<SpatialFn>,
    },
}

fn one() -> f64 {
    1.0
}

impl SpatialFn {
    pub fn constant(value: f64) -> Self {
        SpatialFn::Constant { value }
    }

    pub fn indicator(lower: f64, upper: f64) -> Self {
        SpatialFn::Indicator {
            lower,
            upper,
            value: 1.0,
        }
    }

    pub fn gaussian(center: f64, width: f64, height: f64) -> Self {
        SpatialFn::GaussianBump {
            center,
            width,
            height,
        }
    }

    pub fn times(self, other: SpatialFn) -> Self {
        let mut factors = Vec::new();
        for f in [self, other] {
            match f {
                SpatialFn::Product { factors: inner } => factors.extend(inner),
                f => factors.push(f),
            }
        }
        SpatialFn::Product { factors }
    }

    pub fn plus(self, other: SpatialFn) -> Self {
        let mut terms = Vec::new();
        for f in [self, other] {
            match f {
                SpatialFn::Sum { terms: inner } => terms.extend(inner),
                f => terms.push(f),
            }
        }
        SpatialFn::Sum { terms }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SpatialFn::Constant { value } => *value,
            SpatialFn::Indicator {
                lower,
                upper,
                value,
            } => {
                if x >= *lower && x <= *upper {
                    *value
                } else {
                    0.0
                }
            }
            SpatialFn::GaussianBump {
                center,
                width,
                height,
            } => {
                let z = (x - center) / width;
                height * (-0.5 * z * z).exp()
            }
            SpatialFn::Linear { slope, intercept } => slope * x + intercept,
            SpatialFn::Product { factors } => factors.iter().map(|f| f.eval(x)).product(),
            SpatialFn::Sum { terms } => terms.iter().map(|f| f.eval(x)).sum(),
        }
    }

    /// Points where the function or its derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SpatialFn::Indicator { lower, upper, .. } => {
                [*lower, *upper].into_iter().filter(|p| p.is_finite()).collect()
            }
            SpatialFn::Product { factors: fs } | SpatialFn::Sum { terms: fs } => {
                let mut v: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints()).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
            _ => Vec::new(),
        }
    }

    /// Closed interval outside of which the function vanishes (or is
    /// negligible, for the Gaussian bump: ±10 widths, where it has fallen
    /// below `2e-22` of its peak).
    pub fn support(&self) -> (f64, f64) {
        match self {
            SpatialFn::Constant { value } | SpatialFn::Indicator { value, .. } if *value == 0.0 => {
                (0.0, 0.0)
            }
            SpatialFn::Constant { .. } | SpatialFn::Linear { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            SpatialFn::Indicator { lower, upper, .. } => (*lower, *upper),
            SpatialFn::GaussianBump {
                center,
                width,
                height,
            } => {
                if *height == 0.0 {
                    (0.0, 0.0)
                } else {
                    (center - 10.0 * width, center + 10.0 * width)
                }
            }
            SpatialFn::Product { factors } => factors.iter().fold(
                (f64::NEG_INFINITY, f64::INFINITY),
                |(lo, hi), f| {
                    let (a, b) = f.support();
                    (lo.max(a), hi.min(b))
                },
            ),
            SpatialFn::Sum { terms } => terms
                .iter()
                .map(|f| f.support())
                .filter(|(a, b)| b > a)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
        }
    }

    /// Shortest length over which the function changes appreciably, when
    /// it has one (the width of a Gaussian bump).
    pub fn length_scale(&self) -> Option<f64> {
        match self {
            SpatialFn::GaussianBump { width, .. } => Some(width.abs()),
            SpatialFn::Product { factors: fs } | SpatialFn::Sum { terms: fs } => {
                fs.iter().filter_map(|f| f.length_scale()).reduce(f64::min)
            }
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        let (lo, hi) = self.support();
        match self {
            SpatialFn::Linear { slope, intercept } => *slope == 0.0 && *intercept == 0.0,
            _ => !(hi > lo),
        }
    }

    /// `Some(c)` when the function is the constant `c` everywhere.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            SpatialFn::Constant { value } => Some(*value),
            SpatialFn::Linear { slope, intercept } if *slope == 0.0 => Some(*intercept),
            SpatialFn::Product { factors } => factors
                .iter()
                .try_fold(1.0, |acc, f| f.as_constant().map(|c| acc * c)),
            SpatialFn::Sum { terms } => terms
                .iter()
                .try_fold(0.0, |acc, f| f.as_constant().map(|c| acc + c)),
            _ => None,
        }
    }

    /// Integral over the whole line when it has a closed form.
    pub fn total_integral(&self) -> Option<f64> {
        match self {
            SpatialFn::Constant { value } => Some(if *value == 0.0 { 0.0 } else { f64::INFINITY }),
            SpatialFn::Indicator {
                lower,
                upper,
                value,
            } => Some(if *value == 0.0 {
                0.0
            } else {
                (upper - lower) * value
            }),
            SpatialFn::GaussianBump { width, height, .. } => {
                Some(height * width * (2.0 * std::f64::consts::PI).sqrt())
            }
            SpatialFn::Sum { terms } => terms
                .iter()
                .try_fold(0.0, |acc, f| f.total_integral().map(|c| acc + c)),
            _ => None,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            SpatialFn::Constant { value } | SpatialFn::Indicator { value, .. } => *value >= 0.0,
            SpatialFn::GaussianBump { height, width, .. } => *height >= 0.0 && *width > 0.0,
            SpatialFn::Linear { slope, intercept } => *slope == 0.0 && *intercept >= 0.0,
            SpatialFn::Product { factors: fs } | SpatialFn::Sum { terms: fs } => {
                fs.iter().all(|f| f.is_nonnegative())
            }
        }
    }
}
