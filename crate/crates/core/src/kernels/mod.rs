//! State spaces and explicit transition densities.
//!
//! Every built-in process is one-dimensional Brownian motion with generator
//! `(1/2) d²/dx²` (possibly with drift), so all densities are taken with
//! respect to Lebesgue measure and are built from the centred Gaussian
//! density `g_t(z) = (2πt)^(-1/2) exp(-z²/(2t))`.

mod checks;
mod potential;

pub use checks::{
    check_chapman_kolmogorov, check_domination, check_duality, check_resolvent_equation,
    check_symmetry, default_lattice, resolvent_lattice, KernelCheckReport,
};
pub use potential::{potential_density, potential_density_numeric};

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{KacError, Result};
use crate::quadrature::{integrate_line, Estimate, QuadratureSpec};
use crate::spatial::SpatialFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    FullLine,
    HalfLine,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    None,
    Reflecting,
    Killing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub lower: f64,
    pub upper: f64,
    pub lower_boundary: Boundary,
    pub upper_boundary: Boundary,
}

impl StateSpace {
    pub fn new(lower: f64, upper: f64, lower_boundary: Boundary, upper_boundary: Boundary) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(KacError::Argument(format!(
                "state space needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        if (lower.is_infinite() && lower_boundary != Boundary::None)
            || (upper.is_infinite() && upper_boundary != Boundary::None)
        {
            return Err(KacError::Argument(
                "infinite endpoints cannot carry a boundary condition".into(),
            ));
        }
        if (lower.is_finite() && lower_boundary == Boundary::None)
            || (upper.is_finite() && upper_boundary == Boundary::None)
        {
            return Err(KacError::Argument(
                "finite endpoints need a reflecting or killing boundary".into(),
            ));
        }
        Ok(StateSpace {
            lower,
            upper,
            lower_boundary,
            upper_boundary,
        })
    }

    pub fn full_line() -> Self {
        StateSpace {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            lower_boundary: Boundary::None,
            upper_boundary: Boundary::None,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (false, false) => SpaceKind::FullLine,
            (true, true) => SpaceKind::Interval,
            _ => SpaceKind::HalfLine,
        }
    }

    /// Membership; killing endpoints are excluded.
    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = match self.lower_boundary {
            Boundary::Killing => x > self.lower,
            _ => x >= self.lower,
        };
        let hi_ok = match self.upper_boundary {
            Boundary::Killing => x < self.upper,
            _ => x <= self.upper,
        };
        lo_ok && hi_ok && !x.is_nan()
    }

    pub fn is_interior(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn clip(&self, lo: f64, hi: f64) -> (f64, f64) {
        (lo.max(self.lower), hi.min(self.upper))
    }
}

/// The built-in process families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    Brownian,
    BrownianDrift { drift: f64 },
    /// Brownian motion reflected at `lower`, living on `[lower, ∞)`.
    ReflectedBrownian {
        #[serde(default)]
        lower: f64,
    },
    /// Brownian motion killed on leaving the open interval `(lower, upper)`.
    KilledBrownian { lower: f64, upper: f64 },
}

/// A transition density `p_t(x, y)` with respect to Lebesgue measure on its
/// state space. Immutable and freely shareable between threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransitionKernel {
    family: KernelFamily,
}

#[inline]
pub(crate) fn gaussian(t: f64, z: f64) -> f64 {
    (-z * z / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `Φ(b) - Φ(a)` without cancellation in either tail.
pub(crate) fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (libm::erfc(a / SQRT_2) - libm::erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b / SQRT_2) - libm::erfc(-a / SQRT_2))
    } else {
        1.0 - 0.5 * libm::erfc(-a / SQRT_2) - 0.5 * libm::erfc(b / SQRT_2)
    }
}

impl TransitionKernel {
    pub fn new(family: KernelFamily) -> Result<Self> {
        match family {
            KernelFamily::Brownian => {}
            KernelFamily::BrownianDrift { drift } => {
                if !drift.is_finite() {
                    return Err(KacError::Argument("drift must be finite".into()));
                }
            }
            KernelFamily::ReflectedBrownian { lower } => {
                if !lower.is_finite() {
                    return Err(KacError::Argument("reflecting boundary must be finite".into()));
                }
            }
            KernelFamily::KilledBrownian { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(KacError::Argument(format!(
                        "killing interval needs finite lower < upper, got ({lower}, {upper})"
                    )));
                }
            }
        }
        Ok(TransitionKernel { family })
    }

    pub fn brownian() -> Self {
        TransitionKernel {
            family: KernelFamily::Brownian,
        }
    }

    pub fn brownian_drift(drift: f64) -> Result<Self> {
        Self::new(KernelFamily::BrownianDrift { drift })
    }

    /// Reflected Brownian motion on `[0, ∞)`.
    pub fn reflected_brownian() -> Self {
        TransitionKernel {
            family: KernelFamily::ReflectedBrownian { lower: 0.0 },
        }
    }

    pub fn killed_brownian(lower: f64, upper: f64) -> Result<Self> {
        Self::new(KernelFamily::KilledBrownian { lower, upper })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn label(&self) -> String {
        match self.family {
            KernelFamily::Brownian => "brownian".into(),
            KernelFamily::BrownianDrift { drift } => format!("brownian-drift({drift})"),
            KernelFamily::ReflectedBrownian { lower } => format!("reflected-brownian[{lower},inf)"),
            KernelFamily::KilledBrownian { lower, upper } => format!("killed-brownian({lower},{upper})"),
        }
    }

    pub fn space(&self) -> StateSpace {
        match self.family {
            KernelFamily::Brownian | KernelFamily::BrownianDrift { .. } => StateSpace::full_line(),
            KernelFamily::ReflectedBrownian { lower } => StateSpace {
                lower,
                upper: f64::INFINITY,
                lower_boundary: Boundary::Reflecting,
                upper_boundary: Boundary::None,
            },
            KernelFamily::KilledBrownian { lower, upper } => StateSpace {
                lower,
                upper,
                lower_boundary: Boundary::Killing,
                upper_boundary: Boundary::Killing,
            },
        }
    }

    pub fn is_conservative(&self) -> bool {
        !matches!(self.family, KernelFamily::KilledBrownian { .. })
    }

    /// `p_t(x, y) = p_t(y, x)` holds by construction.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self.family, KernelFamily::BrownianDrift { drift } if drift != 0.0)
    }

    /// The kernel of the time-reversed process, `p̂_t(x, y) = p_t(y, x)`.
    pub fn dual(&self) -> TransitionKernel {
        match self.family {
            KernelFamily::BrownianDrift { drift } => TransitionKernel {
                family: KernelFamily::BrownianDrift { drift: -drift },
            },
            _ => *self,
        }
    }

    /// Number of image pairs on each side kept for the killed density at time `t`.
    pub(crate) fn image_count(&self, t: f64, tail: f64) -> i64 {
        match self.family {
            KernelFamily::KilledBrownian { lower, upper } => {
                let len = upper - lower;
                let reach = (2.0 * t * (1.0 / tail).ln()).sqrt();
                ((reach + 2.0 * len) / (2.0 * len)).ceil() as i64 + 1
            }
            _ => 0,
        }
    }

    /// `p_t(x, y)` without argument checks; zero outside the state space.
    #[inline]
    pub fn density(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.family {
            KernelFamily::Brownian => gaussian(t, x - y),
            KernelFamily::BrownianDrift { drift } => gaussian(t, y - x - drift * t),
            KernelFamily::ReflectedBrownian { lower } => {
                if x < lower || y < lower {
                    return 0.0;
                }
                gaussian(t, x - y) + gaussian(t, x + y - 2.0 * lower)
            }
            KernelFamily::KilledBrownian { lower, upper } => {
                if !(x > lower && x < upper && y > lower && y < upper) {
                    return 0.0;
                }
                // Ordered arguments keep the sum bitwise symmetric in (x, y).
                let (x, y) = if x <= y { (x, y) } else { (y, x) };
                let len = upper - lower;
                let n_max = self.image_count(t, 1e-14);
                let mut s = 0.0;
                for n in -n_max..=n_max {
                    let shift = 2.0 * n as f64 * len;
                    s += gaussian(t, y - x + shift) - gaussian(t, y + x - 2.0 * lower + shift);
                }
                s.max(0.0)
            }
        }
    }

    /// Checked evaluation of `p_t(x, y)`.
    pub fn eval_density(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(KacError::Argument(format!("time must be positive, got {t}")));
        }
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.density(t, x, y))
    }

    pub fn check_point(&self, x: f64) -> Result<()> {
        if self.space().contains(x) {
            Ok(())
        } else {
            Err(KacError::Domain(format!("{x} is outside the state space of {}", self.label())))
        }
    }

    /// Interval carrying all but a negligible part of `p_t(x, ·)`: `nsd`
    /// standard deviations around the mean, clipped to the state space.
    pub fn mass_window(&self, t: f64, x: f64, nsd: f64) -> (f64, f64) {
        let w = nsd * t.sqrt();
        let centre = match self.family {
            KernelFamily::BrownianDrift { drift } => x + drift * t,
            _ => x,
        };
        self.space().clip(centre - w, centre + w)
    }

    /// The same for `p_t(·, y)` viewed as a function of its first argument.
    pub fn backward_window(&self, t: f64, y: f64, nsd: f64) -> (f64, f64) {
        self.dual().mass_window(t, y, nsd)
    }

    /// `∫ p_t(x, y) dy`, the probability of not having been killed by time `t`.
    pub fn survival(&self, t: f64, x: f64) -> f64 {
        match self.family {
            KernelFamily::KilledBrownian { lower, upper } => {
                if !(x > lower && x < upper) {
                    return 0.0;
                }
                let len = upper - lower;
                let sd = t.sqrt();
                let n_max = self.image_count(t, 1e-16);
                let mut s = 0.0;
                for n in -n_max..=n_max {
                    let shift = 2.0 * n as f64 * len;
                    s += normal_mass((lower - x + shift) / sd, (upper - x + shift) / sd);
                    s -= normal_mass((x - lower + shift) / sd, (upper + x - 2.0 * lower + shift) / sd);
                }
                s.clamp(0.0, 1.0)
            }
            _ => 1.0,
        }
    }
}

/// `p_t(x, ·)` with everything that depends only on `(t, x)` hoisted out of
/// the evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DensityRow {
    family: KernelFamily,
    x: f64,
    shift: f64,
    norm: f64,
    inv_2t: f64,
    n_max: i64,
}

impl DensityRow {
    #[inline]
    pub fn at(&self, y: f64) -> f64 {
        let g = |z: f64| (-z * z * self.inv_2t).exp();
        match self.family {
            KernelFamily::Brownian | KernelFamily::BrownianDrift { .. } => self.norm * g(y - self.x - self.shift),
            KernelFamily::ReflectedBrownian { lower } => {
                if y < lower || self.x < lower {
                    return 0.0;
                }
                self.norm * (g(self.x - y) + g(self.x + y - 2.0 * lower))
            }
            KernelFamily::KilledBrownian { lower, upper } => {
                if !(y > lower && y < upper && self.x > lower && self.x < upper) {
                    return 0.0;
                }
                let len = upper - lower;
                let mut s = 0.0;
                for n in -self.n_max..=self.n_max {
                    let shift = 2.0 * n as f64 * len;
                    s += g(y - self.x + shift) - g(y + self.x - 2.0 * lower + shift);
                }
                (self.norm * s).max(0.0)
            }
        }
    }
}

impl TransitionKernel {
    pub(crate) fn row(&self, t: f64, x: f64) -> DensityRow {
        DensityRow {
            family: self.family,
            x,
            shift: match self.family {
                KernelFamily::BrownianDrift { drift } => drift * t,
                _ => 0.0,
            },
            norm: 1.0 / (2.0 * PI * t).sqrt(),
            inv_2t: 0.5 / t,
            n_max: self.image_count(t, 1e-14),
        }
    }
}

/// A kernel extended to the cemetery point: `p_t(x, Δ) = 1 - ∫ p_t(x, y) dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedKernel {
    pub base: TransitionKernel,
}

impl ExtendedKernel {
    pub fn new(base: TransitionKernel) -> Self {
        ExtendedKernel { base }
    }

    pub fn cemetery_mass(&self, t: f64, x: f64) -> Result<f64> {
        Ok(1.0 - survival_mass(&self.base, t, x)?)
    }
}

/// `∫ p_t(x, y) m(dy)`. Closed forms for all built-in families.
pub fn survival_mass(kernel: &TransitionKernel, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(KacError::Argument(format!("time must be positive, got {t}")));
    }
    kernel.check_point(x)?;
    Ok(kernel.survival(t, x))
}

/// Survival mass by spatial quadrature of the density; used to cross-check
/// the closed form and for kernels without one.
pub fn survival_mass_numeric(kernel: &TransitionKernel, t: f64, x: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(KacError::Argument(format!("time must be positive, got {t}")));
    }
    kernel.check_point(x)?;
    let (lo, hi) = kernel.mass_window(t, x, quad.kernel_window_sd);
    Ok(integrate_line(|y| kernel.density(t, x, y), lo, hi, &[x], quad.inner()))
}

/// A process and its dual, `p̂_t(x, y) = p_t(y, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPair {
    pub forward: TransitionKernel,
    pub dual: TransitionKernel,
}

impl DualPair {
    /// Pairs `forward` with an explicitly given dual, verifying the density
    /// identity on a small lattice.
    pub fn new(forward: TransitionKernel, dual: TransitionKernel) -> Result<Self> {
        if forward.space() != dual.space() {
            return Err(KacError::Argument("dual kernels must share a state space".into()));
        }
        let space = forward.space();
        let (lo, hi) = space.clip(-2.0, 2.0);
        let pts: Vec<f64> = (1..6).map(|i| lo + (hi - lo) * i as f64 / 6.0).collect();
        for &t in &[0.3, 1.0, 2.5] {
            for &x in &pts {
                for &y in &pts {
                    let a = dual.density(t, x, y);
                    let b = forward.density(t, y, x);
                    if (a - b).abs() > 1e-12 * (1.0 + b) {
                        return Err(KacError::Argument(format!(
                            "{} is not dual to {} at (t={t}, x={x}, y={y})",
                            dual.label(),
                            forward.label()
                        )));
                    }
                }
            }
        }
        Ok(DualPair { forward, dual })
    }

    pub fn of(forward: TransitionKernel) -> Self {
        DualPair {
            forward,
            dual: forward.dual(),
        }
    }
}

/// `E_y[f(X_s)] = ∫ p_s(y, z) f(z) dz + p_s(y, Δ) f(Δ)`, with `s = 0`
/// returning `f(y)`.
pub fn terminal_expectation(
    kernel: &TransitionKernel,
    f: &SpatialFn,
    cemetery: f64,
    s: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    if !(s >= 0.0) {
        return Err(KacError::Argument(format!("time must be nonnegative, got {s}")));
    }
    kernel.check_point(y)?;
    if s == 0.0 {
        return Ok(Estimate::exact(f.eval(y)));
    }
    Ok(terminal_expectation_unchecked(kernel, f, cemetery, s, y, quad))
}

pub(crate) fn terminal_expectation_unchecked(
    kernel: &TransitionKernel,
    f: &SpatialFn,
    cemetery: f64,
    s: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Estimate {
    let alive = kernel.survival(s, y);
    let dead = Estimate::exact((1.0 - alive) * cemetery);
    if let Some(c) = f.as_constant() {
        return Estimate::exact(c * alive) + dead;
    }
    let (wlo, whi) = kernel.mass_window(s, y, quad.kernel_window_sd);
    let (slo, shi) = f.support();
    let (lo, hi) = (wlo.max(slo), whi.min(shi));
    if !(hi > lo) {
        return dead;
    }
    let mut breaks = f.breakpoints();
    breaks.push(y);
    integrate_line(|z| kernel.density(s, y, z) * f.eval(z), lo, hi, &breaks, quad.inner()) + dead
}
