use super::{KernelFamily, TransitionKernel};
use crate::error::{KacError, Result};
use crate::quadrature::{adaptive_with_breaks, Estimate, QuadratureSpec};

/// Free-space resolvent density `e^(-κ|z|)/κ`, `κ = sqrt(2α)`.
fn free_resolvent(kappa: f64, z: f64) -> f64 {
    (-kappa * z.abs()).exp() / kappa
}

/// Closed-form α-potential density `r_α(x, y) = ∫₀^∞ e^(-αt) p_t(x, y) dt`.
pub(crate) fn potential_closed(kernel: &TransitionKernel, alpha: f64, x: f64, y: f64) -> f64 {
    let kappa = (2.0 * alpha).sqrt();
    match kernel.family() {
        KernelFamily::Brownian => free_resolvent(kappa, x - y),
        KernelFamily::BrownianDrift { drift } => {
            let gamma = (2.0 * alpha + drift * drift).sqrt();
            (drift * (y - x) - gamma * (y - x).abs()).exp() / gamma
        }
        KernelFamily::ReflectedBrownian { lower } => {
            if x < lower || y < lower {
                return 0.0;
            }
            free_resolvent(kappa, x - y) + free_resolvent(kappa, x + y - 2.0 * lower)
        }
        KernelFamily::KilledBrownian { lower, upper } => {
            if !(x > lower && x < upper && y > lower && y < upper) {
                return 0.0;
            }
            // Dirichlet Green function 2 sinh(κ(a-l)) sinh(κ(u-b)) / (κ sinh(κ(u-l)))
            // written with decaying exponentials only.
            let (a, b) = if x <= y { (x, y) } else { (y, x) };
            let p = kappa * (a - lower);
            let q = kappa * (upper - b);
            let w = kappa * (upper - lower);
            let num = (-(-2.0 * p).exp_m1()) * (-(-2.0 * q).exp_m1());
            let den = -(-2.0 * w).exp_m1();
            (p + q - w).exp() * num / (den * kappa)
        }
    }
}

/// `r_α(x, y)` from its closed form. All built-in families have one; the
/// quadrature route is [`potential_density_numeric`].
pub fn potential_density(kernel: &TransitionKernel, alpha: f64, x: f64, y: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(KacError::Argument(format!("rate must be positive, got {alpha}")));
    }
    kernel.check_point(x)?;
    kernel.check_point(y)?;
    Ok(potential_closed(kernel, alpha, x, y))
}

/// `r_α(x, y)` by time quadrature of the Laplace integral.
///
/// The substitution `t = u²` removes the `t^(-1/2)` singularity on the
/// diagonal, the range is cut at `T` with `e^(-αT)` below the configured
/// tail, and a bound on the discarded tail is added to the error.
pub fn potential_density_numeric(
    kernel: &TransitionKernel,
    alpha: f64,
    x: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(KacError::Argument(format!("rate must be positive, got {alpha}")));
    }
    kernel.check_point(x)?;
    kernel.check_point(y)?;
    let horizon = (1.0 / quad.laplace_tail).ln() / alpha;
    let u_max = horizon.sqrt();
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.0;
        }
        let t = u * u;
        2.0 * u * (-alpha * t).exp() * kernel.density(t, x, y)
    };
    // The integrand switches on near u ≈ |x - y|; give the rule that scale.
    let d = (x - y).abs();
    let breaks: Vec<f64> = [0.25 * d, 0.5 * d, d, 2.0 * d]
        .into_iter()
        .filter(|b| *b > 0.0 && *b < u_max)
        .collect();
    let tol = crate::quadrature::Tolerance {
        rel: 1e-13,
        ..quad.outer()
    };
    let mut e = adaptive_with_breaks(integrand, 0.0, u_max, &breaks, tol);
    if !e.value.is_finite() {
        return Err(KacError::numeric("Laplace integral of the heat kernel", e.error));
    }
    // p_t ≤ 2 (2πt)^(-1/2) for every built-in kernel.
    let tail = 2.0 * (-alpha * horizon).exp() / (alpha * (2.0 * std::f64::consts::PI * horizon).sqrt());
    e.error += tail;
    Ok(e)
}
