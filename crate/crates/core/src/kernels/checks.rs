//! Self-consistency residuals for transition kernels.

use serde::{Deserialize, Serialize};

use super::potential::potential_closed;
use super::{DualPair, KernelFamily, SpaceKind, TransitionKernel};
use crate::error::{KacError, Result};
use crate::quadrature::{adaptive_with_breaks, integrate_line, QuadratureSpec, Tolerance};
use crate::spatial::SpatialFn;

const CHECK_TOL: Tolerance = Tolerance::new(1e-300, 1e-12);

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `n` lattice points spanning ±4√t around the natural reference point of
/// the state space (the origin, the reflecting boundary, or the interior of
/// a killing interval).
pub fn default_lattice(kernel: &TransitionKernel, t: f64, n: usize) -> Vec<f64> {
    let space = kernel.space();
    let w = 4.0 * t.sqrt();
    match space.kind() {
        SpaceKind::FullLine => linspace(-w, w, n),
        SpaceKind::HalfLine => linspace(space.lower, space.lower + 2.0 * w, n),
        SpaceKind::Interval => {
            let len = space.upper - space.lower;
            (1..=n)
                .map(|i| space.lower + len * i as f64 / (n + 1) as f64)
                .collect()
        }
    }
}

/// Three points per axis covering a width-4 window, for the resolvent check.
pub fn resolvent_lattice(kernel: &TransitionKernel) -> Vec<f64> {
    default_lattice(kernel, 0.25, 3)
}

/// `max |∫ p_t(x,z) p_s(z,y) dz - p_{t+s}(x,y)|` over all lattice pairs.
pub fn check_chapman_kolmogorov(kernel: &TransitionKernel, t: f64, s: f64, points: &[f64], quad: &QuadratureSpec) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in points {
        for &y in points {
            let (a1, b1) = kernel.mass_window(t, x, quad.kernel_window_sd);
            let (a2, b2) = kernel.backward_window(s, y, quad.kernel_window_sd);
            let (lo, hi) = (a1.max(a2), b1.min(b2));
            let conv = adaptive_with_breaks(
                |z| kernel.density(t, x, z) * kernel.density(s, z, y),
                lo,
                hi,
                &[x, y],
                CHECK_TOL,
            );
            worst = worst.max((conv.value - kernel.density(t + s, x, y)).abs());
        }
    }
    worst
}

pub fn check_symmetry(kernel: &TransitionKernel, t: f64, points: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in points {
        for &y in points {
            worst = worst.max((kernel.density(t, x, y) - kernel.density(t, y, x)).abs());
        }
    }
    worst
}

/// Largest pointwise excess of `killed` over `free` on the lattice; zero
/// when the killed density is dominated.
pub fn check_domination(killed: &TransitionKernel, free: &TransitionKernel, t: f64, points: &[f64]) -> f64 {
    let space = killed.space();
    let mut worst: f64 = 0.0;
    for &x in points.iter().filter(|p| space.contains(**p)) {
        for &y in points.iter().filter(|p| space.contains(**p)) {
            worst = worst.max(killed.density(t, x, y) - free.density(t, x, y));
        }
    }
    worst
}

/// Residual of `r_{α∧β} = r_{α∨β} + |α-β| ∫ r_α(x,z) r_β(z,y) dz` over the
/// given pairs.
pub fn check_resolvent_equation(
    kernel: &TransitionKernel,
    alpha: f64,
    beta: f64,
    pairs: &[(f64, f64)],
) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(KacError::Argument("rates must be positive".into()));
    }
    if alpha == beta {
        return Err(KacError::Argument(
            "the resolvent identity is vacuous for equal rates".into(),
        ));
    }
    let space = kernel.space();
    let (small, large) = (alpha.min(beta), alpha.max(beta));
    let mut worst: f64 = 0.0;
    for &(x, y) in pairs {
        kernel.check_point(x)?;
        kernel.check_point(y)?;
        let conv = integrate_line(
            |z| potential_closed(kernel, alpha, x, z) * potential_closed(kernel, beta, z, y),
            space.lower,
            space.upper,
            &[x, y],
            CHECK_TOL,
        );
        let lhs = potential_closed(kernel, small, x, y);
        let rhs = potential_closed(kernel, large, x, y) + (alpha - beta).abs() * conv.value;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

fn compact(f: &SpatialFn, name: &str) -> Result<(f64, f64)> {
    let (lo, hi) = f.support();
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(KacError::Argument(format!(
            "test function {name} must have compact support"
        )));
    }
    Ok((lo, hi))
}

/// `∬ p_t(x,y) f(y) g(x) dy dx` by nested adaptive quadrature.
fn paired_integral(kernel: &TransitionKernel, t: f64, f: &SpatialFn, g: &SpatialFn, quad: &QuadratureSpec) -> f64 {
    let space = kernel.space();
    let (glo, ghi) = g.support();
    let (glo, ghi) = space.clip(glo, ghi);
    let (flo, fhi) = f.support();
    let fb = f.breakpoints();
    let outer = |x: f64| {
        let gx = g.eval(x);
        if gx == 0.0 {
            return 0.0;
        }
        let (wlo, whi) = kernel.mass_window(t, x, quad.kernel_window_sd);
        let (lo, hi) = space.clip(flo.max(wlo), fhi.min(whi));
        let mut breaks = fb.clone();
        breaks.push(x);
        gx * adaptive_with_breaks(|y| kernel.density(t, x, y) * f.eval(y), lo, hi, &breaks, CHECK_TOL).value
    };
    adaptive_with_breaks(outer, glo, ghi, &g.breakpoints(), CHECK_TOL).value
}

/// `|∬ p_t(x,y) f(y) g(x) - ∬ p̂_t(x,y) g(y) f(x)|`.
pub fn check_duality(pair: &DualPair, t: f64, f: &SpatialFn, g: &SpatialFn, quad: &QuadratureSpec) -> Result<f64> {
    if f.is_zero() || g.is_zero() {
        return Ok(0.0);
    }
    compact(f, "f")?;
    compact(g, "g")?;
    let forward = paired_integral(&pair.forward, t, f, g, quad);
    let backward = paired_integral(&pair.dual, t, g, f, quad);
    Ok((forward - backward).abs())
}

/// All residuals for one kernel, as printed by `kernel-check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelCheckReport {
    pub kernel: String,
    /// `(t, s, residual)`.
    pub chapman_kolmogorov: Vec<(f64, f64, f64)>,
    pub symmetry: Option<f64>,
    /// `(α, β, residual)`.
    pub resolvent: Vec<(f64, f64, f64)>,
    pub duality: Option<f64>,
    pub max_survival_excess: f64,
}

impl KernelCheckReport {
    pub fn max_residual(&self) -> f64 {
        let mut m: f64 = self.max_survival_excess;
        for r in &self.chapman_kolmogorov {
            m = m.max(r.2);
        }
        for r in &self.resolvent {
            m = m.max(r.2);
        }
        m.max(self.symmetry.unwrap_or(0.0)).max(self.duality.unwrap_or(0.0))
    }

    pub fn run(kernel: &TransitionKernel, quad: &QuadratureSpec) -> Result<Self> {
        let mut ck = Vec::new();
        for &(t, s) in &[(0.5, 0.5), (0.2, 1.0)] {
            let pts = default_lattice(kernel, t, quad.lattice_points);
            ck.push((t, s, check_chapman_kolmogorov(kernel, t, s, &pts, quad)));
        }
        let symmetry = kernel
            .is_symmetric()
            .then(|| check_symmetry(kernel, 1.0, &default_lattice(kernel, 1.0, quad.lattice_points)));
        let rl = resolvent_lattice(kernel);
        let pairs: Vec<(f64, f64)> = rl.iter().flat_map(|&x| rl.iter().map(move |&y| (x, y))).collect();
        let mut resolvent = Vec::new();
        for &(a, b) in &[(1.0, 2.0), (1.0, 3.0)] {
            resolvent.push((a, b, check_resolvent_equation(kernel, a, b, &pairs)?));
        }
        let duality = match kernel.family() {
            KernelFamily::BrownianDrift { .. } => {
                let ind = SpatialFn::indicator(0.0, 1.0);
                Some(check_duality(&DualPair::of(*kernel), 1.0, &ind, &ind, quad)?)
            }
            _ => None,
        };
        let mut excess: f64 = 0.0;
        for &t in &[0.1, 1.0, 5.0] {
            for x in default_lattice(kernel, t, quad.lattice_points) {
                let m = super::survival_mass_numeric(kernel, t, x, quad)?.value;
                excess = excess.max(m - 1.0).max(-m);
                if kernel.is_conservative() {
                    excess = excess.max((m - 1.0).abs());
                }
            }
        }
        Ok(KernelCheckReport {
            kernel: kernel.label(),
            chapman_kolmogorov: ck,
            symmetry,
            resolvent,
            duality,
            max_survival_excess: excess,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<TransitionKernel> {
        vec![
            TransitionKernel::brownian(),
            TransitionKernel::brownian_drift(1.0).unwrap(),
            TransitionKernel::reflected_brownian(),
            TransitionKernel::killed_brownian(0.0, 1.0).unwrap(),
            TransitionKernel::killed_brownian(-1.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn chapman_kolmogorov_for_builtins() {
        let q = QuadratureSpec::default();
        for k in builtins() {
            for &(t, s) in &[(0.5, 0.5), (0.2, 1.0)] {
                let pts = default_lattice(&k, t, 9);
                let r = check_chapman_kolmogorov(&k, t, s, &pts, &q);
                assert!(r < 1e-9, "{} ({t},{s}): {r}", k.label());
            }
        }
    }

    #[test]
    fn symmetry_is_exact_for_symmetric_families() {
        for k in builtins().into_iter().filter(|k| k.is_symmetric()) {
            assert_eq!(check_symmetry(&k, 0.7, &default_lattice(&k, 0.7, 9)), 0.0, "{}", k.label());
        }
    }

    #[test]
    fn resolvent_equation_examples() {
        let bm = TransitionKernel::brownian();
        let pts = resolvent_lattice(&bm);
        assert_eq!(pts, vec![-2.0, 0.0, 2.0]);
        let pairs: Vec<_> = pts.iter().flat_map(|&x| pts.iter().map(move |&y| (x, y))).collect();
        assert!(check_resolvent_equation(&bm, 1.0, 2.0, &pairs).unwrap() < 1e-6);
        assert!(matches!(
            check_resolvent_equation(&bm, 1.0, 1.0, &pairs),
            Err(KacError::Argument(_))
        ));
        let refl = TransitionKernel::reflected_brownian();
        let rp: Vec<_> = [0.0, 1.0, 2.0]
            .iter()
            .flat_map(|&x| [0.0, 1.0, 2.0].into_iter().map(move |y| (x, y)))
            .collect();
        assert!(check_resolvent_equation(&refl, 1.0, 3.0, &rp).unwrap() < 1e-6);
    }

    #[test]
    fn duality_examples() {
        let q = QuadratureSpec::default();
        let ind = SpatialFn::indicator(0.0, 1.0);
        let pair = DualPair::of(TransitionKernel::brownian_drift(1.0).unwrap());
        assert!(check_duality(&pair, 1.0, &ind, &ind, &q).unwrap() < 1e-8);
        let sym = DualPair::of(TransitionKernel::brownian());
        let bump = SpatialFn::indicator(-0.5, 0.25).times(SpatialFn::gaussian(0.0, 0.3, 2.0));
        assert!(check_duality(&sym, 0.4, &ind, &bump, &q).unwrap() < 1e-10);
        assert_eq!(check_duality(&pair, 1.0, &SpatialFn::constant(0.0), &ind, &q).unwrap(), 0.0);
        assert!(check_duality(&pair, 1.0, &SpatialFn::constant(1.0), &ind, &q).is_err());
    }

    #[test]
    fn killed_is_dominated_by_free() {
        let free = TransitionKernel::brownian();
        let killed = TransitionKernel::killed_brownian(-1.0, 1.0).unwrap();
        for &t in &[0.05, 0.5, 2.0] {
            let pts: Vec<f64> = (1..20).map(|i| -1.0 + i as f64 / 10.0).collect();
            assert!(check_domination(&killed, &free, t, &pts) <= 0.0);
        }
    }
}
