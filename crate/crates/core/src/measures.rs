//! Revuz measures, their α-potentials, and numeric Kato-class verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{KacError, Result};
use crate::kernels::{potential_density, TransitionKernel};
use crate::quadrature::{integrate_line, Estimate, QuadratureSpec, Tolerance};
use crate::spatial::SpatialFn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// An absolutely continuous part (density against Lebesgue measure) plus a
/// finite list of point masses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RevuzMeasure {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<SpatialFn>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl RevuzMeasure {
    pub fn dirac(location: f64) -> Self {
        Self::atom(location, 1.0)
    }

    pub fn atom(location: f64, weight: f64) -> Self {
        RevuzMeasure {
            density: None,
            atoms: vec![Atom { location, weight }],
        }
    }

    /// `c` times Lebesgue measure.
    pub fn lebesgue(c: f64) -> Self {
        Self::with_density(SpatialFn::constant(c))
    }

    pub fn with_density(f: SpatialFn) -> Self {
        RevuzMeasure {
            density: Some(f),
            atoms: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.density.as_ref().is_none_or(|f| f.is_zero())
    }

    pub fn is_atomic(&self) -> bool {
        self.density.as_ref().is_none_or(|f| f.is_zero())
    }

    pub fn plus(&self, other: &RevuzMeasure) -> RevuzMeasure {
        let density = match (&self.density, &other.density) {
            (Some(a), Some(b)) => Some(a.clone().plus(b.clone())),
            (Some(a), None) => Some(a.clone()),
            (None, b) => b.clone(),
        };
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().copied());
        RevuzMeasure { density, atoms }
    }

    pub fn scaled(&self, c: f64) -> RevuzMeasure {
        RevuzMeasure {
            density: self.density.clone().map(|f| f.times(SpatialFn::constant(c))),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: a.weight * c,
                })
                .collect(),
        }
    }

    /// The measure `f·μ`.
    pub fn weighted(&self, f: &SpatialFn) -> RevuzMeasure {
        RevuzMeasure {
            density: self.density.clone().map(|d| d.times(f.clone())),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: a.weight * f.eval(a.location),
                })
                .filter(|a| a.weight != 0.0)
                .collect(),
        }
    }

    /// Restriction to the open interval `(lower, upper)`. Atoms sitting on
    /// the boundary are rejected: a killing boundary carries no mass.
    pub fn restricted(&self, lower: f64, upper: f64) -> Result<RevuzMeasure> {
        if let Some(a) = self
            .atoms
            .iter()
            .find(|a| a.location == lower || a.location == upper)
        {
            return Err(KacError::Domain(format!(
                "atom at {} lies on the boundary of ({lower}, {upper})",
                a.location
            )));
        }
        let atoms = self
            .atoms
            .iter()
            .copied()
            .filter(|a| a.location > lower && a.location < upper)
            .collect();
        let density = self.density.clone().and_then(|f| {
            let (lo, hi) = f.support();
            if hi <= lower || lo >= upper {
                None
            } else if lo >= lower && hi <= upper {
                Some(f)
            } else {
                Some(f.times(SpatialFn::indicator(lower, upper)))
            }
        });
        Ok(RevuzMeasure { density, atoms })
    }

    /// Checks the measure against the kernel it will be paired with.
    pub fn validate(&self, kernel: &TransitionKernel) -> Result<()> {
        let space = kernel.space();
        for a in &self.atoms {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(KacError::Argument(format!(
                    "atom at {} has non-positive or infinite weight {}",
                    a.location, a.weight
                )));
            }
            if !space.is_interior(a.location) {
                return Err(KacError::Domain(format!(
                    "atom at {} is not in the interior of the state space of {}",
                    a.location,
                    kernel.label()
                )));
            }
        }
        if let Some(f) = &self.density {
            if !f.is_nonnegative() {
                return Err(KacError::Argument("density must be nonnegative".into()));
            }
        }
        if self.atoms.is_empty() && self.density.is_none() {
            return Err(KacError::Argument("measure has neither density nor atoms".into()));
        }
        Ok(())
    }

    /// Total mass; infinite for densities with unbounded support that do not decay.
    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight).sum();
        let ac = match &self.density {
            None => 0.0,
            Some(f) => f.total_integral().unwrap_or_else(|| {
                let (lo, hi) = f.support();
                integrate_line(|x| f.eval(x), lo, hi, &f.breakpoints(), Tolerance::new(1e-300, 1e-10)).value
            }),
        };
        atoms + ac
    }

    /// Smallest interval holding all of the mass.
    pub fn support_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.atoms {
            lo = lo.min(a.location);
            hi = hi.max(a.location);
        }
        if let Some(f) = &self.density {
            let (a, b) = f.support();
            if b > a {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo, hi)
    }
}

/// `∫ g dμ = ∫ g f dm + Σ wᵢ g(aᵢ)`.
pub fn integrate<G: Fn(f64) -> f64>(mu: &RevuzMeasure, g: G) -> Result<Estimate> {
    let atoms: f64 = mu.atoms.iter().map(|a| a.weight * g(a.location)).sum();
    let mut total = Estimate::exact(atoms);
    if let Some(f) = &mu.density {
        let (lo, hi) = f.support();
        let e = integrate_line(|x| g(x) * f.eval(x), lo, hi, &f.breakpoints(), Tolerance::new(1e-300, 1e-11));
        if !e.value.is_finite() {
            return Err(KacError::numeric("integral against the density", e.error));
        }
        total += e;
    }
    Ok(total)
}

/// `U_α μ(x) = ∫ r_α(x, y) μ(dy)`.
pub fn potential_of_measure(kernel: &TransitionKernel, mu: &RevuzMeasure, alpha: f64, x: f64) -> Result<Estimate> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(KacError::Argument(format!("rate must be positive, got {alpha}")));
    }
    kernel.check_point(x)?;
    let space = kernel.space();
    let mut total = Estimate::ZERO;
    for a in &mu.atoms {
        if space.contains(a.location) {
            total.value += a.weight * potential_density(kernel, alpha, x, a.location)?;
        }
    }
    if let Some(f) = &mu.density {
        let (lo, hi) = f.support();
        let (lo, hi) = space.clip(lo, hi);
        if hi > lo {
            let mut breaks = f.breakpoints();
            breaks.push(x);
            let e = integrate_line(
                |y| {
                    if space.contains(y) {
                        crate::kernels::potential_density(kernel, alpha, x, y).unwrap_or(0.0) * f.eval(y)
                    } else {
                        0.0
                    }
                },
                lo,
                hi,
                &breaks,
                Tolerance::new(1e-300, 1e-12),
            );
            if !e.value.is_finite() {
                return Err(KacError::numeric("potential of the absolutely continuous part", e.error));
            }
            total += e;
        }
    }
    Ok(total)
}

/// `U_α μ` on a grid together with an upper estimate of its supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    pub alpha: f64,
    pub values: Vec<(f64, f64)>,
    pub sup_estimate: f64,
}

/// Evaluates `U_α μ` on `grid` (sorted). The supremum estimate adds, per grid
/// cell, the overshoot `L h / 2` allowed by the largest neighbouring slope
/// `L`, plus the accumulated quadrature error.
pub fn potential_profile(kernel: &TransitionKernel, mu: &RevuzMeasure, alpha: f64, grid: &[f64]) -> Result<PotentialProfile> {
    let mut values = Vec::with_capacity(grid.len());
    let mut qerr: f64 = 0.0;
    for &x in grid {
        let e = potential_of_measure(kernel, mu, alpha, x)?;
        qerr = qerr.max(e.error);
        values.push((x, e.value.max(0.0)));
    }
    let n = values.len();
    let slopes: Vec<f64> = values
        .windows(2)
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .collect();
    let mut sup = values.iter().map(|v| v.1).fold(0.0, f64::max);
    for i in 0..n.saturating_sub(1) {
        let h = values[i + 1].0 - values[i].0;
        let mut lip = slopes[i];
        if i > 0 {
            lip = lip.max(slopes[i - 1]);
        }
        if i + 1 < slopes.len() {
            lip = lip.max(slopes[i + 1]);
        }
        sup = sup.max(values[i].1.max(values[i + 1].1) + 0.5 * lip * h);
    }
    Ok(PotentialProfile {
        alpha,
        values,
        sup_estimate: sup + qerr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoReport {
    /// Smallest rate found with `sup U_α μ < 1`, refined by bisection below
    /// the first passing ladder rate.
    pub alpha_star: Option<f64>,
    /// `(α, sup-estimate)` sorted by α, made nonincreasing.
    pub sup_curve: Vec<(f64, f64)>,
    pub in_extended_kato: bool,
    /// `‖U₁μ‖ < ∞` and `μ(S) < ∞`.
    pub s00_verdict: bool,
}

impl KatoReport {
    pub fn sup_at(&self, alpha: f64) -> Option<f64> {
        self.sup_curve.iter().find(|p| p.0 == alpha).map(|p| p.1)
    }
}

/// The geometric ladder `2^j`, `j = -4..=20`.
pub fn default_alpha_ladder() -> Vec<f64> {
    (-4..=20).map(|j| 2f64.powi(j)).collect()
}

/// A grid covering the support of `μ` with 4 units of padding, clipped to
/// the state space, with atoms and density breakpoints inserted.
pub fn default_kato_grid(kernel: &TransitionKernel, mu: &RevuzMeasure) -> Vec<f64> {
    let space = kernel.space();
    let (mut lo, mut hi) = mu.support_bounds();
    if !lo.is_finite() {
        lo = -6.0;
    }
    if !hi.is_finite() {
        hi = 6.0;
    }
    let (lo, hi) = space.clip(lo - 4.0, hi + 4.0);
    let n = 801;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .filter(|x| space.contains(*x))
        .collect();
    grid.extend(mu.atoms.iter().map(|a| a.location));
    if let Some(f) = &mu.density {
        grid.extend(f.breakpoints());
    }
    grid.retain(|x| space.contains(*x) && *x >= lo && *x <= hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Numeric extended-Kato and S₀₀ verdicts for `μ`.
pub fn kato_classify(
    kernel: &TransitionKernel,
    mu: &RevuzMeasure,
    alphas: &[f64],
    grid: &[f64],
    _quad: &QuadratureSpec,
) -> Result<KatoReport> {
    mu.validate(kernel)?;
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) || alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KacError::Argument("rates must be positive and increasing".into()));
    }
    let mut grid: Vec<f64> = grid.to_vec();
    grid.extend(mu.atoms.iter().map(|a| a.location));
    let space = kernel.space();
    grid.retain(|x| space.contains(*x));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(KacError::Argument("grid has no points in the state space".into()));
    }
    let sup = |alpha: f64| -> Result<f64> { Ok(potential_profile(kernel, mu, alpha, &grid)?.sup_estimate) };

    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(alphas.len());
    for &a in alphas {
        curve.push((a, sup(a)?));
    }
    let first_pass = curve.iter().position(|p| p.1 < 1.0);
    let mut alpha_star = first_pass.map(|i| curve[i].0);
    if let Some(i) = first_pass.filter(|&i| i > 0) {
        // Bisection in log α between the last failing and first passing rung.
        let (mut fail, mut pass) = (curve[i - 1].0, curve[i].0);
        for _ in 0..20 {
            let mid = (fail * pass).sqrt();
            let s = sup(mid)?;
            curve.push((mid, s));
            if s < 1.0 {
                pass = mid;
            } else {
                fail = mid;
            }
        }
        alpha_star = Some(pass);
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The true supremum is nonincreasing in α, so any upper estimate at a
    // smaller rate also bounds it at larger ones.
    let mut running = f64::INFINITY;
    for p in curve.iter_mut() {
        running = running.min(p.1);
        p.1 = running;
    }
    let u1 = sup(1.0)?;
    let s00_verdict = u1.is_finite() && mu.total_mass().is_finite();
    Ok(KatoReport {
        alpha_star,
        in_extended_kato: alpha_star.is_some(),
        sup_curve: curve,
        s00_verdict,
    })
}
