//! Uniform bound on `E_x[e^{A_t}]` from a Kato rate, checked against the
//! moment series `Σ_k E_x[A_t^k] / k!`.

use serde::{Deserialize, Serialize};

use super::series_terms;
use crate::error::{KacError, Result};
use crate::kernels::TransitionKernel;
use crate::measures::{KatoReport, RevuzMeasure};
use crate::quadrature::{golden_section_min, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpBoundRow {
    pub t: f64,
    pub bound: f64,
    /// `Σ_{k ≤ K} E_x[A_t^k] / k!`.
    pub series_value: f64,
    /// Geometric estimate of the omitted terms.
    pub tail_bound: f64,
    /// Largest of the last few successive term ratios.
    pub ratio: f64,
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpBoundReport {
    pub alpha: f64,
    pub s_alpha: f64,
    pub t_alpha: f64,
    /// `‖U_α μ‖_∞` estimate used.
    pub sup_potential: f64,
    /// `e^{s_α} ‖U_α μ‖_∞ < 1`.
    pub c: f64,
    /// `1 / (1 - c)`.
    pub c1: f64,
    pub rows: Vec<ExpBoundRow>,
}

impl ExpBoundReport {
    /// `c₁^{1 + t / t_α}`.
    pub fn bound(&self, t: f64) -> f64 {
        self.c1.powf(1.0 + t / self.t_alpha)
    }

    /// Picks `(α, s_α)` minimising the bound at `t_max` among the rates of
    /// the report whose supremum estimate is below one. For each rate `s_α`
    /// is searched on `{0.05, 0.10, …, 3.0}` and refined by golden section.
    pub fn choose(report: &KatoReport, t_max: f64) -> Result<Self> {
        if !report.in_extended_kato {
            return Err(KacError::Infeasible("measure is not in the extended Kato class on the tested rates".into()));
        }
        let alpha_star = report.alpha_star.unwrap_or(f64::INFINITY);
        let mut best: Option<(f64, f64, f64, f64)> = None;
        for &(alpha, sup) in &report.sup_curve {
            if alpha < alpha_star || !(sup < 1.0) {
                continue;
            }
            let s_max = if sup > 0.0 { -sup.ln() } else { f64::INFINITY };
            let objective = |s: f64| {
                let c = s.exp() * sup;
                if !(s > 0.0) || !(c < 1.0) {
                    return f64::INFINITY;
                }
                -(1.0 - c).ln() * (1.0 + t_max * alpha / s)
            };
            let grid: Vec<f64> = (1..=60).map(|i| 0.05 * i as f64).filter(|&s| s < s_max).collect();
            let (lo, hi) = match grid
                .iter()
                .enumerate()
                .min_by(|a, b| objective(*a.1).total_cmp(&objective(*b.1)))
            {
                Some((i, _)) => (
                    if i == 0 { 0.0 } else { grid[i - 1] },
                    grid.get(i + 1).copied().unwrap_or(grid[i]).min(s_max),
                ),
                None => (0.0, s_max.min(3.0)),
            };
            let (s, f) = golden_section_min(objective, lo, hi, 60);
            let (s, f) = grid
                .iter()
                .map(|&g| (g, objective(g)))
                .chain(std::iter::once((s, f)))
                .fold((s, f), |acc, p| if p.1 < acc.1 { p } else { acc });
            if f.is_finite() && best.is_none_or(|b| f < b.3) {
                best = Some((alpha, s, sup, f));
            }
        }
        let (alpha, s, sup, _) =
            best.ok_or_else(|| KacError::Infeasible("no rate and s_alpha give e^s sup U_alpha mu < 1".into()))?;
        let c = s.exp() * sup;
        Ok(ExpBoundReport {
            alpha,
            s_alpha: s,
            t_alpha: s / alpha,
            sup_potential: sup,
            c,
            c1: 1.0 / (1.0 - c),
            rows: Vec::new(),
        })
    }
}

/// The bound at each requested time together with the truncated series
/// `Σ_{k ≤ K} E_x[A_t^k] / k!`, accumulated in log space.
pub fn exponential_bound(
    kernel: &TransitionKernel,
    mu: &RevuzMeasure,
    report: &KatoReport,
    x: f64,
    t_values: &[f64],
    k_max: usize,
    quad: &QuadratureSpec,
) -> Result<ExpBoundReport> {
    if t_values.is_empty() || t_values.iter().any(|t| !(*t > 0.0)) {
        return Err(KacError::Argument("times must be positive".into()));
    }
    if k_max < 2 {
        return Err(KacError::Argument("series cap must be at least 2".into()));
    }
    let t_max = t_values.iter().copied().fold(0.0, f64::max);
    let mut out = ExpBoundReport::choose(report, t_max)?;
    for &t in t_values {
        let terms = series_terms(kernel, mu, k_max, x, t, quad)?;
        let logs: Vec<f64> = terms.iter().map(|e| e.value.ln()).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let series = top.exp() * logs.iter().map(|l| (l - top).exp()).sum::<f64>();
        let last = (k_max.saturating_sub(2)..k_max).map(|k| (logs[k + 1] - logs[k]).exp());
        let ratio = last.fold(0.0, f64::max);
        if !(ratio < 1.0) {
            return Err(KacError::Nonconvergent { ratio });
        }
        let tail = logs[k_max].exp() * ratio / (1.0 - ratio);
        let bound = out.bound(t);
        if series > bound {
            return Err(KacError::numeric(format!("series {series} exceeds the bound {bound} at t={t}"), series - bound));
        }
        out.rows.push(ExpBoundRow {
            t,
            bound,
            series_value: series,
            tail_bound: tail,
            ratio,
            terms: k_max,
        });
    }
    Ok(out)
}
