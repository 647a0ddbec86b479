//! Moments of additive functionals through the Kac recursion.

mod engine;
mod expbound;
mod killed;

pub use engine::{ProfilePoint, Terminal};
pub use expbound::{exponential_bound, ExpBoundReport, ExpBoundRow};
pub use killed::{killed_variant, PartProcess};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::digest::target_digest;
use crate::error::{KacError, Result};
use crate::kernels::TransitionKernel;
use crate::measures::RevuzMeasure;
use crate::quadrature::{Estimate, QuadratureSpec};
use engine::{ordered_recursion, Engine, Layout, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMode {
    /// `E_x[∫ dA¹_{t₁} ∫_{t₁} dA²_{t₂} ⋯ f(X_t)]` with the measures in the given order.
    Ordered,
    /// `E_x[f(X_t) ∏ Aⁱ_t]`.
    PermutationSum,
    /// `E_x[f(X_t) A_t^k]` for one measure repeated `k` times.
    IdenticalPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRequest {
    pub kernel: TransitionKernel,
    pub measures: Vec<RevuzMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Terminal>,
    pub x: f64,
    pub t: f64,
    pub mode: OrderMode,
}

impl MomentRequest {
    pub fn power(kernel: TransitionKernel, mu: RevuzMeasure, k: usize, x: f64, t: f64) -> Self {
        MomentRequest {
            kernel,
            measures: vec![mu; k],
            terminal: None,
            x,
            t,
            mode: OrderMode::IdenticalPower,
        }
    }

    pub fn ordered(kernel: TransitionKernel, measures: Vec<RevuzMeasure>, x: f64, t: f64) -> Self {
        MomentRequest {
            kernel,
            measures,
            terminal: None,
            x,
            t,
            mode: OrderMode::Ordered,
        }
    }

    pub fn permutation_sum(kernel: TransitionKernel, measures: Vec<RevuzMeasure>, x: f64, t: f64) -> Self {
        MomentRequest {
            mode: OrderMode::PermutationSum,
            ..Self::ordered(kernel, measures, x, t)
        }
    }

    pub fn with_terminal(mut self, terminal: Terminal) -> Self {
        self.terminal = Some(terminal);
        self
    }

    pub fn k(&self) -> usize {
        self.measures.len()
    }

    /// See [`crate::digest::target_digest`].
    pub fn target(&self) -> Option<String> {
        if self.mode == OrderMode::Ordered && self.k() > 1 {
            return None;
        }
        Some(target_digest(&self.kernel, &self.measures, self.terminal.as_ref(), self.x, self.t))
    }

    fn terminal_or_one(&self) -> Terminal {
        self.terminal.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(KacError::Argument("at least one measure is required".into()));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(KacError::Argument(format!("horizon must be positive, got {}", self.t)));
        }
        self.kernel.check_point(self.x)?;
        for mu in &self.measures {
            mu.validate(&self.kernel)?;
        }
        if self.mode == OrderMode::IdenticalPower && self.measures.iter().any(|m| *m != self.measures[0]) {
            return Err(KacError::Argument("identical-power mode needs equal measures".into()));
        }
        if let Some(f) = &self.terminal {
            if !f.inside.is_nonnegative() || !(f.cemetery >= 0.0) {
                return Err(KacError::Argument("terminal function must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub operation: String,
    pub kernel: String,
    pub k: usize,
    /// Distinct ordered recursions evaluated.
    pub recursions: usize,
    /// Sample points per tabulated level of the first recursion.
    pub nodes_per_table: Vec<usize>,
    pub atom_fast_path: bool,
    pub quadrature: QuadratureSpec,
    /// Fingerprint of the estimated quantity; absent for ordered integrals
    /// of two or more measures, which are not moments of a product.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentResult {
    pub value: f64,
    pub error_estimate: f64,
    /// The last tabulated level, when `QuadratureSpec::keep_profile` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<ProfilePoint>>,
    pub provenance: Provenance,
}

impl MomentResult {
    fn zero(operation: &str, req: &MomentRequest, quad: &QuadratureSpec) -> Self {
        MomentResult {
            value: 0.0,
            error_estimate: 0.0,
            profile: None,
            provenance: Provenance {
                operation: operation.into(),
                kernel: req.kernel.label(),
                k: req.k(),
                recursions: 0,
                nodes_per_table: Vec::new(),
                atom_fast_path: req.measures.iter().all(|m| m.is_atomic()),
                quadrature: quad.clone(),
                target: req.target(),
            },
        }
    }

    /// Writes the stored profile as CSV with columns
    /// `state,remaining_time,value`.
    pub fn write_profile_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "state,remaining_time,value")?;
        for p in self.profile.iter().flatten() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p.state, p.remaining_time, p.value)?;
        }
        Ok(())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `∫_0^t ∫ p_s(x, y) g(y, t - s) μ(dy) ds` for a caller-supplied `g`.
pub fn kac_step<G>(
    kernel: &TransitionKernel,
    mu: &RevuzMeasure,
    g: G,
    x: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Estimate>
where
    G: Fn(f64, f64) -> f64 + Sync,
{
    if !(t > 0.0) || !t.is_finite() {
        return Err(KacError::Argument(format!("horizon must be positive, got {t}")));
    }
    kernel.check_point(x)?;
    mu.validate(kernel)?;
    let layout = Layout::build(kernel, mu, &[], x, t, quad);
    let engine = Engine { kernel, quad };
    engine.kac_point(&layout, &Source::Closure(&g), x, t)
}

fn run_ordered(
    req: &MomentRequest,
    order: &[usize],
    quad: &QuadratureSpec,
    prefixes: bool,
) -> Result<engine::Recursion> {
    let mus: Vec<&RevuzMeasure> = order.iter().map(|&i| &req.measures[i]).collect();
    ordered_recursion(&req.kernel, &mus, &req.terminal_or_one(), req.x, req.t, quad, prefixes)
}

fn provenance(operation: &str, req: &MomentRequest, quad: &QuadratureSpec, recursions: usize, nodes: Vec<usize>) -> Provenance {
    Provenance {
        operation: operation.into(),
        kernel: req.kernel.label(),
        k: req.k(),
        recursions,
        nodes_per_table: nodes,
        atom_fast_path: req.measures.iter().all(|m| m.is_atomic()),
        quadrature: quad.clone(),
        target: req.target(),
    }
}

/// `E_x[f(X_t) A_t^k] = k! G_k(x, t)`.
pub fn kth_moment(req: &MomentRequest, quad: &QuadratureSpec) -> Result<MomentResult> {
    if req.mode != OrderMode::IdenticalPower {
        return Err(KacError::Argument("kth_moment needs identical-power mode".into()));
    }
    req.validate()?;
    let k = req.k();
    let order: Vec<usize> = (0..k).collect();
    let rec = run_ordered(req, &order, quad, false)?;
    let g = *rec.values.last().unwrap();
    let (value, error) = scale_by_factorial(g, k);
    Ok(MomentResult {
        value,
        error_estimate: error,
        profile: rec.profile,
        provenance: provenance("kth-moment", req, quad, 1, rec.nodes_per_table),
    })
}

/// `k! G`, through logarithms once the product would overflow.
fn scale_by_factorial(g: Estimate, k: usize) -> (f64, f64) {
    let f = factorial(k);
    if f.is_finite() && (g.value * f).is_finite() {
        return (g.value * f, g.error * f);
    }
    let ln_f: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    ((g.value.ln() + ln_f).exp(), (g.error.ln() + ln_f).exp())
}

/// `[E_x[A_t^j] for j = 0..=k]` from one recursion.
pub fn moment_sequence(
    kernel: &TransitionKernel,
    mu: &RevuzMeasure,
    k: usize,
    x: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<Estimate>> {
    let req = MomentRequest::power(*kernel, mu.clone(), k.max(1), x, t);
    req.validate()?;
    let mut out = vec![Estimate::exact(1.0)];
    if k == 0 {
        return Ok(out);
    }
    let order: Vec<usize> = (0..k).collect();
    let rec = run_ordered(&req, &order, quad, true)?;
    for (j, g) in rec.values.iter().enumerate() {
        let (v, e) = scale_by_factorial(*g, j + 1);
        out.push(Estimate { value: v, error: e });
    }
    Ok(out)
}

/// `G_j(x, t) = E_x[A_t^j] / j!` for `j = 0..=k`, each in its raw
/// (unscaled) form.
pub(crate) fn series_terms(
    kernel: &TransitionKernel,
    mu: &RevuzMeasure,
    k: usize,
    x: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<Estimate>> {
    let req = MomentRequest::power(*kernel, mu.clone(), k.max(1), x, t);
    req.validate()?;
    let order: Vec<usize> = (0..k.max(1)).collect();
    let rec = run_ordered(&req, &order, quad, true)?;
    let mut out = vec![Estimate::exact(1.0)];
    out.extend(rec.values.into_iter().take(k));
    Ok(out)
}

/// The ordered iterated integral with the measures in request order.
pub fn ordered_product_moment(req: &MomentRequest, quad: &QuadratureSpec) -> Result<MomentResult> {
    req.validate()?;
    if req.terminal.as_ref().is_some_and(|f| f.is_zero()) {
        return Ok(MomentResult::zero("ordered-product", req, quad));
    }
    let order: Vec<usize> = (0..req.k()).collect();
    let rec = run_ordered(req, &order, quad, false)?;
    let g = *rec.values.last().unwrap();
    Ok(MomentResult {
        value: g.value,
        error_estimate: g.error,
        profile: rec.profile,
        provenance: provenance("ordered-product", req, quad, 1, rec.nodes_per_table),
    })
}

/// Lexicographic permutations of `0..k`.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// `Σ_{π ∈ S_k}` of the ordered formula with measures permuted by `π`.
/// Orderings that produce the same measure sequence are evaluated once and
/// weighted by their multiplicity.
pub fn permutation_sum_moment(req: &MomentRequest, quad: &QuadratureSpec) -> Result<MomentResult> {
    let k = req.k();
    if k > quad.factorial_cap {
        return Err(KacError::Argument(format!(
            "permutation sum over {k} measures exceeds the factorial cap {}",
            quad.factorial_cap
        )));
    }
    req.validate()?;
    if req.terminal.as_ref().is_some_and(|f| f.is_zero()) {
        return Ok(MomentResult::zero("permutation-sum", req, quad));
    }
    // Canonical label per measure: index of its first equal occurrence.
    let label: Vec<usize> = (0..k)
        .map(|i| (0..=i).find(|&j| req.measures[j] == req.measures[i]).unwrap())
        .collect();
    let mut groups: Vec<(Vec<usize>, Vec<usize>, f64)> = Vec::new();
    for p in permutations(k) {
        let key: Vec<usize> = p.iter().map(|&i| label[i]).collect();
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.2 += 1.0,
            None => groups.push((key, p, 1.0)),
        }
    }
    let mut total = Estimate::ZERO;
    let mut nodes = Vec::new();
    let mut profile = None;
    for (n, (_, order, mult)) in groups.iter().enumerate() {
        let rec = run_ordered(req, order, quad, false)?;
        if n == 0 {
            nodes = rec.nodes_per_table.clone();
            profile = rec.profile;
        }
        total += rec.values.last().unwrap().scale(*mult);
    }
    Ok(MomentResult {
        value: total.value,
        error_estimate: total.error,
        profile,
        provenance: provenance("permutation-sum", req, quad, groups.len(), nodes),
    })
}

/// `E_x[A_t B_t]`.
pub fn mixed_second_moment(
    kernel: &TransitionKernel,
    mu_a: &RevuzMeasure,
    mu_b: &RevuzMeasure,
    x: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<MomentResult> {
    let req = MomentRequest::permutation_sum(*kernel, vec![mu_a.clone(), mu_b.clone()], x, t);
    permutation_sum_moment(&req, quad)
}

/// `E_x[f(X_t) A_t]`.
pub fn first_moment_with_terminal(
    kernel: &TransitionKernel,
    mu: &RevuzMeasure,
    f: &Terminal,
    x: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<MomentResult> {
    let req = MomentRequest::ordered(*kernel, vec![mu.clone()], x, t).with_terminal(f.clone());
    let mut r = ordered_product_moment(&req, quad)?;
    r.provenance.operation = "first-moment".into();
    Ok(r)
}

/// Dispatches on the request's mode.
pub fn evaluate(req: &MomentRequest, quad: &QuadratureSpec) -> Result<MomentResult> {
    match req.mode {
        OrderMode::IdenticalPower => kth_moment(req, quad),
        OrderMode::Ordered => ordered_product_moment(req, quad),
        OrderMode::PermutationSum => permutation_sum_moment(req, quad),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn permutations_are_lexicographic() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn kac_step_examples() {
        let q = QuadratureSpec::default();
        let bm = TransitionKernel::brownian();
        let leb = RevuzMeasure::lebesgue(1.0);
        let v = kac_step(&bm, &leb, |_, _| 1.0, 0.3, 1.7, &q).unwrap();
        assert!((v.value - 1.7).abs() < 1e-9, "{}", v.value);
        let d = RevuzMeasure::dirac(0.0);
        let v = kac_step(&bm, &d, |_, _| 1.0, 0.0, 2.0, &q).unwrap();
        assert!((v.value - (4.0 / PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn local_time_moments() {
        let q = QuadratureSpec::default();
        let bm = TransitionKernel::brownian();
        let d = RevuzMeasure::dirac(0.0);
        let m2 = kth_moment(&MomentRequest::power(bm, d.clone(), 2, 0.0, 1.0), &q).unwrap();
        assert!((m2.value - 1.0).abs() < 1e-6, "{}", m2.value);
        let m3 = kth_moment(&MomentRequest::power(bm, d, 3, 0.0, 1.0), &q).unwrap();
        assert!((m3.value - 2.0 * (2.0 / PI).sqrt()).abs() < 1e-6, "{}", m3.value);
    }

    #[test]
    fn zero_terminal_gives_zero() {
        let q = QuadratureSpec::default();
        let bm = TransitionKernel::brownian();
        let req = MomentRequest::ordered(bm, vec![RevuzMeasure::dirac(0.0); 2], 0.0, 1.0)
            .with_terminal(Terminal::new(crate::spatial::SpatialFn::constant(0.0), 0.0));
        assert_eq!(ordered_product_moment(&req, &q).unwrap().value, 0.0);
    }

    #[test]
    fn cap_and_mode_checks() {
        let q = QuadratureSpec::default();
        let bm = TransitionKernel::brownian();
        let req = MomentRequest::permutation_sum(bm, vec![RevuzMeasure::dirac(0.0); 7], 0.0, 1.0);
        assert!(matches!(permutation_sum_moment(&req, &q), Err(KacError::Argument(_))));
        let mut bad = MomentRequest::power(bm, RevuzMeasure::dirac(0.0), 2, 0.0, 1.0);
        bad.measures[1] = RevuzMeasure::dirac(1.0);
        assert!(kth_moment(&bad, &q).is_err());
        assert!(kth_moment(&MomentRequest::ordered(bm, vec![RevuzMeasure::dirac(0.0)], 0.0, 1.0), &q).is_err());
    }

    #[test]
    fn profile_is_kept_on_request() {
        let q = QuadratureSpec {
            keep_profile: true,
            ..QuadratureSpec::default()
        };
        let bm = TransitionKernel::brownian();
        let r = kth_moment(&MomentRequest::power(bm, RevuzMeasure::dirac(0.0), 2, 0.0, 1.0), &q).unwrap();
        let p = r.profile.as_ref().unwrap();
        assert_eq!(p.len(), q.time_nodes + 1);
        let mut buf = Vec::new();
        r.write_profile_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("state,remaining_time,value\n"));
        assert_eq!(text.lines().count(), p.len() + 1);
    }
}
