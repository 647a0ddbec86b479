//! Path simulation of the built-in processes, realizing additive functionals
//! pathwise to give an independent estimate of the moments the recursion
//! computes.
//!
//! Paths are grouped into fixed-size blocks. Block `b` draws from the
//! ChaCha8 stream `(stream_id << 32) | b` of the scheme's seed, and block
//! statistics are merged in block order, so results do not depend on how
//! many threads ran the blocks.

mod functional;
mod path;
mod stats;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digest::{sha256_json, target_digest};
use crate::error::{KacError, Result};
use crate::kernels::{KernelFamily, TransitionKernel};
use crate::measures::RevuzMeasure;
use crate::moments::{MomentResult, Terminal};
use crate::spatial::SpatialFn;
use functional::{Leaf, LeafKind};
use path::Walker;
use stats::Welford;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KillingDetection {
    /// Kill at the first grid time outside the domain.
    #[default]
    GridCrossing,
    /// Also kill inside a step with the Brownian-bridge exit probability.
    BridgeCorrected,
}

fn default_block_paths() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathScheme {
    pub kernel: TransitionKernel,
    /// Time step. Discounted runs use it as the first step of a graded grid.
    pub dt: f64,
    #[serde(default)]
    pub killing: KillingDetection,
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u32,
    #[serde(default = "default_block_paths")]
    pub block_paths: u64,
    /// Cap on the graded step of discounted runs (default `20 dt`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl PathScheme {
    pub fn new(kernel: TransitionKernel, dt: f64, seed: u64) -> Result<Self> {
        let s = PathScheme {
            kernel,
            dt,
            killing: KillingDetection::default(),
            seed,
            stream_id: 0,
            block_paths: default_block_paths(),
            max_step: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_killing(mut self, killing: KillingDetection) -> Self {
        self.killing = killing;
        self
    }

    pub fn with_stream(mut self, stream_id: u32) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = Some(max_step);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(KacError::Argument(format!("time step must be positive, got {}", self.dt)));
        }
        if self.block_paths == 0 {
            return Err(KacError::Argument("block size must be at least one path".into()));
        }
        if let Some(m) = self.max_step {
            if !(m >= self.dt) || !m.is_finite() {
                return Err(KacError::Argument(format!("max step {m} is below the time step {}", self.dt)));
            }
        }
        Ok(())
    }

    fn walker(&self, block: u64) -> Walker {
        Walker::new(
            &self.kernel,
            self.killing,
            self.seed,
            (u64::from(self.stream_id) << 32) | block,
        )
    }

    fn blocks(&self, n_paths: u64) -> Vec<(u64, u64)> {
        let nb = n_paths.div_ceil(self.block_paths);
        (0..nb)
            .map(|b| (b, self.block_paths.min(n_paths - b * self.block_paths)))
            .collect()
    }

    fn check_start(&self, x: f64) -> Result<()> {
        self.kernel.check_point(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum LocalTimeMethod {
    EpsilonOccupation { epsilon: f64 },
    Downcrossing { epsilon: f64 },
}

impl LocalTimeMethod {
    pub fn epsilon(&self) -> f64 {
        match *self {
            LocalTimeMethod::EpsilonOccupation { epsilon } | LocalTimeMethod::Downcrossing { epsilon } => epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PcafEstimator {
    /// `∫_0^t f(X_s) ds`.
    Occupation { density: SpatialFn },
    /// Local time at `location`.
    LocalTime { location: f64, method: LocalTimeMethod },
    /// `∫_0^∞ e^{-αs} weight(X_s) dA_s` for the inner functional `A`.
    Discounted {
        alpha: f64,
        weight: SpatialFn,
        functional: Box<PcafEstimator>,
    },
    /// Several functionals on the same path, for product moments.
    Composite { parts: Vec<PcafEstimator> },
}

impl PcafEstimator {
    pub fn occupation(density: SpatialFn) -> Self {
        PcafEstimator::Occupation { density }
    }

    pub fn epsilon_occupation(location: f64, epsilon: f64) -> Self {
        PcafEstimator::LocalTime {
            location,
            method: LocalTimeMethod::EpsilonOccupation { epsilon },
        }
    }

    pub fn downcrossing(location: f64, epsilon: f64) -> Self {
        PcafEstimator::LocalTime {
            location,
            method: LocalTimeMethod::Downcrossing { epsilon },
        }
    }

    pub fn discounted(alpha: f64, weight: SpatialFn, functional: PcafEstimator) -> Self {
        PcafEstimator::Discounted {
            alpha,
            weight,
            functional: Box::new(functional),
        }
    }

    pub fn composite(parts: Vec<PcafEstimator>) -> Self {
        PcafEstimator::Composite { parts }
    }

    /// The plain functionals this estimator is made of, composites flattened.
    pub fn components(&self) -> Vec<&PcafEstimator> {
        match self {
            PcafEstimator::Composite { parts } => parts.iter().flat_map(|p| p.components()).collect(),
            e => vec![e],
        }
    }

    /// Revuz measure of a plain functional with respect to Lebesgue measure.
    pub fn revuz_measure(&self) -> Option<RevuzMeasure> {
        match self {
            PcafEstimator::Occupation { density } => Some(RevuzMeasure::with_density(density.clone())),
            PcafEstimator::LocalTime { location, .. } => Some(RevuzMeasure::dirac(*location)),
            _ => None,
        }
    }

    fn is_local_time(&self) -> bool {
        matches!(self, PcafEstimator::LocalTime { .. })
    }

    fn leaf(&self, coarse: bool) -> Result<Leaf> {
        let widen = if coarse { 2.0 } else { 1.0 };
        let kind = match self {
            PcafEstimator::Occupation { density } => LeafKind::Occupation(density.clone()),
            PcafEstimator::LocalTime { location, method } => {
                let eps = method.epsilon();
                if !(eps > 0.0) || !eps.is_finite() {
                    return Err(KacError::Argument(format!("epsilon must be positive, got {eps}")));
                }
                match method {
                    LocalTimeMethod::EpsilonOccupation { .. } => LeafKind::Band {
                        a: *location,
                        eps: eps * widen,
                    },
                    LocalTimeMethod::Downcrossing { .. } => LeafKind::Down {
                        a: *location,
                        eps: eps * widen,
                    },
                }
            }
            _ => {
                return Err(KacError::Argument(
                    "discounted and composite estimators cannot be nested here".into(),
                ))
            }
        };
        Ok(Leaf::new(kind))
    }

    fn smallest_epsilon(&self) -> Option<f64> {
        self.components()
            .iter()
            .filter_map(|c| match c {
                PcafEstimator::LocalTime { method, .. } => Some(method.epsilon()),
                PcafEstimator::Discounted { functional, .. } => functional.smallest_epsilon(),
                _ => None,
            })
            .reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n_paths`, plus the horizon
    /// truncation allowance for discounted runs.
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub stream_id: u32,
    /// Time step actually used (first step for discounted runs).
    pub step: f64,
    /// `|mean(ε) - mean(2ε)|` on the same paths when local times are
    /// involved, zero otherwise.
    pub bias_budget: f64,
    #[serde(default)]
    pub truncation: f64,
    pub config_digest: String,
    /// Fingerprint of the estimated quantity, shared with engine results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct RunDigest<'a> {
    scheme: &'a PathScheme,
    estimator: &'a PcafEstimator,
    x: f64,
    t: f64,
    powers: &'a [u32],
    terminal: Option<&'a Terminal>,
    n_paths: u64,
}

fn resolution_warning(eps: Option<f64>, dt: f64, warnings: &mut Vec<String>) {
    if let Some(eps) = eps {
        if eps <= 0.5 * dt.sqrt() {
            warnings.push(format!(
                "epsilon {eps} is below the path resolution {:.3e}; local-time estimates are biased",
                dt.sqrt()
            ));
        }
    }
}

fn merge(parts: &[(Welford, Welford)]) -> (Welford, Welford) {
    let mut a = Welford::default();
    let mut b = Welford::default();
    for (x, y) in parts {
        a.merge(x);
        b.merge(y);
    }
    (a, b)
}

/// Monte Carlo estimate of `E_x[f(X_t) ∏ Aᵢ(t)^{kᵢ}]`, with `Aᵢ` the
/// components of `estimator` and `powers[i] = kᵢ`. After killing the
/// functionals are frozen and `f` takes its cemetery value.
pub fn estimate_moment(
    scheme: &PathScheme,
    estimator: &PcafEstimator,
    x: f64,
    t: f64,
    powers: &[u32],
    terminal: Option<&Terminal>,
    n_paths: u64,
) -> Result<McEstimate> {
    scheme.validate()?;
    scheme.check_start(x)?;
    if n_paths < 2 {
        return Err(KacError::Argument("at least two paths are required".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(KacError::Argument(format!("horizon must be positive, got {t}")));
    }
    let parts = estimator.components();
    if parts.len() != powers.len() {
        return Err(KacError::Argument(format!(
            "{} powers given for {} functionals",
            powers.len(),
            parts.len()
        )));
    }
    let fine: Vec<Leaf> = parts.iter().map(|p| p.leaf(false)).collect::<Result<_>>()?;
    let richardson = parts.iter().zip(powers).any(|(p, &k)| k > 0 && p.is_local_time());
    let coarse: Vec<Leaf> = if richardson {
        parts.iter().map(|p| p.leaf(true)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut warnings = Vec::new();
    let n_steps = ((t / scheme.dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let dt = t / n_steps as f64;
    if (dt - scheme.dt).abs() > 1e-12 * scheme.dt {
        warnings.push(format!("step adjusted from {} to {dt} to divide the horizon", scheme.dt));
    }
    resolution_warning(estimator.smallest_epsilon(), dt, &mut warnings);
    let sqrt_dt = dt.sqrt();
    let default_terminal = Terminal::default();
    let term = terminal.unwrap_or(&default_terminal);

    let blocks: Vec<(Welford, Welford)> = scheme
        .blocks(n_paths)
        .into_par_iter()
        .map(|(b, count)| {
            let mut walker = scheme.walker(b);
            let mut fine = fine.clone();
            let mut coarse = coarse.clone();
            let mut wf = Welford::default();
            let mut wc = Welford::default();
            for _ in 0..count {
                let mut pos = x;
                let mut alive = true;
                fine.iter_mut().chain(coarse.iter_mut()).for_each(|l| l.start(pos));
                for _ in 0..n_steps {
                    match walker.step(pos, dt, sqrt_dt) {
                        Some(y) => {
                            pos = y;
                            for l in fine.iter_mut().chain(coarse.iter_mut()) {
                                l.step(y, dt);
                            }
                        }
                        None => {
                            alive = false;
                            break;
                        }
                    }
                }
                let f = if alive { term.inside.eval(pos) } else { term.cemetery };
                let product = |leaves: &[Leaf]| -> f64 {
                    leaves
                        .iter()
                        .zip(powers)
                        .map(|(l, &k)| l.value.powi(k as i32))
                        .product::<f64>()
                        * f
                };
                let v = product(&fine);
                wf.push(v);
                wc.push(if richardson { product(&coarse) } else { v });
            }
            (wf, wc)
        })
        .collect();
    let (wf, wc) = merge(&blocks);

    let factors: Option<Vec<RevuzMeasure>> = parts
        .iter()
        .zip(powers)
        .map(|(p, &k)| p.revuz_measure().map(|m| vec![m; k as usize]))
        .collect::<Option<Vec<_>>>()
        .map(|v| v.concat());
    let target = factors
        .filter(|f| !f.is_empty())
        .map(|f| target_digest(&scheme.kernel, &f, terminal, x, t));
    Ok(McEstimate {
        mean: wf.mean,
        std_error: wf.std_error(),
        n_paths,
        seed: scheme.seed,
        stream_id: scheme.stream_id,
        step: dt,
        bias_budget: (wf.mean - wc.mean).abs(),
        truncation: 0.0,
        config_digest: sha256_json(&RunDigest {
            scheme,
            estimator,
            x,
            t,
            powers,
            terminal,
            n_paths,
        }),
        target,
        warnings,
    })
}

/// Step sizes of the graded grid for discounted runs: `dt` growing by 1% per
/// step up to the cap, ending at the first grid time past `horizon`.
fn graded_grid(dt: f64, max_step: f64, horizon: f64) -> Vec<f64> {
    let mut steps = Vec::new();
    let mut h = dt;
    let mut s = 0.0;
    while s < horizon {
        steps.push(h);
        s += h;
        h = (h * 1.01).min(max_step);
    }
    steps
}

/// Residual discount factor at the end of a discounted run.
const HORIZON_TAIL: f64 = 5e-7;

/// Monte Carlo estimate of `E_x[∫_0^∞ e^{-αs} f(X_s) dA_s]`.
pub fn estimate_discounted(
    scheme: &PathScheme,
    estimator: &PcafEstimator,
    x: f64,
    n_paths: u64,
) -> Result<McEstimate> {
    let PcafEstimator::Discounted {
        alpha,
        weight,
        functional,
    } = estimator
    else {
        return Err(KacError::Argument("estimate_discounted needs a discounted estimator".into()));
    };
    let mut out = estimate_discounted_many(scheme, functional, weight, &[*alpha], x, n_paths)?;
    let mut est = out.pop().unwrap();
    est.config_digest = sha256_json(&RunDigest {
        scheme,
        estimator,
        x,
        t: f64::INFINITY,
        powers: &[1],
        terminal: None,
        n_paths,
    });
    Ok(est)
}

/// [`estimate_discounted`] for several rates on one set of paths, simulated
/// to the horizon of the smallest rate.
pub fn estimate_discounted_many(
    scheme: &PathScheme,
    functional: &PcafEstimator,
    weight: &SpatialFn,
    alphas: &[f64],
    x: f64,
    n_paths: u64,
) -> Result<Vec<McEstimate>> {
    scheme.validate()?;
    scheme.check_start(x)?;
    if n_paths < 2 {
        return Err(KacError::Argument("at least two paths are required".into()));
    }
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(KacError::Argument("discount rates must be positive".into()));
    }
    let fine = functional.leaf(false)?;
    let richardson = functional.is_local_time();
    let coarse = functional.leaf(true)?;
    let alpha_min = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let horizon = -HORIZON_TAIL.ln() / alpha_min;
    let max_step = scheme.max_step.unwrap_or(20.0 * scheme.dt);
    let steps = graded_grid(scheme.dt, max_step, horizon);
    let mut times = Vec::with_capacity(steps.len() + 1);
    times.push(0.0);
    for h in &steps {
        times.push(times.last().unwrap() + h);
    }
    let roots: Vec<f64> = steps.iter().map(|h| h.sqrt()).collect();
    let discount: Vec<Vec<f64>> = alphas
        .iter()
        .map(|a| times.iter().map(|s| (-a * s).exp()).collect())
        .collect();
    let mut warnings = Vec::new();
    resolution_warning(functional.smallest_epsilon(), max_step, &mut warnings);
    let na = alphas.len();

    let blocks: Vec<Vec<(Welford, Welford)>> = scheme
        .blocks(n_paths)
        .into_par_iter()
        .map(|(b, count)| {
            let mut walker = scheme.walker(b);
            let mut fine = fine.clone();
            let mut coarse = coarse.clone();
            let mut stats = vec![(Welford::default(), Welford::default()); na];
            let mut acc_f = vec![0.0; na];
            let mut acc_c = vec![0.0; na];
            for _ in 0..count {
                let mut pos = x;
                fine.start(pos);
                coarse.start(pos);
                acc_f.iter_mut().chain(acc_c.iter_mut()).for_each(|a| *a = 0.0);
                for (i, (&h, &r)) in steps.iter().zip(&roots).enumerate() {
                    let Some(y) = walker.step(pos, h, r) else { break };
                    let df = fine.step(y, h);
                    let dc = if richardson { coarse.step(y, h) } else { df };
                    if df != 0.0 || dc != 0.0 {
                        let (f0, f1) = (weight.eval(pos), weight.eval(y));
                        for j in 0..na {
                            let w = 0.5 * (discount[j][i] * f0 + discount[j][i + 1] * f1);
                            acc_f[j] += w * df;
                            acc_c[j] += w * dc;
                        }
                    }
                    pos = y;
                }
                for j in 0..na {
                    stats[j].0.push(acc_f[j]);
                    stats[j].1.push(acc_c[j]);
                }
            }
            stats
        })
        .collect();

    let horizon_reached = *times.last().unwrap();
    Ok((0..na)
        .map(|j| {
            let per: Vec<(Welford, Welford)> = blocks.iter().map(|b| b[j]).collect();
            let (wf, wc) = merge(&per);
            let se = wf.std_error();
            let tail = (-alphas[j] * horizon_reached).exp();
            let truncation = tail * (wf.mean.abs() + 3.0 * se);
            let est = PcafEstimator::discounted(alphas[j], weight.clone(), functional.clone());
            McEstimate {
                mean: wf.mean,
                std_error: se + truncation,
                n_paths,
                seed: scheme.seed,
                stream_id: scheme.stream_id,
                step: scheme.dt,
                bias_budget: (wf.mean - wc.mean).abs(),
                truncation,
                config_digest: sha256_json(&RunDigest {
                    scheme,
                    estimator: &est,
                    x,
                    t: f64::INFINITY,
                    powers: &[1],
                    terminal: None,
                    n_paths,
                }),
                target: None,
                warnings: warnings.clone(),
            }
        })
        .collect())
}

/// Largest `|A_{t+s} - A_t - A_s∘θ_t|` over paths and components, with
/// the shifted functional re-accumulated from scratch at time `t`.
pub fn check_additivity(
    scheme: &PathScheme,
    estimator: &PcafEstimator,
    x: f64,
    t: f64,
    s: f64,
    n_paths: u64,
) -> Result<f64> {
    scheme.validate()?;
    scheme.check_start(x)?;
    if !(t > 0.0 && s > 0.0) {
        return Err(KacError::Argument("both times must be positive".into()));
    }
    let leaves: Vec<Leaf> = estimator
        .components()
        .iter()
        .map(|p| p.leaf(false))
        .collect::<Result<_>>()?;
    let n1 = (t / scheme.dt).round().max(1.0) as u64;
    let dt = t / n1 as f64;
    let n2 = (s / dt).round().max(1.0) as u64;
    let sqrt_dt = dt.sqrt();
    let worst = scheme
        .blocks(n_paths)
        .into_par_iter()
        .map(|(b, count)| {
            let mut walker = scheme.walker(b);
            let mut full = leaves.clone();
            let mut shifted = leaves.clone();
            let mut worst: f64 = 0.0;
            for _ in 0..count {
                let mut pos = x;
                full.iter_mut().for_each(|l| l.start(pos));
                let mut snapshot: Option<Vec<f64>> = None;
                shifted.iter_mut().for_each(|l| l.value = 0.0);
                for i in 0..n1 + n2 {
                    if i == n1 {
                        snapshot = Some(full.iter().map(|l| l.value).collect());
                        shifted.iter_mut().for_each(|l| l.start(pos));
                    }
                    let Some(y) = walker.step(pos, dt, sqrt_dt) else { break };
                    pos = y;
                    full.iter_mut().for_each(|l| {
                        l.step(y, dt);
                    });
                    if i >= n1 {
                        shifted.iter_mut().for_each(|l| {
                            l.step(y, dt);
                        });
                    }
                }
                // Killed before t: A_t is the frozen total and the shift adds nothing.
                let snapshot = snapshot.unwrap_or_else(|| full.iter().map(|l| l.value).collect());
                for ((l, s0), r) in full.iter().zip(&snapshot).zip(&shifted) {
                    worst = worst.max((l.value - s0 - r.value).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Writes the first `n` simulated paths as CSV with columns
/// `path,time,state,alive,A1,..,Am`, one row per grid time.
pub fn dump_paths<W: Write>(
    scheme: &PathScheme,
    estimator: &PcafEstimator,
    x: f64,
    t: f64,
    n: u64,
    mut w: W,
) -> Result<()> {
    scheme.validate()?;
    scheme.check_start(x)?;
    let mut leaves: Vec<Leaf> = estimator
        .components()
        .iter()
        .map(|p| p.leaf(false))
        .collect::<Result<_>>()?;
    let n_steps = ((t / scheme.dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let dt = t / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    write!(w, "path,time,state,alive")?;
    for i in 1..=leaves.len() {
        write!(w, ",A{i}")?;
    }
    writeln!(w)?;
    let row = |w: &mut W, p: u64, time: f64, pos: f64, alive: bool, leaves: &[Leaf]| -> Result<()> {
        write!(w, "{p},{time:.16e},{pos:.16e},{}", u8::from(alive))?;
        for l in leaves {
            write!(w, ",{:.16e}", l.value)?;
        }
        writeln!(w)?;
        Ok(())
    };
    let mut p = 0;
    for (b, count) in scheme.blocks(n) {
        let mut walker = scheme.walker(b);
        for _ in 0..count {
            let mut pos = x;
            leaves.iter_mut().for_each(|l| l.start(pos));
            row(&mut w, p, 0.0, pos, true, &leaves)?;
            for i in 1..=n_steps {
                match walker.step(pos, dt, sqrt_dt) {
                    Some(y) => {
                        pos = y;
                        leaves.iter_mut().for_each(|l| {
                            l.step(y, dt);
                        });
                        row(&mut w, p, i as f64 * dt, pos, true, &leaves)?;
                    }
                    None => {
                        row(&mut w, p, i as f64 * dt, pos, false, &leaves)?;
                        break;
                    }
                }
            }
            p += 1;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub difference: f64,
    /// `√(se² + engine error² + bias²)`.
    pub scale: f64,
    pub z: f64,
    pub verdict: Verdict,
}

/// Compares an engine moment against a simulation of the same quantity.
/// Results describing different quantities are refused.
pub fn compare(engine: &MomentResult, mc: &McEstimate) -> Result<Comparison> {
    if let (Some(a), Some(b)) = (&engine.provenance.target, &mc.target) {
        if a != b {
            return Err(KacError::config(format!(
                "engine result {a:.12} and simulation {b:.12} estimate different quantities"
            )));
        }
    }
    Ok(compare_values(engine.value, engine.error_estimate, mc))
}

/// `z = (value - mc.mean) / √(mc.se² + error² + mc.bias²)`; pass iff
/// `|z| ≤ 3`. With no uncertainty at all only exact agreement passes.
pub fn compare_values(value: f64, error: f64, mc: &McEstimate) -> Comparison {
    let difference = value - mc.mean;
    let scale = (mc.std_error.powi(2) + error.powi(2) + mc.bias_budget.powi(2)).sqrt();
    let z = if scale > 0.0 {
        difference / scale
    } else if difference == 0.0 {
        0.0
    } else {
        difference.signum() * f64::INFINITY
    };
    let verdict = if z.abs() <= 3.0 { Verdict::Pass } else { Verdict::Fail };
    Comparison {
        difference,
        scale,
        z,
        verdict,
    }
}

/// `P_x(X_t ∈ D)` estimated with the scheme's killing rule, as the
/// zeroth moment with terminal `1_D` and cemetery value `0`.
pub fn survival_frequency(scheme: &PathScheme, x: f64, t: f64, n_paths: u64) -> Result<McEstimate> {
    if !matches!(scheme.kernel.family(), KernelFamily::KilledBrownian { .. }) {
        return Err(KacError::Argument("survival needs a killed kernel".into()));
    }
    let term = Terminal::new(SpatialFn::constant(1.0), 0.0);
    estimate_moment(
        scheme,
        &PcafEstimator::occupation(SpatialFn::constant(1.0)),
        x,
        t,
        &[0],
        Some(&term),
        n_paths,
    )
}
