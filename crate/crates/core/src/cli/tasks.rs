use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExpBoundTask, KatoTask, KernelCheckTask, LocalTimeKind, McConfig, MomentTask, RunConfig, TaskSpec};
use super::report::{Report, ReportRow};
use crate::error::{KacError, Result};
use crate::kernels::{KernelCheckReport, TransitionKernel};
use crate::measures::{default_alpha_ladder, default_kato_grid, kato_classify, KatoReport, RevuzMeasure};
use crate::moments::{evaluate, exponential_bound, killed_variant, MomentRequest, MomentResult, OrderMode, PartProcess};
use crate::montecarlo::{compare, estimate_moment, LocalTimeMethod, PathScheme, PcafEstimator, Verdict};
use crate::quadrature::QuadratureSpec;

/// Residual threshold for a passing `kernel-check`.
pub const KERNEL_CHECK_TOL: f64 = 1e-6;

/// Kernels checked when a `kernel-check` task names none.
pub fn builtin_kernels() -> Vec<TransitionKernel> {
    vec![
        TransitionKernel::brownian(),
        TransitionKernel::brownian_drift(1.0).expect("finite drift"),
        TransitionKernel::reflected_brownian(),
        TransitionKernel::killed_brownian(-1.0, 1.0).expect("nonempty interval"),
    ]
}

/// Runs the tasks at `indices` (declaration order is kept in the report).
pub fn execute(config: &RunConfig, indices: &[usize]) -> Report {
    let quad = config.quadrature();
    let rows = indices
        .par_iter()
        .map(|&i| run_task(config, &quad, i))
        .collect();
    Report {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config_digest: config.digest(),
        config: config.clone(),
        rows,
    }
}

fn run_task(config: &RunConfig, quad: &QuadratureSpec, index: usize) -> ReportRow {
    let task = &config.tasks[index];
    let mut row = ReportRow::new(task.id(index), task.op());
    let start = Instant::now();
    let outcome = match task {
        TaskSpec::KernelCheck(t) => kernel_check(config, t, quad, &mut row),
        TaskSpec::Kato(t) => kato(config, t, quad, &mut row),
        TaskSpec::Moment(t) => moment(config, t, quad, &mut row).map(|_| ()),
        TaskSpec::McCompare(t) => mc_compare(config, t, quad, &mut row),
        TaskSpec::ExpBound(t) => exp_bound(config, t, quad, &mut row),
    };
    if let Err(e) = outcome {
        row.verdict = Verdict::Fail;
        row.detail = e.to_string();
    }
    row.wall_time_s = start.elapsed().as_secs_f64();
    row
}

fn kernel(config: &RunConfig, name: &str) -> Result<TransitionKernel> {
    config
        .kernels
        .get(name)
        .copied()
        .ok_or_else(|| KacError::config(format!("undeclared kernel \"{name}\"")))
}

fn measure<'a>(config: &'a RunConfig, name: &str) -> Result<&'a RevuzMeasure> {
    config
        .measures
        .get(name)
        .ok_or_else(|| KacError::config(format!("undeclared measure \"{name}\"")))
}

fn kernel_check(config: &RunConfig, task: &KernelCheckTask, quad: &QuadratureSpec, row: &mut ReportRow) -> Result<()> {
    let kernels = match &task.kernel {
        Some(name) => vec![kernel(config, name)?],
        None => builtin_kernels(),
    };
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for k in &kernels {
        let r = KernelCheckReport::run(k, quad)?;
        let m = r.max_residual();
        worst = worst.max(m);
        parts.push(format!("{}: {m:.3e}", r.kernel));
    }
    row.engine_value = Some(worst);
    row.verdict = if worst < KERNEL_CHECK_TOL { Verdict::Pass } else { Verdict::Fail };
    row.detail = parts.join("; ");
    Ok(())
}

fn classify(
    kernel: &TransitionKernel,
    mu: &RevuzMeasure,
    alphas: Option<&Vec<f64>>,
    grid: Option<&Vec<f64>>,
    quad: &QuadratureSpec,
) -> Result<KatoReport> {
    let alphas = alphas.cloned().unwrap_or_else(default_alpha_ladder);
    let grid = grid.cloned().unwrap_or_else(|| default_kato_grid(kernel, mu));
    kato_classify(kernel, mu, &alphas, &grid, quad)
}

fn kato(config: &RunConfig, task: &KatoTask, quad: &QuadratureSpec, row: &mut ReportRow) -> Result<()> {
    let k = kernel(config, &task.kernel)?;
    let report = classify(&k, measure(config, &task.measure)?, task.alphas.as_ref(), task.grid.as_ref(), quad)?;
    row.engine_value = report.alpha_star;
    let curve: Vec<String> = report.sup_curve.iter().map(|(a, s)| format!("{a:.6e}:{s:.6e}")).collect();
    row.detail = format!(
        "in_extended_kato={} s00={} sup_curve=[{}]",
        report.in_extended_kato,
        report.s00_verdict,
        curve.join(" ")
    );
    Ok(())
}

fn exp_bound(config: &RunConfig, task: &ExpBoundTask, quad: &QuadratureSpec, row: &mut ReportRow) -> Result<()> {
    let k = kernel(config, &task.kernel)?;
    let mu = measure(config, &task.measure)?;
    let kato = classify(&k, mu, task.alphas.as_ref(), None, quad)?;
    let report = exponential_bound(&k, mu, &kato, task.x, &task.t_values, task.k_max, quad)?;
    let last = report.rows.last().ok_or_else(|| KacError::Argument("no times".into()))?;
    row.engine_value = Some(last.series_value);
    row.engine_error = Some(last.tail_bound);
    let ok = report.rows.iter().all(|r| r.series_value + r.tail_bound <= r.bound);
    row.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("t={}: series={:.10e} bound={:.10e}", r.t, r.series_value, r.bound))
        .collect();
    row.detail = format!(
        "alpha={:.6e} s_alpha={:.6e} c={:.6e}; {}",
        report.alpha,
        report.s_alpha,
        report.c,
        rows.join("; ")
    );
    Ok(())
}

/// The engine request a moment task describes, with its killed domain.
pub fn moment_request(config: &RunConfig, task: &MomentTask) -> Result<(MomentRequest, Option<PartProcess>)> {
    let k = kernel(config, &task.kernel)?;
    let mut measures = Vec::new();
    for name in &task.measures {
        measures.push(measure(config, name)?.clone());
    }
    if let Some(power) = task.k {
        let mu = measures.pop().ok_or_else(|| KacError::config("k needs one measure"))?;
        measures = vec![mu; power];
    }
    let all_equal = task.k.is_some() || task.measures.windows(2).all(|w| w[0] == w[1]);
    let mode = task.mode.unwrap_or(if all_equal {
        OrderMode::IdenticalPower
    } else {
        OrderMode::PermutationSum
    });
    let req = MomentRequest {
        kernel: k,
        measures,
        terminal: task.terminal.clone(),
        x: task.x,
        t: task.t,
        mode,
    };
    let domain = task.killed_domain.map(|[l, u]| PartProcess::new(l, u)).transpose()?;
    Ok((req, domain))
}

fn moment(config: &RunConfig, task: &MomentTask, quad: &QuadratureSpec, row: &mut ReportRow) -> Result<MomentResult> {
    let (req, domain) = moment_request(config, task)?;
    let result = match &domain {
        Some(d) => killed_variant(&req, d, quad)?,
        None => evaluate(&req, quad)?,
    };
    row.engine_value = Some(result.value);
    row.engine_error = Some(result.error_estimate);
    row.detail = format!(
        "{} k={} kernel={}",
        result.provenance.operation, result.provenance.k, result.provenance.kernel
    );
    Ok(result)
}

/// The simulated functional for one measure: occupation for a pure
/// density, local time for a unit atom.
pub fn estimator_for(mu: &RevuzMeasure, mc: &McConfig, epsilon: f64) -> Result<PcafEstimator> {
    match (&mu.density, mu.atoms.as_slice()) {
        (Some(f), []) => Ok(PcafEstimator::occupation(f.clone())),
        (None, [a]) if a.weight == 1.0 => Ok(PcafEstimator::LocalTime {
            location: a.location,
            method: match mc.method {
                LocalTimeKind::EpsilonOccupation => LocalTimeMethod::EpsilonOccupation { epsilon },
                LocalTimeKind::Downcrossing => LocalTimeMethod::Downcrossing { epsilon },
            },
        }),
        _ => Err(KacError::config(
            "mc-compare simulates pure densities and single unit atoms only",
        )),
    }
}

fn mc_compare(config: &RunConfig, task: &MomentTask, quad: &QuadratureSpec, row: &mut ReportRow) -> Result<()> {
    let mc = config.mc.as_ref().ok_or_else(|| KacError::config("mc-compare needs an mc block"))?;
    let engine = moment(config, task, quad, row)?;
    let (req, domain) = moment_request(config, task)?;
    // Distinct measures in order of appearance, with multiplicities.
    let mut groups: Vec<(&RevuzMeasure, u32)> = Vec::new();
    for mu in &req.measures {
        match groups.iter_mut().find(|g| g.0 == mu) {
            Some(g) => g.1 += 1,
            None => groups.push((mu, 1)),
        }
    }
    let epsilon = task.epsilon.unwrap_or(mc.epsilon);
    let mut parts = Vec::new();
    for (mu, _) in &groups {
        parts.push(estimator_for(mu, mc, epsilon)?);
    }
    let powers: Vec<u32> = groups.iter().map(|g| g.1).collect();
    let estimator = if parts.len() == 1 {
        parts.pop().expect("one part")
    } else {
        PcafEstimator::composite(parts)
    };
    let sim_kernel = match &domain {
        Some(d) => d.kernel(&req.kernel)?,
        None => req.kernel,
    };
    let scheme = PathScheme::new(sim_kernel, task.dt.unwrap_or(mc.dt), mc.seed)?
        .with_killing(mc.killing)
        .with_stream(mc.stream_id);
    let n_paths = task.n_paths.unwrap_or(mc.n_paths);
    let est = estimate_moment(&scheme, &estimator, req.x, req.t, &powers, req.terminal.as_ref(), n_paths)?;
    let cmp = compare(&engine, &est)?;
    row.mc_mean = Some(est.mean);
    row.mc_std_error = Some(est.std_error);
    row.z_score = Some(cmp.z);
    row.verdict = cmp.verdict;
    row.detail = format!(
        "{}; n_paths={} seed={} stream={} dt={} bias_budget={:.3e}",
        row.detail, est.n_paths, est.seed, est.stream_id, est.step, est.bias_budget
    );
    for w in &est.warnings {
        row.detail.push_str("; warning: ");
        row.detail.push_str(w);
    }
    Ok(())
}
