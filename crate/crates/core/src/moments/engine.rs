//! The tabulated backward recursion behind every moment formula.
//!
//! `G_0(y, s) = E_y[f(X_s)]` and
//! `G_j(y, s) = ∫_0^s ∫ p_r(y, z) G_{j-1}(z, s - r) μ(dz) dr`.
//! Each `G_{j-1}` is stored on the nodes of the measure it is about to be
//! integrated against: Chebyshev–Lobatto nodes on spatial segments plus the
//! atoms, crossed with Chebyshev–Lobatto nodes in `u = sqrt(s / t)`.

use std::cell::Cell;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::error::{KacError, Result};
use crate::kernels::{terminal_expectation_unchecked, TransitionKernel};
use crate::measures::{Atom, RevuzMeasure};
use crate::quadrature::{adaptive, adaptive_batch, adaptive_with_breaks, ChebyshevGrid, Estimate, QuadratureSpec};
use crate::spatial::SpatialFn;

/// The terminal function `f` on the state space together with `f(Δ)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Terminal {
    pub inside: SpatialFn,
    #[serde(default = "one")]
    pub cemetery: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Terminal {
    fn default() -> Self {
        Terminal {
            inside: SpatialFn::constant(1.0),
            cemetery: 1.0,
        }
    }
}

impl Terminal {
    pub fn new(inside: SpatialFn, cemetery: f64) -> Self {
        Terminal { inside, cemetery }
    }

    pub fn is_zero(&self) -> bool {
        self.inside.is_zero() && self.cemetery == 0.0
    }
}

/// Longest segment, in units of the density's own length scale.
const SEGMENT_WIDTHS: f64 = 4.0;

#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub grid: ChebyshevGrid,
    pub offset: usize,
}

/// Where a measure lives inside the computational window, and how it is
/// discretised.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub segments: Vec<Segment>,
    pub atoms: Vec<Atom>,
    pub density: Option<SpatialFn>,
    pub n_nodes: usize,
}

impl Layout {
    /// Window `x ± padding·sqrt(t)` (widened by the drift), cut to the state
    /// space and to the support of the density, then split at `splits`, at
    /// atoms, at buffer points near truncated ends, and to a maximum length.
    pub fn build(
        kernel: &TransitionKernel,
        mu: &RevuzMeasure,
        splits: &[f64],
        x: f64,
        t: f64,
        quad: &QuadratureSpec,
    ) -> Layout {
        let sd = t.sqrt();
        let space = kernel.space();
        let (mlo, mhi) = kernel.mass_window(t, x, quad.padding_sd);
        let (wlo, whi) = space.clip(mlo.min(x - quad.padding_sd * sd), mhi.max(x + quad.padding_sd * sd));
        let atoms: Vec<Atom> = mu
            .atoms
            .iter()
            .copied()
            .filter(|a| a.location >= wlo && a.location <= whi && space.contains(a.location))
            .collect();
        let density = mu.density.clone().filter(|f| !f.is_zero());
        let mut segments = Vec::new();
        let mut n_nodes = 0;
        if let Some(f) = &density {
            let (flo, fhi) = f.support();
            let lo = wlo.max(flo);
            let hi = whi.min(fhi);
            if hi > lo {
                let mut pts = vec![lo, hi];
                let inside = |p: f64| p > lo && p < hi;
                pts.extend(splits.iter().copied().filter(|&p| inside(p)));
                pts.extend(f.breakpoints().into_iter().filter(|&p| inside(p)));
                pts.extend(atoms.iter().map(|a| a.location).filter(|&p| inside(p)));
                let buffer = quad.buffer_sd * sd;
                if lo == wlo && wlo > space.lower && lo > flo && inside(lo + buffer) {
                    pts.push(lo + buffer);
                }
                if hi == whi && whi < space.upper && hi < fhi && inside(hi - buffer) {
                    pts.push(hi - buffer);
                }
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                let max_len = match f.length_scale() {
                    Some(w) => (quad.max_segment_sd * sd).min(SEGMENT_WIDTHS * w),
                    None => quad.max_segment_sd * sd,
                };
                for w in pts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if !(b - a > 1e-12 * (1.0 + a.abs().max(b.abs()))) {
                        continue;
                    }
                    let pieces = ((b - a) / max_len).ceil().max(1.0) as usize;
                    for i in 0..pieces {
                        let pa = a + (b - a) * i as f64 / pieces as f64;
                        let pb = if i + 1 == pieces {
                            b
                        } else {
                            a + (b - a) * (i + 1) as f64 / pieces as f64
                        };
                        let grid = ChebyshevGrid::new(pa, pb, quad.state_nodes);
                        let len = grid.len();
                        segments.push(Segment { grid, offset: n_nodes });
                        n_nodes += len;
                    }
                }
            }
        }
        Layout {
            segments,
            atoms,
            density,
            n_nodes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.atoms.is_empty()
    }

    /// All spatial nodes followed by the atoms.
    pub fn points(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().flat_map(|s| s.grid.nodes.iter().copied()).collect();
        v.extend(self.atoms.iter().map(|a| a.location));
        v
    }
}

/// `G` sampled on a layout's points crossed with the time nodes.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub times: ChebyshevGrid,
    pub horizon: f64,
    /// Row-major: point index, then time index.
    pub values: Vec<f64>,
    /// `values` with each segment's spatial rows replaced by Chebyshev
    /// coefficients; atom rows are copied as they are.
    pub coefs: Vec<f64>,
    /// Largest absolute error over the table, including interpolation.
    pub abs_error: f64,
    pub scale: f64,
}

impl Table {
    fn nt(&self) -> usize {
        self.times.len()
    }

    fn u_of(&self, s: f64) -> f64 {
        (s / self.horizon).max(0.0).sqrt().min(1.0)
    }

    fn new(times: ChebyshevGrid, horizon: f64, values: Vec<f64>, layout: &Layout, abs_error: f64) -> Table {
        let nt = times.len();
        let mut coefs = values.clone();
        let mut col = Vec::new();
        let mut out = Vec::new();
        for seg in &layout.segments {
            let n = seg.grid.len();
            col.resize(n, 0.0);
            out.resize(n, 0.0);
            for m in 0..nt {
                for i in 0..n {
                    col[i] = values[(seg.offset + i) * nt + m];
                }
                seg.grid.to_coefficients(&col, &mut out);
                for j in 0..n {
                    coefs[(seg.offset + j) * nt + m] = out[j];
                }
            }
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Table {
            times,
            horizon,
            values,
            coefs,
            abs_error,
            scale,
        }
    }

    /// Barycentric weights of the time axis at remaining time `s`.
    pub fn time_weights(&self, s: f64, coef: &mut Vec<f64>) {
        self.times.coefficients(self.u_of(s), coef);
    }

    /// Rows `range` of the table read at the time weights `w`.
    #[inline]
    pub fn rows(&self, w: &[f64], start: usize, out: &mut [f64]) {
        let nt = self.nt();
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.coefs[(start + k) * nt..(start + k + 1) * nt];
            *o = row.iter().zip(w).map(|(v, c)| v * c).sum::<f64>();
        }
    }

    /// Interpolated value at an arbitrary `(z, s)`.
    pub fn eval(&self, layout: &Layout, z: f64, s: f64) -> Option<f64> {
        let mut w = Vec::new();
        self.time_weights(s, &mut w);
        if let Some(i) = layout.atoms.iter().position(|a| a.location == z) {
            let mut v = [0.0];
            self.rows(&w, layout.n_nodes + i, &mut v);
            return Some(v[0]);
        }
        let seg = layout.segments.iter().find(|seg| z >= seg.grid.a && z <= seg.grid.b)?;
        let mut c = vec![0.0; seg.grid.len()];
        self.rows(&w, seg.offset, &mut c);
        Some(seg.grid.clenshaw(&c, z))
    }

    pub fn rel_error(&self) -> f64 {
        if self.scale > 0.0 {
            self.abs_error / self.scale
        } else {
            0.0
        }
    }
}

/// What the next level integrates: a table or a caller-supplied function
/// of `(state, remaining time)`.
pub(crate) enum Source<'a> {
    Table(&'a Table),
    Closure(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

pub(crate) struct Engine<'a> {
    pub kernel: &'a TransitionKernel,
    pub quad: &'a QuadratureSpec,
}

impl Engine<'_> {
    /// `∫_0^s ∫ p_r(y, z) g(z, s - r) μ(dz) dr` with `r = s sin²φ`.
    pub fn kac_point(&self, layout: &Layout, src: &Source, y: f64, s: f64) -> Result<Estimate> {
        if !(s > 0.0) || layout.is_empty() {
            return Ok(Estimate::ZERO);
        }
        let inner_rel = Cell::new(0.0f64);
        let failed = Cell::new(false);
        let integrand = |phi: f64| {
            let (sn, cs) = phi.sin_cos();
            let r = s * sn * sn;
            if !(r > 0.0) {
                return 0.0;
            }
            let rem = s * cs * cs;
            let jac = s * (2.0 * phi).sin();
            let e = self.spatial(layout, src, y, r, rem);
            if !e.value.is_finite() {
                failed.set(true);
                return 0.0;
            }
            if e.value != 0.0 {
                inner_rel.set(inner_rel.get().max(e.error / e.value.abs()));
            }
            jac * e.value
        };
        let e = adaptive(integrand, 0.0, FRAC_PI_2, self.quad.outer());
        if failed.get() || !e.value.is_finite() {
            return Err(KacError::numeric(format!("time integral at y={y}, s={s}"), e.error));
        }
        Ok(Estimate {
            value: e.value,
            error: e.error + inner_rel.get() * e.value.abs(),
        })
    }

    /// `∫ p_r(y, z) g(z, rem) μ(dz)`.
    fn spatial(&self, layout: &Layout, src: &Source, y: f64, r: f64, rem: f64) -> Estimate {
        let kernel = self.kernel;
        match src {
            Source::Table(table) => {
                let row = kernel.row(r, y);
                let mut w = Vec::with_capacity(table.nt());
                table.time_weights(rem, &mut w);
                let mut total = Estimate::ZERO;
                for (i, a) in layout.atoms.iter().enumerate() {
                    let mut v = [0.0];
                    table.rows(&w, layout.n_nodes + i, &mut v);
                    total.value += a.weight * row.at(a.location) * v[0];
                }
                if let Some(f) = &layout.density {
                    let (wlo, whi) = kernel.mass_window(r, y, self.quad.kernel_window_sd);
                    let constant = f.as_constant();
                    let mut c = Vec::new();
                    for seg in &layout.segments {
                        let (a, b) = (seg.grid.a.max(wlo), seg.grid.b.min(whi));
                        if !(b > a) {
                            continue;
                        }
                        c.resize(seg.grid.len(), 0.0);
                        table.rows(&w, seg.offset, &mut c);
                        let panel = |xs: &[f64; 21], out: &mut [f64; 21]| {
                            seg.grid.clenshaw21(&c, xs, out);
                            match constant {
                                Some(k) => {
                                    for (o, &z) in out.iter_mut().zip(xs) {
                                        *o *= k * row.at(z);
                                    }
                                }
                                None => {
                                    for (o, &z) in out.iter_mut().zip(xs) {
                                        *o *= row.at(z) * f.eval(z);
                                    }
                                }
                            }
                        };
                        let tol = self.quad.inner();
                        let breaks = peak_breaks(y, r, a, b);
                        let mut lo = a;
                        for &hi in breaks.iter().chain(std::iter::once(&b)) {
                            total += adaptive_batch(panel, lo, hi, tol);
                            lo = hi;
                        }
                    }
                }
                total
            }
            Source::Closure(g) => {
                let row = kernel.row(r, y);
                let mut total = Estimate::ZERO;
                for a in &layout.atoms {
                    total.value += a.weight * row.at(a.location) * g(a.location, rem);
                }
                if let Some(f) = &layout.density {
                    let (wlo, whi) = kernel.mass_window(r, y, self.quad.kernel_window_sd);
                    for seg in &layout.segments {
                        let (a, b) = (seg.grid.a.max(wlo), seg.grid.b.min(whi));
                        if b > a {
                            total += adaptive_with_breaks(
                                |z| row.at(z) * f.eval(z) * g(z, rem),
                                a,
                                b,
                                &peak_breaks(y, r, a, b),
                                self.quad.inner(),
                            );
                        }
                    }
                }
                total
            }
        }
    }

    fn time_grid(&self) -> ChebyshevGrid {
        ChebyshevGrid::new(0.0, 1.0, self.quad.time_nodes)
    }

    /// `G_0(z, s) = E_z[f(X_s)]` on `target`. The `u = 0` column uses a
    /// vanishing but positive time so jumps of `f` are averaged.
    pub fn terminal_table(&self, target: &Layout, terminal: &Terminal, t: f64) -> Table {
        let times = self.time_grid();
        let pts = target.points();
        let nt = times.len();
        let values: Vec<f64> = (0..pts.len() * nt)
            .into_par_iter()
            .map(|idx| {
                let z = pts[idx / nt];
                let u = times.nodes[idx % nt];
                let s = (t * u * u).max(t * 1e-12);
                terminal_expectation_unchecked(self.kernel, &terminal.inside, terminal.cemetery, s, z, self.quad).value
            })
            .collect();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Table::new(times, t, values, target, self.quad.inner_rel_tol * scale)
    }

    /// Tabulates the next level on `target` by integrating `src` (living on
    /// `layout`) against the layout's measure.
    pub fn level_table(&self, layout: &Layout, src: &Table, target: &Layout, x: f64, t: f64) -> Result<Table> {
        let times = self.time_grid();
        let pts = target.points();
        let nt = times.len();
        let source = Source::Table(src);
        let cells: Vec<Result<Estimate>> = (0..pts.len() * nt)
            .into_par_iter()
            .map(|idx| {
                let z = pts[idx / nt];
                let u = times.nodes[idx % nt];
                self.kac_point(layout, &source, z, t * u * u)
            })
            .collect();
        let mut values = Vec::with_capacity(cells.len());
        let mut abs_error: f64 = 0.0;
        for c in cells {
            let e = c?;
            values.push(e.value);
            abs_error = abs_error.max(e.error);
        }
        let mut table = Table::new(times, t, values, target, abs_error);
        table.abs_error += self.probe(layout, &source, target, &table, x)?;
        Ok(table)
    }

    /// Largest difference between direct evaluation and interpolation at
    /// off-grid probes placed near the start point.
    fn probe(&self, layout: &Layout, source: &Source, target: &Layout, table: &Table, x: f64) -> Result<f64> {
        let n = self.quad.interpolation_probes;
        if n == 0 || target.is_empty() {
            return Ok(0.0);
        }
        let nt = table.times.len();
        let mut worst: f64 = 0.0;
        for p in 0..n {
            let m = ((p + 1) * (nt - 1) / (n + 1)).min(nt - 2);
            let u = 0.5 * (table.times.nodes[m] + table.times.nodes[m + 1]);
            let s = table.horizon * u * u;
            let z = if let Some(seg) = target
                .segments
                .iter()
                .min_by(|a, b| dist(a, x).total_cmp(&dist(b, x)))
            {
                let k = seg.grid.len();
                let i = ((p + 1) * (k - 1) / (n + 1)).min(k - 2);
                0.5 * (seg.grid.nodes[i] + seg.grid.nodes[i + 1])
            } else {
                target.atoms[p % target.atoms.len()].location
            };
            let direct = self.kac_point(layout, source, z, s)?.value;
            if let Some(interp) = table.eval(target, z, s) {
                worst = worst.max((direct - interp).abs());
            }
        }
        Ok(worst)
    }
}

/// A break at the kernel peak only pays off when the peak is narrow compared
/// with the interval.
fn peak_breaks(y: f64, r: f64, a: f64, b: f64) -> Vec<f64> {
    if y > a && y < b && 8.0 * r.sqrt() < b - a {
        vec![y]
    } else {
        Vec::new()
    }
}

fn dist(seg: &Segment, x: f64) -> f64 {
    if x < seg.grid.a {
        seg.grid.a - x
    } else if x > seg.grid.b {
        x - seg.grid.b
    } else {
        0.0
    }
}

/// Outcome of one ordered recursion.
pub(crate) struct Recursion {
    /// `G_j(x, t)` for `j = 1..=k` (only the last entry when prefixes were
    /// not requested).
    pub values: Vec<Estimate>,
    pub nodes_per_table: Vec<usize>,
    pub profile: Option<Vec<ProfilePoint>>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProfilePoint {
    pub state: f64,
    pub remaining_time: f64,
    pub value: f64,
}

/// Runs `G_0 → G_k` for the ordered measures `mus` (`mus[0]` acts first in
/// time, so it is integrated last).
pub(crate) fn ordered_recursion(
    kernel: &TransitionKernel,
    mus: &[&RevuzMeasure],
    terminal: &Terminal,
    x: f64,
    t: f64,
    quad: &QuadratureSpec,
    prefixes: bool,
) -> Result<Recursion> {
    let k = mus.len();
    let mut splits: Vec<f64> = Vec::new();
    for mu in mus {
        splits.extend(mu.atoms.iter().map(|a| a.location));
        if let Some(f) = &mu.density {
            splits.extend(f.breakpoints());
        }
    }
    splits.extend(terminal.inside.breakpoints());
    splits.sort_by(f64::total_cmp);
    splits.dedup();
    // Level j (1-based) integrates against mus[k - j].
    let layouts: Vec<Layout> = (1..=k).map(|j| Layout::build(kernel, mus[k - j], &splits, x, t, quad)).collect();
    let engine = Engine { kernel, quad };
    let mut nodes_per_table = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut table = engine.terminal_table(&layouts[0], terminal, t);
    nodes_per_table.push(table.values.len());
    let mut rel = table.rel_error();
    for j in 1..=k {
        let layout = &layouts[j - 1];
        if prefixes || j == k {
            let e = engine.kac_point(layout, &Source::Table(&table), x, t)?;
            values.push(Estimate {
                value: e.value.max(0.0),
                error: e.error + (rel * e.value).abs(),
            });
        }
        if j < k {
            let next = engine.level_table(layout, &table, &layouts[j], x, t)?;
            nodes_per_table.push(next.values.len());
            rel += next.rel_error();
            table = next;
        }
    }
    let profile = quad.keep_profile.then(|| {
        let layout = &layouts[k - 1];
        let pts = layout.points();
        let nt = table.times.len();
        table
            .values
            .iter()
            .enumerate()
            .map(|(idx, v)| ProfilePoint {
                state: pts[idx / nt],
                remaining_time: t * table.times.nodes[idx % nt].powi(2),
                value: *v,
            })
            .collect()
    });
    Ok(Recursion {
        values,
        nodes_per_table,
        profile,
    })
}
