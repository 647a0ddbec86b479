//! One-dimensional quadrature and interpolation primitives.
//!
//! Everything the engine integrates is reduced to nested calls of
//! [`adaptive`], a globally adaptive 21-point Gauss–Kronrod rule, and every
//! tabulated function is stored on Chebyshev–Lobatto nodes and read back
//! through barycentric interpolation.

use serde::{Deserialize, Serialize};

/// A quadrature value together with its a-posteriori error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        error: 0.0,
    };

    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Estimate {
            value: self.value * c,
            error: self.error * c.abs(),
        }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, o: Estimate) {
        self.value += o.value;
        self.error += o.error;
    }
}

impl std::iter::Sum for Estimate {
    fn sum<I: Iterator<Item = Estimate>>(iter: I) -> Self {
        iter.fold(Estimate::ZERO, |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_subdivisions: 200,
        }
    }
}

/// Grids, truncation radii and tolerances governing every integral the
/// library computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Relative tolerance of each outer (time) adaptive integral.
    pub panel_rel_tol: f64,
    /// Relative tolerance of inner (space) integrals.
    pub inner_rel_tol: f64,
    /// Absolute floor for both; kept tiny so decisions are scale invariant.
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Chebyshev intervals along the remaining-time axis u = sqrt(s/t).
    pub time_nodes: usize,
    /// Chebyshev intervals per spatial segment.
    pub state_nodes: usize,
    /// Half-width of the spatial window around the start point, in units of sqrt(t).
    pub padding_sd: f64,
    /// Width of the outermost buffer segment of the window, in units of sqrt(t).
    pub buffer_sd: f64,
    /// Longest spatial segment, in units of sqrt(t).
    pub max_segment_sd: f64,
    /// Kernel mass window used for inner spatial integrals, in standard deviations.
    pub kernel_window_sd: f64,
    /// Relative size of the discarded image-series tail.
    pub image_tail: f64,
    /// Truncation level e^(-alpha T) of Laplace integrals.
    pub laplace_tail: f64,
    /// Points per axis of the default checker lattice.
    pub lattice_points: usize,
    /// Largest k accepted by the permutation-sum formula.
    pub factorial_cap: usize,
    /// Off-grid probes per table used to estimate interpolation error.
    pub interpolation_probes: usize,
    /// Keep the last tabulated recursion level in the result.
    pub keep_profile: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            panel_rel_tol: 1e-9,
            inner_rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_subdivisions: 200,
            time_nodes: 14,
            state_nodes: 12,
            padding_sd: 10.0,
            buffer_sd: 3.0,
            max_segment_sd: 7.0,
            kernel_window_sd: 12.0,
            image_tail: 1e-14,
            laplace_tail: 1e-14,
            lattice_points: 9,
            factorial_cap: 6,
            interpolation_probes: 2,
            keep_profile: false,
        }
    }
}

impl QuadratureSpec {
    pub fn outer(&self) -> Tolerance {
        Tolerance {
            abs: self.abs_tol,
            rel: self.panel_rel_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }

    pub fn inner(&self) -> Tolerance {
        Tolerance {
            abs: self.abs_tol,
            rel: self.inner_rel_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_024_832_231,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Evaluates a panel in one batch: `xs[0]` is the centre, `xs[2j + 1]` and
/// `xs[2j + 2]` are `centre ∓ half·XGK[j]`.
fn kronrod21<F: Fn(&[f64; 21], &mut [f64; 21])>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut xs = [center; 21];
    for j in 0..10 {
        let dx = half * XGK[j];
        xs[2 * j + 1] = center - dx;
        xs[2 * j + 2] = center + dx;
    }
    let mut fx = [0.0; 21];
    f(&xs, &mut fx);
    let fc = fx[0];
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    for j in 0..10 {
        let (f1, f2) = (fx[2 * j + 1], fx[2 * j + 2]);
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fx[2 * j + 1] - mean).abs() + (fx[2 * j + 2] - mean).abs());
    }
    let result = resk * half;
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    (result, err)
}

/// Globally adaptive Gauss–Kronrod integration of `f` over the finite
/// interval `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// error meets `tol` or the subdivision budget is spent; in the latter case
/// the returned error reflects what was achieved.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    adaptive_batch(
        |xs: &[f64; 21], out: &mut [f64; 21]| {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = f(x);
            }
        },
        a,
        b,
        tol,
    )
}

/// [`adaptive`] for integrands that evaluate a whole 21-point panel at once.
pub fn adaptive_batch<F: Fn(&[f64; 21], &mut [f64; 21])>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    if !(b > a) {
        return Estimate::ZERO;
    }
    let (v, e) = kronrod21(&f, a, b);
    let mut panels: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    while total_err > tol.abs.max(tol.rel * total.abs()) && panels.len() < tol.max_subdivisions {
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (pa, pb, pv, pe) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // Interval exhausted at machine precision.
            panels.push((pa, pb, pv, pe));
            break;
        }
        let (v1, e1) = kronrod21(&f, pa, mid);
        let (v2, e2) = kronrod21(&f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
        // Re-sum rather than update in place so the result does not depend on
        // the order in which panels were refined.
        panels.sort_by(|x, y| x.0.total_cmp(&y.0));
        total = panels.iter().map(|p| p.2).sum();
        total_err = panels.iter().map(|p| p.3).sum();
    }
    Estimate {
        value: total,
        error: total_err,
    }
}

/// Integrates over `[a, b]`, splitting at every interior breakpoint.
pub fn adaptive_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Estimate {
    if !(b > a) {
        return Estimate::ZERO;
    }
    let mut pts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    pts.push(a);
    pts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|w| adaptive(&f, w[0], w[1], tol))
        .sum()
}

/// Integrates over an interval whose ends may be infinite. Infinite pieces
/// are mapped onto `[0, 1)` by `x = c ± v / (1 - v)`.
pub fn integrate_line<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Estimate {
    if !(b > a) {
        return Estimate::ZERO;
    }
    let mut finite: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    if a.is_finite() {
        finite.push(a);
    }
    if b.is_finite() {
        finite.push(b);
    }
    if finite.is_empty() {
        finite.push(0.0);
    }
    finite.sort_by(f64::total_cmp);
    finite.dedup();
    let lo = finite[0];
    let hi = *finite.last().unwrap();
    let mut total = adaptive_with_breaks(&f, lo, hi, &finite, tol);
    if b == f64::INFINITY {
        total += adaptive(
            |v: f64| {
                let w = 1.0 - v;
                f(hi + v / w) / (w * w)
            },
            0.0,
            1.0,
            tol,
        );
    }
    if a == f64::NEG_INFINITY {
        total += adaptive(
            |v: f64| {
                let w = 1.0 - v;
                f(lo - v / w) / (w * w)
            },
            0.0,
            1.0,
            tol,
        );
    }
    total
}

/// Chebyshev–Lobatto nodes on `[a, b]` with their barycentric weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevGrid {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevGrid {
    /// `n` intervals, hence `n + 1` nodes, listed in increasing order.
    pub fn new(a: f64, b: f64, n: usize) -> Self {
        let n = n.max(1);
        let nodes = (0..=n)
            .map(|i| {
                let c = (std::f64::consts::PI * i as f64 / n as f64).cos();
                let x = 0.5 * (a + b) - 0.5 * (b - a) * c;
                // Pin the ends exactly.
                if i == 0 {
                    a
                } else if i == n {
                    b
                } else {
                    x
                }
            })
            .collect();
        let weights = (0..=n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                if i == 0 || i == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        ChebyshevGrid {
            a,
            b,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric coefficients `l_i(x)` with `sum_i l_i(x) f_i` the
    /// interpolant at `x`.
    pub fn coefficients(&self, x: f64, out: &mut Vec<f64>) {
        out.clear();
        if let Some(hit) = self.nodes.iter().position(|&n| n == x) {
            out.resize(self.nodes.len(), 0.0);
            out[hit] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for (n, w) in self.nodes.iter().zip(&self.weights) {
            let c = w / (x - n);
            out.push(c);
            denom += c;
        }
        for c in out.iter_mut() {
            *c /= denom;
        }
    }

    /// Chebyshev coefficients `c_j` of the interpolant through `values`, so
    /// that it equals `Σ_j c_j T_j(ξ)` with `ξ` the point mapped to `[-1, 1]`.
    pub fn to_coefficients(&self, values: &[f64], out: &mut [f64]) {
        let n = self.nodes.len() - 1;
        if n == 0 {
            out[0] = values[0];
            return;
        }
        let pi_n = std::f64::consts::PI / n as f64;
        for (j, c) in out.iter_mut().enumerate().take(n + 1) {
            let mut acc = 0.0;
            for (i, v) in values.iter().enumerate().take(n + 1) {
                // Node i sits at ξ = -cos(πi/n), where T_j = (-1)^j cos(jπi/n).
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * v * ((j * i % (2 * n)) as f64 * pi_n).cos();
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let scale = if j == 0 || j == n { 1.0 } else { 2.0 };
            *c = sign * scale * acc / n as f64;
        }
    }

    /// Evaluates `Σ_j c_j T_j` at `x` by Clenshaw's recurrence.
    #[inline]
    pub fn clenshaw(&self, coefs: &[f64], x: f64) -> f64 {
        let xi = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let two_xi = 2.0 * xi;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in coefs[1..].iter().rev() {
            let b0 = c + two_xi * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        coefs[0] + xi * b1 - b2
    }

    /// [`ChebyshevGrid::clenshaw`] at 21 points in lockstep.
    #[inline]
    pub fn clenshaw21(&self, coefs: &[f64], xs: &[f64; 21], out: &mut [f64; 21]) {
        let scale = 2.0 / (self.b - self.a);
        let shift = (self.a + self.b) / (self.b - self.a);
        let mut xi = [0.0; 21];
        for (x, &z) in xi.iter_mut().zip(xs) {
            *x = z * scale - shift;
        }
        let mut b1 = [0.0; 21];
        let mut b2 = [0.0; 21];
        for &c in coefs[1..].iter().rev() {
            for p in 0..21 {
                let b0 = c + 2.0 * xi[p] * b1[p] - b2[p];
                b2[p] = b1[p];
                b1[p] = b0;
            }
        }
        for p in 0..21 {
            out[p] = coefs[0] + xi[p] * b1[p] - b2[p];
        }
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((n, w), v) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = x - n;
            if d == 0.0 {
                return *v;
            }
            let c = w / d;
            num += c * v;
            den += c;
        }
        num / den
    }
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
