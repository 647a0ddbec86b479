//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's own quadrature or special functions.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

/// Tanh-sinh rule on `[a, b]` with step `h`; tolerant of integrable endpoint
/// singularities.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, h: f64) -> f64 {
    let c = 0.5 * (b - a);
    let n = (4.0 / h).ceil() as i64;
    let mut sum = 0.0;
    for k in -n..=n {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        if w < 1e-300 {
            continue;
        }
        let x = if u < 0.0 {
            a + c * 2.0 / (1.0 + (-2.0 * u).exp())
        } else {
            b - c * 2.0 / (1.0 + (2.0 * u).exp())
        };
        if x <= a || x >= b {
            continue;
        }
        sum += w * f(x);
    }
    c * h * sum
}

pub fn gauss(t: f64, z: f64) -> f64 {
    (-z * z / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Standard normal CDF by direct quadrature of the density.
pub fn phi_cdf(z: f64) -> f64 {
    let half = tanh_sinh(|s| gauss(1.0, s), 0.0, z.abs(), 1.0 / 64.0);
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// `P_x(τ_{(l,u)} > t)` for Brownian motion, eigenfunction series.
pub fn dirichlet_survival(l: f64, u: f64, t: f64, x: f64) -> f64 {
    let len = u - l;
    (1..2000)
        .step_by(2)
        .map(|k| {
            let k = k as f64;
            4.0 / (k * PI) * (k * PI * (x - l) / len).sin() * (-k * k * PI * PI * t / (2.0 * len * len)).exp()
        })
        .sum()
}

/// Dirichlet heat kernel on `(l, u)`, eigenfunction series.
pub fn dirichlet_density(l: f64, u: f64, t: f64, x: f64, y: f64) -> f64 {
    let len = u - l;
    (1..4000)
        .map(|k| {
            let k = k as f64;
            2.0 / len
                * (k * PI * (x - l) / len).sin()
                * (k * PI * (y - l) / len).sin()
                * (-k * k * PI * PI * t / (2.0 * len * len)).exp()
        })
        .sum()
}

/// `E_0[L^0_{t∧τ}]` for `D = (-1, 1)`, `t = 1`:
/// `∫_0^1 p^D_s(0,0) ds = Σ_odd 8/(k²π²) (1 - e^{-k²π²/8})`, with the
/// undamped part summed in closed form (`Σ_odd 8/(k²π²) = 1`).
pub fn killed_local_time_unit() -> f64 {
    let damped: f64 = (1..400)
        .step_by(2)
        .map(|k| {
            let k = k as f64;
            8.0 / (k * k * PI * PI) * (-k * k * PI * PI / 8.0).exp()
        })
        .sum();
    1.0 - damped
}

/// `E_x[A_t^k]` for an atomic Revuz measure under Brownian motion by direct
/// quadrature over the ordered simplex `0 < t₁ < … < t_k < t`, `k ≤ 3`.
pub fn simplex_moment(atoms: &[(f64, f64)], x: f64, t: f64, k: usize, h: f64) -> f64 {
    assert!((1..=3).contains(&k));
    let mut total = 0.0;
    let n = atoms.len();
    let mut idx = vec![0usize; k];
    loop {
        let seq: Vec<(f64, f64)> = idx.iter().map(|&i| atoms[i]).collect();
        let weight: f64 = seq.iter().map(|a| a.1).product();
        total += weight * chain(&seq, x, t, h);
        let mut j = 0;
        loop {
            if j == k {
                let kf: f64 = (1..=k).map(|i| i as f64).product();
                return kf * total;
            }
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// `∫_{gaps} Π p_{gᵢ}(a_{i-1}, a_i)` with `a₀ = x` and `Σ gᵢ ≤ t`.
fn chain(seq: &[(f64, f64)], from: f64, remaining: f64, h: f64) -> f64 {
    let Some((&(a, _), rest)) = seq.split_first() else {
        return 1.0;
    };
    tanh_sinh(
        |w| {
            let g = remaining * w;
            remaining * gauss(g, a - from) * chain(rest, a, remaining - g, h)
        },
        0.0,
        1.0,
        h,
    )
}
