mod common;

use kacmoment::kernels::*;
use kacmoment::moments::Terminal;
use kacmoment::quadrature::QuadratureSpec;
use kacmoment::spatial::SpatialFn;
use kacmoment::KacError;
use proptest::prelude::*;

use common::*;

fn builtins() -> Vec<TransitionKernel> {
    vec![
        TransitionKernel::brownian(),
        TransitionKernel::brownian_drift(0.6).unwrap(),
        TransitionKernel::reflected_brownian(),
        TransitionKernel::killed_brownian(-1.0, 1.5).unwrap(),
    ]
}

/// Maps a unit coordinate into the kernel's state space interior.
fn place(kernel: &TransitionKernel, u: f64) -> f64 {
    let s = kernel.space();
    match (s.lower.is_finite(), s.upper.is_finite()) {
        (false, false) => 6.0 * u - 3.0,
        (true, false) => s.lower + 3.0 * u,
        _ => s.lower + (s.upper - s.lower) * (0.01 + 0.98 * u),
    }
}

#[test]
fn killed_density_matches_eigenfunction_series() {
    let k = TransitionKernel::killed_brownian(0.0, 1.0).unwrap();
    let oracle = dirichlet_density(0.0, 1.0, 0.1, 0.5, 0.5);
    assert!((k.eval_density(0.1, 0.5, 0.5).unwrap() - oracle).abs() < 1e-12);
    for &(t, x, y) in &[(0.02, 0.3, 0.35), (0.7, 0.1, 0.8), (2.0, 0.5, 0.2)] {
        let want = dirichlet_density(0.0, 1.0, t, x, y);
        assert!((k.eval_density(t, x, y).unwrap() - want).abs() < 1e-10 * want.max(1e-3));
    }
}

#[test]
fn survival_examples() {
    let k = TransitionKernel::killed_brownian(0.0, 1.0).unwrap();
    let s = survival_mass(&k, 0.5, 0.5).unwrap();
    assert!((s - dirichlet_survival(0.0, 1.0, 0.5, 0.5)).abs() < 1e-12);
    assert!((survival_mass(&k, 1e-6, 0.5).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(survival_mass(&TransitionKernel::brownian(), 3.0, -2.0).unwrap(), 1.0);
    let ext = ExtendedKernel::new(k);
    let mut last = 0.0;
    for t in [0.01, 0.1, 0.3, 1.0, 3.0] {
        let m = ext.cemetery_mass(t, 0.3).unwrap();
        assert!(m >= last && (0.0..=1.0).contains(&m));
        last = m;
    }
}

#[test]
fn terminal_expectation_examples() {
    let q = QuadratureSpec::default();
    for k in builtins() {
        let v = terminal_expectation(&k, &SpatialFn::constant(1.0), 1.0, 0.7, place(&k, 0.4), &q).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }
    let lin = SpatialFn::Linear { slope: 1.0, intercept: 0.0 };
    let v = terminal_expectation(&TransitionKernel::brownian(), &lin, 0.0, 1.3, 0.4, &q).unwrap();
    assert!((v.value - 0.4).abs() < 1e-9);
    let killed = TransitionKernel::killed_brownian(0.0, 1.0).unwrap();
    let t = Terminal::new(SpatialFn::constant(1.0), 0.0);
    let v = terminal_expectation(&killed, &t.inside, t.cemetery, 0.5, 0.5, &q).unwrap();
    assert!((v.value - dirichlet_survival(0.0, 1.0, 0.5, 0.5)).abs() < 1e-12);
}

#[test]
fn potential_density_examples() {
    let bm = TransitionKernel::brownian();
    assert!((potential_density(&bm, 0.5, 0.3, 0.3).unwrap() - 1.0).abs() < 1e-15);
    let want = 0.5 * (-2.0f64).exp();
    assert!((potential_density(&bm, 2.0, 0.0, 1.0).unwrap() - want).abs() < 1e-15);
    // Laplace integral, t = u², evaluated independently.
    let numeric = tanh_sinh(|w| {
        let u = w / (1.0 - w);
        let t = u * u;
        (-2.0 * t).exp() * gauss(t, 1.0) * 2.0 * u / (1.0 - w).powi(2)
    }, 0.0, 1.0, 1.0 / 64.0);
    assert!((numeric - want).abs() < 1e-10);
    let refl = TransitionKernel::reflected_brownian();
    assert!((potential_density(&refl, 1.0, 0.0, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
}

#[test]
fn checker_examples() {
    let q = QuadratureSpec::default();
    let bm = TransitionKernel::brownian();
    let pts: Vec<f64> = [-2.0, 0.0, 2.0].to_vec();
    let pairs: Vec<(f64, f64)> = pts.iter().flat_map(|&x| pts.iter().map(move |&y| (x, y))).collect();
    assert!(check_resolvent_equation(&bm, 1.0, 2.0, &pairs).unwrap() < 1e-6);
    assert!(matches!(check_resolvent_equation(&bm, 1.0, 1.0, &pairs), Err(KacError::Argument(_))));
    let half: Vec<(f64, f64)> = [0.0, 1.0, 2.0]
        .iter()
        .flat_map(|&x| [0.0, 1.0, 2.0].map(|y| (x, y)))
        .collect();
    assert!(check_resolvent_equation(&TransitionKernel::reflected_brownian(), 1.0, 3.0, &half).unwrap() < 1e-6);

    let ind = SpatialFn::indicator(0.0, 1.0);
    let pair = DualPair::of(TransitionKernel::brownian_drift(1.0).unwrap());
    assert!(check_duality(&pair, 1.0, &ind, &ind, &q).unwrap() < 1e-8);
    let sym = DualPair::of(bm);
    let g = SpatialFn::gaussian(0.5, 0.3, 1.0).times(SpatialFn::indicator(-1.0, 2.0));
    assert!(check_duality(&sym, 0.7, &ind, &g, &q).unwrap() < 1e-9);
    assert_eq!(check_duality(&pair, 1.0, &SpatialFn::constant(0.0), &ind, &q).unwrap(), 0.0);

    for k in builtins() {
        let r = KernelCheckReport::run(&k, &q).unwrap();
        assert!(r.max_residual() < 1e-6, "{}: {:?}", k.label(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn densities_are_nonnegative_and_symmetric(t in 0.01f64..5.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        for k in builtins() {
            let (x, y) = (place(&k, u), place(&k, v));
            let p = k.eval_density(t, x, y).unwrap();
            prop_assert!(p >= 0.0);
            let back = k.eval_density(t, y, x).unwrap();
            if k.is_symmetric() {
                prop_assert_eq!(p, back);
            } else {
                prop_assert_eq!(k.dual().eval_density(t, y, x).unwrap(), p);
            }
        }
    }

    #[test]
    fn killed_is_dominated_and_survival_is_a_probability(t in 0.01f64..5.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let killed = TransitionKernel::killed_brownian(-1.0, 1.5).unwrap();
        let free = TransitionKernel::brownian();
        let (x, y) = (place(&killed, u), place(&killed, v));
        prop_assert!(killed.eval_density(t, x, y).unwrap() <= free.eval_density(t, x, y).unwrap() * (1.0 + 1e-12));
        let s = survival_mass(&killed, t, x).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        let later = survival_mass(&killed, t * 1.5, x).unwrap();
        prop_assert!(later <= s + 1e-15);
    }

    #[test]
    fn survival_closed_form_matches_quadrature(t in 0.05f64..3.0, u in 0.0f64..1.0) {
        let q = QuadratureSpec::default();
        for k in builtins() {
            let x = place(&k, u);
            let closed = survival_mass(&k, t, x).unwrap();
            let numeric = survival_mass_numeric(&k, t, x, &q).unwrap();
            prop_assert!((closed - numeric.value).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn chapman_kolmogorov_on_random_pairs(t in 0.05f64..1.5, s in 0.05f64..1.5, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let q = QuadratureSpec::default();
        for k in builtins() {
            let pts = [place(&k, u), place(&k, v)];
            prop_assert!(check_chapman_kolmogorov(&k, t, s, &pts, &q) < 1e-9);
        }
    }

    #[test]
    fn numeric_potential_agrees_with_closed_form(alpha in 0.1f64..4.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let q = QuadratureSpec::default();
        for k in builtins() {
            let (x, y) = (place(&k, u), place(&k, v));
            let closed = potential_density(&k, alpha, x, y).unwrap();
            let numeric = potential_density_numeric(&k, alpha, x, y, &q).unwrap();
            prop_assert!((closed - numeric.value).abs() <= 1e-8 * closed + 1e-13, "{}: {} vs {}", k.label(), closed, numeric.value);
        }
    }
}
