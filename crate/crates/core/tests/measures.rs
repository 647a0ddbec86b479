use kacmoment::kernels::{potential_density, TransitionKernel};
use kacmoment::measures::*;
use kacmoment::quadrature::QuadratureSpec;
use kacmoment::spatial::SpatialFn;
use proptest::prelude::*;

fn measure() -> impl Strategy<Value = RevuzMeasure> {
    prop_oneof![
        (-2.0f64..2.0, 0.1f64..3.0).prop_map(|(a, w)| RevuzMeasure::atom(a, w)),
        (-2.0f64..1.0, 0.1f64..2.0, 0.1f64..2.0)
            .prop_map(|(lo, w, c)| RevuzMeasure::with_density(SpatialFn::Indicator { lower: lo, upper: lo + w, value: c })),
        (-1.0f64..1.0, 0.2f64..1.0).prop_map(|(c, w)| RevuzMeasure::with_density(SpatialFn::gaussian(c, w, 1.0))),
    ]
}

fn bm() -> TransitionKernel {
    TransitionKernel::brownian()
}

#[test]
fn potential_of_lebesgue_is_one_over_alpha() {
    for kernel in [bm(), TransitionKernel::brownian_drift(0.5).unwrap(), TransitionKernel::reflected_brownian()] {
        for alpha in [0.3, 2.0] {
            let u = potential_of_measure(&kernel, &RevuzMeasure::lebesgue(1.0), alpha, 0.4).unwrap();
            assert!((u.value - 1.0 / alpha).abs() < 1e-9 / alpha, "{}: {}", kernel.label(), u.value);
        }
    }
}

#[test]
fn profile_sup_covers_every_grid_value() {
    let mu = RevuzMeasure::with_density(SpatialFn::indicator(-0.5, 0.5)).plus(&RevuzMeasure::atom(1.0, 0.3));
    let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
    let p = potential_profile(&bm(), &mu, 1.0, &grid).unwrap();
    for v in &p.values {
        assert!(v.1 >= 0.0 && v.1 <= p.sup_estimate);
    }
}

#[test]
fn sup_curve_vanishes_for_large_rates() {
    let q = QuadratureSpec::default();
    for mu in [
        RevuzMeasure::dirac(0.0),
        RevuzMeasure::lebesgue(3.0),
        RevuzMeasure::with_density(SpatialFn::gaussian(0.0, 0.5, 2.0)),
    ] {
        let r = kato_classify(&bm(), &mu, &default_alpha_ladder(), &default_kato_grid(&bm(), &mu), &q).unwrap();
        assert!(r.in_extended_kato && r.alpha_star.is_some());
        assert!(r.sup_curve.last().unwrap().1 < 1e-2);
        for w in r.sup_curve.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn potential_decreases_in_alpha(mu in measure(), x in -3.0f64..3.0, a in 0.05f64..5.0, f in 1.01f64..4.0) {
        let lo = potential_of_measure(&bm(), &mu, a, x).unwrap();
        let hi = potential_of_measure(&bm(), &mu, a * f, x).unwrap();
        prop_assert!(hi.value <= lo.value + lo.error + hi.error);
        prop_assert!(hi.value >= 0.0);
    }

    #[test]
    fn potential_is_linear(m1 in measure(), m2 in measure(), x in -3.0f64..3.0, a in 0.1f64..4.0) {
        let sum = potential_of_measure(&bm(), &m1.plus(&m2), a, x).unwrap();
        let parts = potential_of_measure(&bm(), &m1, a, x).unwrap().value + potential_of_measure(&bm(), &m2, a, x).unwrap().value;
        prop_assert!((sum.value - parts).abs() <= sum.error + 1e-9 * parts);
    }

    #[test]
    fn exchange_for_symmetric_kernels(a in -2.0f64..2.0, b in -2.0f64..2.0, alpha in 0.1f64..4.0) {
        for kernel in [bm(), TransitionKernel::killed_brownian(-3.0, 3.0).unwrap()] {
            let ab = potential_of_measure(&kernel, &RevuzMeasure::dirac(a), alpha, b).unwrap().value;
            let ba = potential_of_measure(&kernel, &RevuzMeasure::dirac(b), alpha, a).unwrap().value;
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab, potential_density(&kernel, alpha, b, a).unwrap());
        }
    }

    #[test]
    fn scaling_a_measure_scales_its_potential(mu in measure(), c in 0.1f64..5.0, x in -2.0f64..2.0) {
        let base = potential_of_measure(&bm(), &mu, 1.0, x).unwrap();
        let scaled = potential_of_measure(&bm(), &mu.scaled(c), 1.0, x).unwrap();
        prop_assert!((scaled.value - c * base.value).abs() <= scaled.error + c * base.error + 1e-12);
    }
}
