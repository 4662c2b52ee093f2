mod common;

use common::{interval, unit_square};
use kslab_core::grid::{integrate, Field, Grid};
use kslab_core::semigroup::{measure_smoothing_rate, SemigroupPlan};
use proptest::prelude::*;
use std::sync::Arc;

fn smooth_random(g: &Arc<Grid>, a: &[f64]) -> Field {
    Field::from_fn(g.clone(), |[x, y]| {
        (1.0 + a[0] * (3.0 * x).sin() * (2.0 * y).cos()).abs() + a[1] * (-(x - a[2]).powi(2) * 30.0).exp()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn semigroup_property(a in prop::collection::vec(0.0..1.0f64, 3), s in 1e-4..0.1f64, t in 1e-4..0.1f64) {
        let g = unit_square(32);
        let plan = SemigroupPlan::new(g.clone());
        let f = smooth_random(&g, &a);
        let two = plan.apply(&plan.apply(&f, s, 0.0).unwrap(), t, 0.0).unwrap();
        let one = plan.apply(&f, s + t, 0.0).unwrap();
        prop_assert!(two.sup_distance(&one).unwrap() <= 1e-11);
    }

    #[test]
    fn mass_positivity_and_maximum_principle(a in prop::collection::vec(0.0..1.0f64, 3), t in 1e-5..1.0f64, kappa in 0.0..3.0f64) {
        let g = unit_square(16);
        let plan = SemigroupPlan::new(g.clone());
        let f = smooth_random(&g, &a);
        let out = plan.apply(&f, t, kappa).unwrap();
        let damp = (-kappa * t).exp();
        prop_assert!((integrate(&out) - damp * integrate(&f)).abs() <= 1e-12 * integrate(&f));
        let undamped = out.scaled(1.0 / damp);
        prop_assert!(undamped.min() >= f.min() - 1e-12 * f.max());
        prop_assert!(undamped.max() <= f.max() * (1.0 + 1e-12));
    }

    #[test]
    fn commutes_with_constants(a in prop::collection::vec(0.0..1.0f64, 3), c in -5.0..5.0f64, kappa in 0.0..2.0f64) {
        let g = unit_square(16);
        let plan = SemigroupPlan::new(g.clone());
        let f = smooth_random(&g, &a);
        let t = 0.03;
        let shifted = plan.apply(&f.map(|x| x + c), t, kappa).unwrap();
        let expected = plan.apply(&f, t, kappa).unwrap().map(|x| x + c * (-kappa * t).exp());
        prop_assert!(shifted.sup_distance(&expected).unwrap() <= 1e-12 * (1.0 + c.abs()) * 10.0);
    }
}

#[test]
fn radial_path_conserves_mass_and_positivity() {
    let g = Arc::new(Grid::radial_ball(1.0, 64).unwrap());
    let plan = SemigroupPlan::new(g.clone());
    let mut f = Field::zeros(g.clone());
    f.values_mut()[0] = 1.0 / g.volume(0);
    for t in [1e-4, 1e-3, 1e-2, 1e-1] {
        let (out, report) = plan.apply_with_report(&f, t, 0.0).unwrap();
        assert!(report.converged, "t={t}: {report:?}");
        assert!(out.min() >= 0.0);
        assert!((integrate(&out) - 1.0).abs() < 1e-11, "t={t}: {}", integrate(&out));
    }
}

#[test]
fn smoothing_rate_l1_to_linf_planar() {
    let plan = SemigroupPlan::new(unit_square(128));
    let rate = measure_smoothing_rate(&plan, 1.0, f64::INFINITY).unwrap();
    assert!((rate + 1.0).abs() <= 0.1, "rate {rate}");
}

#[test]
fn smoothing_rate_l1_to_l2_line() {
    let plan = SemigroupPlan::new(interval(512));
    let rate = measure_smoothing_rate(&plan, 1.0, 2.0).unwrap();
    assert!((rate + 0.25).abs() <= 0.025, "rate {rate}");
}

#[test]
fn smoothing_rate_equal_exponents() {
    let plan = SemigroupPlan::new(unit_square(32));
    assert_eq!(measure_smoothing_rate(&plan, 3.0, 3.0).unwrap(), 0.0);
}
