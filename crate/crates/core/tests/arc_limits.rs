use proptest::prelude::*;
use singlip_core::arc::{classify_limit, fit_power, slope_limit_along_arc, FitOptions, LimitClass, PowerFit};
use singlip_core::corpus::{default_fixture_dir, load_corpus};
use singlip_core::rational::{to_f64, Rational};
use singlip_core::SampleSchedule;

#[test]
fn exact_monomials_are_recovered() {
    let ys = SampleSchedule::default().ys();
    for (p, q) in [(1, 1), (3, 2), (7, 4), (2, 1), (5, 2), (7, 2)] {
        let s = p as f64 / q as f64;
        for c in [1.0, -1.0, 5.0, -5.0] {
            let samples: Vec<(f64, f64)> = ys.iter().map(|&y| (y, c * y.powf(s))).collect();
            let fit = fit_power(&samples).unwrap();
            assert!((fit.exponent - s).abs() < 1e-8, "s = {s}: {}", fit.exponent);
            assert!((fit.coeff() - c).abs() < 1e-8, "c = {c}: {}", fit.coeff());
        }
    }
}

/// Tangent arcs through every fixture: a finite or vanishing `f_x` limit
/// forces `f_y → 0`.
#[test]
fn whitney_condition_on_fixture_arcs() {
    let sched = SampleSchedule::default();
    let opts = FitOptions::default();
    let mut checked = 0;
    for case in load_corpus(&default_fixture_dir()).unwrap() {
        let s = &case.file.spec;
        for (name, arc) in &case.file.arcs {
            let tangent = arc.leading_exponent().map_or(true, |e| to_f64(&e) > 1.0);
            if !tangent {
                continue;
            }
            let lim = slope_limit_along_arc(s, arc, &sched.clamped(s.eps), &opts)
                .unwrap_or_else(|e| panic!("{}:{name}: {e}", case.name));
            if matches!(lim.fx, LimitClass::Finite(_) | LimitClass::Zero) {
                assert_eq!(lim.fy, LimitClass::Zero, "{}:{name} f_x {:?}", case.name, lim.fx);
                checked += 1;
            }
        }
    }
    assert!(checked >= 10, "only {checked} arcs checked");
}

fn fit(exponent: f64, residual: f64) -> PowerFit {
    PowerFit { exponent, log_coeff: 0.3, residual, n_used: 12, sign: 1 }
}

proptest! {
    #[test]
    fn wider_tolerance_only_moves_toward_finite(e in -2.0f64..2.0, t1 in 0.01f64..0.5, extra in 0.0f64..0.5) {
        let t2 = t1 + extra;
        let narrow = classify_limit(&fit(e, 0.01), t1, 0.05).unwrap();
        let wide = classify_limit(&fit(e, 0.01), t2, 0.05).unwrap();
        match (narrow, wide) {
            (LimitClass::Finite(_), w) => prop_assert!(matches!(w, LimitClass::Finite(_))),
            (LimitClass::Zero, w) => prop_assert!(!matches!(w, LimitClass::Infinite(_))),
            (LimitClass::Infinite(_), w) => prop_assert!(!matches!(w, LimitClass::Zero)),
        }
    }

    #[test]
    fn noisy_fits_are_rejected(e in -2.0f64..2.0, r in 0.051f64..1.0) {
        prop_assert!(classify_limit(&fit(e, r), 0.1, 0.05).is_err());
    }
}

#[test]
fn rational_arc_exponents_survive_evaluation() {
    // x = y^{3/2} + 2 y^{7/4} evaluated against the closed form.
    let arc = singlip_core::ArcSpec::new(vec![(1.0, Rational::new(3, 2)), (2.0, Rational::new(7, 4))], 1).unwrap();
    for y in SampleSchedule::default().ys() {
        let want = y.powf(1.5) + 2.0 * y.powf(1.75);
        assert!((arc.eval(y) - want).abs() <= 1e-14 * want);
    }
}
