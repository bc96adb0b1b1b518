use std::sync::OnceLock;

use proptest::prelude::*;
use singlip_core::arc::{slope_limit_along_arc, LimitClass};
use singlip_core::cone::{check_plane_cone, exceptional_rays, extremal_slope_profile, nash_fiber, FiberClass, NashFiberResult};
use singlip_core::corpus::{default_fixture_dir, load_corpus, FixtureCase};
use singlip_core::rational::Rational;
use singlip_core::{ArcSpec, Config, Ray, SurfaceSpec};

fn cases() -> &'static [FixtureCase] {
    static CELL: OnceLock<Vec<FixtureCase>> = OnceLock::new();
    CELL.get_or_init(|| load_corpus(&default_fixture_dir()).unwrap())
}

fn spec(name: &str) -> &'static SurfaceSpec {
    &cases().iter().find(|c| c.name == name).unwrap().file.spec
}

/// `nash_fiber` over `+y` for every fixture.
fn fibers() -> &'static [(String, NashFiberResult)] {
    static CELL: OnceLock<Vec<(String, NashFiberResult)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = Config::default();
        cases().iter().map(|c| (c.name.clone(), nash_fiber(&c.file.spec, Ray::PosY, &cfg).unwrap())).collect()
    })
}

fn hull(f: &NashFiberResult) -> (f64, f64) {
    let lo = f.fiber.intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
    let hi = f.fiber.intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[test]
fn plane_cone_examples() {
    let cfg = Config::default();
    let check = |s: &SurfaceSpec| check_plane_cone(s, cfg.cone.plane_angles, &cfg.schedule, &cfg.fit).unwrap();
    assert!(check(spec("ex31_a1_b2")).is_plane);
    assert!(check(spec("ex32")).is_plane);
    let tilted = check(&SurfaceSpec::parse("tilt", "x", 1.0, 0.1).unwrap());
    assert!(!tilted.is_plane);
    assert!(tilted.max_ratio_exponent_fit.unwrap().exponent.abs() < 1e-9);
}

#[test]
fn extremal_profile_locations() {
    let cfg = Config::default();
    let sched = cfg.schedule.clamped(0.1);
    let prof = extremal_slope_profile(spec("ex31_a1_b1"), Ray::PosY, &sched, &cfg.scan);
    let last = prof.last().unwrap();
    let end = 3.0 * 3f64.sqrt() / 8.0;
    assert!((last.max - end).abs() < 1e-3 * end, "{}", last.max);
    assert!((last.max_u + last.y / 3f64.sqrt()).abs() < 1e-3 * last.y, "{} at y {}", last.max_u, last.y);

    let xy = SurfaceSpec::parse("xy", "x*y", 1.0, 0.1).unwrap();
    for p in extremal_slope_profile(&xy, Ray::PosY, &sched, &cfg.scan) {
        assert!((p.min - p.y).abs() < 1e-12 && (p.max - p.y).abs() < 1e-12);
    }
}

#[test]
fn vertical_tangents_of_ex33() {
    let cfg = Config::default();
    let sched = cfg.schedule.clamped(0.1);
    let prof = extremal_slope_profile(spec("ex33"), Ray::PosY, &sched, &cfg.scan);
    let p = &prof[prof.len() / 2];
    for s in [2.5, 3.5] {
        for side in [1.0, -1.0] {
            let want = side * p.y.powf(s);
            let hit = p.inf_hits.iter().any(|&(u, _)| (u - want).abs() < 0.05 * want.abs());
            assert!(hit, "no vertical tangent near {want:e} at y = {:e}: {:?}", p.y, p.inf_hits);
        }
    }
}

#[test]
fn fiber_examples() {
    let f = fibers();
    let get = |n: &str| &f.iter().find(|(k, _)| k == n).unwrap().1;
    let a = get("ex31_a1_b1");
    assert_eq!(a.classification, FiberClass::ExceptionalNonFull);
    assert!(!a.fiber.contains_infinity);
    let (lo, hi) = hull(a);
    let end = 3.0 * 3f64.sqrt() / 8.0;
    assert!((lo + end).abs() < 0.01 * end && (hi - end).abs() < 0.01 * end);
    assert_eq!(get("ex31_a1_b2").classification, FiberClass::NonExceptional);
    assert_eq!(get("ex32").classification, FiberClass::ExceptionalFull);
}

#[test]
fn classification_is_consistent() {
    for (name, f) in fibers() {
        match f.classification {
            FiberClass::ExceptionalFull => assert!(f.fiber.contains_infinity && f.fiber.is_full, "{name}"),
            FiberClass::NonExceptional => assert_eq!(f.fiber.intervals, vec![(0.0, 0.0)], "{name}"),
            FiberClass::ExceptionalNonFull => assert!(!f.fiber.is_full, "{name}"),
        }
    }
}

/// Surfaces even in `x` have fibers symmetric under `slope ↦ -slope`.
#[test]
fn parity_symmetry() {
    for (name, f) in fibers().iter().filter(|(n, _)| n.starts_with("ex31")) {
        let (lo, hi) = hull(f);
        if lo.is_infinite() || hi.is_infinite() {
            assert_eq!(lo, -hi, "{name}");
        } else {
            assert!((lo + hi).abs() <= 0.01 * hi.abs().max(1e-9), "{name}: [{lo}, {hi}]");
        }
    }
}

#[test]
fn more_evidence_never_shrinks_the_fiber() {
    let mut bare = Config::default();
    bare.cone.arc_grid = false;
    for (name, with_grid) in fibers() {
        let without = nash_fiber(spec(name), Ray::PosY, &bare).unwrap();
        let (lo0, hi0) = hull(&without);
        let (lo1, hi1) = hull(with_grid);
        assert!(lo1 <= lo0 + 1e-12 && hi1 >= hi0 - 1e-12, "{name}: [{lo0}, {hi0}] vs [{lo1}, {hi1}]");
        assert!(with_grid.fiber.contains_infinity || !without.fiber.contains_infinity, "{name}");
    }
}

#[test]
fn exceptional_ray_lists() {
    let cfg = Config::default();
    let rays = |n: &str| exceptional_rays(spec(n), &cfg).unwrap().iter().map(|f| f.ray).collect::<Vec<_>>();
    assert!(rays("smooth").is_empty());
    assert!(rays("ex31_a1_b2").is_empty());
    assert_eq!(rays("ex32"), vec![Ray::PosY]);
    assert_eq!(rays("ex33"), vec![Ray::PosY]);
    let mut both = rays("ex31_a2_b2");
    both.sort_by(|a, b| a.angle().total_cmp(&b.angle()));
    assert_eq!(both, vec![Ray::PosY, Ray::NegY]);
}

fn non_exceptional() -> Vec<&'static str> {
    fibers().iter().filter(|(_, f)| f.classification == FiberClass::NonExceptional).map(|(n, _)| n.as_str()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Arcs tangent to a non-exceptional ray see the tangent plane only.
    #[test]
    fn tangent_arcs_see_the_plane(c in -1.0f64..1.0, num in 5i128..13, pick in 0usize..8) {
        prop_assume!(c.abs() > 0.05);
        let names = non_exceptional();
        prop_assert!(!names.is_empty());
        let s = spec(names[pick % names.len()]);
        let cfg = Config::default();
        let arc = ArcSpec::monomial(c, Rational::new(num, 4)).unwrap();
        let lim = slope_limit_along_arc(s, &arc, &cfg.schedule.clamped(s.eps), &cfg.fit);
        prop_assert!(lim.is_ok(), "{} along {}: {:?}", s.name, arc, lim);
        let lim = lim.unwrap();
        prop_assert_eq!(lim.fx, LimitClass::Zero, "{} along {}", s.name, arc);
    }
}
