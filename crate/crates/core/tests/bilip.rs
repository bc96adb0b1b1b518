use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singlip_core::bilip::{assemble_case_iv, build_vertical_map, linearize, PointMap, VerticalMap};
use singlip_core::corpus::{default_fixture_dir, load_corpus};
use singlip_core::{ArcSpec, Config, SurfFile};

fn fixture(name: &str) -> SurfFile {
    load_corpus(&default_fixture_dir()).unwrap().into_iter().find(|c| c.name == name).unwrap().file
}

fn arc(file: &SurfFile, name: &str) -> ArcSpec {
    file.arcs.iter().find(|(n, _)| n.as_str() == name).unwrap().1.clone()
}

/// The squeeze map over the fast strip `y^{3/2} ± y^{7/4}` of ex32.
fn d2_map(c: f64) -> (SurfFile, VerticalMap) {
    let file = fixture("ex32");
    let lin = linearize(&file.spec, &arc(&file, "d2_left"), &arc(&file, "d2_right"));
    let map = build_vertical_map(lin, c).unwrap();
    (file, map)
}

/// Uniform `(x, y)` in the strip with `y` log-uniform in `[1e-4, 0.1]`.
fn strip_point(file: &SurfFile, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let y = (1e-4f64.ln() + (0.1f64.ln() - 1e-4f64.ln()) * rng.gen::<f64>()).exp();
    let (a, b) = (arc(file, "d2_left").eval(y), arc(file, "d2_right").eval(y));
    (a + (b - a) * rng.gen::<f64>(), y)
}

fn f32x(x: f64, y: f64) -> f64 {
    ((x * x + y * y) * (x * x - y.powi(3))).cbrt()
}

#[test]
fn linear_graph_goes_to_the_surface() {
    let (file, map) = d2_map(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let (x, y) = strip_point(&file, &mut rng);
        let l = map.squeeze.lin.eval(x, y).unwrap();
        let err = (map.h(x, y, l) - f32x(x, y)).abs();
        assert!(err <= 1e-9, "at ({x}, {y}): {err}");
    }
}

/// With `c = 1/2` the two branches of `h` have slopes `(1+c)/c` and `c/(1+c)`.
#[test]
fn vertical_slopes_are_three_and_a_third() {
    let (file, map) = d2_map(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut seen = [false; 2];
    for _ in 0..10_000 {
        let (x, y) = strip_point(&file, &mut rng);
        let (lo, hi) = (map.squeeze.bottom(x, y).unwrap(), map.squeeze.top(x, y).unwrap());
        // Thin fibers near the strip edges leave no room for a difference quotient.
        if hi - lo < 1e-6 * lo.abs().max(hi.abs()) {
            continue;
        }
        let z = lo + (hi - lo) * (0.02 + 0.96 * rng.gen::<f64>());
        let dz = 1e-4 * (hi - lo);
        let slope = (map.h(x, y, z + dz) - map.h(x, y, z - dz)) / (2.0 * dz);
        let l = map.squeeze.lin.eval(x, y).unwrap();
        if (z - l).abs() <= 2.0 * dz {
            continue;
        }
        if (slope - 3.0).abs() <= 1e-5 {
            seen[0] = true;
        } else if (slope - 1.0 / 3.0).abs() <= 1e-5 {
            seen[1] = true;
        } else {
            panic!("h_z = {slope} at ({x}, {y}, {z})");
        }
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn h_is_increasing_and_invertible() {
    let (file, map) = d2_map(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let (x, y) = strip_point(&file, &mut rng);
        let span = 4.0 * y.powf(1.75);
        let f = f32x(x, y);
        let (z0, z1) = (f + span * (2.0 * rng.gen::<f64>() - 1.0), f + span * (2.0 * rng.gen::<f64>() - 1.0));
        let (lo, hi) = (z0.min(z1), z0.max(z1));
        assert!(map.h(x, y, lo) <= map.h(x, y, hi), "not monotone at ({x}, {y})");
        let back = map.h_inv(x, y, map.h(x, y, z0));
        assert!((back - z0).abs() <= 1e-12 * span.max(z0.abs()), "{back} vs {z0}");
    }
}

#[test]
fn identity_off_support() {
    let (file, map) = d2_map(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let (x, y) = strip_point(&file, &mut rng);
        let (lo, hi) = (map.squeeze.bottom(x, y).unwrap(), map.squeeze.top(x, y).unwrap());
        let above = hi + (hi - lo + y) * rng.gen::<f64>();
        let below = lo - (hi - lo + y) * rng.gen::<f64>();
        for z in [above, below, lo, hi] {
            assert!(!map.in_support([x, y, z]));
            assert_eq!(map.apply([x, y, z]), [x, y, z]);
        }
        let outside = arc(&file, "d2_right").eval(y) + y * rng.gen::<f64>() + 1e-12;
        let p = [outside, y, f32x(outside, y)];
        assert_eq!(map.eval_map(p), p);
    }
}

#[test]
fn case_iv_charts_agree_on_shared_edges() {
    let file = fixture("ex32");
    let names = ["axis", "d2_left", "d2_right", "edge"];
    let arcs: Vec<ArcSpec> = names.iter().map(|n| arc(&file, n)).collect();
    let cfg = Config::default();
    let bundle = assemble_case_iv(&file.spec, [&arcs[0], &arcs[1], &arcs[2], &arcs[3]], &cfg).unwrap();
    let ys: Vec<f64> = (0..25).map(|k| 0.1 * 0.7f64.powi(k)).collect();
    assert!(bundle.overlap_disagreement(&ys, 40) <= 1e-9);
    assert!(bundle.target_lipschitz);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let y = ys[rng.gen_range(0..ys.len())];
        let (a, b) = (arcs[0].eval(y), arcs[3].eval(y));
        let x = a + (b - a) * rng.gen::<f64>();
        let q = bundle.eval_map([x, y, (bundle.target)(x, y)]);
        let off = q[2] - f32x(q[0], q[1]);
        assert!(off.abs() <= 1e-9 * y, "graph off by {off} at ({x}, {y})");
    }
}

#[test]
fn case_iv_refuses_obstructed_surface() {
    let file = fixture("ex31_a2_b1");
    let cfg = Config::default();
    let a = ArcSpec::axis();
    let e = ArcSpec::monomial(1.0, singlip_core::rational::Rational::new(1, 1)).unwrap();
    let m1 = ArcSpec::monomial(0.5, singlip_core::rational::Rational::new(3, 1)).unwrap();
    let m2 = ArcSpec::monomial(1.0, singlip_core::rational::Rational::new(5, 3)).unwrap();
    let err = assemble_case_iv(&file.spec, [&a, &m1, &m2, &e], &cfg).unwrap_err();
    assert_eq!(err.kind(), "HypothesisFailed", "{err}");
}
