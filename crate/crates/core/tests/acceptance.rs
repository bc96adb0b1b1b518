//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any of them fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singlip_core::arc::{slope_limit_along_arc, LimitClass};
use singlip_core::bilip::{assemble_case_iv, build_vertical_map, estimate_distortion, linearize, partition_triples, SampleRegion};
use singlip_core::cone::{nash_fiber, FiberClass};
use singlip_core::corpus::{default_fixture_dir, load_corpus, FixtureCase};
use singlip_core::holder::{build_holder, combinatorially_equivalent, plane_complex};
use singlip_core::metric::l_regularity_probe;
use singlip_core::pieces::{analyze_plane, partition_wedge, PieceClass, WedgeSide};
use singlip_core::rational::Rational;
use singlip_core::{ArcSpec, Config, Expr, Ray, Slope, SurfFile};

/// Relative tolerance on the fiber endpoints.
const AC1_TOL: f64 = 0.01;
const AC1_TIME: Duration = Duration::from_secs(5);
/// Relative tolerance on the arc-limit constants.
const AC3_TOL: f64 = 0.02;
const AC3_TIME: Duration = Duration::from_secs(5);
/// Absolute tolerance on recovered exponents.
const AC4_TOL: f64 = 0.05;
const AC5_EXP_TOL: f64 = 0.15;
const AC5_BOUNDED_TOL: f64 = 0.1;
const AC5_DO_TOL: f64 = 0.01;
const AC5_TIME: Duration = Duration::from_secs(60);
const AC6_SAMPLES: usize = 10_000;
const AC6_GRAPH_TOL: f64 = 1e-9;
const AC6_SLOPE_TOL: f64 = 1e-5;
const AC7_PAIRS: usize = 10_000;
const AC7_DRIFT: f64 = 0.10;
const AC8_TIME: Duration = Duration::from_secs(1);
const AC9_POINTS: usize = 1000;
const AC9_TIME: Duration = Duration::from_secs(1);

type Outcome = Result<String, String>;

struct Ctx {
    cases: Vec<FixtureCase>,
    cfg: Config,
}

impl Ctx {
    fn file(&self, name: &str) -> &SurfFile {
        &self.cases.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("missing fixture {name}")).file
    }

    fn arc(&self, file: &str, arc: &str) -> ArcSpec {
        self.file(file).arc(arc).unwrap().clone()
    }
}

fn timed(limit: Duration, start: Instant, detail: String) -> Outcome {
    let t = start.elapsed();
    if t > limit {
        Err(format!("{detail}; took {t:.2?} > {limit:?}"))
    } else {
        Ok(format!("{detail}; {t:.2?}"))
    }
}

fn ac1(ctx: &Ctx) -> Outcome {
    let start = Instant::now();
    let fib = nash_fiber(&ctx.file("ex31_a1_b1").spec, Ray::PosY, &ctx.cfg).map_err(|e| e.to_string())?;
    let lo = fib.fiber.intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
    let hi = fib.fiber.intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max);
    let end = 3.0 * 3f64.sqrt() / 8.0;
    let detail = format!("fiber [{lo:.6}, {hi:.6}] vs ±{end:.6}");
    if (lo + end).abs() > AC1_TOL * end || (hi - end).abs() > AC1_TOL * end {
        return Err(detail);
    }
    timed(AC1_TIME, start, detail)
}

fn ac2(ctx: &Ctx) -> Outcome {
    let expected = [
        ("ex31_a1_b2", "BilipToPlane(NoExceptionalRays)", None),
        ("ex31_a2_b3", "BilipToPlane(NoExceptionalRays)", None),
        ("ex31_a1_b1", "BilipToPlane(AllWedgesWellSeparated)", Some(FiberClass::ExceptionalNonFull)),
        ("ex31_a2_b2", "BilipToPlane(AllWedgesWellSeparated)", Some(FiberClass::ExceptionalNonFull)),
        ("ex31_a2_b1", "NotBilipToPlane", None),
        ("ex31_a3_b1", "NotBilipToPlane", None),
        ("ex31_a3_b2", "NotBilipToPlane", None),
        ("ex32", "BilipToPlane(AllWedgesWellSeparated)", Some(FiberClass::ExceptionalFull)),
        ("ex33", "BilipToPlane(AllWedgesWellSeparated)", Some(FiberClass::ExceptionalFull)),
    ];
    let mut bad = Vec::new();
    for (name, verdict, fiber) in expected {
        let s = &ctx.file(name).spec;
        let got = analyze_plane(s, &ctx.cfg).map(|a| a.verdict.label()).unwrap_or_else(|e| format!("error {e}"));
        if got != verdict {
            bad.push(format!("{name}: {got} (want {verdict})"));
        }
        if got.starts_with("Unknown") {
            bad.push(format!("{name}: Unknown"));
        }
        if let Some(want) = fiber {
            match nash_fiber(s, Ray::PosY, &ctx.cfg) {
                Ok(f) if f.classification == want => {}
                Ok(f) => bad.push(format!("{name}: fiber {:?} (want {want:?})", f.classification)),
                Err(e) => bad.push(format!("{name}: fiber error {e}")),
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("{} fixtures match", expected.len()))
    } else {
        Err(bad.join("; "))
    }
}

fn ac3(ctx: &Ctx) -> Outcome {
    let start = Instant::now();
    let s = &ctx.file("ex32").spec;
    let sched = ctx.cfg.schedule.clamped(s.eps);
    let mut parts = Vec::new();
    for c in [0.5, 1.0, 2.0] {
        let arc = ArcSpec::new(vec![(1.0, Rational::new(3, 2)), (c, Rational::new(7, 4))], 1).unwrap();
        let lim = slope_limit_along_arc(s, &arc, &sched, &ctx.cfg.fit).map_err(|e| format!("C = {c}: {e}"))?;
        let want = 2.0 / (3.0 * (2.0 * c).powf(2.0 / 3.0));
        let LimitClass::Finite(v) = lim.fx else { return Err(format!("C = {c}: f_x {:?}", lim.fx)) };
        if (v - want).abs() > AC3_TOL * want {
            return Err(format!("C = {c}: f_x → {v:.5}, want {want:.5}"));
        }
        if lim.fy != LimitClass::Zero {
            return Err(format!("C = {c}: f_y {:?}", lim.fy));
        }
        parts.push(format!("{v:.5}/{want:.5}"));
    }
    timed(AC3_TIME, start, parts.join(", "))
}

fn near(got: f64, want: f64) -> bool {
    (got - want).abs() <= AC4_TOL
}

fn ac4(ctx: &Ctx) -> Outcome {
    let p = partition_wedge(&ctx.file("ex32").spec, Ray::PosY, WedgeSide::Right, &ctx.cfg).map_err(|e| e.to_string())?;
    let classes: Vec<PieceClass> = p.pieces.iter().map(|r| r.class).collect();
    if classes != [PieceClass::FL, PieceClass::FI, PieceClass::FL] {
        return Err(format!("ex32 right half {classes:?}"));
    }
    let (w1, h2, w3) = (p.pieces[0].width_exp, p.pieces[1].height_exp, p.pieces[2].width_exp);
    if !(near(w1, 1.5) && near(h2, 1.75) && near(w3, 1.0)) {
        return Err(format!("ex32 exponents {w1:.3}, {h2:.3}, {w3:.3}"));
    }
    let q = partition_wedge(&ctx.file("ex33").spec, Ray::PosY, WedgeSide::Right, &ctx.cfg).map_err(|e| e.to_string())?;
    let bounds: Vec<f64> = q.pieces.iter().filter_map(|r| r.right.leading_exponent()).collect();
    for want in [3.5, 3.0, 2.5] {
        if !bounds.iter().any(|&e| near(e, want)) {
            return Err(format!("ex33 has no boundary near y^{want}: {bounds:?}"));
        }
    }
    let strips: Vec<f64> = q.pieces.iter().filter(|r| r.class != PieceClass::FL).map(|r| r.width_exp).collect();
    for want in [4.25, 3.75] {
        if !strips.iter().any(|&e| near(e, want)) {
            return Err(format!("ex33 has no fast strip of width y^{want}: {strips:?}"));
        }
    }
    Ok(format!("ex32 {w1:.3}/{h2:.3}/{w3:.3}; ex33 boundaries {bounds:.3?}, strips {strips:.3?}"))
}

fn ac5(ctx: &Ctx) -> Outcome {
    let start = Instant::now();
    let probe = |name: &str| {
        let file = ctx.file(name);
        let (a, b) = file.pair_arcs().map_err(|e| e.to_string())?.ok_or(format!("{name} declares no pair"))?;
        l_regularity_probe(&file.spec, (&a, &b), &ctx.cfg.schedule, &ctx.cfg).map_err(|e| format!("{name}: {e}"))
    };
    let r = probe("ex31_a2_b1")?;
    let e = r.ratio_fit.exponent;
    if (e + 1.0).abs() > AC5_EXP_TOL {
        return Err(format!("a=2,b=1 ratio exponent {e:.3}"));
    }
    for p in &r.pairs {
        let want = 2.0 / 3f64.sqrt() * p.y * p.y;
        if (p.d_o - want).abs() > AC5_DO_TOL * want {
            return Err(format!("d_o {:e} vs {want:e} at y = {:e}", p.d_o, p.y));
        }
    }
    let bounded = probe("ex31_a1_b2")?.ratio_fit.exponent;
    if bounded.abs() > AC5_BOUNDED_TOL {
        return Err(format!("a=1,b=2 ratio exponent {bounded:.3}"));
    }
    timed(AC5_TIME, start, format!("exponents {e:.3} and {bounded:.3}"))
}

fn ac6(ctx: &Ctx) -> Outcome {
    let s = &ctx.file("ex32").spec;
    let (left, right) = (ctx.arc("ex32", "d2_left"), ctx.arc("ex32", "d2_right"));
    let map = build_vertical_map(linearize(s, &left, &right), 0.5).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut graph, mut slopes, mut ident) = (0.0f64, [0usize; 2], 0usize);
    for _ in 0..AC6_SAMPLES {
        let y = (1e-4f64.ln() + (s.eps.ln() - 1e-4f64.ln()) * rng.gen::<f64>()).exp();
        let (a, b) = (left.eval(y), right.eval(y));
        let x = a + (b - a) * rng.gen::<f64>();
        let l = map.squeeze.lin.eval(x, y).map_err(|e| e.to_string())?;
        let f = s.f.value(x, y).map_err(|e| e.to_string())?;
        graph = graph.max((map.h(x, y, l) - f).abs());
        let (lo, hi) = (map.squeeze.bottom(x, y).unwrap(), map.squeeze.top(x, y).unwrap());
        if hi - lo >= 1e-6 * lo.abs().max(hi.abs()) {
            let z = lo + (hi - lo) * (0.02 + 0.96 * rng.gen::<f64>());
            let dz = 1e-4 * (hi - lo);
            if (z - l).abs() > 2.0 * dz {
                let hz = (map.h(x, y, z + dz) - map.h(x, y, z - dz)) / (2.0 * dz);
                if (hz - 3.0).abs() <= AC6_SLOPE_TOL {
                    slopes[0] += 1;
                } else if (hz - 1.0 / 3.0).abs() <= AC6_SLOPE_TOL {
                    slopes[1] += 1;
                } else {
                    return Err(format!("h_z = {hz} at ({x:e}, {y:e}, {z:e})"));
                }
            }
        }
        let off = [hi + (hi - lo + y) * rng.gen::<f64>(), lo - (hi - lo + y) * rng.gen::<f64>()];
        for z in off {
            if map.apply([x, y, z]) != [x, y, z] {
                ident += 1;
            }
        }
        let xo = b + y * rng.gen::<f64>() + 1e-12;
        let p = [xo, y, s.f.value(xo, y).unwrap_or(0.0)];
        if map.apply(p) != p {
            ident += 1;
        }
    }
    let detail = format!("graph error {graph:.2e}, slopes 3×{} and 1/3×{}, off-support moves {ident}", slopes[0], slopes[1]);
    if graph > AC6_GRAPH_TOL || ident > 0 || slopes.contains(&0) {
        Err(detail)
    } else {
        Ok(detail)
    }
}

fn ac7(ctx: &Ctx) -> Outcome {
    let file = ctx.file("ex32");
    let names = file.map_arcs.clone().ok_or("ex32 declares no map arcs")?;
    let arcs: Vec<ArcSpec> = names.iter().map(|n| ctx.arc("ex32", n)).collect();
    let bundle = assemble_case_iv(&file.spec, [&arcs[0], &arcs[1], &arcs[2], &arcs[3]], &ctx.cfg).map_err(|e| e.to_string())?;
    let region = SampleRegion::new(arcs[0].clone(), arcs[3].clone(), &file.spec, &ctx.cfg.schedule.clamped(file.spec.eps));
    let seed = ctx.cfg.map.seed;
    let k1 = estimate_distortion(&bundle, &region, AC7_PAIRS, seed).map_err(|e| e.to_string())?;
    let k2 = estimate_distortion(&bundle, &region, 2 * AC7_PAIRS, seed).map_err(|e| e.to_string())?;
    let drift = |a: f64, b: f64| (b - a).abs() / a;
    let (df, di) = (drift(k1.k_forward, k2.k_forward), drift(k1.k_inverse, k2.k_inverse));
    let detail = format!(
        "K_forward {:.3} → {:.3}, K_inverse {:.3} → {:.3}",
        k1.k_forward, k2.k_forward, k1.k_inverse, k2.k_inverse
    );
    let finite = [k1.k_forward, k1.k_inverse, k2.k_forward, k2.k_inverse].iter().all(|k| k.is_finite());
    if !finite || df >= AC7_DRIFT || di >= AC7_DRIFT {
        return Err(detail);
    }
    let bad = &ctx.file("ex31_a2_b1").spec;
    let p = partition_wedge(bad, Ray::PosY, WedgeSide::Full, &ctx.cfg).map_err(|e| e.to_string())?;
    let triples = partition_triples(&p);
    let t = triples.first().ok_or("a=2,b=1 wedge has no flat/fast/flat triple")?;
    match assemble_case_iv(bad, [&t[0], &t[1], &t[2], &t[3]], &ctx.cfg) {
        Err(e) if e.kind() == "HypothesisFailed" => Ok(format!("{detail}; a=2,b=1 HypothesisFailed")),
        Err(e) => Err(format!("{detail}; a=2,b=1 gave {}", e.kind())),
        Ok(_) => Err(format!("{detail}; a=2,b=1 assembled a bundle")),
    }
}

fn ac8(ctx: &Ctx) -> Outcome {
    let mut work = Vec::new();
    for case in &ctx.cases {
        let a = analyze_plane(&case.file.spec, &ctx.cfg).map_err(|e| format!("{}: {e}", case.name))?;
        let parts: Vec<_> = a.partitions.into_iter().map(|(p, _)| p).collect();
        work.push((case, parts));
    }
    let start = Instant::now();
    for (case, parts) in &work {
        let c = build_holder(&case.file.spec, parts).map_err(|e| format!("{}: {e}", case.name))?;
        let plane = plane_complex(&c.betas()).map_err(|e| format!("{}: {e}", case.name))?;
        if !combinatorially_equivalent(&c, &plane).equivalent {
            return Err(format!("{}: {c} not equivalent to its plane complex", case.name));
        }
    }
    timed(AC8_TIME, start, format!("{} fixtures", work.len()))
}

fn ac9(ctx: &Ctx) -> Outcome {
    let exprs: Vec<(&str, &Expr)> = ctx.cases.iter().map(|c| (c.name.as_str(), &c.file.spec.f)).collect();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    const H: f64 = 1e-5;
    while checked < AC9_POINTS {
        let (x, y) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
        let (name, e) = exprs[rng.gen_range(0..exprs.len())];
        let Ok(j) = e.jet(x, y) else { continue };
        let fd = |dx: f64, dy: f64| -> Option<f64> {
            Some((e.value(x + H * dx, y + H * dy).ok()? - e.value(x - H * dx, y - H * dy).ok()?) / (2.0 * H))
        };
        let (Slope::Finite(gx), Slope::Finite(gy)) = (j.fx, j.fy) else { continue };
        let (Some(cx), Some(cy)) = (fd(1.0, 0.0), fd(0.0, 1.0)) else { continue };
        // Skip points within a step of a non-smooth locus.
        let far = [(1.0, 0.0), (0.0, 1.0)].iter().all(|&(dx, dy)| {
            let side = |t: f64| e.jet(x + t * dx, y + t * dy).ok().and_then(|j| match (j.fx, j.fy) {
                (Slope::Finite(a), Slope::Finite(b)) => Some((a, b)),
                _ => None,
            });
            matches!((side(-1e-3), side(1e-3)), (Some(_), Some(_)))
        });
        if !far {
            continue;
        }
        for (g, c) in [(gx, cx), (gy, cy)] {
            let err = (g - c).abs() / (1.0 + g.abs());
            if err > 1e-4 {
                return Err(format!("{name} at ({x}, {y}): jet {g} vs difference {c}"));
            }
            worst = worst.max(err);
        }
        checked += 1;
    }
    timed(AC9_TIME, start, format!("{checked} points, worst relative error {worst:.1e}"))
}

fn main() -> ExitCode {
    let ctx = Ctx { cases: load_corpus(&default_fixture_dir()).expect("fixture corpus loads"), cfg: Config::default() };
    let checks: [(&str, fn(&Ctx) -> Outcome); 9] =
        [("AC1", ac1), ("AC2", ac2), ("AC3", ac3), ("AC4", ac4), ("AC5", ac5), ("AC6", ac6), ("AC7", ac7), ("AC8", ac8), ("AC9", ac9)];
    let mut failed = 0;
    for (name, check) in checks {
        match check(&ctx) {
            Ok(d) => println!("{name} PASS {d}"),
            Err(d) => {
                failed += 1;
                println!("{name} FAIL {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
