//! Explicit bilipschitz maps: linearization between two arcs, the squeeze
//! pair, vertical maps, rotated charts and flat/fast/flat bundles, with
//! sampled distortion estimates.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arc::{classify_samples, ArcSpec, LimitClass, SampleSchedule};
use crate::pieces::{classify_piece, PieceClass, PieceRecord};
use crate::surface::{Ray, SurfaceSpec};
use crate::{Config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapOptions {
    /// Squeeze constant of the vertical maps.
    pub c: f64,
    /// Slope of the line the rotated chart projects onto.
    pub ell_slope: f64,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions { c: 0.5, ell_slope: 1.0, n_pairs: 10_000, seed: 20_240_917 }
    }
}

pub type Height = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Curve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn surface_height(s: &SurfaceSpec) -> Height {
    let f = s.f.clone();
    Arc::new(move |x, y| f.value(x, y).unwrap_or(f64::NAN))
}

pub fn arc_curve(a: &ArcSpec) -> Curve {
    let a = a.clone();
    Arc::new(move |y| a.eval(y))
}

/// `L(x, y)`: `f` interpolated linearly in `x` between `α(y)` and `β(y)`.
#[derive(Clone)]
pub struct Linearization {
    pub alpha: Curve,
    pub beta: Curve,
    pub f: Height,
}

impl fmt::Debug for Linearization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Linearization")
    }
}

impl Linearization {
    fn gap(&self, y: f64) -> Result<(f64, f64)> {
        let (a, b) = ((self.alpha)(y), (self.beta)(y));
        if !(b - a >= 1e-13) {
            return Err(Error::DegenerateGap { y, gap: b - a });
        }
        Ok((a, b))
    }

    /// `w = (x − α)/(β − α)`.
    pub fn weight(&self, x: f64, y: f64) -> Result<f64> {
        let (a, b) = self.gap(y)?;
        Ok((x - a) / (b - a))
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let (a, b) = self.gap(y)?;
        let (fa, fb) = ((self.f)(a, y), (self.f)(b, y));
        Ok(fa + (fb - fa) / (b - a) * (x - a))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.alpha)(y) <= x && x <= (self.beta)(y)
    }
}

pub fn linearize(s: &SurfaceSpec, alpha: &ArcSpec, beta: &ArcSpec) -> Linearization {
    Linearization { alpha: arc_curve(alpha), beta: arc_curve(beta), f: surface_height(s) }
}

/// The pair `f^B ≤ min(f, L) ≤ max(f, L) ≤ f^T`.
#[derive(Debug, Clone)]
pub struct Squeeze {
    pub c: f64,
    pub lin: Linearization,
}

/// Breakpoints of `h` on one vertical line.
#[derive(Debug, Clone, Copy)]
struct Fiber {
    bottom: f64,
    l: f64,
    f: f64,
    top: f64,
}

impl Squeeze {
    fn fiber(&self, x: f64, y: f64) -> Option<Fiber> {
        if !self.lin.contains(x, y) {
            return None;
        }
        let l = self.lin.eval(x, y).ok()?;
        let f = (self.lin.f)(x, y);
        if !(l.is_finite() && f.is_finite()) {
            return None;
        }
        let d = (f - l).abs();
        Some(Fiber { bottom: f.min(l) - self.c * d, l, f, top: f.max(l) + self.c * d })
    }

    pub fn top(&self, x: f64, y: f64) -> Option<f64> {
        self.fiber(x, y).map(|b| b.top)
    }

    pub fn bottom(&self, x: f64, y: f64) -> Option<f64> {
        self.fiber(x, y).map(|b| b.bottom)
    }
}

/// `H(x, y, z) = (x, y, h(x, y, z))`, piecewise linear in `z` with breakpoints
/// `f^B ↦ f^B`, `L ↦ f`, `f^T ↦ f^T`; the identity elsewhere.
#[derive(Debug, Clone)]
pub struct VerticalMap {
    pub squeeze: Squeeze,
}

fn pl(z: f64, from: (f64, f64, f64), to: (f64, f64, f64)) -> f64 {
    let (b, m, t) = from;
    if z == m {
        to.1
    } else if z < m {
        to.0 + (z - b) * (to.1 - to.0) / (m - b)
    } else {
        to.2 - (t - z) * (to.2 - to.1) / (t - m)
    }
}

impl VerticalMap {
    pub fn h(&self, x: f64, y: f64, z: f64) -> f64 {
        match self.squeeze.fiber(x, y) {
            Some(b) if b.f != b.l && z > b.bottom && z < b.top => pl(z, (b.bottom, b.l, b.top), (b.bottom, b.f, b.top)),
            _ => z,
        }
    }

    pub fn h_inv(&self, x: f64, y: f64, z: f64) -> f64 {
        match self.squeeze.fiber(x, y) {
            Some(b) if b.f != b.l && z > b.bottom && z < b.top => pl(z, (b.bottom, b.f, b.top), (b.bottom, b.l, b.top)),
            _ => z,
        }
    }

    pub fn in_support(&self, p: [f64; 3]) -> bool {
        self.squeeze.fiber(p[0], p[1]).is_some_and(|b| b.f != b.l && p[2] > b.bottom && p[2] < b.top)
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        [p[0], p[1], self.h(p[0], p[1], p[2])]
    }

    pub fn apply_inverse(&self, p: [f64; 3]) -> [f64; 3] {
        [p[0], p[1], self.h_inv(p[0], p[1], p[2])]
    }
}

pub fn build_vertical_map(lin: Linearization, c: f64) -> Result<VerticalMap> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidSurface(format!("squeeze constant must be positive, got {c}")));
    }
    Ok(VerticalMap { squeeze: Squeeze { c, lin } })
}

/// Rotation about the y-axis carrying the line `z = s·x` to the x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rotation {
    pub slope: f64,
}

impl Rotation {
    fn cs(&self) -> (f64, f64) {
        let n = (1.0 + self.slope * self.slope).sqrt();
        (1.0 / n, self.slope / n)
    }

    pub fn forward(&self, p: [f64; 3]) -> [f64; 3] {
        let (c, s) = self.cs();
        [c * p[0] + s * p[2], p[1], -s * p[0] + c * p[2]]
    }

    pub fn inverse(&self, p: [f64; 3]) -> [f64; 3] {
        let (c, s) = self.cs();
        [c * p[0] - s * p[2], p[1], s * p[0] + c * p[2]]
    }
}

/// A monotone piece seen as a graph over the rotated plane.
#[derive(Clone)]
pub struct RotatedPatch {
    pub rotation: Rotation,
    pub alpha: Curve,
    pub beta: Curve,
    f: Height,
    /// Largest sampled slope of the rotated graph.
    pub lip_bound: f64,
    pub lipschitz: bool,
}

impl fmt::Debug for RotatedPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RotatedPatch")
            .field("rotation", &self.rotation)
            .field("lip_bound", &self.lip_bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl RotatedPatch {
    fn lifted(&self, x: f64, y: f64) -> [f64; 3] {
        self.rotation.forward([x, y, (self.f)(x, y)])
    }

    /// Rotated coordinate of the original boundary `α` (resp. `β`).
    pub fn alpha_rot(&self, y: f64) -> f64 {
        self.lifted((self.alpha)(y), y)[0]
    }

    pub fn beta_rot(&self, y: f64) -> f64 {
        self.lifted((self.beta)(y), y)[0]
    }

    /// Rotated height `f̃(x′, y)`, by bisection on the monotone map `x ↦ x′`.
    pub fn value(&self, xr: f64, y: f64) -> f64 {
        let (mut a, mut b) = ((self.alpha)(y), (self.beta)(y));
        let (ra, rb) = (self.lifted(a, y)[0], self.lifted(b, y)[0]);
        let up = rb >= ra;
        if xr <= ra.min(rb) || xr >= ra.max(rb) {
            let x = if (xr <= ra) == up { a } else { b };
            return self.lifted(x, y)[2];
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (self.lifted(m, y)[0] < xr) == up {
                a = m;
            } else {
                b = m;
            }
        }
        let (pa, pb) = (self.lifted(a, y), self.lifted(b, y));
        if pb[0] == pa[0] {
            return pa[2];
        }
        pa[2] + (pb[2] - pa[2]) * (xr - pa[0]) / (pb[0] - pa[0])
    }

    pub fn height(self: &Arc<Self>) -> Height {
        let me = Arc::clone(self);
        Arc::new(move |x, y| me.value(x, y))
    }
}

/// Rotates the piece between `alpha` and `beta` so it becomes a graph over the
/// plane through the line of slope `ell_slope`. Requires `f_x` of one sign
/// matching `ell_slope`.
pub fn rotate_chart(s: &SurfaceSpec, alpha: &ArcSpec, beta: &ArcSpec, ell_slope: f64, sched: &SampleSchedule) -> Result<RotatedPatch> {
    let sched = sched.clamped(s.eps);
    sched.validate()?;
    let ys = sched.ys();
    let n = 64;
    let per_slice: Vec<Result<f64>> = ys
        .par_iter()
        .map(|&y| {
            let (a, b) = (alpha.eval(y), beta.eval(y));
            if !(b > a) {
                return Err(Error::DegenerateGap { y, gap: b - a });
            }
            let pts: Vec<[f64; 3]> = (0..=n)
                .map(|k| {
                    let x = a + (b - a) * k as f64 / n as f64;
                    [x, y, s.f.value(x, y).unwrap_or(f64::NAN)]
                })
                .collect();
            for k in 1..n {
                let g = s.f.jet(pts[k][0], y).map_or(f64::NAN, |j| j.fx.to_f64());
                if g * ell_slope < 0.0 {
                    return Err(Error::NotMonotone);
                }
            }
            let rot = Rotation { slope: ell_slope };
            let r: Vec<[f64; 3]> = pts.iter().map(|p| rot.forward(*p)).collect();
            let mut lip: f64 = 0.0;
            for w in r.windows(2) {
                let dx = w[1][0] - w[0][0];
                if !(w[1][2] - w[0][2]).is_finite() {
                    continue;
                }
                if dx <= 0.0 {
                    return Err(Error::NotMonotone);
                }
                lip = lip.max(((w[1][2] - w[0][2]) / dx).abs());
            }
            Ok(lip)
        })
        .collect();
    let lips: Vec<f64> = per_slice.into_iter().collect::<Result<_>>()?;
    let lip_bound = lips.iter().copied().fold(0.0, f64::max);
    let samples: Vec<(f64, f64)> = ys.iter().zip(&lips).map(|(y, l)| (*y, l.max(1e-300))).collect();
    let bounded = !matches!(classify_samples(&samples, 1, &Default::default()), Ok((LimitClass::Infinite(_), _)));
    Ok(RotatedPatch {
        rotation: Rotation { slope: ell_slope },
        alpha: arc_curve(alpha),
        beta: arc_curve(beta),
        f: surface_height(s),
        lip_bound,
        lipschitz: bounded && lip_bound.is_finite(),
    })
}

/// A vertical map acting in the rotated frame of a monotone piece.
#[derive(Debug, Clone)]
pub struct RotatedMap {
    pub patch: Arc<RotatedPatch>,
    pub inner: VerticalMap,
}

impl RotatedMap {
    pub fn new(patch: RotatedPatch, c: f64) -> Result<Self> {
        let patch = Arc::new(patch);
        let (pa, pb) = (Arc::clone(&patch), Arc::clone(&patch));
        let alpha: Curve = Arc::new(move |y| pa.alpha_rot(y));
        let beta: Curve = Arc::new(move |y| pb.beta_rot(y));
        let lin = Linearization { alpha, beta, f: patch.height() };
        Ok(RotatedMap { inner: build_vertical_map(lin, c)?, patch })
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.patch.rotation;
        r.inverse(self.inner.apply(r.forward(p)))
    }

    pub fn apply_inverse(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.patch.rotation;
        r.inverse(self.inner.apply_inverse(r.forward(p)))
    }

    pub fn in_support(&self, p: [f64; 3]) -> bool {
        self.inner.in_support(self.patch.rotation.forward(p))
    }
}

#[derive(Debug, Clone)]
pub enum ChartMap {
    Identity,
    Vertical(VerticalMap),
    Rotated(RotatedMap),
}

impl ChartMap {
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            ChartMap::Identity => p,
            ChartMap::Vertical(m) => m.apply(p),
            ChartMap::Rotated(m) => m.apply(p),
        }
    }

    pub fn apply_inverse(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            ChartMap::Identity => p,
            ChartMap::Vertical(m) => m.apply_inverse(p),
            ChartMap::Rotated(m) => m.apply_inverse(p),
        }
    }

    pub fn in_support(&self, p: [f64; 3]) -> bool {
        match self {
            ChartMap::Identity => false,
            ChartMap::Vertical(m) => m.in_support(p),
            ChartMap::Rotated(m) => m.in_support(p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapChart {
    pub label: String,
    /// Plane strip `[left(y), right(y)]` the chart's support projects into.
    pub left: ArcSpec,
    pub right: ArcSpec,
    pub map: ChartMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionEstimate {
    #[serde(rename = "K_forward")]
    pub k_forward: f64,
    #[serde(rename = "K_inverse")]
    pub k_inverse: f64,
    pub n_pairs: usize,
    pub seed: u64,
}

/// Charts applied in order; `H = H_n ∘ … ∘ H_1` carries the graph of
/// `target` onto the graph of `f`.
#[derive(Clone)]
pub struct MapBundle {
    pub charts: Vec<MapChart>,
    pub target: Height,
    /// Largest sampled `|∂target/∂x|`, and whether it stays bounded as `y → 0`.
    pub target_lip: f64,
    pub target_lipschitz: bool,
    pub distortion: Option<DistortionEstimate>,
}

impl fmt::Debug for MapBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapBundle")
            .field("charts", &self.charts.iter().map(|c| c.label.as_str()).collect::<Vec<_>>())
            .field("target_lip", &self.target_lip)
            .field("distortion", &self.distortion)
            .finish()
    }
}

/// Anything with a forward and inverse point map.
pub trait PointMap: Sync {
    fn eval_map(&self, p: [f64; 3]) -> [f64; 3];
    fn eval_inverse(&self, p: [f64; 3]) -> [f64; 3];
}

impl PointMap for VerticalMap {
    fn eval_map(&self, p: [f64; 3]) -> [f64; 3] {
        self.apply(p)
    }

    fn eval_inverse(&self, p: [f64; 3]) -> [f64; 3] {
        self.apply_inverse(p)
    }
}

impl PointMap for MapBundle {
    fn eval_map(&self, p: [f64; 3]) -> [f64; 3] {
        self.charts.iter().fold(p, |q, c| c.map.apply(q))
    }

    fn eval_inverse(&self, p: [f64; 3]) -> [f64; 3] {
        self.charts.iter().rev().fold(p, |q, c| c.map.apply_inverse(q))
    }
}

impl MapBundle {
    pub fn identity() -> Self {
        MapBundle {
            charts: vec![MapChart {
                label: "identity".into(),
                left: ArcSpec::axis(),
                right: ArcSpec::axis(),
                map: ChartMap::Identity,
            }],
            target: Arc::new(|_, _| 0.0),
            target_lip: 0.0,
            target_lipschitz: true,
            distortion: None,
        }
    }

    /// Largest disagreement between consecutive charts on their shared
    /// boundary, where each must act as the identity.
    pub fn overlap_disagreement(&self, ys: &[f64], samples_per_y: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.charts.windows(2) {
            let edge = &w[0].right;
            if *edge != w[1].left {
                continue;
            }
            for &y in ys {
                let x = edge.eval(y);
                let z0 = (self.target)(x, y);
                let span = 4.0 * y;
                for k in 0..samples_per_y {
                    let z = z0 - span + 2.0 * span * k as f64 / (samples_per_y.max(2) - 1) as f64;
                    let p = [x, y, z];
                    let (a, b) = (w[0].map.apply(p), w[1].map.apply(p));
                    worst = worst.max(dist(a, b)).max(dist(a, p));
                }
            }
        }
        worst
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Piecewise-linear interpolation of `f` in `x` through the given arcs.
fn pl_height(s: &SurfaceSpec, arcs: Vec<ArcSpec>) -> Height {
    let f = surface_height(s);
    Arc::new(move |x, y| {
        let xs: Vec<f64> = arcs.iter().map(|a| a.eval(y)).collect();
        let k = xs.partition_point(|v| *v <= x).clamp(1, xs.len() - 1);
        let (a, b) = (xs[k - 1], xs[k]);
        let (fa, fb) = (f(a, y), f(b, y));
        fa + (fb - fa) / (b - a) * (x - a)
    })
}

/// Arc halfway between two arcs, as a Puiseux sum.
fn midpoint_arc(a: &ArcSpec, b: &ArcSpec) -> Result<ArcSpec> {
    let mut terms: Vec<(f64, crate::rational::Rational)> = Vec::new();
    for arc in [a, b] {
        for (c, e) in arc.terms() {
            let c = 0.5 * c * arc.side() as f64;
            match terms.iter_mut().find(|t| t.1 == *e) {
                Some(t) => t.0 += c,
                None => terms.push((c, *e)),
            }
        }
    }
    terms.retain(|t| t.0 != 0.0);
    terms.sort_by_key(|x| x.1);
    if terms.is_empty() {
        return Ok(ArcSpec::axis());
    }
    ArcSpec::new(terms, 1)
}

/// Flat / fast / flat triple measured on its arcs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleExponents {
    pub flank_left: PieceRecord,
    pub middle: PieceRecord,
    pub flank_right: PieceRecord,
}

/// Bundle carrying a Lipschitz piecewise-linear graph over `[α₁, β₂]` onto the
/// graph of `f`, for a fast middle piece `[α, β]` between flat flanks
/// `[α₁, α]` and `[β, β₂]`. Fails with `HypothesisFailed` unless the middle
/// height exponent is at least both flank width exponents.
pub fn assemble_case_iv(s: &SurfaceSpec, arcs: [&ArcSpec; 4], cfg: &Config) -> Result<MapBundle> {
    let [a1, a, b, b2] = arcs;
    let ray = Ray::PosY;
    let sched = &cfg.schedule;
    let failed = |m: String| Error::HypothesisFailed(m);
    let d1 = classify_piece(s, ray, a1, a, sched, cfg)?;
    let d2 = classify_piece(s, ray, b, b2, sched, cfg)?;
    let d = classify_piece(s, ray, a, b, sched, cfg).map_err(|e| failed(format!("middle piece: {e}")))?;
    if d1.class != PieceClass::FL || d2.class != PieceClass::FL {
        return Err(failed("flanking pieces are not flat".into()));
    }
    let tol = cfg.pieces.sep_tol;
    let need = d1.width_exp.max(d2.width_exp);
    if d.height_exp < need - tol {
        return Err(failed(format!(
            "middle height exponent {:.3} is below flank width exponent {:.3}",
            d.height_exp, need
        )));
    }
    let c = cfg.map.c;
    let m1 = midpoint_arc(a1, a)?;
    let m2 = midpoint_arc(b, b2)?;
    let target = pl_height(s, vec![a1.clone(), m1.clone(), m2.clone(), b2.clone()]);
    let five = pl_height(s, vec![a1.clone(), m1.clone(), a.clone(), b.clone(), m2.clone(), b2.clone()]);

    let mut charts = Vec::new();
    // Target to the five-piece interpolation over the doubled middle.
    let lin_t = Linearization { alpha: arc_curve(&m1), beta: arc_curve(&m2), f: Arc::clone(&five) };
    charts.push(MapChart {
        label: "middle".into(),
        left: m1.clone(),
        right: m2.clone(),
        map: ChartMap::Vertical(build_vertical_map(lin_t, c)?),
    });
    // Fast piece in its rotated chart.
    let slope = match d.class {
        PieceClass::FD => -cfg.map.ell_slope,
        _ => cfg.map.ell_slope,
    };
    if d.class == PieceClass::FL {
        charts.push(MapChart {
            label: "fast".into(),
            left: a.clone(),
            right: b.clone(),
            map: ChartMap::Vertical(build_vertical_map(linearize(s, a, b), c)?),
        });
    } else {
        let patch = rotate_chart(s, a, b, slope, sched)?;
        charts.push(MapChart {
            label: "fast".into(),
            left: a.clone(),
            right: b.clone(),
            map: ChartMap::Rotated(RotatedMap::new(patch, c)?),
        });
    }
    // Flat quarters.
    for (label, l, r) in [("flat 1L", a1, &m1), ("flat 1R", &m1, a), ("flat 2L", b, &m2), ("flat 2R", &m2, b2)] {
        charts.push(MapChart {
            label: label.into(),
            left: l.clone(),
            right: r.clone(),
            map: ChartMap::Vertical(build_vertical_map(linearize(s, l, r), c)?),
        });
    }

    let (target_lip, target_lipschitz) = sampled_lip(&target, a1, b2, &cfg.schedule.clamped(s.eps), cfg);
    let mut bundle = MapBundle { charts, target, target_lip, target_lipschitz, distortion: None };
    let region = SampleRegion::new(a1.clone(), b2.clone(), s, &cfg.schedule.clamped(s.eps));
    bundle.distortion = Some(estimate_distortion(&bundle, &region, cfg.map.n_pairs, cfg.map.seed)?);
    Ok(bundle)
}

fn sampled_lip(h: &Height, l: &ArcSpec, r: &ArcSpec, sched: &SampleSchedule, cfg: &Config) -> (f64, bool) {
    let ys = sched.ys();
    let per: Vec<(f64, f64)> = ys
        .iter()
        .map(|&y| {
            let (a, b) = (l.eval(y), r.eval(y));
            let n = 256;
            let mut m: f64 = 0.0;
            let mut prev = (a, h(a, y));
            for k in 1..=n {
                let x = a + (b - a) * k as f64 / n as f64;
                let z = h(x, y);
                m = m.max(((z - prev.1) / (x - prev.0)).abs());
                prev = (x, z);
            }
            (y, m.max(1e-300))
        })
        .collect();
    let lip = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let bounded = !matches!(classify_samples(&per, 1, &cfg.fit), Ok((LimitClass::Infinite(_), _)));
    (lip, bounded && lip.is_finite())
}

/// Sampling box: `y` log-uniform over the schedule, `x` between two arcs,
/// `z` in a shell around the graph of `f` wide enough to cover the supports.
#[derive(Clone)]
pub struct SampleRegion {
    pub left: ArcSpec,
    pub right: ArcSpec,
    pub y: (f64, f64),
    f: Height,
}

impl SampleRegion {
    pub fn new(left: ArcSpec, right: ArcSpec, s: &SurfaceSpec, sched: &SampleSchedule) -> Self {
        SampleRegion { left, right, y: (sched.last(), sched.y0), f: surface_height(s) }
    }

    fn point(&self, rng: &mut impl Rng, y: f64) -> [f64; 3] {
        let (a, b) = (self.left.eval(y), self.right.eval(y));
        let x = a + (b - a) * rng.gen::<f64>();
        // Shell half-height comparable to the variation of f across the strip.
        let (fa, fb, fx) = ((self.f)(a, y), (self.f)(b, y), (self.f)(x, y));
        let span = 2.0 * ((fa - fx).abs().max((fb - fx).abs()) + (b - a));
        [x, y, fx + span * (2.0 * rng.gen::<f64>() - 1.0)]
    }
}

/// Largest sampled `|H(p) − H(q)| / |p − q|` and its inverse counterpart.
/// Both points are uniform in the sampling box, restricted to a thin common
/// band in `y` so that pairs probe the map at the scale of the slice.
/// Deterministic for a fixed seed: each block of pairs draws from
/// its own ChaCha stream.
pub fn estimate_distortion(m: &(impl PointMap + ?Sized), region: &SampleRegion, n_pairs: usize, seed: u64) -> Result<DistortionEstimate> {
    if n_pairs < 1000 {
        return Err(Error::InvalidSchedule(format!("distortion needs at least 1000 pairs, got {n_pairs}")));
    }
    const BLOCK: usize = 256;
    let blocks = n_pairs.div_ceil(BLOCK);
    let (ly0, ly1) = (region.y.0.ln(), region.y.1.ln());
    let (kf, ki) = (0..blocks)
        .into_par_iter()
        .map(|bi| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(bi as u64);
            let mut kf: f64 = 0.0;
            let mut ki: f64 = 0.0;
            for _ in 0..BLOCK.min(n_pairs - bi * BLOCK) {
                let y = (ly0 + (ly1 - ly0) * rng.gen::<f64>()).exp();
                let yq = y * (1.0 + 0.01 * (2.0 * rng.gen::<f64>() - 1.0));
                let p = region.point(&mut rng, y);
                let q = region.point(&mut rng, yq);
                let d = dist(p, q);
                if !(d > 0.0) {
                    continue;
                }
                let (hp, hq) = (m.eval_map(p), m.eval_map(q));
                let (ip, iq) = (m.eval_inverse(p), m.eval_inverse(q));
                kf = kf.max(dist(hp, hq) / d);
                ki = ki.max(dist(ip, iq) / d);
            }
            (kf, ki)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(DistortionEstimate { k_forward: kf, k_inverse: ki, n_pairs, seed })
}

/// Flat / fast / flat triples of a wedge partition, as arc quadruples.
pub fn partition_triples(p: &crate::pieces::WedgePartition) -> Vec<[ArcSpec; 4]> {
    let mut out = Vec::new();
    for i in 1..p.pieces.len().saturating_sub(1) {
        let (l, m, r) = (&p.pieces[i - 1], &p.pieces[i], &p.pieces[i + 1]);
        if m.class == PieceClass::FL || l.class != PieceClass::FL || r.class != PieceClass::FL {
            continue;
        }
        if let (Some(a1), Some(a), Some(b), Some(b2)) = (&l.left.arc, &m.left.arc, &m.right.arc, &r.right.arc) {
            out.push([a1.clone(), a.clone(), b.clone(), b2.clone()]);
        }
    }
    out
}
