//! Tangent-cone check, Nash fibers over rays, and the exceptional-ray sweep.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arc::{classify_samples, fit_power, FitOptions, LimitClass, PowerFit, SampleSchedule};
use crate::rational::Rational;
use crate::scan::{Chart, ScanOptions, SliceScan};
use crate::surface::{Ray, SurfaceSpec};
use crate::{Config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeOptions {
    /// Angles sampled by the plane-cone check.
    pub plane_angles: usize,
    /// Rays in the exceptional sweep.
    pub sweep_rays: usize,
    /// Half-width of the sector scanned around each swept ray, in degrees.
    pub sector_deg: f64,
    /// Refined rays within this many radians of an axis take the axis label.
    pub axis_snap: f64,
    /// Fibers inside `[-zero_tol, zero_tol]` count as the plane alone.
    pub zero_tol: f64,
    /// Scale factor used to remove a homogeneous cone part before sweeping.
    pub shear_t: f64,
    /// Puiseux denominator for extrapolating extremal-track limits.
    pub track_q: i128,
    /// Supplement extremal tracks with the `(c, s)` arc grid.
    pub arc_grid: bool,
}

impl Default for ConeOptions {
    fn default() -> Self {
        ConeOptions {
            plane_angles: 360,
            sweep_rays: 360,
            sector_deg: 1.0,
            axis_snap: 1e-3,
            zero_tol: 1e-3,
            shear_t: 1e-3,
            track_q: 4,
            arc_grid: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeCheck {
    pub is_plane: bool,
    /// Cone is the graph of a continuous homogeneous function other than `0`.
    pub graph_cone: bool,
    pub ratio_class: LimitClass,
    pub max_ratio_exponent_fit: Option<PowerFit>,
    /// Angle (radians) of the largest `|f|/r` on the smallest circle.
    pub worst_direction: f64,
}

fn circle_profile(s: &SurfaceSpec, r: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            s.f.value(r * t.cos(), r * t.sin()).map_or(f64::NAN, |v| v / r)
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().filter(|x| !x.is_nan()).fold(0.0f64, |m, x| m.max(x.abs()))
}

fn max_jump(v: &[f64]) -> f64 {
    let n = v.len();
    (0..n).map(|k| (v[k] - v[(k + 1) % n]).abs()).filter(|d| !d.is_nan()).fold(0.0, f64::max)
}

pub fn check_plane_cone(s: &SurfaceSpec, n_angles: usize, sched: &SampleSchedule, fit: &FitOptions) -> Result<ConeCheck> {
    if n_angles < 16 {
        return Err(Error::InvalidSchedule(format!("need at least 16 angles, got {n_angles}")));
    }
    let sched = sched.clamped(s.eps);
    sched.validate()?;
    let ys = sched.ys();
    let profiles: Vec<Vec<f64>> = ys.par_iter().map(|&r| circle_profile(s, r, n_angles)).collect();
    let samples: Vec<(f64, f64)> = ys.iter().zip(&profiles).map(|(&r, p)| (r, max_abs(p))).collect();
    let last = profiles.last().expect("schedule is non-empty");
    let worst = (0..n_angles)
        .filter(|&k| !last[k].is_nan())
        .max_by(|&a, &b| last[a].abs().total_cmp(&last[b].abs()))
        .map_or(0.0, |k| 2.0 * PI * k as f64 / n_angles as f64);
    let (ratio_class, fit_rec) = classify_samples(&samples, 1, fit)?;
    let is_plane = ratio_class == LimitClass::Zero;

    let mut graph_cone = false;
    if !is_plane {
        let scale = samples.last().map_or(1.0, |s| s.1.max(1e-300));
        let tail_start = profiles.len().saturating_sub(fit.tail);
        let diffs: Vec<(f64, f64)> = (tail_start..profiles.len() - 1)
            .map(|i| {
                let d = profiles[i]
                    .iter()
                    .zip(&profiles[i + 1])
                    .map(|(a, b)| (a - b).abs())
                    .filter(|d| !d.is_nan())
                    .fold(0.0, f64::max);
                (ys[i], d)
            })
            .collect();
        let collapse = diffs.iter().all(|(_, d)| *d <= 1e-12 * scale)
            || matches!(classify_samples(&diffs, 1, fit), Ok((LimitClass::Zero, _)));
        let r = *ys.last().unwrap();
        let j1 = max_jump(last);
        let j2 = max_jump(&circle_profile(s, r, 2 * n_angles));
        let continuous = j1 <= 1e-12 * scale || j2 <= 0.75 * j1;
        graph_cone = collapse && continuous;
    }
    Ok(ConeCheck { is_plane, graph_cone, ratio_class, max_ratio_exponent_fit: fit_rec, worst_direction: worst })
}

/// Extremal transverse slopes on one slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceProfile {
    pub y: f64,
    pub min: f64,
    pub min_u: f64,
    pub max: f64,
    pub max_u: f64,
    /// Vertical tangents on the slice with the sign of the slope there: grid
    /// points hitting the infinite sentinel, and refined peaks that are poles.
    pub inf_hits: Vec<(f64, i8)>,
}

pub fn slice_profile(chart: &Chart<'_>, v: f64, lo: f64, hi: f64, scan: &ScanOptions) -> SliceProfile {
    let sc = SliceScan::new(chart, v, lo, hi, scan);
    let g = |u: f64| chart.slope(u, v);
    let mx = sc.max(g);
    let mn = sc.min(g);
    let mut inf_hits: Vec<(f64, i8)> = sc
        .us
        .iter()
        .zip(&sc.gs)
        .filter(|(_, g)| g.is_infinite())
        .map(|(u, g)| (*u, g.signum() as i8))
        .collect();
    for e in sc.abs_peaks(g, 1.0) {
        let dup = inf_hits.iter().any(|(u, _)| (u - e.u).abs() <= 1e-6 * e.u.abs().max(v.powi(6)));
        if !dup && chart.is_pole(e.u, v) {
            inf_hits.push((e.u, e.value.signum() as i8));
        }
    }
    inf_hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    SliceProfile {
        y: v,
        min: mn.map_or(f64::NAN, |e| e.value),
        min_u: mn.map_or(f64::NAN, |e| e.u),
        max: mx.map_or(f64::NAN, |e| e.value),
        max_u: mx.map_or(f64::NAN, |e| e.u),
        inf_hits,
    }
}

/// Per-slice extremes of the slope transverse to `ray` over the wedge `|u| ≤ m·v`.
pub fn extremal_slope_profile(s: &SurfaceSpec, ray: Ray, sched: &SampleSchedule, scan: &ScanOptions) -> Vec<SliceProfile> {
    let chart = Chart::new(&s.f, ray);
    let ys = sched.clamped(s.eps).ys();
    ys.par_iter().map(|&v| slice_profile(&chart, v, -s.m * v, s.m * v, scan)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSet {
    #[serde(serialize_with = "serialize_intervals")]
    pub intervals: Vec<(f64, f64)>,
    pub contains_infinity: bool,
    pub is_full: bool,
}

/// Infinite endpoints are written as `"+inf"` / `"-inf"`.
fn serialize_intervals<S: serde::Serializer>(v: &[(f64, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    fn end(x: f64) -> serde_json::Value {
        if x == f64::INFINITY {
            "+inf".into()
        } else if x == f64::NEG_INFINITY {
            "-inf".into()
        } else {
            x.into()
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &(lo, hi) in v {
        seq.serialize_element(&[end(lo), end(hi)])?;
    }
    seq.end()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FiberClass {
    NonExceptional,
    ExceptionalNonFull,
    ExceptionalFull,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub source: String,
    pub limit: Option<LimitClass>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashFiberResult {
    pub ray: Ray,
    pub fiber: SlopeSet,
    pub classification: FiberClass,
    pub evidence: Vec<Evidence>,
    #[serde(skip)]
    pub profile: Vec<SliceProfile>,
}

impl NashFiberResult {
    pub fn is_exceptional(&self) -> bool {
        self.classification != FiberClass::NonExceptional
    }
}

#[derive(Default)]
struct Hull {
    lo: f64,
    hi: f64,
    infinity: bool,
}

impl Hull {
    fn include(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }
}

/// True when the locations `(y, u)` of a track approach the ray tangentially.
fn tangent_track(locs: &[(f64, f64)], fit: &FitOptions) -> bool {
    let tail = &locs[locs.len().saturating_sub(fit.tail)..];
    let abs: Vec<(f64, f64)> = tail.iter().map(|(y, u)| (*y, u.abs())).collect();
    if abs.iter().filter(|(_, u)| *u > 0.0).count() < 3 {
        return true;
    }
    fit_power(&abs).is_ok_and(|f| f.exponent > 1.0 + 0.5 * fit.tol_exp)
}

const ARC_EXPONENTS: [(i128, i128); 8] = [(1, 1), (5, 4), (3, 2), (7, 4), (2, 1), (5, 2), (3, 1), (7, 2)];
const ARC_COEFFS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

pub fn nash_fiber(s: &SurfaceSpec, ray: Ray, cfg: &Config) -> Result<NashFiberResult> {
    let sched = cfg.schedule.clamped(s.eps);
    sched.validate()?;
    let profile = extremal_slope_profile(s, ray, &sched, &cfg.scan);
    let mut hull = Hull { lo: 0.0, hi: 0.0, infinity: false };
    let mut evidence = Vec::new();
    let unresolved = |e: Error| match e {
        Error::NoisyFit { .. } | Error::SignChange | Error::TooFewSamples(_) => {
            Error::UnresolvedFiber { ray: ray.to_string(), reason: e.to_string() }
        }
        other => other,
    };

    for (label, samples, locs) in [
        ("max track", profile.iter().map(|p| (p.y, p.max)).collect::<Vec<_>>(), profile.iter().map(|p| (p.y, p.max_u)).collect::<Vec<_>>()),
        ("min track", profile.iter().map(|p| (p.y, p.min)).collect(), profile.iter().map(|p| (p.y, p.min_u)).collect()),
    ] {
        let (class, _) = classify_samples(&samples, cfg.cone.track_q, &cfg.fit).map_err(unresolved)?;
        let mut note = String::new();
        match class {
            LimitClass::Zero => hull.include(0.0),
            LimitClass::Finite(v) => hull.include(v),
            LimitClass::Infinite(sg) => {
                if tangent_track(&locs, &cfg.fit) {
                    hull.include(sg as f64 * f64::INFINITY);
                    hull.infinity = true;
                } else {
                    note = "track is not tangent to the ray".into();
                }
            }
        }
        evidence.push(Evidence { source: label.into(), limit: Some(class), note });
    }

    if cfg.cone.arc_grid {
        let chart = Chart::new(&s.f, ray);
        let ys = sched.ys();
        let mut arcs = Vec::new();
        for (p, q) in ARC_EXPONENTS {
            for c in ARC_COEFFS {
                for sign in [1.0, -1.0] {
                    arcs.push((Rational::new(p, q), sign * c));
                }
            }
        }
        let results: Vec<_> = arcs
            .par_iter()
            .map(|&(e, c)| {
                let ef = crate::rational::to_f64(&e);
                let samples: Vec<(f64, f64)> = ys
                    .iter()
                    .filter(|&&v| (c * v.powf(ef)).abs() <= s.m * v)
                    .map(|&v| (v, chart.slope(c * v.powf(ef), v)))
                    .collect();
                let res = if samples.len() < cfg.fit.tail {
                    None
                } else {
                    classify_samples(&samples, *e.denom(), &cfg.fit).ok().map(|r| r.0)
                };
                (e, c, res)
            })
            .collect();
        for (e, c, res) in results {
            let source = format!("arc u = {c}*v^{}", crate::rational::format_rational(&e));
            let tangent = e > Rational::from_integer(1);
            match res {
                None => continue,
                Some(LimitClass::Zero) => hull.include(0.0),
                Some(LimitClass::Finite(v)) => hull.include(v),
                Some(LimitClass::Infinite(sg)) if tangent => {
                    hull.include(sg as f64 * f64::INFINITY);
                    hull.infinity = true;
                }
                Some(LimitClass::Infinite(_)) => continue,
            }
            if !matches!(res, Some(LimitClass::Zero)) {
                evidence.push(Evidence { source, limit: res, note: String::new() });
            }
        }
    }

    let is_full = hull.lo == f64::NEG_INFINITY && hull.hi == f64::INFINITY && hull.infinity;
    let classification = if is_full {
        FiberClass::ExceptionalFull
    } else if !hull.infinity && hull.lo >= -cfg.cone.zero_tol && hull.hi <= cfg.cone.zero_tol {
        FiberClass::NonExceptional
    } else {
        FiberClass::ExceptionalNonFull
    };
    let intervals = if classification == FiberClass::NonExceptional { vec![(0.0, 0.0)] } else { vec![(hull.lo, hull.hi)] };
    Ok(NashFiberResult {
        ray,
        fiber: SlopeSet { intervals, contains_infinity: hull.infinity, is_full },
        classification,
        evidence,
        profile,
    })
}

/// How the sweep measures transverse slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SweepMode {
    Plain,
    /// Slope at `p` minus slope at `t·p`; cancels a homogeneous degree-one part.
    Sheared(f64),
}

fn sweep_slope(chart: &Chart<'_>, mode: SweepMode, u: f64, v: f64) -> f64 {
    match mode {
        SweepMode::Plain => chart.slope(u, v),
        SweepMode::Sheared(t) => {
            let (a, b) = (chart.slope(u, v), chart.slope(t * u, t * v));
            let d = a - b;
            // Rounding noise of a homogeneous part is not a deviation.
            if d.abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())) {
                0.0
            } else {
                d
            }
        }
    }
}

fn ray_at(theta: f64) -> Ray {
    Ray::from_angle(theta, 1e-12)
}

/// Whether the sector around `theta` carries non-vanishing transverse slopes.
fn sweep_candidate(s: &SurfaceSpec, theta: f64, ys: &[f64], cfg: &Config, mode: SweepMode) -> bool {
    let chart = Chart::new(&s.f, ray_at(theta));
    let h = cfg.cone.sector_deg.to_radians().tan();
    let samples: Vec<(f64, f64)> = ys
        .iter()
        .map(|&v| {
            let g = |u: f64| sweep_slope(&chart, mode, u, v).abs();
            let sc = SliceScan::with(v, crate::scan::slice_grid(v, -h * v, h * v, &cfg.scan), g, &cfg.scan);
            (v, sc.max(g).map_or(f64::NAN, |e| e.value))
        })
        .collect();
    !matches!(classify_samples(&samples, cfg.cone.track_q, &cfg.fit), Ok((LimitClass::Zero, _)))
}

fn aitken(a: [f64; 3]) -> f64 {
    let d1 = a[1] - a[0];
    let d2 = a[2] - a[1];
    let den = d2 - d1;
    if den.abs() <= 1e-15 * a[2].abs().max(1.0) {
        a[2]
    } else {
        a[2] - d2 * d2 / den
    }
}

/// Extrapolates the limiting direction of slope peaks inside a sector.
fn refine_angle(s: &SurfaceSpec, center: f64, half: f64, ys: &[f64], cfg: &Config, mode: SweepMode) -> f64 {
    let ray = Ray::Angle(center);
    let chart = Chart::new(&s.f, ray);
    let h = half.tan();
    let last: Vec<f64> = ys[ys.len().saturating_sub(3)..].to_vec();
    if last.len() < 3 {
        return center;
    }
    let peaks: Vec<Vec<f64>> = last
        .iter()
        .map(|&v| {
            let g = |u: f64| sweep_slope(&chart, mode, u, v);
            let sc = SliceScan::with(v, crate::scan::slice_grid(v, -h * v, h * v, &cfg.scan), g, &cfg.scan);
            let absg = |u: f64| g(u).abs();
            let top = sc.max(absg).map_or(0.0, |e| e.value);
            let mut ps: Vec<f64> = sc.abs_peaks(g, 0.5 * top.min(f64::MAX)).into_iter().map(|e| e.u).collect();
            if ps.is_empty() {
                if let Some(e) = sc.max(absg) {
                    ps.push(e.u);
                }
            }
            ps.into_iter()
                .map(|u| {
                    let (x, y) = ray.to_plane(u, v);
                    y.atan2(x)
                })
                .collect()
        })
        .collect();
    let unwrap = |a: f64| center + (a - center + PI).rem_euclid(2.0 * PI) - PI;
    let mut estimates = Vec::new();
    if peaks.iter().all(|p| p.len() == peaks[0].len()) && !peaks[0].is_empty() {
        for k in 0..peaks[0].len() {
            estimates.push(aitken([unwrap(peaks[0][k]), unwrap(peaks[1][k]), unwrap(peaks[2][k])]));
        }
    } else if let Some(&a) = peaks[2].first() {
        estimates.push(unwrap(a));
    }
    estimates.retain(|a| (a - center).abs() <= half * 1.5);
    if estimates.is_empty() {
        return center;
    }
    estimates.sort_by(f64::total_cmp);
    estimates[estimates.len() / 2]
}

pub fn exceptional_rays(s: &SurfaceSpec, cfg: &Config) -> Result<Vec<NashFiberResult>> {
    let cone = check_plane_cone(s, cfg.cone.plane_angles, &cfg.schedule, &cfg.fit)?;
    let mode = if !cone.is_plane && cone.graph_cone { SweepMode::Sheared(cfg.cone.shear_t) } else { SweepMode::Plain };
    exceptional_rays_with(s, cfg, mode)
}

pub fn exceptional_rays_with(s: &SurfaceSpec, cfg: &Config, mode: SweepMode) -> Result<Vec<NashFiberResult>> {
    let sched = cfg.schedule.clamped(s.eps);
    sched.validate()?;
    let all = sched.ys();
    let ys: Vec<f64> = all[all.len().saturating_sub(cfg.fit.tail)..].to_vec();
    let n = cfg.cone.sweep_rays.max(8);
    let step = 2.0 * PI / n as f64;
    let candidates: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|k| sweep_candidate(s, step * k as f64, &ys, cfg, mode))
        .collect();

    // Runs of consecutive candidates, cyclically.
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    if candidates.iter().all(|&c| c) {
        clusters.push((0, n));
    } else if candidates.iter().any(|&c| c) {
        let start = (0..n).find(|&k| !candidates[k]).unwrap();
        let mut k = 0;
        while k < n {
            let idx = (start + k) % n;
            if candidates[idx] {
                let first = idx;
                let mut len = 0;
                while k < n && candidates[(start + k) % n] {
                    len += 1;
                    k += 1;
                }
                clusters.push((first, len));
            } else {
                k += 1;
            }
        }
    }

    let sector = cfg.cone.sector_deg.to_radians();
    let rays: Vec<Ray> = clusters
        .par_iter()
        .map(|&(first, len)| {
            let center = step * (first as f64 + (len as f64 - 1.0) / 2.0);
            let half = (step * (len as f64 - 1.0) / 2.0 + sector).min(0.45 * PI);
            let theta = refine_angle(s, center, half, &ys, cfg, mode);
            Ray::from_angle(theta, cfg.cone.axis_snap)
        })
        .collect();

    let mut fibers: Vec<NashFiberResult> = Vec::new();
    for ray in rays {
        if fibers.iter().any(|f| angle_gap(f.ray.angle(), ray.angle()) <= 1e-3) {
            continue;
        }
        let fib = nash_fiber(s, ray, cfg)?;
        if fib.is_exceptional() {
            fibers.push(fib);
        }
    }
    fibers.sort_by(|a, b| a.ray.angle().total_cmp(&b.ray.angle()));
    Ok(fibers)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}
