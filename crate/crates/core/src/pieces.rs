//! Flat/fast piece decomposition of a wedge around an exceptional ray,
//! separation checks and the plane verdict.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arc::{classify_samples, fit_power, ArcSpec, LimitClass, PowerFit, SampleSchedule};
use crate::cone::{check_plane_cone, exceptional_rays, ConeCheck, NashFiberResult};
use crate::rational::snap;
use crate::scan::{Chart, Extremum, ScanOptions, SliceScan};
use crate::surface::{Ray, SurfaceSpec};
use crate::{Config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PieceOptions {
    /// Slope level `K` separating flat from fast.
    pub fast_k: f64,
    /// Equality band for exponent comparisons.
    pub sep_tol: f64,
    /// Interior samples per slice when classifying a piece.
    pub interior_samples: usize,
    /// Exponent snapping for reported boundary arcs.
    pub snap_denom: i128,
    pub snap_tol: f64,
}

impl Default for PieceOptions {
    fn default() -> Self {
        PieceOptions { fast_k: 1.0, sep_tol: 0.05, interior_samples: 64, snap_denom: 12, snap_tol: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    FxZero,
    FxBlowup,
    SignChange,
    SyntheticStrip,
    WedgeEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    OnRay,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryArc {
    pub kind: BoundaryKind,
    /// `(y, u)` per slice, `u` transverse to the ray.
    pub track: Vec<(f64, f64)>,
    /// Fit of `|u|`; `None` when the track lies on the ray.
    pub fit: Option<PowerFit>,
    pub side: Side,
    /// Snapped Puiseux form, when the exponents are recognisable.
    pub arc: Option<ArcSpec>,
}

impl BoundaryArc {
    fn from_track(kind: BoundaryKind, track: Vec<(f64, f64)>, tail: usize) -> Self {
        let t = &track[track.len().saturating_sub(tail)..];
        let abs: Vec<(f64, f64)> = t.iter().map(|(y, u)| (*y, u.abs())).collect();
        let fit = fit_power(&abs).ok();
        let pos = t.iter().filter(|p| p.1 > 0.0).count();
        let neg = t.iter().filter(|p| p.1 < 0.0).count();
        let side = if pos == 0 && neg == 0 {
            Side::OnRay
        } else if pos >= neg {
            Side::Right
        } else {
            Side::Left
        };
        BoundaryArc { kind, track, fit, side, arc: None }
    }

    fn u_at(&self, i: usize) -> f64 {
        self.track[i].1
    }

    /// Leading exponent of the snapped arc, else of the fit.
    pub fn leading_exponent(&self) -> Option<f64> {
        match (&self.arc, &self.fit) {
            (Some(a), _) if !a.terms().is_empty() => a.leading_exponent().map(|e| crate::rational::to_f64(&e)),
            (_, Some(f)) => Some(f.exponent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PieceClass {
    FL,
    FI,
    FD,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PieceRecord {
    pub left: BoundaryArc,
    pub right: BoundaryArc,
    pub class: PieceClass,
    /// Gap `≍ y^ω`.
    pub width_exp: f64,
    /// Range of `z` over the piece `≍ y^η`.
    pub height_exp: f64,
    pub width_fit: PowerFit,
    pub height_fit: PowerFit,
    /// Largest sampled `|slope|` for flat pieces.
    pub lip_bound: Option<f64>,
    pub slope_sign_evidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WedgeSide {
    Full,
    Right,
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WedgePartition {
    pub ray: Ray,
    pub side: WedgeSide,
    pub pieces: Vec<PieceRecord>,
    pub alternation_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstruction {
    /// Indices of `P₁`, the flat run, and `P₃`.
    pub p1: usize,
    pub flat: (usize, usize),
    pub p3: usize,
    pub omega_union: f64,
    pub eta_p1: f64,
    pub eta_p3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SeparationVerdict {
    WellSeparated,
    Obstructed(Obstruction),
    Inconclusive(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BilipReason {
    NoExceptionalRays,
    AllWedgesWellSeparated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PlaneVerdict {
    BilipToPlane(BilipReason),
    NotBilipToPlane { ray: Ray, obstruction: Obstruction },
    Unknown(String),
}

impl PlaneVerdict {
    /// Short label such as `BilipToPlane(NoExceptionalRays)`.
    pub fn label(&self) -> String {
        match self {
            PlaneVerdict::BilipToPlane(r) => format!("BilipToPlane({r:?})"),
            PlaneVerdict::NotBilipToPlane { .. } => "NotBilipToPlane".into(),
            PlaneVerdict::Unknown(_) => "Unknown".into(),
        }
    }
}

fn wedge_bounds(m: f64, v: f64, side: WedgeSide) -> (f64, f64) {
    match side {
        WedgeSide::Full => (-m * v, m * v),
        WedgeSide::Right => (0.0, m * v),
        WedgeSide::Left => (-m * v, 0.0),
    }
}

/// A sequence of peak or zero locations followed across slices.
#[derive(Debug, Clone)]
struct Track {
    /// `(slice index, extremum)`.
    points: Vec<(usize, Extremum)>,
}

impl Track {
    fn last(&self) -> &(usize, Extremum) {
        self.points.last().unwrap()
    }

    fn predict(&self) -> (f64, f64) {
        let (_, e) = self.last();
        let n = self.points.len();
        if n >= 2 && e.u != 0.0 && self.points[n - 2].1.u != 0.0 {
            let prev = self.points[n - 2].1.u;
            let step = e.u.abs().ln() - prev.abs().ln();
            (e.u.abs().ln() + step, 0.7)
        } else {
            (e.u.abs().ln(), 1.5)
        }
    }
}

/// Greedy nearest-log-position matching of per-slice locations.
fn follow(per_slice: &[Vec<Extremum>]) -> Vec<Track> {
    let mut open: Vec<Track> = Vec::new();
    let mut done: Vec<Track> = Vec::new();
    for (i, cands) in per_slice.iter().enumerate() {
        let mut claimed = vec![false; cands.len()];
        let mut next_open = Vec::new();
        for tr in open.drain(..) {
            let (_, last) = *tr.last();
            let (pred, window) = tr.predict();
            let best = cands
                .iter()
                .enumerate()
                .filter(|(k, c)| !claimed[*k] && c.u.signum() == last.u.signum())
                .map(|(k, c)| {
                    let d = if c.u == 0.0 && last.u == 0.0 { 0.0 } else { (c.u.abs().ln() - pred).abs() };
                    (k, d)
                })
                .filter(|(_, d)| *d <= window)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((k, _)) => {
                    claimed[k] = true;
                    let mut tr = tr;
                    tr.points.push((i, cands[k]));
                    next_open.push(tr);
                }
                None => done.push(tr),
            }
        }
        for (k, c) in cands.iter().enumerate() {
            if !claimed[k] {
                next_open.push(Track { points: vec![(i, *c)] });
            }
        }
        open = next_open;
    }
    done.extend(open);
    done
}

struct SliceData {
    v: f64,
    lo: f64,
    hi: f64,
    scan: SliceScan,
    peaks: Vec<Extremum>,
    zeros: Vec<f64>,
}

fn scan_slices(chart: &Chart<'_>, ys: &[f64], m: f64, side: WedgeSide, k: f64, opts: &ScanOptions) -> Vec<SliceData> {
    ys.par_iter()
        .map(|&v| {
            let (lo, hi) = wedge_bounds(m, v, side);
            let scan = SliceScan::new(chart, v, lo, hi, opts);
            let g = |u: f64| chart.slope(u, v);
            let peaks = scan.abs_peaks(g, k);
            let zeros = scan.zeros(g);
            SliceData { v, lo, hi, scan, peaks, zeros }
        })
        .collect()
}

/// Tracks of slope zeros and slope blowups, with fitted location exponents.
pub fn track_critical_arcs(s: &SurfaceSpec, ray: Ray, sched: &SampleSchedule, cfg: &Config) -> Result<Vec<BoundaryArc>> {
    let sched = sched.clamped(s.eps);
    sched.validate()?;
    let ys = sched.ys();
    let chart = Chart::new(&s.f, ray);
    let data = scan_slices(&chart, &ys, s.m, WedgeSide::Full, cfg.pieces.fast_k, &cfg.scan);
    let min_len = ys.len().div_ceil(2);
    let mut out = Vec::new();
    let zeros: Vec<Vec<Extremum>> =
        data.iter().map(|d| d.zeros.iter().map(|&u| Extremum { u, value: 0.0 }).collect()).collect();
    for tr in follow(&zeros) {
        if tr.points.len() >= min_len {
            let track = tr.points.iter().map(|(i, e)| (ys[*i], e.u)).collect();
            out.push(BoundaryArc::from_track(BoundaryKind::FxZero, track, cfg.fit.tail));
        }
    }
    let peaks: Vec<Vec<Extremum>> = data.iter().map(|d| d.peaks.clone()).collect();
    for tr in blowup_tracks(&chart, &ys, &peaks, cfg) {
        let track = tr.points.iter().map(|(i, e)| (ys[*i], e.u)).collect();
        out.push(BoundaryArc::from_track(BoundaryKind::FxBlowup, track, cfg.fit.tail));
    }
    out.sort_by(|a, b| a.track.last().unwrap().1.total_cmp(&b.track.last().unwrap().1));
    Ok(out)
}

/// Peak tracks reaching the last slice whose magnitudes diverge, either
/// along the track or at a pole on every tail slice.
fn blowup_tracks(chart: &Chart<'_>, ys: &[f64], peaks: &[Vec<Extremum>], cfg: &Config) -> Vec<Track> {
    let n_slices = ys.len();
    let tail = cfg.fit.tail.min(n_slices);
    follow(peaks)
        .into_iter()
        .filter(|tr| tr.last().0 + 1 == n_slices && tr.points.len() >= tail)
        .filter(|tr| {
            let samples: Vec<(f64, f64)> = tr.points.iter().map(|(i, e)| (ys[*i], e.value.abs())).collect();
            let growing = matches!(classify_samples(&samples, 1, &cfg.fit), Ok((LimitClass::Infinite(_), _)));
            growing || tr.points[tr.points.len() - tail..].iter().all(|(i, e)| chart.is_pole(e.u, ys[*i]))
        })
        .collect()
}

/// Per-slice description of a piece: `(v, left u, right u)`.
type Strip = Vec<(f64, f64, f64)>;

struct Measure {
    class: PieceClass,
    width_fit: PowerFit,
    height_fit: PowerFit,
    lip_bound: Option<f64>,
    evidence: String,
}

fn interior_points(l: f64, r: f64, n: usize) -> Vec<f64> {
    // Geometric clustering toward both ends.
    let half = n / 2;
    let w = r - l;
    let mut pts = Vec::with_capacity(n + 2);
    pts.push(l);
    for k in 1..=half {
        let t = 0.5 * (1e-6f64).powf(1.0 - k as f64 / half as f64);
        pts.push(l + t * w);
    }
    for k in (1..half).rev() {
        let t = 0.5 * (1e-6f64).powf(1.0 - k as f64 / half as f64);
        pts.push(r - t * w);
    }
    pts.push(r);
    pts
}

fn measure(chart: &Chart<'_>, strip: &Strip, fast: Option<PieceClass>, cfg: &Config) -> Result<Measure> {
    let tail = &strip[strip.len().saturating_sub(cfg.fit.tail)..];
    let n = cfg.pieces.interior_samples.max(8);
    let mut gaps = Vec::new();
    let mut ranges = Vec::new();
    let mut maxabs = Vec::new();
    let (mut pos, mut neg) = (0usize, 0usize);
    let mut min_abs_interior = f64::INFINITY;
    for &(v, l, r) in tail {
        if !(r > l) {
            return Err(Error::DegenerateGap { y: v, gap: r - l });
        }
        gaps.push((v, r - l));
        let pts = interior_points(l, r, n);
        let zs: Vec<f64> = pts.iter().map(|&u| chart.value(u, v)).collect();
        let gs: Vec<f64> = pts.iter().map(|&u| chart.slope(u, v)).collect();
        for (i, g) in gs.iter().enumerate() {
            if *g > 0.0 {
                pos += 1;
            } else if *g < 0.0 {
                neg += 1;
            }
            if i > 0 && i + 1 < gs.len() {
                min_abs_interior = min_abs_interior.min(g.abs());
            }
        }
        let zmax = zs.iter().copied().filter(|z| !z.is_nan()).fold(f64::NEG_INFINITY, f64::max);
        let zmin = zs.iter().copied().filter(|z| !z.is_nan()).fold(f64::INFINITY, f64::min);
        let range = if fast.is_some() { (zs[zs.len() - 1] - zs[0]).abs() } else { zmax - zmin };
        ranges.push((v, range));
        maxabs.push((v, gs.iter().map(|g| g.abs()).filter(|g| !g.is_nan()).fold(0.0, f64::max)));
    }
    let width_fit = fit_power(&gaps)?;
    let height_fit = fit_power(&ranges)?;
    let bounded = !matches!(classify_samples(&maxabs, 1, &cfg.fit), Ok((LimitClass::Infinite(_), _)));
    let evidence = format!("{pos} positive / {neg} negative interior slopes, min |slope| {min_abs_interior:.3e}");
    let class = match fast {
        Some(c) => c,
        None if bounded => PieceClass::FL,
        None => {
            if pos > 0 && neg > 0 {
                return Err(Error::MixedSign { y: tail.last().unwrap().0 });
            }
            if pos > 0 {
                PieceClass::FI
            } else {
                PieceClass::FD
            }
        }
    };
    if class == PieceClass::FI && neg > 0 || class == PieceClass::FD && pos > 0 {
        return Err(Error::MixedSign { y: tail.last().unwrap().0 });
    }
    let lip_bound = (class == PieceClass::FL).then(|| maxabs.iter().map(|m| m.1).fold(0.0, f64::max));
    Ok(Measure { class, width_fit, height_fit, lip_bound, evidence })
}

fn arc_boundary(arc: &ArcSpec, ys: &[f64], kind: BoundaryKind, tail: usize) -> BoundaryArc {
    let track = ys.iter().map(|&y| (y, arc.eval(y))).collect();
    let mut b = BoundaryArc::from_track(kind, track, tail);
    b.arc = Some(arc.clone());
    b
}

/// Classifies the strip between two arcs given in the chart of `ray`.
pub fn classify_piece(
    s: &SurfaceSpec,
    ray: Ray,
    left: &ArcSpec,
    right: &ArcSpec,
    sched: &SampleSchedule,
    cfg: &Config,
) -> Result<PieceRecord> {
    let sched = sched.clamped(s.eps);
    sched.validate()?;
    let ys = sched.ys();
    let chart = Chart::new(&s.f, ray);
    let strip: Strip = ys.iter().map(|&v| (v, left.eval(v), right.eval(v))).collect();
    let m = measure(&chart, &strip, None, cfg)?;
    Ok(PieceRecord {
        left: arc_boundary(left, &ys, BoundaryKind::SyntheticStrip, cfg.fit.tail),
        right: arc_boundary(right, &ys, BoundaryKind::SyntheticStrip, cfg.fit.tail),
        class: m.class,
        width_exp: m.width_fit.exponent,
        height_exp: m.height_fit.exponent,
        width_fit: m.width_fit,
        height_fit: m.height_fit,
        lip_bound: m.lip_bound,
        slope_sign_evidence: m.evidence,
    })
}

/// Snapped two-term arc `center ± offset` for a strip edge.
fn edge_arc(center: &[(f64, f64)], edge: &[(f64, f64)], opts: &PieceOptions) -> Option<ArcSpec> {
    let c_abs: Vec<(f64, f64)> = center.iter().map(|(y, u)| (*y, u.abs())).collect();
    let off: Vec<(f64, f64)> = center.iter().zip(edge).map(|(c, e)| (c.0, e.1 - c.1)).collect();
    let sign_c = center.last()?.1.signum();
    let sign_o = off.last()?.1.signum();
    let off_abs: Vec<(f64, f64)> = off.iter().map(|(y, d)| (*y, d.abs())).collect();
    let fo = fit_power(&off_abs).ok()?;
    let eo = snap(fo.exponent, opts.snap_denom, opts.snap_tol)?;
    let co = sign_o * fo.log_coeff.exp();
    if center.iter().all(|p| p.1 == 0.0) {
        return ArcSpec::new(vec![(co, eo)], 1).ok();
    }
    let fc = fit_power(&c_abs).ok()?;
    let ec = snap(fc.exponent, opts.snap_denom, opts.snap_tol)?;
    let cc = sign_c * fc.log_coeff.exp();
    if eo > ec {
        ArcSpec::new(vec![(cc, ec), (co, eo)], 1).ok()
    } else {
        single_arc(edge, opts)
    }
}

fn single_arc(track: &[(f64, f64)], opts: &PieceOptions) -> Option<ArcSpec> {
    if track.iter().all(|p| p.1 == 0.0) {
        return Some(ArcSpec::axis());
    }
    let abs: Vec<(f64, f64)> = track.iter().map(|(y, u)| (*y, u.abs())).collect();
    let f = fit_power(&abs).ok()?;
    let e = snap(f.exponent, opts.snap_denom, opts.snap_tol)?;
    ArcSpec::new(vec![(track.last()?.1.signum() * f.log_coeff.exp(), e)], 1).ok()
}

/// A fast zone on the tail slices: per-slice `(left, right)` and its peak track.
#[derive(Clone)]
struct Zone {
    edges: Vec<(f64, f64)>,
    centers: Vec<Vec<f64>>,
}

pub fn partition_wedge(s: &SurfaceSpec, ray: Ray, side: WedgeSide, cfg: &Config) -> Result<WedgePartition> {
    let sched = cfg.schedule.clamped(s.eps);
    sched.validate()?;
    let ys = sched.ys();
    let chart = Chart::new(&s.f, ray);
    let k = cfg.pieces.fast_k;
    let data = scan_slices(&chart, &ys, s.m, side, k, &cfg.scan);
    let peaks: Vec<Vec<Extremum>> = data.iter().map(|d| d.peaks.clone()).collect();
    let blow = blowup_tracks(&chart, &ys, &peaks, cfg);

    let n_tail = cfg.fit.tail.min(ys.len());
    let first = ys.len() - n_tail;
    let tail_ys = &ys[first..];

    // Fast zones per tail slice.
    let mut zones_per_slice: Vec<Vec<(f64, f64, Vec<f64>)>> = Vec::with_capacity(n_tail);
    for i in first..ys.len() {
        let d = &data[i];
        let v = d.v;
        let g = |u: f64| chart.slope(u, v);
        let mut centers: Vec<f64> = blow
            .iter()
            .filter_map(|tr| tr.points.iter().find(|(j, _)| *j == i).map(|(_, e)| e.u))
            .collect();
        centers.sort_by(f64::total_cmp);
        let mut zs: Vec<(f64, f64, Vec<f64>)> = Vec::new();
        for c in centers {
            let l = d.scan.level_crossing(g, c, k, -1).unwrap_or(d.lo);
            let r = d.scan.level_crossing(g, c, k, 1).unwrap_or(d.hi);
            match zs.last_mut() {
                Some(last) if l <= last.1 => {
                    last.1 = last.1.max(r);
                    last.2.push(c);
                }
                _ => zs.push((l, r, vec![c])),
            }
        }
        zones_per_slice.push(zs);
    }
    let nz = zones_per_slice.first().map_or(0, |z| z.len());
    if zones_per_slice.iter().any(|z| z.len() != nz) {
        let counts: Vec<usize> = zones_per_slice.iter().map(|z| z.len()).collect();
        return Err(Error::PartitionFailure(format!("fast-zone count varies across slices: {counts:?}")));
    }
    let mut zones: Vec<Zone> = (0..nz)
        .map(|j| Zone {
            edges: zones_per_slice.iter().map(|z| (z[j].0, z[j].1)).collect(),
            centers: zones_per_slice.iter().map(|z| z[j].2.clone()).collect(),
        })
        .collect();

    // Decide each zone's sign; split at a blowup track where the sign flips.
    let n = cfg.pieces.interior_samples;
    let sign_of = |l: f64, r: f64, v: f64| -> (usize, usize) {
        let pts = interior_points(l, r, n);
        let mut p = 0;
        let mut q = 0;
        for u in &pts[1..pts.len() - 1] {
            let g = chart.slope(*u, v);
            if g > 0.0 {
                p += 1;
            } else if g < 0.0 {
                q += 1;
            }
        }
        (p, q)
    };
    let mut fast: Vec<(Zone, PieceClass, BoundaryKind, BoundaryKind)> = Vec::new();
    for z in zones.drain(..) {
        let mixed = z.edges.iter().zip(tail_ys).any(|(&(l, r), &v)| {
            let (p, q) = sign_of(l, r, v);
            p > 0 && q > 0
        });
        if !mixed {
            let (p, _) = sign_of(z.edges[0].0, z.edges[0].1, tail_ys[0]);
            let class = if p > 0 { PieceClass::FI } else { PieceClass::FD };
            fast.push((z, class, BoundaryKind::SyntheticStrip, BoundaryKind::SyntheticStrip));
            continue;
        }
        // Split at the first blowup center of each slice.
        let left = Zone {
            edges: z.edges.iter().zip(&z.centers).map(|(e, c)| (e.0, c[0])).collect(),
            centers: z.centers.clone(),
        };
        let right = Zone {
            edges: z.edges.iter().zip(&z.centers).map(|(e, c)| (c[0], e.1)).collect(),
            centers: z.centers.clone(),
        };
        for (part, lk, rk) in [
            (left, BoundaryKind::SyntheticStrip, BoundaryKind::SignChange),
            (right, BoundaryKind::SignChange, BoundaryKind::SyntheticStrip),
        ] {
            let mut cls = None;
            for (&(l, r), &v) in part.edges.iter().zip(tail_ys) {
                let (p, q) = sign_of(l, r, v);
                if p > 0 && q > 0 {
                    return Err(Error::PartitionFailure(format!(
                        "slope changes sign inside a fast zone at y = {v:e}"
                    )));
                }
                cls = Some(if p > 0 { PieceClass::FI } else { PieceClass::FD });
            }
            fast.push((part, cls.unwrap(), lk, rk));
        }
    }

    // Assemble boundaries left to right.
    struct Bd {
        kind: BoundaryKind,
        track: Vec<(f64, f64)>,
        arc: Option<ArcSpec>,
    }
    let edge_track = |f: &dyn Fn(f64) -> f64| -> Vec<(f64, f64)> { tail_ys.iter().map(|&v| (v, f(v))).collect() };
    let (lo_kind, hi_kind) = match side {
        WedgeSide::Full => (BoundaryKind::WedgeEdge, BoundaryKind::WedgeEdge),
        WedgeSide::Right => (BoundaryKind::FxZero, BoundaryKind::WedgeEdge),
        WedgeSide::Left => (BoundaryKind::WedgeEdge, BoundaryKind::FxZero),
    };
    let m = s.m;
    let lo_track = edge_track(&|v| wedge_bounds(m, v, side).0);
    let hi_track = edge_track(&|v| wedge_bounds(m, v, side).1);
    let opts = &cfg.pieces;
    let mut bounds: Vec<Bd> = vec![Bd { kind: lo_kind, arc: single_arc(&lo_track, opts), track: lo_track }];
    let mut classes: Vec<PieceClass> = Vec::new();
    let center_track = |z: &Zone| -> Vec<(f64, f64)> {
        tail_ys.iter().zip(&z.centers).map(|(&v, c)| (v, c[c.len() / 2])).collect()
    };
    for (z, class, lk, rk) in &fast {
        let lt: Vec<(f64, f64)> = tail_ys.iter().zip(&z.edges).map(|(&v, e)| (v, e.0)).collect();
        let rt: Vec<(f64, f64)> = tail_ys.iter().zip(&z.edges).map(|(&v, e)| (v, e.1)).collect();
        let ct = center_track(z);
        let last = bounds.last().unwrap();
        let touching = last.track.iter().zip(&lt).all(|(a, b)| (a.1 - b.1).abs() <= 1e-15 * a.1.abs().max(1e-300));
        if !touching {
            classes.push(PieceClass::FL);
            let arc = if *lk == BoundaryKind::SignChange { single_arc(&lt, opts) } else { edge_arc(&ct, &lt, opts) };
            bounds.push(Bd { kind: *lk, track: lt, arc });
        }
        classes.push(*class);
        let arc = if *rk == BoundaryKind::SignChange { single_arc(&rt, opts) } else { edge_arc(&ct, &rt, opts) };
        bounds.push(Bd { kind: *rk, track: rt, arc });
    }
    let last = bounds.last().unwrap();
    let touching = last.track.iter().zip(&hi_track).all(|(a, b)| (a.1 - b.1).abs() <= 1e-15 * b.1.abs().max(1e-300));
    if touching {
        let hb = bounds.last_mut().unwrap();
        hb.kind = hi_kind;
    } else {
        classes.push(PieceClass::FL);
        bounds.push(Bd { kind: hi_kind, arc: single_arc(&hi_track, opts), track: hi_track });
    }

    // Split a flat gap lying strictly on one side between two fast pieces.
    let mut i = 1;
    while i + 1 < classes.len() {
        if classes[i] == PieceClass::FL && classes[i - 1] != PieceClass::FL && classes[i + 1] != PieceClass::FL {
            let (l, r) = (&bounds[i].track, &bounds[i + 1].track);
            let same_side = l.iter().zip(r).all(|(a, b)| a.1 * b.1 > 0.0);
            if same_side {
                let mid: Vec<(f64, f64)> =
                    l.iter().zip(r).map(|(a, b)| (a.0, a.1.signum() * (a.1 * b.1).sqrt())).collect();
                let arc = single_arc(&mid, opts);
                bounds.insert(i + 1, Bd { kind: BoundaryKind::SyntheticStrip, track: mid, arc });
                classes.insert(i, PieceClass::FL);
                i += 1;
            }
        }
        i += 1;
    }

    let tail = cfg.fit.tail;
    let arcs: Vec<BoundaryArc> = bounds
        .into_iter()
        .map(|b| {
            let mut ba = BoundaryArc::from_track(b.kind, b.track, tail);
            ba.arc = b.arc;
            ba
        })
        .collect();
    let mut pieces = Vec::with_capacity(classes.len());
    for (j, class) in classes.iter().enumerate() {
        let (l, r) = (&arcs[j], &arcs[j + 1]);
        let strip: Strip = (0..n_tail).map(|t| (tail_ys[t], l.u_at(t), r.u_at(t))).collect();
        let fast_class = (*class != PieceClass::FL).then_some(*class);
        let m = measure(&chart, &strip, fast_class, cfg)?;
        if *class == PieceClass::FL && m.class != PieceClass::FL {
            return Err(Error::PartitionFailure(format!("flat gap {j} carries unbounded slopes")));
        }
        pieces.push(PieceRecord {
            left: l.clone(),
            right: r.clone(),
            class: *class,
            width_exp: m.width_fit.exponent,
            height_exp: m.height_fit.exponent,
            width_fit: m.width_fit,
            height_fit: m.height_fit,
            lip_bound: m.lip_bound,
            slope_sign_evidence: m.evidence,
        });
    }
    let alternation_ok = alternates(&classes);
    Ok(WedgePartition { ray, side, pieces, alternation_ok })
}

/// Flat runs and fast pieces alternate, starting and ending flat, with fast
/// pieces alternating between increasing and decreasing.
fn alternates(classes: &[PieceClass]) -> bool {
    let mut runs: Vec<PieceClass> = Vec::new();
    for c in classes {
        if *c == PieceClass::FL && runs.last() == Some(&PieceClass::FL) {
            continue;
        }
        runs.push(*c);
    }
    let shape = runs.iter().enumerate().all(|(i, c)| (i % 2 == 0) == (*c == PieceClass::FL));
    let fast: Vec<&PieceClass> = runs.iter().filter(|c| **c != PieceClass::FL).collect();
    shape && runs.len() % 2 == 1 && fast.windows(2).all(|w| w[0] != w[1])
}

fn union_width(p: &WedgePartition, a: usize, b: usize) -> Option<f64> {
    let l = &p.pieces[a].left.track;
    let r = &p.pieces[b].right.track;
    let gaps: Vec<(f64, f64)> = l.iter().zip(r).map(|(x, y)| (x.0, y.1 - x.1)).collect();
    fit_power(&gaps).ok().map(|f| f.exponent)
}

pub fn check_well_separated(p: &WedgePartition, tol: f64) -> SeparationVerdict {
    if !p.alternation_ok {
        return SeparationVerdict::Inconclusive("pieces do not alternate between flat and fast".into());
    }
    let n = p.pieces.len();
    let mut violated = false;
    for i in 0..n {
        if p.pieces[i].class != PieceClass::FL {
            continue;
        }
        for j in [i.wrapping_sub(1), i + 1] {
            if j < n && p.pieces[j].class != PieceClass::FL && p.pieces[i].width_exp > p.pieces[j].height_exp + tol {
                violated = true;
            }
        }
    }
    if !violated {
        return SeparationVerdict::WellSeparated;
    }
    // Obstruction search over fast / flat-run / fast triples of opposite kinds.
    let mut best: Option<Obstruction> = None;
    let mut band = false;
    let mut i = 0;
    while i < n {
        if p.pieces[i].class != PieceClass::FL {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && p.pieces[i].class == PieceClass::FL {
            i += 1;
        }
        let end = i - 1;
        if start == 0 || end + 1 >= n {
            continue;
        }
        let (a, b) = (start - 1, end + 1);
        if p.pieces[a].class == p.pieces[b].class {
            continue;
        }
        let Some(omega) = union_width(p, a, b) else { continue };
        let (ea, eb) = (p.pieces[a].height_exp, p.pieces[b].height_exp);
        let bound = ea.max(eb);
        if omega > bound + tol {
            let ob = Obstruction { p1: a, flat: (start, end), p3: b, omega_union: omega, eta_p1: ea, eta_p3: eb };
            if best.as_ref().is_none_or(|o| omega > o.omega_union) {
                best = Some(ob);
            }
        } else if omega > bound - tol {
            band = true;
        }
    }
    match best {
        Some(ob) => SeparationVerdict::Obstructed(ob),
        None if band => SeparationVerdict::Inconclusive("width and height exponents agree within tolerance".into()),
        None => SeparationVerdict::Inconclusive("a flat piece is narrower than an adjacent height, but no obstruction triple exists".into()),
    }
}

/// Everything the verdict rests on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneAnalysis {
    pub cone: ConeCheck,
    pub fibers: Vec<NashFiberResult>,
    pub partitions: Vec<(WedgePartition, SeparationVerdict)>,
    pub failures: Vec<(Ray, String)>,
    pub verdict: PlaneVerdict,
}

/// Combines the stage results into a verdict. Any obstruction wins; otherwise
/// a positive answer needs a regular cone and every wedge well separated.
pub fn decide_verdict(
    cone: &ConeCheck,
    fibers: &[NashFiberResult],
    partitions: &[(WedgePartition, SeparationVerdict)],
    failures: &[(Ray, String)],
) -> PlaneVerdict {
    let obstruction = partitions.iter().find_map(|(p, v)| match v {
        SeparationVerdict::Obstructed(o) => Some((p.ray, o.clone())),
        _ => None,
    });
    let all_separated =
        failures.is_empty() && partitions.iter().all(|(_, v)| *v == SeparationVerdict::WellSeparated);
    let regular_cone = cone.is_plane || cone.graph_cone;
    if let Some((ray, obstruction)) = obstruction {
        PlaneVerdict::NotBilipToPlane { ray, obstruction }
    } else if !regular_cone {
        PlaneVerdict::Unknown("tangent cone is not a graph over the plane".into())
    } else if fibers.is_empty() {
        PlaneVerdict::BilipToPlane(BilipReason::NoExceptionalRays)
    } else if all_separated && cone.is_plane {
        PlaneVerdict::BilipToPlane(BilipReason::AllWedgesWellSeparated)
    } else if !failures.is_empty() {
        PlaneVerdict::Unknown(format!("partition failed: {}", failures[0].1))
    } else {
        PlaneVerdict::Unknown("some wedge is neither well separated nor obstructed".into())
    }
}

pub fn analyze_plane(s: &SurfaceSpec, cfg: &Config) -> Result<PlaneAnalysis> {
    let cone = check_plane_cone(s, cfg.cone.plane_angles, &cfg.schedule, &cfg.fit)?;
    let fibers = exceptional_rays(s, cfg)?;
    let mut partitions = Vec::new();
    let mut failures = Vec::new();
    for fib in &fibers {
        match partition_wedge(s, fib.ray, WedgeSide::Full, cfg) {
            Ok(p) => {
                let v = check_well_separated(&p, cfg.pieces.sep_tol);
                partitions.push((p, v));
            }
            Err(e) => failures.push((fib.ray, e.to_string())),
        }
    }
    let verdict = decide_verdict(&cone, &fibers, &partitions, &failures);
    Ok(PlaneAnalysis { cone, fibers, partitions, failures, verdict })
}

pub fn plane_verdict(s: &SurfaceSpec, cfg: &Config) -> Result<PlaneVerdict> {
    analyze_plane(s, cfg).map(|a| a.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    fn r(p: i128, q: i128) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn unit_slope_strip() {
        let s = SurfaceSpec::parse("tilt", "x", 1.0, 0.1).unwrap();
        let cfg = Config::default();
        let left = ArcSpec::axis();
        let right = ArcSpec::monomial(1.0, r(2, 1)).unwrap();
        let p = classify_piece(&s, Ray::PosY, &left, &right, &cfg.schedule, &cfg).unwrap();
        assert_eq!(p.class, PieceClass::FL);
        assert!((p.lip_bound.unwrap() - 1.0).abs() < 1e-12);
        assert!((p.width_exp - 2.0).abs() < 1e-9);
        assert!((p.height_exp - 2.0).abs() < 1e-9);
    }

    #[test]
    fn alternation_shapes() {
        use PieceClass::*;
        assert!(alternates(&[FL]));
        assert!(alternates(&[FL, FI, FL, FD, FL]));
        assert!(alternates(&[FL, FD, FL, FL, FI, FL]));
        assert!(!alternates(&[FL, FI, FL, FI, FL]));
        assert!(!alternates(&[FI, FL]));
    }

    #[test]
    fn product_has_no_critical_tracks() {
        let s = SurfaceSpec::parse("xy", "x*y", 1.0, 0.1).unwrap();
        let cfg = Config::default();
        assert!(track_critical_arcs(&s, Ray::PosY, &cfg.schedule, &cfg).unwrap().is_empty());
    }
}
