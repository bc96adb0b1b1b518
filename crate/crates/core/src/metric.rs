//! Inner-metric estimates from shortest paths on refined graph meshes, and the
//! ℓ-regularity probe built on them.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arc::{fit_power, ArcSpec, PowerFit, SampleSchedule};
use crate::expr::Expr;
use crate::surface::SurfaceSpec;
use crate::{Config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    /// Base grid columns and rows of a patch.
    pub base_nx: usize,
    pub base_ny: usize,
    /// An x-interval is split while `|f_x|` on it exceeds this.
    pub refine_threshold: f64,
    pub max_level: u32,
    /// Relative change of the probe distance that ends refinement.
    pub converge_tol: f64,
    pub straighten_passes: usize,
    /// Probe strip: `y·(1 ± y_halfwidth)` and `x` padded by this fraction of the pair gap.
    pub y_halfwidth: f64,
    pub x_pad: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            base_nx: 32,
            base_ny: 16,
            refine_threshold: 1.0,
            max_level: 7,
            converge_tol: 0.01,
            straighten_passes: 400,
            y_halfwidth: 0.5,
            x_pad: 0.5,
        }
    }
}

/// A height function with its x-partial, sampled by the mesher.
pub trait HeightField: Sync {
    fn z(&self, x: f64, y: f64) -> f64;
    fn zx(&self, x: f64, y: f64) -> f64;
}

impl HeightField for Expr {
    fn z(&self, x: f64, y: f64) -> f64 {
        self.value(x, y).unwrap_or(f64::NAN)
    }

    fn zx(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).map_or(f64::NAN, |j| j.fx.to_f64())
    }
}

impl HeightField for SurfaceSpec {
    fn z(&self, x: f64, y: f64) -> f64 {
        self.f.z(x, y)
    }

    fn zx(&self, x: f64, y: f64) -> f64 {
        self.f.zx(x, y)
    }
}

/// Height given by closures, e.g. the image of a vertical map.
pub struct FnField<F, G>(pub F, pub G);

impl<F, G> HeightField for FnField<F, G>
where
    F: Fn(f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    fn z(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }

    fn zx(&self, x: f64, y: f64) -> f64 {
        (self.1)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.0 < x.1 && y.0 < y.1) || ![x.0, x.1, y.0, y.1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSurface(format!("empty mesh region {x:?} × {y:?}")));
        }
        Ok(Region { x, y })
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        (self.x.0..=self.x.1).contains(&p.0) && (self.y.0..=self.y.1).contains(&p.1)
    }
}

/// Tensor grid over a rectangle with 8-neighbour edges.
#[derive(Debug, Clone)]
pub struct MeshPatch {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `vertices[j * xs.len() + i]` at `(xs[i], ys[j])`.
    pub vertices: Vec<[f64; 3]>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Refinement level reached by each x-interval.
    pub levels: Vec<u32>,
    pub refinement_level: u32,
    pub region: Region,
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

/// Inserts `extra` into a sorted grid, dropping near-duplicates.
fn with_points(mut g: Vec<f64>, extra: &[f64], (lo, hi): (f64, f64)) -> Vec<f64> {
    let tol = 1e-12 * (hi - lo);
    for &p in extra {
        if (lo..=hi).contains(&p) {
            g.push(p);
        }
    }
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= tol);
    g
}

impl MeshPatch {
    fn assemble(field: &dyn HeightField, xs: Vec<f64>, ys: Vec<f64>, levels: Vec<u32>, region: Region) -> Result<Self> {
        let nx = xs.len();
        let vertices: Vec<[f64; 3]> = ys
            .par_iter()
            .flat_map_iter(|&y| xs.iter().map(move |&x| [x, y, field.z(x, y)]).collect::<Vec<_>>())
            .collect();
        if let Some(v) = vertices.iter().find(|v| !v[2].is_finite()) {
            return Err(Error::UndefinedPoint { x: v[0], y: v[1] });
        }
        let ny = ys.len();
        let mut adjacency = vec![Vec::with_capacity(8); vertices.len()];
        let mut link = |a: usize, b: usize| {
            let d = dist3(vertices[a], vertices[b]);
            adjacency[a].push((b, d));
            adjacency[b].push((a, d));
        };
        for j in 0..ny {
            for i in 0..nx {
                let a = j * nx + i;
                if i + 1 < nx {
                    link(a, a + 1);
                }
                if j + 1 < ny {
                    link(a, a + nx);
                    if i + 1 < nx {
                        link(a, a + nx + 1);
                    }
                    if i > 0 {
                        link(a, a + nx - 1);
                    }
                }
            }
        }
        let refinement_level = levels.iter().copied().max().unwrap_or(0);
        Ok(MeshPatch { xs, ys, vertices, adjacency, levels, refinement_level, region })
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }

    /// Nearest grid vertex to `(x, y)`.
    pub fn snap(&self, p: (f64, f64)) -> usize {
        let near = |g: &[f64], t: f64| {
            let k = g.partition_point(|v| *v < t);
            match (k.checked_sub(1), g.get(k)) {
                (Some(a), Some(b)) if (t - g[a]) <= (*b - t) => a,
                (Some(a), None) => a,
                _ => k,
            }
        };
        self.vertex_index(near(&self.xs, p.0), near(&self.ys, p.1))
    }

    /// One refinement step: halves every x-interval whose slope exceeds
    /// `threshold` on some row. Returns `None` when nothing needed splitting.
    fn refined(&self, field: &dyn HeightField, threshold: f64, max_level: u32) -> Result<Option<MeshPatch>> {
        let split: Vec<bool> = (0..self.xs.len() - 1)
            .into_par_iter()
            .map(|i| {
                if self.levels[i] >= max_level {
                    return false;
                }
                let (a, b) = (self.xs[i], self.xs[i + 1]);
                let m = 0.5 * (a + b);
                self.ys.iter().any(|&y| {
                    let secant = (field.z(b, y) - field.z(a, y)).abs() / (b - a);
                    let mid = field.zx(m, y).abs();
                    secant > threshold || !(mid <= threshold)
                })
            })
            .collect();
        if !split.contains(&true) {
            return Ok(None);
        }
        let mut xs = Vec::with_capacity(self.xs.len() * 2);
        let mut levels = Vec::with_capacity(self.levels.len() * 2);
        for i in 0..self.xs.len() - 1 {
            xs.push(self.xs[i]);
            if split[i] {
                xs.push(0.5 * (self.xs[i] + self.xs[i + 1]));
                levels.extend([self.levels[i] + 1; 2]);
            } else {
                levels.push(self.levels[i]);
            }
        }
        xs.push(*self.xs.last().unwrap());
        Self::assemble(field, xs, self.ys.clone(), levels, self.region).map(Some)
    }
}

/// Structured mesh of `region`, refined in x to `max_level` wherever the slope
/// exceeds the threshold. Grid lines pass through every point in `pins`.
pub fn build_mesh(field: &dyn HeightField, region: Region, pins: &[(f64, f64)], opts: &MetricOptions) -> Result<MeshPatch> {
    let mut mesh = base_mesh(field, region, pins, opts)?;
    while let Some(next) = mesh.refined(field, opts.refine_threshold, opts.max_level)? {
        mesh = next;
    }
    Ok(mesh)
}

fn base_mesh(field: &dyn HeightField, region: Region, pins: &[(f64, f64)], opts: &MetricOptions) -> Result<MeshPatch> {
    let px: Vec<f64> = pins.iter().map(|p| p.0).collect();
    let py: Vec<f64> = pins.iter().map(|p| p.1).collect();
    let xs = with_points(linspace(region.x.0, region.x.1, opts.base_nx.max(1)), &px, region.x);
    let ys = with_points(linspace(region.y.0, region.y.1, opts.base_ny.max(1)), &py, region.y);
    let levels = vec![0; xs.len() - 1];
    MeshPatch::assemble(field, xs, ys, levels, region)
}

#[derive(PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Dijkstra from `a` to `b`; the vertex path, or `None` if unreachable.
pub fn shortest_path(mesh: &MeshPatch, a: usize, b: usize) -> Option<(f64, Vec<usize>)> {
    let n = mesh.vertices.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[a] = 0.0;
    heap.push(Reverse((Key(0.0), a)));
    while let Some(Reverse((Key(d), u))) = heap.pop() {
        if u == b {
            break;
        }
        if d > dist[u] {
            continue;
        }
        for &(w, len) in &mesh.adjacency[u] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                prev[w] = u;
                heap.push(Reverse((Key(nd), w)));
            }
        }
    }
    if !dist[b].is_finite() {
        return None;
    }
    let mut path = vec![b];
    while *path.last().unwrap() != a {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Some((dist[b], path))
}

/// Shortens a surface polyline by moving interior points toward the midpoint
/// of their neighbours (and back onto the surface) while the length drops.
pub fn straighten(field: &dyn HeightField, pts: &mut [[f64; 3]], passes: usize) -> f64 {
    let len = |p: &[[f64; 3]]| p.windows(2).map(|w| dist3(w[0], w[1])).sum::<f64>();
    let mut total = len(pts);
    for _ in 0..passes {
        for i in 1..pts.len().saturating_sub(1) {
            let (a, b) = (pts[i - 1], pts[i + 1]);
            let old = dist3(a, pts[i]) + dist3(pts[i], b);
            let (x, y) = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]));
            let c = [x, y, field.z(x, y)];
            if !c[2].is_finite() {
                continue;
            }
            let new = dist3(a, c) + dist3(c, b);
            if new < old {
                pts[i] = c;
            }
        }
        let next = len(pts);
        if total - next <= 1e-12 * total {
            total = next;
            break;
        }
        total = next;
    }
    total
}

/// Estimated inner distance between the vertices nearest `p` and `q`.
pub fn inner_distance(field: &dyn HeightField, mesh: &MeshPatch, p: (f64, f64), q: (f64, f64), opts: &MetricOptions) -> Result<f64> {
    let (a, b) = (mesh.snap(p), mesh.snap(q));
    if a == b {
        return Ok(0.0);
    }
    let (_, path) = shortest_path(mesh, a, b).ok_or(Error::Disconnected)?;
    let mut pts: Vec<[f64; 3]> = path.iter().map(|&k| mesh.vertices[k]).collect();
    Ok(straighten(field, &mut pts, opts.straighten_passes))
}

/// Refines until the distance between `p` and `q` settles.
pub fn converged_distance(field: &dyn HeightField, region: Region, p: (f64, f64), q: (f64, f64), opts: &MetricOptions) -> Result<(f64, MeshPatch)> {
    if !(region.contains(p) && region.contains(q)) {
        return Err(Error::Disconnected);
    }
    let mut mesh = base_mesh(field, region, &[p, q], opts)?;
    let mut d = inner_distance(field, &mesh, p, q, opts)?;
    let mut change = f64::INFINITY;
    while let Some(next) = mesh.refined(field, opts.refine_threshold, opts.max_level)? {
        let nd = inner_distance(field, &next, p, q, opts)?;
        mesh = next;
        change = (nd - d).abs() / d.max(f64::MIN_POSITIVE);
        d = nd;
        if change <= opts.converge_tol {
            return Ok((d, mesh));
        }
    }
    let capped = mesh.levels.iter().any(|l| *l >= opts.max_level);
    if capped && change > opts.converge_tol {
        return Err(Error::RefinementBudgetExceeded);
    }
    Ok((d, mesh))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRecord {
    pub y: f64,
    pub d_o: f64,
    pub d_i: f64,
    pub ratio: f64,
    pub level: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regularity {
    NormallyEmbedded,
    NotLRegular,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub pairs: Vec<PairRecord>,
    pub ratio_fit: PowerFit,
    pub verdict: Regularity,
    /// Inner distances are mesh estimates, not certified bounds.
    pub estimate: &'static str,
}

impl RegularityReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("y,d_o,d_i,ratio\n");
        for p in &self.pairs {
            out.push_str(&format!("{:e},{:e},{:e},{:e}\n", p.y, p.d_o, p.d_i, p.ratio));
        }
        out
    }
}

/// Probe strip around the pair at height `y`.
pub fn probe_region(p: (f64, f64), q: (f64, f64), opts: &MetricOptions) -> Result<Region> {
    let y = 0.5 * (p.1 + q.1);
    let gap = ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
    let pad = opts.x_pad * gap;
    let ylo = p.1.min(q.1).min(y * (1.0 - opts.y_halfwidth));
    let yhi = p.1.max(q.1).max(y * (1.0 + opts.y_halfwidth));
    Region::new((p.0.min(q.0) - pad, p.0.max(q.0) + pad), (ylo, yhi))
}

pub fn l_regularity_probe(s: &SurfaceSpec, pair: (&ArcSpec, &ArcSpec), sched: &SampleSchedule, cfg: &Config) -> Result<RegularityReport> {
    let sched = sched.clamped(s.eps);
    sched.validate()?;
    let opts = &cfg.metric;
    let pairs = sched
        .ys()
        .par_iter()
        .map(|&y| {
            let p = (pair.0.eval(y), y);
            let q = (pair.1.eval(y), y);
            let a = [p.0, p.1, s.z(p.0, p.1)];
            let b = [q.0, q.1, s.z(q.0, q.1)];
            let d_o = dist3(a, b);
            let region = probe_region(p, q, opts)?;
            let (d_i, mesh) = converged_distance(s, region, p, q, opts)?;
            Ok(PairRecord { y, d_o, d_i, ratio: d_i / d_o, level: mesh.refinement_level })
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = &pairs[pairs.len().saturating_sub(cfg.fit.tail)..];
    let samples: Vec<(f64, f64)> = tail.iter().map(|p| (p.y, p.ratio)).collect();
    let ratio_fit = fit_power(&samples)?;
    let tol = cfg.fit.tol_exp;
    let clean = ratio_fit.residual <= cfg.fit.residual_ceiling;
    let verdict = if clean && ratio_fit.exponent < -tol {
        Regularity::NotLRegular
    } else if clean && ratio_fit.exponent.abs() <= tol {
        Regularity::NormallyEmbedded
    } else {
        Regularity::Inconclusive
    };
    Ok(RegularityReport { pairs, ratio_fit, verdict, estimate: "mesh-estimated" })
}
