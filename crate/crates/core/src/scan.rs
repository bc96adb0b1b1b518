//! Slice scanning in ray charts: transverse slopes, refined extrema, peaks,
//! zeros and level crossings of `f_x`-type quantities.

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Slope};
use crate::surface::Ray;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    /// Log-spaced grid density in `|u|`.
    pub per_decade: usize,
    /// Grid starts at `|u| = v^inner_exp`.
    pub inner_exp: f64,
    /// Relative tolerance of golden-section and bisection refinement.
    pub rel_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { per_decade: 24, inner_exp: 6.0, rel_tol: 1e-10 }
    }
}

/// The surface seen from a ray: `u` is transverse, `v` runs along the ray.
#[derive(Debug, Clone, Copy)]
pub struct Chart<'a> {
    pub f: &'a Expr,
    pub ray: Ray,
}

impl<'a> Chart<'a> {
    pub fn new(f: &'a Expr, ray: Ray) -> Self {
        Chart { f, ray }
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        let (x, y) = self.ray.to_plane(u, v);
        self.f.value(x, y).unwrap_or(f64::NAN)
    }

    /// Directional derivative along the ray normal as an extended real.
    pub fn slope_ext(&self, u: f64, v: f64) -> Slope {
        let (x, y) = self.ray.to_plane(u, v);
        let Ok(j) = self.f.jet(x, y) else { return Slope::Undefined };
        let (nx, ny) = self.ray.normal();
        let mut s = Slope::ZERO;
        if nx != 0.0 {
            s = s + j.fx.scale(nx);
        }
        if ny != 0.0 {
            s = s + j.fy.scale(ny);
        }
        s
    }

    /// Transverse slope as a float: `±∞` at vertical tangents, NaN where undefined.
    pub fn slope(&self, u: f64, v: f64) -> f64 {
        self.slope_ext(u, v).to_f64()
    }

    /// True when `|slope|` keeps growing as `u` is approached, as at a pole,
    /// rather than levelling off at a smooth maximum.
    pub fn is_pole(&self, u: f64, v: f64) -> bool {
        let scale = u.abs().max(v.powi(6));
        let near = |h: f64| self.slope(u - h * scale, v).abs().max(self.slope(u + h * scale, v).abs());
        let (wide, tight) = (near(1e-5), near(1e-8));
        tight.is_infinite() || (wide.is_finite() && tight > 10.0 * wide)
    }
}

/// `0` (when inside) plus a log-spaced `|u|` grid on each side of `[lo, hi]`, sorted.
pub fn slice_grid(v: f64, lo: f64, hi: f64, opts: &ScanOptions) -> Vec<f64> {
    let inner = v.powf(opts.inner_exp).max(1e-300);
    let mut out = Vec::new();
    let side = |extent: f64| -> Vec<f64> {
        if extent <= inner {
            return vec![extent];
        }
        let decades = (extent / inner).log10();
        let n = ((decades * opts.per_decade as f64).ceil() as usize).max(2);
        (0..=n).map(|k| inner * (extent / inner).powf(k as f64 / n as f64)).collect()
    };
    if lo < 0.0 {
        let mut neg: Vec<f64> = side(-lo).into_iter().map(|a| -a).collect();
        neg.reverse();
        out.extend(neg);
    }
    if lo <= 0.0 && hi >= 0.0 {
        out.push(0.0);
    }
    if hi > 0.0 {
        out.extend(side(hi));
    }
    if lo > 0.0 || hi < 0.0 {
        // Interval away from the ray: plain log spacing between the ends.
        let (a, b) = (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()));
        let n = (((b / a).log10() * opts.per_decade as f64).ceil() as usize).max(8);
        let mut pts: Vec<f64> = (0..=n).map(|k| a * (b / a).powf(k as f64 / n as f64)).collect();
        if hi < 0.0 {
            pts = pts.into_iter().map(|p| -p).rev().collect();
        }
        out = pts;
    }
    out
}

/// Maximizes `g` on `[a, b]` by golden-section search; NaN counts as `-∞`.
pub fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64, abs_floor: f64) -> (f64, f64) {
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut gc = key(g(c));
    let mut gd = key(g(d));
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * a.abs().max(b.abs()).max(abs_floor) {
            break;
        }
        if gc == f64::INFINITY {
            return (c, gc);
        }
        if gd == f64::INFINITY {
            return (d, gd);
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = key(g(c));
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = key(g(d));
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Bisection for a sign change of `g` on `[a, b]` (`g(a)`, `g(b)` of opposite sign).
pub fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64, abs_floor: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= rel_tol * a.abs().max(b.abs()).max(abs_floor) || m == a || m == b {
            return m;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// A refined extremum of the transverse slope on one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub u: f64,
    pub value: f64,
}

/// Grid samples of the transverse slope on one slice.
#[derive(Debug, Clone)]
pub struct SliceScan {
    pub v: f64,
    pub us: Vec<f64>,
    pub gs: Vec<f64>,
    abs_floor: f64,
    rel_tol: f64,
}

impl SliceScan {
    pub fn new(chart: &Chart<'_>, v: f64, lo: f64, hi: f64, opts: &ScanOptions) -> Self {
        let us = slice_grid(v, lo, hi, opts);
        let gs = us.iter().map(|&u| chart.slope(u, v)).collect();
        SliceScan { v, us, gs, abs_floor: v.powf(opts.inner_exp), rel_tol: opts.rel_tol }
    }

    /// Same as [`SliceScan::new`] with an arbitrary sampled quantity.
    pub fn with(v: f64, us: Vec<f64>, g: impl Fn(f64) -> f64, opts: &ScanOptions) -> Self {
        let gs = us.iter().map(|&u| g(u)).collect();
        SliceScan { v, us, gs, abs_floor: v.powf(opts.inner_exp), rel_tol: opts.rel_tol }
    }

    fn refine_max(&self, g: &impl Fn(f64) -> f64, i: usize) -> Extremum {
        let n = self.us.len();
        if self.gs[i] == f64::INFINITY {
            return Extremum { u: self.us[i], value: f64::INFINITY };
        }
        let a = self.us[i.saturating_sub(1)];
        let b = self.us[(i + 1).min(n - 1)];
        let (u, val) = golden_max(g, a, b, self.rel_tol, self.abs_floor);
        if val >= self.gs[i] {
            Extremum { u, value: val }
        } else {
            Extremum { u: self.us[i], value: self.gs[i] }
        }
    }

    fn local_max_indices(vals: &[f64]) -> Vec<usize> {
        let n = vals.len();
        let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
        (0..n)
            .filter(|&i| {
                let c = key(vals[i]);
                c > f64::NEG_INFINITY
                    && (i == 0 || c >= key(vals[i - 1]))
                    && (i + 1 == n || c >= key(vals[i + 1]))
                    && !(i > 0 && i + 1 < n && c == key(vals[i - 1]) && c == key(vals[i + 1]))
            })
            .collect()
    }

    /// Global maximum of `g` (with `g` re-evaluated during refinement).
    pub fn max(&self, g: impl Fn(f64) -> f64) -> Option<Extremum> {
        Self::local_max_indices(&self.gs)
            .into_iter()
            .map(|i| self.refine_max(&g, i))
            .max_by(|a, b| a.value.total_cmp(&b.value))
    }

    pub fn min(&self, g: impl Fn(f64) -> f64) -> Option<Extremum> {
        let neg = SliceScan { gs: self.gs.iter().map(|v| -v).collect(), ..self.clone() };
        neg.max(|u| -g(u)).map(|e| Extremum { u: e.u, value: -e.value })
    }

    /// Local maxima of `|g|` whose refined value exceeds `threshold`, deduplicated.
    pub fn abs_peaks(&self, g: impl Fn(f64) -> f64, threshold: f64) -> Vec<Extremum> {
        let mags: Vec<f64> = self.gs.iter().map(|v| v.abs()).collect();
        let absg = |u: f64| g(u).abs();
        let probe = SliceScan { gs: mags.clone(), ..self.clone() };
        let mut out: Vec<Extremum> = Vec::new();
        for i in Self::local_max_indices(&mags) {
            // Narrow spikes can sit between grid points, so refine before thresholding.
            let e = probe.refine_max(&absg, i);
            if !(e.value > threshold) {
                continue;
            }
            let signed = g(e.u);
            let value = if signed.is_nan() { e.value } else { signed.signum() * e.value };
            let e = Extremum { u: e.u, value };
            if let Some(last) = out.last() {
                let scale = last.u.abs().max(e.u.abs()).max(self.abs_floor);
                if (last.u - e.u).abs() <= 1e-6 * scale {
                    continue;
                }
            }
            out.push(e);
        }
        out
    }

    /// Zeros of `g` from sign changes, excluding jumps through poles.
    pub fn zeros(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.us.len().saturating_sub(1) {
            let (ga, gb) = (self.gs[i], self.gs[i + 1]);
            if ga == 0.0 {
                out.push(self.us[i]);
                continue;
            }
            if !(ga.is_finite() && gb.is_finite()) || gb == 0.0 || (ga > 0.0) == (gb > 0.0) {
                continue;
            }
            let z = bisect(&g, self.us[i], self.us[i + 1], self.rel_tol, self.abs_floor);
            let gz = g(z).abs();
            if gz.is_finite() && gz <= ga.abs().max(gb.abs()) {
                out.push(z);
            }
        }
        if let Some(&last) = self.gs.last() {
            if last == 0.0 {
                out.push(*self.us.last().unwrap());
            }
        }
        out.dedup();
        out
    }

    /// Walks outward from grid index `i` to the first point where `|g| ≤ level` and
    /// bisects the crossing. `dir` is `-1` (left) or `+1` (right). `None` when the
    /// level is never reached inside the scanned interval.
    pub fn level_crossing(&self, g: impl Fn(f64) -> f64, from_u: f64, level: f64, dir: i32) -> Option<f64> {
        let n = self.us.len();
        let start = match self.us.binary_search_by(|p| p.total_cmp(&from_u)) {
            Ok(i) => i,
            Err(i) => {
                if dir > 0 {
                    i.min(n)
                } else {
                    i.checked_sub(1)?
                }
            }
        };
        let mut prev = from_u;
        let mut i = start as i64;
        while i >= 0 && (i as usize) < n {
            let idx = i as usize;
            let u = self.us[idx];
            if (dir > 0 && u > from_u) || (dir < 0 && u < from_u) {
                let gv = self.gs[idx].abs();
                if gv.is_finite() && gv <= level {
                    let h = |t: f64| g(t).abs() - level;
                    return Some(bisect(h, prev, u, self.rel_tol, self.abs_floor));
                }
                prev = u;
            }
            i += dir as i64;
        }
        None
    }
}
