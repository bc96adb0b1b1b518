//! Surface specifications, rays in the tangent plane, and the `.surf` file format.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::arc::ArcSpec;
use crate::expr::{parse_expr, Expr};
use crate::rational::{parse_rational, to_f64};
use crate::{Error, Result};

/// Graph surface `z = f(x, y)` analysed on the wedge `|x| ≤ m·y`, `0 ≤ y ≤ eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSpec {
    pub name: String,
    #[serde(serialize_with = "serialize_display")]
    pub f: Expr,
    pub m: f64,
    pub eps: f64,
    pub notes: String,
}

fn serialize_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl SurfaceSpec {
    pub fn new(name: impl Into<String>, f: Expr, m: f64, eps: f64) -> Result<Self> {
        let spec = SurfaceSpec { name: name.into(), f, m, eps, notes: String::new() };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor from DSL text.
    pub fn parse(name: impl Into<String>, f: &str, m: f64, eps: f64) -> Result<Self> {
        Self::new(name, parse_expr(f)?, m, eps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidSurface(format!("wedge slope m = {} must be positive", self.m)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidSurface(format!("eps = {} must be positive", self.eps)));
        }
        match self.f.value(0.0, 0.0) {
            Ok(v) if v == 0.0 => Ok(()),
            Ok(v) => Err(Error::InvalidSurface(format!("f(0,0) = {v}, expected 0"))),
            // Rational functions are often undefined at the origin; require a vanishing limit instead.
            Err(Error::UndefinedPoint { .. }) => {
                let r = 1e-6;
                for k in 0..16 {
                    let t = 2.0 * PI * (k as f64 + 0.5) / 16.0;
                    match self.f.value(r * t.cos(), r * t.sin()) {
                        Ok(v) if v.abs() <= 1e-3 => {}
                        Ok(v) => {
                            return Err(Error::InvalidSurface(format!(
                                "f does not vanish at the origin (|f| = {v:e} at radius {r:e})"
                            )))
                        }
                        Err(e) => return Err(e),
                    }
                }
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

/// Ray from the origin in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ray {
    PosY,
    NegY,
    PosX,
    NegX,
    /// Counterclockwise angle from `+x`, in radians.
    Angle(f64),
}

impl Ray {
    /// Snaps to an axis label when within `tol` radians.
    pub fn from_angle(theta: f64, tol: f64) -> Ray {
        let t = theta.rem_euclid(2.0 * PI);
        let near = |a: f64| {
            let d = (t - a).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) <= tol
        };
        if near(FRAC_PI_2) {
            Ray::PosY
        } else if near(3.0 * FRAC_PI_2) {
            Ray::NegY
        } else if near(0.0) {
            Ray::PosX
        } else if near(PI) {
            Ray::NegX
        } else {
            Ray::Angle(t)
        }
    }

    pub fn angle(&self) -> f64 {
        match self {
            Ray::PosX => 0.0,
            Ray::PosY => FRAC_PI_2,
            Ray::NegX => PI,
            Ray::NegY => 3.0 * FRAC_PI_2,
            Ray::Angle(t) => *t,
        }
    }

    /// Unit direction `d` along the ray; exact on the axes.
    pub fn direction(&self) -> (f64, f64) {
        match self {
            Ray::PosX => (1.0, 0.0),
            Ray::PosY => (0.0, 1.0),
            Ray::NegX => (-1.0, 0.0),
            Ray::NegY => (0.0, -1.0),
            Ray::Angle(t) => (t.cos(), t.sin()),
        }
    }

    /// Unit normal `n = (d_y, −d_x)`; for `+y` this is `+x`.
    pub fn normal(&self) -> (f64, f64) {
        let (dx, dy) = self.direction();
        (dy, -dx)
    }

    /// Chart coordinates `(u, v)` with `u` transverse and `v` along the ray.
    pub fn to_plane(&self, u: f64, v: f64) -> (f64, f64) {
        let (dx, dy) = self.direction();
        let (nx, ny) = self.normal();
        (u * nx + v * dx, u * ny + v * dy)
    }

    pub fn to_chart(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = self.direction();
        let (nx, ny) = self.normal();
        (x * nx + y * ny, x * dx + y * dy)
    }

    pub fn is_axis(&self) -> bool {
        !matches!(self, Ray::Angle(_))
    }
}

impl fmt::Display for Ray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ray::PosY => write!(f, "+y"),
            Ray::NegY => write!(f, "-y"),
            Ray::PosX => write!(f, "+x"),
            Ray::NegX => write!(f, "-x"),
            Ray::Angle(t) => write!(f, "{:.6}rad", t),
        }
    }
}

impl FromStr for Ray {
    type Err = Error;
    fn from_str(s: &str) -> Result<Ray> {
        let t = s.trim();
        Ok(match t {
            "+y" | "y" => Ray::PosY,
            "-y" => Ray::NegY,
            "+x" | "x" => Ray::PosX,
            "-x" => Ray::NegX,
            _ => {
                let (num, scale) = match (t.strip_suffix("deg"), t.strip_suffix("rad")) {
                    (Some(d), _) => (d, PI / 180.0),
                    (_, Some(r)) => (r, 1.0),
                    _ => (t, 1.0),
                };
                let v: f64 = num
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidSurface(format!("unrecognised ray '{s}'")))?;
                Ray::from_angle(v * scale, 1e-12)
            }
        })
    }
}

impl Serialize for Ray {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Parsed `.surf` document.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfFile {
    pub spec: SurfaceSpec,
    pub arcs: BTreeMap<String, ArcSpec>,
    /// Named arcs for the `A₋`, `A₊` pair family.
    pub pair: Option<(String, String)>,
    /// Named arcs bounding the three pieces handed to the map builder, left to right.
    pub map_arcs: Option<Vec<String>>,
    pub expect: BTreeMap<String, String>,
}

impl SurfFile {
    pub fn arc(&self, name: &str) -> Result<&ArcSpec> {
        self.arcs.get(name).ok_or_else(|| Error::InvalidArc(format!("no arc named '{name}'")))
    }

    pub fn pair_arcs(&self) -> Result<Option<(ArcSpec, ArcSpec)>> {
        match &self.pair {
            None => Ok(None),
            Some((a, b)) => Ok(Some((self.arc(a)?.clone(), self.arc(b)?.clone()))),
        }
    }
}

/// Parses `coeff:exp, coeff:exp, …`; a leading `-` before the list reflects the arc.
pub fn parse_arc(text: &str) -> std::result::Result<ArcSpec, String> {
    let t = text.trim();
    if t == "0" {
        return Ok(ArcSpec::axis());
    }
    let mut terms = Vec::new();
    for part in t.split(',') {
        let (c, e) = part
            .split_once(':')
            .ok_or_else(|| format!("term '{}' is not of the form coeff:exp", part.trim()))?;
        let coeff = parse_coeff(c.trim()).ok_or_else(|| format!("bad coefficient '{}'", c.trim()))?;
        let exp = parse_rational(e.trim()).ok_or_else(|| format!("bad exponent '{}'", e.trim()))?;
        terms.push((coeff, exp));
    }
    ArcSpec::new(terms, 1).map_err(|e| e.to_string())
}

fn parse_coeff(s: &str) -> Option<f64> {
    if let Some(r) = parse_rational(s) {
        return Some(to_f64(&r));
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_surf(text: &str) -> Result<SurfFile> {
    let mut name = None;
    let mut f = None;
    let mut m = 1.0;
    let mut eps = 0.1;
    let mut notes = String::new();
    let mut arcs = BTreeMap::new();
    let mut pair = None;
    let mut map_arcs = None;
    let mut expect = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::SpecFile { line, message };
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| bad(format!("expected 'key = value', got '{trimmed}'")))?;
        let key = key.trim();
        let value = value.trim();
        let value_col = raw.find('=').map_or(0, |i| i + 1 + (raw[i + 1..].len() - raw[i + 1..].trim_start().len()));
        let number = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("'{key}' needs a number, got '{v}'")));
        match key {
            "name" => name = Some(value.to_string()),
            "f" => {
                let e = parse_expr(value).map_err(|e| match e {
                    Error::Syntax { line: l, column, message } => Error::Syntax {
                        line: line + l - 1,
                        column: if l == 1 { value_col + column } else { column },
                        message,
                    },
                    other => other,
                })?;
                f = Some(e);
            }
            "m" => m = number(value)?,
            "eps" => eps = number(value)?,
            "notes" => notes = value.to_string(),
            "pair" => {
                let (a, b) = value.split_once(',').ok_or_else(|| bad("pair needs two arc names".into()))?;
                pair = Some((a.trim().to_string(), b.trim().to_string()));
            }
            "map.arcs" => {
                map_arcs = Some(value.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>());
            }
            _ => {
                if let Some(arc_name) = key.strip_prefix("arc.") {
                    let arc = parse_arc(value).map_err(bad)?;
                    arcs.insert(arc_name.to_string(), arc);
                } else if let Some(what) = key.strip_prefix("expect.") {
                    expect.insert(what.to_string(), value.to_string());
                } else {
                    return Err(bad(format!("unknown key '{key}'")));
                }
            }
        }
    }
    let name = name.ok_or(Error::SpecFile { line: 0, message: "missing key 'name'".into() })?;
    let f = f.ok_or(Error::SpecFile { line: 0, message: "missing key 'f'".into() })?;
    let mut spec = SurfaceSpec::new(name, f, m, eps)?;
    spec.notes = notes;
    let file = SurfFile { spec, arcs, pair, map_arcs, expect };
    if let Some((a, b)) = &file.pair {
        file.arc(a)?;
        file.arc(b)?;
    }
    if let Some(names) = &file.map_arcs {
        for n in names {
            file.arc(n)?;
        }
    }
    Ok(file)
}
