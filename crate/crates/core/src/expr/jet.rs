use std::fmt;
use std::ops::{Add, Mul, Neg};

use serde::{Serialize, Serializer};

use super::{real_root, Expr};
use crate::{Error, Result};

/// Extended-real partial derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Finite(f64),
    /// Vertical tangent; the payload is the sign (`1` or `-1`).
    Inf(i8),
    /// 0/0, 0·∞ or ∞−∞ arose while differentiating.
    Undefined,
}

impl Slope {
    pub const ZERO: Slope = Slope::Finite(0.0);

    pub fn finite(self) -> Option<f64> {
        match self {
            Slope::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Slope::Inf(_))
    }

    /// Magnitude as a float; `Inf` becomes `f64::INFINITY`, `Undefined` becomes NaN.
    pub fn abs(self) -> f64 {
        match self {
            Slope::Finite(v) => v.abs(),
            Slope::Inf(_) => f64::INFINITY,
            Slope::Undefined => f64::NAN,
        }
    }

    /// Signed float view with `±∞` for the sentinel.
    pub fn to_f64(self) -> f64 {
        match self {
            Slope::Finite(v) => v,
            Slope::Inf(s) => f64::INFINITY * s as f64,
            Slope::Undefined => f64::NAN,
        }
    }

    /// Multiply by a finite real. `0 · ∞` is undefined.
    pub fn scale(self, c: f64) -> Slope {
        match self {
            Slope::Finite(v) => Slope::Finite(v * c),
            Slope::Inf(_) if c == 0.0 => Slope::Undefined,
            Slope::Inf(s) => Slope::Inf(if c > 0.0 { s } else { -s }),
            Slope::Undefined => Slope::Undefined,
        }
    }
}

impl Add for Slope {
    type Output = Slope;
    fn add(self, rhs: Slope) -> Slope {
        use Slope::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            (Inf(s), Finite(_)) | (Finite(_), Inf(s)) => Inf(s),
            (Inf(s), Inf(t)) if s == t => Inf(s),
            _ => Undefined,
        }
    }
}

impl Neg for Slope {
    type Output = Slope;
    fn neg(self) -> Slope {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Slope {
    type Output = Slope;
    fn mul(self, c: f64) -> Slope {
        self.scale(c)
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Finite(v) => write!(f, "{v}"),
            Slope::Inf(s) if *s > 0 => write!(f, "+inf"),
            Slope::Inf(_) => write!(f, "-inf"),
            Slope::Undefined => write!(f, "undefined"),
        }
    }
}

impl Serialize for Slope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Slope::Finite(v) => s.serialize_f64(*v),
            Slope::Inf(_) => s.serialize_str(&self.to_string()),
            Slope::Undefined => s.serialize_none(),
        }
    }
}

/// Value and first partials of `f` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jet1 {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub fx: Slope,
    pub fy: Slope,
}

/// Point of the real projective line; `±∞` are identified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProjSlope {
    Finite(f64),
    Infinity,
}

pub fn slope_x(j: &Jet1) -> Result<ProjSlope> {
    match j.fx {
        Slope::Finite(v) => Ok(ProjSlope::Finite(v)),
        Slope::Inf(_) => Ok(ProjSlope::Infinity),
        Slope::Undefined => Err(Error::IndeterminateJet { x: j.x, y: j.y }),
    }
}

#[derive(Clone, Copy)]
struct Dual {
    v: f64,
    dx: Slope,
    dy: Slope,
}

impl Expr {
    /// Forward-mode evaluation of value, `f_x` and `f_y`.
    pub fn jet(&self, x: f64, y: f64) -> Result<Jet1> {
        let d = self.dual(x, y)?;
        Ok(Jet1 { x, y, value: d.v, fx: d.dx, fy: d.dy })
    }

    /// Fails with `IndeterminateJet` unless both partials are defined.
    pub fn jet_strict(&self, x: f64, y: f64) -> Result<Jet1> {
        let j = self.jet(x, y)?;
        if j.fx == Slope::Undefined || j.fy == Slope::Undefined {
            return Err(Error::IndeterminateJet { x, y });
        }
        Ok(j)
    }

    fn depends_on(&self, var: &Expr) -> bool {
        use Expr::*;
        match self {
            Num(_) => false,
            X | Y => self == var,
            Neg(a) | Pow(a, _) | Root(a, _) | Abs(a) => a.depends_on(var),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    fn dual(&self, x: f64, y: f64) -> Result<Dual> {
        use Expr::*;
        Ok(match self {
            Num(r) => Dual { v: crate::rational::to_f64(r), dx: Slope::ZERO, dy: Slope::ZERO },
            X => Dual { v: x, dx: Slope::Finite(1.0), dy: Slope::ZERO },
            Y => Dual { v: y, dx: Slope::ZERO, dy: Slope::Finite(1.0) },
            Neg(a) => {
                let a = a.dual(x, y)?;
                Dual { v: -a.v, dx: -a.dx, dy: -a.dy }
            }
            Add(a, b) => {
                let (a, b) = (a.dual(x, y)?, b.dual(x, y)?);
                Dual { v: a.v + b.v, dx: a.dx + b.dx, dy: a.dy + b.dy }
            }
            Sub(a, b) => {
                let (a, b) = (a.dual(x, y)?, b.dual(x, y)?);
                Dual { v: a.v - b.v, dx: a.dx + -b.dx, dy: a.dy + -b.dy }
            }
            Mul(a, b) => {
                let (a, b) = (a.dual(x, y)?, b.dual(x, y)?);
                Dual {
                    v: a.v * b.v,
                    dx: a.dx * b.v + b.dx * a.v,
                    dy: a.dy * b.v + b.dy * a.v,
                }
            }
            Div(a, b) => {
                let (a, b) = (a.dual(x, y)?, b.dual(x, y)?);
                if b.v == 0.0 {
                    return Err(Error::UndefinedPoint { x, y });
                }
                let inv = 1.0 / b.v;
                let q = a.v * inv;
                Dual {
                    v: q,
                    dx: a.dx * inv + b.dx * (-q * inv),
                    dy: a.dy * inv + b.dy * (-q * inv),
                }
            }
            Pow(a, k) => {
                let a = a.dual(x, y)?;
                let k = *k;
                if k == 0 {
                    return Ok(Dual { v: 1.0, dx: Slope::ZERO, dy: Slope::ZERO });
                }
                if a.v == 0.0 && k < 0 {
                    return Err(Error::UndefinedPoint { x, y });
                }
                let c = k as f64 * a.v.powi((k - 1) as i32);
                Dual { v: a.v.powi(k as i32), dx: a.dx * c, dy: a.dy * c }
            }
            Root(inner, n) => {
                let a = inner.dual(x, y)?;
                let r = real_root(a.v, *n);
                let d = |du: Slope, var: &Expr| -> Slope {
                    if r != 0.0 {
                        return du * (1.0 / (*n as f64 * r.powi((*n - 1) as i32)));
                    }
                    match du {
                        Slope::Finite(v) if v != 0.0 => Slope::Inf(if v > 0.0 { 1 } else { -1 }),
                        Slope::Finite(_) if !inner.depends_on(var) => Slope::ZERO,
                        Slope::Finite(_) => Slope::Undefined,
                        other => other,
                    }
                };
                Dual { v: r, dx: d(a.dx, &X), dy: d(a.dy, &Y) }
            }
            Abs(inner) => {
                let a = inner.dual(x, y)?;
                let d = |du: Slope, var: &Expr| -> Slope {
                    if a.v > 0.0 {
                        du
                    } else if a.v < 0.0 {
                        -du
                    } else if !inner.depends_on(var) {
                        Slope::ZERO
                    } else {
                        Slope::Undefined
                    }
                };
                Dual { v: a.v.abs(), dx: d(a.dx, &X), dy: d(a.dy, &Y) }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    #[test]
    fn quotient_at_unit_point() {
        let f = parse_expr("y^4/(x^2+y^2)").unwrap();
        let j = f.jet(1.0, 1.0).unwrap();
        assert!((j.value - 0.5).abs() < 1e-15);
        assert_eq!(j.fx, Slope::Finite(-0.5));
        assert_eq!(j.fy, Slope::Finite(1.5));
    }

    #[test]
    fn identity_coordinate() {
        let j = parse_expr("x").unwrap().jet(2.0, 3.0).unwrap();
        assert_eq!((j.value, j.fx, j.fy), (2.0, Slope::Finite(1.0), Slope::ZERO));
    }

    #[test]
    fn cube_root_vertical_tangent() {
        let f = parse_expr("root(x, 3)").unwrap();
        for y in [0.0, 0.3, -2.0] {
            let j = f.jet(0.0, y).unwrap();
            assert_eq!(j.fx, Slope::Inf(1));
            assert_eq!(j.fy, Slope::ZERO);
        }
        let j = parse_expr("-root(x, 3)").unwrap().jet(0.0, 1.0).unwrap();
        assert_eq!(j.fx, Slope::Inf(-1));
        assert_eq!(slope_x(&j).unwrap(), ProjSlope::Infinity);
    }

    #[test]
    fn projective_identification() {
        let mk = |fx| Jet1 { x: 0.0, y: 0.0, value: 0.0, fx, fy: Slope::ZERO };
        assert_eq!(slope_x(&mk(Slope::Finite(-0.5))).unwrap(), ProjSlope::Finite(-0.5));
        assert_eq!(slope_x(&mk(Slope::Inf(1))).unwrap(), ProjSlope::Infinity);
        assert_eq!(slope_x(&mk(Slope::Inf(-1))).unwrap(), ProjSlope::Infinity);
        assert!(matches!(slope_x(&mk(Slope::Undefined)), Err(Error::IndeterminateJet { .. })));
    }

    #[test]
    fn infinite_sentinels_through_sums() {
        let f = parse_expr("root(x, 3) + x").unwrap();
        assert_eq!(f.jet(0.0, 1.0).unwrap().fx, Slope::Inf(1));
        let f = parse_expr("root(x, 3) - root(x, 5)").unwrap();
        assert_eq!(f.jet(0.0, 1.0).unwrap().fx, Slope::Undefined);
    }

    #[test]
    fn abs_kink_is_indeterminate() {
        let f = parse_expr("abs(x)").unwrap();
        assert_eq!(f.jet(0.0, 1.0).unwrap().fx, Slope::Undefined);
        assert!(f.jet_strict(0.0, 1.0).is_err());
        assert_eq!(f.jet(-2.0, 1.0).unwrap().fx, Slope::Finite(-1.0));
    }

    #[test]
    fn division_by_zero_is_undefined_point() {
        let f = parse_expr("y^4/(x^2+y^2)").unwrap();
        assert_eq!(f.jet(0.0, 0.0), Err(Error::UndefinedPoint { x: 0.0, y: 0.0 }));
    }
}
