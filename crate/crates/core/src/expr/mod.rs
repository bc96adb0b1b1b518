//! Surface DSL: abstract syntax, parser, and first-order jet evaluation.

mod jet;
mod parse;

use std::fmt;

use crate::rational::{format_rational, to_f64, Rational};

pub use jet::{slope_x, Jet1, ProjSlope, Slope};
pub use parse::parse_expr;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(Rational),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power, `|k| <= 64`.
    Pow(Box<Expr>, i64),
    /// Real odd root, index odd and `>= 3`.
    Root(Box<Expr>, i64),
    Abs(Box<Expr>),
}

impl Expr {
    /// Value-only evaluation. Cheaper than [`Expr::jet`] when slopes are not needed.
    pub fn value(&self, x: f64, y: f64) -> crate::Result<f64> {
        use Expr::*;
        Ok(match self {
            Num(r) => to_f64(r),
            X => x,
            Y => y,
            Neg(a) => -a.value(x, y)?,
            Add(a, b) => a.value(x, y)? + b.value(x, y)?,
            Sub(a, b) => a.value(x, y)? - b.value(x, y)?,
            Mul(a, b) => a.value(x, y)? * b.value(x, y)?,
            Div(a, b) => {
                let d = b.value(x, y)?;
                if d == 0.0 {
                    return Err(crate::Error::UndefinedPoint { x, y });
                }
                a.value(x, y)? / d
            }
            Pow(a, k) => {
                let u = a.value(x, y)?;
                if u == 0.0 && *k < 0 {
                    return Err(crate::Error::UndefinedPoint { x, y });
                }
                u.powi(*k as i32)
            }
            Root(a, n) => real_root(a.value(x, y)?, *n),
            Abs(a) => a.value(x, y)?.abs(),
        })
    }

    /// True when the tree contains no division, root, abs or negative power.
    pub fn is_polynomial(&self) -> bool {
        use Expr::*;
        match self {
            Num(_) | X | Y => true,
            Neg(a) => a.is_polynomial(),
            Add(a, b) | Sub(a, b) | Mul(a, b) => a.is_polynomial() && b.is_polynomial(),
            Pow(a, k) => *k >= 0 && a.is_polynomial(),
            Div(..) | Root(..) | Abs(..) => false,
        }
    }

    /// Structural reflection `x -> -x`.
    pub fn reflect_x(&self) -> Expr {
        use Expr::*;
        match self {
            X => Neg(Box::new(X)),
            Num(_) | Y => self.clone(),
            Neg(a) => Neg(Box::new(a.reflect_x())),
            Add(a, b) => Add(Box::new(a.reflect_x()), Box::new(b.reflect_x())),
            Sub(a, b) => Sub(Box::new(a.reflect_x()), Box::new(b.reflect_x())),
            Mul(a, b) => Mul(Box::new(a.reflect_x()), Box::new(b.reflect_x())),
            Div(a, b) => Div(Box::new(a.reflect_x()), Box::new(b.reflect_x())),
            Pow(a, k) => Pow(Box::new(a.reflect_x()), *k),
            Root(a, n) => Root(Box::new(a.reflect_x()), *n),
            Abs(a) => Abs(Box::new(a.reflect_x())),
        }
    }
}

pub(crate) fn real_root(u: f64, n: i64) -> f64 {
    if n == 3 {
        u.cbrt()
    } else {
        u.signum() * u.abs().powf(1.0 / n as f64)
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized canonical form; re-parses to an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Num(r) => write!(f, "{}", format_rational(r)),
            X => write!(f, "x"),
            Y => write!(f, "y"),
            Neg(a) => write!(f, "-({a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, k) => write!(f, "({a})^{k}"),
            Root(a, n) => write!(f, "root({a}, {n})"),
            Abs(a) => write!(f, "abs({a})"),
        }
    }
}
