//! Exact rational helpers shared by the DSL, arcs and Hölder complexes.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i128>;

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `p`, `p/q` or a decimal such as `-0.25` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: i128 = p.trim().parse().ok()?;
        let q: i128 = q.trim().parse().ok()?;
        if q <= 0 {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    if int_part.len() + frac_part.len() > 30 {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let denom = 10i128.checked_pow(frac_part.len() as u32)?;
    let r = Rational::new(numer, denom);
    Some(if neg { -r } else { r })
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom() == &1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest rational with denominator at most `max_denom`, if it lies within `tol` of `x`.
pub fn snap(x: f64, max_denom: i128, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let mut best: Option<(f64, Rational)> = None;
    for q in 1..=max_denom {
        let p = (x * q as f64).round() as i128;
        let r = Rational::new(p, q);
        let err = (to_f64(&r) - x).abs();
        if best.as_ref().is_none_or(|(e, _)| err < *e - 1e-15) {
            best = Some((err, r));
        }
    }
    best.filter(|(e, _)| *e <= tol).map(|(_, r)| r)
}

pub fn lcm_denominators<'a>(it: impl IntoIterator<Item = &'a Rational>) -> i128 {
    it.into_iter().fold(1i128, |acc, r| acc.lcm(r.denom()))
}

pub fn is_odd_integer(r: &Rational) -> bool {
    r.is_integer() && !(r.numer() % 2).is_zero()
}

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}

pub mod serde_string {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}")))
    }
}
