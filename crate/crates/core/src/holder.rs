//! Hölder complexes assembled from piece decompositions, and their
//! combinatorial equivalence up to rotation and reflection.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::pieces::{PieceClass, WedgePartition};
use crate::rational::{format_rational, snap, to_f64, Rational};
use crate::surface::SurfaceSpec;
use crate::{Error, Result};

/// Snapping and comparison band for fitted exponents.
pub const BETA_TOL: f64 = 0.02;
pub const BETA_DENOM: i128 = 12;

#[derive(Debug, Clone, Copy)]
pub enum Beta {
    Exact(Rational),
    /// A fitted value with no nearby small-denominator rational.
    Approx(f64),
}

impl Beta {
    pub fn from_fit(x: f64) -> Beta {
        match snap(x, BETA_DENOM, BETA_TOL) {
            Some(r) => Beta::Exact(r),
            None => Beta::Approx(x),
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Beta::Exact(r) => to_f64(r),
            Beta::Approx(x) => *x,
        }
    }
}

impl PartialEq for Beta {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Beta::Exact(a), Beta::Exact(b)) => a == b,
            _ => (self.value() - other.value()).abs() <= BETA_TOL,
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Exact(r) => f.write_str(&format_rational(r)),
            Beta::Approx(x) => write!(f, "{x:.4}"),
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Exact(r) => s.serialize_str(&format_rational(r)),
            Beta::Approx(x) => s.serialize_f64(*x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEdge {
    pub label: String,
    pub beta: Beta,
}

/// Cyclic sequence of edges; no edge is distinguished.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderComplex {
    pub edges: Vec<HolderEdge>,
}

impl HolderComplex {
    pub fn betas(&self) -> Vec<Beta> {
        self.edges.iter().map(|e| e.beta).collect()
    }

    /// Same complex starting at edge `k`.
    pub fn rotated(&self, k: usize) -> HolderComplex {
        let n = self.edges.len();
        HolderComplex { edges: (0..n).map(|i| self.edges[(i + k) % n].clone()).collect() }
    }
}

impl fmt::Display for HolderComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.edges.iter().map(|e| format!("{}:{}", e.label, e.beta)).collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn check_beta(b: Beta) -> Result<Beta> {
    let ok = match b {
        Beta::Exact(r) => r >= Rational::from_integer(1),
        Beta::Approx(x) => x >= 1.0 - BETA_TOL,
    };
    if ok {
        Ok(b)
    } else {
        Err(Error::BadBeta(format!("β = {b} is below 1")))
    }
}

pub fn plane_complex(widths: &[Beta]) -> Result<HolderComplex> {
    if widths.is_empty() {
        return Err(Error::BadBeta("empty width sequence".into()));
    }
    let edges = widths
        .iter()
        .enumerate()
        .map(|(i, &b)| Ok(HolderEdge { label: format!("U{}", i + 1), beta: check_beta(b)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(HolderComplex { edges })
}

/// Complex of the surface from the full-wedge partitions of its exceptional
/// rays. Directions outside every wedge form flat sectors with `β = 1`.
pub fn build_holder(s: &SurfaceSpec, partitions: &[WedgePartition]) -> Result<HolderComplex> {
    let half = s.m.atan();
    let mut wedges: Vec<&WedgePartition> = partitions.iter().collect();
    wedges.sort_by(|a, b| a.ray.angle().total_cmp(&b.ray.angle()));
    let sector = |k: usize| HolderEdge { label: format!("S{k}"), beta: Beta::Exact(Rational::from_integer(1)) };
    if wedges.is_empty() {
        return Ok(HolderComplex { edges: vec![sector(1)] });
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut edges = Vec::new();
    for (k, w) in wedges.iter().enumerate() {
        if w.pieces.is_empty() {
            return Err(Error::IncompleteCover(format!("wedge around {} has no pieces", w.ray)));
        }
        let next = wedges[(k + 1) % wedges.len()];
        let mut gap = (next.ray.angle() - w.ray.angle()).rem_euclid(tau);
        if wedges.len() == 1 {
            gap = tau;
        }
        if gap < 2.0 * half - 1e-12 {
            return Err(Error::IncompleteCover(format!("wedges around {} and {} overlap", w.ray, next.ray)));
        }
        // Transverse order runs clockwise, so reverse it for counterclockwise order.
        for (i, p) in w.pieces.iter().enumerate().rev() {
            let beta = match p.class {
                PieceClass::FL => Beta::from_fit(p.width_exp),
                PieceClass::FI | PieceClass::FD => Beta::from_fit(p.height_exp),
            };
            let beta = check_beta(beta)?;
            edges.push(HolderEdge { label: format!("{}:{:?}{}", w.ray, p.class, i + 1), beta });
        }
        if gap > 2.0 * half + 1e-12 {
            edges.push(sector(k + 1));
        }
    }
    Ok(HolderComplex { edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// `c2[(i + offset) % n]` matches `c1[i]` (after reversing `c2` when `reflected`).
    pub offset: usize,
    pub reflected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EquivalenceResult {
    pub equivalent: bool,
    pub witness: Option<Witness>,
}

pub fn combinatorially_equivalent(c1: &HolderComplex, c2: &HolderComplex) -> EquivalenceResult {
    let (a, b) = (c1.betas(), c2.betas());
    let n = a.len();
    let none = EquivalenceResult { equivalent: false, witness: None };
    if n != b.len() || n == 0 {
        return none;
    }
    let rev: Vec<Beta> = b.iter().rev().copied().collect();
    for (reflected, seq) in [(false, &b), (true, &rev)] {
        for offset in 0..n {
            if (0..n).all(|i| a[i] == seq[(i + offset) % n]) {
                return EquivalenceResult { equivalent: true, witness: Some(Witness { offset, reflected }) };
            }
        }
    }
    none
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[(i128, i128)]) -> HolderComplex {
        plane_complex(&v.iter().map(|&(p, q)| Beta::Exact(Rational::new(p, q))).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rotation_witness() {
        let a = seq(&[(3, 2), (7, 4), (1, 1), (1, 1)]);
        let b = seq(&[(1, 1), (1, 1), (3, 2), (7, 4)]);
        let r = combinatorially_equivalent(&a, &b);
        assert_eq!(r.witness, Some(Witness { offset: 2, reflected: false }));
        let same = seq(&[(1, 1); 4]);
        assert_eq!(combinatorially_equivalent(&same, &same).witness.unwrap().offset, 0);
    }

    #[test]
    fn multiset_mismatch() {
        let a = seq(&[(3, 2), (7, 4), (1, 1)]);
        let b = seq(&[(3, 2), (7, 4), (2, 1)]);
        assert!(!combinatorially_equivalent(&a, &b).equivalent);
    }

    #[test]
    fn reflection_counts() {
        let a = seq(&[(1, 1), (3, 2), (2, 1)]);
        let b = seq(&[(2, 1), (3, 2), (1, 1)]);
        assert_eq!(combinatorially_equivalent(&a, &b).witness, Some(Witness { offset: 0, reflected: true }));
    }

    #[test]
    fn bad_beta() {
        assert!(matches!(plane_complex(&[Beta::Exact(Rational::new(1, 2))]), Err(Error::BadBeta(_))));
        assert!(plane_complex(&[]).is_err());
    }

    #[test]
    fn snapping() {
        assert_eq!(Beta::from_fit(1.7503), Beta::Exact(Rational::new(7, 4)));
        assert_eq!(Beta::from_fit(0.9973), Beta::Exact(Rational::from_integer(1)));
        assert!(matches!(Beta::from_fit(f64::NAN), Beta::Approx(_)));
        assert_eq!(Beta::Approx(1.541), Beta::Approx(1.55));
    }

    #[test]
    fn json_shape() {
        let c = seq(&[(7, 4)]);
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(j, r#"{"edges":[{"label":"U1","beta":"7/4"}]}"#);
    }
}
