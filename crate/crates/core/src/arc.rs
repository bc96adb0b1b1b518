//! Puiseux test arcs, geometric sampling schedules and power-law limit fits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Slope};
use crate::rational::{format_rational, lcm_denominators, to_f64, Rational};
use crate::surface::SurfaceSpec;
use crate::{Error, Result};

/// `x = side · Σ cᵢ y^{sᵢ}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcSpec {
    #[serde(serialize_with = "serialize_terms")]
    terms: Vec<(f64, Rational)>,
    side: i8,
}

fn serialize_terms<S: serde::Serializer>(
    terms: &[(f64, Rational)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(terms.len()))?;
    for (c, e) in terms {
        seq.serialize_element(&(c, format_rational(e)))?;
    }
    seq.end()
}

impl ArcSpec {
    pub fn new(terms: Vec<(f64, Rational)>, side: i8) -> Result<Self> {
        if side != 1 && side != -1 {
            return Err(Error::InvalidArc(format!("side must be +1 or -1, got {side}")));
        }
        for (c, e) in &terms {
            if !c.is_finite() {
                return Err(Error::InvalidArc(format!("coefficient {c} is not finite")));
            }
            if *e < Rational::from_integer(1) {
                return Err(Error::InvalidArc(format!("exponent {} is below 1", format_rational(e))));
            }
        }
        if terms.windows(2).any(|w| w[0].1 >= w[1].1) {
            return Err(Error::InvalidArc("exponents must be strictly increasing".into()));
        }
        if terms.first().is_some_and(|(c, _)| *c == 0.0) {
            return Err(Error::InvalidArc("leading coefficient is zero".into()));
        }
        Ok(ArcSpec { terms, side })
    }

    /// The arc `x ≡ 0`.
    pub fn axis() -> Self {
        ArcSpec { terms: Vec::new(), side: 1 }
    }

    /// Single term `x = c·y^s`.
    pub fn monomial(c: f64, s: Rational) -> Result<Self> {
        Self::new(vec![(c, s)], 1)
    }

    pub fn terms(&self) -> &[(f64, Rational)] {
        &self.terms
    }

    pub fn side(&self) -> i8 {
        self.side
    }

    pub fn reflected(&self) -> Self {
        ArcSpec { terms: self.terms.clone(), side: -self.side }
    }

    pub fn leading_exponent(&self) -> Option<Rational> {
        self.terms.first().map(|t| t.1)
    }

    /// Common denominator `q` of the exponents; the arc is a power series in `y^{1/q}`.
    pub fn denominator(&self) -> i128 {
        lcm_denominators(self.terms.iter().map(|t| &t.1))
    }

    pub fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let s: f64 = self.terms.iter().map(|(c, e)| c * y.powf(to_f64(e))).sum();
        self.side as f64 * s
    }
}

impl fmt::Display for ArcSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "x = 0");
        }
        write!(f, "x = ")?;
        if self.side < 0 {
            write!(f, "-(")?;
        }
        for (i, (c, e)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
                write!(f, "{}*y^{}", c.abs(), format_rational(e))?;
            } else {
                write!(f, "{}*y^{}", c, format_rational(e))?;
            }
        }
        if self.side < 0 {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Geometric schedule `y_k = y0 · ratio^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSchedule {
    pub y0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for SampleSchedule {
    fn default() -> Self {
        SampleSchedule { y0: 0.1, ratio: 0.7, count: 25 }
    }
}

impl SampleSchedule {
    pub fn new(y0: f64, ratio: f64, count: usize) -> Result<Self> {
        let s = SampleSchedule { y0, ratio, count };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y0 > 0.0) || !(self.ratio > 0.0 && self.ratio < 1.0) || self.count == 0 {
            return Err(Error::InvalidSchedule(format!(
                "need y0 > 0, ratio in (0,1), count > 0; got {self:?}"
            )));
        }
        if self.last() <= 1e-14 {
            return Err(Error::InvalidSchedule(format!(
                "smallest sample {:.3e} is below the noise floor 1e-14",
                self.last()
            )));
        }
        Ok(())
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.y0 * self.ratio.powi(k as i32)).collect()
    }

    pub fn last(&self) -> f64 {
        self.y0 * self.ratio.powi(self.count as i32 - 1)
    }

    /// Same ratio and count, starting below `eps` if necessary.
    pub fn clamped(&self, eps: f64) -> Self {
        SampleSchedule { y0: self.y0.min(eps), ..*self }
    }
}

/// Least-squares line through `(log y, log |g|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub log_coeff: f64,
    pub residual: f64,
    pub n_used: usize,
    /// Common sign of the fitted samples.
    pub sign: i8,
}

impl PowerFit {
    pub fn coeff(&self) -> f64 {
        self.sign as f64 * self.log_coeff.exp()
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.coeff() * y.powf(self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LimitClass {
    Zero,
    Finite(f64),
    Infinite(i8),
}

impl LimitClass {
    /// Limit as a float, with `±∞` for divergence.
    pub fn value(&self) -> f64 {
        match self {
            LimitClass::Zero => 0.0,
            LimitClass::Finite(v) => *v,
            LimitClass::Infinite(s) => f64::INFINITY * *s as f64,
        }
    }
}

/// Tunables for turning samples into a [`LimitClass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub tail: usize,
    pub tol_exp: f64,
    pub residual_ceiling: f64,
    /// A final sample above this magnitude counts as divergence.
    pub blowup: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tail: 12, tol_exp: 0.1, residual_ceiling: 0.05, blowup: 1e6 }
    }
}

pub fn fit_power(samples: &[(f64, f64)]) -> Result<PowerFit> {
    let used: Vec<(f64, f64)> =
        samples.iter().copied().filter(|(y, g)| *y > 0.0 && *g != 0.0 && g.is_finite()).collect();
    if used.len() < 3 {
        return Err(Error::TooFewSamples(used.len()));
    }
    let sign = used[0].1.signum();
    if used.iter().any(|(_, g)| g.signum() != sign) {
        return Err(Error::SignChange);
    }
    let n = used.len() as f64;
    let pts: Vec<(f64, f64)> = used.iter().map(|(y, g)| (y.ln(), g.abs().ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewSamples(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(PowerFit {
        exponent: slope,
        log_coeff: intercept,
        residual: (rss / n).sqrt(),
        n_used: used.len(),
        sign: sign as i8,
    })
}

pub fn classify_limit(fit: &PowerFit, tol_exp: f64, ceiling: f64) -> Result<LimitClass> {
    if !(fit.residual <= ceiling) {
        return Err(Error::NoisyFit { residual: fit.residual, ceiling });
    }
    Ok(if fit.exponent > tol_exp {
        LimitClass::Zero
    } else if fit.exponent < -tol_exp {
        LimitClass::Infinite(fit.sign)
    } else {
        LimitClass::Finite(fit.coeff())
    })
}

/// Constant term of a quadratic least-squares fit of `g` in `t = y^{1/q}`.
pub fn puiseux_extrapolate(samples: &[(f64, f64)], q: i128) -> Option<f64> {
    if samples.len() < 4 {
        return None;
    }
    let inv = 1.0 / q.max(1) as f64;
    // Normal equations for g ≈ a + b t + c t².
    let mut m = [[0.0f64; 4]; 3];
    for &(y, g) in samples {
        let t = y.powf(inv);
        let row = [1.0, t, t * t];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * g;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        m.swap(col, piv);
        if m[col][col].abs() < 1e-300 {
            return None;
        }
        for r in 0..3 {
            if r != col {
                let k = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= k * m[col][c];
                }
            }
        }
    }
    let a = m[0][3] / m[0][0];
    a.is_finite().then_some(a)
}

/// Full classification of a sampled quantity as `y → 0`.
///
/// `samples` run in decreasing `y`; infinite entries mark vertical-tangent hits.
/// `q` is the Puiseux denominator used to refine finite limits.
pub fn classify_samples(samples: &[(f64, f64)], q: i128, opts: &FitOptions) -> Result<(LimitClass, Option<PowerFit>)> {
    if let Some((_, g)) = samples.iter().find(|(_, g)| g.is_infinite()) {
        return Ok((LimitClass::Infinite(g.signum() as i8), None));
    }
    if samples.iter().any(|(_, g)| g.is_nan()) {
        return Err(Error::IndeterminateJet { x: f64::NAN, y: f64::NAN });
    }
    let tail = &samples[samples.len().saturating_sub(opts.tail)..];
    if let Some(&(_, g)) = tail.last() {
        if g.abs() > opts.blowup {
            return Ok((LimitClass::Infinite(g.signum() as i8), fit_power(tail).ok()));
        }
    }
    if tail.iter().all(|(_, g)| *g == 0.0) {
        return Ok((LimitClass::Zero, None));
    }
    let fit = match fit_power(tail) {
        Ok(fit) => fit,
        Err(Error::SignChange) | Err(Error::TooFewSamples(_)) => {
            // Oscillating or mostly vanishing samples still have a limit if |g| decays.
            let mags: Vec<(f64, f64)> = tail.iter().map(|(y, g)| (*y, g.abs())).collect();
            let nonzero = mags.iter().filter(|(_, g)| *g != 0.0).count();
            if nonzero < 3 {
                return Ok((LimitClass::Zero, None));
            }
            let fit = fit_power(&mags)?;
            if classify_limit(&fit, opts.tol_exp, opts.residual_ceiling)? == LimitClass::Zero {
                return Ok((LimitClass::Zero, Some(fit)));
            }
            return Err(Error::SignChange);
        }
        Err(e) => return Err(e),
    };
    let class = match classify_limit(&fit, opts.tol_exp, opts.residual_ceiling) {
        Ok(c) => c,
        Err(e) => match crossover_class(tail, opts.tol_exp, fit.sign) {
            Some(c) => c,
            None => return Err(e),
        },
    };
    let class = match class {
        LimitClass::Finite(v) => {
            let refined = puiseux_extrapolate(tail, q).filter(|r| r.signum() == v.signum());
            LimitClass::Finite(refined.unwrap_or(v))
        }
        other => other,
    };
    Ok((class, Some(fit)))
}

/// A tail that bends between two power laws fits no single one, but still has
/// a limit when every local log-log slope is decisively on one side of zero.
fn crossover_class(tail: &[(f64, f64)], tol_exp: f64, sign: i8) -> Option<LimitClass> {
    let slopes: Vec<f64> = tail
        .windows(2)
        .map(|w| (w[1].1.abs().ln() - w[0].1.abs().ln()) / (w[1].0.ln() - w[0].0.ln()))
        .collect();
    if slopes.is_empty() || slopes.iter().any(|s| !s.is_finite()) {
        return None;
    }
    if slopes.iter().all(|&s| s > tol_exp) {
        Some(LimitClass::Zero)
    } else if slopes.iter().all(|&s| s < -tol_exp) {
        Some(LimitClass::Infinite(sign))
    } else {
        None
    }
}

/// Converts jet partials to plain floats with `±∞` for sentinels.
pub(crate) fn slope_sample(s: Slope, x: f64, y: f64) -> Result<f64> {
    match s {
        Slope::Undefined => Err(Error::IndeterminateJet { x, y }),
        other => Ok(other.to_f64()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcLimits {
    pub fx: LimitClass,
    pub fy: LimitClass,
    pub fx_fit: Option<PowerFit>,
    pub fy_fit: Option<PowerFit>,
    pub fx_samples: Vec<(f64, f64)>,
    pub fy_samples: Vec<(f64, f64)>,
}

/// Samples `(y, f_x)` and `(y, f_y)` along an arc.
pub fn sample_slopes(f: &Expr, arc: &ArcSpec, sched: &SampleSchedule) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let mut fx = Vec::with_capacity(sched.count);
    let mut fy = Vec::with_capacity(sched.count);
    for y in sched.ys() {
        let x = arc.eval(y);
        let j = f.jet(x, y)?;
        fx.push((y, slope_sample(j.fx, x, y)?));
        fy.push((y, slope_sample(j.fy, x, y)?));
    }
    Ok((fx, fy))
}

pub fn slope_limit_along_arc(
    s: &SurfaceSpec,
    arc: &ArcSpec,
    sched: &SampleSchedule,
    opts: &FitOptions,
) -> Result<ArcLimits> {
    sched.validate()?;
    for y in sched.ys() {
        if y > s.eps {
            continue;
        }
        if arc.eval(y).abs() > s.m * y * (1.0 + 1e-12) {
            return Err(Error::OutsideWedge { y });
        }
    }
    let (fx_samples, fy_samples) = sample_slopes(&s.f, arc, sched)?;
    let q = arc.denominator();
    let (fx, fx_fit) = classify_samples(&fx_samples, q, opts)?;
    let (fy, fy_fit) = classify_samples(&fy_samples, q, opts)?;
    Ok(ArcLimits { fx, fy, fx_fit, fy_fit, fx_samples, fy_samples })
}

/// Two-column CSV with header `y,<name>`.
pub fn samples_csv(name: &str, samples: &[(f64, f64)]) -> String {
    let mut out = format!("y,{name}\n");
    for (y, g) in samples {
        out.push_str(&format!("{y:e},{g:e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i128, q: i128) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn eval_examples() {
        let arc = ArcSpec::new(vec![(1.0, r(3, 2)), (1.0, r(7, 4))], 1).unwrap();
        assert!((arc.eval(0.01) - (0.001 + 0.01f64.powf(1.75))).abs() < 1e-15);
        assert!((arc.eval(0.01) - 0.0013162).abs() < 1e-7);
        let crit = ArcSpec::monomial(1.0 / 3f64.sqrt(), r(2, 1)).unwrap();
        assert!((crit.eval(0.1) - 0.0057735).abs() < 1e-7);
        assert_eq!(arc.eval(0.0), 0.0);
        assert_eq!(arc.reflected().eval(0.01), -arc.eval(0.01));
        assert_eq!(arc.denominator(), 4);
    }

    #[test]
    fn arc_validation() {
        assert!(ArcSpec::new(vec![(1.0, r(1, 2))], 1).is_err());
        assert!(ArcSpec::new(vec![(1.0, r(2, 1)), (1.0, r(3, 2))], 1).is_err());
        assert!(ArcSpec::new(vec![(0.0, r(2, 1))], 1).is_err());
    }

    #[test]
    fn schedule_floor() {
        assert!(SampleSchedule::new(0.1, 0.7, 25).is_ok());
        assert!(SampleSchedule::new(0.1, 0.1, 20).is_err());
        assert!(SampleSchedule::new(0.1, 1.0, 5).is_err());
    }

    #[test]
    fn monomial_fit() {
        let s = SampleSchedule::new(0.1, 0.7, 20).unwrap();
        let samples: Vec<_> = s.ys().into_iter().map(|y| (y, 5.0 * y.powf(1.5))).collect();
        let fit = fit_power(&samples).unwrap();
        assert!((fit.exponent - 1.5).abs() < 1e-9);
        assert!((fit.coeff() - 5.0).abs() < 1e-9);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn sign_change_rejected() {
        let samples = [(0.1, 1.0), (0.07, -1.0), (0.049, 1.0)];
        assert_eq!(fit_power(&samples), Err(Error::SignChange));
        assert_eq!(fit_power(&samples[..2]), Err(Error::TooFewSamples(2)));
    }

    #[test]
    fn classification_examples() {
        let mk = |exponent: f64, c: f64| PowerFit {
            exponent,
            log_coeff: c.abs().ln(),
            residual: 0.0,
            n_used: 12,
            sign: c.signum() as i8,
        };
        assert_eq!(classify_limit(&mk(1.0, 1.0), 0.1, 0.05).unwrap(), LimitClass::Zero);
        assert_eq!(classify_limit(&mk(-1.0, -2.0), 0.1, 0.05).unwrap(), LimitClass::Infinite(-1));
        match classify_limit(&mk(0.0, -0.6495), 0.1, 0.05).unwrap() {
            LimitClass::Finite(v) => assert!((v + 0.6495).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let noisy = PowerFit { residual: 0.2, ..mk(0.0, 1.0) };
        assert!(matches!(classify_limit(&noisy, 0.1, 0.05), Err(Error::NoisyFit { .. })));
    }

    #[test]
    fn puiseux_refines_slow_corrections() {
        let s = SampleSchedule::default();
        let samples: Vec<_> = s.ys().into_iter().map(|y| (y, 0.7 + 0.3 * y.powf(0.25))).collect();
        let (class, _) = classify_samples(&samples, 4, &FitOptions::default()).unwrap();
        match class {
            LimitClass::Finite(v) => assert!((v - 0.7).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crossover_between_decays_is_zero() {
        // y^{3/4} bending into y^{7/4}: no single power fits, both decay.
        let samples: Vec<(f64, f64)> =
            SampleSchedule::default().ys().iter().map(|&y| (y, y.powf(0.75) / (1.0 + 1e-4 / y))).collect();
        let tail = &samples[samples.len() - 12..];
        assert!(classify_limit(&fit_power(tail).unwrap(), 0.1, 0.05).is_err());
        assert_eq!(classify_samples(&samples, 1, &FitOptions::default()).unwrap().0, LimitClass::Zero);
        let bumpy: Vec<(f64, f64)> = samples.iter().map(|&(y, g)| (y, g * (1.0 + 0.9 * (y.ln() * 3.0).sin()))).collect();
        assert!(classify_samples(&bumpy, 1, &FitOptions::default()).is_err());
    }

    #[test]
    fn sentinel_short_circuits() {
        let samples = [(0.1, 1.0), (0.07, f64::NEG_INFINITY), (0.049, 1.0)];
        let (class, _) = classify_samples(&samples, 1, &FitOptions::default()).unwrap();
        assert_eq!(class, LimitClass::Infinite(-1));
    }

    #[test]
    fn csv_header() {
        let csv = samples_csv("fx", &[(0.1, 2.0)]);
        assert!(csv.starts_with("y,fx\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
