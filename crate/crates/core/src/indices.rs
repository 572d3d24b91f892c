//! Index functions ν₁, ν₂, μ₁, μ₂ and the six regions of the (1/p, 1/q)
//! square.
//!
//! Exponents are stored as reciprocals. When they come from integers,
//! fractions or terminating decimals the reciprocals are exact rationals and
//! every comparison below is exact; otherwise they fall back to `f64` with a
//! 1e-12 tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub const APPROX_TOL: f64 = 1e-12;

/// A real number that is exact when it can be.
#[derive(Clone, Copy, Debug)]
pub enum Real {
    Exact(Rational64),
    Approx(f64),
}

impl Real {
    pub fn zero() -> Self {
        Real::Exact(Rational64::zero())
    }

    pub fn one() -> Self {
        Real::Exact(Rational64::one())
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Real::Exact(Rational64::new(n, d))
    }

    pub fn value(self) -> f64 {
        match self {
            Real::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Real::Approx(x) => x,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Real::Exact(_))
    }

    fn lift(
        self,
        other: Real,
        exact: impl Fn(Rational64, Rational64) -> Option<Rational64>,
        approx: impl Fn(f64, f64) -> f64,
    ) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => match exact(a, b) {
                Some(r) => Real::Exact(r),
                None => Real::Approx(approx(self.value(), other.value())),
            },
            _ => Real::Approx(approx(self.value(), other.value())),
        }
    }

    /// Total order; approximate values within `APPROX_TOL` compare equal.
    pub fn compare(self, other: Real) -> Ordering {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a.cmp(&b),
            _ => {
                let d = self.value() - other.value();
                if d.abs() <= APPROX_TOL {
                    Ordering::Equal
                } else if d < 0.0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    pub fn le(self, other: Real) -> bool {
        self.compare(other) != Ordering::Greater
    }

    pub fn ge(self, other: Real) -> bool {
        self.compare(other) != Ordering::Less
    }

    pub fn same(self, other: Real) -> bool {
        self.compare(other) == Ordering::Equal
    }

    pub fn min(self, other: Real) -> Real {
        self.lift(other, |a, b| Some(a.min(b)), f64::min)
    }

    pub fn max(self, other: Real) -> Real {
        self.lift(other, |a, b| Some(a.max(b)), f64::max)
    }

    pub fn abs(self) -> Real {
        match self {
            Real::Exact(r) => Real::Exact(r.abs()),
            Real::Approx(x) => Real::Approx(x.abs()),
        }
    }

    /// `1/self`; `None` for zero.
    pub fn recip(self) -> Option<Real> {
        match self {
            Real::Exact(r) if r.is_zero() => None,
            Real::Exact(r) => Some(Real::Exact(r.recip())),
            Real::Approx(0.0) => None,
            Real::Approx(x) => Some(Real::Approx(1.0 / x)),
        }
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Real) -> bool {
        self.same(*other)
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, o: Real) -> Real {
        self.lift(o, |a, b| a.checked_add_r(b), |a, b| a + b)
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, o: Real) -> Real {
        self.lift(o, |a, b| a.checked_sub_r(b), |a, b| a - b)
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        match self {
            Real::Exact(r) => Real::Exact(-r),
            Real::Approx(x) => Real::Approx(-x),
        }
    }
}

trait CheckedRatio: Sized {
    fn checked_add_r(self, o: Self) -> Option<Self>;
    fn checked_sub_r(self, o: Self) -> Option<Self>;
}

impl CheckedRatio for Rational64 {
    fn checked_add_r(self, o: Self) -> Option<Self> {
        let n = (*self.numer() as i128) * (*o.denom() as i128) + (*o.numer() as i128) * (*self.denom() as i128);
        let d = (*self.denom() as i128) * (*o.denom() as i128);
        reduce_i128(n, d)
    }

    fn checked_sub_r(self, o: Self) -> Option<Self> {
        self.checked_add_r(-o)
    }
}

fn reduce_i128(n: i128, d: i128) -> Option<Rational64> {
    fn gcd(mut a: i128, mut b: i128) -> i128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.abs()
    }
    let g = gcd(n, d).max(1);
    let (n, d) = (n / g, d / g);
    let n = i64::try_from(n).ok()?;
    let d = i64::try_from(d).ok()?;
    Some(Rational64::new(n, d))
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Real::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Real::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Parse a finite decimal or fraction into an exact rational when possible.
fn parse_real(s: &str) -> Option<Real> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: Real = parse_real(a)?;
        let b: Real = parse_real(b)?;
        if b.value() == 0.0 {
            return None;
        }
        return match (a, b) {
            (Real::Exact(a), Real::Exact(b)) => Some(Real::Exact(a / b)),
            _ => Some(Real::Approx(a.value() / b.value())),
        };
    }
    if let Ok(n) = s.parse::<i64>() {
        return Some(Real::Exact(Rational64::from_integer(n)));
    }
    let body = s.strip_prefix('+').unwrap_or(s);
    if let Some((int, frac)) = body.split_once('.') {
        let digits_ok = |t: &str| t.chars().all(|c| c.is_ascii_digit());
        let (neg, int) = match int.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, int),
        };
        if digits_ok(int) && digits_ok(frac) && !frac.is_empty() && int.len() + frac.len() <= 15 {
            let num: i64 = format!("{int}{frac}").parse().ok()?;
            let den = 10i64.checked_pow(frac.len() as u32)?;
            let r = Rational64::new(if neg { -num } else { num }, den);
            return Some(Real::Exact(r));
        }
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Real::Approx)
}

/// An exponent p ∈ [1, ∞], stored as 1/p.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent {
    recip: Real,
}

impl Exponent {
    pub fn from_recip(u: Real) -> Result<Self> {
        if u.ge(Real::zero()) && u.le(Real::one()) {
            let u = match u {
                Real::Approx(x) => Real::Approx(x.clamp(0.0, 1.0)),
                exact => exact,
            };
            Ok(Exponent { recip: u })
        } else {
            Err(Error::Domain(format!("1/p = {u} is outside [0, 1]")))
        }
    }

    /// p = n/d.
    pub fn ratio(n: i64, d: i64) -> Result<Self> {
        if n <= 0 || d <= 0 {
            return Err(Error::Domain(format!("p = {n}/{d} is not ≥ 1")));
        }
        Self::from_recip(Real::ratio(d, n))
    }

    pub fn int(p: i64) -> Result<Self> {
        Self::ratio(p, 1)
    }

    pub fn infinity() -> Self {
        Exponent { recip: Real::zero() }
    }

    pub fn from_f64(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            return Ok(Self::infinity());
        }
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("p = {p} is not in [1, ∞]")));
        }
        Self::from_recip(Real::Approx(1.0 / p))
    }

    pub fn recip(&self) -> Real {
        self.recip
    }

    /// 1/p as a float.
    pub fn inv(&self) -> f64 {
        self.recip.value()
    }

    pub fn value(&self) -> f64 {
        let u = self.recip.value();
        if u == 0.0 {
            f64::INFINITY
        } else {
            1.0 / u
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.recip.same(Real::zero())
    }

    pub fn conjugate(&self) -> Self {
        Exponent {
            recip: Real::one() - self.recip,
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "∞" | "+inf") {
            return Ok(Self::infinity());
        }
        let p = parse_real(&t).ok_or_else(|| Error::Parse(s.to_string()))?;
        if !p.ge(Real::one()) {
            return Err(Error::Domain(format!("p = {s} is not in [1, ∞]")));
        }
        Self::from_recip(p.recip().ok_or_else(|| Error::Parse(s.to_string()))?)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.recip.recip() {
            None => write!(f, "inf"),
            Some(p) => write!(f, "{p}"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub fn conjugate_exponent(p: Exponent) -> Exponent {
    p.conjugate()
}

/// The modulation-space index pair (p, q).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentPair {
    pub p: Exponent,
    pub q: Exponent,
}

impl ExponentPair {
    pub fn new(p: Exponent, q: Exponent) -> Self {
        ExponentPair { p, q }
    }

    pub fn parse(p: &str, q: &str) -> Result<Self> {
        Ok(ExponentPair::new(p.parse()?, q.parse()?))
    }

    /// Convenience for integer/infinite pairs; `0` stands for ∞.
    pub fn ints(p: i64, q: i64) -> Self {
        let e = |x: i64| if x == 0 { Exponent::infinity() } else { Exponent::int(x).expect("p >= 1") };
        ExponentPair::new(e(p), e(q))
    }

    pub fn from_recips(u: Real, v: Real) -> Result<Self> {
        Ok(ExponentPair::new(Exponent::from_recip(u)?, Exponent::from_recip(v)?))
    }

    pub fn u(&self) -> Real {
        self.p.recip()
    }

    pub fn v(&self) -> Real {
        self.q.recip()
    }

    pub fn conjugate(&self) -> Self {
        ExponentPair::new(self.p.conjugate(), self.q.conjugate())
    }
}

impl fmt::Display for ExponentPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    I1,
    I2,
    I3,
    I1Star,
    I2Star,
    I3Star,
}

impl Region {
    pub const ALL: [Region; 6] = [Region::I1, Region::I2, Region::I3, Region::I1Star, Region::I2Star, Region::I3Star];

    pub fn starred(self) -> bool {
        matches!(self, Region::I1Star | Region::I2Star | Region::I3Star)
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::I1 => "I1",
            Region::I2 => "I2",
            Region::I3 => "I3",
            Region::I1Star => "I1*",
            Region::I2Star => "I2*",
            Region::I3Star => "I3*",
        }
    }

    pub fn contains(self, pq: &ExponentPair) -> bool {
        let (u, v) = (pq.u(), pq.v());
        let u1 = Real::one() - u;
        let half = Real::ratio(1, 2);
        match self {
            Region::I1 => u.max(u1).le(v),
            Region::I2 => v.max(half).le(u1),
            Region::I3 => v.max(half).le(u),
            Region::I1Star => u.min(u1).ge(v),
            Region::I2Star => v.min(half).ge(u1),
            Region::I3Star => v.min(half).ge(u),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Membership flags for the six regions. Boundary points belong to every
/// region whose non-strict inequalities hold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RegionSet {
    flags: [bool; 6],
}

impl RegionSet {
    pub fn contains(&self, r: Region) -> bool {
        self.flags[r as usize]
    }

    pub fn members(&self) -> Vec<Region> {
        Region::ALL.iter().copied().filter(|r| self.contains(*r)).collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.members().into_iter().map(Region::name).collect()
    }
}

impl Serialize for RegionSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

pub fn classify_region(pq: &ExponentPair) -> RegionSet {
    let mut flags = [false; 6];
    for r in Region::ALL {
        flags[r as usize] = r.contains(pq);
    }
    RegionSet { flags }
}

/// (ν₁, ν₂) from the closed max/min forms.
pub fn nu_indices(pq: &ExponentPair) -> (Real, Real) {
    let (u, v) = (pq.u(), pq.v());
    let u1 = Real::one() - u;
    let nu1 = Real::zero().max(v - u.min(u1));
    let nu2 = Real::zero().min(v - u.max(u1));
    (nu1, nu2)
}

/// (μ₁, μ₂) = (ν₁ − 1/p, ν₂ − 1/p).
pub fn mu_indices(pq: &ExponentPair) -> (Real, Real) {
    let (nu1, nu2) = nu_indices(pq);
    (nu1 - pq.u(), nu2 - pq.u())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IndexValues {
    pub nu1: Real,
    pub nu2: Real,
    pub mu1: Real,
    pub mu2: Real,
}

pub fn index_values(pq: &ExponentPair) -> IndexValues {
    let (nu1, nu2) = nu_indices(pq);
    let (mu1, mu2) = mu_indices(pq);
    IndexValues { nu1, nu2, mu1, mu2 }
}

/// Piecewise table value of ν₁ (starred regions) or ν₂ (unstarred regions);
/// `None` when `pq` is not in `region`.
pub fn nu_table(region: Region, pq: &ExponentPair) -> Option<Real> {
    if !region.contains(pq) {
        return None;
    }
    let (u, v) = (pq.u(), pq.v());
    Some(match region {
        Region::I1 | Region::I1Star => Real::zero(),
        Region::I2 | Region::I2Star => u + v - Real::one(),
        Region::I3 | Region::I3Star => v - u,
    })
}

/// Piecewise table value of μ₁ (starred) or μ₂ (unstarred).
pub fn mu_table(region: Region, pq: &ExponentPair) -> Option<Real> {
    if !region.contains(pq) {
        return None;
    }
    let (u, v) = (pq.u(), pq.v());
    Some(match region {
        Region::I1 | Region::I1Star => -u,
        Region::I2 | Region::I2Star => v - Real::one(),
        Region::I3 | Region::I3Star => v - u - u,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Expand,
    Shrink,
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "expand" => Ok(Regime::Expand),
            "shrink" => Ok(Regime::Shrink),
            _ => Err(Error::Domain(format!("unknown regime `{s}`"))),
        }
    }
}

/// μ₁ for λ ≥ 1, μ₂ for λ ≤ 1; multiply by the dimension.
pub fn sharp_dilation_exponent(pq: &ExponentPair, regime: Regime) -> Real {
    let (mu1, mu2) = mu_indices(pq);
    match regime {
        Regime::Expand => mu1,
        Regime::Shrink => mu2,
    }
}

/// Per-dimension thresholds (ν₁, ν₂) for B_s ↪ M and M ↪ B_s.
pub fn embedding_thresholds(pq: &ExponentPair) -> (Real, Real) {
    nu_indices(pq)
}

/// The rational grid {0, 1/d, …, 1}² of (1/p, 1/q).
pub fn rational_grid(d: i64) -> Vec<ExponentPair> {
    let mut out = Vec::with_capacity(((d + 1) * (d + 1)) as usize);
    for a in 0..=d {
        for b in 0..=d {
            out.push(ExponentPair::from_recips(Real::ratio(a, d), Real::ratio(b, d)).expect("grid in square"));
        }
    }
    out
}

/// The default (p,q) test matrix used by the experiments.
pub fn default_test_matrix() -> Vec<ExponentPair> {
    [("1", "1"), ("2", "2"), ("inf", "inf"), ("1", "inf"), ("inf", "1"), ("2", "1"), ("1", "2"), ("4", "2"), ("2", "4"), ("4", "4/3"), ("4/3", "4")]
        .iter()
        .map(|(p, q)| ExponentPair::parse(p, q).expect("valid literal"))
        .collect()
}

impl From<Real> for f64 {
    fn from(r: Real) -> f64 {
        r.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pq(p: &str, q: &str) -> ExponentPair {
        ExponentPair::parse(p, q).unwrap()
    }

    #[test]
    fn conjugates() {
        let c = |s: &str| conjugate_exponent(s.parse().unwrap()).to_string();
        assert_eq!(c("2"), "2");
        assert_eq!(c("1"), "inf");
        assert_eq!(c("4"), "4/3");
        assert_eq!(c("inf"), "1");
        assert!("0.5".parse::<Exponent>().is_err());
    }

    #[test]
    fn nu_examples() {
        assert_eq!(nu_indices(&pq("2", "2")), (Real::zero(), Real::zero()));
        assert_eq!(nu_indices(&pq("4", "1")), (Real::ratio(3, 4), Real::zero()));
        assert_eq!(nu_indices(&pq("1", "inf")), (Real::zero(), Real::ratio(-1, 1)));
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu_indices(&pq("2", "2")), (Real::ratio(-1, 2), Real::ratio(-1, 2)));
        assert_eq!(mu_indices(&pq("inf", "1")), (Real::one(), Real::zero()));
        assert_eq!(mu_indices(&pq("1", "inf")), (Real::ratio(-1, 1), Real::ratio(-2, 1)));
    }

    #[test]
    fn region_examples() {
        assert_eq!(classify_region(&pq("2", "2")).members().len(), 6);
        assert_eq!(classify_region(&pq("4", "1")).members(), vec![Region::I1, Region::I3Star]);
        let r = classify_region(&pq("1", "1"));
        assert!(r.contains(Region::I1) && r.contains(Region::I2Star));
    }

    #[test]
    fn sharp_exponents() {
        assert_eq!(sharp_dilation_exponent(&pq("2", "inf"), Regime::Shrink), Real::ratio(-1, 1));
        assert_eq!(sharp_dilation_exponent(&pq("inf", "1"), Regime::Expand), Real::one());
        assert_eq!(sharp_dilation_exponent(&pq("2", "2"), Regime::Expand), Real::ratio(-1, 2));
    }

    #[test]
    fn thresholds() {
        assert_eq!(embedding_thresholds(&pq("2", "2")), (Real::zero(), Real::zero()));
        assert_eq!(embedding_thresholds(&pq("1", "1")), (Real::one(), Real::zero()));
        assert_eq!(embedding_thresholds(&pq("inf", "inf")), (Real::zero(), Real::ratio(-1, 1)));
    }

    #[test]
    fn parsing_is_exact() {
        let e: Exponent = "1.5".parse().unwrap();
        assert_eq!(e.recip(), Real::ratio(2, 3));
        assert!(e.recip().is_exact());
        let e: Exponent = "4/3".parse().unwrap();
        assert_eq!(e.recip(), Real::ratio(3, 4));
        assert!("abc".parse::<Exponent>().is_err());
        assert!(matches!("1/0".parse::<Exponent>(), Err(Error::Parse(_))));
    }

    #[test]
    fn approximate_inputs_still_classify() {
        let p = Exponent::from_f64(2.0 + 1e-14).unwrap();
        let e = ExponentPair::new(p, Exponent::int(2).unwrap());
        assert_eq!(classify_region(&e).members().len(), 6);
    }
}
