//! Arithmetic modes.
//!
//! Every algorithm in this crate is generic over [`Scalar`], which has two
//! implementations: [`num::BigRational`] (exact mode, the reference) and
//! `f64` (float mode, with fixed tolerances).  Exact mode uses no tolerances
//! at all; float mode treats residuals up to [`Scalar::feas_tol`] as zero
//! when testing feasibility and optimality.

use std::cmp::Ordering;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

/// Number type the solvers and measures run on.
///
/// Arithmetic goes through by-reference methods so that exact mode avoids
/// needless big-integer clones in inner loops.
pub trait Scalar:
    Clone + PartialEq + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// True when arithmetic is exact and comparisons need no tolerance.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(n: i64) -> Self;
    /// `n / d`; `d` must be nonzero.
    fn ratio(n: i64, d: i64) -> Self;
    /// Exact value injected into this mode (rounds in float mode).
    fn from_exact(q: &BigRational) -> Self;

    /// Nearest `f64`, for reporting and cross-mode comparison.
    fn to_f64(&self) -> f64;
    /// Exact representation of this value; `None` for non-finite floats.
    fn to_exact(&self) -> Option<BigRational>;

    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    /// `other` must be nonzero.
    fn div_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn abs_ref(&self) -> Self;

    fn add_assign_ref(&mut self, other: &Self);
    fn sub_assign_ref(&mut self, other: &Self);
    fn mul_assign_ref(&mut self, other: &Self);
    /// `self -= a * b`, the fused update of elimination loops.
    fn sub_mul_assign(&mut self, a: &Self, b: &Self);

    fn is_zero(&self) -> bool;
    /// Sign relative to zero.  Total for all values this crate produces;
    /// non-finite floats report `Equal` and are caught by `is_finite`.
    fn sign(&self) -> Ordering;
    fn is_finite(&self) -> bool;

    /// Feasibility and optimality tolerance: zero in exact mode.
    fn feas_tol() -> Self;
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn ratio(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }
    fn from_exact(q: &BigRational) -> Self {
        q.clone()
    }

    fn to_f64(&self) -> f64 {
        num::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn to_exact(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn abs_ref(&self) -> Self {
        self.abs()
    }

    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign_ref(&mut self, other: &Self) {
        *self -= other;
    }
    fn mul_assign_ref(&mut self, other: &Self) {
        *self *= other;
    }
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn sign(&self) -> Ordering {
        self.numer().sign().cmp(&num::bigint::Sign::NoSign)
    }
    fn is_finite(&self) -> bool {
        true
    }

    fn feas_tol() -> Self {
        Zero::zero()
    }
}

/// Feasibility and optimality tolerance of float mode.
pub const F64_FEAS_TOL: f64 = 1e-9;
/// Tolerance for comparing reported values across modes.
pub const F64_REPORT_TOL: f64 = 1e-7;
/// Float contextuality decisions closer than this to the boundary are
/// re-verified in exact mode.
pub const F64_DECISION_BAND: f64 = 1e-6;

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }
    fn from_exact(q: &BigRational) -> Self {
        Scalar::to_f64(q)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_exact(&self) -> Option<BigRational> {
        BigRational::from_float(*self)
    }

    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn abs_ref(&self) -> Self {
        self.abs()
    }

    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign_ref(&mut self, other: &Self) {
        *self -= other;
    }
    fn mul_assign_ref(&mut self, other: &Self) {
        *self *= other;
    }
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn sign(&self) -> Ordering {
        self.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn feas_tol() -> Self {
        F64_FEAS_TOL
    }
}

/// Sum of a slice of scalars.
pub fn sum<S: Scalar>(values: &[S]) -> S {
    let mut acc = S::zero();
    for v in values {
        acc.add_assign_ref(v);
    }
    acc
}

/// Dot product of equal-length slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        acc.add_assign_ref(&x.mul_ref(y));
    }
    acc
}

/// Parses an exact rational from decimal or fraction notation.
///
/// Accepts `"3"`, `"-1/3"`, `"0.25"`, `"2.5e-3"` and the like.  Decimal
/// input is taken at face value, so `"0.1"` is exactly one tenth.
pub fn parse_exact(text: &str) -> Result<BigRational, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty number".to_string());
    }
    if let Some((n, d)) = s.split_once('/') {
        let numer: BigInt = n
            .trim()
            .parse()
            .map_err(|_| format!("invalid numerator in {s:?}"))?;
        let denom: BigInt = d
            .trim()
            .parse()
            .map_err(|_| format!("invalid denominator in {s:?}"))?;
        if denom.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(BigRational::new(numer, denom));
    }

    // Decimal or scientific notation: mantissa [. fraction] [e exponent].
    let (mantissa, exponent) = match s.split_once(['e', 'E']) {
        Some((m, e)) => {
            let exp: i64 = e.parse().map_err(|_| format!("invalid exponent in {s:?}"))?;
            (m, exp)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || digits == "-" || digits == "+" {
        return Err(format!("invalid number {s:?}"));
    }
    let numer: BigInt = digits
        .parse()
        .map_err(|_| format!("invalid number {s:?}"))?;
    let shift = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let scale = ten.pow(shift.unsigned_abs() as u32);
    Ok(if shift >= 0 {
        BigRational::from_integer(numer * scale)
    } else {
        BigRational::new(numer, scale)
    })
}
