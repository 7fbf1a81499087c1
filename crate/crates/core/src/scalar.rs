//! Number types shared by the exact and floating-point code paths.
//!
//! Most of the crate runs on `f64`. The enumerators and the KKT verifier are
//! generic over [`Scalar`] so the same code can replay the golden instances in
//! exact rational arithmetic, where every comparison is exact.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Arbitrary precision rational used by the exact mode.
pub type Rational = BigRational;

/// Relative slack used when comparing floating values for equality.
pub const REL_EPS: f64 = 1e-9;

pub trait Scalar: Clone + Debug + Display + PartialEq + PartialOrd + Signed + Send + Sync + 'static {
    /// True when arithmetic is exact and comparisons need no tolerance.
    const EXACT: bool;

    fn from_f64(value: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;

    fn from_int(value: i64) -> Self;

    /// Nearest value to an exact rational (the rational itself in exact mode).
    fn from_rational(value: &Rational) -> Self;

    /// Strictly greater than zero (unlike `Signed::is_positive`, false for `+0.0`).
    fn gt0(&self) -> bool {
        *self > Self::zero()
    }

    /// Strictly less than zero.
    fn lt0(&self) -> bool {
        *self < Self::zero()
    }

    /// `self <= other`, allowing `tol * max(1, |self|, |other|)` in floating mode.
    fn le_tol(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self <= other
        } else {
            let (a, b) = (self.to_f64(), other.to_f64());
            a <= b + tol * 1f64.max(a.abs()).max(b.abs())
        }
    }

    /// `|self - other|` within relative tolerance (exact equality in exact mode).
    fn eq_tol(&self, other: &Self, tol: f64) -> bool {
        self.le_tol(other, tol) && other.le_tol(self, tol)
    }

    /// Strictly positive beyond the tolerance band.
    fn is_pos_tol(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.gt0()
        } else {
            self.to_f64() > tol
        }
    }

    /// Strictly negative beyond the tolerance band.
    fn is_neg_tol(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.lt0()
        } else {
            self.to_f64() < -tol
        }
    }

    fn is_zero_tol(&self, tol: f64) -> bool {
        !self.is_pos_tol(tol) && !self.is_neg_tol(tol)
    }

    /// JSON rendering: plain numbers for floats, `"p/q"` strings for rationals.
    fn to_json(&self) -> serde_json::Value;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64(value: f64) -> Option<Self> {
        value.is_finite().then_some(value)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_int(value: i64) -> Self {
        value as f64
    }

    fn from_rational(value: &Rational) -> Self {
        ToPrimitive::to_f64(value).unwrap_or(f64::NAN)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_f64(value: f64) -> Option<Self> {
        <Rational as FromPrimitive>::from_f64(value)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_int(value: i64) -> Self {
        Rational::from_integer(BigInt::from(value))
    }

    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(format_rational(self))
    }
}

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

const MAX_DECIMAL_SCALE: i32 = 400;

/// Parses `"p/q"`, integers and plain decimals (`"-0.125"`, `"2.5e-3"`) exactly.
pub fn parse_rational(text: &str) -> Result<Rational, Error> {
    let text = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((num, den)) = text.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = text[pos + 1..].parse().map_err(|_| bad())?;
            (&text[..pos], exp)
        }
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(&joined).map_err(|_| bad())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent.checked_sub(frac_part.len() as i32).ok_or_else(bad)?;
    // Inputs come from untrusted documents; keep the power of ten small.
    if scale.unsigned_abs() > MAX_DECIMAL_SCALE as u32 {
        return Err(Error::Parse(format!("exponent out of range in {text:?}")));
    }
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("5/12").unwrap(), rat(5, 12));
        assert_eq!(parse_rational("-0.125").unwrap(), rat(-1, 8));
        assert!(parse_rational("1e99999").is_err());
        assert!(parse_rational("1e-2147483648").is_err());
        assert_eq!(parse_rational("2.5e-1").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("17").unwrap(), rat(17, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn formats_integers_without_denominator() {
        assert_eq!(format_rational(&rat(-4, 2)), "-2");
        assert_eq!(format_rational(&rat(33, 2)), "33/2");
    }

    #[test]
    fn float_tolerance_is_relative() {
        assert!(1e6f64.eq_tol(&(1e6 + 1e-4), 1e-9));
        assert!(!1f64.eq_tol(&1.001, 1e-9));
        assert!(rat(1, 3).le_tol(&rat(1, 3), 0.0));
        assert!(!rat(1, 3).le_tol(&rat(1, 4), 0.5));
    }
}
