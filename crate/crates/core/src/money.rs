//! Scalar abstraction shared by every analytical module.
//!
//! All closed-form quantities (offers, reservation values, expected utilities)
//! are written once against [`Money`] and instantiated with exact rationals for
//! verification or with `f64`/`f32` for quick estimates.

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// A number type usable for money, probabilities and utilities.
pub trait Money: Num + Signed + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {
    /// Largest absolute difference that [`Money::approx_eq`] still treats as equal.
    /// Zero for exact types.
    fn tolerance() -> Self;

    /// `⌊self · 2^bits⌋`, or `None` when negative or not representable in 128 bits.
    fn floor_scaled(&self, bits: u32) -> Option<u128>;

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tolerance()
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("i64 fits") / Self::from_i64(den).expect("i64 fits")
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

impl Money for f64 {
    fn tolerance() -> Self {
        1e-12
    }

    fn floor_scaled(&self, bits: u32) -> Option<u128> {
        let v = (self * 2f64.powi(bits as i32)).floor();
        (v >= 0.0 && v < 2f64.powi(128)).then_some(v as u128)
    }
}

impl Money for f32 {
    fn tolerance() -> Self {
        1e-6
    }

    fn floor_scaled(&self, bits: u32) -> Option<u128> {
        (*self as f64).floor_scaled(bits)
    }
}

impl Money for BigRational {
    fn tolerance() -> Self {
        Self::zero()
    }

    fn floor_scaled(&self, bits: u32) -> Option<u128> {
        if self.is_negative() {
            return None;
        }
        let scaled = self * BigRational::from_integer(BigInt::one() << bits as usize);
        scaled.floor().to_integer().to_u128()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(num.into(), den.into())
    }
}

pub(crate) fn min_of<T: PartialOrd>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

pub(crate) fn max_of<T: PartialOrd>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn sum<T: Money>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid decimal `{input}`: {reason}")]
pub struct ParseMoneyError {
    pub input: String,
    pub reason: &'static str,
}

/// Parses an exact decimal (`12`, `-0.375`, `1.5e3`) or fraction (`7/3`) into a rational.
pub fn parse_rational(input: &str) -> Result<BigRational, ParseMoneyError> {
    let err = |reason| ParseMoneyError {
        input: input.to_string(),
        reason,
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err("empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| err("bad numerator"))?;
        let den = BigInt::from_str(den.trim()).map_err(|_| err("bad denominator"))?;
        if den.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(BigRational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (
            &s[..i],
            s[i + 1..].parse::<i32>().map_err(|_| err("bad exponent"))?,
        ),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err("non-digit character"));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(&all_digits).map_err(|_| err("bad digits"))?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Renders a rational exactly: integers as `3`, others as `p/q`.
pub fn format_rational(value: &BigRational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Renders a rational as a decimal when its expansion terminates, otherwise as `p/q`.
pub fn format_decimal(value: &BigRational) -> String {
    let mut den = value.denom().clone();
    let two = BigInt::from(2u8);
    let five = BigInt::from(5u8);
    let mut digits = 0usize;
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format_rational(value);
    }
    digits += twos.max(fives);
    if digits == 0 {
        return value.numer().to_string();
    }
    let scaled = value * BigRational::from_integer(num_traits::pow(BigInt::from(10u8), digits));
    let n = scaled.to_integer();
    let negative = n.is_negative();
    let mut s = n.abs().to_string();
    while s.len() <= digits {
        s.insert(0, '0');
    }
    let point = s.len() - digits;
    s.insert(point, '.');
    if negative {
        s.insert(0, '-');
    }
    s
}
