//! Scalar fields used by the algebra: `f64` for simulation and exact rationals
//! for structural computations.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Q = BigRational;

/// Operations shared by `f64` and [`Q`].
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
{
    fn from_q(q: &Q) -> Self;
    fn as_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_q(q: &Q) -> Self {
        q_to_f64(q)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Q {
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn as_f64(&self) -> f64 {
        q_to_f64(self)
    }
}

/// `p/q` as an exact rational.
pub fn q(p: i64, d: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(d))
}

pub fn qi(p: i64) -> Q {
    Q::from_integer(BigInt::from(p))
}

pub fn q_to_f64(x: &Q) -> f64 {
    ToPrimitive::to_f64(x).unwrap_or_else(|| {
        // Very large numerators: fall back to a ratio of floats.
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact value of a finite float.
pub fn q_from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("non-finite value {x}")))
}

pub fn q_vec_from_f64(v: &[f64]) -> Result<Vec<Q>> {
    v.iter().map(|&x| q_from_f64(x)).collect()
}

pub fn q_vec_to_f64(v: &[Q]) -> Vec<f64> {
    v.iter().map(q_to_f64).collect()
}

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"0.25"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::InvalidParameter(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Ok(Q::from_integer(n));
    }
    // Decimal literal, read exactly in base ten.
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').ok_or_else(bad)?;
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || int.len() + frac.len() == 0 {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let v = Q::new(digits, den);
    Ok(if neg { -v } else { v })
}

/// Canonical `p/q` (or `p`) rendering.
pub fn format_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn q_abs(x: &Q) -> Q {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("1/2").unwrap(), q(1, 2));
        assert_eq!(parse_q("-3").unwrap(), qi(-3));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-1.5").unwrap(), q(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
        assert_eq!(format_q(&q(6, -4)), "-3/2");
        assert_eq!(format_q(&qi(7)), "7");
    }

    #[test]
    fn float_roundtrip_is_exact() {
        let x = 0.1_f64;
        assert_eq!(q_to_f64(&q_from_f64(x).unwrap()), x);
    }
}
