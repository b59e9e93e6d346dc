//! Exact rational numbers.
//!
//! `Rat` wraps `Ratio<i128>` and routes every arithmetic operation through the
//! checked variants, so an overflow aborts loudly instead of wrapping. All
//! quantities in this crate (lengths, predicate values, distortions) are small
//! rationals and stay far away from the `i128` range.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rat(Ratio<i128>);

// Parts below 2^31 keep every cross product inside i64, so the hot paths skip
// i128 division entirely. Results are reduced here, matching `Ratio::new`.
const SMALL: i128 = 1 << 31;

#[inline]
fn small(r: &Ratio<i128>) -> Option<(i64, i64)> {
    let (n, d) = (*r.numer(), *r.denom());
    if n > -SMALL && n < SMALL && d < SMALL {
        Some((n as i64, d as i64))
    } else {
        None
    }
}

#[inline]
fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

/// `n/d` with `d > 0`, reduced.
#[inline]
fn reduced(n: i64, d: i64) -> Rat {
    let g = gcd_u64(n.unsigned_abs(), d as u64) as i64;
    Rat(Ratio::new_raw((n / g) as i128, (d / g) as i128))
}

#[inline]
fn add_small(a: (i64, i64), b: (i64, i64)) -> Rat {
    if a.1 == b.1 {
        reduced(a.0 + b.0, a.1)
    } else {
        reduced(a.0 * b.1 + b.0 * a.1, a.1 * b.1)
    }
}

impl Ord for Rat {
    #[inline]
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (small(&self.0), small(&other.0)) {
            (Some(a), Some(b)) => (a.0 * b.1).cmp(&(b.0 * a.1)),
            _ => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for Rat {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRatError(pub String);

impl Rat {
    pub const ZERO: Rat = Rat(Ratio::new_raw(0, 1));
    pub const ONE: Rat = Rat(Ratio::new_raw(1, 1));

    /// Panics if `den` is zero.
    pub fn new(num: i128, den: i128) -> Self {
        Rat(Ratio::new(num, den))
    }

    pub fn int(n: i128) -> Self {
        Rat(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Rat(self.0.abs())
    }

    pub fn ceil(&self) -> Self {
        Rat(self.0.ceil())
    }

    pub fn floor(&self) -> Self {
        Rat(self.0.floor())
    }

    /// Integer ceiling as a `usize`; negative values map to 0.
    pub fn ceil_usize(&self) -> usize {
        let c = self.0.ceil().to_integer();
        if c <= 0 {
            0
        } else {
            usize::try_from(c).expect("ceiling out of range")
        }
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn half(&self) -> Self {
        *self / Rat::int(2)
    }

    /// `max(lo, min(hi, self))`.
    pub fn clamp_to(&self, lo: Rat, hi: Rat) -> Self {
        if *self < lo {
            lo
        } else if *self > hi {
            hi
        } else {
            *self
        }
    }

    pub fn pow_i(base: i128, exp: u32) -> Self {
        Rat::int(base.checked_pow(exp).expect("rational overflow"))
    }
}

impl From<i128> for Rat {
    fn from(n: i128) -> Self {
        Rat::int(n)
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        if let (Some(a), Some(b)) = (small(&self.0), small(&rhs.0)) {
            return add_small(a, b);
        }
        Rat(self.0.checked_add(&rhs.0).expect("rational overflow"))
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        *self = *self + rhs;
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, rhs: Rat) -> Rat {
        if let (Some(a), Some(b)) = (small(&self.0), small(&rhs.0)) {
            return add_small(a, (-b.0, b.1));
        }
        Rat(self.0.checked_sub(&rhs.0).expect("rational overflow"))
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        if let (Some(a), Some(b)) = (small(&self.0), small(&rhs.0)) {
            return reduced(a.0 * b.0, a.1 * b.1);
        }
        Rat(self.0.checked_mul(&rhs.0).expect("rational overflow"))
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0.checked_div(&rhs.0).expect("rational overflow"))
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(s: &str) -> Option<i128> {
    s.trim().parse::<i128>().ok()
}

/// Parses a plain decimal such as `-0.125` exactly.
fn parse_decimal(s: &str) -> Option<Rat> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if frac_part.is_empty() && int_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let den = 10i128.checked_pow(u32::try_from(frac_part.len()).ok()?)?;
    let r = Rat::new(num, den);
    Some(if neg { -r } else { r })
}

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatError(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n = parse_int(n).ok_or_else(err)?;
            let d = parse_int(d).ok_or_else(err)?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Rat::new(n, d));
        }
        if let Some(n) = parse_int(s) {
            return Ok(Rat::int(n));
        }
        parse_decimal(s).ok_or_else(err)
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

struct RatVisitor;

impl Visitor<'_> for RatVisitor {
    type Value = Rat;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational as \"p/q\" string or a JSON number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
        Ok(Rat::int(v as i128))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
        Ok(Rat::int(v as i128))
    }

    // Shortest round-trip decimal of the float, read back exactly: `0.1` becomes 1/10.
    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rat, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        let text = format!("{v}");
        text.parse()
            .or_else(|_| format!("{v:.1}").parse())
            .map_err(|_| E::custom(format!("number {v} is not exactly representable")))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
        deserializer.deserialize_any(RatVisitor)
    }
}

/// Least common multiple of denominators, used to put values on a common grid.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rat>) -> i128 {
    values.into_iter().fold(1i128, |acc, r| acc.lcm(&r.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        assert_eq!("3/4".parse::<Rat>().unwrap(), Rat::new(3, 4));
        assert_eq!("-2".parse::<Rat>().unwrap(), Rat::int(-2));
        assert_eq!("0.125".parse::<Rat>().unwrap(), Rat::new(1, 8));
        assert_eq!("-.5".parse::<Rat>().unwrap(), Rat::new(-1, 2));
        assert!("1/0".parse::<Rat>().is_err());
        assert!("abc".parse::<Rat>().is_err());
    }

    #[test]
    fn json_numbers_are_exact() {
        let v: Vec<Rat> = serde_json::from_str(r#"[0.1, 2, "5/10", -3]"#).unwrap();
        assert_eq!(v, vec![Rat::new(1, 10), Rat::int(2), Rat::new(1, 2), Rat::int(-3)]);
        assert_eq!(serde_json::to_string(&Rat::new(6, 4)).unwrap(), "\"3/2\"");
    }

    #[test]
    fn clamp_and_ceil() {
        assert_eq!(Rat::new(5, 2).clamp_to(Rat::ZERO, Rat::int(2)), Rat::int(2));
        assert_eq!(Rat::new(-1, 2).clamp_to(Rat::ZERO, Rat::int(2)), Rat::ZERO);
        assert_eq!(Rat::new(5, 2).ceil_usize(), 3);
        assert_eq!(Rat::int(2).ceil_usize(), 2);
    }
}
