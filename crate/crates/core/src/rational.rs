//! Exact rational arithmetic for the quantities that feed comparisons:
//! sampling overheads, objective weights, and deadline coefficients.
//!
//! Times and shot counts stay integral everywhere; rationals only enter
//! when a coefficient multiplies an integer, and the result is rounded
//! by an explicit rule (`ceil_mul_int`, `round_mul_int`).

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

/// An exact signed rational, reduced on construction.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i64>);

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    /// Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        Rational(Ratio::new(num, den))
    }

    pub fn from_int(n: i64) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `ceil(self * n)` as an integer, using exact arithmetic throughout.
    pub fn ceil_mul_int(&self, n: i64) -> Option<i64> {
        let prod = self.checked_mul_int(n)?;
        Some(prod.0.ceil().to_integer())
    }

    /// `round(self * n)` (half away from zero) as an integer.
    pub fn round_mul_int(&self, n: i64) -> Option<i64> {
        let prod = self.checked_mul_int(n)?;
        Some(prod.0.round().to_integer())
    }

    pub fn checked_mul_int(&self, n: i64) -> Option<Rational> {
        let num = self.numer().checked_mul(n)?;
        Some(Rational(Ratio::new(num, self.denom())))
    }

    pub fn checked_add(&self, other: Rational) -> Option<Rational> {
        let num = self
            .numer()
            .checked_mul(other.denom())?
            .checked_add(other.numer().checked_mul(self.denom())?)?;
        let den = self.denom().checked_mul(other.denom())?;
        Some(Rational(Ratio::new(num, den)))
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::ZERO
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        Rational(self.0 - rhs.0)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational(self.0 * rhs.0)
    }
}

impl Mul<i64> for Rational {
    type Output = Rational;
    fn mul(self, rhs: i64) -> Rational {
        Rational(self.0 * Ratio::from_integer(rhs))
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses `"9"`, `"-3/4"`, and exact decimal strings like `"1.3"`.
impl FromStr for Rational {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let n: i64 = num.trim().parse().map_err(|_| bad(s))?;
            let d: i64 = den.trim().parse().map_err(|_| bad(s))?;
            if d == 0 {
                return Err("zero denominator".to_string());
            }
            return Ok(Rational::new(n, d));
        }
        if let Some((whole, frac)) = s.split_once('.') {
            let negative = whole.trim_start().starts_with('-');
            let w: i64 = if whole.is_empty() || whole == "-" {
                0
            } else {
                whole.parse().map_err(|_| bad(s))?
            };
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad(s));
            }
            let scale = 10i64
                .checked_pow(frac.len() as u32)
                .ok_or_else(|| bad(s))?;
            let f: i64 = frac.parse().map_err(|_| bad(s))?;
            let f = if negative { -f } else { f };
            let num = w.checked_mul(scale).and_then(|x| x.checked_add(f)).ok_or_else(|| bad(s))?;
            return Ok(Rational::new(num, scale));
        }
        let n: i64 = s.parse().map_err(|_| bad(s))?;
        Ok(Rational::from_int(n))
    }
}

fn bad(s: &str) -> String {
    format!("cannot parse {s:?} as a rational")
}

/// Integers serialize as bare numbers, everything else as `[num, den]`.
impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            serializer.serialize_i64(self.numer())
        } else {
            let mut t = serializer.serialize_tuple(2)?;
            t.serialize_element(&self.numer())?;
            t.serialize_element(&self.denom())?;
            t.end()
        }
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }
}

struct RationalVisitor;

impl<'de> Visitor<'de> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer, a [num, den] pair, or a string like \"1.3\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        i64::try_from(v)
            .map(Rational::from_int)
            .map_err(|_| E::custom("integer out of range"))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
        if v.fract() == 0.0 && v.abs() < 2f64.powi(53) {
            Ok(Rational::from_int(v as i64))
        } else {
            Err(E::custom(
                "non-integer floats are inexact; write the value as a string (\"1.3\") or [num, den]",
            ))
        }
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<Rational, A::Error> {
        let num: i64 = seq
            .next_element()?
            .ok_or_else(|| de::Error::custom("missing numerator"))?;
        let den: i64 = seq
            .next_element()?
            .ok_or_else(|| de::Error::custom("missing denominator"))?;
        if seq.next_element::<i64>()?.is_some() {
            return Err(de::Error::custom("expected exactly two elements"));
        }
        if den == 0 {
            return Err(de::Error::custom("zero denominator"));
        }
        Ok(Rational::new(num, den))
    }
}
