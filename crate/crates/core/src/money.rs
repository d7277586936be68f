//! Exact rational currency amounts.
//!
//! Every cost, reserve and payment in the crate is a [`Money`]. The fuzzer
//! decides incentive violations by strict comparison of utilities, so the
//! arithmetic must never round.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseMoneyError;

/// An exact rational amount of currency.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(Ratio<i128>);

impl Money {
    pub const ZERO: Money = Money(Ratio::new_raw(0, 1));
    pub const ONE: Money = Money(Ratio::new_raw(1, 1));

    /// Builds `numer / denom` in lowest terms.
    ///
    /// # Panics
    /// Panics if `denom` is zero.
    pub fn new(numer: i128, denom: i128) -> Self {
        Money(Ratio::new(numer, denom))
    }

    pub fn from_int(value: i128) -> Self {
        Money(Ratio::from_integer(value))
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

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Money {
        Money(self.0.abs())
    }

    pub fn min(self, other: Money) -> Money {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Money) -> Money {
        std::cmp::max(self, other)
    }

    /// `self * units` for a unit count.
    pub fn times(self, units: u64) -> Money {
        Money(self.0 * i128::from(units))
    }

    /// Midpoint of two amounts.
    pub fn midpoint(self, other: Money) -> Money {
        Money((self.0 + other.0) / 2)
    }

    /// Smallest multiple of `1/denom` that is `>= self`.
    pub fn ceil_to(self, denom: i128) -> Money {
        let scaled = self.0 * denom;
        Money(Ratio::new(scaled.ceil().to_integer(), denom))
    }

    /// Lossy conversion for reporting.
    pub fn to_f64(&self) -> f64 {
        let (n, d) = (*self.0.numer(), *self.0.denom());
        let whole = Integer::div_floor(&n, &d);
        whole as f64 + (n - whole * d) as f64 / d as f64
    }

    /// Renders with exactly `digits` fractional digits, rounding half away
    /// from zero.
    pub fn to_decimal(&self, digits: u32) -> String {
        let scale = 10i128.pow(digits);
        let scaled = self.0 * scale;
        let rounded = scaled.round().to_integer();
        let sign = if rounded < 0 { "-" } else { "" };
        let abs = rounded.unsigned_abs();
        let scale = scale as u128;
        if digits == 0 {
            format!("{sign}{abs}")
        } else {
            format!(
                "{sign}{}.{:0width$}",
                abs / scale,
                abs % scale,
                width = digits as usize
            )
        }
    }

    /// Exact decimal expansion when the denominator has only factors 2 and 5.
    fn terminating_decimal(&self) -> Option<String> {
        let mut d = self.denom();
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return None;
        }
        let digits = twos.max(fives);
        if digits > 30 {
            return None;
        }
        let text = self.to_decimal(digits);
        if digits == 0 {
            return Some(text);
        }
        Some(text.trim_end_matches('0').trim_end_matches('.').to_string())
    }

    /// Least common multiple of the denominators of `values` (1 when empty).
    pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Money>) -> i128 {
        values.into_iter().fold(1i128, |acc, m| acc.lcm(&m.denom()))
    }

    fn parse_decimal(text: &str) -> Result<Money, ParseMoneyError> {
        let err = || ParseMoneyError(text.to_string());
        let (mantissa, exponent) = match text.find(['e', 'E']) {
            Some(pos) => (
                &text[..pos],
                text[pos + 1..].parse::<i32>().map_err(|_| err())?,
            ),
            None => (text, 0),
        };
        let (negative, body) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: i128 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| err())?
        };
        let scale = exponent - frac_part.len() as i32;
        if scale.unsigned_abs() > 30 {
            return Err(err());
        }
        let pow = 10i128.pow(scale.unsigned_abs());
        let value = if scale >= 0 {
            Ratio::from_integer(numer.checked_mul(pow).ok_or_else(err)?)
        } else {
            Ratio::new(numer, pow)
        };
        Ok(Money(if negative { -value } else { value }))
    }
}

impl FromStr for Money {
    type Err = ParseMoneyError;

    /// Accepts integers, decimals (`"12.375"`, `"1e-3"`) and fractions (`"7/3"`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let numer: i128 = n.trim().parse().map_err(|_| ParseMoneyError(s.into()))?;
            let denom: i128 = d.trim().parse().map_err(|_| ParseMoneyError(s.into()))?;
            if denom == 0 {
                return Err(ParseMoneyError(s.into()));
            }
            return Ok(Money::new(numer, denom));
        }
        Money::parse_decimal(s)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.terminating_decimal() {
            Some(text) => f.write_str(&text),
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({self})")
    }
}

impl From<i64> for Money {
    fn from(value: i64) -> Self {
        Money::from_int(value.into())
    }
}

impl From<u64> for Money {
    fn from(value: u64) -> Self {
        Money::from_int(value.into())
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Mul for Money {
    type Output = Money;
    fn mul(self, rhs: Money) -> Money {
        Money(self.0 * rhs.0)
    }
}

impl Mul<i128> for Money {
    type Output = Money;
    fn mul(self, rhs: i128) -> Money {
        Money(self.0 * rhs)
    }
}

impl Div<i128> for Money {
    type Output = Money;
    fn div(self, rhs: i128) -> Money {
        Money(self.0 / rhs)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |acc, m| acc + *m)
    }
}

impl Serialize for Money {
    /// Integers serialize as JSON numbers; everything else as an exact string.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            if let Ok(v) = i64::try_from(self.numer()) {
                return serializer.serialize_i64(v);
            }
        }
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MoneyVisitor;

        impl Visitor<'_> for MoneyVisitor {
            type Value = Money;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a decimal/fraction string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Money, E> {
                Ok(Money::from(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Money, E> {
                Ok(Money::from(v))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Money, E> {
                if !v.is_finite() {
                    return Err(E::custom("non-finite amount"));
                }
                // Shortest round-trip rendering, then parsed exactly.
                format!("{v:?}").parse().map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Money, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(MoneyVisitor)
    }
}
