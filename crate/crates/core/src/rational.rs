//! Exact rational numbers used for every fill quantity.
//!
//! Values live in an `i128` ratio while they fit and spill over to a
//! `BigRational` when an operation would overflow. The representation is
//! canonical: a value is only ever stored as `Big` when it does not fit the
//! small form, so structural equality and hashing agree with numeric equality.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

type Small = Ratio<i128>;

#[derive(Clone)]
enum Repr {
    Small(Small),
    Big(BigRational),
}

/// An exact rational number.
#[derive(Clone)]
pub struct Rational(Repr);

/// A quantity of water. Fills held by a [`crate::CupState`] are never negative.
pub type Fill = Rational;

// Leave headroom so that negating or doubling a small value never overflows.
const SMALL_BITS: u64 = 126;

fn to_big(r: &Small) -> BigRational {
    BigRational::new_raw(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn demote(big: BigRational) -> Rational {
    if big.numer().bits() <= SMALL_BITS && big.denom().bits() <= SMALL_BITS {
        if let (Some(n), Some(d)) = (big.numer().to_i128(), big.denom().to_i128()) {
            return Rational(Repr::Small(Ratio::new_raw(n, d)));
        }
    }
    Rational(Repr::Big(big))
}

fn small_ok(r: Small) -> Option<Small> {
    let lim = 1i128 << SMALL_BITS;
    (r.numer().abs() < lim && *r.denom() < lim).then_some(r)
}

impl Rational {
    pub fn zero() -> Self {
        Rational(Repr::Small(Small::zero()))
    }

    pub fn one() -> Self {
        Rational(Repr::Small(Small::one()))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(Repr::Small(Small::from_integer(n as i128)))
    }

    /// `numer / denom` in lowest terms. Panics when `denom` is zero.
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(Repr::Small(Small::new(numer as i128, denom as i128)))
    }

    /// `k / 2^64`, the dyadic form used for random offsets.
    pub fn dyadic64(k: u64) -> Self {
        Rational(Repr::Small(Small::new(k as i128, 1i128 << 64)))
    }

    pub fn from_bigints(numer: BigInt, denom: BigInt) -> Result<Self, Error> {
        if denom.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        Ok(demote(BigRational::new(numer, denom)))
    }

    /// `1 / k`.
    pub fn recip_int(k: usize) -> Self {
        assert!(k > 0, "reciprocal of zero");
        Rational(Repr::Small(Small::new(1, k as i128)))
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_zero(),
            Repr::Big(_) => false,
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_negative(),
            Repr::Big(r) => r.is_negative(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_integer(),
            Repr::Big(r) => r.is_integer(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(r) => BigInt::from(*r.numer()),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(r) => BigInt::from(*r.denom()),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    fn big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(r) => to_big(r),
            Repr::Big(r) => r.clone(),
        }
    }

    /// Largest integer not exceeding the value.
    pub fn floor_i128(&self) -> i128 {
        match &self.0 {
            Repr::Small(r) => r.numer().div_floor(r.denom()),
            Repr::Big(r) => r
                .numer()
                .div_floor(r.denom())
                .to_i128()
                .expect("floor of fill exceeds i128"),
        }
    }

    /// Fractional part in `[0, 1)`.
    pub fn fract(&self) -> Rational {
        self - &Rational(Repr::Small(Small::from_integer(self.floor_i128())))
    }

    pub fn abs(&self) -> Rational {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn min(self, other: Rational) -> Rational {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self {
            other
        } else {
            self
        }
    }

    /// The exact value of a finite float.
    pub fn from_f64(x: f64) -> Option<Rational> {
        BigRational::from_float(x).map(demote)
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(r) => *r.numer() as f64 / *r.denom() as f64,
            Repr::Big(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Canonical `num/den` text, always with an explicit denominator.
    pub fn to_exact_string(&self) -> String {
        match &self.0 {
            Repr::Small(r) => format!("{}/{}", r.numer(), r.denom()),
            Repr::Big(r) => format!("{}/{}", r.numer(), r.denom()),
        }
    }

    /// Like [`Rational::to_exact_string`] but integers drop the `/1`.
    pub fn to_compact_string(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            self.to_exact_string()
        }
    }

    /// Decimal rendering rounded (half away from zero) to `sig` significant
    /// digits, trailing zeros trimmed. Computed exactly, not through `f64`.
    pub fn to_decimal_string(&self, sig: usize) -> String {
        assert!(sig > 0);
        if self.is_zero() {
            return "0".to_string();
        }
        let neg = self.is_negative();
        let x = self.abs().big();
        let pow10 = |e: i64| -> BigRational {
            if e >= 0 {
                BigRational::from_integer(num_traits::pow(BigInt::from(10), e as usize))
            } else {
                BigRational::new(
                    BigInt::one(),
                    num_traits::pow(BigInt::from(10), (-e) as usize),
                )
            }
        };
        // exponent e with 10^e <= x < 10^(e+1)
        let approx = self.abs().to_f64().log10();
        let mut e = if approx.is_finite() {
            approx.floor() as i64
        } else {
            0
        };
        while pow10(e) > x {
            e -= 1;
        }
        while pow10(e + 1) <= x {
            e += 1;
        }
        let shift = sig as i64 - 1 - e;
        let scaled = &x * pow10(shift);
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut digits = (scaled + half).floor().to_integer();
        if digits >= num_traits::pow(BigInt::from(10), sig) {
            digits /= 10;
            e += 1;
        }
        let ds = digits.to_string();
        debug_assert_eq!(ds.len(), sig);
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        if e < 0 {
            out.push_str("0.");
            for _ in 0..(-e - 1) {
                out.push('0');
            }
            out.push_str(ds.trim_end_matches('0'));
        } else if (e as usize) < sig {
            let (int_part, frac) = ds.split_at(e as usize + 1);
            out.push_str(int_part);
            let frac = frac.trim_end_matches('0');
            if !frac.is_empty() {
                out.push('.');
                out.push_str(frac);
            }
        } else {
            out.push_str(&ds);
            for _ in 0..(e as usize + 1 - sig) {
                out.push('0');
            }
        }
        out
    }

    fn binop(
        a: &Rational,
        b: &Rational,
        small: impl Fn(&Small, &Small) -> Option<Small>,
        big: impl Fn(BigRational, BigRational) -> BigRational,
    ) -> Rational {
        if let (Repr::Small(x), Repr::Small(y)) = (&a.0, &b.0) {
            if let Some(r) = small(x, y).and_then(small_ok) {
                return Rational(Repr::Small(r));
            }
        }
        demote(big(a.big(), b.big()))
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a == b,
            (Repr::Big(a), Repr::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Rational {}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(r) => r.hash(state),
            Repr::Big(r) => r.hash(state),
        }
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => {
                if a.denom() == b.denom() {
                    return a.numer().cmp(b.numer());
                }
                match (
                    a.numer().checked_mul(b.denom()),
                    b.numer().checked_mul(a.denom()),
                ) {
                    (Some(l), Some(r)) => l.cmp(&r),
                    _ => a.cmp(b),
                }
            }
            _ => {
                let (a, b) = (self.big(), other.big());
                (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
            }
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn add(self, rhs: &Rational) -> Rational {
        if rhs.is_zero() {
            return self.clone();
        }
        Rational::binop(self, rhs, |x, y| x.checked_add(y), |x, y| x + y)
    }
}

impl<'a> Sub<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn sub(self, rhs: &Rational) -> Rational {
        if rhs.is_zero() {
            return self.clone();
        }
        Rational::binop(self, rhs, |x, y| x.checked_sub(y), |x, y| x - y)
    }
}

impl<'a> Mul<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn mul(self, rhs: &Rational) -> Rational {
        Rational::binop(self, rhs, |x, y| x.checked_mul(y), |x, y| x * y)
    }
}

impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        assert!(!rhs.is_zero(), "division by zero");
        Rational::binop(self, rhs, |x, y| x.checked_div(y), |x, y| x / y)
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational { (&self).$m(&rhs) }
        }
        impl<'a> $tr<&'a Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: &Rational) -> Rational { (&self).$m(rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul, Div div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = &*self - rhs;
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small(r) => Rational(Repr::Small(-r)),
            Repr::Big(r) => demote(-r),
        }
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| &acc + x)
    }
}

impl Sum<Rational> for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| &acc + &x)
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Rational::from_integer(n.into())
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<usize> for Rational {
    fn from(n: usize) -> Self {
        Rational(Repr::Small(Small::from_integer(n as i128)))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_exact_string())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_exact_string())
    }
}

fn parse_int(s: &str) -> Result<BigInt, Error> {
    let t = s.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    if t.is_empty()
        || !t
            .trim_start_matches('-')
            .bytes()
            .all(|b| b.is_ascii_digit())
    {
        return Err(Error::Parse(format!("not an integer: {s:?}")));
    }
    t.parse::<BigInt>()
        .map_err(|_| Error::Parse(format!("not an integer: {s:?}")))
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `num/den`, a bare integer, or a plain decimal such as `2.75`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            return Rational::from_bigints(parse_int(n)?, parse_int(d)?);
        }
        if let Some((int_part, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Parse(format!("not a rational: {s:?}")));
            }
            let neg = int_part.trim_start().starts_with('-');
            let int_digits = int_part.trim_start_matches(['-', '+']);
            let whole = if int_digits.is_empty() {
                BigInt::zero()
            } else {
                parse_int(int_digits)?
            };
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let mut numer = whole * &scale + parse_int(frac)?;
            if neg {
                numer = -numer;
            }
            return Rational::from_bigints(numer, scale);
        }
        Rational::from_bigints(parse_int(s)?, BigInt::one())
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_exact_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `1/from + 1/(from+1) + ... + 1/to`; zero when `from > to`.
pub fn harmonic_range(from: usize, to: usize) -> Rational {
    assert!(from >= 1, "harmonic terms start at 1");
    (from..=to).map(Rational::recip_int).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(q("22/12").to_string(), "11/6");
        assert_eq!(q("5").to_string(), "5/1");
        assert_eq!(q("2.75"), Rational::new(11, 4));
        assert_eq!(q("-0.5"), Rational::new(-1, 2));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        assert!("1.".parse::<Rational>().is_err());
    }

    #[test]
    fn overflow_spills_to_big_and_back() {
        let tiny = Rational::dyadic64(1);
        let mut acc = Rational::zero();
        for k in 2..=200usize {
            acc += &Rational::recip_int(k);
        }
        let sum = &acc + &tiny;
        assert!(matches!(sum.0, Repr::Big(_)));
        let back = &sum - &acc;
        assert!(matches!(back.0, Repr::Small(_)));
        assert_eq!(back, tiny);
    }

    #[test]
    fn ordering_mixed_representations() {
        let big = harmonic_range(2, 150);
        let below = &big - &Rational::dyadic64(1);
        assert!(below < big);
        assert!(Rational::from_integer(5) > big);
        assert!(Rational::from_integer(4) < big);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(
            Rational::new(11, 6).to_decimal_string(15),
            "1.83333333333333"
        );
        assert_eq!(
            Rational::new(1, 3).to_decimal_string(15),
            "0.333333333333333"
        );
        assert_eq!(
            Rational::new(2, 3).to_decimal_string(15),
            "0.666666666666667"
        );
        assert_eq!(Rational::from_integer(5).to_decimal_string(15), "5");
        assert_eq!(Rational::new(-1, 8).to_decimal_string(15), "-0.125");
        assert_eq!(Rational::new(1, 1000).to_decimal_string(15), "0.001");
        assert_eq!(Rational::zero().to_decimal_string(15), "0");
        assert_eq!(
            Rational::new(999_999_999_999_999_9, 10).to_decimal_string(15),
            "1000000000000000"
        );
    }

    #[test]
    fn floor_and_fract() {
        assert_eq!(Rational::new(37, 10).floor_i128(), 3);
        assert_eq!(Rational::new(-1, 2).floor_i128(), -1);
        assert_eq!(Rational::new(37, 10).fract(), Rational::new(7, 10));
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic_range(2, 4), Rational::new(13, 12));
        assert_eq!(harmonic_range(2, 5), Rational::new(77, 60));
        assert_eq!(harmonic_range(3, 2), Rational::zero());
    }
}
