//! Numeric abstraction shared by every layer.
//!
//! Balances, fees and hashrates are generic over [`Scalar`]. `Rational`
//! gives exact arithmetic; `f64` and `f32` trade exactness for speed.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Exact rational scalar.
pub type Rational = BigRational;

/// Number type usable for fees, balances, hashrates and probabilities.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact.
    const EXACT: bool;

    /// Parses `"3"`, `"-0.25"`, `"1e-3"` or `"2/7"`.
    fn parse_decimal(s: &str) -> Result<Self, Error>;

    /// Lossless textual form, accepted back by [`Scalar::parse_decimal`].
    fn to_repr(&self) -> String;

    /// Equality, exact for rationals and within a relative `1e-9` for floats.
    fn approx_eq(&self, other: &Self) -> bool;

    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_i64(num).expect("i64 fits") / Self::from_i64(den).expect("i64 fits")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Integer power with a non-negative exponent, by repeated squaring.
    fn powu(&self, mut exp: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base.clone();
            }
            exp >>= 1;
            if exp > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// `a > b` beyond the comparison tolerance.
    fn definitely_gt(&self, other: &Self) -> bool {
        self > other && !self.approx_eq(other)
    }
}

fn bad(s: &str) -> Error {
    Error::ScalarParse(s.to_string())
}

/// Splits a decimal literal into an exact rational.
fn parse_rational(s: &str) -> Result<BigRational, Error> {
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(bad(s));
        }
        return Ok(n / d);
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad(s))?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad(s));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad(s));
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = all.parse().map_err(|_| bad(s))?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut r = BigRational::from_integer(numer);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn parse_decimal(s: &str) -> Result<Self, Error> {
        parse_rational(s)
    }

    fn to_repr(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

macro_rules! float_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn parse_decimal(s: &str) -> Result<Self, Error> {
                let t = s.trim();
                if t.contains('/') {
                    let r = parse_rational(t)?;
                    return r.to_f64().map(|x| x as $t).ok_or_else(|| bad(s));
                }
                t.parse::<$t>().map_err(|_| bad(s))
            }

            fn to_repr(&self) -> String {
                format!("{}", self)
            }

            fn approx_eq(&self, other: &Self) -> bool {
                if self == other {
                    return true;
                }
                let scale = 1.0_f64.max(self.abs() as f64).max(other.abs() as f64);
                ((*self - *other).abs() as f64) <= $tol * scale
            }
        }
    };
}

float_scalar!(f64, 1e-9);
float_scalar!(f32, 1e-5);

/// Parses a comma-separated scalar list such as `"0.5,0.2,0.3"`.
pub fn parse_list<S: Scalar>(s: &str) -> Result<Vec<S>, Error> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(S::parse_decimal)
        .collect()
}

/// Converts between scalar types through the textual representation.
pub fn convert<A: Scalar, B: Scalar>(a: &A) -> B {
    B::parse_decimal(&a.to_repr()).expect("representation parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        let r = Rational::parse_decimal("0.1").unwrap();
        assert_eq!(r, Rational::ratio(1, 10));
        assert_eq!(Rational::parse_decimal("-2.50").unwrap(), Rational::ratio(-5, 2));
        assert_eq!(Rational::parse_decimal("3/9").unwrap(), Rational::ratio(1, 3));
        assert_eq!(Rational::parse_decimal("1e-3").unwrap(), Rational::ratio(1, 1000));
        assert_eq!(Rational::parse_decimal("2.5E2").unwrap(), Rational::ratio(250, 1));
        assert!(Rational::parse_decimal("abc").is_err());
        assert!(Rational::parse_decimal("1/0").is_err());
        assert!(Rational::parse_decimal("").is_err());
    }

    #[test]
    fn repr_round_trips() {
        for s in ["0", "7", "-1/3", "22/7"] {
            let r = Rational::parse_decimal(s).unwrap();
            assert_eq!(r.to_repr(), s);
        }
        let x = 0.1_f64 + 0.2;
        assert_eq!(f64::parse_decimal(&x.to_repr()).unwrap(), x);
        assert_eq!(f64::parse_decimal("1/4").unwrap(), 0.25);
    }

    #[test]
    fn float_tolerance() {
        assert!((0.1_f64 + 0.2).approx_eq(&0.3));
        assert!(!(0.3_f64).approx_eq(&0.3001));
        assert!(!Rational::ratio(1, 3).approx_eq(&Rational::ratio(333_333_333, 1_000_000_000)));
    }

    #[test]
    fn integer_powers() {
        assert_eq!(Rational::ratio(1, 2).powu(3), Rational::ratio(1, 8));
        assert_eq!(Rational::ratio(3, 7).powu(0), Rational::one());
        assert_eq!(2.0_f64.powu(10), 1024.0);
    }
}
