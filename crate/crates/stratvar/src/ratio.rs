//! Arbitrary-precision rationals used for every analytic value in the crate.
//!
//! `ExactRatio` wraps `num::BigRational` and pins down the textual form used
//! everywhere (tables, JSON, CSV): `"num/den"` in lowest terms with a positive
//! denominator, or a bare integer when the denominator is 1 on input.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

/// Exact rational number, always reduced, denominator always positive.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRatio(BigRational);

/// Failure to parse a `"num/den"` literal.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseRatioError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer `{0}` in rational literal")]
    BadInteger(String),
    #[error("zero denominator in rational literal `{0}`")]
    ZeroDenominator(String),
}

impl ExactRatio {
    pub fn zero() -> Self {
        ExactRatio(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactRatio(BigRational::one())
    }

    /// Ratio of two machine integers. Panics if `den` is zero.
    pub fn ratio(num: u64, den: u64) -> Self {
        assert!(den != 0, "denominator must be nonzero");
        ExactRatio(BigRational::new(num.into(), den.into()))
    }

    /// Ratio of two big integers. Panics if `den` is zero.
    pub fn new(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "denominator must be nonzero");
        ExactRatio(BigRational::new(num, den))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn square(&self) -> Self {
        ExactRatio(&self.0 * &self.0)
    }

    pub fn recip(&self) -> Self {
        assert!(!self.0.is_zero(), "cannot invert zero");
        ExactRatio(self.0.recip())
    }

    /// Nearest double to the exact value.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl From<u64> for ExactRatio {
    fn from(n: u64) -> Self {
        ExactRatio(BigRational::from_integer(n.into()))
    }
}

impl From<i64> for ExactRatio {
    fn from(n: i64) -> Self {
        ExactRatio(BigRational::from_integer(n.into()))
    }
}

impl From<BigInt> for ExactRatio {
    fn from(n: BigInt) -> Self {
        ExactRatio(BigRational::from_integer(n))
    }
}

macro_rules! forward_binop {
    ($imp:ident, $method:ident) => {
        impl $imp for ExactRatio {
            type Output = ExactRatio;
            fn $method(self, rhs: ExactRatio) -> ExactRatio {
                ExactRatio((self.0).$method(rhs.0))
            }
        }
        impl<'a> $imp<&'a ExactRatio> for ExactRatio {
            type Output = ExactRatio;
            fn $method(self, rhs: &'a ExactRatio) -> ExactRatio {
                ExactRatio((self.0).$method(&rhs.0))
            }
        }
        impl<'a> $imp<ExactRatio> for &'a ExactRatio {
            type Output = ExactRatio;
            fn $method(self, rhs: ExactRatio) -> ExactRatio {
                ExactRatio((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $imp<&'b ExactRatio> for &'a ExactRatio {
            type Output = ExactRatio;
            fn $method(self, rhs: &'b ExactRatio) -> ExactRatio {
                ExactRatio((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for ExactRatio {
    type Output = ExactRatio;
    fn neg(self) -> ExactRatio {
        ExactRatio(-self.0)
    }
}

impl Neg for &ExactRatio {
    type Output = ExactRatio;
    fn neg(self) -> ExactRatio {
        ExactRatio(-&self.0)
    }
}

impl Sum for ExactRatio {
    fn sum<I: Iterator<Item = ExactRatio>>(iter: I) -> ExactRatio {
        iter.fold(ExactRatio::zero(), |acc, x| acc + x)
    }
}

impl fmt::Display for ExactRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for ExactRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl FromStr for ExactRatio {
    type Err = ParseRatioError;

    fn from_str(s: &str) -> Result<Self, ParseRatioError> {
        let text = s.trim();
        if text.is_empty() {
            return Err(ParseRatioError::Empty);
        }
        let (num_text, den_text) = match text.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (text, "1"),
        };
        let num = BigInt::from_str(num_text)
            .map_err(|_| ParseRatioError::BadInteger(num_text.to_owned()))?;
        let den = BigInt::from_str(den_text)
            .map_err(|_| ParseRatioError::BadInteger(den_text.to_owned()))?;
        if den.is_zero() {
            return Err(ParseRatioError::ZeroDenominator(text.to_owned()));
        }
        Ok(ExactRatio(BigRational::new(num, den)))
    }
}

impl Serialize for ExactRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactRatio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
