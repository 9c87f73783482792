//! Exact scalars of the form a + b·√2 with rational a, b.
//!
//! Every coefficient a 50:50 beam splitter or a Fourier rotation can produce
//! lives in ℤ[1/√2]; keeping them exact makes state verification a matter of
//! coefficient equality instead of float comparison. Arithmetic is carried out
//! in the field ℚ(√2) (reduction steps divide by pivots that have no inverse
//! in the dyadic subring), while serialization is restricted to dyadic values.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RingError {
    #[error("division by zero in Q(sqrt 2)")]
    DivisionByZero,
    #[error("coefficient {0} is not dyadic (denominator is not a power of two)")]
    NotDyadic(String),
    #[error("dyadic numerator overflows i64: {0}")]
    NumeratorOverflow(String),
}

/// Exact element a + b·√2 of ℚ(√2).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingCoeff {
    a: BigRational,
    b: BigRational,
}

/// Dyadic wire form of one [`RingCoeff`]: a = a_num / 2^a_exp, b = b_num / 2^b_exp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicParts {
    pub a_num: i64,
    pub a_exp: u32,
    pub b_num: i64,
    pub b_exp: u32,
}

impl RingCoeff {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        Self { a, b }
    }

    pub fn zero() -> Self {
        Self {
            a: BigRational::zero(),
            b: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        Self {
            a: BigRational::one(),
            b: BigRational::zero(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self {
            a: BigRational::from_integer(BigInt::from(n)),
            b: BigRational::zero(),
        }
    }

    /// num / 2^exp, the rational part of a dyadic value.
    pub fn dyadic(num: i64, exp: u32) -> Self {
        let den = BigInt::one() << exp;
        Self {
            a: BigRational::new(BigInt::from(num), den),
            b: BigRational::zero(),
        }
    }

    pub fn half() -> Self {
        Self::dyadic(1, 1)
    }

    pub fn sqrt2() -> Self {
        Self {
            a: BigRational::zero(),
            b: BigRational::one(),
        }
    }

    /// 1/√2 = (1/2)·√2.
    pub fn inv_sqrt2() -> Self {
        let den = BigInt::from(2);
        Self {
            a: BigRational::zero(),
            b: BigRational::new(BigInt::one(), den),
        }
    }

    pub fn rational_parts(&self) -> (&BigRational, &BigRational) {
        (&self.a, &self.b)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    /// Exact image under multiplication by 1/√2: a + b√2 ↦ b + (a/2)√2.
    pub fn mul_inv_sqrt2(&self) -> Self {
        let two = BigRational::from_integer(BigInt::from(2));
        Self {
            a: self.b.clone(),
            b: &self.a / two,
        }
    }

    /// Exact image under multiplication by √2: a + b√2 ↦ 2b + a√2.
    pub fn mul_sqrt2(&self) -> Self {
        let two = BigRational::from_integer(BigInt::from(2));
        Self {
            a: &self.b * two,
            b: self.a.clone(),
        }
    }

    /// Field norm a² − 2b²; zero only for the zero element since √2 is irrational.
    fn field_norm(&self) -> BigRational {
        let two = BigRational::from_integer(BigInt::from(2));
        &self.a * &self.a - two * &self.b * &self.b
    }

    /// Multiplicative inverse, if the value is nonzero.
    pub fn try_inverse(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.field_norm();
        Some(Self {
            a: &self.a / &n,
            b: -&self.b / &n,
        })
    }

    pub fn abs(&self) -> Self {
        if self.to_f64() < 0.0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        a + b * std::f64::consts::SQRT_2
    }

    /// Dyadic wire form; errors when a denominator is not a power of two.
    pub fn dyadic_parts(&self) -> Result<DyadicParts, RingError> {
        let (a_num, a_exp) = rational_to_dyadic(&self.a)?;
        let (b_num, b_exp) = rational_to_dyadic(&self.b)?;
        Ok(DyadicParts {
            a_num,
            a_exp,
            b_num,
            b_exp,
        })
    }

    pub fn from_dyadic_parts(p: &DyadicParts) -> Self {
        let a = BigRational::new(BigInt::from(p.a_num), BigInt::one() << p.a_exp);
        let b = BigRational::new(BigInt::from(p.b_num), BigInt::one() << p.b_exp);
        Self { a, b }
    }
}

fn rational_to_dyadic(r: &BigRational) -> Result<(i64, u32), RingError> {
    let den = r.denom();
    if den.sign() != Sign::Plus {
        return Err(RingError::NotDyadic(r.to_string()));
    }
    let mag = den.magnitude();
    if mag.count_ones() != 1 {
        return Err(RingError::NotDyadic(r.to_string()));
    }
    let exp = mag.trailing_zeros().unwrap_or(0) as u32;
    let num = r
        .numer()
        .to_i64()
        .ok_or_else(|| RingError::NumeratorOverflow(r.to_string()))?;
    Ok((num, exp))
}

impl Default for RingCoeff {
    fn default() -> Self {
        Self::zero()
    }
}

impl Neg for &RingCoeff {
    type Output = RingCoeff;
    fn neg(self) -> RingCoeff {
        RingCoeff {
            a: -&self.a,
            b: -&self.b,
        }
    }
}

impl Neg for RingCoeff {
    type Output = RingCoeff;
    fn neg(self) -> RingCoeff {
        -&self
    }
}

impl Add for &RingCoeff {
    type Output = RingCoeff;
    fn add(self, rhs: &RingCoeff) -> RingCoeff {
        RingCoeff {
            a: &self.a + &rhs.a,
            b: &self.b + &rhs.b,
        }
    }
}

impl Sub for &RingCoeff {
    type Output = RingCoeff;
    fn sub(self, rhs: &RingCoeff) -> RingCoeff {
        RingCoeff {
            a: &self.a - &rhs.a,
            b: &self.b - &rhs.b,
        }
    }
}

impl Mul for &RingCoeff {
    type Output = RingCoeff;
    fn mul(self, rhs: &RingCoeff) -> RingCoeff {
        // (a + b√2)(c + d√2) = (ac + 2bd) + (ad + bc)√2
        let two = BigRational::from_integer(BigInt::from(2));
        RingCoeff {
            a: &self.a * &rhs.a + two * &self.b * &rhs.b,
            b: &self.a * &rhs.b + &self.b * &rhs.a,
        }
    }
}

/// Panics on a zero divisor; reduction code checks pivots before dividing.
impl Div for &RingCoeff {
    type Output = RingCoeff;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &RingCoeff) -> RingCoeff {
        let inv = rhs.try_inverse().expect("division by zero in Q(sqrt 2)");
        self * &inv
    }
}

macro_rules! forward_owned_binop {
    ($trait:ident, $fn:ident) => {
        impl $trait for RingCoeff {
            type Output = RingCoeff;
            fn $fn(self, rhs: RingCoeff) -> RingCoeff {
                (&self).$fn(&rhs)
            }
        }
        impl $trait<&RingCoeff> for RingCoeff {
            type Output = RingCoeff;
            fn $fn(self, rhs: &RingCoeff) -> RingCoeff {
                (&self).$fn(rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);
forward_owned_binop!(Div, div);

impl AddAssign<&RingCoeff> for RingCoeff {
    fn add_assign(&mut self, rhs: &RingCoeff) {
        self.a += &rhs.a;
        self.b += &rhs.b;
    }
}

impl SubAssign<&RingCoeff> for RingCoeff {
    fn sub_assign(&mut self, rhs: &RingCoeff) {
        self.a -= &rhs.a;
        self.b -= &rhs.b;
    }
}

impl MulAssign<&RingCoeff> for RingCoeff {
    fn mul_assign(&mut self, rhs: &RingCoeff) {
        *self = (&*self) * rhs;
    }
}

impl fmt::Display for RingCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        if !self.a.is_zero() {
            write!(f, "{}", self.a)?;
            first = false;
        }
        if !self.b.is_zero() {
            if !first {
                if self.b.is_negative() {
                    write!(f, " - {}√2", -&self.b)?;
                } else {
                    write!(f, " + {}√2", self.b)?;
                }
            } else {
                write!(f, "{}√2", self.b)?;
            }
        }
        Ok(())
    }
}

impl Serialize for RingCoeff {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let parts = self.dyadic_parts().map_err(serde::ser::Error::custom)?;
        parts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RingCoeff {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parts = DyadicParts::deserialize(d)?;
        Ok(Self::from_dyadic_parts(&parts))
    }
}
