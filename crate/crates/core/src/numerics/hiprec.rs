//! Floating scalars with a configurable mantissa width, backed by `astro-float`.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as BigSign};
use num_rational::BigRational;

use crate::error::{Error, Result};

/// Default mantissa width in bits.
pub const DEFAULT_PRECISION_BITS: usize = 256;
/// Smallest mantissa width accepted by [`HiPrec`].
pub const MIN_PRECISION_BITS: usize = 64;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Checks a requested precision against [`MIN_PRECISION_BITS`].
pub fn check_precision(bits: usize) -> Result<usize> {
    if bits < MIN_PRECISION_BITS {
        return Err(Error::Validation(format!("precision_bits must be at least {MIN_PRECISION_BITS}, got {bits}")));
    }
    Ok(bits)
}

/// A floating scalar carrying its own working precision.
///
/// Binary operations run at the larger of the two operand precisions, so a
/// computation seeded at `p` bits stays at `p` bits.
#[derive(Clone, Debug)]
pub struct HiPrec {
    value: BigFloat,
    bits: usize,
}

impl HiPrec {
    fn wrap(value: BigFloat, bits: usize) -> Self {
        HiPrec { value, bits }
    }

    pub fn zero(bits: usize) -> Self {
        Self::wrap(BigFloat::from_word(0, bits), bits)
    }

    pub fn one(bits: usize) -> Self {
        Self::wrap(BigFloat::from_word(1, bits), bits)
    }

    pub fn from_f64(x: f64, bits: usize) -> Self {
        Self::wrap(BigFloat::from_f64(x, bits), bits)
    }

    pub fn from_i64(x: i64, bits: usize) -> Self {
        Self::wrap(BigFloat::from_i64(x, bits), bits)
    }

    pub fn from_bigint(x: &BigInt, bits: usize) -> Self {
        let (sign, digits) = x.to_u64_digits();
        let work = bits + 64;
        let base = BigFloat::from_f64(18446744073709551616.0, work);
        let mut acc = BigFloat::from_word(0, work);
        for d in digits.iter().rev() {
            acc = acc.mul(&base, work, RM).add(&BigFloat::from_u64(*d, work), work, RM);
        }
        if sign == BigSign::Minus {
            acc.inv_sign();
        }
        let mut out = Self::wrap(acc, work);
        out.set_precision(bits);
        out
    }

    pub fn from_rational(x: &BigRational, bits: usize) -> Self {
        let num = Self::from_bigint(x.numer(), bits + 64);
        let den = Self::from_bigint(x.denom(), bits + 64);
        let mut out = &num / &den;
        out.set_precision(bits);
        out
    }

    pub fn pi(bits: usize) -> Self {
        Self::wrap(with_consts(|cc| cc.pi(bits, RM)), bits)
    }

    /// Euler's number.
    pub fn e(bits: usize) -> Self {
        Self::wrap(with_consts(|cc| cc.e(bits, RM)), bits)
    }

    pub fn precision(&self) -> usize {
        self.bits
    }

    pub fn set_precision(&mut self, bits: usize) {
        // Rounding to a narrower mantissa cannot fail for finite values.
        let _ = self.value.set_precision(bits, RM);
        self.bits = bits;
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !(self.value.is_nan() || self.value.is_inf())
    }

    pub fn is_negative(&self) -> bool {
        self.value.is_negative()
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.value.abs(), self.bits)
    }

    pub fn sqrt(&self) -> Self {
        Self::wrap(self.value.sqrt(self.bits, RM), self.bits)
    }

    pub fn exp(&self) -> Self {
        let v = with_consts(|cc| self.value.exp(self.bits, RM, cc));
        Self::wrap(v, self.bits)
    }

    pub fn ln(&self) -> Self {
        let v = with_consts(|cc| self.value.ln(self.bits, RM, cc));
        Self::wrap(v, self.bits)
    }

    pub fn sin(&self) -> Self {
        let v = with_consts(|cc| self.value.sin(self.bits, RM, cc));
        Self::wrap(v, self.bits)
    }

    pub fn cos(&self) -> Self {
        let v = with_consts(|cc| self.value.cos(self.bits, RM, cc));
        Self::wrap(v, self.bits)
    }

    /// `self^n` by binary powering.
    pub fn powi(&self, n: u32) -> Self {
        let mut result = Self::one(self.bits);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// `self^y` for positive `self`.
    pub fn powf(&self, y: &HiPrec) -> Self {
        let bits = self.bits.max(y.bits);
        let v = with_consts(|cc| self.value.pow(&y.value, bits, RM, cc));
        Self::wrap(v, bits)
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        self * &HiPrec::from_i64(k, self.bits)
    }

    pub fn div_i64(&self, k: i64) -> Self {
        self / &HiPrec::from_i64(k, self.bits)
    }

    pub fn to_f64(&self) -> f64 {
        if self.value.is_nan() {
            return f64::NAN;
        }
        if self.value.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.value.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        if self.value.is_zero() {
            return 0.0;
        }
        let Some((words, _, sign, exponent, _)) = self.value.as_raw_parts() else {
            return f64::NAN;
        };
        // Normalized mantissa: most significant word last, value = 0.m * 2^e.
        let top = words.len();
        let hi = words[top - 1] as f64;
        let lo = if top >= 2 { words[top - 2] as f64 } else { 0.0 };
        let frac = hi / 18446744073709551616.0 + lo / 18446744073709551616.0 / 18446744073709551616.0;
        let mag = frac * 2f64.powi(exponent);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    /// Decimal rendering with the full working precision.
    pub fn to_decimal_string(&self) -> String {
        with_consts(|cc| self.value.format(Radix::Dec, RM, cc)).unwrap_or_else(|_| "NaN".into())
    }
}

impl fmt::Display for HiPrec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialEq for HiPrec {
    fn eq(&self, other: &Self) -> bool {
        self.value.cmp(&other.value) == Some(0)
    }
}

impl PartialOrd for HiPrec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.cmp(&other.value).map(|c| c.cmp(&0))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl<'a> $trait<&'a HiPrec> for &'a HiPrec {
            type Output = HiPrec;
            fn $method(self, rhs: &'a HiPrec) -> HiPrec {
                let bits = self.bits.max(rhs.bits);
                HiPrec::wrap(self.value.$method(&rhs.value, bits, RM), bits)
            }
        }
        impl $trait<HiPrec> for HiPrec {
            type Output = HiPrec;
            fn $method(self, rhs: HiPrec) -> HiPrec {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a HiPrec> for HiPrec {
            type Output = HiPrec;
            fn $method(self, rhs: &'a HiPrec) -> HiPrec {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for &HiPrec {
    type Output = HiPrec;
    fn neg(self) -> HiPrec {
        HiPrec::wrap(self.value.clone().neg(), self.bits)
    }
}

impl Neg for HiPrec {
    type Output = HiPrec;
    fn neg(self) -> HiPrec {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip() {
        for x in [1.0, -2.5, std::f64::consts::PI, 1e-30, 6.02e23, -7.0e-300] {
            assert_eq!(HiPrec::from_f64(x, 128).to_f64(), x);
        }
    }

    #[test]
    fn rational_conversion() {
        let third = BigRational::new(1.into(), 3.into());
        let x = HiPrec::from_rational(&third, 256);
        let back = &x * &HiPrec::from_i64(3, 256);
        assert!((&back - &HiPrec::one(256)).abs().to_f64() < 1e-70);
        let big = BigRational::new(BigInt::from(10).pow(40) + 7, BigInt::from(10).pow(40));
        assert!((HiPrec::from_rational(&big, 256).to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transcendental_values() {
        let bits = 256;
        assert!((HiPrec::pi(bits).to_f64() - std::f64::consts::PI).abs() < 1e-15);
        let one = HiPrec::one(bits);
        assert!((one.exp().to_f64() - std::f64::consts::E).abs() < 1e-15);
        let x = HiPrec::from_f64(0.7, bits);
        let s = x.sin();
        let c = x.cos();
        let unit = &(&s * &s) + &(&c * &c);
        assert!((&unit - &one).abs().to_f64() < 1e-70);
        assert!((HiPrec::from_i64(2, bits).sqrt().powi(2) - HiPrec::from_i64(2, bits)).abs().to_f64() < 1e-70);
    }

    #[test]
    fn precision_floor_enforced() {
        assert!(check_precision(63).is_err());
        assert_eq!(check_precision(64).unwrap(), 64);
    }
}
