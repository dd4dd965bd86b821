//! Exact Gamma values at integer and half-odd-integer arguments.

use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::exact::{factorial, pow_i, twice_as_integer, Rational};
use super::surd::Surd;
use super::{Base, HiPrec};
use crate::error::{Error, Result};

/// Γ(argument) = rational_part · √π^sqrtpi_power.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaValue {
    pub argument: Rational,
    pub rational_part: Rational,
    pub sqrtpi_power: u8,
}

impl GammaValue {
    pub fn as_surd(&self) -> Surd {
        Surd::new(self.rational_part.clone(), self.sqrtpi_power as u32, Rational::one())
    }

    pub fn to_hiprec(&self, bits: usize) -> HiPrec {
        self.as_surd().to_hiprec(bits)
    }
}

pub fn gamma_exact(x: &Rational) -> Result<GammaValue> {
    let m = match twice_as_integer(x) {
        Some(m) if m > 0 => m,
        _ => return Err(Error::Domain(format!("Gamma argument {x} is not a positive integer or half-odd-integer"))),
    };
    let (rational_part, sqrtpi_power) = if m % 2 == 0 {
        (Rational::from_integer(factorial((m / 2 - 1) as u64)), 0)
    } else {
        // Γ(n + 1/2) = (2n)! / (4^n n!) √π
        let n = ((m - 1) / 2) as u64;
        let den = num_traits::pow(BigInt::from(4), n as usize) * factorial(n);
        (Rational::new(factorial(2 * n), den), 1)
    };
    Ok(GammaValue { argument: x.clone(), rational_part, sqrtpi_power })
}

/// Γ(s)Γ(s+1/2) − 2^(1−2s)·√π·Γ(2s), exactly.
pub fn legendre_duplication_exact(s: &Rational) -> Result<Surd> {
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let lhs = gamma_exact(s)?.as_surd().mul(&gamma_exact(&(s + &half))?.as_surd());
    let two_s = twice_as_integer(s).ok_or_else(|| Error::Domain(format!("2s not integer for s={s}")))?;
    let scale = pow_i(&Rational::from_integer(BigInt::from(2)), 1 - two_s);
    let rhs = gamma_exact(&(s * BigInt::from(2)))?.as_surd().mul(&Surd::new(scale, 1, Rational::one()));
    lhs.sub(&rhs)
}

/// Γ(s)Γ(s+1/2) − base^(1−2s)·√π·Γ(2s) in floating precision.
pub fn legendre_duplication_check(s: &Rational, base: Base, bits: usize) -> Result<HiPrec> {
    if !s.is_positive() {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    if base == Base::Two {
        return Ok(legendre_duplication_exact(s)?.to_hiprec(bits));
    }
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let lhs = &gamma_exact(s)?.to_hiprec(bits) * &gamma_exact(&(s + &half))?.to_hiprec(bits);
    let two_s = twice_as_integer(s).ok_or_else(|| Error::Domain(format!("2s not integer for s={s}")))?;
    let b = base.value(bits);
    let factor = if two_s >= 1 { HiPrec::one(bits) / b.powi((two_s - 1) as u32) } else { b.powi((1 - two_s) as u32) };
    let rhs = &(&factor * &HiPrec::pi(bits).sqrt()) * &gamma_exact(&(s * BigInt::from(2)))?.to_hiprec(bits);
    Ok(&lhs - &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::exact::{int, rat};

    #[test]
    fn spec_values() {
        assert_eq!(gamma_exact(&int(1)).unwrap().rational_part, int(1));
        let half = gamma_exact(&rat(1, 2)).unwrap();
        assert_eq!((half.rational_part, half.sqrtpi_power), (int(1), 1));
        let g = gamma_exact(&rat(5, 2)).unwrap();
        assert_eq!((g.rational_part, g.sqrtpi_power), (rat(3, 4), 1));
        assert_eq!(gamma_exact(&int(6)).unwrap().rational_part, int(120));
    }

    #[test]
    fn rejects_bad_arguments() {
        for x in [int(0), int(-2), rat(1, 3), rat(-1, 2)] {
            assert!(gamma_exact(&x).is_err());
        }
    }

    #[test]
    fn recursion_holds_exactly() {
        for m in 1..=100i64 {
            let x = rat(m, 2);
            let g = gamma_exact(&x).unwrap();
            let g1 = gamma_exact(&(&x + int(1))).unwrap();
            assert_eq!(g1.sqrtpi_power, g.sqrtpi_power);
            assert_eq!(g1.rational_part, &x * &g.rational_part);
        }
    }

    #[test]
    fn duplication_formula_base_two_vanishes() {
        for m in 1..=40i64 {
            assert!(legendre_duplication_exact(&rat(m, 2)).unwrap().is_zero(), "s={m}/2");
        }
    }

    #[test]
    fn duplication_formula_base_e_does_not() {
        let r = legendre_duplication_check(&int(1), Base::E, 256).unwrap().to_f64();
        // √π/2 − √π/e
        let expected = std::f64::consts::PI.sqrt() * (0.5 - (-1f64).exp());
        assert!((r - expected).abs() < 1e-14);
        assert!((r - 0.2342).abs() < 1e-3);
        for m in 1..=40i64 {
            let r = legendre_duplication_check(&rat(m, 2), Base::E, 256).unwrap();
            if m == 1 {
                // s = 1/2 makes the base factor base^0 = 1
                assert!(r.is_zero() || r.abs().to_f64() < 1e-70);
            } else {
                assert!(r.abs().to_f64() > 0.0, "s={m}/2");
            }
        }
    }
}
