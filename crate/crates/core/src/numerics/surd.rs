//! Exact values of the form `coeff · π^(pi_half/2) · √root`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::exact::{format_rational, Rational};
use super::HiPrec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Surd {
    pub coeff: Rational,
    pub pi_half: u32,
    /// Positive rational under the square root; kept free of perfect squares.
    pub root: Rational,
}

fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

impl Surd {
    pub fn rational(coeff: Rational) -> Self {
        Surd { coeff, pi_half: 0, root: Rational::one() }
    }

    pub fn new(coeff: Rational, pi_half: u32, root: Rational) -> Self {
        Surd { coeff, pi_half, root }.normalized()
    }

    pub fn zero() -> Self {
        Self::rational(Rational::zero())
    }

    fn normalized(mut self) -> Self {
        if self.coeff.is_zero() {
            return Surd::zero();
        }
        if let (Some(a), Some(b)) = (exact_sqrt(self.root.numer()), exact_sqrt(self.root.denom())) {
            self.coeff *= Rational::new(a, b);
            self.root = Rational::one();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    pub fn same_kind(&self, other: &Surd) -> bool {
        self.pi_half == other.pi_half && self.root == other.root
    }

    pub fn mul(&self, other: &Surd) -> Surd {
        Surd {
            coeff: &self.coeff * &other.coeff,
            pi_half: self.pi_half + other.pi_half,
            root: &self.root * &other.root,
        }
        .normalized()
    }

    pub fn scale(&self, k: &Rational) -> Surd {
        Surd { coeff: &self.coeff * k, ..self.clone() }.normalized()
    }

    /// Exact sum; both terms must have the same irrational part unless one is zero.
    pub fn add(&self, other: &Surd) -> Result<Surd> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if !self.same_kind(other) {
            return Err(Error::Domain(format!("cannot add {} and {} exactly", self.describe(), other.describe())));
        }
        Ok(Surd { coeff: &self.coeff + &other.coeff, ..self.clone() }.normalized())
    }

    pub fn neg(&self) -> Surd {
        Surd { coeff: -&self.coeff, ..self.clone() }
    }

    pub fn sub(&self, other: &Surd) -> Result<Surd> {
        self.add(&other.neg())
    }

    /// Square, which is always rational times an integer power of π.
    pub fn square(&self) -> Surd {
        self.mul(self)
    }

    pub fn to_hiprec(&self, bits: usize) -> HiPrec {
        let mut v = HiPrec::from_rational(&self.coeff, bits);
        if self.pi_half > 0 {
            v = &v * &HiPrec::pi(bits).sqrt().powi(self.pi_half);
        }
        if !self.root.is_one() {
            v = &v * &HiPrec::from_rational(&self.root, bits).sqrt();
        }
        v
    }

    pub fn to_f64(&self) -> f64 {
        let c = self.coeff.to_f64().unwrap_or(f64::NAN);
        let r = self.root.to_f64().unwrap_or(f64::NAN).sqrt();
        if c.is_finite() && r.is_finite() && c != 0.0 {
            c * r * std::f64::consts::PI.sqrt().powi(self.pi_half as i32)
        } else {
            self.to_hiprec(128).to_f64()
        }
    }

    /// Text form such as `3/16*sqrt(pi)` or `1/2*pi*sqrt(2)`.
    pub fn describe(&self) -> String {
        let mut out = format_rational(&self.coeff);
        if self.pi_half / 2 > 0 {
            out.push_str("*pi");
            if self.pi_half / 2 > 1 {
                out.push_str(&format!("^{}", self.pi_half / 2));
            }
        }
        if self.pi_half % 2 == 1 {
            out.push_str("*sqrt(pi)");
        }
        if !self.root.is_one() {
            out.push_str(&format!("*sqrt({})", format_rational(&self.root)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::exact::{int, rat};

    #[test]
    fn folds_perfect_squares() {
        let a = Surd::new(int(1), 0, rat(1, 2));
        let sq = a.mul(&a);
        assert_eq!(sq, Surd::rational(rat(1, 2)));
        assert_eq!(Surd::new(int(3), 0, rat(4, 9)), Surd::rational(int(2)));
    }

    #[test]
    fn arithmetic_and_text() {
        let a = Surd::new(rat(3, 16), 1, int(1));
        assert_eq!(a.describe(), "3/16*sqrt(pi)");
        assert!((a.to_f64() - 0.332_335_1).abs() < 1e-7);
        let b = a.add(&a).unwrap();
        assert_eq!(b.coeff, rat(3, 8));
        assert!(a.add(&Surd::rational(int(1))).is_err());
        assert_eq!(a.square().describe(), "9/256*pi");
        assert!((a.to_hiprec(128).to_f64() - a.to_f64()).abs() < 1e-15);
    }
}
