//! Complex numbers over [`HiPrec`] pairs.

use std::ops::{Add, Mul, Sub};

use super::HiPrec;

#[derive(Clone, Debug)]
pub struct CHiPrec {
    pub re: HiPrec,
    pub im: HiPrec,
}

impl CHiPrec {
    pub fn new(re: HiPrec, im: HiPrec) -> Self {
        CHiPrec { re, im }
    }

    pub fn real(re: HiPrec) -> Self {
        let bits = re.precision();
        CHiPrec { re, im: HiPrec::zero(bits) }
    }

    pub fn one(bits: usize) -> Self {
        Self::real(HiPrec::one(bits))
    }

    /// `e^{iθ}`.
    pub fn cis(theta: &HiPrec) -> Self {
        CHiPrec { re: theta.cos(), im: theta.sin() }
    }

    pub fn conj(&self) -> Self {
        CHiPrec { re: self.re.clone(), im: -&self.im }
    }

    pub fn scale(&self, k: &HiPrec) -> Self {
        CHiPrec { re: &self.re * k, im: &self.im * k }
    }

    pub fn norm_sqr(&self) -> HiPrec {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }

    pub fn abs(&self) -> HiPrec {
        self.norm_sqr().sqrt()
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut result = CHiPrec::one(self.re.precision());
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
}

impl<'a> Add<&'a CHiPrec> for &'a CHiPrec {
    type Output = CHiPrec;
    fn add(self, rhs: &'a CHiPrec) -> CHiPrec {
        CHiPrec { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl<'a> Sub<&'a CHiPrec> for &'a CHiPrec {
    type Output = CHiPrec;
    fn sub(self, rhs: &'a CHiPrec) -> CHiPrec {
        CHiPrec { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl<'a> Mul<&'a CHiPrec> for &'a CHiPrec {
    type Output = CHiPrec;
    fn mul(self, rhs: &'a CHiPrec) -> CHiPrec {
        CHiPrec { re: &(&self.re * &rhs.re) - &(&self.im * &rhs.im), im: &(&self.re * &rhs.im) + &(&self.im * &rhs.re) }
    }
}
