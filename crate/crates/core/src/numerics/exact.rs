//! Exact rational helpers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"a"`, `"a/b"` or a plain decimal such as `"-1.25e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let num = parse_int(n)?;
        let den = parse_int(d)?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    parse_decimal(s)
}

fn parse_int(s: &str) -> Result<BigInt> {
    let t = s.trim();
    let digits = t.strip_prefix(['+', '-']).unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse(format!("invalid integer {s:?}")));
    }
    t.parse::<BigInt>().map_err(|e| Error::Parse(format!("invalid integer {s:?}: {e}")))
}

fn parse_decimal(s: &str) -> Result<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..].parse().map_err(|_| Error::Parse(format!("invalid exponent in {s:?}")))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    if exp.unsigned_abs() > 4000 {
        return Err(Error::Parse(format!("exponent out of range in {s:?}")));
    }
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(Error::Parse(format!("invalid number {s:?}")));
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse(format!("invalid number {s:?}")));
    }
    let digits = format!("{whole}{frac}");
    let mut num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| Error::Parse(format!("invalid number {s:?}")))?
    };
    if neg {
        num = -num;
    }
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}

/// `"num/den"`, or just `"num"` for integers.
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn factorial(n: u64) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Factorials `0!..=n!`.
pub fn factorial_table(n: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(BigInt::one());
    for k in 1..=n {
        let next = &out[k - 1] * k;
        out.push(next);
    }
    out
}

/// Row `n` of Pascal's triangle.
pub fn binomial_row(n: u64) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * (n - k) / (k + 1);
        row.push(c.clone());
    }
    row
}

/// Exact sum that brings everything over the least common denominator once,
/// instead of reducing after every addition.
pub fn sum_rationals<'a, I>(terms: I) -> Rational
where
    I: IntoIterator<Item = &'a Rational>,
{
    let terms: Vec<&Rational> = terms.into_iter().collect();
    if terms.is_empty() {
        return Rational::zero();
    }
    let lcm = terms.iter().fold(BigInt::one(), |acc, t| acc.lcm(t.denom()));
    let num = terms.iter().fold(BigInt::zero(), |acc, t| acc + t.numer() * (&lcm / t.denom()));
    Rational::new(num, lcm)
}

/// `x^k` for any integer `k` (x nonzero when k < 0).
pub fn pow_i(x: &Rational, k: i64) -> Rational {
    let base = if k < 0 { x.recip() } else { x.clone() };
    num_traits::pow(base, k.unsigned_abs() as usize)
}

/// Twice a rational that is known to be an integer or half-integer, as an integer.
pub fn twice_as_integer(x: &Rational) -> Option<i64> {
    let two_x = x * BigInt::from(2);
    if two_x.is_integer() {
        two_x.to_integer().to_i64()
    } else {
        None
    }
}

pub fn is_positive(x: &Rational) -> bool {
    x.is_positive()
}
