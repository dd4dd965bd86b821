//! Model parameterization and unit bookkeeping.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::exact::{rat, to_f64, twice_as_integer, Rational};

/// Serde adapter writing rationals as `"num/den"` strings.
pub mod serde_rational {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::numerics::exact::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(x: &Rational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(de)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

/// Parameters of the rational q-w model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    s: Rational,
    q: Rational,
    p: u32,
    w: Rational,
    n_bodies: u32,
    r: Rational,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    #[serde(with = "serde_rational")]
    s: Rational,
    #[serde(with = "serde_rational")]
    w: Rational,
    #[serde(rename = "N")]
    n_bodies: u32,
    #[serde(with = "serde_rational")]
    r: Rational,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        make_params(&raw.s, &raw.w, raw.n_bodies, &raw.r)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { s: p.s, w: p.w, n_bodies: p.n_bodies, r: p.r }
    }
}

pub fn make_params(s: &Rational, w: &Rational, n_bodies: u32, r: &Rational) -> Result<ModelParams> {
    let two_s = twice_as_integer(s);
    match two_s {
        Some(m) if m >= 3 && m % 2 == 1 => {}
        _ => return Err(Error::Validation(format!("s must be a half-odd-integer >= 3/2, got {s}"))),
    }
    if !w.is_positive() {
        return Err(Error::Validation(format!("w must be positive, got {w}")));
    }
    if n_bodies == 0 {
        return Err(Error::Validation("N must be at least 1".into()));
    }
    if !r.is_positive() || *r >= Rational::one() {
        return Err(Error::Validation(format!("r must satisfy 0 < r < 1, got {r}")));
    }
    let half = rat(1, 2);
    let p_rat = s - &half;
    let p = p_rat.to_integer().to_u32().ok_or_else(|| Error::Validation(format!("s too large: {s}")))?;
    let q = s * (s - Rational::one());
    Ok(ModelParams { s: s.clone(), q, p, w: w.clone(), n_bodies, r: r.clone() })
}

impl ModelParams {
    /// s = 3/2, w = 1, N = 1, r = 1/100000.
    pub fn reference() -> Self {
        make_params(&rat(3, 2), &rat(1, 1), 1, &rat(1, 100_000)).expect("reference parameters are valid")
    }

    pub fn s(&self) -> &Rational {
        &self.s
    }
    pub fn q(&self) -> &Rational {
        &self.q
    }
    /// p = t = s − 1/2.
    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn t(&self) -> u32 {
        self.p
    }
    pub fn w(&self) -> &Rational {
        &self.w
    }
    pub fn n_bodies(&self) -> u32 {
        self.n_bodies
    }
    pub fn r(&self) -> &Rational {
        &self.r
    }

    pub fn with_n_bodies(&self, n: u32) -> Result<Self> {
        make_params(&self.s, &self.w, n, &self.r)
    }

    pub fn with_w(&self, w: &Rational) -> Result<Self> {
        make_params(&self.s, w, self.n_bodies, &self.r)
    }

    pub fn with_r(&self, r: &Rational) -> Result<Self> {
        make_params(&self.s, &self.w, self.n_bodies, r)
    }

    pub fn revalidate(&self) -> Result<Self> {
        make_params(&self.s, &self.w, self.n_bodies, &self.r)
    }

    /// 1 + 2s as an integer.
    pub fn one_plus_two_s(&self) -> i64 {
        2 * self.p as i64 + 2
    }

    pub fn w_f64(&self) -> f64 {
        to_f64(&self.w)
    }

    pub fn s_f64(&self) -> f64 {
        to_f64(&self.s)
    }

    pub fn r_f64(&self) -> f64 {
        to_f64(&self.r)
    }

    /// Y = r / (1 + 2rN).
    pub fn y_factor(&self) -> Rational {
        let two_rn = &self.r * BigInt::from(2 * self.n_bodies);
        &self.r / (Rational::one() + two_rn)
    }
}

/// Physical constants in SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub m_light: f64,
    pub boltzmann_k: f64,
    pub temperature_tau: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.054571817e-34, m_light: 3e-26, boltzmann_k: 1.380649e-23, temperature_tau: 293.0 }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("m_light", self.m_light),
            ("boltzmann_k", self.boltzmann_k),
            ("temperature_tau", self.temperature_tau),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn hbar_over_m(&self) -> f64 {
        self.hbar / self.m_light
    }
}

/// Energy (J) of a modified-units eigenvalue (m⁻²).
pub fn physical_energy(lambda_mod: f64, consts: &PhysicalConstants) -> f64 {
    consts.hbar * consts.hbar / (2.0 * consts.m_light) * lambda_mod
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::exact::int;

    #[test]
    fn derived_quantities() {
        let p = make_params(&rat(3, 2), &int(1), 1, &rat(1, 1000)).unwrap();
        assert_eq!((p.q().clone(), p.p()), (rat(3, 4), 1));
        let p = make_params(&rat(5, 2), &int(1), 1, &rat(1, 1000)).unwrap();
        assert_eq!((p.q().clone(), p.p()), (rat(15, 4), 2));
    }

    #[test]
    fn q_agrees_both_ways() {
        for m in (3..80).step_by(2) {
            let p = make_params(&rat(m, 2), &int(1), 1, &rat(1, 10)).unwrap();
            let pp = Rational::from_integer(p.p().into());
            assert_eq!(p.q().clone(), &pp * &pp - rat(1, 4));
            assert_eq!(p.revalidate().unwrap(), p);
        }
    }

    #[test]
    fn rejects_invalid() {
        let r = rat(1, 100);
        assert!(make_params(&int(1), &int(1), 1, &r).is_err());
        assert!(make_params(&rat(1, 2), &int(1), 1, &r).is_err());
        assert!(make_params(&rat(3, 2), &int(0), 1, &r).is_err());
        assert!(make_params(&rat(3, 2), &int(1), 0, &r).is_err());
        assert!(make_params(&rat(3, 2), &int(1), 1, &int(1)).is_err());
        assert!(make_params(&rat(3, 2), &int(1), 1, &int(0)).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = make_params(&rat(7, 2), &rat(3, 5), 4, &rat(1, 100000)).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"s":"7/2","w":"3/5","N":4,"r":"1/100000"}"#);
        let back: ModelParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<ModelParams>(r#"{"s":"1","w":"1","N":1,"r":"1/2"}"#).is_err());
    }

    #[test]
    fn energy_scale() {
        let c = PhysicalConstants { hbar: 1e-34, ..Default::default() };
        assert_eq!(physical_energy(0.0, &c), 0.0);
        let e = physical_energy(1.0, &c);
        assert!((e - 1.6667e-43).abs() < 1e-46);
        assert!((physical_energy(2.0, &c) - 2.0 * e).abs() < 1e-58);
    }
}
