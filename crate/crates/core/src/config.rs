//! JSON run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_params, ModelParams, PhysicalConstants};
use crate::numerics::exact::{parse_rational, Rational};
use crate::numerics::hiprec::{check_precision, DEFAULT_PRECISION_BITS};

/// A rational given either as a string (`"3/2"`, `"0.5"`) or a JSON number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalInput {
    Text(String),
    Integer(i64),
    Float(f64),
}

impl RationalInput {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            RationalInput::Text(s) => parse_rational(s),
            RationalInput::Integer(i) => Ok(Rational::from_integer((*i).into())),
            RationalInput::Float(f) => {
                if !f.is_finite() {
                    return Err(Error::Parse(format!("non-finite number {f}")));
                }
                parse_rational(&format!("{f:e}"))
            }
        }
    }
}

/// Contents of a JSON config file; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub s: Option<RationalInput>,
    pub w: Option<RationalInput>,
    #[serde(rename = "N")]
    pub n_bodies: Option<u32>,
    pub r: Option<RationalInput>,
    pub beta: Option<RationalInput>,
    pub precision_bits: Option<usize>,
    pub seed: Option<u64>,
    pub hbar: Option<f64>,
    pub m_light: Option<f64>,
    pub boltzmann_k: Option<f64>,
    pub temperature_tau: Option<f64>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
}

/// Fully resolved settings shared by every command.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub params: ModelParams,
    pub consts: PhysicalConstants,
    pub beta: Rational,
    pub precision_bits: usize,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            params: ModelParams::reference(),
            consts: PhysicalConstants::default(),
            beta: Rational::from_integer(1.into()),
            precision_bits: DEFAULT_PRECISION_BITS,
            seed: 12345,
        }
    }
}

impl Settings {
    /// Applies every field present in `layer` on top of `self`.
    pub fn overlay(&self, layer: &ConfigFile) -> Result<Settings> {
        let s = match &layer.s {
            Some(v) => v.to_rational()?,
            None => self.params.s().clone(),
        };
        let w = match &layer.w {
            Some(v) => v.to_rational()?,
            None => self.params.w().clone(),
        };
        let r = match &layer.r {
            Some(v) => v.to_rational()?,
            None => self.params.r().clone(),
        };
        let n = layer.n_bodies.unwrap_or(self.params.n_bodies());
        let params = make_params(&s, &w, n, &r)?;
        let beta = match &layer.beta {
            Some(v) => v.to_rational()?,
            None => self.beta.clone(),
        };
        if beta < Rational::from_integer(0.into()) {
            return Err(Error::Validation(format!("beta must be nonnegative, got {beta}")));
        }
        let precision_bits = check_precision(layer.precision_bits.unwrap_or(self.precision_bits))?;
        let consts = PhysicalConstants {
            hbar: layer.hbar.unwrap_or(self.consts.hbar),
            m_light: layer.m_light.unwrap_or(self.consts.m_light),
            boltzmann_k: layer.boltzmann_k.unwrap_or(self.consts.boltzmann_k),
            temperature_tau: layer.temperature_tau.unwrap_or(self.consts.temperature_tau),
        };
        consts.validate()?;
        Ok(Settings { params, consts, beta, precision_bits, seed: layer.seed.unwrap_or(self.seed) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::exact::rat;

    #[test]
    fn parses_reference_schema() {
        let cfg =
            parse_config(r#"{"s":"3/2","w":"1","N":4,"r":"1/100000","beta":"1","precision_bits":256,"seed":12345}"#)
                .unwrap();
        let st = Settings::default().overlay(&cfg).unwrap();
        assert_eq!(st.params.n_bodies(), 4);
        assert_eq!(st.params.r().clone(), rat(1, 100000));
        assert_eq!(st.seed, 12345);
    }

    #[test]
    fn numbers_and_defaults() {
        let cfg = parse_config(r#"{"w": 2, "r": 0.001}"#).unwrap();
        let st = Settings::default().overlay(&cfg).unwrap();
        assert_eq!(st.params.w().clone(), rat(2, 1));
        assert_eq!(st.params.r().clone(), rat(1, 1000));
        assert_eq!(st.params.s().clone(), rat(3, 2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_config(r#"{"bogus": 1}"#).is_err());
        assert!(parse_config("not json").is_err());
        let cfg = parse_config(r#"{"s":"1"}"#).unwrap();
        assert!(Settings::default().overlay(&cfg).is_err());
        let cfg = parse_config(r#"{"precision_bits":32}"#).unwrap();
        assert!(Settings::default().overlay(&cfg).is_err());
        let cfg = parse_config(r#"{"beta":"-1"}"#).unwrap();
        assert!(Settings::default().overlay(&cfg).is_err());
    }
}
