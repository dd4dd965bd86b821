//! Scalar and quadrature substrate.

pub mod complex;
pub mod exact;
pub mod gamma;
pub mod hiprec;
pub mod quadrature;
pub mod surd;

pub use complex::CHiPrec;
pub use exact::{binomial, factorial, format_rational, parse_rational, rat, Rational};
pub use gamma::{gamma_exact, legendre_duplication_check, legendre_duplication_exact, GammaValue};
pub use hiprec::{HiPrec, DEFAULT_PRECISION_BITS};
pub use quadrature::{circle_mean, circle_mean_complex, gauss_legendre, halfline_weighted_quadrature, HalflineOptions};
pub use surd::Surd;

/// Base of the exponential factors in the duplication formula and the series machinery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Two,
    E,
}

impl Base {
    pub fn as_str(self) -> &'static str {
        match self {
            Base::Two => "two",
            Base::E => "e",
        }
    }

    pub fn value(self, bits: usize) -> HiPrec {
        match self {
            Base::Two => HiPrec::from_i64(2, bits),
            Base::E => HiPrec::e(bits),
        }
    }
}

impl std::str::FromStr for Base {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.trim() {
            "2" | "two" => Ok(Base::Two),
            "e" => Ok(Base::E),
            other => Err(crate::error::Error::Parse(format!("unknown base {other:?}; expected 2 or e"))),
        }
    }
}
