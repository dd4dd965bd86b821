//! Exactly solved heavy/light-particle model: spectrum, matrix elements, series,
//! many-body sums, perturbation theory and trajectory analysis.

// `!(x > 0.0)` is used deliberately so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod io;
pub mod manybody;
pub mod matelem;
pub mod model;
pub mod numerics;
pub mod oscseries;
pub mod perturbation;
pub mod rng;
pub mod spectrum;
pub mod validate;

pub use error::{Error, Result};
pub use model::{make_params, ModelParams, PhysicalConstants};
