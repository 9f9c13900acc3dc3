// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod audit;
pub mod calibration;
pub mod error;
pub mod mechanisms;
pub mod nonadaptive;
pub mod numerics;
mod par;
pub mod setwise;

pub use error::{Error, Result};
