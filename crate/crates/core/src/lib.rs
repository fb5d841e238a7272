// `!(a > b)` is used on purpose where NaN must fail a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod numlin;
pub mod scenario;
pub mod acceptance;
pub mod app;
pub mod certificate;
pub mod history;
pub mod sim;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};

/// Float formatting with 17 significant digits, used by every report and CSV.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
