// `!(x > 0.0)` guards deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod detector;
pub mod error;
pub mod harness;
pub mod modem;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};
