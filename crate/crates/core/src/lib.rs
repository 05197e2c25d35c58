#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod copulas;
pub mod distributions;
pub mod error;
pub mod garch;
pub mod ingestion;
pub mod numeric;
pub mod optimizer;
pub mod rng;
mod serde_nan;
pub mod simulation;
pub mod stats;
pub mod vine;

pub use error::{Error, Result};
