//! Satellite decoy-state BB84 downlink: source characterisation, channel
//! loss, detection, Monte Carlo and analytic key rates, parameter search.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod io;
pub mod math;
pub mod optimizer;
pub mod protocol;
pub mod receiver;
pub mod source;

pub use error::{Error, ErrorCategory, Result};
