//! Gate-level netlist diversification: parse, transform, simulate and compare
//! structurally distinct but functionally equivalent netlists.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod designs;
pub mod engine;
pub mod error;
pub mod exec;
pub mod library;
pub mod netlist;
pub mod re;
pub mod sim;
pub mod transforms;
pub mod verilog;

pub use error::{Error, Result};
