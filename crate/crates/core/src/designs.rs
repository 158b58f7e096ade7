//! Bundled benchmark netlists.

/// Hierarchical multi-module pipeline.
pub const PIPELINE: &str = include_str!("../data/pipeline.gv");

/// Flat correlator bank.
pub const CORRELATOR: &str = include_str!("../data/correlator.gv");
