//! Structural Verilog subset: `module`, `input`/`output`/`wire` with optional
//! ranges, named instance connections, `assign` aliases and constants,
//! `(* init = 0|1 *)` attributes and comments.

mod lexer;
mod parser;
mod trace;
mod writer;

pub use parser::{parse, parse_file, parse_with_library};
pub use trace::{read_trace_csv, write_trace_csv};
pub use writer::write;
