use std::fmt;
use std::path::PathBuf;

/// Location of a token in a netlist source file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub file: Option<PathBuf>,
    pub line: usize,
    pub column: usize,
}

impl SourceSpan {
    pub fn new(line: usize, column: usize) -> Self {
        Self {
            file: None,
            line: line.max(1),
            column: column.max(1),
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(p) => write!(f, "{}:{}:{}", p.display(), self.line, self.column),
            None => write!(f, "{}:{}", self.line, self.column),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax { expected: Vec<String> },
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if let ParseErrorKind::Syntax { expected } = &self.kind {
            if !expected.is_empty() {
                write!(f, " (expected {})", expected.join(" or "))?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("library: {0}")]
    Library(String),
    #[error("banning {cell} would leave the library functionally incomplete: {reason}")]
    Incomplete { cell: String, reason: String },
    #[error("invalid netlist: {0}")]
    Invalid(String),
    #[error("combinational cycle through nets {}", .0.join(", "))]
    CombinationalCycle(Vec<String>),
    #[error("recursive hierarchy: {}", .0.join(" -> "))]
    RecursiveHierarchy(Vec<String>),
    #[error("port interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("{pass}: {message}")]
    Pass { pass: &'static str, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
