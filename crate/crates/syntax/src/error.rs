use thiserror::Error;

/// Parse failure with the 1-based line and 0-based column where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CutError {
    #[error("cut point {line}:{col} is not at the start of a line")]
    InvalidCutPoint { line: u32, col: u32 },
    #[error("cut point byte {0} lies outside the source")]
    OutOfRange(usize),
    #[error("function body spans {0} line(s); at least 2 are required")]
    DegenerateBody(usize),
    #[error("fraction {0} is not in (0, 1)")]
    BadFraction(f64),
    #[error("statement reference does not resolve in this tree")]
    BadStmtRef,
    #[error("statement is not a function definition")]
    NotAFunction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("edits overlap at byte {0}")]
    Overlap(usize),
    #[error("edit ends at byte {0}, past the end of the source")]
    OutOfRange(usize),
    #[error("edited text does not parse: {0}")]
    Syntax(SyntaxError),
}
