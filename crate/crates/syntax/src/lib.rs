//! Lossless, span-annotated Python 3 source trees.
//!
//! Parsing keeps every byte of the input (comments, blank lines, odd
//! spacing) so `print(parse(text)) == text` holds exactly. Trees are
//! immutable: rewrites are expressed as [`Edit`]s over spans and produce a
//! fresh tree by re-parsing, which doubles as a validity check.

pub mod ast;
pub mod cut;
pub mod error;
pub mod lexer;
mod parser;
pub mod span;
pub mod tree;

pub use cut::{body_lines, cut_prefix, fraction_boundary, module_body_lines, module_fraction_boundary};
pub use error::{CutError, EditError, SyntaxError};
pub use lexer::{is_keyword, tokenize, Token, TokenKind, KEYWORDS};
pub use span::{LineIndex, Position, Span};
pub use tree::{
    apply_edits_to_text, body_without_docstring, is_docstring, parse, print, Edit, PathStep, SourceProgram,
    StmtRef, SyntaxTree,
};
