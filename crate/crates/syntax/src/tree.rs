//! Immutable syntax trees and text edits over them.

use serde::{Deserialize, Serialize};

use crate::ast::{Block, ExprKind, FunctionDef, Module, Stmt, StmtKind};
use crate::error::{EditError, SyntaxError};
use crate::lexer::{tokenize, untokenize, Token};
use crate::parser::Parser;
use crate::span::{LineIndex, Span};

/// A program together with where it came from (dataset id, file path, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProgram {
    pub text: String,
    pub origin: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceProgram {
            text: text.into(),
            origin: origin.into(),
        }
    }
}

/// One step from a statement into one of its blocks. The module body is
/// block 0 of the (virtual) root; for an `if`, block 0 is the then-body,
/// then each `elif` body, then the `else` body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathStep {
    pub block: usize,
    pub index: usize,
}

/// Address of a statement inside a tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StmtRef {
    pub path: Vec<PathStep>,
    pub span: Span,
}

impl StmtRef {
    /// Whether `self` is a strict ancestor of `other`.
    pub fn is_ancestor_of(&self, other: &StmtRef) -> bool {
        other.path.len() > self.path.len() && other.path.starts_with(&self.path)
    }

    /// Whether the two statements live in the same block.
    pub fn is_sibling_of(&self, other: &StmtRef) -> bool {
        let n = self.path.len();
        n == other.path.len()
            && self.path[..n - 1] == other.path[..n - 1]
            && self.path[n - 1].block == other.path[n - 1].block
    }
}

/// Replace the bytes covered by `span` with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub span: Span,
    pub replacement: String,
}

impl Edit {
    pub fn new(span: Span, replacement: impl Into<String>) -> Self {
        Edit {
            span,
            replacement: replacement.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntaxTree {
    source: String,
    tokens: Vec<Token>,
    module: Module,
    lines: LineIndex,
}

/// Parse a complete module.
pub fn parse(text: &str) -> Result<SyntaxTree, SyntaxError> {
    SyntaxTree::parse(text)
}

/// Render a tree back to text. Always equal to the text it was parsed from.
pub fn print(tree: &SyntaxTree) -> String {
    untokenize(&tree.tokens)
}

impl SyntaxTree {
    pub fn parse(text: &str) -> Result<SyntaxTree, SyntaxError> {
        let tokens = tokenize(text)?;
        let module = Parser::new(&tokens).parse_module()?;
        Ok(SyntaxTree {
            source: text.to_string(),
            tokens,
            module,
            lines: LineIndex::new(text),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn module(&self) -> &Module {
        &self.module
    }

    pub fn line_index(&self) -> &LineIndex {
        &self.lines
    }

    pub fn text(&self, span: Span) -> &str {
        span.text(&self.source)
    }

    /// Resolve a reference produced from this tree (or one with the same shape).
    pub fn stmt(&self, r: &StmtRef) -> Option<&Stmt> {
        let mut block: &[Stmt] = &self.module.body;
        let mut cur: Option<&Stmt> = None;
        for (depth, step) in r.path.iter().enumerate() {
            if depth > 0 {
                let parent = cur?;
                block = &parent.blocks().get(step.block)?.stmts;
            } else if step.block != 0 {
                return None;
            }
            cur = Some(block.get(step.index)?);
        }
        cur
    }

    /// Every statement in pre-order.
    pub fn statements(&self) -> Vec<StmtRef> {
        let mut out = Vec::new();
        collect_stmts(&self.module.body, 0, &mut Vec::new(), &mut out);
        out
    }

    /// Statements nested (at any depth) inside `scope`, in pre-order.
    pub fn statements_in(&self, scope: &StmtRef) -> Vec<StmtRef> {
        let Some(stmt) = self.stmt(scope) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut path = scope.path.clone();
        for (bi, b) in stmt.blocks().iter().enumerate() {
            collect_stmts(&b.stmts, bi, &mut path, &mut out);
        }
        out
    }

    /// Top-level function definitions in source order.
    pub fn functions(&self) -> Vec<StmtRef> {
        self.module
            .body
            .iter()
            .enumerate()
            .filter(|(_, s)| s.as_function().is_some())
            .map(|(i, s)| StmtRef {
                path: vec![PathStep { block: 0, index: i }],
                span: s.span,
            })
            .collect()
    }

    /// The last top-level function named `name` (later definitions win).
    pub fn find_function(&self, name: &str) -> Option<StmtRef> {
        self.functions().into_iter().rev().find(|r| {
            self.stmt(r)
                .and_then(Stmt::as_function)
                .is_some_and(|f| f.name.name == name)
        })
    }

    pub fn function(&self, r: &StmtRef) -> Option<&FunctionDef> {
        self.stmt(r).and_then(Stmt::as_function)
    }

    /// Apply non-overlapping edits and re-parse the result.
    pub fn apply_edits(&self, edits: &[Edit]) -> Result<SyntaxTree, EditError> {
        let text = apply_edits_to_text(&self.source, edits)?;
        SyntaxTree::parse(&text).map_err(EditError::Syntax)
    }
}

/// Splice edits into `text`. Edits may be given in any order but must not overlap.
pub fn apply_edits_to_text(text: &str, edits: &[Edit]) -> Result<String, EditError> {
    let mut sorted: Vec<&Edit> = edits.iter().collect();
    sorted.sort_by_key(|e| (e.span.byte_start, e.span.byte_end));
    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    for e in sorted {
        if e.span.byte_start < at {
            return Err(EditError::Overlap(e.span.byte_start));
        }
        if e.span.byte_end > text.len() || e.span.byte_start > e.span.byte_end {
            return Err(EditError::OutOfRange(e.span.byte_end));
        }
        out.push_str(&text[at..e.span.byte_start]);
        out.push_str(&e.replacement);
        at = e.span.byte_end;
    }
    out.push_str(&text[at..]);
    Ok(out)
}

fn collect_stmts(stmts: &[Stmt], block: usize, path: &mut Vec<PathStep>, out: &mut Vec<StmtRef>) {
    for (i, s) in stmts.iter().enumerate() {
        path.push(PathStep { block, index: i });
        out.push(StmtRef {
            path: path.clone(),
            span: s.span,
        });
        for (bi, b) in s.blocks().iter().enumerate() {
            collect_stmts(&b.stmts, bi, path, out);
        }
        path.pop();
    }
}

/// Whether a statement is a plain string-literal expression (a docstring
/// when it leads a body).
pub fn is_docstring(stmt: &Stmt) -> bool {
    matches!(&stmt.kind, StmtKind::Expr(e) if matches!(e.kind, ExprKind::Str { fstring: false, .. }))
}

/// Body statements with a leading docstring removed.
pub fn body_without_docstring(body: &Block) -> &[Stmt] {
    match body.stmts.first() {
        Some(s) if is_docstring(s) => &body.stmts[1..],
        _ => &body.stmts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "import os\n\ndef f(a, b=1):\n    \"\"\"doc\"\"\"\n    if a > b:  # c\n        return a\n    else:\n        return b\n\nclass K:\n    x = 1\n";

    #[test]
    fn round_trip_and_refs() {
        let t = parse(SRC).unwrap();
        assert_eq!(print(&t), SRC);
        let all = t.statements();
        let kinds: Vec<_> = all.iter().map(|r| t.stmt(r).unwrap().kind_name()).collect();
        assert_eq!(
            kinds,
            ["Import", "FunctionDef", "Expr", "If", "Return", "Return", "ClassDef", "Assign"]
        );
        let f = t.find_function("f").unwrap();
        assert_eq!(t.statements_in(&f).len(), 4);
        let ret_b = &all[5];
        assert_eq!(ret_b.path.last().unwrap().block, 1);
        assert_eq!(t.text(ret_b.span), "return b");
        assert!(f.is_ancestor_of(ret_b));
        assert!(all[4].is_sibling_of(&all[4]));
        assert!(!all[4].is_sibling_of(ret_b));
    }

    #[test]
    fn edits_reparse() {
        let t = parse("x = 1\ny = 2\n").unwrap();
        let refs = t.statements();
        let e = [Edit::new(refs[0].span, "y = 2"), Edit::new(refs[1].span, "x = 1")];
        let t2 = t.apply_edits(&e).unwrap();
        assert_eq!(t2.source(), "y = 2\nx = 1\n");
        let bad = [Edit::new(refs[0].span, "x = (")];
        assert!(matches!(t.apply_edits(&bad), Err(EditError::Syntax(_))));
        let overlap = [Edit::new(refs[0].span, "a"), Edit::new(refs[0].span, "b")];
        assert!(matches!(t.apply_edits(&overlap), Err(EditError::Overlap(_))));
    }
}
