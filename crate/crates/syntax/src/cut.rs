//! Choosing where to cut a program into prompt prefix and hidden suffix.

use crate::ast::Stmt;
use crate::error::CutError;
use crate::span::Position;
use crate::tree::{body_without_docstring, is_docstring, StmtRef, SyntaxTree};

/// Source text strictly before `at`, which must be the start of a line or
/// the end of the source (a final line need not end in a newline).
pub fn cut_prefix(tree: &SyntaxTree, at: Position) -> Result<String, CutError> {
    if !at.is_line_start() {
        return Err(CutError::InvalidCutPoint {
            line: at.line,
            col: at.col,
        });
    }
    let src = tree.source();
    if at.byte > src.len() {
        return Err(CutError::OutOfRange(at.byte));
    }
    if at.byte > 0 && at.byte < src.len() && src.as_bytes()[at.byte - 1] != b'\n' {
        return Err(CutError::InvalidCutPoint {
            line: at.line,
            col: at.col,
        });
    }
    Ok(src[..at.byte].to_string())
}

/// First and last physical line of a function body, leaving out a leading
/// docstring. Comments and blank lines between statements are included.
pub fn body_lines(tree: &SyntaxTree, func: &StmtRef) -> Result<(u32, u32), CutError> {
    let f = function(tree, func)?;
    if f.body.inline {
        return Err(CutError::DegenerateBody(1));
    }
    stmt_lines(body_without_docstring(&f.body))
}

/// Like [`body_lines`] for the top level of a script-style module.
pub fn module_body_lines(tree: &SyntaxTree) -> Result<(u32, u32), CutError> {
    stmt_lines(module_stmts(tree))
}

/// Line-start position after the first `ceil(fraction * n)` body lines,
/// moved forward so it never splits a simple statement or a compound
/// header. The result may equal the line just past the body, in which case
/// nothing of the body is hidden.
pub fn fraction_boundary(tree: &SyntaxTree, func: &StmtRef, fraction: f64) -> Result<Position, CutError> {
    check_fraction(fraction)?;
    let lines = body_lines(tree, func)?;
    let f = function(tree, func)?;
    boundary(tree, &f.body.stmts, lines, fraction)
}

/// Like [`fraction_boundary`] over the top-level statements of a module.
pub fn module_fraction_boundary(tree: &SyntaxTree, fraction: f64) -> Result<Position, CutError> {
    check_fraction(fraction)?;
    let lines = module_body_lines(tree)?;
    boundary(tree, &tree.module().body, lines, fraction)
}

fn function<'t>(tree: &'t SyntaxTree, func: &StmtRef) -> Result<&'t crate::ast::FunctionDef, CutError> {
    tree.stmt(func)
        .ok_or(CutError::BadStmtRef)?
        .as_function()
        .ok_or(CutError::NotAFunction)
}

fn module_stmts(tree: &SyntaxTree) -> &[Stmt] {
    let body = &tree.module().body;
    match body.first() {
        Some(s) if is_docstring(s) => &body[1..],
        _ => body,
    }
}

fn stmt_lines(stmts: &[Stmt]) -> Result<(u32, u32), CutError> {
    match (stmts.first(), stmts.last()) {
        (Some(first), Some(last)) => Ok((first.span.start_line, last.span.end_line)),
        _ => Err(CutError::DegenerateBody(0)),
    }
}

fn check_fraction(fraction: f64) -> Result<(), CutError> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(CutError::BadFraction(fraction))
    }
}

fn boundary(tree: &SyntaxTree, stmts: &[Stmt], (first, last): (u32, u32), fraction: f64) -> Result<Position, CutError> {
    let n = (last - first + 1) as usize;
    if n < 2 {
        return Err(CutError::DegenerateBody(n));
    }
    let k = (fraction * n as f64 - 1e-9).ceil().max(0.0) as u32;
    let mut line = first + k;
    loop {
        let moved = advance_past_straddlers(stmts, line);
        if moved == line {
            break;
        }
        line = moved;
    }
    tree.line_index()
        .line_start(line)
        .ok_or(CutError::OutOfRange(tree.source().len()))
}

/// If a simple statement or compound header spans both `line - 1` and
/// `line`, return the line after it ends; otherwise `line`.
fn advance_past_straddlers(stmts: &[Stmt], line: u32) -> u32 {
    let mut out = line;
    for s in stmts {
        let h = s.header_span();
        if h.start_line < line && line <= h.end_line {
            out = out.max(h.end_line + 1);
        }
        if s.is_compound() {
            for b in s.blocks() {
                out = out.max(advance_past_straddlers(&b.stmts, line));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse;

    #[test]
    fn boundary_rounds_forward() {
        let src = "def f(x):\n    \"\"\"d\"\"\"\n    y = (x +\n         1)\n    if (y >\n            2):\n        return 1\n    return 0\n";
        let t = parse(src).unwrap();
        let f = t.find_function("f").unwrap();
        assert_eq!(body_lines(&t, &f).unwrap(), (3, 8));
        // 6 lines: 0.25 -> 2 lines -> line 5 (starts cleanly at the `if`).
        assert_eq!(fraction_boundary(&t, &f, 0.25).unwrap().line, 5);
        // 0.1 -> 1 line -> line 4 splits the assignment -> moved to 5.
        assert_eq!(fraction_boundary(&t, &f, 0.1).unwrap().line, 5);
        // 0.5 -> 3 lines -> line 6 splits the if header -> moved to 7.
        assert_eq!(fraction_boundary(&t, &f, 0.5).unwrap().line, 7);
        let at = fraction_boundary(&t, &f, 0.5).unwrap();
        assert!(cut_prefix(&t, at).unwrap().ends_with("2):\n"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = parse("def f():\n    return 1\nx = 1\n").unwrap();
        let f = t.find_function("f").unwrap();
        assert_eq!(fraction_boundary(&t, &f, 0.5), Err(CutError::DegenerateBody(1)));
        assert_eq!(fraction_boundary(&t, &f, 1.0), Err(CutError::BadFraction(1.0)));
        let mid = Position { line: 2, col: 3, byte: 12 };
        assert!(matches!(cut_prefix(&t, mid), Err(CutError::InvalidCutPoint { .. })));
        assert_eq!(module_body_lines(&t).unwrap(), (1, 3));
        assert_eq!(module_fraction_boundary(&t, 0.5).unwrap().line, 3);
        let x = t.statements()[2].clone();
        assert_eq!(fraction_boundary(&t, &x, 0.5), Err(CutError::NotAFunction));
    }

    #[test]
    fn boundary_at_end_without_final_newline() {
        let src = "def f(a):\n    if a:\n        a = (1 +\n             2)";
        let t = parse(src).unwrap();
        let f = t.find_function("f").unwrap();
        let at = fraction_boundary(&t, &f, 0.9).unwrap();
        assert_eq!(at.byte, src.len());
        assert_eq!(cut_prefix(&t, at).unwrap(), src);
    }
}
