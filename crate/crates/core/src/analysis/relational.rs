//! `if` statements whose condition is a negatable relational expression.

use cfprobe_syntax::ast::{BoolOpKind, CmpOp, Expr, ExprKind, Stmt, StmtKind, UnaryOpKind};
use cfprobe_syntax::{apply_edits_to_text, Edit, PathStep, Span, StmtRef, SyntaxTree};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::defuse::Region;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnsupportedCondition {
    #[error("condition contains a call")]
    Call,
    #[error("condition uses `not`")]
    Not,
    #[error("chained comparison")]
    Chained,
    #[error("condition leaf is not a comparison")]
    NonRelational,
    #[error("nested boolean operator without parentheses")]
    UnparenthesizedBoolOp,
    #[error("condition contains {0}")]
    Forbidden(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalSite {
    pub if_stmt: StmtRef,
    pub condition_span: Span,
    /// Operator of the first comparison in the condition.
    pub operator: String,
    /// Every comparison operator in source order.
    pub operators: Vec<String>,
    /// The `if` has a plain `else` block and no `elif`.
    pub has_else: bool,
}

/// Check that `cond` is a call-free comparison or a boolean combination of
/// comparisons, where nested boolean operators are parenthesized.
pub fn check_condition(cond: &Expr) -> Result<(), UnsupportedCondition> {
    fn node(e: &Expr, nested: bool) -> Result<(), UnsupportedCondition> {
        match &e.kind {
            ExprKind::Paren(inner) => node(inner, false),
            ExprKind::BoolOp { values, .. } => {
                if nested {
                    return Err(UnsupportedCondition::UnparenthesizedBoolOp);
                }
                values.iter().try_for_each(|v| node(v, true))
            }
            ExprKind::Compare { left, ops, comparators } => {
                if ops.len() != 1 {
                    return Err(UnsupportedCondition::Chained);
                }
                operand(left)?;
                comparators.iter().try_for_each(operand)
            }
            ExprKind::UnaryOp { op: UnaryOpKind::Not, .. } => Err(UnsupportedCondition::Not),
            _ => Err(UnsupportedCondition::NonRelational),
        }
    }
    fn operand(e: &Expr) -> Result<(), UnsupportedCondition> {
        let mut err = None;
        e.walk(&mut |x| {
            let bad = match &x.kind {
                ExprKind::Call { .. } => Some(UnsupportedCondition::Call),
                ExprKind::UnaryOp { op: UnaryOpKind::Not, .. } => Some(UnsupportedCondition::Not),
                ExprKind::Compare { .. } | ExprKind::BoolOp { .. } => Some(UnsupportedCondition::Forbidden("a nested comparison")),
                ExprKind::NamedExpr { .. } => Some(UnsupportedCondition::Forbidden("an assignment expression")),
                ExprKind::Lambda { .. } => Some(UnsupportedCondition::Forbidden("a lambda")),
                ExprKind::Yield(_) | ExprKind::YieldFrom(_) => Some(UnsupportedCondition::Forbidden("yield")),
                ExprKind::Await(_) => Some(UnsupportedCondition::Forbidden("await")),
                ExprKind::ListComp { .. }
                | ExprKind::SetComp { .. }
                | ExprKind::DictComp { .. }
                | ExprKind::GeneratorExp { .. } => Some(UnsupportedCondition::Forbidden("a comprehension")),
                _ => None,
            };
            if err.is_none() {
                err = bad;
            }
        });
        err.map_or(Ok(()), Err)
    }
    node(cond, false)
}

/// Edits that turn `cond` into its logical negation: every comparison
/// operator is replaced by its complement and `and`/`or` are exchanged.
pub fn negation_edits(cond: &Expr) -> Result<Vec<Edit>, UnsupportedCondition> {
    check_condition(cond)?;
    let mut edits = Vec::new();
    collect(cond, &mut edits);
    Ok(edits)
}

fn collect(e: &Expr, edits: &mut Vec<Edit>) {
    match &e.kind {
        ExprKind::Paren(inner) => collect(inner, edits),
        ExprKind::BoolOp { op, values, op_spans } => {
            let flipped = match op {
                BoolOpKind::And => "or",
                BoolOpKind::Or => "and",
            };
            edits.extend(op_spans.iter().map(|s| Edit::new(*s, flipped)));
            values.iter().for_each(|v| collect(v, edits));
        }
        ExprKind::Compare { ops, .. } => {
            edits.extend(ops.iter().map(|o| Edit::new(o.span, o.op.complement().as_str())));
        }
        _ => {}
    }
}

/// Source text of the negation of `cond`, which must come from `tree`.
pub fn negate_condition(tree: &SyntaxTree, cond: &Expr) -> Result<String, UnsupportedCondition> {
    let edits = negation_edits(cond)?;
    let base = cond.span.byte_start;
    let local: Vec<Edit> = edits
        .into_iter()
        .map(|mut e| {
            e.span.byte_start -= base;
            e.span.byte_end -= base;
            e
        })
        .collect();
    Ok(apply_edits_to_text(tree.text(cond.span), &local).expect("operator spans lie inside the condition"))
}

/// Comparison operators of a condition in source order.
pub fn operators(cond: &Expr) -> Vec<CmpOp> {
    let mut out = Vec::new();
    cond.walk(&mut |x| {
        if let ExprKind::Compare { ops, .. } = &x.kind {
            out.extend(ops.iter().map(|o| o.op));
        }
    });
    out
}

/// Every `if` statement of `region` (excluding nested definitions) whose
/// condition passes [`check_condition`], in source order.
pub fn relational_if_sites(tree: &SyntaxTree, region: &Region) -> Vec<RelationalSite> {
    let mut out = Vec::new();
    let Some(body) = region.body(tree) else { return out };
    let prefix = match region {
        Region::Module => Vec::new(),
        Region::Function(r) => r.path.clone(),
    };
    walk(body, 0, &prefix, &mut out);
    out
}

fn walk(stmts: &[Stmt], block: usize, path: &[PathStep], out: &mut Vec<RelationalSite>) {
    for (k, s) in stmts.iter().enumerate() {
        if matches!(s.kind, StmtKind::FunctionDef(_) | StmtKind::ClassDef(_)) {
            continue;
        }
        let mut p = path.to_vec();
        p.push(PathStep { block, index: k });
        if let StmtKind::If(i) = &s.kind {
            if check_condition(&i.test).is_ok() {
                let ops: Vec<String> = operators(&i.test).iter().map(|o| o.as_str().to_string()).collect();
                out.push(RelationalSite {
                    if_stmt: StmtRef { path: p.clone(), span: s.span },
                    condition_span: i.test.span,
                    operator: ops[0].clone(),
                    operators: ops,
                    has_else: i.elifs.is_empty() && i.orelse.is_some(),
                });
            }
        }
        for (bi, b) in s.blocks().into_iter().enumerate() {
            walk(&b.stmts, bi, &p, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfprobe_syntax::parse;

    fn cond(src: &str) -> (SyntaxTree, Expr) {
        let t = parse(&format!("if {src}:\n    pass\n")).unwrap();
        let StmtKind::If(i) = &t.module().body[0].kind else { unreachable!() };
        let e = i.test.clone();
        (t, e)
    }

    fn neg(src: &str) -> Result<String, UnsupportedCondition> {
        let (t, e) = cond(src);
        negate_condition(&t, &e)
    }

    #[test]
    fn negations() {
        assert_eq!(neg("x==y").unwrap(), "x!=y");
        assert_eq!(neg("a<b and c>=d").unwrap(), "a>=b or c<d");
        assert_eq!(neg("x is not None").unwrap(), "x is None");
        assert_eq!(neg("k not in d or (a > 1 and b <= 2)").unwrap(), "k in d and (a <= 1 or b > 2)");
        assert_eq!(neg("a<b<c"), Err(UnsupportedCondition::Chained));
        assert_eq!(neg("check(x)"), Err(UnsupportedCondition::NonRelational));
        assert_eq!(neg("len(x) > 0"), Err(UnsupportedCondition::Call));
        assert_eq!(neg("not a == b"), Err(UnsupportedCondition::Not));
        assert_eq!(neg("a<b and c<d or e<f"), Err(UnsupportedCondition::UnparenthesizedBoolOp));
    }

    #[test]
    fn sites() {
        let t = parse("def f(a, b):\n    if a == b:\n        return 1\n    else:\n        return 2\n    if a:\n        pass\n    if a < b:\n        pass\n    elif a > b:\n        pass\n    else:\n        pass\n").unwrap();
        let s = relational_if_sites(&t, &Region::Function(t.functions()[0].clone()));
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].operator.as_str(), s[0].has_else), ("==", true));
        assert_eq!((s[1].operator.as_str(), s[1].has_else), ("<", false));
    }
}
