//! Per-statement read/write sets and adjacent-statement independence.

use std::collections::BTreeSet;

use cfprobe_syntax::ast::{Arg, Expr, ExprKind, Stmt, StmtKind};
use cfprobe_syntax::{is_docstring, PathStep, StmtRef, SyntaxTree};
use serde::{Deserialize, Serialize};

use super::defuse::Region;
use super::scope::{Ctx, Resolution, ScopeKind, ScopeTable};

/// Calls assumed free of side effects when they name the builtin.
pub const PURE_CALLS: &[&str] = &[
    "len", "min", "max", "abs", "sum", "sorted", "range", "int", "float", "str", "bool", "list", "tuple", "set", "dict",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadWriteSet {
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    /// May have effects beyond binding its written names.
    pub impure: bool,
    /// Stores through a subscript or attribute.
    pub heap_write: bool,
    /// Evaluates a subscript, attribute or call anywhere.
    pub heap_access: bool,
}

impl ReadWriteSet {
    pub fn conflicts_with(&self, other: &ReadWriteSet) -> bool {
        let overlap = |a: &BTreeSet<String>, b: &BTreeSet<String>| a.intersection(b).next().is_some();
        overlap(&self.writes, &other.reads)
            || overlap(&self.writes, &other.writes)
            || overlap(&other.writes, &self.reads)
            || (self.heap_write && other.heap_access)
            || (other.heap_write && self.heap_access)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependencePair {
    pub first: StmtRef,
    pub second: StmtRef,
}

/// Read/write summary of one statement (for compound statements, of the
/// whole statement including nested blocks).
pub fn read_write_sets(tree: &SyntaxTree, table: &ScopeTable, stmt: &StmtRef) -> ReadWriteSet {
    match tree.stmt(stmt) {
        Some(s) => stmt_rw(table, s),
        None => ReadWriteSet::default(),
    }
}

fn stmt_rw(table: &ScopeTable, s: &Stmt) -> ReadWriteSet {
    let mut rw = ReadWriteSet::default();
    for o in table.occurrences_in(s.span) {
        // Variables bound by a comprehension inside the statement are private to it.
        if let Resolution::Bound(sc) = o.resolution {
            if table.scopes[sc].kind == ScopeKind::Comprehension && s.span.contains(&table.scopes[sc].span) {
                continue;
            }
        }
        match o.ctx {
            Ctx::Load => {
                rw.reads.insert(o.name.clone());
            }
            Ctx::Store | Ctx::Param | Ctx::Import | Ctx::DefName => {
                rw.writes.insert(o.name.clone());
            }
            Ctx::AugStore | Ctx::Del => {
                rw.reads.insert(o.name.clone());
                rw.writes.insert(o.name.clone());
            }
            Ctx::Decl | Ctx::Attr | Ctx::KwArg => {}
        }
    }
    let mut targets: Vec<&Expr> = Vec::new();
    match &s.kind {
        StmtKind::Assign { targets: t, .. } => targets.extend(t.iter()),
        StmtKind::AugAssign { target, .. } | StmtKind::AnnAssign { target, .. } => targets.push(target),
        StmtKind::Delete(t) => targets.extend(t.iter()),
        StmtKind::Expr(_) | StmtKind::Pass => {}
        // Anything else is control flow or binds names in ways we do not model.
        _ => rw.impure = true,
    }
    for t in targets {
        heap_targets(t, &mut rw);
    }
    for e in s.exprs() {
        e.walk(&mut |x| match &x.kind {
            ExprKind::Call { func, args } => {
                rw.heap_access = true;
                if !pure_call(table, func, args) {
                    rw.impure = true;
                }
            }
            ExprKind::Attribute { .. } | ExprKind::Subscript { .. } => rw.heap_access = true,
            ExprKind::Yield(_) | ExprKind::YieldFrom(_) | ExprKind::Await(_) | ExprKind::NamedExpr { .. } => {
                rw.impure = true
            }
            _ => {}
        });
    }
    rw
}

/// Record stores through `a[i] = ...` / `a.b = ...`: the base is read and written.
fn heap_targets(t: &Expr, rw: &mut ReadWriteSet) {
    match &t.unparen().kind {
        ExprKind::Tuple(v) | ExprKind::List(v) => v.iter().for_each(|x| heap_targets(x, rw)),
        ExprKind::Starred(x) => heap_targets(x, rw),
        ExprKind::Subscript { value, .. } | ExprKind::Attribute { value, .. } => {
            rw.heap_write = true;
            let mut base: &Expr = value;
            loop {
                match &base.unparen().kind {
                    ExprKind::Subscript { value, .. } | ExprKind::Attribute { value, .. } => base = value,
                    _ => break,
                }
            }
            match base.unparen().as_name() {
                Some(n) => {
                    rw.reads.insert(n.to_string());
                    rw.writes.insert(n.to_string());
                }
                None => rw.impure = true,
            }
        }
        _ => {}
    }
}

fn pure_call(table: &ScopeTable, func: &Expr, args: &[Arg]) -> bool {
    let Some(name) = func.as_name() else { return false };
    if !PURE_CALLS.contains(&name) || resolution_at(table, func) != Some(Resolution::Builtin) {
        return false;
    }
    args.iter().all(|a| match a {
        Arg::Keyword { name, value } if name.name == "key" => match &value.kind {
            ExprKind::Lambda { .. } => true,
            ExprKind::Name(n) => PURE_CALLS.contains(&n.as_str()) && resolution_at(table, value) == Some(Resolution::Builtin),
            _ => false,
        },
        _ => true,
    })
}

fn resolution_at(table: &ScopeTable, e: &Expr) -> Option<Resolution> {
    table.occurrences_in(e.span).first().filter(|o| o.span == e.span).map(|o| o.resolution)
}

/// Adjacent sibling statements of `region` that can be exchanged without
/// changing behaviour, in source order. Loop bodies, `try` statements and
/// nested definitions are not searched.
pub fn independent_pairs(tree: &SyntaxTree, table: &ScopeTable, region: &Region) -> Vec<IndependencePair> {
    let mut out = Vec::new();
    let Some(scope) = region.scope_id(table) else { return out };
    if table.is_dynamic(scope) {
        return out;
    }
    let prefix = match region {
        Region::Module => Vec::new(),
        Region::Function(r) => r.path.clone(),
    };
    let Some(body) = region.body(tree) else { return out };
    let inline = match region {
        Region::Module => false,
        Region::Function(r) => tree.function(r).is_some_and(|f| f.body.inline),
    };
    if !inline {
        scan(tree.source(), table, body, 0, &prefix, true, &mut out);
    }
    out
}

fn scan(src: &str, table: &ScopeTable, stmts: &[Stmt], block: usize, path: &[PathStep], top: bool, out: &mut Vec<IndependencePair>) {
    let rws: Vec<Option<ReadWriteSet>> = stmts.iter().map(|s| swappable(table, s)).collect();
    let start = usize::from(top && stmts.first().is_some_and(is_docstring));
    for i in start..stmts.len().saturating_sub(1) {
        let (a, b) = (&stmts[i], &stmts[i + 1]);
        let (Some(ra), Some(rb)) = (&rws[i], &rws[i + 1]) else { continue };
        let own_lines = (i == 0 || stmts[i - 1].span.end_line < a.span.start_line)
            && a.span.end_line < b.span.start_line
            && stmts.get(i + 2).map_or(true, |c| b.span.end_line < c.span.start_line);
        if !own_lines || a.span.text(src) == b.span.text(src) || ra.conflicts_with(rb) {
            continue;
        }
        let mk = |k: usize, s: &Stmt| {
            let mut p = path.to_vec();
            p.push(PathStep { block, index: k });
            StmtRef { path: p, span: s.span }
        };
        out.push(IndependencePair {
            first: mk(i, a),
            second: mk(i + 1, b),
        });
    }
    for (k, s) in stmts.iter().enumerate() {
        let descend = matches!(s.kind, StmtKind::If(_) | StmtKind::With(_));
        if !descend {
            continue;
        }
        let mut p = path.to_vec();
        p.push(PathStep { block, index: k });
        for (bi, b) in s.blocks().into_iter().enumerate() {
            if !b.inline {
                scan(src, table, &b.stmts, bi, &p, false, out);
            }
        }
    }
}

fn swappable(table: &ScopeTable, s: &Stmt) -> Option<ReadWriteSet> {
    let ok = match &s.kind {
        StmtKind::Assign { .. } | StmtKind::AugAssign { .. } | StmtKind::Expr(_) | StmtKind::Pass => true,
        StmtKind::AnnAssign { value, .. } => value.is_some(),
        _ => false,
    };
    if !ok {
        return None;
    }
    let rw = stmt_rw(table, s);
    (!rw.impure).then_some(rw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfprobe_syntax::parse;

    fn rw(src: &str) -> ReadWriteSet {
        let t = parse(src).unwrap();
        let table = ScopeTable::build(&t);
        read_write_sets(&t, &table, &t.statements()[0])
    }

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn basic_sets() {
        let r = rw("a = b + c\n");
        assert_eq!((r.reads, r.writes, r.impure), (set(&["b", "c"]), set(&["a"]), false));
        let r = rw("a += 1\n");
        assert_eq!((r.reads, r.writes), (set(&["a"]), set(&["a"])));
        let r = rw("a[i] = v\n");
        assert_eq!((r.reads, r.writes.clone(), r.heap_write), (set(&["a", "i", "v"]), set(&["a"]), true));
        assert!(rw("lst.sort()\n").impure);
        assert!(!rw("n = len([y for y in xs])\n").impure);
        assert!(!rw("n = len([y for y in xs])\n").reads.contains("y"));
        assert!(rw("n = sorted(xs, key=f)\n").impure);
        assert!(!rw("n = sorted(xs, key=lambda q: -q)\n").impure);
        assert!(rw("len = 3\nn = len(xs)\n").writes.contains("len"));
    }

    fn pairs(body: &str) -> Vec<(u32, u32)> {
        let t = parse(body).unwrap();
        let table = ScopeTable::build(&t);
        independent_pairs(&t, &table, &Region::Module)
            .into_iter()
            .map(|p| (p.first.span.start_line, p.second.span.start_line))
            .collect()
    }

    #[test]
    fn pair_selection() {
        assert_eq!(pairs("a=1\nb=2\nc=a+b\n"), vec![(1, 2)]);
        assert!(pairs("a=1\na=2\n").is_empty());
        assert!(pairs("x=f()\ny=1\n").is_empty());
        assert!(pairs("for i in r:\n    a=1\n    b=2\n").is_empty());
        assert!(pairs("a=1; b=2\nc=3\n").is_empty());
        assert!(pairs("d[0]=1\ne=d[1]\n").is_empty());
        assert!(pairs("d[0]=1\ne=g[1]\n").is_empty());
        assert_eq!(pairs("if q:\n    a=1\n    b=2\n"), vec![(2, 3)]);
    }
}
