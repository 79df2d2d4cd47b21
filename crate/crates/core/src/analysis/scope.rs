//! Python name resolution: builds the scope tree of a module and resolves
//! every identifier occurrence to the scope that binds it.

use std::collections::{BTreeMap, BTreeSet};

use cfprobe_syntax::ast::{Arg, Comprehension, DictItem, Expr, ExprKind, Param, Stmt, StmtKind};
use cfprobe_syntax::{is_keyword, Span, SyntaxTree};
use serde::{Deserialize, Serialize};

pub type ScopeId = usize;

pub const MODULE_SCOPE: ScopeId = 0;

/// Names provided by the `builtins` module.
pub const BUILTINS: &[&str] = &[
    "abs", "aiter", "all", "anext", "any", "ascii", "bin", "bool", "breakpoint", "bytearray", "bytes",
    "callable", "chr", "classmethod", "compile", "complex", "copyright", "credits", "delattr", "dict",
    "dir", "divmod", "enumerate", "eval", "exec", "exit", "filter", "float", "format", "frozenset",
    "getattr", "globals", "hasattr", "hash", "help", "hex", "id", "input", "int", "isinstance",
    "issubclass", "iter", "len", "license", "list", "locals", "map", "max", "memoryview", "min",
    "next", "object", "oct", "open", "ord", "pow", "print", "property", "quit", "range", "repr",
    "reversed", "round", "set", "setattr", "slice", "sorted", "staticmethod", "str", "sum", "super",
    "tuple", "type", "vars", "zip", "__import__", "__name__", "__doc__", "__file__", "__builtins__",
    "__debug__", "NotImplemented", "Ellipsis", "ArithmeticError", "AssertionError", "AttributeError",
    "BaseException", "BlockingIOError", "BrokenPipeError", "BufferError", "BytesWarning",
    "ChildProcessError", "ConnectionAbortedError", "ConnectionError", "ConnectionRefusedError",
    "ConnectionResetError", "DeprecationWarning", "EOFError", "EnvironmentError", "Exception",
    "FileExistsError", "FileNotFoundError", "FloatingPointError", "FutureWarning", "GeneratorExit",
    "IOError", "ImportError", "ImportWarning", "IndentationError", "IndexError", "InterruptedError",
    "IsADirectoryError", "KeyError", "KeyboardInterrupt", "LookupError", "MemoryError",
    "ModuleNotFoundError", "NameError", "NotADirectoryError", "NotImplementedError", "OSError",
    "OverflowError", "PendingDeprecationWarning", "PermissionError", "ProcessLookupError",
    "RecursionError", "ReferenceError", "ResourceWarning", "RuntimeError", "RuntimeWarning",
    "StopAsyncIteration", "StopIteration", "SyntaxError", "SyntaxWarning", "SystemError",
    "SystemExit", "TabError", "TimeoutError", "TypeError", "UnboundLocalError", "UnicodeDecodeError",
    "UnicodeEncodeError", "UnicodeError", "UnicodeTranslateError", "UnicodeWarning", "UserWarning",
    "ValueError", "Warning", "ZeroDivisionError",
];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

/// Calls that read or write a frame's namespace by name.
const DYNAMIC_CALLS: &[&str] = &["eval", "exec", "locals", "vars", "globals"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScopeKind {
    Module,
    Function,
    Lambda,
    Class,
    Comprehension,
}

/// How a name came to be bound in a scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BindKind {
    Param,
    Assign,
    AugAssign,
    Loop,
    With,
    Handler,
    Del,
    Import,
    Def,
    Class,
    Comprehension,
    Walrus,
    /// Created in the module by a `global` declaration elsewhere.
    Global,
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub kind: ScopeKind,
    pub parent: Option<ScopeId>,
    /// The defining statement or expression (whole module for the root).
    pub span: Span,
    pub bindings: BTreeMap<String, BTreeSet<BindKind>>,
    pub globals: BTreeSet<String>,
    pub nonlocals: BTreeSet<String>,
    /// Calls `eval`, `exec`, `locals`, `vars` or `globals` somewhere inside.
    pub dynamic: bool,
}

/// Syntactic context of an occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ctx {
    Load,
    Store,
    Del,
    /// Target of an augmented assignment: read, then written.
    AugStore,
    /// Parameter declaration.
    Param,
    /// Name in a `global` / `nonlocal` statement.
    Decl,
    /// Name bound by an import.
    Import,
    /// Attribute name after a dot.
    Attr,
    /// Keyword-argument name in a call.
    KwArg,
    /// Name of a nested `def` or `class`.
    DefName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolution {
    Bound(ScopeId),
    Builtin,
    Unbound,
    /// Attribute and keyword names are not variables.
    NotAVariable,
}

#[derive(Debug, Clone)]
pub struct Occurrence {
    pub name: String,
    pub span: Span,
    /// Scope the occurrence appears in.
    pub scope: ScopeId,
    pub ctx: Ctx,
    pub resolution: Resolution,
}

impl Occurrence {
    /// Occurrences that a consistent rename of the variable must touch.
    pub fn is_variable_ref(&self) -> bool {
        matches!(self.ctx, Ctx::Load | Ctx::Store | Ctx::Del | Ctx::AugStore)
    }
}

#[derive(Debug, Clone)]
pub struct ScopeTable {
    pub scopes: Vec<Scope>,
    /// All occurrences in source order.
    pub occurrences: Vec<Occurrence>,
}

impl ScopeTable {
    pub fn build(tree: &SyntaxTree) -> ScopeTable {
        let whole = Span::new(
            cfprobe_syntax::Position::START,
            tree.line_index().position(tree.source().len()),
        );
        let mut b = Builder {
            scopes: vec![Scope::new(ScopeKind::Module, None, whole)],
            occurrences: Vec::new(),
        };
        b.stmts(&tree.module().body, MODULE_SCOPE);
        let mut table = ScopeTable {
            scopes: b.scopes,
            occurrences: b.occurrences,
        };
        table.occurrences.sort_by_key(|o| (o.span.byte_start, o.span.byte_end));
        for i in 0..table.occurrences.len() {
            let o = &table.occurrences[i];
            let r = match o.ctx {
                Ctx::Attr | Ctx::KwArg => Resolution::NotAVariable,
                _ => table.resolve(&o.name, o.scope),
            };
            table.occurrences[i].resolution = r;
        }
        table
    }

    /// Resolve `name` as seen from inside `scope`.
    pub fn resolve(&self, name: &str, scope: ScopeId) -> Resolution {
        let mut s = scope;
        let mut first = true;
        loop {
            let sc = &self.scopes[s];
            // Class bodies are invisible to the scopes nested inside them.
            let skip = !first && sc.kind == ScopeKind::Class;
            if !skip {
                if sc.kind != ScopeKind::Module && sc.globals.contains(name) {
                    return self.global(name);
                }
                if sc.kind == ScopeKind::Module {
                    return self.global(name);
                }
                if !sc.nonlocals.contains(name) && sc.bindings.contains_key(name) {
                    return Resolution::Bound(s);
                }
            }
            s = sc.parent.expect("non-module scope has a parent");
            first = false;
        }
    }

    fn global(&self, name: &str) -> Resolution {
        if self.scopes[MODULE_SCOPE].bindings.contains_key(name) {
            Resolution::Bound(MODULE_SCOPE)
        } else if is_builtin(name) {
            Resolution::Builtin
        } else {
            Resolution::Unbound
        }
    }

    /// Scope created by the function definition whose statement span is `span`.
    pub fn function_scope(&self, span: Span) -> Option<ScopeId> {
        self.scopes
            .iter()
            .position(|s| s.kind == ScopeKind::Function && s.span == span)
    }

    /// Whether `inner` is `outer` or nested (at any depth) inside it.
    pub fn is_within(&self, inner: ScopeId, outer: ScopeId) -> bool {
        let mut s = Some(inner);
        while let Some(id) = s {
            if id == outer {
                return true;
            }
            s = self.scopes[id].parent;
        }
        false
    }

    /// Whether every scope from `inner` up to (excluding) `outer` is a comprehension.
    pub fn only_comprehensions_between(&self, inner: ScopeId, outer: ScopeId) -> bool {
        let mut s = inner;
        while s != outer {
            if self.scopes[s].kind != ScopeKind::Comprehension {
                return false;
            }
            match self.scopes[s].parent {
                Some(p) => s = p,
                None => return false,
            }
        }
        true
    }

    /// Whether the scope or any scope nested in it uses dynamic namespace access.
    pub fn is_dynamic(&self, scope: ScopeId) -> bool {
        self.scopes
            .iter()
            .enumerate()
            .any(|(i, s)| s.dynamic && self.is_within(i, scope))
    }

    /// Occurrences appearing inside `scope` or any scope nested in it.
    pub fn occurrences_within(&self, scope: ScopeId) -> impl Iterator<Item = &Occurrence> {
        self.occurrences
            .iter()
            .filter(move |o| self.is_within(o.scope, scope))
    }

    /// Occurrences whose span lies inside `span`, in source order.
    pub fn occurrences_in(&self, span: Span) -> &[Occurrence] {
        let occ = &self.occurrences;
        let lo = occ.partition_point(|o| o.span.byte_start < span.byte_start);
        let hi = occ.partition_point(|o| o.span.byte_start < span.byte_end);
        let hi = (lo..hi).rev().find(|&i| occ[i].span.byte_end <= span.byte_end).map_or(lo, |i| i + 1);
        &occ[lo..hi]
    }

    /// Local variables of `scope` that can be consistently renamed: every
    /// occurrence inside the scope resolves to a plain local binding of it
    /// (or to a comprehension variable directly inside it). Parameters,
    /// imports, nested definitions, declared globals/nonlocals and builtin
    /// names are excluded, as is everything in scopes with dynamic
    /// namespace access. Ordered by first occurrence.
    pub fn renameable_locals(&self, scope: ScopeId) -> Vec<String> {
        if self.is_dynamic(scope) {
            return Vec::new();
        }
        let plain = |kinds: &BTreeSet<BindKind>| {
            kinds.iter().all(|k| {
                matches!(
                    k,
                    BindKind::Assign
                        | BindKind::AugAssign
                        | BindKind::Loop
                        | BindKind::With
                        | BindKind::Handler
                        | BindKind::Del
                        | BindKind::Comprehension
                )
            })
        };
        let mut by_name: BTreeMap<&str, Vec<&Occurrence>> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        for o in self.occurrences_within(scope) {
            let e = by_name.entry(&o.name).or_default();
            if e.is_empty() {
                order.push(&o.name);
            }
            e.push(o);
        }
        let sc = &self.scopes[scope];
        order
            .into_iter()
            .filter(|name| {
                if is_builtin(name) || is_keyword(name) || sc.globals.contains(*name) || sc.nonlocals.contains(*name) {
                    return false;
                }
                by_name[name].iter().all(|o| {
                    if o.ctx == Ctx::Attr || o.ctx == Ctx::KwArg {
                        return true;
                    }
                    if !o.is_variable_ref() {
                        return false;
                    }
                    match o.resolution {
                        Resolution::Bound(t) if t == scope => plain(&sc.bindings[*name]),
                        Resolution::Bound(t) => {
                            self.scopes[t].kind == ScopeKind::Comprehension
                                && self.only_comprehensions_between(t, scope)
                                && plain(&self.scopes[t].bindings[*name])
                        }
                        _ => false,
                    }
                })
            })
            .map(str::to_string)
            .collect()
    }
}

impl Scope {
    fn new(kind: ScopeKind, parent: Option<ScopeId>, span: Span) -> Self {
        Scope {
            kind,
            parent,
            span,
            bindings: BTreeMap::new(),
            globals: BTreeSet::new(),
            nonlocals: BTreeSet::new(),
            dynamic: false,
        }
    }
}

struct Builder {
    scopes: Vec<Scope>,
    occurrences: Vec<Occurrence>,
}

impl Builder {
    fn new_scope(&mut self, kind: ScopeKind, parent: ScopeId, span: Span) -> ScopeId {
        self.scopes.push(Scope::new(kind, Some(parent), span));
        self.scopes.len() - 1
    }

    fn bind(&mut self, scope: ScopeId, name: &str, kind: BindKind) {
        self.scopes[scope]
            .bindings
            .entry(name.to_string())
            .or_default()
            .insert(kind);
    }

    fn occ(&mut self, name: &str, span: Span, scope: ScopeId, ctx: Ctx) {
        self.occurrences.push(Occurrence {
            name: name.to_string(),
            span,
            scope,
            ctx,
            resolution: Resolution::Unbound,
        });
    }

    fn stmts(&mut self, stmts: &[Stmt], scope: ScopeId) {
        for s in stmts {
            self.stmt(s, scope);
        }
    }

    fn params(&mut self, params: &[Param], outer: ScopeId, inner: ScopeId) {
        for p in params {
            if let Some(a) = &p.annotation {
                self.expr(a, outer, Ctx::Load);
            }
            if let Some(d) = &p.default {
                self.expr(d, outer, Ctx::Load);
            }
            self.bind(inner, &p.name.name, BindKind::Param);
            self.occ(&p.name.name, p.name.span, inner, Ctx::Param);
        }
    }

    fn stmt(&mut self, s: &Stmt, scope: ScopeId) {
        match &s.kind {
            StmtKind::FunctionDef(f) => {
                for d in &f.decorators {
                    self.expr(d, scope, Ctx::Load);
                }
                if let Some(r) = &f.returns {
                    self.expr(r, scope, Ctx::Load);
                }
                self.bind(scope, &f.name.name, BindKind::Def);
                self.occ(&f.name.name, f.name.span, scope, Ctx::DefName);
                let inner = self.new_scope(ScopeKind::Function, scope, s.span);
                self.params(&f.params, scope, inner);
                self.stmts(&f.body.stmts, inner);
            }
            StmtKind::ClassDef(c) => {
                for d in &c.decorators {
                    self.expr(d, scope, Ctx::Load);
                }
                self.args(&c.bases, scope);
                self.bind(scope, &c.name.name, BindKind::Class);
                self.occ(&c.name.name, c.name.span, scope, Ctx::DefName);
                let inner = self.new_scope(ScopeKind::Class, scope, s.span);
                self.stmts(&c.body.stmts, inner);
            }
            StmtKind::If(i) => {
                self.expr(&i.test, scope, Ctx::Load);
                self.stmts(&i.body.stmts, scope);
                for e in &i.elifs {
                    self.expr(&e.test, scope, Ctx::Load);
                    self.stmts(&e.body.stmts, scope);
                }
                if let Some(c) = &i.orelse {
                    self.stmts(&c.body.stmts, scope);
                }
            }
            StmtKind::For(f) => {
                self.expr(&f.iter, scope, Ctx::Load);
                self.target(&f.target, scope, BindKind::Loop);
                self.stmts(&f.body.stmts, scope);
                if let Some(c) = &f.orelse {
                    self.stmts(&c.body.stmts, scope);
                }
            }
            StmtKind::While(w) => {
                self.expr(&w.test, scope, Ctx::Load);
                self.stmts(&w.body.stmts, scope);
                if let Some(c) = &w.orelse {
                    self.stmts(&c.body.stmts, scope);
                }
            }
            StmtKind::Try(t) => {
                self.stmts(&t.body.stmts, scope);
                for h in &t.handlers {
                    if let Some(ty) = &h.typ {
                        self.expr(ty, scope, Ctx::Load);
                    }
                    if let Some(n) = &h.name {
                        self.bind(scope, &n.name, BindKind::Handler);
                        self.occ(&n.name, n.span, scope, Ctx::Store);
                    }
                    self.stmts(&h.body.stmts, scope);
                }
                for c in t.orelse.iter().chain(t.finalbody.iter()) {
                    self.stmts(&c.body.stmts, scope);
                }
            }
            StmtKind::With(w) => {
                for it in &w.items {
                    self.expr(&it.context, scope, Ctx::Load);
                    if let Some(v) = &it.vars {
                        self.target(v, scope, BindKind::With);
                    }
                }
                self.stmts(&w.body.stmts, scope);
            }
            StmtKind::Return(v) => {
                if let Some(v) = v {
                    self.expr(v, scope, Ctx::Load);
                }
            }
            StmtKind::Delete(ts) => {
                for t in ts {
                    self.target_ctx(t, scope, BindKind::Del, Ctx::Del);
                }
            }
            StmtKind::Assign { targets, value } => {
                self.expr(value, scope, Ctx::Load);
                for t in targets {
                    self.target(t, scope, BindKind::Assign);
                }
            }
            StmtKind::AugAssign { target, value, .. } => {
                self.expr(value, scope, Ctx::Load);
                if let ExprKind::Name(n) = &target.kind {
                    self.bind(scope, n, BindKind::AugAssign);
                    self.occ(n, target.span, scope, Ctx::AugStore);
                } else {
                    self.expr(target, scope, Ctx::Load);
                }
            }
            StmtKind::AnnAssign {
                target,
                annotation,
                value,
            } => {
                self.expr(annotation, scope, Ctx::Load);
                if let Some(v) = value {
                    self.expr(v, scope, Ctx::Load);
                }
                self.target(target, scope, BindKind::Assign);
            }
            StmtKind::Expr(e) => self.expr(e, scope, Ctx::Load),
            StmtKind::Raise { exc, cause } => {
                for e in exc.iter().chain(cause.iter()) {
                    self.expr(e, scope, Ctx::Load);
                }
            }
            StmtKind::Assert { test, msg } => {
                self.expr(test, scope, Ctx::Load);
                if let Some(m) = msg {
                    self.expr(m, scope, Ctx::Load);
                }
            }
            StmtKind::Import(names) | StmtKind::ImportFrom { names, .. } => {
                let is_from = matches!(s.kind, StmtKind::ImportFrom { .. });
                for a in names {
                    let (name, span) = match &a.asname {
                        Some(id) => (id.name.clone(), id.span),
                        None if is_from => (a.path.clone(), a.path_span),
                        None => (a.bound_name().to_string(), a.path_span),
                    };
                    self.bind(scope, &name, BindKind::Import);
                    self.occ(&name, span, scope, Ctx::Import);
                }
            }
            StmtKind::Global(names) => {
                for n in names {
                    self.scopes[scope].globals.insert(n.name.clone());
                    self.bind(MODULE_SCOPE, &n.name, BindKind::Global);
                    self.occ(&n.name, n.span, scope, Ctx::Decl);
                }
            }
            StmtKind::Nonlocal(names) => {
                for n in names {
                    self.scopes[scope].nonlocals.insert(n.name.clone());
                    self.occ(&n.name, n.span, scope, Ctx::Decl);
                }
            }
            StmtKind::Pass | StmtKind::Break | StmtKind::Continue => {}
        }
    }

    fn target(&mut self, e: &Expr, scope: ScopeId, kind: BindKind) {
        self.target_ctx(e, scope, kind, Ctx::Store)
    }

    fn target_ctx(&mut self, e: &Expr, scope: ScopeId, kind: BindKind, ctx: Ctx) {
        match &e.kind {
            ExprKind::Name(n) => {
                self.bind(scope, n, kind);
                self.occ(n, e.span, scope, ctx);
            }
            ExprKind::Tuple(elts) | ExprKind::List(elts) => {
                for x in elts {
                    self.target_ctx(x, scope, kind, ctx);
                }
            }
            ExprKind::Starred(inner) | ExprKind::Paren(inner) => self.target_ctx(inner, scope, kind, ctx),
            _ => self.expr(e, scope, Ctx::Load),
        }
    }

    fn args(&mut self, args: &[Arg], scope: ScopeId) {
        for a in args {
            if let Arg::Keyword { name, .. } = a {
                self.occ(&name.name, name.span, scope, Ctx::KwArg);
            }
            self.expr(a.value(), scope, Ctx::Load);
        }
    }

    /// Nearest enclosing scope that is not a comprehension (walrus target scope).
    fn walrus_scope(&self, mut scope: ScopeId) -> ScopeId {
        while self.scopes[scope].kind == ScopeKind::Comprehension {
            scope = self.scopes[scope].parent.unwrap_or(MODULE_SCOPE);
        }
        scope
    }

    fn mark_dynamic(&mut self, scope: ScopeId) {
        self.scopes[scope].dynamic = true;
    }

    fn comprehension(&mut self, span: Span, gens: &[Comprehension], scope: ScopeId, elts: &[&Expr]) {
        let Some(first) = gens.first() else { return };
        self.expr(&first.iter, scope, Ctx::Load);
        let inner = self.new_scope(ScopeKind::Comprehension, scope, span);
        for (i, g) in gens.iter().enumerate() {
            if i > 0 {
                self.expr(&g.iter, inner, Ctx::Load);
            }
            self.target(&g.target, inner, BindKind::Comprehension);
            for c in &g.ifs {
                self.expr(c, inner, Ctx::Load);
            }
        }
        for e in elts {
            self.expr(e, inner, Ctx::Load);
        }
    }

    fn expr(&mut self, e: &Expr, scope: ScopeId, ctx: Ctx) {
        match &e.kind {
            ExprKind::Name(n) => self.occ(n, e.span, scope, ctx),
            ExprKind::Attribute { value, attr } => {
                self.expr(value, scope, Ctx::Load);
                self.occ(&attr.name, attr.span, scope, Ctx::Attr);
            }
            ExprKind::Call { func, args } => {
                if let ExprKind::Name(n) = &func.kind {
                    if DYNAMIC_CALLS.contains(&n.as_str()) {
                        self.mark_dynamic(scope);
                    }
                }
                self.expr(func, scope, Ctx::Load);
                self.args(args, scope);
            }
            ExprKind::NamedExpr { target, value } => {
                self.expr(value, scope, Ctx::Load);
                let ws = self.walrus_scope(scope);
                if let ExprKind::Name(n) = &target.kind {
                    self.bind(ws, n, BindKind::Walrus);
                    self.occ(n, target.span, ws, Ctx::Store);
                }
            }
            ExprKind::Lambda { params, body } => {
                let inner = self.new_scope(ScopeKind::Lambda, scope, e.span);
                self.params(params, scope, inner);
                self.expr(body, inner, Ctx::Load);
            }
            ExprKind::ListComp { elt, generators }
            | ExprKind::SetComp { elt, generators }
            | ExprKind::GeneratorExp { elt, generators } => {
                self.comprehension(e.span, generators, scope, &[&**elt]);
            }
            ExprKind::DictComp { key, value, generators } => {
                self.comprehension(e.span, generators, scope, &[&**key, &**value]);
            }
            ExprKind::Dict(items) => {
                for it in items {
                    match it {
                        DictItem::Pair(k, v) => {
                            self.expr(k, scope, Ctx::Load);
                            self.expr(v, scope, Ctx::Load);
                        }
                        DictItem::Unpack(x) => self.expr(x, scope, Ctx::Load),
                    }
                }
            }
            _ => {
                for c in e.children() {
                    self.expr(c, scope, Ctx::Load);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfprobe_syntax::parse;

    fn table(src: &str) -> ScopeTable {
        ScopeTable::build(&parse(src).unwrap())
    }

    #[test]
    fn resolves_locals_globals_and_builtins() {
        let t = table("g = 1\ndef f(a):\n    b = a + g\n    return len(b)\n");
        let f = t.scopes.iter().position(|s| s.kind == ScopeKind::Function).unwrap();
        let res: Vec<_> = t.occurrences.iter().map(|o| (o.name.as_str(), o.resolution)).collect();
        assert!(res.contains(&("b", Resolution::Bound(f))));
        assert!(res.contains(&("g", Resolution::Bound(MODULE_SCOPE))));
        assert!(res.contains(&("len", Resolution::Builtin)));
        assert_eq!(t.renameable_locals(f), vec!["b"]);
    }

    #[test]
    fn comprehension_and_class_scoping() {
        let src = "def f(xs):\n    out = [y * 2 for y in xs]\n    class K:\n        z = 1\n        w = [z for _ in xs]\n    return out\n";
        let t = table(src);
        let f = t.scopes.iter().position(|s| s.kind == ScopeKind::Function).unwrap();
        // `z` inside the class-level comprehension skips the class scope.
        let z_uses: Vec<_> = t.occurrences.iter().filter(|o| o.name == "z").map(|o| o.resolution).collect();
        assert_eq!(z_uses[1], Resolution::Unbound);
        let names = t.renameable_locals(f);
        assert!(names.contains(&"out".to_string()));
        assert!(names.contains(&"y".to_string()));
        assert!(!names.contains(&"K".to_string()));
        assert!(!names.contains(&"z".to_string()));
    }

    #[test]
    fn exclusions() {
        let t = table("def f(a):\n    global q\n    q = 1\n    r = eval('a')\n    return r\n");
        let f = t.scopes.iter().position(|s| s.kind == ScopeKind::Function).unwrap();
        assert!(t.renameable_locals(f).is_empty());
        let t = table("def f(a):\n    s = 0\n    g = lambda s: s + 1\n    return g(s)\n");
        let f = t.scopes.iter().position(|s| s.kind == ScopeKind::Function).unwrap();
        // `s` is also a lambda parameter, so renaming it by name is unsafe.
        assert_eq!(t.renameable_locals(f), vec!["g"]);
    }
}
