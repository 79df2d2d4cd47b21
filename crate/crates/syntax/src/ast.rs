//! Typed syntax nodes. Every node records the span of source it covers;
//! the exact text (including trivia) lives in the tree's token stream.

use crate::span::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    /// Body written on the header line (`if x: return y`).
    pub inline: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    FunctionDef(FunctionDef),
    ClassDef(ClassDef),
    If(If),
    For(For),
    While(While),
    Try(Try),
    With(With),
    Return(Option<Expr>),
    Delete(Vec<Expr>),
    Assign { targets: Vec<Expr>, value: Expr },
    AugAssign { target: Expr, op: String, value: Expr },
    AnnAssign { target: Expr, annotation: Expr, value: Option<Expr> },
    Expr(Expr),
    Pass,
    Break,
    Continue,
    Raise { exc: Option<Expr>, cause: Option<Expr> },
    Assert { test: Expr, msg: Option<Expr> },
    Import(Vec<Alias>),
    ImportFrom { module: Option<String>, level: usize, names: Vec<Alias> },
    Global(Vec<Ident>),
    Nonlocal(Vec<Ident>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alias {
    /// Dotted module or member path as written.
    pub path: String,
    pub path_span: Span,
    pub asname: Option<Ident>,
}

impl Alias {
    /// Name bound by this alias in an `import` statement.
    pub fn bound_name(&self) -> &str {
        match &self.asname {
            Some(a) => &a.name,
            None => self.path.split('.').next().unwrap_or(&self.path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub decorators: Vec<Expr>,
    pub name: Ident,
    pub params: Vec<Param>,
    pub returns: Option<Expr>,
    pub body: Block,
    /// `def ... :` including the colon.
    pub header: Span,
    pub is_async: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Normal,
    VarArgs,
    KwArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: Ident,
    pub kind: ParamKind,
    pub annotation: Option<Expr>,
    pub default: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub decorators: Vec<Expr>,
    pub name: Ident,
    pub bases: Vec<Arg>,
    pub body: Block,
    pub header: Span,
}

/// A clause introduced by `elif`, `else`, `finally` or similar.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub body: Block,
    /// Keyword through colon.
    pub header: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElifClause {
    pub test: Expr,
    pub body: Block,
    pub header: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct If {
    pub test: Expr,
    pub body: Block,
    pub elifs: Vec<ElifClause>,
    pub orelse: Option<Clause>,
    /// `if <test>:`
    pub header: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct For {
    pub target: Expr,
    pub iter: Expr,
    pub body: Block,
    pub orelse: Option<Clause>,
    pub header: Span,
    pub is_async: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct While {
    pub test: Expr,
    pub body: Block,
    pub orelse: Option<Clause>,
    pub header: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Handler {
    pub typ: Option<Expr>,
    pub name: Option<Ident>,
    pub body: Block,
    pub header: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Try {
    pub body: Block,
    pub handlers: Vec<Handler>,
    pub orelse: Option<Clause>,
    pub finalbody: Option<Clause>,
    pub header: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithItem {
    pub context: Expr,
    pub vars: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct With {
    pub items: Vec<WithItem>,
    pub body: Block,
    pub header: Span,
    pub is_async: bool,
}

impl Stmt {
    /// Nested statement blocks in source order.
    pub fn blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::FunctionDef(f) => vec![&f.body],
            StmtKind::ClassDef(c) => vec![&c.body],
            StmtKind::If(i) => {
                let mut v = vec![&i.body];
                v.extend(i.elifs.iter().map(|e| &e.body));
                v.extend(i.orelse.iter().map(|c| &c.body));
                v
            }
            StmtKind::For(f) => {
                let mut v = vec![&f.body];
                v.extend(f.orelse.iter().map(|c| &c.body));
                v
            }
            StmtKind::While(w) => {
                let mut v = vec![&w.body];
                v.extend(w.orelse.iter().map(|c| &c.body));
                v
            }
            StmtKind::Try(t) => {
                let mut v = vec![&t.body];
                v.extend(t.handlers.iter().map(|h| &h.body));
                v.extend(t.orelse.iter().map(|c| &c.body));
                v.extend(t.finalbody.iter().map(|c| &c.body));
                v
            }
            StmtKind::With(w) => vec![&w.body],
            _ => Vec::new(),
        }
    }

    pub fn is_compound(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::FunctionDef(_)
                | StmtKind::ClassDef(_)
                | StmtKind::If(_)
                | StmtKind::For(_)
                | StmtKind::While(_)
                | StmtKind::Try(_)
                | StmtKind::With(_)
        )
    }

    /// Header span for compound statements, whole span for simple ones.
    pub fn header_span(&self) -> Span {
        match &self.kind {
            StmtKind::FunctionDef(f) => f.header,
            StmtKind::ClassDef(c) => c.header,
            StmtKind::If(i) => i.header,
            StmtKind::For(f) => f.header,
            StmtKind::While(w) => w.header,
            StmtKind::Try(t) => t.header,
            StmtKind::With(w) => w.header,
            _ => self.span,
        }
    }

    /// Expressions owned by this statement itself (for compound statements,
    /// the header parts), excluding nested blocks. In source order except
    /// that an assignment's value follows its targets.
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = Vec::new();
        match &self.kind {
            StmtKind::FunctionDef(f) => {
                out.extend(f.decorators.iter());
                for p in &f.params {
                    out.extend(p.annotation.iter());
                    out.extend(p.default.iter());
                }
                out.extend(f.returns.iter());
            }
            StmtKind::ClassDef(c) => {
                out.extend(c.decorators.iter());
                out.extend(c.bases.iter().map(Arg::value));
            }
            StmtKind::If(i) => {
                out.push(&i.test);
                out.extend(i.elifs.iter().map(|e| &e.test));
            }
            StmtKind::For(f) => {
                out.push(&f.target);
                out.push(&f.iter);
            }
            StmtKind::While(w) => out.push(&w.test),
            StmtKind::Try(t) => out.extend(t.handlers.iter().filter_map(|h| h.typ.as_ref())),
            StmtKind::With(w) => {
                for it in &w.items {
                    out.push(&it.context);
                    out.extend(it.vars.iter());
                }
            }
            StmtKind::Return(v) => out.extend(v.iter()),
            StmtKind::Delete(ts) => out.extend(ts.iter()),
            StmtKind::Assign { targets, value } => {
                out.extend(targets.iter());
                out.push(value);
            }
            StmtKind::AugAssign { target, value, .. } => {
                out.push(target);
                out.push(value);
            }
            StmtKind::AnnAssign {
                target,
                annotation,
                value,
            } => {
                out.push(target);
                out.push(annotation);
                out.extend(value.iter());
            }
            StmtKind::Expr(e) => out.push(e),
            StmtKind::Raise { exc, cause } => {
                out.extend(exc.iter());
                out.extend(cause.iter());
            }
            StmtKind::Assert { test, msg } => {
                out.push(test);
                out.extend(msg.iter());
            }
            StmtKind::Pass
            | StmtKind::Break
            | StmtKind::Continue
            | StmtKind::Import(_)
            | StmtKind::ImportFrom { .. }
            | StmtKind::Global(_)
            | StmtKind::Nonlocal(_) => {}
        }
        out
    }

    pub fn as_function(&self) -> Option<&FunctionDef> {
        match &self.kind {
            StmtKind::FunctionDef(f) => Some(f),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            StmtKind::FunctionDef(_) => "FunctionDef",
            StmtKind::ClassDef(_) => "ClassDef",
            StmtKind::If(_) => "If",
            StmtKind::For(_) => "For",
            StmtKind::While(_) => "While",
            StmtKind::Try(_) => "Try",
            StmtKind::With(_) => "With",
            StmtKind::Return(_) => "Return",
            StmtKind::Delete(_) => "Delete",
            StmtKind::Assign { .. } => "Assign",
            StmtKind::AugAssign { .. } => "AugAssign",
            StmtKind::AnnAssign { .. } => "AnnAssign",
            StmtKind::Expr(_) => "Expr",
            StmtKind::Pass => "Pass",
            StmtKind::Break => "Break",
            StmtKind::Continue => "Continue",
            StmtKind::Raise { .. } => "Raise",
            StmtKind::Assert { .. } => "Assert",
            StmtKind::Import(_) => "Import",
            StmtKind::ImportFrom { .. } => "ImportFrom",
            StmtKind::Global(_) => "Global",
            StmtKind::Nonlocal(_) => "Nonlocal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    Is,
    IsNot,
    In,
    NotIn,
}

impl CmpOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }

    /// The operator whose result is the logical negation of this one.
    pub fn complement(&self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::NotEq,
            CmpOp::NotEq => CmpOp::Eq,
            CmpOp::Lt => CmpOp::GtE,
            CmpOp::GtE => CmpOp::Lt,
            CmpOp::Gt => CmpOp::LtE,
            CmpOp::LtE => CmpOp::Gt,
            CmpOp::Is => CmpOp::IsNot,
            CmpOp::IsNot => CmpOp::Is,
            CmpOp::In => CmpOp::NotIn,
            CmpOp::NotIn => CmpOp::In,
        }
    }

    pub fn parse(s: &str) -> Option<CmpOp> {
        Some(match s {
            "==" => CmpOp::Eq,
            "!=" => CmpOp::NotEq,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::LtE,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::GtE,
            "is" => CmpOp::Is,
            "is not" => CmpOp::IsNot,
            "in" => CmpOp::In,
            "not in" => CmpOp::NotIn,
            _ => return None,
        })
    }

    pub const ALL: [CmpOp; 10] = [
        CmpOp::Eq,
        CmpOp::NotEq,
        CmpOp::Lt,
        CmpOp::LtE,
        CmpOp::Gt,
        CmpOp::GtE,
        CmpOp::Is,
        CmpOp::IsNot,
        CmpOp::In,
        CmpOp::NotIn,
    ];
}

impl std::fmt::Display for CmpOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOpKind {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOpKind {
    Not,
    Neg,
    Pos,
    Invert,
}

/// An operator occurrence; `span` covers all of its tokens (`not in` is two).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmpOpSite {
    pub op: CmpOp,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub target: Expr,
    pub iter: Expr,
    pub ifs: Vec<Expr>,
    pub is_async: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Positional(Expr),
    Keyword { name: Ident, value: Expr },
    Star(Expr),
    DoubleStar(Expr),
}

impl Arg {
    pub fn value(&self) -> &Expr {
        match self {
            Arg::Positional(e) | Arg::Star(e) | Arg::DoubleStar(e) => e,
            Arg::Keyword { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictItem {
    Pair(Expr, Expr),
    Unpack(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(String),
    Number(String),
    /// One or more adjacent string literals. `fields` holds the parsed
    /// replacement-field expressions of any f-string parts.
    Str { fstring: bool, fields: Vec<Expr> },
    /// `None`, `True`, `False`.
    Constant(String),
    Ellipsis,
    BoolOp { op: BoolOpKind, values: Vec<Expr>, op_spans: Vec<Span> },
    NamedExpr { target: Box<Expr>, value: Box<Expr> },
    BinOp { left: Box<Expr>, op: String, right: Box<Expr> },
    UnaryOp { op: UnaryOpKind, op_span: Span, operand: Box<Expr> },
    Lambda { params: Vec<Param>, body: Box<Expr> },
    IfExp { body: Box<Expr>, test: Box<Expr>, orelse: Box<Expr> },
    Dict(Vec<DictItem>),
    Set(Vec<Expr>),
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    ListComp { elt: Box<Expr>, generators: Vec<Comprehension> },
    SetComp { elt: Box<Expr>, generators: Vec<Comprehension> },
    DictComp { key: Box<Expr>, value: Box<Expr>, generators: Vec<Comprehension> },
    GeneratorExp { elt: Box<Expr>, generators: Vec<Comprehension> },
    Await(Box<Expr>),
    Yield(Option<Box<Expr>>),
    YieldFrom(Box<Expr>),
    Compare { left: Box<Expr>, ops: Vec<CmpOpSite>, comparators: Vec<Expr> },
    Call { func: Box<Expr>, args: Vec<Arg> },
    Attribute { value: Box<Expr>, attr: Ident },
    Subscript { value: Box<Expr>, index: Box<Expr> },
    Slice { lower: Option<Box<Expr>>, upper: Option<Box<Expr>>, step: Option<Box<Expr>> },
    Starred(Box<Expr>),
    /// A parenthesized expression that is not a tuple or generator.
    Paren(Box<Expr>),
}

impl Expr {
    /// Strip any number of redundant parentheses.
    pub fn unparen(&self) -> &Expr {
        let mut e = self;
        while let ExprKind::Paren(inner) = &e.kind {
            e = inner;
        }
        e
    }

    pub fn as_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Name(n) => Some(n),
            _ => None,
        }
    }

    /// Direct child expressions. Lambda parameter defaults and
    /// comprehension parts are included; a comprehension's element comes
    /// before its generators.
    pub fn children(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        match &self.kind {
            ExprKind::Name(_)
            | ExprKind::Number(_)
            | ExprKind::Constant(_)
            | ExprKind::Ellipsis => {}
            ExprKind::Str { fields, .. } => out.extend(fields.iter()),
            ExprKind::BoolOp { values, .. } => out.extend(values.iter()),
            ExprKind::NamedExpr { target, value } => {
                out.push(&**target);
                out.push(&**value);
            }
            ExprKind::BinOp { left, right, .. } => {
                out.push(&**left);
                out.push(&**right);
            }
            ExprKind::UnaryOp { operand, .. } => out.push(&**operand),
            ExprKind::Lambda { params, body } => {
                for p in params {
                    out.extend(p.default.iter());
                }
                out.push(&**body);
            }
            ExprKind::IfExp { body, test, orelse } => {
                out.push(&**body);
                out.push(&**test);
                out.push(&**orelse);
            }
            ExprKind::Dict(items) => {
                for it in items {
                    match it {
                        DictItem::Pair(k, v) => {
                            out.push(k);
                            out.push(v);
                        }
                        DictItem::Unpack(e) => out.push(e),
                    }
                }
            }
            ExprKind::Set(v) | ExprKind::List(v) | ExprKind::Tuple(v) => out.extend(v.iter()),
            ExprKind::ListComp { elt, generators }
            | ExprKind::SetComp { elt, generators }
            | ExprKind::GeneratorExp { elt, generators } => {
                out.push(&**elt);
                push_generators(&mut out, generators);
            }
            ExprKind::DictComp { key, value, generators } => {
                out.push(&**key);
                out.push(&**value);
                push_generators(&mut out, generators);
            }
            ExprKind::Await(e) | ExprKind::YieldFrom(e) | ExprKind::Starred(e) | ExprKind::Paren(e) => {
                out.push(&**e)
            }
            ExprKind::Yield(e) => out.extend(e.iter().map(|b| &**b)),
            ExprKind::Compare { left, comparators, .. } => {
                out.push(&**left);
                out.extend(comparators.iter());
            }
            ExprKind::Call { func, args } => {
                out.push(&**func);
                out.extend(args.iter().map(|a| a.value()));
            }
            ExprKind::Attribute { value, .. } => out.push(&**value),
            ExprKind::Subscript { value, index } => {
                out.push(&**value);
                out.push(&**index);
            }
            ExprKind::Slice { lower, upper, step } => {
                for p in [lower, upper, step].into_iter().flatten() {
                    out.push(&**p);
                }
            }
        }
        out
    }

    /// Pre-order walk over this expression and all descendants.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn contains_call(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if matches!(e.kind, ExprKind::Call { .. }) {
                found = true;
            }
        });
        found
    }
}

fn push_generators<'a>(out: &mut Vec<&'a Expr>, generators: &'a [Comprehension]) {
    for g in generators {
        out.push(&g.target);
        out.push(&g.iter);
        out.extend(g.ifs.iter());
    }
}
