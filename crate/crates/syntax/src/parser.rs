//! Recursive-descent parser over the lossless token stream.

use crate::ast::*;
use crate::error::SyntaxError;
use crate::lexer::{is_keyword, tokenize_fragment, Token, TokenKind};
use crate::span::{Position, Span};

type PResult<T> = Result<T, SyntaxError>;

pub(crate) struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

const AUG_OPS: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
];

impl<'a> Parser<'a> {
    pub(crate) fn new(tokens: &'a [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    // ---- token helpers ----

    fn peek(&self) -> &'a Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &'a Token {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> &'a Token {
        let t = self.peek();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_op(&self, op: &str) -> bool {
        self.peek().is_op(op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek().is_keyword(kw)
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().kind == kind
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_here(&self, msg: impl Into<String>) -> SyntaxError {
        let t = self.peek();
        SyntaxError::new(t.span.start_line, t.span.start_col, msg)
    }

    fn expect_op(&mut self, op: &str) -> PResult<&'a Token> {
        if self.at_op(op) {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected '{op}', found {}", describe(self.peek()))))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<&'a Token> {
        if self.at_kw(kw) {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected '{kw}', found {}", describe(self.peek()))))
        }
    }

    fn expect_kind(&mut self, kind: TokenKind, what: &str) -> PResult<&'a Token> {
        if self.at_kind(kind) {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn expect_ident(&mut self) -> PResult<Ident> {
        let t = self.peek();
        if t.kind == TokenKind::Name && !is_keyword(&t.text) {
            self.bump();
            Ok(Ident {
                name: t.text.clone(),
                span: t.span,
            })
        } else {
            Err(self.error_here(format!("expected identifier, found {}", describe(t))))
        }
    }

    fn start(&self) -> Position {
        self.peek().span.start()
    }

    fn prev_end(&self) -> Position {
        // Skip zero-width structural tokens when locating the last real token.
        let mut i = self.pos;
        while i > 0 {
            i -= 1;
            let t = &self.tokens[i];
            if !matches!(t.kind, TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent) {
                return t.span.end();
            }
        }
        Position::START
    }

    fn span_from(&self, start: Position) -> Span {
        Span::new(start, self.prev_end())
    }

    fn can_start_expr(&self) -> bool {
        let t = self.peek();
        match t.kind {
            TokenKind::Number | TokenKind::String => true,
            TokenKind::Name => {
                !is_keyword(&t.text)
                    || matches!(
                        t.text.as_str(),
                        "None" | "True" | "False" | "lambda" | "not" | "await" | "yield"
                    )
            }
            TokenKind::Op => matches!(t.text.as_str(), "(" | "[" | "{" | "-" | "+" | "~" | "*" | "..."),
            _ => false,
        }
    }

    // ---- statements ----

    pub(crate) fn parse_module(&mut self) -> PResult<Module> {
        let mut body = Vec::new();
        while !self.at_kind(TokenKind::EndMarker) {
            if self.at_kind(TokenKind::Newline) {
                self.bump();
                continue;
            }
            if self.at_kind(TokenKind::Indent) {
                return Err(self.error_here("unexpected indent"));
            }
            body.extend(self.parse_statement()?);
        }
        Ok(Module { body })
    }

    fn parse_statement(&mut self) -> PResult<Vec<Stmt>> {
        let t = self.peek();
        if t.is_op("@") {
            return Ok(vec![self.parse_decorated()?]);
        }
        if t.kind == TokenKind::Name {
            match t.text.as_str() {
                "def" => return Ok(vec![self.parse_funcdef(Vec::new(), None)?]),
                "class" => return Ok(vec![self.parse_classdef(Vec::new(), None)?]),
                "if" => return Ok(vec![self.parse_if()?]),
                "while" => return Ok(vec![self.parse_while()?]),
                "for" => return Ok(vec![self.parse_for(None)?]),
                "try" => return Ok(vec![self.parse_try()?]),
                "with" => return Ok(vec![self.parse_with(None)?]),
                "async" => {
                    let start = self.start();
                    self.bump();
                    let next = self.peek();
                    return Ok(vec![match next.text.as_str() {
                        "def" => self.parse_funcdef(Vec::new(), Some(start))?,
                        "for" => self.parse_for(Some(start))?,
                        "with" => self.parse_with(Some(start))?,
                        _ => return Err(self.error_here("expected 'def', 'for' or 'with' after 'async'")),
                    }]);
                }
                _ => {}
            }
        }
        self.parse_simple_stmts()
    }

    fn parse_simple_stmts(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.parse_small_stmt()?];
        while self.eat_op(";") {
            if self.at_kind(TokenKind::Newline) {
                break;
            }
            out.push(self.parse_small_stmt()?);
        }
        self.expect_kind(TokenKind::Newline, "end of line")?;
        Ok(out)
    }

    fn parse_block(&mut self) -> PResult<Block> {
        if self.at_kind(TokenKind::Newline) {
            self.bump();
            self.expect_kind(TokenKind::Indent, "an indented block")?;
            let mut stmts = Vec::new();
            while !self.at_kind(TokenKind::Dedent) && !self.at_kind(TokenKind::EndMarker) {
                if self.at_kind(TokenKind::Newline) {
                    self.bump();
                    continue;
                }
                stmts.extend(self.parse_statement()?);
            }
            self.expect_kind(TokenKind::Dedent, "dedent")?;
            Ok(Block {
                stmts,
                inline: false,
            })
        } else {
            Ok(Block {
                stmts: self.parse_simple_stmts()?,
                inline: true,
            })
        }
    }

    fn block_end(&self, block: &Block, fallback: Span) -> Position {
        block.stmts.last().map(|s| s.span.end()).unwrap_or(fallback.end())
    }

    fn parse_decorated(&mut self) -> PResult<Stmt> {
        let start = self.start();
        let mut decorators = Vec::new();
        while self.eat_op("@") {
            decorators.push(self.parse_namedexpr_test()?);
            self.expect_kind(TokenKind::Newline, "end of line after decorator")?;
        }
        if self.at_kw("def") {
            self.parse_funcdef(decorators, Some(start))
        } else if self.at_kw("class") {
            self.parse_classdef(decorators, Some(start))
        } else if self.at_kw("async") {
            self.bump();
            self.parse_funcdef(decorators, Some(start))
        } else {
            Err(self.error_here("expected 'def' or 'class' after decorator"))
        }
    }

    fn parse_funcdef(&mut self, decorators: Vec<Expr>, start: Option<Position>) -> PResult<Stmt> {
        let is_async = self.pos > 0 && self.tokens[self.pos - 1].is_keyword("async");
        let kw_start = self.start();
        self.expect_kw("def")?;
        let start = start.unwrap_or(kw_start);
        let name = self.expect_ident()?;
        self.expect_op("(")?;
        let params = self.parse_params(")", true)?;
        self.expect_op(")")?;
        let returns = if self.eat_op("->") {
            Some(self.parse_test()?)
        } else {
            None
        };
        self.expect_op(":")?;
        let header = Span::new(kw_start, self.prev_end());
        let body = self.parse_block()?;
        let end = self.block_end(&body, header);
        Ok(Stmt {
            kind: StmtKind::FunctionDef(FunctionDef {
                decorators,
                name,
                params,
                returns,
                body,
                header,
                is_async,
            }),
            span: Span::new(start, end),
        })
    }

    fn parse_params(&mut self, close: &str, annotations: bool) -> PResult<Vec<Param>> {
        let mut params = Vec::new();
        while !self.at_op(close) {
            if self.eat_op("/") {
            } else if self.eat_op("*") {
                if !self.at_op(",") && !self.at_op(close) {
                    let name = self.expect_ident()?;
                    let annotation = self.parse_annotation(annotations)?;
                    params.push(Param {
                        name,
                        kind: ParamKind::VarArgs,
                        annotation,
                        default: None,
                    });
                }
            } else if self.eat_op("**") {
                let name = self.expect_ident()?;
                let annotation = self.parse_annotation(annotations)?;
                params.push(Param {
                    name,
                    kind: ParamKind::KwArgs,
                    annotation,
                    default: None,
                });
            } else {
                let name = self.expect_ident()?;
                let annotation = self.parse_annotation(annotations)?;
                let default = if self.eat_op("=") {
                    Some(self.parse_test()?)
                } else {
                    None
                };
                params.push(Param {
                    name,
                    kind: ParamKind::Normal,
                    annotation,
                    default,
                });
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(params)
    }

    fn parse_annotation(&mut self, allowed: bool) -> PResult<Option<Expr>> {
        if allowed && self.eat_op(":") {
            Ok(Some(self.parse_test()?))
        } else {
            Ok(None)
        }
    }

    fn parse_classdef(&mut self, decorators: Vec<Expr>, start: Option<Position>) -> PResult<Stmt> {
        let kw_start = self.start();
        self.expect_kw("class")?;
        let start = start.unwrap_or(kw_start);
        let name = self.expect_ident()?;
        let bases = if self.eat_op("(") {
            let args = self.parse_call_args()?;
            self.expect_op(")")?;
            args
        } else {
            Vec::new()
        };
        self.expect_op(":")?;
        let header = Span::new(kw_start, self.prev_end());
        let body = self.parse_block()?;
        let end = self.block_end(&body, header);
        Ok(Stmt {
            kind: StmtKind::ClassDef(ClassDef {
                decorators,
                name,
                bases,
                body,
                header,
            }),
            span: Span::new(start, end),
        })
    }

    fn parse_else_clause(&mut self, kw: &str) -> PResult<Option<Clause>> {
        if !self.at_kw(kw) {
            return Ok(None);
        }
        let start = self.start();
        self.bump();
        self.expect_op(":")?;
        let header = Span::new(start, self.prev_end());
        let body = self.parse_block()?;
        Ok(Some(Clause { body, header }))
    }

    fn parse_if(&mut self) -> PResult<Stmt> {
        let start = self.start();
        self.expect_kw("if")?;
        let test = self.parse_namedexpr_test()?;
        self.expect_op(":")?;
        let header = Span::new(start, self.prev_end());
        let body = self.parse_block()?;
        let mut end = self.block_end(&body, header);
        let mut elifs = Vec::new();
        while self.at_kw("elif") {
            let estart = self.start();
            self.bump();
            let etest = self.parse_namedexpr_test()?;
            self.expect_op(":")?;
            let eheader = Span::new(estart, self.prev_end());
            let ebody = self.parse_block()?;
            end = self.block_end(&ebody, eheader);
            elifs.push(ElifClause {
                test: etest,
                body: ebody,
                header: eheader,
            });
        }
        let orelse = self.parse_else_clause("else")?;
        if let Some(c) = &orelse {
            end = self.block_end(&c.body, c.header);
        }
        Ok(Stmt {
            kind: StmtKind::If(If {
                test,
                body,
                elifs,
                orelse,
                header,
            }),
            span: Span::new(start, end),
        })
    }

    fn parse_while(&mut self) -> PResult<Stmt> {
        let start = self.start();
        self.expect_kw("while")?;
        let test = self.parse_namedexpr_test()?;
        self.expect_op(":")?;
        let header = Span::new(start, self.prev_end());
        let body = self.parse_block()?;
        let mut end = self.block_end(&body, header);
        let orelse = self.parse_else_clause("else")?;
        if let Some(c) = &orelse {
            end = self.block_end(&c.body, c.header);
        }
        Ok(Stmt {
            kind: StmtKind::While(While {
                test,
                body,
                orelse,
                header,
            }),
            span: Span::new(start, end),
        })
    }

    fn parse_for(&mut self, async_start: Option<Position>) -> PResult<Stmt> {
        let kw_start = self.start();
        self.expect_kw("for")?;
        let start = async_start.unwrap_or(kw_start);
        let target = self.parse_target_list()?;
        self.expect_kw("in")?;
        let iter = self.parse_star_expressions()?;
        self.expect_op(":")?;
        let header = Span::new(start, self.prev_end());
        let body = self.parse_block()?;
        let mut end = self.block_end(&body, header);
        let orelse = self.parse_else_clause("else")?;
        if let Some(c) = &orelse {
            end = self.block_end(&c.body, c.header);
        }
        Ok(Stmt {
            kind: StmtKind::For(For {
                target,
                iter,
                body,
                orelse,
                header,
                is_async: async_start.is_some(),
            }),
            span: Span::new(start, end),
        })
    }

    fn parse_try(&mut self) -> PResult<Stmt> {
        let start = self.start();
        self.expect_kw("try")?;
        self.expect_op(":")?;
        let header = Span::new(start, self.prev_end());
        let body = self.parse_block()?;
        let mut end = self.block_end(&body, header);
        let mut handlers = Vec::new();
        while self.at_kw("except") {
            let hstart = self.start();
            self.bump();
            let mut typ = None;
            let mut name = None;
            if !self.at_op(":") {
                typ = Some(self.parse_test()?);
                if self.eat_op(",") {
                    // Python 2 form is not valid Python 3.
                    return Err(self.error_here("multiple exception types must be parenthesized"));
                }
                if self.eat_kw("as") {
                    name = Some(self.expect_ident()?);
                }
            }
            self.expect_op(":")?;
            let hheader = Span::new(hstart, self.prev_end());
            let hbody = self.parse_block()?;
            end = self.block_end(&hbody, hheader);
            handlers.push(Handler {
                typ,
                name,
                body: hbody,
                header: hheader,
            });
        }
        let orelse = self.parse_else_clause("else")?;
        if let Some(c) = &orelse {
            end = self.block_end(&c.body, c.header);
        }
        let finalbody = self.parse_else_clause("finally")?;
        if let Some(c) = &finalbody {
            end = self.block_end(&c.body, c.header);
        }
        if handlers.is_empty() && finalbody.is_none() {
            return Err(self.error_here("expected 'except' or 'finally' block"));
        }
        Ok(Stmt {
            kind: StmtKind::Try(Try {
                body,
                handlers,
                orelse,
                finalbody,
                header,
            }),
            span: Span::new(start, end),
        })
    }

    fn parse_with(&mut self, async_start: Option<Position>) -> PResult<Stmt> {
        let kw_start = self.start();
        self.expect_kw("with")?;
        let start = async_start.unwrap_or(kw_start);
        let mut items = Vec::new();
        loop {
            let context = self.parse_test()?;
            let vars = if self.eat_kw("as") {
                Some(self.parse_target()?)
            } else {
                None
            };
            items.push(WithItem { context, vars });
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(":")?;
        let header = Span::new(start, self.prev_end());
        let body = self.parse_block()?;
        let end = self.block_end(&body, header);
        Ok(Stmt {
            kind: StmtKind::With(With {
                items,
                body,
                header,
                is_async: async_start.is_some(),
            }),
            span: Span::new(start, end),
        })
    }

    fn parse_small_stmt(&mut self) -> PResult<Stmt> {
        let start = self.start();
        let t = self.peek();
        let kind = if t.kind == TokenKind::Name {
            match t.text.as_str() {
                "pass" => {
                    self.bump();
                    StmtKind::Pass
                }
                "break" => {
                    self.bump();
                    StmtKind::Break
                }
                "continue" => {
                    self.bump();
                    StmtKind::Continue
                }
                "return" => {
                    self.bump();
                    let value = if self.can_start_expr() {
                        Some(self.parse_star_expressions()?)
                    } else {
                        None
                    };
                    StmtKind::Return(value)
                }
                "raise" => {
                    self.bump();
                    let mut exc = None;
                    let mut cause = None;
                    if self.can_start_expr() {
                        exc = Some(self.parse_test()?);
                        if self.eat_kw("from") {
                            cause = Some(self.parse_test()?);
                        }
                    }
                    StmtKind::Raise { exc, cause }
                }
                "global" | "nonlocal" => {
                    let is_global = t.text == "global";
                    self.bump();
                    let mut names = vec![self.expect_ident()?];
                    while self.eat_op(",") {
                        names.push(self.expect_ident()?);
                    }
                    if is_global {
                        StmtKind::Global(names)
                    } else {
                        StmtKind::Nonlocal(names)
                    }
                }
                "del" => {
                    self.bump();
                    let target = self.parse_target_list()?;
                    let targets = match target.kind {
                        ExprKind::Tuple(elts) if !self.tokens[self.pos - 1].is_op(")") => elts,
                        _ => vec![target],
                    };
                    StmtKind::Delete(targets)
                }
                "assert" => {
                    self.bump();
                    let test = self.parse_test()?;
                    let msg = if self.eat_op(",") {
                        Some(self.parse_test()?)
                    } else {
                        None
                    };
                    StmtKind::Assert { test, msg }
                }
                "import" => {
                    self.bump();
                    let mut names = vec![self.parse_alias(true)?];
                    while self.eat_op(",") {
                        names.push(self.parse_alias(true)?);
                    }
                    StmtKind::Import(names)
                }
                "from" => self.parse_import_from()?,
                _ => return self.parse_expr_stmt(start),
            }
        } else {
            return self.parse_expr_stmt(start);
        };
        Ok(Stmt {
            kind,
            span: self.span_from(start),
        })
    }

    fn parse_dotted_name(&mut self) -> PResult<(String, Span)> {
        let start = self.start();
        let mut name = self.expect_ident()?.name;
        while self.at_op(".") {
            self.bump();
            name.push('.');
            name.push_str(&self.expect_ident()?.name);
        }
        Ok((name, self.span_from(start)))
    }

    fn parse_alias(&mut self, dotted: bool) -> PResult<Alias> {
        let (path, path_span) = if dotted {
            self.parse_dotted_name()?
        } else {
            let id = self.expect_ident()?;
            (id.name, id.span)
        };
        let asname = if self.eat_kw("as") {
            Some(self.expect_ident()?)
        } else {
            None
        };
        Ok(Alias {
            path,
            path_span,
            asname,
        })
    }

    fn parse_import_from(&mut self) -> PResult<StmtKind> {
        self.expect_kw("from")?;
        let mut level = 0;
        loop {
            if self.eat_op(".") {
                level += 1;
            } else if self.eat_op("...") {
                level += 3;
            } else {
                break;
            }
        }
        let module = if self.at_kw("import") {
            None
        } else {
            Some(self.parse_dotted_name()?.0)
        };
        self.expect_kw("import")?;
        let mut names = Vec::new();
        if self.eat_op("*") {
            return Ok(StmtKind::ImportFrom {
                module,
                level,
                names,
            });
        }
        let parens = self.eat_op("(");
        loop {
            names.push(self.parse_alias(false)?);
            if !self.eat_op(",") {
                break;
            }
            if parens && self.at_op(")") {
                break;
            }
        }
        if parens {
            self.expect_op(")")?;
        }
        Ok(StmtKind::ImportFrom {
            module,
            level,
            names,
        })
    }

    fn parse_yield_or_star_expressions(&mut self) -> PResult<Expr> {
        if self.at_kw("yield") {
            self.parse_yield()
        } else {
            self.parse_star_expressions()
        }
    }

    fn parse_expr_stmt(&mut self, start: Position) -> PResult<Stmt> {
        let first = self.parse_yield_or_star_expressions()?;
        let kind = if self.at_op(":") {
            self.bump();
            let annotation = self.parse_test()?;
            let value = if self.eat_op("=") {
                Some(self.parse_yield_or_star_expressions()?)
            } else {
                None
            };
            StmtKind::AnnAssign {
                target: first,
                annotation,
                value,
            }
        } else if self.peek().kind == TokenKind::Op && AUG_OPS.contains(&self.peek().text.as_str()) {
            if !matches!(
                first.kind,
                ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. }
            ) {
                return Err(self.error_here("illegal expression for augmented assignment"));
            }
            let op = self.bump().text.clone();
            let value = self.parse_yield_or_star_expressions()?;
            StmtKind::AugAssign {
                target: first,
                op,
                value,
            }
        } else if self.at_op("=") {
            let mut targets = vec![first];
            let mut value;
            loop {
                if !is_assignable(targets.last().unwrap()) {
                    return Err(self.error_here("cannot assign to expression"));
                }
                self.expect_op("=")?;
                value = self.parse_yield_or_star_expressions()?;
                if self.at_op("=") {
                    targets.push(value);
                } else {
                    break;
                }
            }
            StmtKind::Assign { targets, value }
        } else {
            StmtKind::Expr(first)
        };
        Ok(Stmt {
            kind,
            span: self.span_from(start),
        })
    }

    // ---- expressions ----

    fn parse_yield(&mut self) -> PResult<Expr> {
        let start = self.start();
        self.expect_kw("yield")?;
        if self.eat_kw("from") {
            let e = self.parse_test()?;
            return Ok(Expr {
                kind: ExprKind::YieldFrom(Box::new(e)),
                span: self.span_from(start),
            });
        }
        let value = if self.can_start_expr() {
            Some(Box::new(self.parse_star_expressions()?))
        } else {
            None
        };
        Ok(Expr {
            kind: ExprKind::Yield(value),
            span: self.span_from(start),
        })
    }

    /// Comma-separated expressions (with `*` items); a bare tuple when a comma is present.
    pub(crate) fn parse_star_expressions(&mut self) -> PResult<Expr> {
        self.parse_expr_list(|p| p.parse_star_or_namedexpr())
    }

    fn parse_expr_list(&mut self, mut item: impl FnMut(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let start = self.start();
        let first = item(self)?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut elts = vec![first];
        while self.eat_op(",") {
            if !self.can_start_expr() {
                break;
            }
            elts.push(item(self)?);
        }
        Ok(Expr {
            kind: ExprKind::Tuple(elts),
            span: self.span_from(start),
        })
    }

    fn parse_star_or_namedexpr(&mut self) -> PResult<Expr> {
        if self.at_op("*") {
            let start = self.start();
            self.bump();
            let e = self.parse_bitor()?;
            Ok(Expr {
                kind: ExprKind::Starred(Box::new(e)),
                span: self.span_from(start),
            })
        } else {
            self.parse_namedexpr_test()
        }
    }

    fn parse_target(&mut self) -> PResult<Expr> {
        if self.at_op("*") {
            let start = self.start();
            self.bump();
            let e = self.parse_bitor()?;
            Ok(Expr {
                kind: ExprKind::Starred(Box::new(e)),
                span: self.span_from(start),
            })
        } else {
            self.parse_bitor()
        }
    }

    fn parse_target_list(&mut self) -> PResult<Expr> {
        self.parse_expr_list(|p| p.parse_target())
    }

    fn parse_namedexpr_test(&mut self) -> PResult<Expr> {
        if self.peek().kind == TokenKind::Name && self.peek_at(1).is_op(":=") {
            let start = self.start();
            let id = self.expect_ident()?;
            self.bump();
            let value = self.parse_test()?;
            return Ok(Expr {
                kind: ExprKind::NamedExpr {
                    target: Box::new(Expr {
                        kind: ExprKind::Name(id.name),
                        span: id.span,
                    }),
                    value: Box::new(value),
                },
                span: self.span_from(start),
            });
        }
        self.parse_test()
    }

    pub(crate) fn parse_test(&mut self) -> PResult<Expr> {
        if self.at_kw("lambda") {
            return self.parse_lambda(true);
        }
        let start = self.start();
        let body = self.parse_or_test()?;
        if self.at_kw("if") {
            self.bump();
            let test = self.parse_or_test()?;
            self.expect_kw("else")?;
            let orelse = self.parse_test()?;
            return Ok(Expr {
                kind: ExprKind::IfExp {
                    body: Box::new(body),
                    test: Box::new(test),
                    orelse: Box::new(orelse),
                },
                span: self.span_from(start),
            });
        }
        Ok(body)
    }

    fn parse_test_nocond(&mut self) -> PResult<Expr> {
        if self.at_kw("lambda") {
            self.parse_lambda(false)
        } else {
            self.parse_or_test()
        }
    }

    fn parse_lambda(&mut self, allow_cond: bool) -> PResult<Expr> {
        let start = self.start();
        self.expect_kw("lambda")?;
        let params = self.parse_params(":", false)?;
        self.expect_op(":")?;
        let body = if allow_cond {
            self.parse_test()?
        } else {
            self.parse_test_nocond()?
        };
        Ok(Expr {
            kind: ExprKind::Lambda {
                params,
                body: Box::new(body),
            },
            span: self.span_from(start),
        })
    }

    fn parse_bool(&mut self, kw: &str, op: BoolOpKind, next: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let start = self.start();
        let first = next(self)?;
        if !self.at_kw(kw) {
            return Ok(first);
        }
        let mut values = vec![first];
        let mut op_spans = Vec::new();
        while self.at_kw(kw) {
            op_spans.push(self.bump().span);
            values.push(next(self)?);
        }
        Ok(Expr {
            kind: ExprKind::BoolOp {
                op,
                values,
                op_spans,
            },
            span: self.span_from(start),
        })
    }

    fn parse_or_test(&mut self) -> PResult<Expr> {
        self.parse_bool("or", BoolOpKind::Or, Self::parse_and_test)
    }

    fn parse_and_test(&mut self) -> PResult<Expr> {
        self.parse_bool("and", BoolOpKind::And, Self::parse_not_test)
    }

    fn parse_not_test(&mut self) -> PResult<Expr> {
        if self.at_kw("not") {
            let start = self.start();
            let op_span = self.bump().span;
            let operand = self.parse_not_test()?;
            return Ok(Expr {
                kind: ExprKind::UnaryOp {
                    op: UnaryOpKind::Not,
                    op_span,
                    operand: Box::new(operand),
                },
                span: self.span_from(start),
            });
        }
        self.parse_comparison()
    }

    fn peek_cmp_op(&self) -> Option<(CmpOp, usize)> {
        let t = self.peek();
        match t.kind {
            TokenKind::Op => CmpOp::parse(&t.text).filter(|_| t.text != "is").map(|op| (op, 1)),
            TokenKind::Name => match t.text.as_str() {
                "in" => Some((CmpOp::In, 1)),
                "is" if self.peek_at(1).is_keyword("not") => Some((CmpOp::IsNot, 2)),
                "is" => Some((CmpOp::Is, 1)),
                "not" if self.peek_at(1).is_keyword("in") => Some((CmpOp::NotIn, 2)),
                _ => None,
            },
            _ => None,
        }
    }

    fn parse_comparison(&mut self) -> PResult<Expr> {
        let start = self.start();
        let left = self.parse_bitor()?;
        let mut ops = Vec::new();
        let mut comparators = Vec::new();
        while let Some((op, ntok)) = self.peek_cmp_op() {
            let op_start = self.start();
            for _ in 0..ntok {
                self.bump();
            }
            ops.push(CmpOpSite {
                op,
                span: self.span_from(op_start),
            });
            comparators.push(self.parse_bitor()?);
        }
        if ops.is_empty() {
            return Ok(left);
        }
        Ok(Expr {
            kind: ExprKind::Compare {
                left: Box::new(left),
                ops,
                comparators,
            },
            span: self.span_from(start),
        })
    }

    fn parse_binary(&mut self, ops: &[&str], next: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let start = self.start();
        let mut left = next(self)?;
        loop {
            let t = self.peek();
            if t.kind == TokenKind::Op && ops.contains(&t.text.as_str()) {
                let op = self.bump().text.clone();
                let right = next(self)?;
                left = Expr {
                    kind: ExprKind::BinOp {
                        left: Box::new(left),
                        op,
                        right: Box::new(right),
                    },
                    span: self.span_from(start),
                };
            } else {
                return Ok(left);
            }
        }
    }

    fn parse_bitor(&mut self) -> PResult<Expr> {
        self.parse_binary(&["|"], Self::parse_bitxor)
    }

    fn parse_bitxor(&mut self) -> PResult<Expr> {
        self.parse_binary(&["^"], Self::parse_bitand)
    }

    fn parse_bitand(&mut self) -> PResult<Expr> {
        self.parse_binary(&["&"], Self::parse_shift)
    }

    fn parse_shift(&mut self) -> PResult<Expr> {
        self.parse_binary(&["<<", ">>"], Self::parse_arith)
    }

    fn parse_arith(&mut self) -> PResult<Expr> {
        self.parse_binary(&["+", "-"], Self::parse_term)
    }

    fn parse_term(&mut self) -> PResult<Expr> {
        self.parse_binary(&["*", "/", "//", "%", "@"], Self::parse_factor)
    }

    fn parse_factor(&mut self) -> PResult<Expr> {
        let t = self.peek();
        let op = match t.text.as_str() {
            "-" if t.kind == TokenKind::Op => Some(UnaryOpKind::Neg),
            "+" if t.kind == TokenKind::Op => Some(UnaryOpKind::Pos),
            "~" if t.kind == TokenKind::Op => Some(UnaryOpKind::Invert),
            _ => None,
        };
        if let Some(op) = op {
            let start = self.start();
            let op_span = self.bump().span;
            let operand = self.parse_factor()?;
            return Ok(Expr {
                kind: ExprKind::UnaryOp {
                    op,
                    op_span,
                    operand: Box::new(operand),
                },
                span: self.span_from(start),
            });
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> PResult<Expr> {
        let start = self.start();
        let base = if self.at_kw("await") {
            self.bump();
            let e = self.parse_primary()?;
            Expr {
                kind: ExprKind::Await(Box::new(e)),
                span: self.span_from(start),
            }
        } else {
            self.parse_primary()?
        };
        if self.at_op("**") {
            self.bump();
            let exp = self.parse_factor()?;
            return Ok(Expr {
                kind: ExprKind::BinOp {
                    left: Box::new(base),
                    op: "**".to_string(),
                    right: Box::new(exp),
                },
                span: self.span_from(start),
            });
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let start = self.start();
        let mut e = self.parse_atom()?;
        loop {
            if self.at_op("(") {
                self.bump();
                let args = self.parse_call_args()?;
                self.expect_op(")")?;
                e = Expr {
                    kind: ExprKind::Call {
                        func: Box::new(e),
                        args,
                    },
                    span: self.span_from(start),
                };
            } else if self.at_op("[") {
                self.bump();
                let index = self.parse_subscript_list()?;
                self.expect_op("]")?;
                e = Expr {
                    kind: ExprKind::Subscript {
                        value: Box::new(e),
                        index: Box::new(index),
                    },
                    span: self.span_from(start),
                };
            } else if self.at_op(".") {
                self.bump();
                let attr = self.expect_ident()?;
                e = Expr {
                    kind: ExprKind::Attribute {
                        value: Box::new(e),
                        attr,
                    },
                    span: self.span_from(start),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_call_args(&mut self) -> PResult<Vec<Arg>> {
        let mut args = Vec::new();
        while !self.at_op(")") {
            if self.eat_op("*") {
                args.push(Arg::Star(self.parse_test()?));
            } else if self.eat_op("**") {
                args.push(Arg::DoubleStar(self.parse_test()?));
            } else if self.peek().kind == TokenKind::Name
                && !is_keyword(&self.peek().text)
                && self.peek_at(1).is_op("=")
            {
                let name = self.expect_ident()?;
                self.bump();
                let value = self.parse_test()?;
                args.push(Arg::Keyword { name, value });
            } else {
                let start = self.start();
                let value = self.parse_namedexpr_test()?;
                if self.at_kw("for") || self.at_kw("async") {
                    let generators = self.parse_comp_for()?;
                    args.push(Arg::Positional(Expr {
                        kind: ExprKind::GeneratorExp {
                            elt: Box::new(value),
                            generators,
                        },
                        span: self.span_from(start),
                    }));
                } else {
                    args.push(Arg::Positional(value));
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(args)
    }

    fn parse_subscript_list(&mut self) -> PResult<Expr> {
        let start = self.start();
        let first = self.parse_slice_item()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut elts = vec![first];
        while self.eat_op(",") {
            if self.at_op("]") {
                break;
            }
            elts.push(self.parse_slice_item()?);
        }
        Ok(Expr {
            kind: ExprKind::Tuple(elts),
            span: self.span_from(start),
        })
    }

    fn parse_slice_item(&mut self) -> PResult<Expr> {
        let start = self.start();
        let lower = if self.at_op(":") {
            None
        } else {
            let e = self.parse_star_or_namedexpr()?;
            if !self.at_op(":") {
                return Ok(e);
            }
            Some(Box::new(e))
        };
        self.expect_op(":")?;
        let ends = |p: &Self| p.at_op(":") || p.at_op("]") || p.at_op(",");
        let upper = if ends(self) {
            None
        } else {
            Some(Box::new(self.parse_test()?))
        };
        let step = if self.eat_op(":") {
            if self.at_op("]") || self.at_op(",") {
                None
            } else {
                Some(Box::new(self.parse_test()?))
            }
        } else {
            None
        };
        Ok(Expr {
            kind: ExprKind::Slice { lower, upper, step },
            span: self.span_from(start),
        })
    }

    fn parse_comp_for(&mut self) -> PResult<Vec<Comprehension>> {
        let mut gens = Vec::new();
        loop {
            let is_async = self.eat_kw("async");
            if !self.at_kw("for") {
                if is_async {
                    return Err(self.error_here("expected 'for'"));
                }
                break;
            }
            self.bump();
            let target = self.parse_target_list()?;
            self.expect_kw("in")?;
            let iter = self.parse_or_test()?;
            let mut ifs = Vec::new();
            while self.eat_kw("if") {
                ifs.push(self.parse_test_nocond()?);
            }
            gens.push(Comprehension {
                target,
                iter,
                ifs,
                is_async,
            });
        }
        Ok(gens)
    }

    fn parse_atom(&mut self) -> PResult<Expr> {
        let start = self.start();
        let t = self.peek();
        match t.kind {
            TokenKind::Number => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Number(t.text.clone()),
                    span: t.span,
                })
            }
            TokenKind::String => self.parse_strings(),
            TokenKind::Name => {
                if matches!(t.text.as_str(), "None" | "True" | "False") {
                    self.bump();
                    return Ok(Expr {
                        kind: ExprKind::Constant(t.text.clone()),
                        span: t.span,
                    });
                }
                if is_keyword(&t.text) {
                    return Err(self.error_here(format!("invalid syntax near '{}'", t.text)));
                }
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Name(t.text.clone()),
                    span: t.span,
                })
            }
            TokenKind::Op => match t.text.as_str() {
                "..." => {
                    self.bump();
                    Ok(Expr {
                        kind: ExprKind::Ellipsis,
                        span: t.span,
                    })
                }
                "(" => {
                    self.bump();
                    if self.eat_op(")") {
                        return Ok(Expr {
                            kind: ExprKind::Tuple(Vec::new()),
                            span: self.span_from(start),
                        });
                    }
                    if self.at_kw("yield") {
                        let y = self.parse_yield()?;
                        self.expect_op(")")?;
                        return Ok(Expr {
                            kind: ExprKind::Paren(Box::new(y)),
                            span: self.span_from(start),
                        });
                    }
                    let first = self.parse_star_or_namedexpr()?;
                    if self.at_kw("for") || self.at_kw("async") {
                        let generators = self.parse_comp_for()?;
                        self.expect_op(")")?;
                        return Ok(Expr {
                            kind: ExprKind::GeneratorExp {
                                elt: Box::new(first),
                                generators,
                            },
                            span: self.span_from(start),
                        });
                    }
                    if self.at_op(",") {
                        let mut elts = vec![first];
                        while self.eat_op(",") {
                            if self.at_op(")") {
                                break;
                            }
                            elts.push(self.parse_star_or_namedexpr()?);
                        }
                        self.expect_op(")")?;
                        return Ok(Expr {
                            kind: ExprKind::Tuple(elts),
                            span: self.span_from(start),
                        });
                    }
                    self.expect_op(")")?;
                    Ok(Expr {
                        kind: ExprKind::Paren(Box::new(first)),
                        span: self.span_from(start),
                    })
                }
                "[" => {
                    self.bump();
                    if self.eat_op("]") {
                        return Ok(Expr {
                            kind: ExprKind::List(Vec::new()),
                            span: self.span_from(start),
                        });
                    }
                    let first = self.parse_star_or_namedexpr()?;
                    if self.at_kw("for") || self.at_kw("async") {
                        let generators = self.parse_comp_for()?;
                        self.expect_op("]")?;
                        return Ok(Expr {
                            kind: ExprKind::ListComp {
                                elt: Box::new(first),
                                generators,
                            },
                            span: self.span_from(start),
                        });
                    }
                    let mut elts = vec![first];
                    while self.eat_op(",") {
                        if self.at_op("]") {
                            break;
                        }
                        elts.push(self.parse_star_or_namedexpr()?);
                    }
                    self.expect_op("]")?;
                    Ok(Expr {
                        kind: ExprKind::List(elts),
                        span: self.span_from(start),
                    })
                }
                "{" => {
                    self.bump();
                    self.parse_brace(start)
                }
                _ => Err(self.error_here(format!("invalid syntax near '{}'", t.text))),
            },
            _ => Err(self.error_here(format!("expected expression, found {}", describe(t)))),
        }
    }

    fn parse_brace(&mut self, start: Position) -> PResult<Expr> {
        if self.eat_op("}") {
            return Ok(Expr {
                kind: ExprKind::Dict(Vec::new()),
                span: self.span_from(start),
            });
        }
        let first_item = if self.eat_op("**") {
            DictItem::Unpack(self.parse_bitor()?)
        } else {
            let k = self.parse_star_or_namedexpr()?;
            if self.eat_op(":") {
                let v = self.parse_test()?;
                DictItem::Pair(k, v)
            } else {
                // Set display or set comprehension.
                if self.at_kw("for") || self.at_kw("async") {
                    let generators = self.parse_comp_for()?;
                    self.expect_op("}")?;
                    return Ok(Expr {
                        kind: ExprKind::SetComp {
                            elt: Box::new(k),
                            generators,
                        },
                        span: self.span_from(start),
                    });
                }
                let mut elts = vec![k];
                while self.eat_op(",") {
                    if self.at_op("}") {
                        break;
                    }
                    elts.push(self.parse_star_or_namedexpr()?);
                }
                self.expect_op("}")?;
                return Ok(Expr {
                    kind: ExprKind::Set(elts),
                    span: self.span_from(start),
                });
            }
        };
        if let DictItem::Pair(k, v) = &first_item {
            if self.at_kw("for") || self.at_kw("async") {
                let generators = self.parse_comp_for()?;
                self.expect_op("}")?;
                return Ok(Expr {
                    kind: ExprKind::DictComp {
                        key: Box::new(k.clone()),
                        value: Box::new(v.clone()),
                        generators,
                    },
                    span: self.span_from(start),
                });
            }
        }
        let mut items = vec![first_item];
        while self.eat_op(",") {
            if self.at_op("}") {
                break;
            }
            if self.eat_op("**") {
                items.push(DictItem::Unpack(self.parse_bitor()?));
            } else {
                let k = self.parse_test()?;
                self.expect_op(":")?;
                let v = self.parse_test()?;
                items.push(DictItem::Pair(k, v));
            }
        }
        self.expect_op("}")?;
        Ok(Expr {
            kind: ExprKind::Dict(items),
            span: self.span_from(start),
        })
    }

    fn parse_strings(&mut self) -> PResult<Expr> {
        let start = self.start();
        let mut fstring = false;
        let mut fields = Vec::new();
        while self.at_kind(TokenKind::String) {
            let t = self.bump();
            let prefix: String = t.text.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
            if prefix.contains(['f', 'F']) {
                fstring = true;
                fields.extend(fstring_fields(t, prefix.len())?);
            }
        }
        Ok(Expr {
            kind: ExprKind::Str { fstring, fields },
            span: self.span_from(start),
        })
    }
}

fn is_assignable(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. } => true,
        ExprKind::Tuple(elts) | ExprKind::List(elts) => elts.iter().all(is_assignable),
        ExprKind::Starred(inner) | ExprKind::Paren(inner) => is_assignable(inner),
        _ => false,
    }
}

fn describe(t: &Token) -> String {
    match t.kind {
        TokenKind::Newline => "end of line".into(),
        TokenKind::Indent => "indent".into(),
        TokenKind::Dedent => "dedent".into(),
        TokenKind::EndMarker => "end of input".into(),
        _ => format!("'{}'", t.text),
    }
}

/// Position of byte `off` inside token `t`.
fn position_in_token(t: &Token, off: usize) -> Position {
    let mut line = t.span.start_line;
    let mut col = t.span.start_col;
    for b in t.text.as_bytes()[..off].iter() {
        if *b == b'\n' {
            line += 1;
            col = 0;
        } else {
            col += 1;
        }
    }
    Position {
        line,
        col,
        byte: t.span.byte_start + off,
    }
}

/// Parse the replacement-field expressions of one f-string token.
fn fstring_fields(t: &Token, prefix_len: usize) -> PResult<Vec<Expr>> {
    let text = t.text.as_bytes();
    let q = text[prefix_len];
    let triple = text.len() >= prefix_len + 6 && text[prefix_len + 1] == q && text[prefix_len + 2] == q;
    let qlen = if triple { 3 } else { 1 };
    let body_end = text.len() - qlen;
    let mut out = Vec::new();
    let mut i = prefix_len + qlen;
    while i < body_end {
        match text[i] {
            b'{' if text.get(i + 1) == Some(&b'{') => i += 2,
            b'}' if text.get(i + 1) == Some(&b'}') => i += 2,
            b'{' => i = parse_fstring_field(t, i + 1, body_end, &mut out)?,
            _ => i += 1,
        }
    }
    Ok(out)
}

/// Parse one field starting just after `{`; returns the index after its `}`.
fn parse_fstring_field(t: &Token, start: usize, end: usize, out: &mut Vec<Expr>) -> PResult<usize> {
    let text = t.text.as_bytes();
    let mut depth = 0usize;
    let mut quote: Option<u8> = None;
    let mut j = start;
    let err = |at: usize, msg: &str| {
        let p = position_in_token(t, at.min(text.len()));
        SyntaxError::new(p.line, p.col, msg)
    };
    while j < end {
        let c = text[j];
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            j += 1;
            continue;
        }
        match c {
            b'\'' | b'"' => quote = Some(c),
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' => depth = depth.saturating_sub(1),
            b'}' if depth > 0 => depth -= 1,
            b'}' if depth == 0 => break,
            b'!' if depth == 0 && text.get(j + 1) != Some(&b'=') => break,
            b':' if depth == 0 => break,
            b'=' if depth == 0
                && text.get(j + 1) != Some(&b'=')
                && !matches!(text.get(j.wrapping_sub(1)), Some(b'=' | b'!' | b'<' | b'>')) =>
            {
                break
            }
            _ => {}
        }
        j += 1;
    }
    if j >= end {
        return Err(err(start, "f-string: expecting '}'"));
    }
    let expr_src = std::str::from_utf8(&text[start..j]).map_err(|_| err(start, "invalid utf-8"))?;
    if expr_src.trim().is_empty() {
        return Err(err(start, "f-string: empty expression not allowed"));
    }
    let base = position_in_token(t, start);
    let toks = tokenize_fragment(expr_src, base)?;
    let mut p = Parser::new(&toks);
    let e = p.parse_yield_or_star_expressions()?;
    if !p.at_kind(TokenKind::EndMarker) {
        return Err(p.error_here("f-string: invalid expression"));
    }
    out.push(e);
    if text[j] == b'=' {
        j += 1;
    }
    if text[j] == b'!' {
        j += 1;
        while j < end && text[j] != b':' && text[j] != b'}' {
            j += 1;
        }
    }
    if j < end && text[j] == b':' {
        j += 1;
        while j < end && text[j] != b'}' {
            if text[j] == b'{' {
                j = parse_fstring_field(t, j + 1, end, out)?;
            } else {
                j += 1;
            }
        }
    }
    if j >= end || text[j] != b'}' {
        return Err(err(j, "f-string: expecting '}'"));
    }
    Ok(j + 1)
}
