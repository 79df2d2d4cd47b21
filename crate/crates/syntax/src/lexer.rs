//! Lossless tokenizer. Every byte of the input ends up either in a token's
//! text or in the trivia (whitespace, comments, blank lines, explicit line
//! continuations) carried in front of the next token.

use crate::error::SyntaxError;
use crate::span::{Position, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Name,
    Number,
    String,
    Op,
    /// End of a logical line. Empty text when the file lacks a final newline.
    Newline,
    Indent,
    Dedent,
    EndMarker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Trivia preceding this token.
    pub leading: String,
    pub span: Span,
}

impl Token {
    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Name && self.text == kw
    }
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

pub fn is_keyword(name: &str) -> bool {
    KEYWORDS.contains(&name)
}

const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPS2: &[&str] = &[
    "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", ":=", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "@=",
];
const OPS1: &[u8] = b"+-*/%@&|^~<>()[]{},:.;=";

/// Tokenize a complete module.
pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    Lexer::new(src, Position::START, false).run()
}

/// Tokenize an expression fragment embedded at `base` (used for the
/// replacement fields of f-strings). Newlines are trivia and no
/// indentation tokens are produced.
pub(crate) fn tokenize_fragment(src: &str, base: Position) -> Result<Vec<Token>, SyntaxError> {
    Lexer::new(src, base, true).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    base_byte: usize,
    fragment: bool,
    trivia_start: usize,
    brackets: Vec<(u8, Position)>,
    indents: Vec<usize>,
    line_has_tokens: bool,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, base: Position, fragment: bool) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: base.line,
            col: base.col,
            base_byte: base.byte,
            fragment,
            trivia_start: 0,
            brackets: Vec::new(),
            indents: vec![0],
            line_has_tokens: false,
            tokens: Vec::new(),
        }
    }

    fn here(&self) -> Position {
        Position {
            line: self.line,
            col: self.col,
            byte: self.base_byte + self.pos,
        }
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.line, self.col, message)
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn advance(&mut self, n: usize) {
        for &b in &self.bytes[self.pos..self.pos + n] {
            if b == b'\n' {
                self.line += 1;
                self.col = 0;
            } else {
                self.col += 1;
            }
        }
        self.pos += n;
    }

    fn emit(&mut self, kind: TokenKind, len: usize) {
        let leading = self.src[self.trivia_start..self.pos].to_string();
        let start = self.here();
        let text_start = self.pos;
        self.advance(len);
        let text = self.src[text_start..self.pos].to_string();
        self.tokens.push(Token {
            kind,
            text,
            leading,
            span: Span::new(start, self.here()),
        });
        self.trivia_start = self.pos;
    }

    fn emit_zero_width(&mut self, kind: TokenKind) {
        let here = self.here();
        self.tokens.push(Token {
            kind,
            text: String::new(),
            leading: String::new(),
            span: Span::new(here, here),
        });
    }

    fn newline_len(&self) -> Option<usize> {
        match self.peek(0) {
            Some(b'\n') => Some(1),
            Some(b'\r') if self.peek(1) == Some(b'\n') => Some(2),
            Some(b'\r') => Some(1),
            _ => None,
        }
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        let mut at_line_start = !self.fragment;
        loop {
            if at_line_start && self.brackets.is_empty() {
                if !self.handle_line_start()? {
                    break;
                }
                at_line_start = false;
                continue;
            }
            self.skip_inline_trivia()?;
            if self.pos >= self.bytes.len() {
                break;
            }
            if let Some(nl) = self.newline_len() {
                if self.fragment || !self.brackets.is_empty() {
                    self.advance(nl);
                } else {
                    self.emit(TokenKind::Newline, nl);
                    self.line_has_tokens = false;
                    at_line_start = true;
                }
                continue;
            }
            self.lex_token()?;
            self.line_has_tokens = true;
        }
        if let Some(&(b, at)) = self.brackets.last() {
            return Err(SyntaxError::new(
                at.line,
                at.col,
                format!("'{}' was never closed", b as char),
            ));
        }
        if !self.fragment {
            if self.line_has_tokens {
                self.emit_zero_width(TokenKind::Newline);
            }
            while self.indents.len() > 1 {
                self.indents.pop();
                self.emit_zero_width(TokenKind::Dedent);
            }
        }
        self.emit(TokenKind::EndMarker, 0);
        Ok(self.tokens)
    }

    /// Consume blank and comment-only lines, then the indentation of the
    /// next logical line, emitting INDENT/DEDENT as needed. Returns false at
    /// end of input.
    fn handle_line_start(&mut self) -> Result<bool, SyntaxError> {
        loop {
            let mut i = self.pos;
            let mut width = 0usize;
            while i < self.bytes.len() {
                match self.bytes[i] {
                    b' ' => width += 1,
                    b'\t' => width = (width / 8 + 1) * 8,
                    b'\x0c' => width = 0,
                    _ => break,
                }
                i += 1;
            }
            if i >= self.bytes.len() {
                self.advance(i - self.pos);
                return Ok(false);
            }
            match self.bytes[i] {
                b'#' => {
                    while i < self.bytes.len() && self.bytes[i] != b'\n' && self.bytes[i] != b'\r' {
                        i += 1;
                    }
                    self.advance(i - self.pos);
                    if let Some(nl) = self.newline_len() {
                        self.advance(nl);
                        continue;
                    }
                    return Ok(false);
                }
                b'\n' | b'\r' => {
                    self.advance(i - self.pos);
                    let nl = self.newline_len().unwrap();
                    self.advance(nl);
                    continue;
                }
                _ => {
                    self.advance(i - self.pos);
                    let top = *self.indents.last().unwrap();
                    if width > top {
                        self.indents.push(width);
                        self.emit_zero_width(TokenKind::Indent);
                    } else if width < top {
                        while width < *self.indents.last().unwrap() {
                            self.indents.pop();
                            self.emit_zero_width(TokenKind::Dedent);
                        }
                        if width != *self.indents.last().unwrap() {
                            return Err(self.error(
                                "unindent does not match any outer indentation level",
                            ));
                        }
                    }
                    return Ok(true);
                }
            }
        }
    }

    fn skip_inline_trivia(&mut self) -> Result<(), SyntaxError> {
        loop {
            match self.peek(0) {
                Some(b' ') | Some(b'\t') | Some(b'\x0c') => self.advance(1),
                Some(b'#') => {
                    let mut n = 0;
                    while let Some(b) = self.peek(n) {
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                        n += 1;
                    }
                    self.advance(n);
                }
                Some(b'\\') => {
                    let nl = match (self.peek(1), self.peek(2)) {
                        (Some(b'\n'), _) => 1,
                        (Some(b'\r'), Some(b'\n')) => 2,
                        (Some(b'\r'), _) => 1,
                        (None, _) => return Err(self.error("unexpected EOF after line continuation")),
                        _ => return Err(self.error("unexpected character after line continuation")),
                    };
                    self.advance(1 + nl);
                }
                _ => return Ok(()),
            }
        }
    }

    fn lex_token(&mut self) -> Result<(), SyntaxError> {
        let c = self.bytes[self.pos];
        if let Some(prefix_len) = self.string_prefix_len() {
            let len = self.string_len(prefix_len)?;
            self.emit(TokenKind::String, len);
            return Ok(());
        }
        if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 {
            let mut n = 1;
            while let Some(b) = self.peek(n) {
                if b == b'_' || b.is_ascii_alphanumeric() || b >= 0x80 {
                    n += 1;
                } else {
                    break;
                }
            }
            self.emit(TokenKind::Name, n);
            return Ok(());
        }
        if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_some_and(|b| b.is_ascii_digit())) {
            let n = self.number_len();
            self.emit(TokenKind::Number, n);
            return Ok(());
        }
        let rest = &self.src[self.pos..];
        for op in OPS3.iter().chain(OPS2.iter()) {
            if rest.starts_with(op) {
                self.emit(TokenKind::Op, op.len());
                return Ok(());
            }
        }
        if OPS1.contains(&c) {
            match c {
                b'(' | b'[' | b'{' => self.brackets.push((c, self.here())),
                b')' | b']' | b'}' => {
                    let open = match c {
                        b')' => b'(',
                        b']' => b'[',
                        _ => b'{',
                    };
                    match self.brackets.pop() {
                        Some((b, _)) if b == open => {}
                        _ => return Err(self.error(format!("unmatched '{}'", c as char))),
                    }
                }
                _ => {}
            }
            self.emit(TokenKind::Op, 1);
            return Ok(());
        }
        let ch = self.src[self.pos..].chars().next().unwrap();
        Err(self.error(format!("invalid character '{ch}'")))
    }

    /// Length of a string prefix (possibly 0) if a string literal starts here.
    fn string_prefix_len(&self) -> Option<usize> {
        let mut n = 0;
        while n < 3 {
            match self.peek(n) {
                Some(b'"') | Some(b'\'') => return Some(n),
                Some(b) if b"rRbBuUfF".contains(&b) => n += 1,
                _ => return None,
            }
        }
        None
    }

    fn string_len(&self, prefix_len: usize) -> Result<usize, SyntaxError> {
        let prefix = &self.bytes[self.pos..self.pos + prefix_len];
        if !valid_prefix(prefix) {
            return Err(self.error("invalid string prefix"));
        }
        let q = self.bytes[self.pos + prefix_len];
        let body_start = self.pos + prefix_len;
        let triple = self.bytes.get(body_start + 1) == Some(&q)
            && self.bytes.get(body_start + 2) == Some(&q);
        let mut i = body_start + if triple { 3 } else { 1 };
        loop {
            let Some(&b) = self.bytes.get(i) else {
                return Err(self.error("unterminated string literal"));
            };
            match b {
                b'\\' => {
                    i += 2;
                    if self.bytes.get(i - 1) == Some(&b'\r') && self.bytes.get(i) == Some(&b'\n') {
                        i += 1;
                    }
                }
                b'\n' | b'\r' if !triple => {
                    return Err(self.error("unterminated string literal"));
                }
                _ if b == q => {
                    if !triple {
                        return Ok(i + 1 - self.pos);
                    }
                    if self.bytes.get(i + 1) == Some(&q) && self.bytes.get(i + 2) == Some(&q) {
                        return Ok(i + 3 - self.pos);
                    }
                    i += 1;
                }
                _ => i += 1,
            }
        }
    }

    fn number_len(&self) -> usize {
        let b = self.bytes;
        let start = self.pos;
        let mut i = start;
        let alnum = |c: u8| c.is_ascii_alphanumeric() || c == b'_';
        if b[i] == b'0' && matches!(b.get(i + 1), Some(b'x' | b'X' | b'o' | b'O' | b'b' | b'B')) {
            i += 2;
            while i < b.len() && alnum(b[i]) {
                i += 1;
            }
            return i - start;
        }
        let digits = |mut i: usize| {
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                i += 1;
            }
            i
        };
        i = digits(i);
        if i < b.len() && b[i] == b'.' {
            i = digits(i + 1);
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                i = digits(j);
            }
        }
        if i < b.len() && (b[i] == b'j' || b[i] == b'J') {
            i += 1;
        }
        i - start
    }
}

fn valid_prefix(prefix: &[u8]) -> bool {
    let lower: Vec<u8> = prefix.iter().map(|b| b.to_ascii_lowercase()).collect();
    matches!(
        lower.as_slice(),
        b"" | b"r" | b"u" | b"b" | b"f" | b"br" | b"rb" | b"fr" | b"rf"
    )
}

/// Reconstruct source text from a token stream.
pub fn untokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for t in tokens {
        out.push_str(&t.leading);
        out.push_str(&t.text);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().iter().map(|t| t.kind).collect()
    }

    #[test]
    fn simple_assignment() {
        use TokenKind::*;
        assert_eq!(kinds("x = 1\n"), vec![Name, Op, Number, Newline, EndMarker]);
    }

    #[test]
    fn indentation() {
        use TokenKind::*;
        let k = kinds("if a:\n    b\n\n  # c\nd\n");
        assert_eq!(
            k,
            vec![Name, Name, Op, Newline, Indent, Name, Newline, Dedent, Name, Newline, EndMarker]
        );
    }

    #[test]
    fn no_final_newline() {
        use TokenKind::*;
        let toks = tokenize("x").unwrap();
        assert_eq!(toks.iter().map(|t| t.kind).collect::<Vec<_>>(), vec![Name, Newline, EndMarker]);
        assert_eq!(untokenize(&toks), "x");
    }

    #[test]
    fn brackets_join_lines() {
        use TokenKind::*;
        let k = kinds("f(a,\n  b)\n");
        assert_eq!(k, vec![Name, Op, Name, Op, Name, Op, Newline, EndMarker]);
    }

    #[test]
    fn strings_and_prefixes() {
        let toks = tokenize("s = rb'\\'' + f\"{x}\" + '''a\n'b'\n'''\n").unwrap();
        let strs: Vec<&str> = toks
            .iter()
            .filter(|t| t.kind == TokenKind::String)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(strs, vec!["rb'\\''", "f\"{x}\"", "'''a\n'b'\n'''"]);
    }

    #[test]
    fn numbers() {
        let toks = tokenize("a = 0x1F + 1_000 + 3.5e-2 + .5 + 2j + 1.\n").unwrap();
        let nums: Vec<&str> = toks
            .iter()
            .filter(|t| t.kind == TokenKind::Number)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(nums, vec!["0x1F", "1_000", "3.5e-2", ".5", "2j", "1."]);
    }

    #[test]
    fn errors() {
        assert!(tokenize("x = 'abc\n").is_err());
        assert!(tokenize("f(a\n").is_err());
        assert!(tokenize("a)\n").is_err());
        assert!(tokenize("if a:\n    b\n  c\n").is_err());
        assert!(tokenize("x = $\n").is_err());
    }

    #[test]
    fn round_trip_with_trivia() {
        let src = "# head\n\ndef f(a,  # c\n      b):\n\treturn a \\\n  + b  # t\n\n\n";
        assert_eq!(untokenize(&tokenize(src).unwrap()), src);
    }

    #[test]
    fn crlf_round_trip() {
        let src = "x = 1\r\nif x:\r\n    y = 2\r\n";
        assert_eq!(untokenize(&tokenize(src).unwrap()), src);
    }
}
