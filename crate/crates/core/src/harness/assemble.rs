//! Turning a prompt prefix and a model completion into a runnable program.

use crate::cf_gen::ScopeFrame;

/// Prefix + completion. For a function scope the completion is cut at the
/// first code line that dedents out of the function, trailing blank and
/// comment lines are dropped, and the text that followed the function in
/// the original file is appended. A completion is also cut at the first
/// stop marker. Unparseable results are returned as-is.
pub fn assemble_program(frame: &ScopeFrame, prefix: &str, completion: &str, stop_markers: &[String]) -> String {
    let mut body = apply_stop_markers(completion, stop_markers);
    let Some(indent) = frame.def_indent else {
        return format!("{prefix}{body}");
    };
    body = truncate_at_dedent(body, indent);
    let mut out = String::with_capacity(prefix.len() + body.len() + frame.postamble.len() + 1);
    out.push_str(prefix);
    out.push_str(body);
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&frame.postamble);
    out
}

fn apply_stop_markers<'a>(completion: &'a str, markers: &[String]) -> &'a str {
    let cut = markers
        .iter()
        .filter(|m| !m.is_empty())
        .filter_map(|m| completion.find(m.as_str()))
        .min()
        .unwrap_or(completion.len());
    &completion[..cut]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LineClass {
    /// Blank, or only a comment, outside any string or bracket.
    Trivia,
    /// Starts outside strings and brackets, with this indentation.
    Code(usize),
    /// Starts inside a string literal or an open bracket.
    Continuation,
}

/// Keep the completion up to (not including) the first code line indented
/// at most `def_indent`, minus trailing trivia lines.
fn truncate_at_dedent(completion: &str, def_indent: usize) -> &str {
    let mut scanner = Scanner::default();
    let mut keep_end = 0;
    let mut pos = 0;
    for line in completion.split_inclusive('\n') {
        match scanner.classify(line) {
            LineClass::Code(n) if n <= def_indent => break,
            LineClass::Trivia => {}
            LineClass::Code(_) | LineClass::Continuation => keep_end = pos + line.len(),
        }
        pos += line.len();
    }
    &completion[..keep_end]
}

/// Tracks string and bracket state across lines of Python-like text. It
/// is tolerant: malformed input never fails, it just degrades.
#[derive(Default)]
struct Scanner {
    depth: usize,
    /// Open triple-quoted string delimiter, if any.
    triple: Option<&'static str>,
    /// A backslash continued the previous line.
    continued: bool,
}

impl Scanner {
    fn classify(&mut self, line: &str) -> LineClass {
        let starts_inside = self.depth > 0 || self.triple.is_some() || self.continued;
        let trimmed = line.trim_start_matches([' ', '\t']);
        let indent = line.len() - trimmed.len();
        let class = if starts_inside {
            LineClass::Continuation
        } else if trimmed.trim_end().is_empty() || trimmed.starts_with('#') {
            LineClass::Trivia
        } else {
            LineClass::Code(indent)
        };
        self.scan(line);
        class
    }

    fn scan(&mut self, line: &str) {
        let b = line.as_bytes();
        let mut i = 0;
        self.continued = false;
        while i < b.len() {
            if let Some(delim) = self.triple {
                match line[i..].find(delim) {
                    Some(k) if !escaped(b, i + k) => {
                        i += k + 3;
                        self.triple = None;
                    }
                    Some(k) => i += k + 1,
                    None => return,
                }
                continue;
            }
            match b[i] {
                b'#' => return,
                b'(' | b'[' | b'{' => self.depth += 1,
                b')' | b']' | b'}' => self.depth = self.depth.saturating_sub(1),
                b'\\' if line[i + 1..].trim_end_matches(['\r', '\n']).is_empty() => {
                    self.continued = true;
                    return;
                }
                q @ (b'"' | b'\'') => {
                    let triple: &'static str = if q == b'"' { "\"\"\"" } else { "'''" };
                    if line[i..].starts_with(triple) {
                        self.triple = Some(triple);
                        i += 3;
                        continue;
                    }
                    i += 1;
                    while i < b.len() && b[i] != q && b[i] != b'\n' {
                        i += if b[i] == b'\\' { 2 } else { 1 };
                    }
                }
                _ => {}
            }
            i += 1;
        }
    }
}

fn escaped(b: &[u8], at: usize) -> bool {
    let mut n = 0;
    while at > n && b[at - n - 1] == b'\\' {
        n += 1;
    }
    n % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(post: &str) -> ScopeFrame {
        ScopeFrame {
            def_indent: Some(0),
            postamble: post.into(),
        }
    }

    #[test]
    fn trailing_function_is_dropped() {
        let p = "def f(x):\n    y = x\n";
        let c = "    return y\n\n\ndef g():\n    pass\n";
        assert_eq!(assemble_program(&frame(""), p, c, &[]), "def f(x):\n    y = x\n    return y\n");
    }

    #[test]
    fn empty_completion_is_prefix() {
        assert_eq!(assemble_program(&frame(""), "def f():\n", "", &[]), "def f():\n");
        let module = ScopeFrame {
            def_indent: None,
            postamble: String::new(),
        };
        assert_eq!(assemble_program(&module, "x = 1\n", "", &[]), "x = 1\n");
    }

    #[test]
    fn strings_and_brackets_do_not_end_the_body() {
        let p = "def f():\n";
        let c = "    s = \"\"\"\nnot code\n\"\"\"\n    t = (1,\n2)\n    return s, t  # done\n# trailing\nprint(f())\n";
        let want = "def f():\n    s = \"\"\"\nnot code\n\"\"\"\n    t = (1,\n2)\n    return s, t  # done\n\nx = 1\n";
        assert_eq!(assemble_program(&frame("\nx = 1\n"), p, c, &[]), want);
    }

    #[test]
    fn perfect_remainder_restores_source() {
        let src = "import math\n\n\ndef f(x):\n    y = x + 1\n    # note\n    return y\n\n# end\ndef g():\n    return f(1)\n";
        let prefix = &src[..src.find("    return").unwrap()];
        let suffix = &src[prefix.len()..];
        let post = &src[src.find("return y\n").unwrap() + 9..];
        assert_eq!(assemble_program(&frame(post), prefix, suffix, &[]), src);
    }

    #[test]
    fn stop_markers_cut_first() {
        let c = "    return 1\nif __name__ == '__main__':\n    f()\n";
        let m = vec!["\nif __name__".to_string()];
        assert_eq!(assemble_program(&frame(""), "def f():\n", c, &m), "def f():\n    return 1\n");
        let module = ScopeFrame {
            def_indent: None,
            postamble: String::new(),
        };
        assert_eq!(assemble_program(&module, "", "a = 1\n###\nb", &["###".into()]), "a = 1\n");
    }

    #[test]
    fn nested_function_indent() {
        let f = ScopeFrame {
            def_indent: Some(4),
            postamble: String::new(),
        };
        let c = "        return 2\n    def other(self):\n        pass\n";
        assert_eq!(assemble_program(&f, "class A:\n    def m(self):\n", c, &[]), "class A:\n    def m(self):\n        return 2\n");
    }
}
