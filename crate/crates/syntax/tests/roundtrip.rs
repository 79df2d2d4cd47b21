use cfprobe_syntax::{parse, print, tokenize};
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "xs", "total", "i", "_tmp", "n2"]).prop_map(String::from)
}

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        ident(),
        (0u32..1000).prop_map(|n| n.to_string()),
        Just("'s'".to_string()),
        Just("f\"{a}-{b!r}\"".to_string()),
        Just("None".to_string()),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    atom().prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", " < ", " == ", " and ", " or ", " in "]), inner.clone())
                .prop_map(|(l, op, r)| format!("{l}{op}{r}")),
            inner.clone().prop_map(|e| format!("({e})")),
            inner.clone().prop_map(|e| format!("len({e})")),
            inner.clone().prop_map(|e| format!("[{e} for i in xs]")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("[{a},\n     {b}]")),
        ]
    })
}

/// Trivia that may appear at the end of a line.
fn eol() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        Just("  # note".to_string()),
        Just("   ".to_string()),
        Just(";".to_string()),
    ]
}

fn stmt(depth: u32) -> BoxedStrategy<Vec<String>> {
    let simple = prop_oneof![
        (ident(), expr(), eol()).prop_map(|(n, e, t)| vec![format!("{n} = {e}{t}")]),
        (ident(), expr()).prop_map(|(n, e)| vec![format!("{n} += {e}")]),
        expr().prop_map(|e| vec![format!("print({e})")]),
        Just(vec!["pass".to_string()]),
        Just(vec!["".to_string()]),
        Just(vec!["# comment".to_string()]),
    ];
    if depth == 0 {
        return simple.boxed();
    }
    let block = prop::collection::vec(stmt(depth - 1), 1..4).prop_map(|v| v.concat());
    prop_oneof![
        3 => simple,
        1 => (expr(), block.clone()).prop_map(|(c, b)| header(&format!("if {c}:"), b)),
        1 => (expr(), block.clone(), block.clone()).prop_map(|(c, b, e)| {
            let mut v = header(&format!("if {c}:"), b);
            v.extend(header("else:", e));
            v
        }),
        1 => (ident(), expr(), block.clone()).prop_map(|(n, e, b)| header(&format!("for {n} in {e}:"), b)),
        1 => (ident(), block).prop_map(|(n, b)| header(&format!("def {n}(a, b=1):"), b)),
    ]
    .boxed()
}

fn header(h: &str, body: Vec<String>) -> Vec<String> {
    let mut v = vec![h.to_string()];
    // Keep at least one real statement in the body.
    v.push("    pass".to_string());
    v.extend(body.into_iter().map(|l| if l.is_empty() { l } else { format!("    {l}") }));
    v
}

fn program() -> impl Strategy<Value = String> {
    (prop::collection::vec(stmt(2), 1..8), any::<bool>(), any::<bool>()).prop_map(|(lines, crlf, final_nl)| {
        let nl = if crlf { "\r\n" } else { "\n" };
        let mut s = lines.concat().join(nl);
        if final_nl {
            s.push_str(nl);
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_programs_round_trip(src in program()) {
        let tree = parse(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        prop_assert_eq!(print(&tree), src);
    }

    #[test]
    fn arbitrary_text_round_trips_or_errors(src in "[a-z0-9 =:()\\[\\]+#'\"\n\t.,]{0,60}") {
        if let Ok(tree) = parse(&src) {
            prop_assert_eq!(print(&tree), src.clone());
        }
        if let Ok(tokens) = tokenize(&src) {
            let joined: String = tokens.iter().map(|t| format!("{}{}", t.leading, t.text)).collect();
            prop_assert_eq!(joined, src);
        }
    }
}

#[test]
fn rejects_invalid_programs() {
    let bad = [
        "def f(:\n    pass\n",
        "x = (1,\n",
        "if x\n    pass\n",
        "  x = 1\n",
        "x = 1\n  y = 2\n",
        "return return\n",
        "class:\n    pass\n",
        "x +\n",
        "def f():\nreturn 1\n",
        "x = 'abc\n",
        "for in x:\n    pass\n",
        "if x:\n    a\n  b\n",
        "try:\n    pass\nx = 1\n",
        "f(a for a in b c)\n",
        "x = f'{}'\n",
        "lambda x: yield\n",
        "f() = 1\n",
        "a + b += 1\n",
        "x = 1 = y\n",
    ];
    for src in bad {
        assert!(parse(src).is_err(), "accepted invalid program {src:?}");
    }
}

#[test]
fn error_positions_are_reported() {
    let e = parse("x = 1\ndef f(:):\n    pass\n").unwrap_err();
    assert_eq!((e.line, e.col), (2, 6));
    let e = parse("x = [1,\n     2\n").unwrap_err();
    assert_eq!(e.line, 1);
}

fn straddles(tree: &cfprobe_syntax::SyntaxTree, line: u32) -> bool {
    tree.statements().iter().any(|r| {
        let h = tree.stmt(r).unwrap().header_span();
        h.start_line < line && line <= h.end_line
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn boundaries_are_monotone_and_clean(src in program(), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let tree = parse(&src).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for r in tree.statements() {
            if tree.function(&r).is_none() {
                continue;
            }
            let (Ok(p), Ok(q)) = (
                cfprobe_syntax::fraction_boundary(&tree, &r, lo),
                cfprobe_syntax::fraction_boundary(&tree, &r, hi),
            ) else {
                continue;
            };
            prop_assert!(p.line <= q.line);
            prop_assert!(!straddles(&tree, p.line) && !straddles(&tree, q.line));
            let prefix = cfprobe_syntax::cut_prefix(&tree, p).unwrap();
            prop_assert_eq!(format!("{}{}", prefix, &src[p.byte..]), src.clone());
        }
    }
}
