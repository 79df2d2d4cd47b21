use cfprobe_syntax::{body_lines, cut_prefix, fraction_boundary, parse, Position, SyntaxTree};
use proptest::prelude::*;

fn simple() -> impl Strategy<Value = Vec<String>> {
    prop_oneof![
        (0u32..50).prop_map(|n| vec![format!("x = {n}")]),
        Just(vec!["y = (x +".to_string(), "     1)".to_string()]),
        Just(vec!["z = [".to_string(), "    x,".to_string(), "]".to_string()]),
        Just(vec!["s = '''a".to_string(), "b'''".to_string()]),
        Just(vec!["w = x + \\".to_string(), "    2".to_string()]),
        Just(vec!["# note".to_string()]),
        Just(vec![String::new()]),
    ]
}

fn indent(lines: Vec<String>) -> Vec<String> {
    lines.into_iter().map(|l| if l.is_empty() { l } else { format!("    {l}") }).collect()
}

fn stmt() -> impl Strategy<Value = Vec<String>> {
    prop_oneof![
        3 => simple(),
        1 => prop::collection::vec(simple(), 1..3).prop_map(|b| {
            let mut v = vec!["if (x >".to_string(), "        0):".to_string(), "    pass".to_string()];
            v.extend(indent(b.concat()));
            v
        }),
        1 => prop::collection::vec(simple(), 1..3).prop_map(|b| {
            let mut v = vec!["for i in range(3):".to_string(), "    pass".to_string()];
            v.extend(indent(b.concat()));
            v
        }),
    ]
}

fn function() -> impl Strategy<Value = String> {
    prop::collection::vec(stmt(), 2..10).prop_map(|body| {
        let mut s = String::from("def f(x):\n    \"\"\"Doc.\"\"\"\n    x = 1\n");
        for l in indent(body.concat()) {
            s.push_str(&l);
            s.push('\n');
        }
        s.push_str("    return x\n");
        s
    })
}

fn line_start(tree: &SyntaxTree, line: u32) -> Position {
    tree.line_index().line_start(line).expect("line exists")
}

proptest! {
    #[test]
    fn prefix_and_remainder_partition_the_text(src in function()) {
        let tree = parse(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        let lines = src.lines().count() as u32;
        for line in 1..=lines + 1 {
            let at = line_start(&tree, line);
            let prefix = cut_prefix(&tree, at).unwrap();
            prop_assert_eq!(format!("{prefix}{}", &src[at.byte..]), src.clone());
        }
    }

    #[test]
    fn boundary_is_monotone_and_between_statements(src in function(), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let tree = parse(&src).unwrap();
        let f = tree.functions()[0].clone();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (pa, pb) = (fraction_boundary(&tree, &f, lo).unwrap(), fraction_boundary(&tree, &f, hi).unwrap());
        prop_assert!(pa.byte <= pb.byte);
        let (first, last) = body_lines(&tree, &f).unwrap();
        for p in [pa, pb] {
            prop_assert!(p.col == 0);
            prop_assert!(p.line > first && p.line <= last + 1);
            // No statement (for compound ones, no header) spans the boundary.
            for r in tree.statements() {
                let s = tree.stmt(&r).unwrap();
                let span = if s.is_compound() { s.header_span() } else { s.span };
                prop_assert!(!(span.start_line < p.line && p.line <= span.end_line), "line {} splits {:?}\n{}", p.line, span, src);
            }
        }
    }
}
