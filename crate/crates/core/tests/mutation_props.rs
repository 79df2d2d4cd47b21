//! Property tests for the mutation kinds and cut rules over generated
//! functions.

use std::collections::{BTreeMap, BTreeSet};

use cfprobe_core::analysis::defuse::Region;
use cfprobe_core::analysis::{def_use_chains, relational_if_sites};
use cfprobe_core::cf_gen::cut_rule;
use cfprobe_core::mutations::{apply, apply_rename_map, enumerate_candidates, MutationInstance, MutationKind, MutationTarget, Subject};
use cfprobe_syntax::Span;
use proptest::prelude::*;

const VARS: [&str; 5] = ["a", "b", "c", "d", "total"];

fn var() -> impl Strategy<Value = String> {
    prop::sample::select(VARS.to_vec()).prop_map(String::from)
}

fn expr() -> impl Strategy<Value = String> {
    prop_oneof![
        var(),
        (0i32..5).prop_map(|n| n.to_string()),
        (var(), prop::sample::select(vec!["+", "-", "*"]), var()).prop_map(|(x, o, y)| format!("{x} {o} {y}")),
        var().prop_map(|x| format!("abs({x})")),
    ]
}

fn cmp() -> impl Strategy<Value = String> {
    (var(), prop::sample::select(vec!["<", "<=", ">", ">=", "==", "!="]), expr()).prop_map(|(x, o, e)| format!("{x} {o} {e}"))
}

fn cond() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => cmp(),
        1 => (cmp(), cmp()).prop_map(|(x, y)| format!("{x} and {y}")),
        1 => (cmp(), cmp()).prop_map(|(x, y)| format!("({x}) or ({y})")),
        1 => var().prop_map(|x| format!("len(str({x})) > 1")),
    ]
}

fn stmt(depth: u32) -> BoxedStrategy<Vec<String>> {
    let simple = prop_oneof![
        (var(), expr()).prop_map(|(v, e)| vec![format!("{v} = {e}")]),
        (var(), expr()).prop_map(|(v, e)| vec![format!("{v} += {e}")]),
        var().prop_map(|v| vec![format!("print({v})")]),
    ];
    if depth == 0 {
        return simple.boxed();
    }
    let block = prop::collection::vec(stmt(depth - 1), 1..3).prop_map(|v| v.concat());
    prop_oneof![
        4 => simple,
        1 => (cond(), block.clone(), block.clone()).prop_map(|(c, t, e)| {
            let mut v = vec![format!("if {c}:")];
            v.extend(t.into_iter().map(|l| format!("    {l}")));
            v.push("else:".into());
            v.extend(e.into_iter().map(|l| format!("    {l}")));
            v
        }),
        1 => block.prop_map(|b| {
            let mut v = vec!["for i in range(3):".to_string()];
            v.extend(b.into_iter().map(|l| format!("    {l}")));
            v
        }),
    ]
    .boxed()
}

fn function() -> impl Strategy<Value = String> {
    prop::collection::vec(stmt(2), 3..10).prop_map(|body| {
        let mut s = String::from("def f(a, b):\n    c = 0\n    d = 1\n    total = a + b\n");
        for l in body.concat() {
            s.push_str("    ");
            s.push_str(&l);
            s.push('\n');
        }
        s.push_str("    return total + c + d\n");
        s
    })
}

fn subject(src: &str) -> Subject {
    Subject::parse(src, "p/0", |t| Region::Function(t.functions()[0].clone())).unwrap()
}

fn merged(spans: &[Span], limit: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = spans.iter().map(|s| (s.byte_start.min(limit), s.byte_end.min(limit))).collect();
    v.sort();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (s, e) in v {
        match out.last_mut() {
            Some(l) if s <= l.1 => l.1 = l.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// `after` equals `before` with only the given byte ranges replaced: the
/// untouched segments appear in `after` in order, anchored at both ends.
fn only_changed_within(before: &str, after: &str, ranges: &[(usize, usize)]) -> bool {
    let mut segs = Vec::new();
    let mut at = 0;
    for &(s, e) in ranges {
        segs.push(&before[at..s]);
        at = e;
    }
    segs.push(&before[at..]);
    let (first, last) = (segs[0], segs[segs.len() - 1]);
    if !after.starts_with(first) || !after.ends_with(last) || after.len() < first.len() + last.len() {
        return false;
    }
    let mut rest = &after[first.len()..after.len() - last.len()];
    for seg in &segs[1..segs.len() - 1] {
        match rest.find(seg) {
            Some(i) => rest = &rest[i + seg.len()..],
            None => return false,
        }
    }
    true
}

fn same_site(a: &MutationInstance, b: &MutationInstance) -> bool {
    match (&a.target, &b.target) {
        (MutationTarget::Relational(x), MutationTarget::Relational(y)) => x.if_stmt.path == y.if_stmt.path,
        (MutationTarget::Pair(x), MutationTarget::Pair(y)) => x.first.path == y.first.path && x.second.path == y.second.path,
        _ => false,
    }
}

fn has_call(text: &str) -> bool {
    let b = text.as_bytes();
    (1..b.len()).any(|i| b[i] == b'(' && (b[i - 1].is_ascii_alphanumeric() || b[i - 1] == b'_'))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn mutations_are_specific_and_deterministic(src in function(), seed in any::<u64>()) {
        let s = subject(&src);
        for kind in MutationKind::ALL {
            let insts = enumerate_candidates(kind, &s, seed);
            prop_assert_eq!(&insts, &enumerate_candidates(kind, &s, seed));
            for inst in &insts {
                let m = apply(&s, inst).unwrap();
                prop_assert_ne!(&m.text, &src);
                prop_assert_eq!(&m.text, &apply(&s, inst).unwrap().text);
                prop_assert!(
                    only_changed_within(&src, &m.text, &merged(&inst.changed_spans, src.len())),
                    "{} changed text outside {:?}\n{}\n---\n{}", kind, inst.changed_spans, src, m.text
                );
                cfprobe_syntax::parse(&m.text).unwrap();
            }
        }
    }

    #[test]
    fn flip_and_swap_are_involutions(src in function(), seed in any::<u64>()) {
        let s = subject(&src);
        for kind in [MutationKind::IfElseFlip, MutationKind::IndependentSwap] {
            for inst in enumerate_candidates(kind, &s, seed) {
                let once = apply(&s, &inst).unwrap();
                let s2 = subject(&once.text);
                let again = enumerate_candidates(kind, &s2, seed).into_iter().find(|j| same_site(&inst, j));
                let again = again.ok_or_else(|| TestCaseError::fail(format!("{kind}: site gone after one application\n{}", once.text)))?;
                prop_assert_eq!(&apply(&s2, &again).unwrap().text, &src);
            }
        }
    }

    #[test]
    fn renames_are_bijective(src in function(), seed in any::<u64>()) {
        let s = subject(&src);
        for kind in [MutationKind::VarRenameRandom, MutationKind::VarRenameShuffle] {
            for inst in enumerate_candidates(kind, &s, seed) {
                let map = inst.rename_map.clone().unwrap();
                let targets: BTreeSet<&String> = map.values().collect();
                prop_assert_eq!(targets.len(), map.len());
                if kind == MutationKind::VarRenameShuffle {
                    prop_assert!(map.iter().all(|(k, v)| k != v));
                }
                let m = apply(&s, &inst).unwrap();
                let inverse: BTreeMap<String, String> = map.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
                prop_assert_eq!(&apply_rename_map(&subject(&m.text), &inverse, seed).unwrap().text, &src);
            }
        }
    }

    #[test]
    fn chains_are_disjoint_and_sites_call_free(src in function()) {
        let s = subject(&src);
        let mut seen: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        let chains = def_use_chains(&s.tree, &s.table, &s.region);
        for c in &chains {
            let occ = seen.entry(c.variable.as_str()).or_default();
            for sp in c.spans() {
                prop_assert!(occ.insert(sp.byte_start), "{} at byte {} in two chains\n{}", c.variable, sp.byte_start, src);
            }
        }
        for site in relational_if_sites(&s.tree, &s.region) {
            prop_assert!(!has_call(s.tree.text(site.condition_span)));
        }
    }

    #[test]
    fn cut_prefixes_align(src in function(), seed in any::<u64>()) {
        let s = subject(&src);
        for kind in MutationKind::ALL {
            for inst in enumerate_candidates(kind, &s, seed) {
                let m = apply(&s, &inst).unwrap();
                let Some(cut) = cut_rule(&s, &m) else { continue };
                prop_assert_ne!(&cut.prefix_original, &cut.prefix_mutated);
                prop_assert!(src.starts_with(&cut.prefix_original));
                prop_assert!(m.text.starts_with(&cut.prefix_mutated));
                if kind.uses_fraction_cut() {
                    prop_assert_eq!(cut.prefix_original.lines().count(), cut.prefix_mutated.lines().count());
                }
                let ranges = merged(&inst.changed_spans, cut.prefix_original.len());
                prop_assert!(only_changed_within(&cut.prefix_original, &cut.prefix_mutated, &ranges));
            }
        }
    }
}
