//! Counterfactual pair generation: mutate a reference solution, check the
//! mutant still passes, and cut both programs at the same place.

mod report;

pub use report::{CountRow, CountsReport, REFERENCE_PAIR_COUNTS};

use cfprobe_syntax::ast::StmtKind;
use cfprobe_syntax::{cut_prefix, fraction_boundary, module_fraction_boundary, SourceProgram, Span, SyntaxTree};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{debug, warn};

use crate::analysis::defuse::Region;
use crate::harness::sandbox::{Sandbox, Status};
use crate::mutations::{apply, enumerate_candidates, MutatedProgram, MutationInstance, MutationKind, MutationTarget, Subject};

/// Share of a body kept in the prompt for the fraction-cut mutations.
pub const KEEP_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoCase {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "kebab-case")]
pub enum TestKind {
    /// Statements executed after the program; an `AssertionError` fails.
    Assert { setup: String, cases: Vec<String> },
    /// Standard input and expected standard output per case.
    Io { cases: Vec<IoCase> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    #[serde(flatten)]
    pub kind: TestKind,
    pub time_limit_s: f64,
}

impl TestSuite {
    pub fn len(&self) -> usize {
        match &self.kind {
            TestKind::Assert { cases, .. } => cases.len(),
            TestKind::Io { cases } => cases.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All test-side source text (for avoiding name collisions).
    pub fn text(&self) -> String {
        match &self.kind {
            TestKind::Assert { setup, cases } => format!("{setup}\n{}", cases.join("\n")),
            TestKind::Io { .. } => String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub dataset: String,
    pub instruction: String,
    /// Text before the mutation scope (imports, helpers, signature area).
    pub preamble: String,
    pub reference_solution: SourceProgram,
    pub entry_point: Option<String>,
    pub test_suite: TestSuite,
}

impl Problem {
    /// The mutation scope: the entry-point function when present, else the
    /// first top-level function, else the whole module.
    pub fn region(&self, tree: &SyntaxTree) -> Region {
        let by_name = self.entry_point.as_deref().and_then(|n| tree.find_function(n));
        match by_name.or_else(|| tree.functions().into_iter().next()) {
            Some(f) => Region::Function(f),
            None => Region::Module,
        }
    }

    pub fn subject(&self) -> Result<Subject, cfprobe_syntax::SyntaxError> {
        let tree = cfprobe_syntax::parse(&self.reference_solution.text)?;
        let region = self.region(&tree);
        let mut s = Subject::new(self.reference_solution.clone(), tree, region);
        s.reserve(&self.test_suite.text());
        Ok(s)
    }
}

/// Where completions are truncated and what follows the mutation scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeFrame {
    /// Indentation of the scope's `def` line; `None` for module scope.
    pub def_indent: Option<usize>,
    /// Source after the scope's last line (kept verbatim after completions).
    pub postamble: String,
}

pub fn scope_frame(tree: &SyntaxTree, region: &Region) -> ScopeFrame {
    match region {
        Region::Module => ScopeFrame {
            def_indent: None,
            postamble: String::new(),
        },
        Region::Function(r) => {
            let end = tree.line_index().line_end_inclusive(r.span.end_line);
            ScopeFrame {
                def_indent: Some(r.span.start_col as usize),
                postamble: tree.source()[end..].to_string(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualPair {
    pub pair_id: String,
    pub problem_id: String,
    pub dataset: String,
    pub kind: MutationKind,
    pub seed: u64,
    pub instance: MutationInstance,
    /// 1-based line at which both programs are cut.
    pub cut_line: u32,
    pub prefix_original: String,
    pub prefix_mutated: String,
    pub suffix_original: String,
    pub suffix_mutated: String,
    pub frame: ScopeFrame,
    pub validated: bool,
    pub parent_sha256: String,
    pub mutant_sha256: String,
    #[serde(default)]
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("reference solution does not parse: {0}")]
    Parse(String),
    #[error("test execution failed: {0}")]
    Sandbox(String),
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Whether the full mutated solution passes the problem's tests. Executor
/// failures are errors, not a `false`.
pub fn validate_mutant(sandbox: &Sandbox, problem: &Problem, mutant: &MutatedProgram) -> Result<bool, GenError> {
    let r = sandbox.run_tests(&mutant.text, &problem.test_suite);
    match r.status {
        Status::SandboxError => Err(GenError::Sandbox(
            r.per_case.first().map(|c| c.detail.clone()).unwrap_or_default(),
        )),
        s => Ok(s == Status::Pass),
    }
}

/// The cut produced for one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut {
    pub line: u32,
    pub prefix_original: String,
    pub prefix_mutated: String,
}

/// Apply the per-kind cut rule. `None` means the instance is not usable
/// (its change would not be visible before the cut, or nothing is left to
/// complete).
pub fn cut_rule(subject: &Subject, mutant: &MutatedProgram) -> Option<Cut> {
    let inst = &mutant.instance;
    let orig = &subject.tree;
    let mtree = cfprobe_syntax::parse(&mutant.text).ok()?;
    let line = match inst.kind {
        MutationKind::IfElseFlip => {
            let MutationTarget::Relational(site) = &inst.target else { return None };
            let StmtKind::If(i) = &orig.stmt(&site.if_stmt)?.kind else { return None };
            i.header.end_line + 1
        }
        _ => {
            let (line, last) = fraction_line(orig, &subject.region)?;
            let (mline, _) = fraction_line(&mtree, &subject.region)?;
            if line != mline || line > last {
                return None;
            }
            let visible = |s: &Span| s.start_line < line;
            let ok = match &inst.target {
                MutationTarget::Pair(p) => p.second.span.end_line < line,
                _ => inst.changed_spans.iter().any(visible),
            };
            if !ok {
                return None;
            }
            line
        }
    };
    let po = cut_prefix(orig, orig.line_index().line_start(line)?).ok()?;
    let pm = cut_prefix(&mtree, mtree.line_index().line_start(line)?).ok()?;
    (po != pm).then_some(Cut {
        line,
        prefix_original: po,
        prefix_mutated: pm,
    })
}

/// Fraction boundary line and last body line of the region.
fn fraction_line(tree: &SyntaxTree, region: &Region) -> Option<(u32, u32)> {
    match region {
        Region::Module => {
            let at = module_fraction_boundary(tree, KEEP_FRACTION).ok()?;
            Some((at.line, cfprobe_syntax::module_body_lines(tree).ok()?.1))
        }
        Region::Function(r) => {
            let at = fraction_boundary(tree, r, KEEP_FRACTION).ok()?;
            Some((at.line, cfprobe_syntax::body_lines(tree, r).ok()?.1))
        }
    }
}

/// Per-problem outcome of pair generation for one kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindTally {
    pub candidates: usize,
    pub cut_skipped: usize,
    pub invalid: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFailure {
    pub problem_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub pairs: Vec<CounterfactualPair>,
    pub counts: CountsReport,
    pub failures: Vec<ProblemFailure>,
}

/// First usable pair of `kind` for one problem, with the tally.
pub fn pair_for_kind(
    sandbox: &Sandbox,
    problem: &Problem,
    subject: &Subject,
    kind: MutationKind,
    seed: u64,
) -> Result<(Option<CounterfactualPair>, KindTally), GenError> {
    let cands = enumerate_candidates(kind, subject, seed);
    let mut tally = KindTally {
        candidates: cands.len(),
        ..KindTally::default()
    };
    for (idx, inst) in cands.iter().enumerate() {
        let Ok(mutant) = apply(subject, inst) else {
            tally.invalid += 1;
            continue;
        };
        let Some(cut) = cut_rule(subject, &mutant) else {
            tally.cut_skipped += 1;
            continue;
        };
        if !validate_mutant(sandbox, problem, &mutant)? {
            warn!(problem = %problem.id, %kind, idx, "mutant failed its tests");
            tally.invalid += 1;
            continue;
        }
        let frame = scope_frame(&subject.tree, &subject.region);
        let at_orig = subject.tree.line_index().line_start(cut.line).map_or(0, |p| p.byte);
        let mtree = cfprobe_syntax::parse(&mutant.text).map_err(|e| GenError::Parse(e.to_string()))?;
        let at_mut = mtree.line_index().line_start(cut.line).map_or(0, |p| p.byte);
        tally.pairs = 1;
        let pair = CounterfactualPair {
            pair_id: format!("{}::{}::{}", problem.id, kind, idx),
            problem_id: problem.id.clone(),
            dataset: problem.dataset.clone(),
            kind,
            seed,
            instance: inst.clone(),
            cut_line: cut.line,
            suffix_original: subject.tree.source()[at_orig..].to_string(),
            suffix_mutated: mutant.text[at_mut..].to_string(),
            prefix_original: cut.prefix_original,
            prefix_mutated: cut.prefix_mutated,
            frame,
            validated: true,
            parent_sha256: sha256_hex(subject.tree.source()),
            mutant_sha256: sha256_hex(&mutant.text),
            config_hash: String::new(),
        };
        return Ok((Some(pair), tally));
    }
    Ok((None, tally))
}

/// Generate at most one pair per (problem, kind). Deterministic given the
/// inputs; problems that error are reported and skipped.
pub fn generate_pairs(sandbox: &Sandbox, problems: &[Problem], kinds: &[MutationKind], seed: u64) -> Generation {
    let per_problem: Vec<Result<Vec<(MutationKind, Option<CounterfactualPair>, KindTally)>, ProblemFailure>> = problems
        .par_iter()
        .map(|p| {
            let fail = |reason: String| ProblemFailure {
                problem_id: p.id.clone(),
                reason,
            };
            let subject = p.subject().map_err(|e| fail(format!("parse: {e}")))?;
            let mut out = Vec::new();
            for &k in kinds {
                let (pair, tally) = pair_for_kind(sandbox, p, &subject, k, seed).map_err(|e| fail(e.to_string()))?;
                debug!(problem = %p.id, kind = %k, ?tally, "generated");
                out.push((k, pair, tally));
            }
            Ok(out)
        })
        .collect();
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    let mut counts = CountsReport::default();
    for (p, res) in problems.iter().zip(per_problem) {
        match res {
            Ok(v) => {
                for (k, pair, tally) in v {
                    counts.add(&p.dataset, k, &tally);
                    pairs.extend(pair);
                }
            }
            Err(f) => failures.push(f),
        }
    }
    for &k in kinds {
        for d in problems.iter().map(|p| p.dataset.as_str()) {
            counts.ensure(d, k);
        }
    }
    counts.sort();
    Generation { pairs, counts, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sandbox::SandboxPolicy;

    fn problem(src: &str, cases: &[&str]) -> Problem {
        Problem {
            id: "T/0".into(),
            dataset: "test".into(),
            instruction: String::new(),
            preamble: String::new(),
            reference_solution: SourceProgram::new(src, "T/0"),
            entry_point: Some("f".into()),
            test_suite: TestSuite {
                kind: TestKind::Assert {
                    setup: String::new(),
                    cases: cases.iter().map(|s| s.to_string()).collect(),
                },
                time_limit_s: 10.0,
            },
        }
    }

    const SRC: &str = "def f(xs, t):\n    n = len(xs)\n    m = 0\n    for i in range(n):\n        if xs[i] < t:\n            m += 1\n        else:\n            m -= 1\n    total = m * 2\n    return total\n";

    #[test]
    fn cuts_follow_kind_rules() {
        let p = problem(SRC, &["assert f([1, 5], 3) == 0"]);
        let s = p.subject().unwrap();
        let flip = &enumerate_candidates(MutationKind::IfElseFlip, &s, 1)[0];
        let m = apply(&s, flip).unwrap();
        let c = cut_rule(&s, &m).unwrap();
        assert_eq!(c.line, 6);
        assert!(c.prefix_original.ends_with("if xs[i] < t:\n"));
        assert!(c.prefix_mutated.ends_with("if xs[i] >= t:\n"));
        // Body is lines 2..=10 (9 lines): ceil(6.75) = 7 -> boundary line 9.
        let swap = enumerate_candidates(MutationKind::IndependentSwap, &s, 1);
        assert_eq!(swap.len(), 1);
        let c = cut_rule(&s, &apply(&s, &swap[0]).unwrap()).unwrap();
        assert_eq!(c.line, 9);
        assert_eq!(c.prefix_original.lines().count(), c.prefix_mutated.lines().count());
    }

    #[test]
    fn renames_only_in_suffix_are_skipped() {
        let src = "def f(a):\n    b = a + 1\n    c = b * 2\n    d = c - 1\n    e = d\n    return e\n";
        let p = problem(src, &["assert f(1) == 3"]);
        let s = p.subject().unwrap();
        let chains = enumerate_candidates(MutationKind::VarRenameRandom, &s, 3);
        assert!(cut_rule(&s, &apply(&s, &chains[0]).unwrap()).is_some());
        let src = "def f(a):\n    a = a + 1\n    a = a * 2\n    a = a - 1\n    a = a + 0\n    for e in [a]: return e\n";
        let s = problem(src, &[]).subject().unwrap();
        let r = enumerate_candidates(MutationKind::VarRenameRandom, &s, 3);
        // The only local, `e`, first appears on the boundary line.
        assert!(cut_rule(&s, &apply(&s, &r[0]).unwrap()).is_none());
    }

    #[test]
    fn generation_is_deterministic() {
        let sb = Sandbox::new(SandboxPolicy {
            workers: 2,
            ..SandboxPolicy::default()
        });
        let p = problem(SRC, &["assert f([1, 5], 3) == 0", "assert f([1, 2], 3) == 4"]);
        let a = generate_pairs(&sb, &[p.clone()], &MutationKind::ALL, 11);
        let b = generate_pairs(&sb, &[p], &MutationKind::ALL, 11);
        assert_eq!(a.pairs, b.pairs);
        assert!(a.failures.is_empty());
        let kinds: Vec<_> = a.pairs.iter().map(|p| p.kind).collect();
        assert!(kinds.contains(&MutationKind::IfElseFlip));
        assert!(kinds.contains(&MutationKind::VarRenameRandom));
        for pair in &a.pairs {
            assert_eq!(format!("{}{}", pair.prefix_original, pair.suffix_original), SRC);
        }
    }
}
