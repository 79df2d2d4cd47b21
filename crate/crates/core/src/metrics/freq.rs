//! Relational-operator frequencies over a corpus, and the correctness change
//! per flip direction.

use std::collections::BTreeMap;
use std::path::Path;

use cfprobe_syntax::ast::{ExprKind, Stmt};
use cfprobe_syntax::SyntaxTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{MEffectRecord, MetricsError};
use crate::mutations::MutationKind;

/// Complementary operator pairs, most frequent-looking member first.
pub const COMPLEMENTARY_PAIRS: [(&str, &str); 3] = [("==", "!="), (">", "<="), ("<", ">=")];

const COUNTED: [&str; 6] = ["==", "!=", "<", "<=", ">", ">="];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorCounts {
    pub files: usize,
    pub skipped: usize,
    pub counts: BTreeMap<String, u64>,
}

impl OperatorCounts {
    pub fn get(&self, op: &str) -> u64 {
        self.counts.get(op).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &OperatorCounts) {
        self.files += other.files;
        self.skipped += other.skipped;
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += v;
        }
    }

    fn zeroed() -> Self {
        OperatorCounts {
            counts: COUNTED.iter().map(|o| (o.to_string(), 0)).collect(),
            ..OperatorCounts::default()
        }
    }
}

/// Relational operators in comparison expressions of one module.
pub fn count_operators(tree: &SyntaxTree) -> OperatorCounts {
    let mut c = OperatorCounts::zeroed();
    c.files = 1;
    count_block(&tree.module().body, &mut c);
    c
}

fn count_block(stmts: &[Stmt], c: &mut OperatorCounts) {
    for s in stmts {
        for e in s.exprs() {
            e.walk(&mut |x| {
                if let ExprKind::Compare { ops, .. } = &x.kind {
                    for o in ops {
                        let name = o.op.as_str();
                        if COUNTED.contains(&name) {
                            *c.counts.entry(name.to_string()).or_default() += 1;
                        }
                    }
                }
            });
        }
        for b in s.blocks() {
            count_block(&b.stmts, c);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub a: String,
    pub b: String,
    pub count_a: u64,
    pub count_b: u64,
    /// `count_a / count_b`; `None` when either operator never occurs.
    pub ratio: Option<f64>,
}

/// Mean correctness change, in percentage points, when operator `from` is
/// flipped to `to` (original accuracy minus mutated accuracy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipDelta {
    pub from: String,
    pub to: String,
    pub model: String,
    pub n: usize,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFrequencyReport {
    pub counts: OperatorCounts,
    pub pairs: Vec<PairRatio>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<FlipDelta>,
}

impl OperatorFrequencyReport {
    pub fn from_counts(counts: OperatorCounts) -> Self {
        let pairs = COMPLEMENTARY_PAIRS
            .iter()
            .map(|&(a, b)| {
                let (ca, cb) = (counts.get(a), counts.get(b));
                PairRatio {
                    a: a.into(),
                    b: b.into(),
                    count_a: ca,
                    count_b: cb,
                    ratio: (ca > 0 && cb > 0).then(|| ca as f64 / cb as f64),
                }
            })
            .collect();
        OperatorFrequencyReport {
            counts,
            pairs,
            deltas: Vec::new(),
        }
    }

    /// Attach per-direction deltas from if-else flip effect records.
    pub fn with_flip_effects(mut self, records: &[MEffectRecord]) -> Self {
        let mut models: Vec<&str> = records.iter().map(|r| r.model.as_str()).collect();
        models.sort_unstable();
        models.dedup();
        for model in models {
            for &(a, b) in &COMPLEMENTARY_PAIRS {
                for (from, to) in [(a, b), (b, a)] {
                    let sel: Vec<_> = records
                        .iter()
                        .filter(|r| r.model == model && r.kind == MutationKind::IfElseFlip && r.flip_operator.as_deref() == Some(from))
                        .collect();
                    let n = sel.len();
                    let diff: i64 = sel.iter().map(|r| r.a_original as i64 - r.a_mutated as i64).sum();
                    self.deltas.push(FlipDelta {
                        from: from.into(),
                        to: to.into(),
                        model: model.into(),
                        n,
                        delta: (n > 0).then(|| 100.0 * diff as f64 / n as f64),
                    });
                }
            }
        }
        self
    }
}

/// Count operators over every `.py` file under `dir` (sorted walk,
/// unparseable files skipped and counted).
pub fn operator_frequency(dir: &Path) -> Result<OperatorFrequencyReport, MetricsError> {
    let mut files: Vec<_> = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "py"))
        .map(|e| e.into_path())
        .collect();
    files.sort();
    let per_file: Vec<OperatorCounts> = files
        .par_iter()
        .map(|p| {
            let parsed = std::fs::read_to_string(p).ok().and_then(|t| cfprobe_syntax::parse(&t).ok());
            match parsed {
                Some(tree) => count_operators(&tree),
                None => OperatorCounts {
                    skipped: 1,
                    ..OperatorCounts::default()
                },
            }
        })
        .collect();
    let mut total = OperatorCounts::zeroed();
    for c in &per_file {
        total.merge(c);
    }
    if total.files == 0 {
        return Err(MetricsError::EmptyCorpus(dir.display().to_string()));
    }
    Ok(OperatorFrequencyReport::from_counts(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_in_nested_positions() {
        let src = "def f(a, b):\n    if a == b or a != 1:\n        return [x for x in a if x < 3]\n    while a >= b > 0:\n        g = lambda: a <= b\n    return a is b\n";
        let c = count_operators(&cfprobe_syntax::parse(src).unwrap());
        assert_eq!(c.get("=="), 1);
        assert_eq!(c.get("!="), 1);
        assert_eq!(c.get("<"), 1);
        assert_eq!(c.get(">="), 1);
        assert_eq!(c.get(">"), 1);
        assert_eq!(c.get("<="), 1);
        assert_eq!(c.counts.len(), 6);
    }

    #[test]
    fn undefined_ratio_and_deltas() {
        let mut c = OperatorCounts::zeroed();
        c.counts.insert("<=".into(), 4);
        let r = OperatorFrequencyReport::from_counts(c);
        assert_eq!(r.pairs[1].ratio, None);
        let mut a = MEffectRecord::new("p", "p", MutationKind::IfElseFlip, 1, 0);
        a.flip_operator = Some("==".into());
        let mut b = MEffectRecord::new("q", "q", MutationKind::IfElseFlip, 1, 1);
        b.flip_operator = Some("==".into());
        let r = r.with_flip_effects(&[a, b]);
        let d = r.deltas.iter().find(|d| d.from == "==").unwrap();
        assert_eq!((d.n, d.delta), (2, Some(50.0)));
        assert_eq!(r.deltas.iter().find(|d| d.from == "!=").unwrap().delta, None);
    }
}
