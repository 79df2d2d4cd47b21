//! Pair counts per dataset and mutation kind.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::KindTally;
use crate::mutations::MutationKind;
use crate::Provenance;

/// Published pair counts, for an informational comparison only:
/// (dataset group, kind, pairs).
pub const REFERENCE_PAIR_COUNTS: [(&str, MutationKind, usize); 10] = [
    ("humaneval+mbpp", MutationKind::VarRenameRandom, 724),
    ("humaneval+mbpp", MutationKind::VarRenameShuffle, 724),
    ("humaneval+mbpp", MutationKind::IfElseFlip, 103),
    ("humaneval+mbpp", MutationKind::IndependentSwap, 624),
    ("humaneval+mbpp", MutationKind::DefUseBreak, 22),
    ("codecontests", MutationKind::VarRenameRandom, 1000),
    ("codecontests", MutationKind::VarRenameShuffle, 1000),
    ("codecontests", MutationKind::IfElseFlip, 1000),
    ("codecontests", MutationKind::IndependentSwap, 1000),
    ("codecontests", MutationKind::DefUseBreak, 277),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub dataset: String,
    pub kind: MutationKind,
    pub candidates: usize,
    pub cut_skipped: usize,
    pub invalid: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsReport {
    pub rows: Vec<CountRow>,
}

fn group_of(dataset: &str) -> &'static str {
    if dataset == "codecontests" {
        "codecontests"
    } else {
        "humaneval+mbpp"
    }
}

impl CountsReport {
    fn row(&mut self, dataset: &str, kind: MutationKind) -> &mut CountRow {
        let i = match self.rows.iter().position(|r| r.dataset == dataset && r.kind == kind) {
            Some(i) => i,
            None => {
                self.rows.push(CountRow {
                    dataset: dataset.to_string(),
                    kind,
                    candidates: 0,
                    cut_skipped: 0,
                    invalid: 0,
                    pairs: 0,
                });
                self.rows.len() - 1
            }
        };
        &mut self.rows[i]
    }

    pub fn add(&mut self, dataset: &str, kind: MutationKind, t: &KindTally) {
        let r = self.row(dataset, kind);
        r.candidates += t.candidates;
        r.cut_skipped += t.cut_skipped;
        r.invalid += t.invalid;
        r.pairs += t.pairs;
    }

    pub fn ensure(&mut self, dataset: &str, kind: MutationKind) {
        self.row(dataset, kind);
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| (&a.dataset, a.kind).cmp(&(&b.dataset, b.kind)));
    }

    pub fn pairs(&self, dataset: &str, kind: MutationKind) -> usize {
        self.rows.iter().filter(|r| r.dataset == dataset && r.kind == kind).map(|r| r.pairs).sum()
    }

    /// Pairs per reference group and kind alongside the published counts.
    pub fn reference_diff(&self) -> Vec<(String, MutationKind, usize, usize)> {
        REFERENCE_PAIR_COUNTS
            .iter()
            .filter(|(g, _, _)| self.rows.iter().any(|r| group_of(&r.dataset) == *g))
            .map(|&(g, k, reference)| {
                let ours = self
                    .rows
                    .iter()
                    .filter(|r| group_of(&r.dataset) == g && r.kind == k)
                    .map(|r| r.pairs)
                    .sum();
                (g.to_string(), k, ours, reference)
            })
            .collect()
    }

    pub fn to_text(&self, prov: &Provenance) -> String {
        let mut s = format!("config {} seed {}\n", prov.config_hash, prov.seed);
        s += &format!(
            "{:<14} {:<20} {:>10} {:>11} {:>8} {:>6}\n",
            "dataset", "kind", "candidates", "cut-skipped", "invalid", "pairs"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<14} {:<20} {:>10} {:>11} {:>8} {:>6}",
                r.dataset,
                r.kind.as_str(),
                r.candidates,
                r.cut_skipped,
                r.invalid,
                r.pairs
            );
        }
        let diff = self.reference_diff();
        if !diff.is_empty() {
            s.push_str("\nreference comparison (informational)\n");
            for (g, k, ours, reference) in diff {
                let delta = ours as i64 - reference as i64;
                let _ = writeln!(s, "{g:<14} {:<20} {ours:>6} vs {reference:>6} ({delta:+})", k.as_str());
            }
        }
        s
    }

    pub fn to_csv(&self, prov: &Provenance) -> Result<String, csv::Error> {
        #[derive(Serialize)]
        struct Row<'a> {
            dataset: &'a str,
            kind: MutationKind,
            candidates: usize,
            cut_skipped: usize,
            invalid: usize,
            pairs: usize,
            config_hash: &'a str,
            seed: u64,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(Row {
                dataset: &r.dataset,
                kind: r.kind,
                candidates: r.candidates,
                cut_skipped: r.cut_skipped,
                invalid: r.invalid,
                pairs: r.pairs,
                config_hash: &prov.config_hash,
                seed: prov.seed,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_accumulate_and_diff_groups() {
        let mut r = CountsReport::default();
        let t = KindTally {
            candidates: 3,
            cut_skipped: 1,
            invalid: 1,
            pairs: 1,
        };
        r.add("humaneval", MutationKind::IfElseFlip, &t);
        r.add("mbpp", MutationKind::IfElseFlip, &t);
        r.add("humaneval", MutationKind::IfElseFlip, &t);
        r.sort();
        assert_eq!(r.pairs("humaneval", MutationKind::IfElseFlip), 2);
        let diff = r.reference_diff();
        assert_eq!(diff.len(), 5);
        assert!(diff.contains(&("humaneval+mbpp".into(), MutationKind::IfElseFlip, 3, 103)));
        let prov = Provenance {
            config_hash: "h".into(),
            seed: 1,
        };
        let csv = r.to_csv(&prov).unwrap();
        assert!(csv.starts_with("dataset,kind,candidates,cut_skipped,invalid,pairs,config_hash,seed\n"), "{csv}");
        assert!(csv.contains("humaneval,ifelse-flip,6,2,2,2,h,1"));
        assert!(r.to_text(&prov).contains("vs    103"));
    }
}
