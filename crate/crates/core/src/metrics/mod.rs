//! Mutation Effect, Average Mutation Effect, cross-mutation correlation and
//! operator-frequency analysis.

mod freq;
mod report;

pub use freq::{count_operators, operator_frequency, FlipDelta, OperatorCounts, OperatorFrequencyReport, PairRatio, COMPLEMENTARY_PAIRS};
pub use report::{
    ame_csv, ame_text, correlation_csv, correlation_matrix, correlation_text, freq_csv, freq_text, scale_csv, CorrelationCell, ScaleRow,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::store::Keyed;
use crate::mutations::MutationKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no informative records in group {0}")]
    EmptyGroup(String),
    #[error("only {0} problems have informative records for both kinds (need 2)")]
    InsufficientOverlap(usize),
    #[error("correlation undefined: one of the effect vectors is constant")]
    ZeroVariance,
    #[error("no parseable files in corpus {0}")]
    EmptyCorpus(String),
    #[error("{0}")]
    Io(String),
}

/// One scored pair side-by-side: both attributions and the effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MEffectRecord {
    pub pair_id: String,
    pub problem_id: String,
    pub dataset: String,
    pub model: String,
    pub kind: MutationKind,
    #[serde(default)]
    pub sample: u32,
    pub a_original: u8,
    pub a_mutated: u8,
    pub me: u8,
    pub informative: bool,
    /// First relational operator of the flipped condition (if-else flips).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_operator: Option<String>,
    #[serde(default)]
    pub config_hash: String,
    #[serde(default)]
    pub seed: u64,
}

impl Keyed for MEffectRecord {
    type Key = (String, String, u32);
    fn key(&self) -> Self::Key {
        (self.model.clone(), self.pair_id.clone(), self.sample)
    }
}

impl MEffectRecord {
    pub fn new(pair_id: &str, problem_id: &str, kind: MutationKind, a_original: u8, a_mutated: u8) -> Self {
        MEffectRecord {
            pair_id: pair_id.into(),
            problem_id: problem_id.into(),
            dataset: String::new(),
            model: String::new(),
            kind,
            sample: 0,
            a_original,
            a_mutated,
            me: mutation_effect(a_original, a_mutated),
            informative: a_original == 1 || a_mutated == 1,
            flip_operator: None,
            config_hash: String::new(),
            seed: 0,
        }
    }
}

/// |a_mutated − a_original| for attributions in {0, 1}.
pub fn mutation_effect(a_original: u8, a_mutated: u8) -> u8 {
    debug_assert!(a_original <= 1 && a_mutated <= 1);
    a_original.abs_diff(a_mutated)
}

/// Records where at least one side passed, and how many were discarded.
pub fn filter_informative(records: &[MEffectRecord]) -> (Vec<MEffectRecord>, usize) {
    let kept: Vec<_> = records.iter().filter(|r| r.informative).cloned().collect();
    let discarded = records.len() - kept.len();
    (kept, discarded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmeResult {
    pub model: String,
    pub dataset: String,
    pub kind: MutationKind,
    /// Percentage in [0, 100].
    pub ame: f64,
    /// 95% Wilson score interval, percent.
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_informative: usize,
    pub n_total: usize,
    /// Share of all attempted pairs whose original side passed, percent.
    pub original_accuracy: f64,
}

/// 95% Wilson score interval for `k` successes out of `n`, as fractions.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// AME over one group of records (the caller chooses the grouping).
pub fn average_mutation_effect(records: &[MEffectRecord]) -> Result<AmeResult, MetricsError> {
    let first = records.first().ok_or_else(|| MetricsError::EmptyGroup("(empty)".into()))?;
    let (info, _) = filter_informative(records);
    if info.is_empty() {
        return Err(MetricsError::EmptyGroup(format!("{}/{}/{}", first.model, first.dataset, first.kind)));
    }
    let hits = info.iter().filter(|r| r.me == 1).count();
    let (lo, hi) = wilson_interval(hits, info.len());
    let orig = records.iter().filter(|r| r.a_original == 1).count();
    Ok(AmeResult {
        model: first.model.clone(),
        dataset: first.dataset.clone(),
        kind: first.kind,
        ame: 100.0 * hits as f64 / info.len() as f64,
        ci_low: 100.0 * lo,
        ci_high: 100.0 * hi,
        n_informative: info.len(),
        n_total: records.len(),
        original_accuracy: 100.0 * orig as f64 / records.len() as f64,
    })
}

/// Combined label used for the HumanEval and MBPP rows.
pub const COMBINED_DATASET: &str = "humaneval+mbpp";

/// AME per (model, dataset, kind); when HumanEval and MBPP are both
/// present, an extra combined row is added. Groups without informative
/// records are returned separately.
pub fn ame_table(records: &[MEffectRecord]) -> (Vec<AmeResult>, Vec<(String, String, MutationKind)>) {
    let mut groups: BTreeMap<(String, String, MutationKind), Vec<MEffectRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.model.clone(), r.dataset.clone(), r.kind)).or_default().push(r.clone());
    }
    let datasets: std::collections::BTreeSet<&str> = records.iter().map(|r| r.dataset.as_str()).collect();
    if datasets.contains("humaneval") && datasets.contains("mbpp") {
        for r in records.iter().filter(|r| r.dataset == "humaneval" || r.dataset == "mbpp") {
            let mut c = r.clone();
            c.dataset = COMBINED_DATASET.into();
            groups.entry((c.model.clone(), c.dataset.clone(), c.kind)).or_default().push(c);
        }
    }
    let mut table = Vec::new();
    let mut empty = Vec::new();
    for (key, g) in groups {
        match average_mutation_effect(&g) {
            Ok(r) => table.push(r),
            Err(_) => empty.push(key),
        }
    }
    (table, empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub estimator: String,
    pub r: f64,
    pub n: usize,
}

/// Pearson correlation of per-problem ME over problems informative for both
/// kinds (ME averaged over samples when there are several).
pub fn mutation_correlation(records: &[MEffectRecord], kind_a: MutationKind, kind_b: MutationKind) -> Result<Correlation, MetricsError> {
    let per_problem = |k: MutationKind| {
        let mut m: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
        for r in records.iter().filter(|r| r.kind == k && r.informative) {
            let e = m.entry(r.problem_id.as_str()).or_default();
            e.0 += r.me as u32;
            e.1 += 1;
        }
        m
    };
    let a = per_problem(kind_a);
    let b = per_problem(kind_b);
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|(p, &(sa, na))| b.get(p).map(|&(sb, nb)| (sa as f64 / na as f64, sb as f64 / nb as f64)))
        .unzip();
    if xs.len() < 2 {
        return Err(MetricsError::InsufficientOverlap(xs.len()));
    }
    Ok(Correlation {
        estimator: "pearson".into(),
        r: pearson(&xs, &ys)?,
        n: xs.len(),
    })
}

/// Pearson's r via n·Σxy − Σx·Σy, which is exact for small integer data.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let dx = n * sxx - sx * sx;
    let dy = n * syy - sy * sy;
    if dx <= 0.0 || dy <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let r = (n * sxy - sx * sy) / (dx * dy).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(a: u8, b: u8) -> MEffectRecord {
        MEffectRecord::new("p", "p", MutationKind::VarRenameRandom, a, b)
    }

    #[test]
    fn effect_table() {
        assert_eq!(mutation_effect(1, 1), 0);
        assert_eq!(mutation_effect(1, 0), 1);
        assert_eq!(mutation_effect(0, 1), 1);
        assert_eq!(mutation_effect(0, 0), 0);
    }

    #[test]
    fn both_fail_is_discarded() {
        let (kept, dropped) = filter_informative(&[rec(0, 0), rec(1, 0)]);
        assert_eq!((kept.len(), dropped), (1, 1));
        assert_eq!(kept[0].a_original, 1);
        assert!(matches!(average_mutation_effect(&[rec(0, 0)]), Err(MetricsError::EmptyGroup(_))));
    }

    #[test]
    fn ame_of_three() {
        let r = average_mutation_effect(&[rec(1, 0), rec(1, 1), rec(0, 0)]).unwrap();
        assert_eq!(r.ame, 50.0);
        assert_eq!(r.n_informative, 2);
        assert_eq!(r.n_total, 3);
        assert!((r.original_accuracy - 200.0 / 3.0).abs() < 1e-9);
        assert!(r.ci_low < 50.0 && r.ci_high > 50.0);
    }

    #[test]
    fn wilson_known_value() {
        // 5/10: centre 0.5, half-width 1.96*sqrt(.025+.0096)/1.384 = 0.2683.
        let (lo, hi) = wilson_interval(5, 10);
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
    }

    #[test]
    fn pearson_exact_cases() {
        assert_eq!(pearson(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), Err(MetricsError::ZeroVariance));
    }

    #[test]
    fn combined_rows() {
        let mut a = rec(1, 0);
        a.dataset = "humaneval".into();
        let mut b = rec(1, 1);
        b.dataset = "mbpp".into();
        let (t, empty) = ame_table(&[a, b]);
        assert!(empty.is_empty());
        let c = t.iter().find(|r| r.dataset == COMBINED_DATASET).unwrap();
        assert_eq!((c.ame, c.n_informative), (50.0, 2));
    }

    proptest! {
        #[test]
        fn effect_is_symmetric_and_binary(a in 0u8..2, b in 0u8..2) {
            prop_assert_eq!(mutation_effect(a, b), mutation_effect(b, a));
            prop_assert!(mutation_effect(a, b) <= 1);
        }

        #[test]
        fn ame_is_hit_fraction(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..60)) {
            let recs: Vec<_> = pairs.iter().map(|&(a, b)| rec(a, b)).collect();
            let (kept, _) = filter_informative(&recs);
            for k in &kept {
                prop_assert_eq!(k.me, mutation_effect(k.a_original, k.a_mutated));
            }
            match average_mutation_effect(&recs) {
                Ok(r) => {
                    let hits = kept.iter().filter(|r| r.me == 1).count();
                    prop_assert_eq!(r.ame, 100.0 * hits as f64 / kept.len() as f64);
                    prop_assert!((0.0..=100.0).contains(&r.ame));
                    prop_assert!(r.n_informative <= r.n_total);
                }
                Err(_) => prop_assert!(kept.is_empty()),
            }
        }
    }
}
