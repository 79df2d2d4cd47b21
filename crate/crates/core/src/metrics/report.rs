//! Table and figure emitters (CSV and plain text). JSON is produced by
//! serializing the result types directly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{mutation_correlation, AmeResult, MEffectRecord, MetricsError, OperatorFrequencyReport};
use crate::mutations::MutationKind;
use crate::Provenance;

fn csv_string<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String, MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| MetricsError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| MetricsError::Io(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

#[derive(Serialize)]
struct AmeRow<'a> {
    model: &'a str,
    dataset: &'a str,
    kind: MutationKind,
    ame: String,
    ci_low: String,
    ci_high: String,
    n_informative: usize,
    n_total: usize,
    original_accuracy: String,
    config_hash: &'a str,
    seed: u64,
}

/// Dataset × model × kind rows.
pub fn ame_csv(rows: &[AmeResult], prov: &Provenance) -> Result<String, MetricsError> {
    csv_string(rows.iter().map(|r| AmeRow {
        model: &r.model,
        dataset: &r.dataset,
        kind: r.kind,
        ame: format!("{:.2}", r.ame),
        ci_low: format!("{:.2}", r.ci_low),
        ci_high: format!("{:.2}", r.ci_high),
        n_informative: r.n_informative,
        n_total: r.n_total,
        original_accuracy: format!("{:.2}", r.original_accuracy),
        config_hash: &prov.config_hash,
        seed: prov.seed,
    }))
}

/// One line per (dataset, model) with a column per kind, like the paper-style
/// summary table, followed by the interval details.
pub fn ame_text(rows: &[AmeResult], prov: &Provenance) -> String {
    let mut s = format!("config {} seed {}\n", prov.config_hash, prov.seed);
    let _ = write!(s, "{:<16} {:<20} {:>8}", "dataset", "model", "orig%");
    for k in MutationKind::ALL {
        let _ = write!(s, " {:>18}", k.as_str());
    }
    s.push('\n');
    let mut keys: Vec<(&str, &str)> = rows.iter().map(|r| (r.dataset.as_str(), r.model.as_str())).collect();
    keys.sort_unstable();
    keys.dedup();
    for (d, m) in keys {
        let group: Vec<&AmeResult> = rows.iter().filter(|r| r.dataset == d && r.model == m).collect();
        let orig = group.iter().map(|r| r.original_accuracy).sum::<f64>() / group.len() as f64;
        let _ = write!(s, "{d:<16} {m:<20} {orig:>8.2}");
        for k in MutationKind::ALL {
            match group.iter().find(|r| r.kind == k) {
                Some(r) => {
                    let _ = write!(s, " {:>18}", format!("{:.2} (n={})", r.ame, r.n_informative));
                }
                None => {
                    let _ = write!(s, " {:>18}", "-");
                }
            }
        }
        s.push('\n');
    }
    s.push_str("\n95% Wilson intervals\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{} {} {}: {:.2} [{:.2}, {:.2}] n={}/{}",
            r.dataset,
            r.model,
            r.kind.as_str(),
            r.ame,
            r.ci_low,
            r.ci_high,
            r.n_informative,
            r.n_total
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub model: String,
    pub kind_a: MutationKind,
    pub kind_b: MutationKind,
    pub estimator: String,
    /// `None` when undefined (too little overlap or constant effects).
    pub r: Option<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Every ordered kind pair, per model.
pub fn correlation_matrix(records: &[MEffectRecord]) -> Vec<CorrelationCell> {
    let mut models: Vec<&str> = records.iter().map(|r| r.model.as_str()).collect();
    models.sort_unstable();
    models.dedup();
    let mut out = Vec::new();
    for m in models {
        let mine: Vec<MEffectRecord> = records.iter().filter(|r| r.model == m).cloned().collect();
        for a in MutationKind::ALL {
            for b in MutationKind::ALL {
                let (r, n, note) = match mutation_correlation(&mine, a, b) {
                    Ok(c) => (Some(c.r), c.n, None),
                    Err(MetricsError::InsufficientOverlap(n)) => (None, n, Some("insufficient overlap".to_string())),
                    Err(e) => (None, 0, Some(e.to_string())),
                };
                out.push(CorrelationCell {
                    model: m.into(),
                    kind_a: a,
                    kind_b: b,
                    estimator: "pearson".into(),
                    r,
                    n,
                    note,
                });
            }
        }
    }
    out
}

#[derive(Serialize)]
struct CorrRow<'a> {
    model: &'a str,
    kind_a: MutationKind,
    kind_b: MutationKind,
    estimator: &'a str,
    r: String,
    n: usize,
    config_hash: &'a str,
    seed: u64,
}

pub fn correlation_csv(cells: &[CorrelationCell], prov: &Provenance) -> Result<String, MetricsError> {
    csv_string(cells.iter().map(|c| CorrRow {
        model: &c.model,
        kind_a: c.kind_a,
        kind_b: c.kind_b,
        estimator: &c.estimator,
        r: c.r.map(|r| format!("{r:.4}")).unwrap_or_default(),
        n: c.n,
        config_hash: &prov.config_hash,
        seed: prov.seed,
    }))
}

pub fn correlation_text(cells: &[CorrelationCell], prov: &Provenance) -> String {
    let mut s = format!("pearson correlation of per-problem effects; config {} seed {}\n", prov.config_hash, prov.seed);
    let mut models: Vec<&str> = cells.iter().map(|c| c.model.as_str()).collect();
    models.dedup();
    for m in models {
        let _ = writeln!(s, "\n{m}");
        let _ = write!(s, "{:<20}", "");
        for k in MutationKind::ALL {
            let _ = write!(s, " {:>18}", k.as_str());
        }
        s.push('\n');
        for a in MutationKind::ALL {
            let _ = write!(s, "{:<20}", a.as_str());
            for b in MutationKind::ALL {
                let c = cells.iter().find(|c| c.model == m && c.kind_a == a && c.kind_b == b);
                let v = match c.and_then(|c| c.r) {
                    Some(r) => format!("{r:.3} (n={})", c.map_or(0, |c| c.n)),
                    None => "-".into(),
                };
                let _ = write!(s, " {v:>18}");
            }
            s.push('\n');
        }
    }
    s
}

/// One point of the AME-versus-model-size plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub model: String,
    /// Parameter count in billions, when configured.
    pub size_b: Option<f64>,
    pub dataset: String,
    pub kind: MutationKind,
    pub ame: f64,
    pub n_informative: usize,
}

pub fn scale_csv(rows: &[AmeResult], sizes: &std::collections::BTreeMap<String, f64>, prov: &Provenance) -> Result<String, MetricsError> {
    #[derive(Serialize)]
    struct Row<'a> {
        model: &'a str,
        size_b: String,
        dataset: &'a str,
        kind: MutationKind,
        ame: String,
        n_informative: usize,
        config_hash: &'a str,
        seed: u64,
    }
    let mut sorted: Vec<&AmeResult> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        let sa = sizes.get(&a.model).copied().unwrap_or(f64::INFINITY);
        let sb = sizes.get(&b.model).copied().unwrap_or(f64::INFINITY);
        sa.total_cmp(&sb).then_with(|| (&a.model, &a.dataset, a.kind).cmp(&(&b.model, &b.dataset, b.kind)))
    });
    csv_string(sorted.into_iter().map(|r| Row {
        model: &r.model,
        size_b: sizes.get(&r.model).map(|s| s.to_string()).unwrap_or_default(),
        dataset: &r.dataset,
        kind: r.kind,
        ame: format!("{:.2}", r.ame),
        n_informative: r.n_informative,
        config_hash: &prov.config_hash,
        seed: prov.seed,
    }))
}

pub fn freq_csv(rep: &OperatorFrequencyReport, prov: &Provenance) -> Result<String, MetricsError> {
    #[derive(Serialize)]
    struct Row<'a> {
        a: &'a str,
        b: &'a str,
        count_a: u64,
        count_b: u64,
        ratio: String,
        config_hash: &'a str,
        seed: u64,
    }
    csv_string(rep.pairs.iter().map(|p| Row {
        a: &p.a,
        b: &p.b,
        count_a: p.count_a,
        count_b: p.count_b,
        ratio: p.ratio.map(|r| format!("{r:.2}")).unwrap_or_else(|| "undefined".into()),
        config_hash: &prov.config_hash,
        seed: prov.seed,
    }))
}

pub fn freq_text(rep: &OperatorFrequencyReport, prov: &Provenance) -> String {
    let mut s = format!(
        "files {} (skipped {}); config {} seed {}\n{:<6} {:<6} {:>10} {:>10} {:>9}\n",
        rep.counts.files, rep.counts.skipped, prov.config_hash, prov.seed, "A", "B", "count(A)", "count(B)", "A/B"
    );
    for p in &rep.pairs {
        let ratio = p.ratio.map(|r| format!("{r:.2}")).unwrap_or_else(|| "undefined".into());
        let _ = writeln!(s, "{:<6} {:<6} {:>10} {:>10} {:>9}", p.a, p.b, p.count_a, p.count_b, ratio);
    }
    if !rep.deltas.is_empty() {
        s.push_str("\ncorrectness change per flip direction (percentage points)\n");
        for d in &rep.deltas {
            let v = d.delta.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "{:<20} {:>3} -> {:<3} {:>8} (n={})", d.model, d.from, d.to, v, d.n);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ame_table, OperatorCounts};
    use crate::Provenance;

    fn rec(p: &str, k: MutationKind, a: u8, b: u8) -> MEffectRecord {
        let mut r = MEffectRecord::new(p, p, k, a, b);
        r.model = "m".into();
        r.dataset = "humaneval".into();
        r
    }

    #[test]
    fn emitters_are_stable() {
        let recs = vec![
            rec("a", MutationKind::IfElseFlip, 1, 0),
            rec("b", MutationKind::IfElseFlip, 1, 1),
            rec("a", MutationKind::VarRenameRandom, 1, 0),
            rec("b", MutationKind::VarRenameRandom, 1, 1),
        ];
        let prov = Provenance {
            config_hash: "h".into(),
            seed: 3,
        };
        let (t, _) = ame_table(&recs);
        let csv = ame_csv(&t, &prov).unwrap();
        assert!(csv.starts_with("model,dataset,kind,ame,"));
        assert!(csv.contains("m,humaneval,var-rename-random,50.00,"));
        assert!(ame_text(&t, &prov).contains("50.00 (n=2)"));
        let cells = correlation_matrix(&recs);
        assert_eq!(cells.len(), 25);
        let c = cells
            .iter()
            .find(|c| c.kind_a == MutationKind::IfElseFlip && c.kind_b == MutationKind::VarRenameRandom)
            .unwrap();
        assert_eq!((c.r, c.n), (Some(1.0), 2));
        assert!(correlation_csv(&cells, &prov).unwrap().contains(",1.0000,2,h,3"));
        let mut counts = OperatorCounts::default();
        counts.counts.insert("==".into(), 39);
        counts.counts.insert("!=".into(), 10);
        let rep = OperatorFrequencyReport::from_counts(counts);
        assert!(freq_csv(&rep, &prov).unwrap().contains("==,!=,39,10,3.90,h,3"));
        assert!(freq_text(&rep, &prov).contains("undefined"));
    }
}
