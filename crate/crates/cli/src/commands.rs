//! Command bodies. Every stage reads and writes plain files in an output
//! directory, so stages can be re-run independently.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cfprobe_core::cf_gen::{generate_pairs as gen_pairs, CounterfactualPair, Problem};
use cfprobe_core::datasets::{ingest, Rejection};
use cfprobe_core::harness::store::{read_jsonl, write_sorted};
use cfprobe_core::harness::{evaluate as run_eval, EvalSettings, RecordStore, Sandbox};
use cfprobe_core::metrics::{
    ame_csv, ame_table, ame_text, correlation_csv, correlation_matrix, correlation_text, filter_informative, freq_csv, freq_text, operator_frequency,
    scale_csv, MEffectRecord, MetricsError, OperatorCounts, OperatorFrequencyReport,
};
use cfprobe_core::mutations::{apply, enumerate_candidates};
use cfprobe_core::Provenance;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use crate::config::RunConfig;

pub struct Outcome {
    pub summary: Value,
    /// Some problems or records failed; results were still written.
    pub partial: bool,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write(path, &s)
}

fn file_digest(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).to_vec())
}

/// Short hex hash over several byte strings.
fn combine(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn sandbox(cfg: &RunConfig) -> Result<Sandbox> {
    let sb = Sandbox::new(cfg.sandbox.clone());
    sb.check_interpreter().with_context(|| format!("python interpreter `{}` is not usable", cfg.sandbox.python))?;
    Ok(sb)
}

/// Records as JSON objects carrying the run's config hash and seed.
fn stamped<T: Serialize>(items: &[T], prov: &Provenance) -> Result<Vec<Value>> {
    items
        .iter()
        .map(|it| {
            let mut v = serde_json::to_value(it)?;
            if let Some(o) = v.as_object_mut() {
                o.insert("config_hash".into(), prov.config_hash.clone().into());
                o.insert("seed".into(), prov.seed.into());
            }
            Ok(v)
        })
        .collect()
}

#[derive(Serialize)]
struct DatasetRejection<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    rejection: &'a Rejection,
}

/// Ingest every configured dataset with reference validation.
fn load_problems(cfg: &RunConfig, sb: &Sandbox, out: &Path, prov: &Provenance) -> Result<Vec<Problem>> {
    let mut problems = Vec::new();
    let mut rejected = Vec::new();
    for d in &cfg.datasets {
        let got = ingest(&d.path, d.format, Some(sb), cfg.limit).with_context(|| format!("ingesting {}", d.path.display()))?;
        info!(dataset = %d.format, accepted = got.problems.len(), rejected = got.rejected.len(), "ingested");
        for r in got.rejected {
            rejected.push((d.format.as_str(), r));
        }
        problems.extend(got.problems);
    }
    let rows: Vec<DatasetRejection> = rejected.iter().map(|(d, r)| DatasetRejection { dataset: d, rejection: r }).collect();
    write_sorted(&out.join("rejected.jsonl"), &stamped(&rows, prov)?)?;
    Ok(problems)
}

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn file_name_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn mutate(cfg: &RunConfig, out: &Path, validate: bool) -> Result<Outcome> {
    let seed = cfg.seed()?;
    let prov = Provenance {
        config_hash: combine(&[cfg.hash()?.as_bytes(), b"mutate", &[validate as u8]]),
        seed,
    };
    prepare_out(out)?;
    let sb = sandbox(cfg)?;
    let problems = load_problems(cfg, &sb, out, &prov)?;
    let per_problem: Vec<Result<Vec<Value>, String>> = problems
        .par_iter()
        .map(|p| {
            let subject = p.subject().map_err(|e| format!("{}: {e}", p.id))?;
            let dir = out.join("mutants").join(file_name_safe(&p.id));
            let mut rows = Vec::new();
            for &kind in &cfg.kinds {
                for (i, inst) in enumerate_candidates(kind, &subject, seed).iter().enumerate() {
                    let mutant = match apply(&subject, inst) {
                        Ok(m) => m,
                        Err(e) => {
                            warn!(problem = %p.id, %kind, i, error = %e, "mutation not applicable");
                            continue;
                        }
                    };
                    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
                    let file = dir.join(format!("{kind}-{i}.py"));
                    std::fs::write(&file, &mutant.text).map_err(|e| e.to_string())?;
                    let passes = validate.then(|| sb.run_tests(&mutant.text, &p.test_suite).status.as_str());
                    rows.push(json!({
                        "problem_id": p.id,
                        "dataset": p.dataset,
                        "kind": kind,
                        "index": i,
                        "file": file.strip_prefix(out).unwrap_or(&file),
                        "instance": inst,
                        "status": passes,
                        "config_hash": prov.config_hash,
                        "seed": seed,
                    }));
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in per_problem {
        match r {
            Ok(v) => rows.extend(v),
            Err(e) => failures.push(e),
        }
    }
    write_sorted(&out.join("mutants.jsonl"), &rows)?;
    let failing = rows.iter().filter(|r| r["status"].as_str().is_some_and(|s| s != "pass")).count();
    Ok(Outcome {
        partial: !failures.is_empty(),
        summary: json!({
            "status": if failures.is_empty() { "ok" } else { "partial" },
            "command": "mutate",
            "config_hash": prov.config_hash,
            "seed": seed,
            "problems": problems.len(),
            "mutants": rows.len(),
            "failing_mutants": if validate { Some(failing) } else { None },
            "failures": failures,
        }),
    })
}

pub fn generate_pairs(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let seed = cfg.seed()?;
    let prov = Provenance {
        config_hash: combine(&[cfg.hash()?.as_bytes(), b"generate-pairs"]),
        seed,
    };
    prepare_out(out)?;
    let sb = sandbox(cfg)?;
    let problems = load_problems(cfg, &sb, out, &prov)?;
    write_sorted(&out.join("problems.jsonl"), &stamped(&problems, &prov)?)?;
    let mut g = gen_pairs(&sb, &problems, &cfg.kinds, seed);
    for p in &mut g.pairs {
        p.config_hash = prov.config_hash.clone();
    }
    write_sorted(&out.join("pairs.jsonl"), &g.pairs)?;
    write_sorted(&out.join("failures.jsonl"), &stamped(&g.failures, &prov)?)?;
    write(&out.join("counts.txt"), &g.counts.to_text(&prov))?;
    write(&out.join("counts.csv"), &g.counts.to_csv(&prov)?)?;
    let diff: Vec<Value> = g
        .counts
        .reference_diff()
        .into_iter()
        .map(|(group, kind, ours, reference)| json!({"group": group, "kind": kind, "pairs": ours, "reference": reference}))
        .collect();
    write_json(
        &out.join("counts.json"),
        &json!({"config_hash": prov.config_hash, "seed": seed, "rows": g.counts.rows, "reference_comparison": diff}),
    )?;
    let partial = !g.failures.is_empty();
    Ok(Outcome {
        partial,
        summary: json!({
            "status": if partial { "partial" } else { "ok" },
            "command": "generate-pairs",
            "config_hash": prov.config_hash,
            "seed": seed,
            "problems": problems.len(),
            "pairs": g.pairs.len(),
            "failures": g.failures.len(),
        }),
    })
}

pub fn evaluate(cfg: &RunConfig, pairs_dir: &Path, endpoint: Option<&str>, out: &Path) -> Result<Outcome> {
    let seed = cfg.seed()?;
    let ep = cfg.endpoint(endpoint)?;
    let mut cfg = cfg.clone();
    cfg.endpoint = Some(ep.name.clone());
    let pairs_path = pairs_dir.join("pairs.jsonl");
    let problems_path = pairs_dir.join("problems.jsonl");
    let prov = Provenance {
        config_hash: combine(&[
            cfg.hash()?.as_bytes(),
            b"evaluate",
            serde_json::to_string(&ep)?.as_bytes(),
            &file_digest(&pairs_path)?,
            &file_digest(&problems_path)?,
        ]),
        seed,
    };
    let pairs: Vec<CounterfactualPair> = read_jsonl(&pairs_path)?;
    let problems: BTreeMap<String, Problem> = read_jsonl::<Problem>(&problems_path)?.into_iter().map(|p| (p.id.clone(), p)).collect();
    prepare_out(out)?;
    let sb = sandbox(&cfg)?;
    let store = RecordStore::open(out.join("completions.jsonl"))?;
    let settings = EvalSettings {
        repeat: cfg.repeat.max(1),
        stop_markers: cfg.stop_markers.clone(),
        config_hash: prov.config_hash.clone(),
        seed,
    };
    let res = run_eval(&pairs, &problems, &ep, &sb, &store, &settings)?;
    write_sorted(&out.join("effects.jsonl"), &res.effects)?;
    let (_, discarded) = filter_informative(&res.effects);
    let partial = !res.failed.is_empty() || !res.indeterminate.is_empty();
    let summary = json!({
        "status": if partial { "partial" } else { "ok" },
        "command": "evaluate",
        "config_hash": prov.config_hash,
        "seed": seed,
        "endpoint": ep.name,
        "pairs": pairs.len(),
        "repeat": settings.repeat,
        "effects": res.effects.len(),
        "discarded_both_fail": discarded,
        "indeterminate": res.indeterminate.len(),
        "failed_requests": res.failed.len(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(Outcome { summary, partial })
}

/// Indeterminate counts recorded next to effect files by `evaluate`.
fn indeterminate_near(effects: &[PathBuf]) -> u64 {
    effects
        .iter()
        .filter_map(|p| p.parent())
        .filter_map(|d| std::fs::read_to_string(d.join("summary.json")).ok())
        .filter_map(|s| serde_json::from_str::<Value>(&s).ok())
        .filter_map(|v| v["indeterminate"].as_u64())
        .sum()
}

fn load_effects(paths: &[PathBuf]) -> Result<Vec<MEffectRecord>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_jsonl::<MEffectRecord>(p)?);
    }
    Ok(all)
}

fn report_provenance(cfg: &RunConfig, tag: &[u8], inputs: &[PathBuf], records: &[MEffectRecord]) -> Result<Provenance> {
    let mut parts: Vec<Vec<u8>> = vec![cfg.hash()?.into_bytes(), tag.to_vec()];
    for p in inputs {
        parts.push(file_digest(p)?);
    }
    let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
    let seed = cfg.seed.or_else(|| records.first().map(|r| r.seed)).unwrap_or(0);
    Ok(Provenance {
        config_hash: combine(&refs),
        seed,
    })
}

pub fn report(cfg: &RunConfig, effects: &[PathBuf], out: &Path) -> Result<Outcome> {
    let records = load_effects(effects)?;
    if records.is_empty() {
        bail!("no effect records in {}", effects.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    }
    let prov = report_provenance(cfg, b"report", effects, &records)?;
    prepare_out(out)?;
    let (rows, empty) = ame_table(&records);
    let (_, discarded) = filter_informative(&records);
    let indeterminate = indeterminate_near(effects);
    let empty: Vec<Value> = empty.iter().map(|(m, d, k)| json!({"model": m, "dataset": d, "kind": k})).collect();
    write_json(
        &out.join("ame.json"),
        &json!({
            "config_hash": prov.config_hash,
            "seed": prov.seed,
            "records": records.len(),
            "discarded_both_fail": discarded,
            "indeterminate_excluded": indeterminate,
            "rows": rows,
            "undefined_groups": empty,
        }),
    )?;
    write(&out.join("ame.csv"), &ame_csv(&rows, &prov)?)?;
    let mut text = ame_text(&rows, &prov);
    text.push_str(&format!("\nboth-fail pairs discarded: {discarded}; indeterminate runs excluded: {indeterminate}\n"));
    write(&out.join("ame.txt"), &text)?;
    let cells = correlation_matrix(&records);
    write_json(&out.join("correlation.json"), &json!({"config_hash": prov.config_hash, "seed": prov.seed, "cells": cells}))?;
    write(&out.join("correlation.csv"), &correlation_csv(&cells, &prov)?)?;
    write(&out.join("correlation.txt"), &correlation_text(&cells, &prov))?;
    write(&out.join("scale.csv"), &scale_csv(&rows, &cfg.model_sizes, &prov)?)?;
    Ok(Outcome {
        partial: false,
        summary: json!({
            "status": "ok",
            "command": "report",
            "config_hash": prov.config_hash,
            "seed": prov.seed,
            "records": records.len(),
            "groups": rows.len(),
        }),
    })
}

pub fn freq(cfg: &RunConfig, corpora: &[PathBuf], effects: &[PathBuf], out: &Path) -> Result<Outcome> {
    let records = load_effects(effects)?;
    let prov = report_provenance(cfg, b"freq", effects, &records)?;
    prepare_out(out)?;
    let mut total = OperatorCounts::default();
    let mut shards = Vec::new();
    for c in corpora {
        match operator_frequency(c) {
            Ok(r) => {
                total.merge(&r.counts);
                shards.push(json!({"corpus": c, "counts": r.counts}));
            }
            Err(MetricsError::EmptyCorpus(d)) => {
                warn!(corpus = %d, "no parseable files");
                shards.push(json!({"corpus": c, "counts": null}));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if total.files == 0 {
        bail!(MetricsError::EmptyCorpus(corpora.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")));
    }
    let rep = OperatorFrequencyReport::from_counts(total).with_flip_effects(&records);
    write_json(
        &out.join("freq.json"),
        &json!({"config_hash": prov.config_hash, "seed": prov.seed, "report": rep, "shards": shards}),
    )?;
    write(&out.join("freq.csv"), &freq_csv(&rep, &prov)?)?;
    write(&out.join("freq.txt"), &freq_text(&rep, &prov))?;
    Ok(Outcome {
        partial: false,
        summary: json!({
            "status": "ok",
            "command": "freq",
            "config_hash": prov.config_hash,
            "seed": prov.seed,
            "files": rep.counts.files,
            "skipped": rep.counts.skipped,
        }),
    })
}
