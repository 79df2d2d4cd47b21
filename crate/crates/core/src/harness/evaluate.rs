//! Query a model on both sides of every pair, execute, and score.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use super::assemble::assemble_program;
use super::endpoint::{EndpointError, EndpointKind, ModelEndpoint, Side};
use super::sandbox::{ExecutionResult, Sandbox, Status};
use super::store::{Keyed, RecordStore, StoreError};
use crate::cf_gen::{CounterfactualPair, Problem};
use crate::metrics::MEffectRecord;
use crate::mutations::MutationTarget;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub pair_id: String,
    pub side: Side,
    #[serde(default)]
    pub sample: u32,
    pub model: String,
    /// Exactly the stored prefix of this side.
    pub prompt_text: String,
    pub completion_text: String,
    pub latency_ms: u64,
    pub execution: ExecutionResult,
    /// 1 when every test passed; `None` when the executor itself failed.
    pub attribution: Option<u8>,
    pub config_hash: String,
    pub seed: u64,
}

impl Keyed for CompletionRecord {
    type Key = (String, String, Side, u32);
    fn key(&self) -> Self::Key {
        (self.model.clone(), self.pair_id.clone(), self.side, self.sample)
    }
}

/// A ∈ {0, 1} from an execution, or `None` (indeterminate) when the
/// sandbox failed rather than the candidate.
pub fn attribution(result: &ExecutionResult) -> Option<u8> {
    match result.status {
        Status::SandboxError => None,
        Status::Pass => Some(1),
        _ => Some(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Completions per pair side (the prompt is identical each time).
    pub repeat: u32,
    pub stop_markers: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            repeat: 1,
            stop_markers: Vec::new(),
            config_hash: String::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("pair {0} refers to an unknown problem")]
    UnknownProblem(String),
}

#[derive(Debug, Clone, Default)]
pub struct EvalOutcome {
    pub effects: Vec<MEffectRecord>,
    /// (pair, sample) combinations with a sandbox failure on either side.
    pub indeterminate: Vec<(String, u32)>,
    /// Pairs whose completion request failed for good.
    pub failed: Vec<(String, String)>,
}

/// Evaluate every pair with `endpoint`. Completed work already in `store`
/// is reused, so an interrupted run resumes where it stopped.
pub fn evaluate(
    pairs: &[CounterfactualPair],
    problems: &BTreeMap<String, Problem>,
    endpoint: &ModelEndpoint,
    sandbox: &Sandbox,
    store: &RecordStore<CompletionRecord>,
    settings: &EvalSettings,
) -> Result<EvalOutcome, EvalError> {
    for p in pairs {
        if !problems.contains_key(&p.problem_id) {
            return Err(EvalError::UnknownProblem(p.pair_id.clone()));
        }
    }
    let client = match endpoint.kind {
        EndpointKind::Remote => Some(endpoint.client()?),
        _ => None,
    };
    let jobs: Vec<(&CounterfactualPair, Side, u32)> = pairs
        .iter()
        .flat_map(|p| (0..settings.repeat.max(1)).flat_map(move |s| Side::BOTH.map(|side| (p, side, s))))
        .collect();
    let errors: Vec<(String, String)> = jobs
        .par_iter()
        .filter_map(|&(pair, side, sample)| {
            let key = (endpoint.name.clone(), pair.pair_id.clone(), side, sample);
            if store.get(&key).is_some() {
                return None;
            }
            let problem = &problems[&pair.problem_id];
            match run_side(pair, problem, endpoint, client.as_ref(), sandbox, side, sample, settings) {
                Ok(rec) => store.insert(rec).err().map(|e| (pair.pair_id.clone(), e.to_string())),
                Err(e) => {
                    warn!(pair = %pair.pair_id, side = side.as_str(), error = %e, "completion failed");
                    Some((pair.pair_id.clone(), e.to_string()))
                }
            }
        })
        .collect();
    store.finalize()?;
    let mut out = EvalOutcome {
        failed: errors,
        ..EvalOutcome::default()
    };
    for pair in pairs {
        for sample in 0..settings.repeat.max(1) {
            let get = |side| store.get(&(endpoint.name.clone(), pair.pair_id.clone(), side, sample));
            let (Some(o), Some(m)) = (get(Side::Original), get(Side::Mutated)) else {
                continue;
            };
            match (o.attribution, m.attribution) {
                (Some(a), Some(b)) => {
                    let mut r = MEffectRecord::new(&pair.pair_id, &pair.problem_id, pair.kind, a, b);
                    r.dataset = pair.dataset.clone();
                    r.model = endpoint.name.clone();
                    r.sample = sample;
                    r.flip_operator = match &pair.instance.target {
                        MutationTarget::Relational(site) => Some(site.operator.clone()),
                        _ => None,
                    };
                    r.config_hash = settings.config_hash.clone();
                    r.seed = settings.seed;
                    out.effects.push(r);
                }
                _ => out.indeterminate.push((pair.pair_id.clone(), sample)),
            }
        }
    }
    info!(
        effects = out.effects.len(),
        indeterminate = out.indeterminate.len(),
        failed = out.failed.len(),
        "evaluation finished"
    );
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_side(
    pair: &CounterfactualPair,
    problem: &Problem,
    endpoint: &ModelEndpoint,
    client: Option<&reqwest::blocking::Client>,
    sandbox: &Sandbox,
    side: Side,
    sample: u32,
    settings: &EvalSettings,
) -> Result<CompletionRecord, EndpointError> {
    let prefix = match side {
        Side::Original => &pair.prefix_original,
        Side::Mutated => &pair.prefix_mutated,
    };
    let completion = endpoint.complete(client, pair, side)?;
    let program = assemble_program(&pair.frame, prefix, &completion.text, &settings.stop_markers);
    let execution = sandbox.run_tests(&program, &problem.test_suite);
    Ok(CompletionRecord {
        pair_id: pair.pair_id.clone(),
        side,
        sample,
        model: endpoint.name.clone(),
        prompt_text: prefix.clone(),
        completion_text: completion.text,
        latency_ms: completion.latency_ms,
        attribution: attribution(&execution),
        execution,
        config_hash: settings.config_hash.clone(),
        seed: settings.seed,
    })
}
