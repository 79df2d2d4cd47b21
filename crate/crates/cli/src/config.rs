//! Run configuration: TOML file plus command-line overrides, and the hash
//! that identifies a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cfprobe_core::datasets::DatasetFormat;
use cfprobe_core::harness::{EndpointKind, ModelEndpoint, SandboxPolicy};
use cfprobe_core::mutations::MutationKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DatasetFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub datasets: Vec<DatasetSpec>,
    pub kinds: Vec<MutationKind>,
    /// Named endpoints; the oracles are always available by kind name.
    pub endpoints: Vec<ModelEndpoint>,
    pub endpoint: Option<String>,
    pub sandbox: SandboxPolicy,
    pub workers: usize,
    /// Completions per pair side.
    pub repeat: u32,
    /// Maximum accepted problems per dataset (meant for CodeContests).
    pub limit: Option<usize>,
    pub stop_markers: Vec<String>,
    /// Parameter counts in billions, for the model-size CSV.
    pub model_sizes: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            datasets: Vec::new(),
            kinds: MutationKind::ALL.to_vec(),
            endpoints: Vec::new(),
            endpoint: None,
            sandbox: SandboxPolicy::default(),
            workers: 8,
            repeat: 1,
            limit: None,
            stop_markers: Vec::new(),
            model_sizes: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative dataset paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.context("a seed is required (--seed or `seed` in the config file)")
    }

    /// Resolve an endpoint by configured name, or an oracle by kind name.
    pub fn endpoint(&self, name: Option<&str>) -> Result<ModelEndpoint> {
        let Some(name) = name.or(self.endpoint.as_deref()) else {
            bail!("no endpoint selected (--endpoint)");
        };
        if let Some(e) = self.endpoints.iter().find(|e| e.name == name) {
            return Ok(e.clone());
        }
        match name.parse::<EndpointKind>() {
            Ok(EndpointKind::Remote) | Err(_) => bail!("unknown endpoint `{name}`; configure it under [[endpoints]]"),
            Ok(k) => Ok(ModelEndpoint::oracle(k)),
        }
    }

    /// Hash of everything that can change results: the configuration minus
    /// output location and parallelism, plus the dataset file contents.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("workers");
            o.remove("datasets");
            if let Some(sb) = o.get_mut("sandbox").and_then(|s| s.as_object_mut()) {
                sb.remove("workers");
            }
        }
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&v)?);
        for d in &self.datasets {
            h.update(d.format.as_str().as_bytes());
            let bytes = std::fs::read(&d.path).with_context(|| format!("reading {}", d.path.display()))?;
            h.update(Sha256::digest(&bytes));
        }
        Ok(h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}
