//! Counterfactual probes for code-completion models.

pub mod analysis;
pub mod cf_gen;
pub mod datasets;
pub mod harness;
pub mod metrics;
pub mod mutations;

use serde::{Deserialize, Serialize};

/// Run identity stamped onto every emitted file: a hash of the effective
/// configuration and the seed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}
