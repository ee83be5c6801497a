use serde::{Deserialize, Serialize};

use super::plan::{GenerationPlan, Method, PlanOutcome};

/// Version of the JSON layout of [`CostReport`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMetadata {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: u64,
    pub fixed_primates: bool,
    pub chain_slack: usize,
    pub pin_boundary_c: bool,
    pub all_pairings: bool,
    /// Number of (chain, pairings, orientation) candidates searched.
    pub candidates: usize,
    pub evaluations: u64,
    pub iterations: u64,
    /// Whether the local search that produced the best plan met its
    /// tolerance before the iteration cap.
    pub converged: bool,
    /// Lowest `ν` among all evaluated plans.
    pub min_nu_seen: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub schema_version: u32,
    pub qubits: u32,
    pub target_s: f64,
    pub method: Method,
    pub nu: f64,
    pub single_pass_prob: f64,
    pub plan: GenerationPlan,
    pub metadata: OptimizerMetadata,
}

impl CostReport {
    pub(crate) fn new(
        qubits: u32,
        target_s: f64,
        method: Method,
        plan: GenerationPlan,
        outcome: PlanOutcome,
        metadata: OptimizerMetadata,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            qubits,
            target_s,
            method,
            nu: outcome.nu,
            single_pass_prob: outcome.single_pass_prob,
            plan,
            metadata,
        }
    }
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub qubits: u32,
    pub target_s: f64,
    pub method: Method,
    pub result: std::result::Result<CostReport, String>,
}
