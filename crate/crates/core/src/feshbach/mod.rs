//! Feshbach (Schur-complement) flows and everything built on them.

mod expansion;
mod flow;
mod map;
mod reconstruct;
mod solve;
mod staged;
mod truncated;

pub use expansion::{bare_expansion, BareExpansion, ExpansionSummary};
pub use flow::{
    flow_partition, Flow, FlowConfig, FlowTrace, LastStep, StepRecord, StepSummary, TraceSummary,
};
pub use map::{feshbach_map, FeshbachResult, InverseStrategy, InvertibilityReport, NeumannConfig};
pub use reconstruct::{reconstruct_ground_state, MAX_CHAIN_COND};
pub use solve::{
    default_lower, fixed_point_fn, gershgorin_lower, range_warnings, solve_fixed_point,
    FixedPointResult, FlowKind, RootReport,
};
pub use staged::{
    gap_ledger, occupation_bound, run_bog_chain, run_bog_flow, run_full_flow, run_staged_full,
    solve_ground_energy, GapConstants, GapEntry, GapLedger, StageResult,
};
pub use truncated::{truncated_gamma, DecompositionSummary, GammaDecomposition};
