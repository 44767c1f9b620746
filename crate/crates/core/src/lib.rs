//! Occupation-number Feshbach flows for a Bose gas on a torus.
//!
//! The crate builds number-conserving Fock bases over a finite momentum
//! window, assembles the Bogoliubov, full and auxiliary Hamiltonians, runs
//! block Schur-complement flows down the pair-occupation sectors, solves the
//! resulting scalar fixed-point equation for the ground energy, and checks
//! everything against an exact-diagonalization oracle.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feshbach;
pub mod fock;
pub mod hamiltonians;
pub mod operator;
pub mod oracle;
pub mod scalar;

pub use error::{Error, Result};
pub use feshbach::{
    bare_expansion, feshbach_map, fixed_point_fn, reconstruct_ground_state, run_bog_chain,
    run_bog_flow, run_full_flow, run_staged_full, solve_fixed_point, solve_ground_energy,
    truncated_gamma, BareExpansion, FeshbachResult, FixedPointResult, Flow, FlowConfig, FlowKind,
    FlowTrace, GammaDecomposition, GapLedger, InverseStrategy, StageResult,
};
pub use fock::{
    build_mode_window, enumerate_basis, BasisDump, FockBasis, Mode, ModeWindow, Monomial,
    MonomialSpec, OperatorDump,
};
pub use hamiltonians::{e_bog, Hamiltonians, ModelSpec, PotentialSpec};
pub use operator::SparseOp;
pub use oracle::{
    lowest_eigenpairs, overlap, quadratic_control_fit, residual, verify_psd, xi_inequality,
    EigenResult, OracleConfig, PsdReport, QuadraticControlFit,
};
