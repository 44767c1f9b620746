//! Single flows, multi-pair stage chains and the gap ledger.
//!
//! Stage k flows pair k through the operator of that stage, seeded by the
//! ground state of stage k−1 (the condensate for k = 1):
//!
//! * Bogoliubov chain: H^Bog_{j_1..j_k}, ī = 0.
//! * Full chain: for k < m the auxiliary H^#_{j_1..j_k} with every monomial
//!   touching ±j_{k+1..m} removed, and H_{j_1..j_m} at k = m; aggregated
//!   first step ī.
//!
//! Each stage operator conserves the occupation of every later pair, so its
//! ground state lives in the s = 0 sector of the next pair and seeds it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::flow::{Flow, FlowConfig, FlowTrace, TraceSummary};
use super::reconstruct::reconstruct_ground_state;
use super::solve::{default_lower, range_warnings, solve_fixed_point, FixedPointResult, FlowKind};
use crate::error::{Error, Result};
use crate::fock::{condensate_vector, FockBasis};
use crate::hamiltonians::{Hamiltonians, ModelSpec, STRICT_NU};
use crate::operator::SparseOp;
use crate::oracle::{fix_phase, lowest_eigenpairs, overlap, residual, OracleConfig};
use crate::scalar::{abc_constants, x_sequence, THETA_DEFAULT};

/// One solved stage.
#[derive(Clone, Debug)]
pub struct StageResult {
    /// 1-based stage number
    pub stage: usize,
    /// 0-based pair index flowed in this stage
    pub pair: usize,
    pub operator: String,
    pub result: FixedPointResult,
    /// reconstructed ground state, unit norm, phase fixed
    pub state: DVector<f64>,
    pub trace: TraceSummary,
}

/// Flow of H^Bog along pair `l` at energy z (ī = 0), seeded by η unless given.
pub fn run_bog_flow(
    h_bog: &SparseOp,
    basis: &FockBasis,
    model: &ModelSpec,
    l: usize,
    z: f64,
    seed: Option<&DVector<f64>>,
    cfg: &FlowConfig,
) -> Result<(Flow, FlowTrace)> {
    cfg.validate()?;
    let flow = Flow::new(h_bog, basis, pair_mode(model, l)?, 0)?;
    let seed = seed_for(&flow, basis, seed)?;
    let mut trace = flow.evaluate(z, &seed, cfg)?;
    attach_x(&mut trace, model, l, cfg);
    trace
        .warnings
        .extend(range_warnings(model, l, 0.0, z, cfg.delta));
    Ok((flow, trace))
}

/// Flow of the full (or auxiliary) operator along pair `l` with the
/// aggregated first step; ψ^# seeds the last projection.
pub fn run_full_flow(
    h: &SparseOp,
    basis: &FockBasis,
    model: &ModelSpec,
    l: usize,
    z: f64,
    psi_sharp: &DVector<f64>,
    cfg: &FlowConfig,
) -> Result<(Flow, FlowTrace)> {
    cfg.validate()?;
    let ibar = cfg.ibar.unwrap_or_else(|| model.default_ibar());
    let flow = Flow::new(h, basis, pair_mode(model, l)?, ibar)?;
    let seed = flow.seed_from(psi_sharp)?;
    let mut trace = flow.evaluate(z, &seed, cfg)?;
    attach_x(&mut trace, model, l, cfg);
    Ok((flow, trace))
}

fn pair_mode(model: &ModelSpec, l: usize) -> Result<usize> {
    model
        .pairs
        .get(l)
        .map(|p| p.plus)
        .ok_or_else(|| Error::Parameter(format!("pair index {l} out of range")))
}

fn seed_for(flow: &Flow, basis: &FockBasis, seed: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    match seed {
        Some(s) if s.len() == basis.dim() => flow.seed_from(s),
        Some(s) => {
            let n = s.norm();
            if !(n > 0.0) {
                return Err(Error::ZeroVector);
            }
            Ok(s / n)
        }
        None => flow.seed_from(&condensate_vector(basis)),
    }
}

fn attach_x(trace: &mut FlowTrace, model: &ModelSpec, l: usize, cfg: &FlowConfig) {
    let p = &model.pairs[l];
    if !p.eps.is_finite() {
        return;
    }
    let delta = cfg.delta.unwrap_or(p.delta);
    match abc_constants(p.eps, delta, STRICT_NU, 0.0)
        .and_then(|abc| x_sequence(&abc, model.n, THETA_DEFAULT))
    {
        Ok(xs) => trace.attach_x(&xs),
        Err(e) => trace.warnings.push(format!("x-sequence unavailable: {e}")),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    basis: &FockBasis,
    model: &ModelSpec,
    h: &SparseOp,
    operator: String,
    stage: usize,
    l: usize,
    ibar: usize,
    seed_full: &DVector<f64>,
    shift: f64,
    bracket: Option<[f64; 2]>,
    cfg: &FlowConfig,
    oracle: Option<&OracleConfig>,
) -> Result<StageResult> {
    let flow = Flow::new(h, basis, pair_mode(model, l)?, ibar)?;
    let seed = flow.seed_from(seed_full)?;
    let lo = default_lower(model, l + 1);
    let root = solve_fixed_point(&flow, &seed, bracket, Some(lo), cfg.root_tol)?;
    let mut trace = flow.evaluate(root.z, &seed, cfg)?;
    attach_x(&mut trace, model, l, cfg);
    let psi = reconstruct_ground_state(&flow, &trace)?;
    let mut result = FixedPointResult::from_root(&root, trace.last.off_term);
    result.warnings.extend(trace.warnings.iter().cloned());
    result
        .warnings
        .extend(range_warnings(model, l, shift, root.z, cfg.delta));
    result.state_residual = Some(residual(h, root.z, &psi)?);
    let mut state = &psi / psi.norm();
    fix_phase(&mut state);
    if let Some(ocfg) = oracle {
        let eig = lowest_eigenpairs(h, 2, ocfg)?;
        result.oracle_energy = Some(eig.values[0]);
        result.oracle_gap = eig.gap();
        result.overlap = Some(overlap(&state, &eig.vectors[0])?);
    }
    log::debug!(
        "stage {stage} ({operator}): z = {} residual {:e}",
        root.z,
        root.residual
    );
    Ok(StageResult {
        stage,
        pair: l,
        operator,
        result,
        state,
        trace: trace.summary(),
    })
}

/// Bogoliubov chain over the first m pairs.
pub fn run_bog_chain(
    basis: &FockBasis,
    model: &ModelSpec,
    m: usize,
    cfg: &FlowConfig,
    oracle: Option<&OracleConfig>,
) -> Result<Vec<StageResult>> {
    cfg.validate()?;
    check_m(model, m)?;
    let hs = Hamiltonians::new(basis, model)?;
    let mut out: Vec<StageResult> = Vec::new();
    let mut seed = condensate_vector(basis);
    let mut shift = 0.0;
    for k in 1..=m {
        let list: Vec<usize> = (0..k).collect();
        let h = hs.h_bog(&list)?;
        let bracket = if k == m { cfg.bracket } else { None };
        let st = run_stage(
            basis,
            model,
            &h,
            format!("H^Bog[1..{k}]"),
            k,
            k - 1,
            0,
            &seed,
            shift,
            bracket,
            cfg,
            oracle,
        )?;
        seed = st.state.clone();
        shift = st.result.z;
        out.push(st);
    }
    Ok(out)
}

/// Auxiliary-to-full chain over the first m pairs.
pub fn run_staged_full(
    basis: &FockBasis,
    model: &ModelSpec,
    m: usize,
    cfg: &FlowConfig,
    oracle: Option<&OracleConfig>,
) -> Result<Vec<StageResult>> {
    cfg.validate()?;
    check_m(model, m)?;
    let hs = Hamiltonians::new(basis, model)?;
    let ibar = cfg.ibar.unwrap_or_else(|| model.default_ibar());
    let mut out: Vec<StageResult> = Vec::new();
    let mut seed = condensate_vector(basis);
    let mut shift = 0.0;
    for k in 1..=m {
        let (h, name) = if k < m {
            let excluded: Vec<usize> = (k..m).collect();
            (hs.h_sharp_excluding(k, &excluded)?, format!("H#[1..{k}]"))
        } else {
            (hs.h_full(m)?, format!("H[1..{m}]"))
        };
        let bracket = if k == m { cfg.bracket } else { None };
        let st = run_stage(
            basis,
            model,
            &h,
            name,
            k,
            k - 1,
            ibar,
            &seed,
            shift,
            bracket,
            cfg,
            oracle,
        )?;
        seed = st.state.clone();
        shift = st.result.z;
        out.push(st);
    }
    Ok(out)
}

fn check_m(model: &ModelSpec, m: usize) -> Result<()> {
    if m == 0 || m > model.pairs.len() {
        return Err(Error::Parameter(format!(
            "need 1 ≤ m ≤ {} pairs (got {m})",
            model.pairs.len()
        )));
    }
    Ok(())
}

/// Ground energy of the m-pair problem through the chosen chain.
pub fn solve_ground_energy(
    basis: &FockBasis,
    model: &ModelSpec,
    kind: FlowKind,
    m: usize,
    cfg: &FlowConfig,
    oracle: Option<&OracleConfig>,
) -> Result<FixedPointResult> {
    let stages = match kind {
        FlowKind::Bog => run_bog_chain(basis, model, m, cfg, oracle)?,
        FlowKind::Full => run_staged_full(basis, model, m, cfg, oracle)?,
    };
    Ok(stages.into_iter().last().expect("m ≥ 1").result)
}

/// Constants of the analytic gap recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapConstants {
    pub gamma: f64,
    pub c_perp: f64,
    pub c_iii: f64,
}

impl Default for GapConstants {
    fn default() -> Self {
        GapConstants {
            gamma: 0.5,
            c_perp: 0.0,
            c_iii: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub m: usize,
    pub ground: f64,
    /// second eigenvalue minus ground energy
    pub measured: f64,
    /// Δ_m = γΔ_{m−1} − C⊥/(ln N)^{1/2} − (2/γ)^m C_III/(ln N)^{1/4}
    pub recursion: Option<f64>,
}

/// Measured gaps per stage beside the analytic recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapLedger {
    /// Δ₀ = min k² over the window
    pub delta0: f64,
    pub entries: Vec<GapEntry>,
}

impl GapLedger {
    pub fn all_positive(&self) -> bool {
        self.entries.iter().all(|e| e.measured > 0.0)
    }
}

pub fn gap_ledger(
    basis: &FockBasis,
    model: &ModelSpec,
    kind: FlowKind,
    m: usize,
    constants: Option<&GapConstants>,
    ocfg: &OracleConfig,
) -> Result<GapLedger> {
    check_m(model, m)?;
    let hs = Hamiltonians::new(basis, model)?;
    let delta0 = model.window.min_nonzero_k2();
    let ln = (model.n as f64).ln();
    let mut prev = delta0;
    let mut entries = Vec::new();
    for k in 1..=m {
        let list: Vec<usize> = (0..k).collect();
        let h = match kind {
            FlowKind::Bog => hs.h_bog(&list)?,
            FlowKind::Full => hs.h_full(k)?,
        };
        let eig = lowest_eigenpairs(&h, 2, ocfg)?;
        let recursion = constants.map(|c| {
            let v = c.gamma * prev
                - c.c_perp / ln.sqrt()
                - (2.0 / c.gamma).powi(k as i32) * c.c_iii / ln.powf(0.25);
            prev = v;
            v
        });
        entries.push(GapEntry {
            m: k,
            ground: eig.values[0],
            measured: eig.gap().unwrap_or(f64::INFINITY),
            recursion,
        });
    }
    Ok(GapLedger { delta0, entries })
}

/// C̃_m = Σφ/Δ₀, the bound on ⟨𝒩₊⟩ in the Bogoliubov ground state.
pub fn occupation_bound(model: &ModelSpec, m: usize) -> f64 {
    model.phi_sum(m) / model.window.min_nonzero_k2()
}
