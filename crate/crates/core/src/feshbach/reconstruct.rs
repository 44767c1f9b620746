//! Ground-state reconstruction by back-substitution through the flow.

use nalgebra::DVector;

use super::flow::{Flow, FlowTrace};
use crate::error::{Error, Result};

/// Largest condition number accepted for a chain factor M_p.
pub const MAX_CHAIN_COND: f64 = 1e13;

/// ψ = ψ_last − Σ_p M_p⁻¹ C … : the (unnormalized) eigenvector whose ψ̂
/// component is 1, from a trace evaluated at the fixed point.
pub fn reconstruct_ground_state(flow: &Flow, trace: &FlowTrace) -> Result<DVector<f64>> {
    for s in &trace.steps {
        if !(s.cond <= MAX_CHAIN_COND) {
            return Err(Error::Conditioning {
                step: s.step,
                cond: s.cond,
            });
        }
    }
    Ok(flow.back_substitute(&trace.minv, &trace.last.psi_last))
}
