//! Bare-operator expansion of the ground state.
//!
//! Writing H^Bog = D + V with D its diagonal (the Ĥ⁰ and kinetic parts) and
//! V the pairing terms W + W*, the eigenvector with unit η component obeys
//! P̄ψ = −R̄(z)P̄Vψ, R̄(z) = P̄(D − z)⁻¹P̄. Iterating at a fixed reference z
//! gives the partial sums
//!
//!   ψ_k = Σ_{n≤k} [−R̄(z) V]^n η,
//!
//! each built only from bare resolvents and W + W*. At z = z_* the series is
//! the exact Brillouin–Wigner expansion; at z = E^Bog it converges to a
//! nearby vector and the error against the flow state settles at a floor.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{condensate_vector, FockBasis};
use crate::operator::SparseOp;

/// Partial sums ψ_0..ψ_order and, when a reference is supplied, their errors.
#[derive(Clone, Debug)]
pub struct BareExpansion {
    pub reference_z: f64,
    pub orders: Vec<DVector<f64>>,
    pub errors: Option<Vec<f64>>,
}

impl BareExpansion {
    /// ‖ψ − ψ_k‖/‖ψ‖ with both scaled to unit η component.
    pub fn with_reference(mut self, basis: &FockBasis, psi: &DVector<f64>) -> Result<Self> {
        let c = psi[basis.condensate_index()];
        if c == 0.0 {
            return Err(Error::Parameter(
                "reference state has no condensate component".into(),
            ));
        }
        let psi = psi / c;
        let nrm = psi.norm();
        self.errors = Some(
            self.orders
                .iter()
                .map(|v| (&psi - v).norm() / nrm)
                .collect(),
        );
        Ok(self)
    }

    /// Errors never increase from one order to the next.
    pub fn monotone(&self) -> bool {
        self.errors
            .as_ref()
            .is_some_and(|e| e.windows(2).all(|w| w[1] <= w[0]))
    }

    /// Smallest error reached.
    pub fn floor(&self) -> Option<f64> {
        self.errors
            .as_ref()
            .map(|e| e.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn summary(&self) -> ExpansionSummary {
        ExpansionSummary {
            reference_z: self.reference_z,
            order: self.orders.len() - 1,
            errors: self.errors.clone(),
            monotone: self.monotone(),
            floor: self.floor(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSummary {
    pub reference_z: f64,
    pub order: usize,
    pub errors: Option<Vec<f64>>,
    pub monotone: bool,
    pub floor: Option<f64>,
}

/// ψ_k for k = 0..=order from the Bogoliubov operator `h_bog` at reference z.
pub fn bare_expansion(
    basis: &FockBasis,
    h_bog: &SparseOp,
    order: usize,
    z: f64,
) -> Result<BareExpansion> {
    let eta = condensate_vector(basis);
    let c = basis.condensate_index();
    let diag = h_bog.diagonal();
    let scale = diag.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut rinv = vec![0.0; diag.len()];
    for (p, &d) in diag.iter().enumerate() {
        if p == c {
            continue;
        }
        let denom = d - z;
        if !(denom.abs() > 1e-12 * scale) {
            return Err(Error::ResolventSingular { position: p, denom });
        }
        rinv[p] = 1.0 / denom;
    }
    let off = h_bog.sub(&SparseOp::from_diagonal(&diag));
    let mut orders = vec![eta.clone()];
    let mut term = eta;
    for _ in 0..order {
        let v = off.matvec(&term);
        term = DVector::from_fn(v.len(), |p, _| -rinv[p] * v[p]);
        let next = orders.last().unwrap() + &term;
        orders.push(next);
    }
    Ok(BareExpansion {
        reference_z: z,
        orders,
        errors: None,
    })
}
