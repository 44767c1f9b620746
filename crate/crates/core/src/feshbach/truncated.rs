//! Splitting Γ into truncated-series pieces.
//!
//! Γ at block P is built from the inverses M_q⁻¹ = R_q Σ_k (Γ_q R_q)^k of the
//! lower levels q < P. Three evaluation rules per level:
//! exact (full inverse), truncated (k < h) and first (k = 0 only).
//!
//! * Γ^{[q]}: levels ≤ q exact, levels above truncated. The (h+) piece at
//!   level q is Γ^{[q]} − Γ^{[q−1]}: what the series tail at level q adds.
//! * G^{[q]}: levels < q first-only, levels ≥ q truncated. The (h−) piece
//!   at level q is G^{[q]} − G^{[q+1]}.
//!
//! Γ_P = G^{[P]} + Σ_q (h−)_q + Σ_q (h+)_q telescopes exactly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::flow::Flow;
use crate::error::{Error, Result};
use crate::scalar::KzConstants;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rule {
    Exact,
    Truncated(u32),
    First,
}

/// Pieces of Γ at one target block.
#[derive(Clone, Debug)]
pub struct GammaDecomposition {
    pub h: u32,
    /// target flow step i
    pub step: usize,
    pub gamma: DMatrix<f64>,
    /// all levels first-only
    pub base: DMatrix<f64>,
    /// (flow step l, piece)
    pub minus: Vec<(usize, DMatrix<f64>)>,
    pub plus: Vec<(usize, DMatrix<f64>)>,
    /// ‖R^{1/2}·piece·R^{1/2}‖ of each (h+) piece, R at the target block
    pub plus_norms: Vec<f64>,
    pub minus_norms: Vec<f64>,
    /// Z_l^h ∏K/(1−Z)² bounds beside `plus_norms`, when constants were given
    pub plus_bounds: Option<Vec<f64>>,
    /// ‖Γ − Σ pieces‖/‖Γ‖
    pub reassembly_error: f64,
}

impl GammaDecomposition {
    /// Levels whose measured tail exceeds the bound.
    pub fn bound_violations(&self) -> Vec<usize> {
        match &self.plus_bounds {
            None => Vec::new(),
            Some(b) => self
                .plus
                .iter()
                .zip(&self.plus_norms)
                .zip(b)
                .filter(|((_, n), b)| !(**n <= **b))
                .map(|((p, _), _)| p.0)
                .collect(),
        }
    }

    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            h: self.h,
            step: self.step,
            levels: self.plus.iter().map(|(l, _)| *l).collect(),
            plus_norms: self.plus_norms.clone(),
            minus_norms: self.minus_norms.clone(),
            plus_bounds: self.plus_bounds.clone(),
            reassembly_error: self.reassembly_error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub h: u32,
    pub step: usize,
    pub levels: Vec<usize>,
    pub plus_norms: Vec<f64>,
    pub minus_norms: Vec<f64>,
    pub plus_bounds: Option<Vec<f64>>,
    pub reassembly_error: f64,
}

/// Γ at `target` with the per-level rule chosen by `rule(q)`.
fn gamma_with(
    flow: &Flow,
    w: f64,
    target: usize,
    rule: impl Fn(usize) -> Rule,
) -> Result<DMatrix<f64>> {
    let n0 = flow.block(0).len();
    let mut gamma = DMatrix::zeros(n0, n0);
    for q in 0..target {
        let mut bw = flow.diag_block(q).clone();
        for k in 0..bw.nrows() {
            bw[(k, k)] -= w;
        }
        let step = flow.steps()[q];
        let minv = match rule(q) {
            Rule::Exact => {
                (&bw - &gamma)
                    .cholesky()
                    .map(|c| c.inverse())
                    .ok_or(Error::Singular {
                        step,
                        min_eig: f64::NAN,
                    })?
            }
            Rule::Truncated(h) => {
                let r = bw.cholesky().map(|c| c.inverse()).ok_or(Error::Singular {
                    step,
                    min_eig: f64::NAN,
                })?;
                let x = &r * &gamma;
                let mut term = r.clone();
                let mut sum = r.clone();
                for _ in 1..h {
                    term = &x * &term;
                    sum += &term;
                }
                sum
            }
            Rule::First => bw.cholesky().map(|c| c.inverse()).ok_or(Error::Singular {
                step,
                min_eig: f64::NAN,
            })?,
        };
        let c = flow.coupling(q);
        let g = c * minv * c.transpose();
        gamma = 0.5 * (&g + g.transpose());
    }
    Ok(gamma)
}

/// Decompose Γ at block `target` (index into the flow's blocks) at w.
pub fn truncated_gamma(
    flow: &Flow,
    w: f64,
    target: usize,
    h: u32,
    bounds: Option<&KzConstants>,
) -> Result<GammaDecomposition> {
    if h < 2 {
        return Err(Error::Parameter(format!(
            "truncation order h must be at least 2 (got {h})"
        )));
    }
    if target == 0 || target > flow.last() {
        return Err(Error::Parameter(format!(
            "target block {target} out of range 1..={}",
            flow.last()
        )));
    }
    let steps = flow.steps();
    let gamma = gamma_with(flow, w, target, |_| Rule::Exact)?;
    // Γ^{[q]} for q = 0..target−1 (level 0 carries Γ₀ = 0, so exact = truncated there)
    let upper: Vec<DMatrix<f64>> = (0..target)
        .map(|q| {
            gamma_with(flow, w, target, |lvl| {
                if lvl <= q {
                    Rule::Exact
                } else {
                    Rule::Truncated(h)
                }
            })
        })
        .collect::<Result<_>>()?;
    // G^{[q]} for q = 1..=target
    let lower: Vec<DMatrix<f64>> = (1..=target)
        .map(|q| {
            gamma_with(flow, w, target, |lvl| {
                if lvl < q {
                    Rule::First
                } else {
                    Rule::Truncated(h)
                }
            })
        })
        .collect::<Result<_>>()?;
    let base = lower[target - 1].clone();
    let plus: Vec<(usize, DMatrix<f64>)> = (1..target)
        .map(|q| (steps[q], &upper[q] - &upper[q - 1]))
        .collect();
    let minus: Vec<(usize, DMatrix<f64>)> = (1..target)
        .map(|q| (steps[q], &lower[q - 1] - &lower[q]))
        .collect();
    // sanity: Γ^{[0]} (all truncated) equals G^{[1]}
    let mut sum = base.clone();
    for (_, m) in minus.iter().chain(plus.iter()) {
        sum += m;
    }
    let gn = gamma.norm();
    let reassembly_error = if gn > 0.0 {
        (&gamma - &sum).norm() / gn
    } else {
        (&gamma - &sum).norm()
    };
    let plus_norms = plus
        .iter()
        .map(|(_, m)| flow.normalized_norm(target, w, m))
        .collect();
    let minus_norms = minus
        .iter()
        .map(|(_, m)| flow.normalized_norm(target, w, m))
        .collect();
    let plus_bounds = bounds.map(|kz| {
        plus.iter()
            .map(|(l, _)| kz.tail_bound(*l, steps[target], h))
            .collect::<Vec<_>>()
    });
    Ok(GammaDecomposition {
        h,
        step: steps[target],
        gamma,
        base,
        minus,
        plus,
        plus_norms,
        minus_norms,
        plus_bounds,
        reassembly_error,
    })
}
