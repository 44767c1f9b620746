//! The generic Feshbach map (Schur complement onto a kept index set).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::SparseOp;

/// How complement inverses are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InverseStrategy {
    #[default]
    Direct,
    Neumann,
    /// direct inverse, cross-checked against the Neumann series
    Both,
}

/// Convergence knobs of the Neumann path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannConfig {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for NeumannConfig {
    fn default() -> Self {
        NeumannConfig {
            tol: 1e-13,
            max_terms: 10_000,
        }
    }
}

/// Invertibility diagnostics of the complement block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityReport {
    /// eigenvalue of smallest magnitude
    pub min_abs_eig: f64,
    pub min_eig: f64,
    pub cond: f64,
    pub neumann_terms: Option<usize>,
    pub neumann_radius: Option<f64>,
    /// ‖Neumann − direct‖ / ‖direct‖ when both ran
    pub neumann_diff: Option<f64>,
}

/// Effective operator on the kept set and its diagnostics.
#[derive(Clone, Debug)]
pub struct FeshbachResult {
    pub effective: DMatrix<f64>,
    pub report: InvertibilityReport,
}

/// Relative size below which a complement eigenvalue counts as zero.
const SINGULAR_REL: f64 = 1e-13;

/// P(K−z)P − PKP̄ (P̄(K−z)P̄)⁻¹ P̄KP on the positions in `keep`.
pub fn feshbach_map(
    k: &SparseOp,
    keep: &[usize],
    z: f64,
    strategy: InverseStrategy,
    neumann: &NeumannConfig,
) -> Result<FeshbachResult> {
    let n = k.dim();
    let mut kept = vec![false; n];
    for &i in keep {
        if i >= n || kept[i] {
            return Err(Error::Parameter(format!(
                "keep index {i} out of range or repeated"
            )));
        }
        kept[i] = true;
    }
    let comp: Vec<usize> = (0..n).filter(|&i| !kept[i]).collect();
    let mut kpp = k.block(keep, keep);
    for i in 0..keep.len() {
        kpp[(i, i)] -= z;
    }
    if comp.is_empty() {
        let report = InvertibilityReport {
            min_abs_eig: f64::INFINITY,
            min_eig: f64::INFINITY,
            cond: 1.0,
            neumann_terms: None,
            neumann_radius: None,
            neumann_diff: None,
        };
        return Ok(FeshbachResult {
            effective: kpp,
            report,
        });
    }
    let mut kcc = k.block(&comp, &comp);
    for i in 0..comp.len() {
        kcc[(i, i)] -= z;
    }
    let kcp = k.block(&comp, keep);
    let kpc = k.block(keep, &comp);

    let eig = SymmetricEigen::new(kcc.clone()).eigenvalues;
    let min_abs = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let max_abs = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_eig = eig.min();
    if !(min_abs > SINGULAR_REL * max_abs.max(1.0)) {
        return Err(Error::Singular {
            step: 0,
            min_eig: signed_min_abs(eig.as_slice()),
        });
    }
    let mut report = InvertibilityReport {
        min_abs_eig: min_abs,
        min_eig,
        cond: max_abs / min_abs,
        neumann_terms: None,
        neumann_radius: None,
        neumann_diff: None,
    };
    let direct = || {
        kcc.clone()
            .lu()
            .try_inverse()
            .ok_or(Error::Singular { step: 0, min_eig })
    };
    let inv = match strategy {
        InverseStrategy::Direct => direct()?,
        InverseStrategy::Neumann | InverseStrategy::Both => {
            let (ser, terms, radius) = jacobi_neumann(&kcc, neumann, 0)?;
            report.neumann_terms = Some(terms);
            report.neumann_radius = Some(radius);
            if strategy == InverseStrategy::Both {
                let d = direct()?;
                let diff = (&ser - &d).norm() / d.norm();
                report.neumann_diff = Some(diff);
                if diff > neumann.tol {
                    return Err(Error::NeumannMismatch { step: 0, diff });
                }
                d
            } else {
                ser
            }
        }
    };
    let effective = kpp - kpc * inv * kcp;
    Ok(FeshbachResult { effective, report })
}

fn signed_min_abs(v: &[f64]) -> f64 {
    v.iter()
        .copied()
        .fold(f64::INFINITY, |m, x| if x.abs() < m.abs() { x } else { m })
}

/// (D + O)⁻¹ = Σ_k (−D⁻¹O)^k D⁻¹ with D the diagonal of `a`.
fn jacobi_neumann(
    a: &DMatrix<f64>,
    cfg: &NeumannConfig,
    step: usize,
) -> Result<(DMatrix<f64>, usize, f64)> {
    let n = a.nrows();
    let dinv = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / a[(i, i)] } else { 0.0 });
    if dinv.iter().any(|v| !v.is_finite()) {
        return Err(Error::NeumannDivergence {
            step,
            radius: f64::INFINITY,
        });
    }
    let mut off = a.clone();
    off.fill_diagonal(0.0);
    let step_op = -(&dinv * &off);
    neumann_sum(&dinv, &step_op, cfg, step)
}

/// Σ_k X^k B, with X the `step_op`; returns (sum, terms used, spectral radius of X).
pub(crate) fn neumann_sum(
    base: &DMatrix<f64>,
    step_op: &DMatrix<f64>,
    cfg: &NeumannConfig,
    step: usize,
) -> Result<(DMatrix<f64>, usize, f64)> {
    let radius = spectral_radius(step_op);
    if !(radius < 1.0) {
        return Err(Error::NeumannDivergence { step, radius });
    }
    let mut term = base.clone();
    let mut sum = base.clone();
    let tail = radius / (1.0 - radius);
    for k in 1..=cfg.max_terms {
        term = step_op * &term;
        sum += &term;
        let tn = term.norm();
        if tn * tail <= 0.1 * cfg.tol * sum.norm() || tn == 0.0 {
            return Ok((sum, k + 1, radius));
        }
    }
    Err(Error::NeumannDivergence { step, radius })
}

pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .fold(0.0f64, |r, c| r.max(c.norm()))
}
