//! Fixed-point function and the safeguarded root search for the ground energy.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::flow::{Flow, FlowConfig};
use crate::error::{Error, Result};
use crate::hamiltonians::ModelSpec;

/// Which Hamiltonian family a run flows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    /// H^Bog chain, ī = 0
    Bog,
    /// staged auxiliary Hamiltonians closing on H, aggregated first step
    Full,
}

/// f(w): the scalar left after the last projection, 𝒦^{(N)}(w) = f(w)|ψ̂⟩⟨ψ̂|.
pub fn fixed_point_fn(flow: &Flow, w: f64, seed: &DVector<f64>) -> Result<f64> {
    Ok(flow.evaluate(w, seed, &FlowConfig::default())?.last.f)
}

/// Outcome of the root search on one flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub z: f64,
    /// |f(z)|
    pub residual: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
    /// f′(z) = −‖ψ‖², at most −1
    pub slope: f64,
}

const MAX_ITER: usize = 400;

/// Lower Gershgorin bound of the blocked operator.
pub fn gershgorin_lower(flow: &Flow) -> f64 {
    let mut lo = f64::INFINITY;
    for p in 0..flow.len() {
        let b = flow.diag_block(p);
        for r in 0..b.nrows() {
            let mut off: f64 = (0..b.ncols())
                .filter(|&c| c != r)
                .map(|c| b[(r, c)].abs())
                .sum();
            if p + 1 < flow.len() {
                off += flow
                    .coupling(p)
                    .column(r)
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>();
            }
            if p > 0 {
                off += flow
                    .coupling(p - 1)
                    .row(r)
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>();
            }
            lo = lo.min(b[(r, r)] - off);
        }
    }
    lo
}

/// Root of f on [lo, hi]. The side test "w below the ground energy" is
/// monotone (every pivot positive and f(w) > 0), so bisection on it always
/// converges; Newton steps with f′ = −‖ψ‖² accelerate once the complement
/// of ψ̂ is positive. Without an explicit bracket, lo defaults to `lo_hint`
/// (or the Gershgorin bound) and hi to the seed's Rayleigh quotient; the
/// lower end is pushed down until verified.
pub fn solve_fixed_point(
    flow: &Flow,
    seed: &DVector<f64>,
    bracket: Option<[f64; 2]>,
    lo_hint: Option<f64>,
    tol: f64,
) -> Result<RootReport> {
    let nrm = seed.norm();
    if !(nrm > 0.0) {
        return Err(Error::ZeroVector);
    }
    let seed = seed / nrm;
    let rq = flow.seed_energy(&seed);
    let explicit = bracket.is_some();
    let (mut lo, mut hi) = match bracket {
        Some([lo, hi]) => (lo, hi),
        None => {
            let lo = lo_hint
                .unwrap_or_else(|| gershgorin_lower(flow))
                .min(rq - 1.0);
            (lo, rq + 1e-9 * rq.abs().max(1.0))
        }
    };
    let accept = |z: f64, f: f64| f.abs() <= tol * z.abs().max(1.0);
    let bracket_err = |lo: f64, hi: f64| -> Error {
        let fl = flow
            .probe(lo, &seed)
            .ok()
            .flatten()
            .map_or(f64::NAN, |v| v.0);
        let fh = flow
            .probe(hi, &seed)
            .ok()
            .flatten()
            .map_or(f64::NAN, |v| v.0);
        Error::Bracket {
            lo,
            hi,
            f_lo: fl,
            f_hi: fh,
        }
    };
    // verify the lower end
    let mut widen = 0;
    loop {
        match flow.probe(lo, &seed)? {
            Some((f, _)) if f > 0.0 => break,
            Some((f, d)) if accept(lo, f) => {
                return Ok(RootReport {
                    z: lo,
                    residual: f.abs(),
                    lo,
                    hi,
                    iterations: 0,
                    slope: d,
                });
            }
            _ if explicit || widen >= 60 => return Err(bracket_err(lo, hi)),
            _ => {
                lo -= (hi - lo).max(1.0);
                widen += 1;
            }
        }
    }
    // verify the upper end
    if let Some((f, d)) = flow.probe(hi, &seed)? {
        if accept(hi, f) {
            return Ok(RootReport {
                z: hi,
                residual: f.abs(),
                lo,
                hi,
                iterations: 0,
                slope: d,
            });
        }
        if f > 0.0 {
            return Err(bracket_err(lo, hi));
        }
    }
    let (lo0, hi0) = (lo, hi);
    let mut z = lo;
    let mut best: Option<(f64, f64, f64)> = None;
    for it in 1..=MAX_ITER {
        match flow.probe(z, &seed)? {
            None => {
                hi = hi.min(z);
                z = 0.5 * (lo + hi);
            }
            Some((f, d)) => {
                if best.is_none_or(|b| f.abs() < b.1.abs()) {
                    best = Some((z, f, d));
                }
                if accept(z, f) {
                    return Ok(RootReport {
                        z,
                        residual: f.abs(),
                        lo: lo0,
                        hi: hi0,
                        iterations: it,
                        slope: d,
                    });
                }
                if f > 0.0 {
                    lo = lo.max(z);
                } else {
                    hi = hi.min(z);
                }
                let newton = z - f / d;
                z = if newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
            }
        }
        let scale = lo.abs().max(hi.abs()).max(1.0);
        if hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
    }
    // bracket collapsed at machine precision: report the best point honestly
    match best {
        Some((z, f, d)) => Ok(RootReport {
            z,
            residual: f.abs(),
            lo: lo0,
            hi: hi0,
            iterations: MAX_ITER,
            slope: d,
        }),
        None => Err(Error::NoConvergence {
            iterations: MAX_ITER,
            residual: f64::NAN,
        }),
    }
}

/// Default lower end: min(2ΣE^Bog, −Σφ) − 1 over the first m pairs, plus a shift.
pub fn default_lower(model: &ModelSpec, m: usize) -> f64 {
    (2.0 * model.e_bog_sum(m)).min(-model.phi_sum(m)) - 1.0
}

/// Which analytic admissibility windows a fixed point falls outside of.
///
/// Window (a): z − shift ≤ E^Bog + (δ−1)φ√(ε²+2ε).
/// Window (b): z − shift < E^Bog + √ε·φ√(ε²+2ε).
/// Both are advisory; violations become warnings.
pub fn range_warnings(
    model: &ModelSpec,
    l: usize,
    shift: f64,
    z: f64,
    delta: Option<f64>,
) -> Vec<String> {
    let p = &model.pairs[l];
    if p.phi == 0.0 {
        return Vec::new();
    }
    let delta = delta.unwrap_or(p.delta);
    let root = p.phi * (p.eps * p.eps + 2.0 * p.eps).sqrt();
    let eb = p.e_bog();
    let a = shift + eb + (delta - 1.0) * root;
    let b = shift + eb + p.eps.sqrt() * root;
    let mut out = Vec::new();
    if !(z <= a) {
        out.push(format!("admissible-z window (a) violated: z={z} > {a}"));
    }
    if !(z < b) {
        out.push(format!("admissible-z window (b) violated: z={z} >= {b}"));
    }
    out
}

/// Fixed point plus oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub z: f64,
    pub residual: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
    pub slope: f64,
    pub off_term: f64,
    pub oracle_energy: Option<f64>,
    pub oracle_gap: Option<f64>,
    pub overlap: Option<f64>,
    /// ‖(H − z)ψ‖/‖ψ‖ of the reconstructed state
    pub state_residual: Option<f64>,
    pub warnings: Vec<String>,
}

impl FixedPointResult {
    pub(crate) fn from_root(r: &RootReport, off_term: f64) -> Self {
        FixedPointResult {
            z: r.z,
            residual: r.residual,
            lo: r.lo,
            hi: r.hi,
            iterations: r.iterations,
            slope: r.slope,
            off_term,
            oracle_energy: None,
            oracle_gap: None,
            overlap: None,
            state_residual: None,
            warnings: Vec::new(),
        }
    }

    /// |z − oracle| if the oracle ran.
    pub fn oracle_delta(&self) -> Option<f64> {
        self.oracle_energy.map(|e| (self.z - e).abs())
    }
}
