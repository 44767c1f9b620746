//! Exact-diagonalization oracle: extremal eigenpairs, PSD checks, overlaps.

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::Hamiltonians;
use crate::operator::SparseOp;

/// Below this dimension the dense solver is used.
pub const DENSE_LIMIT: usize = 2000;

/// Lowest eigenpairs, ascending.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub dense: bool,
}

impl EigenResult {
    pub fn ground(&self) -> (f64, &DVector<f64>) {
        (self.values[0], &self.vectors[0])
    }

    /// λ₂ − λ₁, if two values were requested.
    pub fn gap(&self) -> Option<f64> {
        (self.values.len() > 1).then(|| self.values[1] - self.values[0])
    }
}

/// Solver knobs for the iterative path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub tol: f64,
    pub seed: u64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// force the iterative path even for small matrices
    pub force_iterative: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tol: 1e-10,
            seed: 0x5eed,
            krylov_dim: 120,
            max_restarts: 200,
            force_iterative: false,
        }
    }
}

/// Flip sign so the largest-magnitude component is positive.
pub fn fix_phase(v: &mut DVector<f64>) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best * (1.0 + 1e-12) {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        *v *= -1.0;
    }
}

/// k smallest eigenpairs of a symmetric operator.
pub fn lowest_eigenpairs(a: &SparseOp, k: usize, cfg: &OracleConfig) -> Result<EigenResult> {
    if a.asymmetry() > 1e-12 * a.max_abs().max(1.0) {
        return Err(Error::Parameter("operator is not symmetric".into()));
    }
    let k = k.min(a.dim()).max(1);
    if a.dim() < DENSE_LIMIT && !cfg.force_iterative {
        return Ok(dense_lowest(&a.to_dense(), k));
    }
    lanczos_lowest(a, k, cfg)
}

/// Dense path on an explicit matrix: Householder tridiagonalization, Sturm
/// bisection for the k lowest eigenvalues, then shifted inverse iteration on
/// the original matrix for the vectors.
pub fn dense_lowest(m: &DMatrix<f64>, k: usize) -> EigenResult {
    let n = m.nrows();
    let k = k.min(n);
    if n <= 2 {
        return full_dense(m, k);
    }
    let tri = SymmetricTridiagonal::new(m.clone());
    let diag: Vec<f64> = tri.diagonal().iter().copied().collect();
    let off: Vec<f64> = tri.off_diagonal().iter().copied().collect();
    let scale = m
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE)
        * n as f64;
    let mut values = Vec::with_capacity(k);
    let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd5eed);
    for j in 0..k {
        let lam = sturm_kth(&diag, &off, j);
        let (mut v, lam) = inverse_iteration(m, lam, scale, &vectors, &mut rng);
        fix_phase(&mut v);
        residuals.push((m * &v - &v * lam).norm());
        values.push(lam);
        vectors.push(v);
    }
    EigenResult {
        values,
        vectors,
        residuals,
        iterations: 0,
        dense: true,
    }
}

/// Reference path: full symmetric QR (used for tiny matrices).
fn full_dense(m: &DMatrix<f64>, k: usize) -> EigenResult {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    for &i in order.iter().take(k) {
        let lam = eig.eigenvalues[i];
        let mut v = eig.eigenvectors.column(i).into_owned();
        fix_phase(&mut v);
        residuals.push((m * &v - &v * lam).norm());
        values.push(lam);
        vectors.push(v);
    }
    EigenResult {
        values,
        vectors,
        residuals,
        iterations: 0,
        dense: true,
    }
}

/// Number of eigenvalues of the tridiagonal (d, e) strictly below x.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..d.len() {
        let b2 = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The j-th smallest eigenvalue (0-based) by bisection.
fn sturm_kth(d: &[f64], e: &[f64], j: usize) -> f64 {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let pad = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
    lo -= pad;
    hi += pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

type Solve = dyn Fn(&DVector<f64>) -> Option<DVector<f64>>;

/// Inverse iteration at a shift just below `lam`, orthogonal to `locked`;
/// returns the unit vector and its Rayleigh quotient.
fn inverse_iteration(
    m: &DMatrix<f64>,
    lam: f64,
    scale: f64,
    locked: &[DVector<f64>],
    rng: &mut ChaCha8Rng,
) -> (DVector<f64>, f64) {
    let n = m.nrows();
    let mut delta = 1e-13 * scale;
    let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    orthogonalize(&mut v, locked);
    v /= v.norm();
    for _attempt in 0..8 {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= lam - delta;
        }
        let solver: Box<Solve> = match a.clone().cholesky() {
            Some(ch) => Box::new(move |b| Some(ch.solve(b))),
            None => {
                let lu = a.lu();
                if !lu.is_invertible() {
                    delta *= 10.0;
                    continue;
                }
                Box::new(move |b| lu.solve(b))
            }
        };
        let mut ok = true;
        for _ in 0..6 {
            let Some(mut x) = solver(&v) else {
                ok = false;
                break;
            };
            orthogonalize(&mut x, locked);
            let nrm = x.norm();
            if !(nrm.is_finite() && nrm > 0.0) {
                ok = false;
                break;
            }
            v = x / nrm;
        }
        if ok {
            break;
        }
        delta *= 10.0;
    }
    let rq = v.dot(&(m * &v));
    (v, rq)
}

/// Lanczos with full reorthogonalization, explicit restarts and locking.
fn lanczos_lowest(a: &SparseOp, k: usize, cfg: &OracleConfig) -> Result<EigenResult> {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut locked: Vec<DVector<f64>> = Vec::new();
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let mut total = 0;
    let m = cfg.krylov_dim.min(n);
    while locked.len() < k {
        let mut start = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let mut converged = None;
        let mut last_res = f64::INFINITY;
        for _ in 0..cfg.max_restarts {
            orthogonalize(&mut start, &locked);
            let nrm = start.norm();
            if nrm == 0.0 {
                return Err(Error::ZeroVector);
            }
            start /= nrm;
            let (theta, y) = lanczos_run(a, &start, &locked, m);
            total += 1;
            let r = (a.matvec(&y) - &y * theta).norm();
            last_res = r;
            if r <= cfg.tol * theta.abs().max(1.0) {
                converged = Some((theta, y, r));
                break;
            }
            start = y;
        }
        let Some((theta, mut y, r)) = converged else {
            return Err(Error::NoConvergence {
                iterations: total,
                residual: last_res,
            });
        };
        fix_phase(&mut y);
        values.push(theta);
        residuals.push(r);
        locked.push(y);
    }
    Ok(EigenResult {
        values,
        vectors: locked,
        residuals,
        iterations: total,
        dense: false,
    })
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(v);
            v.axpy(-c, q, 1.0);
        }
    }
}

/// One Lanczos cycle; returns the lowest Ritz pair of the deflated operator.
fn lanczos_run(
    a: &SparseOp,
    start: &DVector<f64>,
    locked: &[DVector<f64>],
    m: usize,
) -> (f64, DVector<f64>) {
    let mut qs: Vec<DVector<f64>> = vec![start.clone()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..m {
        let mut w = a.matvec(&qs[j]);
        orthogonalize(&mut w, locked);
        let al = qs[j].dot(&w);
        alpha.push(al);
        orthogonalize(&mut w, &qs);
        let b = w.norm();
        if j + 1 == m || b < 1e-13 * al.abs().max(1.0) {
            break;
        }
        beta.push(b);
        qs.push(w / b);
    }
    let dim = alpha.len();
    let mut t = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        t[(i, i)] = alpha[i];
        if i + 1 < dim {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let low = dense_lowest(&t, 1);
    let s = &low.vectors[0];
    let mut y = DVector::zeros(start.len());
    for (i, q) in qs.iter().take(dim).enumerate() {
        y.axpy(s[i], q, 1.0);
    }
    let nrm = y.norm();
    (low.values[0], y / nrm)
}

/// Verdict of a positive-semidefiniteness check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eig: f64,
    pub slack: f64,
    pub pass: bool,
}

/// min-eig(A) ≥ −slack.
pub fn verify_psd(a: &SparseOp, slack: f64) -> PsdReport {
    verify_psd_dense(&a.to_dense(), slack)
}

pub fn verify_psd_dense(a: &DMatrix<f64>, slack: f64) -> PsdReport {
    let min_eig = a.symmetric_eigenvalues().min();
    PsdReport {
        min_eig,
        slack,
        pass: min_eig >= -slack,
    }
}

/// |⟨u,v⟩| / (‖u‖‖v‖).
pub fn overlap(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(u.dot(v).abs() / (nu * nv))
}

/// ‖A v − λ v‖ / ‖v‖.
pub fn residual(a: &SparseOp, lambda: f64, v: &DVector<f64>) -> Result<f64> {
    let nv = v.norm();
    if nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a.matvec(v) - v * lambda).norm() / nv)
}

/// Constants (C₁, C₂) with H² ≥ C₁𝒩₊² − C₂, chosen on a grid of C₁.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticControlFit {
    pub c1: f64,
    pub c2: f64,
    /// (C₁, smallest admissible C₂) for every grid point
    pub table: Vec<(f64, f64)>,
    /// verdict on H² − C₁𝒩₊² + C₂ with the selected pair
    pub report: PsdReport,
}

/// For each C₁ on the grid the smallest C₂ is −min-eig(H² − C₁𝒩₊²) (floored at
/// 0); the selected pair minimizes C₂/C₁, the 𝒩₊² level beyond which the
/// bound carries information. The selected pair is then re-verified.
pub fn quadratic_control_fit(
    h: &SparseOp,
    n_plus: &SparseOp,
    grid: &[f64],
    slack: f64,
) -> Result<QuadraticControlFit> {
    if h.dim() != n_plus.dim() {
        return Err(Error::Parameter("operator dimensions differ".into()));
    }
    if grid.is_empty() || grid.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Parameter(
            "C1 grid must be nonempty and positive".into(),
        ));
    }
    let hd = h.to_dense();
    let h2 = &hd * &hd;
    let n2 = n_plus.matmul(n_plus).to_dense();
    let mut table = Vec::with_capacity(grid.len());
    for &c1 in grid {
        let a = &h2 - &n2 * c1;
        let min = a.symmetric_eigenvalues().min();
        table.push((c1, (-min).max(0.0)));
    }
    let &(c1, c2) = table
        .iter()
        .min_by(|a, b| (a.1 / a.0).total_cmp(&(b.1 / b.0)))
        .expect("nonempty grid");
    let mut a = &h2 - &n2 * c1;
    for i in 0..a.nrows() {
        a[(i, i)] += c2;
    }
    let scale = h2.amax().max(1.0);
    let report = verify_psd_dense(&a, slack * scale);
    Ok(QuadraticControlFit {
        c1,
        c2,
        table,
        report,
    })
}

/// The ξ-inequality for pair m (1-based):
/// (H^#)_ξ − (1−ξ)T_{±j_m} − z^# + (m−1)ξ^{1/2}/M ≥ 0,
/// with z^# the ground energy of H^# built on the first m−1 pairs (0 for m = 1).
/// It is an asymptotic statement; at desk scale the verdict is a measurement.
pub fn xi_inequality(
    hs: &Hamiltonians,
    m: usize,
    xi: f64,
    slack: f64,
    cfg: &OracleConfig,
) -> Result<PsdReport> {
    let parts = hs.xi_deformation(m, xi)?;
    let z_sharp = if m == 1 {
        0.0
    } else {
        lowest_eigenpairs(&hs.h_sharp(m)?, 1, cfg)?.values[0]
    };
    let big_m = hs.model.pairs.len() as f64;
    let shift = -z_sharp + (m as f64 - 1.0) * xi.sqrt() / big_m;
    let t_m = hs.kinetic_of(&[m - 1]).scale(1.0 - xi);
    let dim = hs.basis.dim();
    let a = parts
        .h_sharp_xi
        .sub(&t_m)
        .add(&SparseOp::identity(dim).scale(shift));
    Ok(verify_psd(&a, slack))
}
