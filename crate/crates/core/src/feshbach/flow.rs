//! Block Schur-complement flow down the pair-occupation sectors.
//!
//! Positions are grouped by s = n_j + n_{−j} of one mode pair. Block 0 holds
//! every sector with s ≥ N−ī−1 (the aggregated first step), each following
//! block the two sectors {N−i, N−i−1} of flow step i = ī+2, …, N−2, and the
//! last block the sector s = 0. Interaction monomials move s by at most two,
//! so the operator is block tridiagonal and the flow is the recursion
//!
//!   Γ₀ = 0,   M_p = B_p − w − Γ_p,   Γ_{p+1} = C_{p+1,p} M_p⁻¹ C_{p,p+1},
//!
//! closed by a one-dimensional projection onto the seed ψ̂ in the last block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use super::map::{neumann_sum, InverseStrategy, NeumannConfig};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::operator::SparseOp;
use crate::scalar::XSequence;

/// Parameters of one flow run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// first-step threshold ī (even); `None` picks the model default
    pub ibar: Option<usize>,
    /// override of δ for the flow pair
    pub delta: Option<f64>,
    /// ξ of the deformed auxiliary Hamiltonian; `None` picks (1/ln N)^{1/4}
    pub xi: Option<f64>,
    pub neumann_tol: f64,
    pub neumann_max_terms: usize,
    pub inverse_strategy: InverseStrategy,
    /// explicit fixed-point bracket [z_lo, z_hi]
    pub bracket: Option<[f64; 2]>,
    /// fixed-point tolerance: |f| ≤ tol·max(1, |z|)
    pub root_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            ibar: None,
            delta: None,
            xi: None,
            neumann_tol: 1e-13,
            neumann_max_terms: 10_000,
            inverse_strategy: InverseStrategy::Direct,
            bracket: None,
            root_tol: 1e-12,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(ib) = self.ibar {
            if ib % 2 == 1 {
                return Err(Error::Parameter(format!("ibar must be even (got {ib})")));
            }
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0 && xi < 1.0) {
                return Err(Error::Parameter(format!("xi must lie in (0,1) (got {xi})")));
            }
        }
        if !(self.neumann_tol > 0.0) {
            return Err(Error::Parameter("neumann_tol must be positive".into()));
        }
        if self.neumann_max_terms == 0 {
            return Err(Error::Parameter(
                "neumann_max_terms must be positive".into(),
            ));
        }
        if !(self.root_tol > 0.0) {
            return Err(Error::Parameter("root_tol must be positive".into()));
        }
        if let Some([lo, hi]) = self.bracket {
            if !(lo < hi) {
                return Err(Error::Parameter(format!("bracket [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub(crate) fn neumann(&self) -> NeumannConfig {
        NeumannConfig {
            tol: self.neumann_tol,
            max_terms: self.neumann_max_terms,
        }
    }
}

/// The operator cut into sector blocks, ready to be swept at any w.
#[derive(Clone, Debug)]
pub struct Flow {
    n: usize,
    pair: usize,
    ibar: usize,
    dim: usize,
    steps: Vec<usize>,
    sectors: Vec<Vec<usize>>,
    blocks: Vec<Vec<usize>>,
    diag: Vec<DMatrix<f64>>,
    /// `lower[p]` = H restricted to rows of block p+1, columns of block p
    lower: Vec<DMatrix<f64>>,
}

/// Flow steps and their sectors: (i, sectors) for each block.
pub fn flow_partition(n: usize, ibar: usize) -> Result<Vec<(usize, Vec<usize>)>> {
    if n % 2 == 1 {
        return Err(Error::OddParticleNumber(n));
    }
    if ibar % 2 == 1 || ibar + 2 > n {
        return Err(Error::Parameter(format!(
            "ibar must be even and at most N−2 (got {ibar}, N={n})"
        )));
    }
    let mut out = vec![(ibar, (n - ibar - 1..=n).collect::<Vec<_>>())];
    for i in (ibar + 2..n).step_by(2) {
        out.push((i, vec![n - i, n - i - 1]));
    }
    out.push((n, vec![0]));
    Ok(out)
}

impl Flow {
    /// Cut `h` along the sectors of window mode `pair`.
    pub fn new(h: &SparseOp, basis: &FockBasis, pair: usize, ibar: usize) -> Result<Self> {
        let n = basis.particles();
        if h.dim() != basis.dim() {
            return Err(Error::Parameter(
                "operator and basis dimensions differ".into(),
            ));
        }
        if pair == 0 || pair >= basis.window().len() {
            return Err(Error::Parameter(
                "flow pair must be a nonzero window mode".into(),
            ));
        }
        let part = flow_partition(n, ibar)?;
        let mut block_of_sector = vec![0usize; n + 1];
        for (b, (_, secs)) in part.iter().enumerate() {
            secs.iter().for_each(|&s| block_of_sector[s] = b);
        }
        let mut blocks = vec![Vec::new(); part.len()];
        let mut block_id = vec![0usize; basis.dim()];
        for p in 0..basis.dim() {
            let b = block_of_sector[basis.pair_occupation(p, pair)];
            blocks[b].push(p);
            block_id[p] = b;
        }
        if let Some(b) = blocks.iter().position(|v| v.is_empty()) {
            return Err(Error::Parameter(format!("flow block {b} is empty")));
        }
        if let Some((r, c, _)) = h
            .triplets()
            .find(|&(r, c, _)| block_id[r].abs_diff(block_id[c]) > 1)
        {
            return Err(Error::Parameter(format!(
                "operator couples non-adjacent flow blocks ({} and {})",
                block_id[r], block_id[c]
            )));
        }
        let diag = blocks.iter().map(|b| h.block(b, b)).collect();
        let lower = blocks.windows(2).map(|w| h.block(&w[1], &w[0])).collect();
        Ok(Flow {
            n,
            pair,
            ibar,
            dim: basis.dim(),
            steps: part.iter().map(|(i, _)| *i).collect(),
            sectors: part.into_iter().map(|(_, s)| s).collect(),
            blocks,
            diag,
            lower,
        })
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn pair(&self) -> usize {
        self.pair
    }

    pub fn ibar(&self) -> usize {
        self.ibar
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of blocks, including the last one.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Flow step i of each block (the last block carries i = N).
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn block(&self, p: usize) -> &[usize] {
        &self.blocks[p]
    }

    pub fn sectors(&self, p: usize) -> &[usize] {
        &self.sectors[p]
    }

    pub fn diag_block(&self, p: usize) -> &DMatrix<f64> {
        &self.diag[p]
    }

    pub fn coupling(&self, p: usize) -> &DMatrix<f64> {
        &self.lower[p]
    }

    pub fn last(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Full-space vector carrying `v` on block p.
    pub fn embed(&self, p: usize, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (k, &pos) in self.blocks[p].iter().enumerate() {
            out[pos] = v[k];
        }
        out
    }

    pub fn restrict(&self, p: usize, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.blocks[p].len(), self.blocks[p].iter().map(|&i| v[i]))
    }

    /// Normalized seed ψ̂ on the last block from a full-space state.
    pub fn seed_from(&self, full: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.restrict(self.last(), full);
        let nrm = s.norm();
        if !(nrm > 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(s / nrm)
    }

    fn check_seed(&self, seed: &DVector<f64>) -> Result<DVector<f64>> {
        if seed.len() != self.blocks[self.last()].len() {
            return Err(Error::Parameter(format!(
                "seed has length {}, last block has {}",
                seed.len(),
                self.blocks[self.last()].len()
            )));
        }
        let nrm = seed.norm();
        if !(nrm > 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(seed / nrm)
    }

    /// ⟨ψ̂, H ψ̂⟩ for a normalized last-block seed.
    pub fn seed_energy(&self, seed: &DVector<f64>) -> f64 {
        seed.dot(&(&self.diag[self.last()] * seed))
    }

    /// Full sweep at w with every diagnostic recorded.
    pub fn evaluate(&self, w: f64, seed: &DVector<f64>, cfg: &FlowConfig) -> Result<FlowTrace> {
        let seed = self.check_seed(seed)?;
        let fw = self
            .forward(w, cfg.inverse_strategy, &cfg.neumann(), true, false)?
            .expect("forward without pd requirement always completes");
        let e = self.last_matrix(w, &fw.gammas[self.last()]);
        let last = self
            .last_step(&e, &seed, false)?
            .expect("last step without pd requirement");
        let mut steps = Vec::with_capacity(self.last());
        let mut warnings = Vec::new();
        for p in 0..self.last() {
            let gcheck = self.gamma_check_norm(p, w, &fw.gammas[p]);
            if !gcheck.is_finite() {
                warnings.push(format!(
                    "step {}: B − w not positive, Γ̌ norm undefined",
                    self.steps[p]
                ));
            }
            let (min_pivot, cond) = fw.spectra[p].unwrap_or((f64::NAN, f64::NAN));
            steps.push(StepRecord {
                step: self.steps[p],
                sectors: self.sectors[p].clone(),
                indices: self.blocks[p].clone(),
                gamma: fw.gammas[p].clone(),
                gamma_check_norm: gcheck,
                x_value: None,
                min_pivot,
                cond,
                positive: fw.pd[p],
                neumann_terms: fw.neumann[p].0,
                neumann_radius: fw.neumann[p].1,
            });
        }
        let psi = self.back_substitute(&fw.minv, &last.psi_last);
        let slope = -psi.norm_squared();
        let lp = self.last();
        Ok(FlowTrace {
            w,
            pair: self.pair,
            ibar: self.ibar,
            n: self.n,
            steps,
            last: LastStep {
                step: self.n,
                indices: self.blocks[lp].clone(),
                gamma: fw.gammas[lp].clone(),
                seed,
                f: last.f,
                slope,
                off_term: last.off_term,
                off_norm: last.off_norm,
                complement_positive: last.comp_pd,
                psi_last: last.psi_last,
            },
            minv: fw.minv,
            warnings,
        })
    }

    /// Cheap sweep for root finding. `None` means the complement of ψ̂ is
    /// not positive at w, which can only happen for w at or above the ground
    /// energy; otherwise (f(w), f′(w)).
    pub(crate) fn probe(&self, w: f64, seed: &DVector<f64>) -> Result<Option<(f64, f64)>> {
        let neumann = NeumannConfig::default();
        let Some(fw) = self.forward(w, InverseStrategy::Direct, &neumann, false, true)? else {
            return Ok(None);
        };
        let e = self.last_matrix(w, &fw.gammas[self.last()]);
        let Some(last) = self.last_step(&e, seed, true)? else {
            return Ok(None);
        };
        let psi = self.back_substitute(&fw.minv, &last.psi_last);
        Ok(Some((last.f, -psi.norm_squared())))
    }

    fn last_matrix(&self, w: f64, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        let lp = self.last();
        let mut e = &self.diag[lp] - gamma;
        for k in 0..e.nrows() {
            e[(k, k)] -= w;
        }
        e
    }

    fn shifted(&self, p: usize, w: f64) -> DMatrix<f64> {
        let mut m = self.diag[p].clone();
        for k in 0..m.nrows() {
            m[(k, k)] -= w;
        }
        m
    }

    fn forward(
        &self,
        w: f64,
        strategy: InverseStrategy,
        neumann: &NeumannConfig,
        spectra: bool,
        require_pd: bool,
    ) -> Result<Option<Forward>> {
        let nb = self.len();
        let mut gammas = Vec::with_capacity(nb);
        let mut minv = Vec::with_capacity(nb - 1);
        let mut pd = Vec::with_capacity(nb - 1);
        let mut spec = Vec::with_capacity(nb - 1);
        let mut neu = Vec::with_capacity(nb - 1);
        gammas.push(DMatrix::zeros(self.blocks[0].len(), self.blocks[0].len()));
        for p in 0..nb - 1 {
            let bw = self.shifted(p, w);
            let m = &bw - &gammas[p];
            let (piv, is_pd) = match m.clone().cholesky() {
                Some(ch) => (Pivot::Chol(ch), true),
                None if require_pd => return Ok(None),
                None => {
                    let lu = m.clone().lu();
                    if !lu.is_invertible() {
                        return Err(self.singular(p, w, &m));
                    }
                    (Pivot::Lu(lu), false)
                }
            };
            if spectra {
                let ev = m.symmetric_eigenvalues();
                let min_abs = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
                let max_abs = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                spec.push(Some((ev.min(), max_abs / min_abs)));
            } else {
                spec.push(None);
            }
            let piv = match strategy {
                InverseStrategy::Direct => {
                    neu.push((None, None));
                    piv
                }
                InverseStrategy::Neumann | InverseStrategy::Both => {
                    let r = bw.clone().cholesky().map(|c| c.inverse()).ok_or(
                        Error::NeumannDivergence {
                            step: self.steps[p],
                            radius: f64::INFINITY,
                        },
                    )?;
                    let step_op = &r * &gammas[p];
                    let (ser, terms, radius) = neumann_sum(&r, &step_op, neumann, self.steps[p])?;
                    neu.push((Some(terms), Some(radius)));
                    if strategy == InverseStrategy::Both {
                        let inv = piv.solve(&DMatrix::identity(m.nrows(), m.nrows()));
                        let diff = (&ser - &inv).norm() / inv.norm();
                        if diff > neumann.tol {
                            return Err(Error::NeumannMismatch {
                                step: self.steps[p],
                                diff,
                            });
                        }
                        piv
                    } else {
                        Pivot::Explicit(ser)
                    }
                }
            };
            gammas.push(piv.sandwich(&self.lower[p]));
            minv.push(piv);
            pd.push(is_pd);
        }
        Ok(Some(Forward {
            gammas,
            minv,
            pd,
            spectra: spec,
            neumann: neu,
        }))
    }

    fn singular(&self, p: usize, w: f64, m: &DMatrix<f64>) -> Error {
        let ev = m.symmetric_eigenvalues();
        let min_eig = ev
            .iter()
            .copied()
            .fold(f64::INFINITY, |a, x| if x.abs() < a.abs() { x } else { a });
        if p == 0 && self.ibar > 0 {
            Error::AggregatedSingular { w, min_eig }
        } else {
            Error::Singular {
                step: self.steps[p],
                min_eig,
            }
        }
    }

    fn last_step(
        &self,
        e: &DMatrix<f64>,
        seed: &DVector<f64>,
        require_pd: bool,
    ) -> Result<Option<LastData>> {
        let n = e.nrows();
        let (q, sign) = reflector(seed);
        let et = q.transpose() * e * &q;
        let e00 = et[(0, 0)];
        if n == 1 {
            return Ok(Some(LastData {
                f: e00,
                off_term: 0.0,
                off_norm: 0.0,
                comp_pd: true,
                psi_last: seed.clone(),
            }));
        }
        let err = et.view((1, 1), (n - 1, n - 1)).into_owned();
        let er0 = et.view((1, 0), (n - 1, 1)).column(0).into_owned();
        let (sol, comp_pd) = match err.clone().cholesky() {
            Some(ch) => (ch.solve(&er0), true),
            None if require_pd => return Ok(None),
            None => match err.clone().lu().solve(&er0) {
                Some(x) => (x, false),
                None => return Err(self.singular(self.last(), 0.0, &err)),
            },
        };
        let off_term = er0.dot(&sol);
        let mut y = DVector::zeros(n);
        y[0] = 1.0;
        for k in 1..n {
            y[k] = -sol[k - 1];
        }
        let psi_last = (&q * y) * sign;
        Ok(Some(LastData {
            f: e00 - off_term,
            off_term,
            off_norm: er0.norm(),
            comp_pd,
            psi_last,
        }))
    }

    /// ψ_p = −M_p⁻¹ C_{p,p+1} ψ_{p+1}, assembled into the full space.
    pub(crate) fn back_substitute(&self, minv: &[Pivot], psi_last: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        let lp = self.last();
        let mut cur = psi_last.clone();
        for (k, &pos) in self.blocks[lp].iter().enumerate() {
            out[pos] = cur[k];
        }
        for p in (0..lp).rev() {
            let next = -minv[p].solve_vec(&(self.lower[p].transpose() * &cur));
            for (k, &pos) in self.blocks[p].iter().enumerate() {
                out[pos] = next[k];
            }
            cur = next;
        }
        out
    }

    /// ‖Γ̌‖ = ‖(1 − R^{1/2} Γ R^{1/2})⁻¹‖ with R = (B − w)⁻¹; ∞ when B − w is not positive.
    pub fn gamma_check_norm(&self, p: usize, w: f64, gamma: &DMatrix<f64>) -> f64 {
        match normalized(&self.shifted(p, w), gamma) {
            Some(x) => {
                let ev = x.symmetric_eigenvalues();
                ev.iter().fold(0.0f64, |m, &l| {
                    if l >= 1.0 {
                        f64::INFINITY
                    } else {
                        m.max(1.0 / (1.0 - l).abs())
                    }
                })
            }
            None => f64::INFINITY,
        }
    }

    /// ‖R^{1/2} X R^{1/2}‖ at block p (R = (B_p − w)⁻¹).
    pub fn normalized_norm(&self, p: usize, w: f64, x: &DMatrix<f64>) -> f64 {
        match normalized(&self.shifted(p, w), x) {
            Some(y) => y
                .symmetric_eigenvalues()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs())),
            None => f64::INFINITY,
        }
    }

    /// Dense K − w on blocks `from..` in block order, with Γ subtracted on the first.
    pub fn effective_operator(&self, w: f64, from: usize, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        let offs = self.offsets(from);
        let total = *offs.last().unwrap();
        let mut m = DMatrix::zeros(total, total);
        for (k, p) in (from..self.len()).enumerate() {
            let mut b = self.shifted(p, w);
            if p == from {
                b -= gamma;
            }
            m.view_mut((offs[k], offs[k]), (b.nrows(), b.ncols()))
                .copy_from(&b);
            if p + 1 < self.len() {
                let c = &self.lower[p];
                m.view_mut((offs[k + 1], offs[k]), (c.nrows(), c.ncols()))
                    .copy_from(c);
                m.view_mut((offs[k], offs[k + 1]), (c.ncols(), c.nrows()))
                    .copy_from(&c.transpose());
            }
        }
        m
    }

    fn offsets(&self, from: usize) -> Vec<usize> {
        let mut offs = vec![0];
        for p in from..self.len() {
            offs.push(offs.last().unwrap() + self.blocks[p].len());
        }
        offs
    }

    /// Relative difference between the step-p recursion output and the
    /// one-shot Schur complement of K − w onto blocks p+1.. .
    pub fn semigroup_error(&self, trace: &FlowTrace, p: usize) -> Result<f64> {
        if p + 1 >= self.len() {
            return Err(Error::Parameter(format!("step index {p} has no successor")));
        }
        let w = trace.w;
        let full = self.effective_operator(
            w,
            0,
            &DMatrix::zeros(self.blocks[0].len(), self.blocks[0].len()),
        );
        let offs = self.offsets(0);
        let cut = offs[p + 1];
        let total = full.nrows();
        let a = full.view((0, 0), (cut, cut)).into_owned();
        let b = full.view((0, cut), (cut, total - cut)).into_owned();
        let d = full
            .view((cut, cut), (total - cut, total - cut))
            .into_owned();
        let ainv = a.clone().lu().try_inverse().ok_or(Error::Singular {
            step: self.steps[p],
            min_eig: 0.0,
        })?;
        let one_shot = d - b.transpose() * ainv * b;
        let gamma = if p + 1 == self.last() {
            &trace.last.gamma
        } else {
            &trace.steps[p + 1].gamma
        };
        let rec = self.effective_operator(w, p + 1, gamma);
        Ok((&rec - &one_shot).norm() / one_shot.norm())
    }
}

/// L⁻¹ X L⁻ᵀ for the Cholesky factor L of `a`, or `None` if `a` is not positive.
fn normalized(a: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let ch = a.clone().cholesky()?;
    let l = ch.l();
    let y = l.solve_lower_triangular(x)?;
    let z = l.solve_lower_triangular(&y.transpose())?;
    Some(0.5 * (&z + z.transpose()))
}

/// Householder reflector Q with first column `sign`·ψ̂ (so Q e₀·sign = ψ̂).
fn reflector(seed: &DVector<f64>) -> (DMatrix<f64>, f64) {
    let n = seed.len();
    let sigma = if seed[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = seed.clone();
    u[0] += sigma;
    let uu = u.norm_squared();
    let q = DMatrix::identity(n, n) - (&u * u.transpose()) * (2.0 / uu);
    (q, -sigma)
}

/// Factorized pivot M_p.
#[derive(Clone, Debug)]
pub(crate) enum Pivot {
    Chol(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
    /// explicit inverse (Neumann path)
    Explicit(DMatrix<f64>),
}

impl Pivot {
    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Pivot::Chol(c) => c.solve(rhs),
            Pivot::Lu(l) => l.solve(rhs).expect("invertibility checked"),
            Pivot::Explicit(inv) => inv * rhs,
        }
    }

    fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Pivot::Chol(c) => c.solve(rhs),
            Pivot::Lu(l) => l.solve(rhs).expect("invertibility checked"),
            Pivot::Explicit(inv) => inv * rhs,
        }
    }

    /// C M⁻¹ Cᵀ, symmetric by construction.
    fn sandwich(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Pivot::Chol(ch) => {
                let y = ch
                    .l()
                    .solve_lower_triangular(&c.transpose())
                    .expect("nonsingular factor");
                y.transpose() * y
            }
            _ => {
                let g = c * self.solve(&c.transpose());
                0.5 * (&g + g.transpose())
            }
        }
    }
}

struct Forward {
    gammas: Vec<DMatrix<f64>>,
    minv: Vec<Pivot>,
    pd: Vec<bool>,
    spectra: Vec<Option<(f64, f64)>>,
    neumann: Vec<(Option<usize>, Option<f64>)>,
}

struct LastData {
    f: f64,
    off_term: f64,
    off_norm: f64,
    comp_pd: bool,
    psi_last: DVector<f64>,
}

/// Diagnostics of one non-final flow step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// flow step i
    pub step: usize,
    pub sectors: Vec<usize>,
    /// basis positions of the block; the complement is every later block
    pub indices: Vec<usize>,
    /// Γ on this block
    pub gamma: DMatrix<f64>,
    pub gamma_check_norm: f64,
    /// x_i of the scalar comparison sequence, when attached
    pub x_value: Option<f64>,
    /// smallest eigenvalue of B − w − Γ
    pub min_pivot: f64,
    /// condition number of B − w − Γ
    pub cond: f64,
    pub positive: bool,
    pub neumann_terms: Option<usize>,
    pub neumann_radius: Option<f64>,
}

/// The one-dimensional closing step.
#[derive(Clone, Debug)]
pub struct LastStep {
    pub step: usize,
    pub indices: Vec<usize>,
    pub gamma: DMatrix<f64>,
    pub seed: DVector<f64>,
    /// f(w): the effective operator is f·|ψ̂⟩⟨ψ̂| after projecting out P̄
    pub f: f64,
    /// f′(w) = −‖ψ(w)‖²
    pub slope: f64,
    /// ⟨ψ̂, E P̄ (P̄EP̄)⁻¹ P̄ E ψ̂⟩, the off-projection correction
    pub off_term: f64,
    /// ‖P̄ E ψ̂‖
    pub off_norm: f64,
    pub complement_positive: bool,
    pub(crate) psi_last: DVector<f64>,
}

/// Everything one sweep at fixed w produced.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub w: f64,
    pub pair: usize,
    pub ibar: usize,
    pub n: usize,
    pub steps: Vec<StepRecord>,
    pub last: LastStep,
    pub(crate) minv: Vec<Pivot>,
    pub warnings: Vec<String>,
}

impl FlowTrace {
    /// Record x_i beside every step with i ≤ N−2.
    pub fn attach_x(&mut self, xs: &XSequence) {
        for s in &mut self.steps {
            if s.step + 2 <= self.n {
                s.x_value = Some(xs.at(s.step));
            }
        }
    }

    /// Steps where ‖Γ̌‖ exceeds 1/x_i (relative slack 1e−12).
    pub fn gamma_bound_violations(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| {
                s.x_value
                    .is_some_and(|x| !(s.gamma_check_norm * x <= 1.0 + 1e-12))
            })
            .map(|s| s.step)
            .collect()
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            w: self.w,
            ibar: self.ibar,
            steps: self
                .steps
                .iter()
                .map(|s| StepSummary {
                    step: s.step,
                    size: s.indices.len(),
                    gamma_check_norm: s.gamma_check_norm,
                    x_value: s.x_value,
                    min_pivot: s.min_pivot,
                    cond: s.cond,
                })
                .collect(),
            f: self.last.f,
            off_term: self.last.off_term,
            off_norm: self.last.off_norm,
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub size: usize,
    pub gamma_check_norm: f64,
    pub x_value: Option<f64>,
    pub min_pivot: f64,
    pub cond: f64,
}

/// Serializable digest of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub w: f64,
    pub ibar: usize,
    pub steps: Vec<StepSummary>,
    pub f: f64,
    pub off_term: f64,
    pub off_norm: f64,
    pub warnings: Vec<String>,
}
