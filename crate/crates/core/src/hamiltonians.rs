//! Model constants and every Hamiltonian variant the flows act on.
//!
//! Units: ħ = 1, mass = 1/2, so a mode j carries kinetic energy k_j².
//! Interaction monomials whose indices leave the window are dropped (hard
//! window truncation); the oracle diagonalizes the same truncated operators.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{assemble, diagonal_operator, FockBasis, Mode, ModeWindow, Monomial};
use crate::operator::SparseOp;

/// Largest ε accepted when the strict regime check is on.
pub const STRICT_EPS_MAX: f64 = 0.05;
/// Exponent in the strict requirement 1/N ≤ ε^ν.
pub const STRICT_NU: f64 = 1.4;

/// Fourier data of the pair potential: φ₀ and the interacting pairs ±j_m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub phi0: f64,
    /// (j_m, φ_{j_m}); each entry stands for both ±j_m
    pub pairs: Vec<(Mode, f64)>,
}

/// One interacting pair resolved against a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub mode: Mode,
    /// window position of +j
    pub plus: usize,
    /// window position of −j
    pub minus: usize,
    pub phi: f64,
    pub k2: f64,
    /// ε = k²/φ
    pub eps: f64,
    /// flow parameter δ, default 1 + √ε
    pub delta: f64,
}

impl Pair {
    pub fn e_bog(&self) -> f64 {
        e_bog(self.k2, self.phi).expect("validated pair")
    }
}

/// Model: window, particle number, potential, derived constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub window: ModeWindow,
    pub n: usize,
    pub phi0: f64,
    pub pairs: Vec<Pair>,
    /// λ = 1/ρ with ρ = N/|Λ|
    pub lambda: f64,
    /// c_N = (λφ₀/2|Λ|)(N − N²) = φ₀(1 − N)/2
    pub c_n: f64,
}

impl ModelSpec {
    pub fn new(window: &ModeWindow, n: usize, pot: &PotentialSpec) -> Result<Self> {
        if n % 2 == 1 {
            return Err(Error::OddParticleNumber(n));
        }
        if n < 2 {
            return Err(Error::TooFewParticles(n));
        }
        if !(pot.phi0 >= 0.0) {
            return Err(Error::Model(format!(
                "phi0 must be nonnegative (got {})",
                pot.phi0
            )));
        }
        let mut pairs: Vec<Pair> = Vec::new();
        for (mode, phi) in &pot.pairs {
            if mode.iter().all(|&v| v == 0) {
                return Err(Error::Model("pair mode must be nonzero".into()));
            }
            if !(*phi >= 0.0 && phi.is_finite()) {
                return Err(Error::Model(format!(
                    "phi for {mode:?} must be nonnegative"
                )));
            }
            let plus = window.require(mode)?;
            let minus = window.neg(plus);
            if pairs.iter().any(|p| p.plus == plus || p.plus == minus) {
                return Err(Error::Model(format!("duplicate pair mode {mode:?}")));
            }
            let k2 = window.k2(plus);
            let eps = if *phi > 0.0 { k2 / phi } else { f64::INFINITY };
            pairs.push(Pair {
                mode: mode.clone(),
                plus,
                minus,
                phi: *phi,
                k2,
                eps,
                delta: 1.0 + eps.sqrt(),
            });
        }
        let vol = window.volume();
        let lambda = vol / n as f64;
        let nf = n as f64;
        let c_n = lambda * pot.phi0 / (2.0 * vol) * (nf - nf * nf);
        Ok(ModelSpec {
            window: window.clone(),
            n,
            phi0: pot.phi0,
            pairs,
            lambda,
            c_n,
        })
    }

    /// Override δ for pair `l`.
    pub fn with_delta(mut self, l: usize, delta: f64) -> Self {
        self.pairs[l].delta = delta;
        self
    }

    /// Strong-interaction regime check: ε ≤ 0.05 and 1/N ≤ ε^ν for every pair.
    pub fn regime_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.pairs {
            if !(p.eps <= STRICT_EPS_MAX) {
                out.push(format!(
                    "eps={} for pair {:?} exceeds {}",
                    p.eps, p.mode, STRICT_EPS_MAX
                ));
            }
            if !(1.0 / self.n as f64 <= p.eps.powf(STRICT_NU)) {
                out.push(format!("1/N > eps^{STRICT_NU} for pair {:?}", p.mode));
            }
        }
        out
    }

    pub fn check_strict(&self) -> Result<()> {
        let v = self.regime_violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Model(v.join("; ")))
        }
    }

    /// Σ φ over the first m pairs.
    pub fn phi_sum(&self, m: usize) -> f64 {
        self.pairs[..m].iter().map(|p| p.phi).sum()
    }

    /// Σ E^Bog over the first m pairs.
    pub fn e_bog_sum(&self, m: usize) -> f64 {
        self.pairs[..m].iter().map(|p| p.e_bog()).sum()
    }

    /// Default ξ = (1/ln N)^{1/4}.
    pub fn default_xi(&self) -> f64 {
        (1.0 / (self.n as f64).ln()).powf(0.25)
    }

    /// Default first-step threshold: N − 2·⌈⌊N^{1/16}⌋/2⌉ (⌊N^{1/16}⌋ rounded up to even).
    pub fn default_ibar(&self) -> usize {
        default_ibar(self.n)
    }
}

pub fn default_ibar(n: usize) -> usize {
    let r = (n as f64).powf(1.0 / 16.0).floor() as usize;
    n.saturating_sub(r.div_ceil(2) * 2)
}

/// Closed-form Bogoliubov energy −[k² + φ − √(k⁴ + 2φk²)].
pub fn e_bog(k2: f64, phi: f64) -> Result<f64> {
    if !(k2 > 0.0) {
        return Err(Error::Parameter(format!("k^2 must be positive (got {k2})")));
    }
    if !(phi >= 0.0) {
        return Err(Error::Parameter(format!(
            "phi must be nonnegative (got {phi})"
        )));
    }
    // written to avoid cancellation when φ ≪ k²
    let s = (k2 * k2 + 2.0 * phi * k2).sqrt();
    Ok(-(phi * phi) / (k2 + phi + s))
}

/// Pieces of the ξ-deformed auxiliary Hamiltonian.
#[derive(Clone, Debug)]
pub struct XiParts {
    pub xi: f64,
    /// (H^#)_ξ
    pub h_sharp_xi: SparseOp,
    /// (Ĥ^Bog_{j_l})_ξ per pair l < m
    pub bog_xi: Vec<SparseOp>,
    /// (Ĥ⁰_{j_l})_ξ per pair l < m
    pub h0_xi: Vec<SparseOp>,
    /// ξ T
    pub xi_t: SparseOp,
}

/// Assembles operators of one model on one basis.
pub struct Hamiltonians<'a> {
    pub basis: &'a FockBasis,
    pub model: &'a ModelSpec,
}

impl<'a> Hamiltonians<'a> {
    pub fn new(basis: &'a FockBasis, model: &'a ModelSpec) -> Result<Self> {
        if basis.window() != &model.window || basis.particles() != model.n {
            return Err(Error::Model(
                "basis and model disagree on window or N".into(),
            ));
        }
        Ok(Hamiltonians { basis, model })
    }

    fn w(&self) -> &ModeWindow {
        self.basis.window()
    }

    fn nf(&self) -> f64 {
        self.model.n as f64
    }

    fn check_list(&self, list: &[usize]) -> Result<()> {
        for (i, &l) in list.iter().enumerate() {
            if l >= self.model.pairs.len() {
                return Err(Error::Parameter(format!("pair index {l} out of range")));
            }
            if list[..i].contains(&l) {
                return Err(Error::Parameter(format!("duplicate pair index {l}")));
            }
        }
        Ok(())
    }

    fn pair_modes(&self, list: &[usize]) -> Vec<usize> {
        list.iter()
            .flat_map(|&l| [self.model.pairs[l].plus, self.model.pairs[l].minus])
            .collect()
    }

    /// T = Σ_j k_j² n_j.
    pub fn kinetic(&self) -> SparseOp {
        self.kinetic_except(&[])
    }

    /// Kinetic energy of the modes not in ±list.
    pub fn kinetic_rest(&self, list: &[usize]) -> SparseOp {
        self.kinetic_except(&self.pair_modes(list))
    }

    /// Kinetic energy of ±j_l only.
    pub fn kinetic_of(&self, list: &[usize]) -> SparseOp {
        let modes = self.pair_modes(list);
        let w = self.w();
        diagonal_operator(self.basis, |s| {
            modes.iter().map(|&j| w.k2(j) * s[j] as f64).sum()
        })
    }

    fn kinetic_except(&self, skip: &[usize]) -> SparseOp {
        let w = self.w();
        diagonal_operator(self.basis, |s| {
            (1..w.len())
                .filter(|j| !skip.contains(j))
                .map(|j| w.k2(j) * s[j] as f64)
                .sum()
        })
    }

    /// 𝒩₊ = Σ_{j≠0} n_j.
    pub fn number_excited(&self) -> SparseOp {
        let n = self.model.n;
        diagonal_operator(self.basis, |s| (n - s[0] as usize) as f64)
    }

    /// Ĥ⁰ with the kinetic factor on ±j scaled by `kin`.
    fn h0_scaled(&self, l: usize, kin: f64) -> SparseOp {
        let p = &self.model.pairs[l];
        let nf = self.nf();
        diagonal_operator(self.basis, |s| {
            let n0 = s[0] as f64;
            (kin * p.k2 + p.phi * n0 / nf) * (s[p.plus] as f64 + s[p.minus] as f64)
        })
    }

    fn w_monomial(&self, l: usize) -> Monomial {
        let p = &self.model.pairs[l];
        Monomial::new(vec![0, 0], vec![p.plus, p.minus], p.phi / self.nf())
    }

    /// (Ĥ⁰_j, W_j, W*_j) for pair `l`.
    pub fn bog_pair_terms(&self, l: usize) -> Result<(SparseOp, SparseOp, SparseOp)> {
        self.check_list(&[l])?;
        let w = assemble(self.basis, &[self.w_monomial(l)]);
        let wt = w.transpose();
        Ok((self.h0_scaled(l, 1.0), w, wt))
    }

    /// Ĥ^Bog_j = Ĥ⁰ + W + W*.
    pub fn h_bog_hat(&self, l: usize) -> Result<SparseOp> {
        let (h0, w, wt) = self.bog_pair_terms(l)?;
        Ok(SparseOp::sum(self.basis.dim(), [&h0, &w, &wt]))
    }

    /// H^Bog_{j_list} = T_{rest} + Σ_l Ĥ^Bog_{j_l}.
    pub fn h_bog(&self, list: &[usize]) -> Result<SparseOp> {
        self.check_list(list)?;
        let mut parts = vec![self.kinetic_rest(list)];
        for &l in list {
            parts.push(self.h_bog_hat(l)?);
        }
        Ok(SparseOp::sum(self.basis.dim(), parts.iter()))
    }

    /// Cubic monomials of V_{j_l} (both families and their adjoints).
    pub fn cubic_monomials(&self, l: usize) -> Vec<Monomial> {
        let w = self.w();
        let p = &self.model.pairs[l];
        let c = p.phi / self.nf();
        let mut out = Vec::new();
        for j in 1..w.len() {
            // a*_{j+jl} a*_0 a_j a_{jl},  j ∉ {−jl, 0}
            if j != p.minus {
                if let Some(t) = w.add(j, p.plus) {
                    let m = Monomial::new(vec![t, 0], vec![j, p.plus], c);
                    out.push(m.adjoint());
                    out.push(m);
                }
            }
            // a*_{j−jl} a*_0 a_j a_{−jl},  j ∉ {jl, 0}
            if j != p.plus {
                if let Some(t) = w.sub(j, p.plus) {
                    let m = Monomial::new(vec![t, 0], vec![j, p.minus], c);
                    out.push(m.adjoint());
                    out.push(m);
                }
            }
        }
        out
    }

    /// Quartic monomials of V_{j_l}: a*_{j+jl} a*_{j'−jl} a_j a_{j'}.
    pub fn quartic_monomials(&self, l: usize) -> Vec<Monomial> {
        let w = self.w();
        let p = &self.model.pairs[l];
        let c = p.phi / self.nf();
        let mut out = Vec::new();
        for j in 1..w.len() {
            if j == p.minus {
                continue;
            }
            let Some(a) = w.add(j, p.plus) else { continue };
            for jp in 1..w.len() {
                if jp == p.plus {
                    continue;
                }
                let Some(b) = w.sub(jp, p.plus) else { continue };
                out.push(Monomial::new(vec![a, b], vec![j, jp], c));
            }
        }
        out
    }

    fn v_monomials(&self, list: &[usize], excluded: &[usize]) -> Result<Vec<Monomial>> {
        self.check_list(list)?;
        let skip = self.pair_modes(excluded);
        let mut out = Vec::new();
        for &l in list {
            out.extend(self.cubic_monomials(l));
            out.extend(self.quartic_monomials(l));
        }
        out.retain(|m| !m.touches(&skip));
        Ok(out)
    }

    /// V_{j_list}: the cubic and quartic interaction terms.
    pub fn v_terms(&self, list: &[usize]) -> Result<SparseOp> {
        Ok(assemble(self.basis, &self.v_monomials(list, &[])?))
    }

    /// V_{j_list} without every monomial touching ±j for j in `excluded`.
    pub fn v_sharp(&self, list: &[usize], excluded: &[usize]) -> Result<SparseOp> {
        if excluded.iter().any(|e| list.contains(e)) {
            return Err(Error::Parameter("excluded pair is also listed".into()));
        }
        self.check_list(excluded)?;
        Ok(assemble(self.basis, &self.v_monomials(list, excluded)?))
    }

    /// Number of monomials in V_{list} and in its sharp version.
    pub fn monomial_counts(&self, list: &[usize], excluded: &[usize]) -> Result<(usize, usize)> {
        Ok((
            self.v_monomials(list, &[])?.len(),
            self.v_monomials(list, excluded)?.len(),
        ))
    }

    /// H_{j_1..j_m} = H^Bog_{j_1..j_m} + V_{j_1..j_m}.
    pub fn h_full(&self, m: usize) -> Result<SparseOp> {
        let list: Vec<usize> = (0..m).collect();
        Ok(self.h_bog(&list)?.add(&self.v_terms(&list)?))
    }

    /// H^#_{j_1..j_{m−1}}: T_{rest} + Σ_{l<m} Ĥ^Bog + V^# with ±j_m removed.
    /// For m = 1 this is T.
    pub fn h_sharp(&self, m: usize) -> Result<SparseOp> {
        if m == 0 || m > self.model.pairs.len() {
            return Err(Error::Parameter(format!(
                "h_sharp needs 1 ≤ m ≤ M (got {m})"
            )));
        }
        self.h_sharp_excluding(m - 1, &[m - 1])
    }

    /// H^{#(l)}_{j_1..j_k}: T_{rest} + Σ_{l≤k} Ĥ^Bog + V_{j_1..j_k} minus
    /// every monomial touching the pairs in `excluded`.
    pub fn h_sharp_excluding(&self, k: usize, excluded: &[usize]) -> Result<SparseOp> {
        let list: Vec<usize> = (0..k).collect();
        Ok(self.h_bog(&list)?.add(&self.v_sharp(&list, excluded)?))
    }

    /// V^{(4)}_{j_l} = (φ/N) B B*, B = Σ_{j∉{−jl,0}} a*_{j+jl} a_j.
    pub fn v4(&self, l: usize) -> Result<SparseOp> {
        self.check_list(&[l])?;
        let b = self.b_operator(l);
        Ok(b.matmul(&b.transpose())
            .scale(self.model.pairs[l].phi / self.nf()))
    }

    fn b_operator(&self, l: usize) -> SparseOp {
        let w = self.w();
        let p = &self.model.pairs[l];
        let monos: Vec<Monomial> = (1..w.len())
            .filter(|&j| j != p.minus)
            .filter_map(|j| {
                w.add(j, p.plus)
                    .map(|t| Monomial::new(vec![t], vec![j], 1.0))
            })
            .collect();
        assemble(self.basis, &monos)
    }

    /// V^{(3)}_{j_l}: the cubic part of V_{j_l}.
    pub fn v3(&self, l: usize) -> Result<SparseOp> {
        self.check_list(&[l])?;
        Ok(assemble(self.basis, &self.cubic_monomials(l)))
    }

    /// (φ/N) Σ n_{j'} over j' ∉ {j_l, 0} with j' − j_l in the window: the
    /// number term separating the quartic part from V^{(4)}.
    pub fn v4_number_shift(&self, l: usize) -> SparseOp {
        let w = self.w();
        let p = self.model.pairs[l].clone();
        let c = p.phi / self.nf();
        let modes: Vec<usize> = (1..w.len())
            .filter(|&j| j != p.plus && w.sub(j, p.plus).is_some())
            .collect();
        diagonal_operator(self.basis, |s| {
            c * modes.iter().map(|&j| s[j] as f64).sum::<f64>()
        })
    }

    /// ξ-deformation of H^#_{j_1..j_{m−1}} (excluded pair m−1).
    pub fn xi_deformation(&self, m: usize, xi: f64) -> Result<XiParts> {
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::Parameter(format!("xi must lie in (0,1) (got {xi})")));
        }
        if m == 0 || m > self.model.pairs.len() {
            return Err(Error::Parameter(format!(
                "xi_deformation needs 1 ≤ m ≤ M (got {m})"
            )));
        }
        let list: Vec<usize> = (0..m - 1).collect();
        let dim = self.basis.dim();
        let mut h0_xi = Vec::new();
        let mut bog_xi = Vec::new();
        for &l in &list {
            let h0 = self.h0_scaled(l, 1.0 - xi);
            let w = assemble(self.basis, &[self.w_monomial(l)]);
            bog_xi.push(SparseOp::sum(dim, [&h0, &w, &w.transpose()]));
            h0_xi.push(h0);
        }
        let mut parts = vec![self.kinetic_rest(&list).scale(1.0 - xi)];
        parts.extend(bog_xi.iter().cloned());
        parts.push(self.v_sharp(&list, &[m - 1])?);
        let h_sharp_xi = SparseOp::sum(dim, parts.iter());
        Ok(XiParts {
            xi,
            h_sharp_xi,
            bog_xi,
            h0_xi,
            xi_t: self.kinetic().scale(xi),
        })
    }

    /// ⟨η, A η⟩ for the condensate.
    pub fn condensate_expectation(&self, a: &SparseOp) -> f64 {
        let c = self.basis.condensate_index();
        a.get(c, c)
    }

    /// ⟨ψ, 𝒩₊ ψ⟩/‖ψ‖² and ⟨ψ, 𝒩₊² ψ⟩/‖ψ‖².
    pub fn excited_moments(&self, psi: &DVector<f64>) -> (f64, f64) {
        let norm2 = psi.norm_squared();
        let (mut m1, mut m2) = (0.0, 0.0);
        for p in 0..self.basis.dim() {
            let e = self.basis.excited(p) as f64;
            let w = psi[p] * psi[p];
            m1 += e * w;
            m2 += e * e * w;
        }
        (m1 / norm2, m2 / norm2)
    }
}
