//! Occupation-number bases over a finite momentum window.
//!
//! Mode order: the zero mode first, then the remaining lattice points in
//! lexicographic order of their integer coordinates.  States are ordered
//! lexicographically (ascending) on the occupation vector written in that
//! mode order, so the condensate state (N, 0, …, 0) is always the last one.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::SparseOp;

/// Default cap on the number of basis states.
pub const DEFAULT_DIM_CAP: usize = 2_000_000;

pub type Mode = Vec<i32>;

/// Finite, negation-closed set of lattice momenta containing the zero mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeWindow {
    d: usize,
    side: f64,
    modes: Vec<Mode>,
    #[serde(skip)]
    lookup: HashMap<Mode, usize>,
    neg: Vec<usize>,
    k2: Vec<f64>,
}

impl ModeWindow {
    /// All j with |j_i| ≤ radius in dimension d, box side `side`.
    pub fn cube(d: usize, side: f64, radius: i32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Window("dimension must be positive".into()));
        }
        if radius <= 0 {
            return Err(Error::Window(format!(
                "radius must be positive (got {radius})"
            )));
        }
        let mut modes: Vec<Mode> = vec![vec![]];
        for _ in 0..d {
            modes = modes
                .into_iter()
                .flat_map(|m| {
                    (-radius..=radius).map(move |v| {
                        let mut m = m.clone();
                        m.push(v);
                        m
                    })
                })
                .collect();
        }
        Self::from_modes(d, side, modes)
    }

    /// Validate and order an explicit list of modes.
    pub fn from_modes(d: usize, side: f64, mut modes: Vec<Mode>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Window("dimension must be positive".into()));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::Window(format!(
                "box side must be positive (got {side})"
            )));
        }
        if modes.iter().any(|m| m.len() != d) {
            return Err(Error::Window("mode with wrong dimension".into()));
        }
        let zero = vec![0; d];
        if !modes.contains(&zero) {
            return Err(Error::Window("window must contain the zero mode".into()));
        }
        modes.sort();
        if modes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Window("duplicate modes".into()));
        }
        modes.retain(|m| *m != zero);
        modes.insert(0, zero);
        let lookup: HashMap<Mode, usize> = modes
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut neg = Vec::with_capacity(modes.len());
        for m in &modes {
            let nm: Mode = m.iter().map(|v| -v).collect();
            match lookup.get(&nm) {
                Some(&i) => neg.push(i),
                None => return Err(Error::Window(format!("not closed under negation: {m:?}"))),
            }
        }
        let scale = 2.0 * PI / side;
        let k2 = modes
            .iter()
            .map(|m| m.iter().map(|&v| (scale * v as f64).powi(2)).sum())
            .collect();
        Ok(ModeWindow {
            d,
            side,
            modes,
            lookup,
            neg,
            k2,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Box volume |Λ| = L^d.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, idx: usize) -> &Mode {
        &self.modes[idx]
    }

    /// Position of a lattice vector in the window, if present.
    pub fn index_of(&self, m: &[i32]) -> Option<usize> {
        if self.lookup.is_empty() {
            // deserialized windows carry no lookup table
            return self.modes.iter().position(|x| x.as_slice() == m);
        }
        self.lookup.get(m).copied()
    }

    pub fn require(&self, m: &[i32]) -> Result<usize> {
        self.index_of(m)
            .ok_or_else(|| Error::ModeOutsideWindow(m.to_vec()))
    }

    /// Index of −j.
    pub fn neg(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    /// Index of j₁ + j₂ if it lies in the window.
    pub fn add(&self, a: usize, b: usize) -> Option<usize> {
        let s: Mode = self.modes[a]
            .iter()
            .zip(&self.modes[b])
            .map(|(x, y)| x + y)
            .collect();
        self.index_of(&s)
    }

    /// Index of j₁ − j₂ if it lies in the window.
    pub fn sub(&self, a: usize, b: usize) -> Option<usize> {
        self.add(a, self.neg[b])
    }

    /// k² of the mode at `idx`.
    pub fn k2(&self, idx: usize) -> f64 {
        self.k2[idx]
    }

    /// Smallest k² over nonzero modes (the kinetic gap Δ₀).
    pub fn min_nonzero_k2(&self) -> f64 {
        self.k2[1..].iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Convenience wrapper matching the usual call shape.
pub fn build_mode_window(d: usize, side: f64, radius: i32) -> Result<ModeWindow> {
    ModeWindow::cube(d, side, radius)
}

/// Binomial coefficient, saturating at u128::MAX.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// N-particle occupation basis over a window.
#[derive(Clone, Debug)]
pub struct FockBasis {
    window: ModeWindow,
    n: usize,
    /// flat occupations, `window.len()` entries per state
    occ: Vec<u16>,
    /// `choose[r][k]` = C(r + k, k), number of ways to put r bosons in k+1 modes
    choose: Vec<Vec<u64>>,
}

impl FockBasis {
    pub fn new(window: &ModeWindow, n: usize) -> Result<Self> {
        Self::with_cap(window, n, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(window: &ModeWindow, n: usize, cap: usize) -> Result<Self> {
        if n % 2 == 1 {
            return Err(Error::OddParticleNumber(n));
        }
        if n < 2 {
            return Err(Error::TooFewParticles(n));
        }
        let m = window.len();
        let dim = binomial((n + m - 1) as u64, n as u64);
        if dim > cap as u128 {
            return Err(Error::DimensionCap {
                dim,
                cap,
                n,
                modes: m,
            });
        }
        let choose: Vec<Vec<u64>> = (0..=n)
            .map(|r| {
                (0..m)
                    .map(|k| binomial((r + k) as u64, k as u64) as u64)
                    .collect()
            })
            .collect();
        let mut occ = Vec::with_capacity(dim as usize * m);
        let mut cur = vec![0u16; m];
        enumerate(&mut cur, 0, n, &mut occ);
        debug_assert_eq!(occ.len(), dim as usize * m);
        Ok(FockBasis {
            window: window.clone(),
            n,
            occ,
            choose,
        })
    }

    pub fn window(&self) -> &ModeWindow {
        &self.window
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.occ.len() / self.window.len()
    }

    pub fn state(&self, pos: usize) -> &[u16] {
        let m = self.window.len();
        &self.occ[pos * m..(pos + 1) * m]
    }

    /// Position of an occupation vector (combinatorial ranking, no hashing).
    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        let m = self.window.len();
        if occ.len() != m || occ.iter().map(|&v| v as usize).sum::<usize>() != self.n {
            return None;
        }
        // Ascending lexicographic rank: for each slot, count states with a
        // smaller value there and the same prefix.
        let mut rank = 0u64;
        let mut rem = self.n;
        for (i, &v) in occ.iter().enumerate().take(m - 1) {
            let k = m - i - 1; // modes after slot i
            let v = v as usize;
            // Σ_{u<v} C(rem − u + k − 1, k − 1) = C(rem + k, k) − C(rem − v + k, k)
            rank += self.choose[rem][k] - self.choose[rem - v][k];
            rem -= v;
        }
        Some(rank as usize)
    }

    /// Position of the condensate state (all particles in the zero mode).
    pub fn condensate_index(&self) -> usize {
        self.dim() - 1
    }

    /// n_j + n_{−j} for the state at `pos`.
    pub fn pair_occupation(&self, pos: usize, mode: usize) -> usize {
        let s = self.state(pos);
        let neg = self.window.neg(mode);
        if neg == mode {
            s[mode] as usize
        } else {
            s[mode] as usize + s[neg] as usize
        }
    }

    /// Number of particles outside the zero mode.
    pub fn excited(&self, pos: usize) -> usize {
        self.n - self.state(pos)[0] as usize
    }
}

fn enumerate(cur: &mut [u16], slot: usize, rem: usize, out: &mut Vec<u16>) {
    let m = cur.len();
    if slot == m - 1 {
        cur[slot] = rem as u16;
        out.extend_from_slice(cur);
        return;
    }
    for v in 0..=rem {
        cur[slot] = v as u16;
        enumerate(cur, slot + 1, rem - v, out);
    }
}

pub fn enumerate_basis(window: &ModeWindow, n: usize) -> Result<FockBasis> {
    FockBasis::new(window, n)
}

/// A normal-ordered monomial written with lattice vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialSpec {
    pub creations: Vec<Mode>,
    pub annihilations: Vec<Mode>,
    pub coefficient: f64,
}

impl MonomialSpec {
    /// Resolve to window positions.
    pub fn resolve(&self, w: &ModeWindow) -> Result<Monomial> {
        if self.creations.len() != self.annihilations.len() {
            return Err(Error::Monomial(
                "creation and annihilation counts differ".into(),
            ));
        }
        let cre = self
            .creations
            .iter()
            .map(|m| w.require(m))
            .collect::<Result<Vec<_>>>()?;
        let ann = self
            .annihilations
            .iter()
            .map(|m| w.require(m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Monomial {
            cre,
            ann,
            coeff: self.coefficient,
        })
    }

    /// Σ creations − Σ annihilations.
    pub fn momentum_transfer(&self) -> Mode {
        let d = self
            .creations
            .first()
            .or(self.annihilations.first())
            .map_or(0, |m| m.len());
        let mut p = vec![0; d];
        for m in &self.creations {
            p.iter_mut().zip(m).for_each(|(a, b)| *a += b);
        }
        for m in &self.annihilations {
            p.iter_mut().zip(m).for_each(|(a, b)| *a -= b);
        }
        p
    }
}

/// Normal-ordered monomial c · a*_{c1}…a*_{ck} a_{a1}…a_{ak}, modes as window positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub cre: Vec<usize>,
    pub ann: Vec<usize>,
    pub coeff: f64,
}

impl Monomial {
    pub fn new(cre: Vec<usize>, ann: Vec<usize>, coeff: f64) -> Self {
        Monomial { cre, ann, coeff }
    }

    /// Hermitian conjugate (real coefficient).
    pub fn adjoint(&self) -> Monomial {
        let mut cre = self.ann.clone();
        let mut ann = self.cre.clone();
        cre.reverse();
        ann.reverse();
        Monomial {
            cre,
            ann,
            coeff: self.coeff,
        }
    }

    pub fn touches(&self, modes: &[usize]) -> bool {
        self.cre.iter().chain(&self.ann).any(|m| modes.contains(m))
    }

    /// Apply to an occupation vector in place; returns the amplitude or None
    /// when an annihilator hits an empty mode.
    pub fn apply(&self, occ: &mut [u16]) -> Option<f64> {
        // product of the integer bosonic factors, one square root at the end
        let mut sq: u128 = 1;
        for &a in self.ann.iter().rev() {
            if occ[a] == 0 {
                return None;
            }
            sq *= occ[a] as u128;
            occ[a] -= 1;
        }
        for &c in self.cre.iter().rev() {
            occ[c] += 1;
            sq *= occ[c] as u128;
        }
        Some(self.coeff * (sq as f64).sqrt())
    }
}

/// Matrix of one monomial in the basis.
pub fn build_monomial_operator(basis: &FockBasis, spec: &MonomialSpec) -> Result<SparseOp> {
    let mono = spec.resolve(basis.window())?;
    Ok(assemble(basis, std::slice::from_ref(&mono)))
}

/// Sum of monomials as one operator; columns are processed in parallel and
/// merged in column order, so the result does not depend on thread count.
pub fn assemble(basis: &FockBasis, monos: &[Monomial]) -> SparseOp {
    let dim = basis.dim();
    let chunks: Vec<Vec<(usize, usize, f64)>> = (0..dim)
        .into_par_iter()
        .chunks(256)
        .map(|cols| {
            let mut out = Vec::new();
            let mut buf = vec![0u16; basis.window().len()];
            for col in cols {
                for mono in monos {
                    buf.copy_from_slice(basis.state(col));
                    if let Some(amp) = mono.apply(&mut buf) {
                        if amp != 0.0 {
                            let row = basis.index_of(&buf).expect("number-conserving image");
                            out.push((row, col, amp));
                        }
                    }
                }
            }
            out
        })
        .collect();
    SparseOp::from_triplets(dim, chunks.into_iter().flatten().collect())
}

/// Diagonal operator from a per-state function.
pub fn diagonal_operator<F: Fn(&[u16]) -> f64 + Sync>(basis: &FockBasis, f: F) -> SparseOp {
    let d: Vec<f64> = (0..basis.dim())
        .into_par_iter()
        .map(|p| f(basis.state(p)))
        .collect();
    SparseOp::from_diagonal(&d)
}

/// Positions with n_j + n_{−j} in `allowed`.
pub fn sector_indices(basis: &FockBasis, pair: usize, allowed: &[usize]) -> Result<Vec<usize>> {
    let n = basis.particles();
    if let Some(&bad) = allowed.iter().find(|&&s| s > n) {
        return Err(Error::SectorRange(bad, n));
    }
    if pair == 0 || pair >= basis.window().len() {
        return Err(Error::Parameter(
            "pair mode must be a nonzero window mode".into(),
        ));
    }
    let mut mask = vec![false; n + 1];
    allowed.iter().for_each(|&s| mask[s] = true);
    Ok((0..basis.dim())
        .filter(|&p| mask[basis.pair_occupation(p, pair)])
        .collect())
}

/// Positions grouped by s = n_j + n_{−j}, s = 0..=N.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorIndex {
    pub pair: usize,
    pub by_sector: Vec<Vec<usize>>,
}

impl SectorIndex {
    pub fn new(basis: &FockBasis, pair: usize) -> Self {
        let mut by_sector = vec![Vec::new(); basis.particles() + 1];
        for p in 0..basis.dim() {
            by_sector[basis.pair_occupation(p, pair)].push(p);
        }
        SectorIndex { pair, by_sector }
    }
}

/// Unit vector on the condensate state.
pub fn condensate_vector(basis: &FockBasis) -> DVector<f64> {
    let mut v = DVector::zeros(basis.dim());
    v[basis.condensate_index()] = 1.0;
    v
}

/// Portable description of a basis: the window and every occupation vector
/// in basis order (position = index in `states`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisDump {
    pub d: usize,
    pub side: f64,
    pub modes: Vec<Mode>,
    pub particles: usize,
    pub dim: usize,
    pub states: Vec<Vec<u16>>,
}

impl BasisDump {
    pub fn new(basis: &FockBasis) -> Self {
        let w = basis.window();
        BasisDump {
            d: w.dimension(),
            side: w.side(),
            modes: w.modes().to_vec(),
            particles: basis.particles(),
            dim: basis.dim(),
            states: (0..basis.dim()).map(|p| basis.state(p).to_vec()).collect(),
        }
    }
}

/// Portable operator: (row, column, value) triplets in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDump {
    pub name: String,
    pub dim: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl OperatorDump {
    pub fn new(name: &str, op: &SparseOp) -> Self {
        OperatorDump {
            name: name.to_string(),
            dim: op.dim(),
            triplets: op.triplets().collect(),
        }
    }

    pub fn to_operator(&self) -> SparseOp {
        SparseOp::from_triplets(self.dim, self.triplets.clone())
    }
}
