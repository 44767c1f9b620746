//! Closed-form scalar objects of the three-mode problem, all streaming in N.
//!
//! In the symmetric sector n_j = n_{−j} of one pair, the Bogoliubov flow is a
//! scalar continued fraction indexed by the zero-mode occupation i = n₀ (even).
//! Everything here works in O(1) memory per level so N up to 10⁷ is cheap.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Default Θ exponent.
pub const THETA_DEFAULT: f64 = 0.25;

/// Norm constants a_ε, b_ε, c_ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps: f64,
    pub delta: f64,
    pub nu: f64,
    /// δ outside [0, 2): the indicator kills b and the δ² term of c
    pub delta_flagged: bool,
}

/// a = 2ε + knob, b = (1+ε)δχ(δ)√(ε²+2ε), c = −(1−δ²χ(δ))(ε²+2ε).
pub fn abc_constants(eps: f64, delta: f64, nu: f64, a_knob: f64) -> Result<AbcConstants> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!(
            "eps must be positive (got {eps})"
        )));
    }
    if !(delta >= 0.0) {
        return Err(Error::Parameter(format!(
            "delta must be nonnegative (got {delta})"
        )));
    }
    let chi = if delta < 2.0 { 1.0 } else { 0.0 };
    let root = (eps * eps + 2.0 * eps).sqrt();
    Ok(AbcConstants {
        a: 2.0 * eps + a_knob,
        b: (1.0 + eps) * delta * chi * root,
        c: -(1.0 - delta * delta * chi) * (eps * eps + 2.0 * eps),
        eps,
        delta,
        nu,
        delta_flagged: chi == 0.0,
    })
}

impl AbcConstants {
    /// 1 + a − 2b/m − (1−c)/m²
    fn bracket(&self, m: f64) -> f64 {
        1.0 + self.a - 2.0 * self.b / m - (1.0 - self.c) / (m * m)
    }

    /// ½[1 + √(ηa) − (b/√(ηa))/(m − ε^Θ)], η = 1 − √ε
    fn half_lower(&self, m: f64, theta: f64) -> f64 {
        let eta = 1.0 - self.eps.sqrt();
        let s = (eta * self.a).sqrt();
        0.5 * (1.0 + s - (self.b / s) / (m - self.eps.powf(theta)))
    }
}

/// x-sequence with its lower-bound flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XSequence {
    /// x_i for even i = 0, 2, …, N−2; `values[r]` is x_{2r}
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub bound_ok: Vec<bool>,
}

impl XSequence {
    /// x_i for even i.
    pub fn at(&self, i: usize) -> f64 {
        self.values[i / 2]
    }
}

/// x_{2j+2} = 1 − 1/(4(1 + a − 2b/(N−2j−1) − (1−c)/(N−2j−1)²)·x_{2j}), x₀ = 1.
pub fn x_sequence(abc: &AbcConstants, n: usize, theta: f64) -> Result<XSequence> {
    check_theta(theta)?;
    if n < 2 || n % 2 == 1 {
        return Err(Error::OddParticleNumber(n));
    }
    let count = n / 2; // x_0 .. x_{N-2}
    let mut values = Vec::with_capacity(count);
    values.push(1.0);
    for j in 0..count - 1 {
        let m = (n - 2 * j - 1) as f64;
        let denom = 4.0 * abc.bracket(m) * values[j];
        if !(denom.abs() > 1e-300) || !denom.is_finite() {
            return Err(Error::Division {
                index: 2 * j + 2,
                denom,
            });
        }
        values.push(1.0 - 1.0 / denom);
    }
    let lower: Vec<f64> = (0..count)
        .map(|j| abc.half_lower((n - 2 * j) as f64, theta))
        .collect();
    let bound_ok = values.iter().zip(&lower).map(|(x, l)| x >= l).collect();
    Ok(XSequence {
        values,
        lower,
        bound_ok,
    })
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= 0.25) {
        return Err(Error::Parameter(format!(
            "theta must lie in (0, 1/4] (got {theta})"
        )));
    }
    Ok(())
}

/// K_{i,ε} and Z_{i,ε} for even i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KzConstants {
    pub n: usize,
    /// `k[r]` = K_{2r}
    pub k: Vec<f64>,
    /// `z[r]` = Z_{2r}
    pub z: Vec<f64>,
}

impl KzConstants {
    pub fn k_at(&self, i: usize) -> f64 {
        self.k[i / 2]
    }

    pub fn z_at(&self, i: usize) -> f64 {
        self.z[i / 2]
    }

    /// ∏_{f=l+2, step 2}^{i} K_f/(1 − Z_{f−2})²
    pub fn chain(&self, l: usize, i: usize) -> f64 {
        (l + 2..=i)
            .step_by(2)
            .map(|f| self.k_at(f) / (1.0 - self.z_at(f - 2)).powi(2))
            .product()
    }

    /// Bound on the (h−) piece at level l of target i.
    pub fn minus_bound(&self, l: usize, i: usize) -> f64 {
        self.chain(l, i)
    }

    /// Bound on the (h+) piece: Z_l^h · chain.
    pub fn tail_bound(&self, l: usize, i: usize, h: u32) -> f64 {
        self.z_at(l).powi(h as i32) * self.chain(l, i)
    }
}

/// K_{i,ε} = 1/(4·bracket(N−i+1)), Z_{i−2,ε} = K-like(N−i+3)·2/[2·half_lower(N−i+4)].
pub fn kz_constants(abc: &AbcConstants, n: usize, theta: f64) -> Result<KzConstants> {
    check_theta(theta)?;
    let count = n / 2 + 1; // i = 0..=N
    let mut k = Vec::with_capacity(count);
    let mut z = Vec::with_capacity(count);
    for r in 0..count {
        let i = 2 * r;
        let m = n as f64 - i as f64 + 1.0;
        let dk = 4.0 * abc.bracket(m);
        if !(dk.abs() > 1e-300) {
            return Err(Error::Division {
                index: i,
                denom: dk,
            });
        }
        k.push(1.0 / dk);
        // Z_i uses the index i+2 in the defining formula
        let ip = i as f64 + 2.0;
        let dz1 = 4.0 * abc.bracket(n as f64 - ip + 3.0);
        let dz2 = 2.0 * abc.half_lower(n as f64 - ip + 4.0, theta);
        if !(dz1.abs() > 1e-300) {
            return Err(Error::Division {
                index: i,
                denom: dz1,
            });
        }
        // the lower half-bound needs a > 0; without it Z is undefined (NaN)
        if dz2.is_finite() && !(dz2.abs() > 1e-300) {
            return Err(Error::Division {
                index: i,
                denom: dz2,
            });
        }
        z.push(if dz2.is_finite() {
            2.0 / (dz1 * dz2)
        } else {
            f64::NAN
        });
    }
    Ok(KzConstants { n, k, z })
}

/// Partial products of the ground-state series and their ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsSeries {
    /// `c[j−2]` = c_j for j = 2..=jmax
    pub c: Vec<f64>,
    /// `ratios[j−2]` = c_j/c_{j−1} (the j-th factor); for j=2 this is c_2
    pub ratios: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// smallest j₀ with ratio < 1 for all j ≥ j₀, if any
    pub j0: Option<usize>,
}

/// c_j = ∏_{l=2}^{j} 1/{[1 + √(ηa) − (b/√(ηa))/(2l − ε^Θ)]·[1 + a − 2b/(2l+1) − (1−c)/(2l+1)²]^{1/2}}.
pub fn gs_series(abc: &AbcConstants, theta: f64, jmax: usize) -> Result<GsSeries> {
    check_theta(theta)?;
    if jmax < 2 {
        return Err(Error::Parameter("jmax must be at least 2".into()));
    }
    let mut c = Vec::new();
    let mut ratios = Vec::new();
    let mut partial_sums = Vec::new();
    let mut prod = 1.0;
    let mut sum = 0.0;
    for j in 2..=jmax {
        let r = gs_factor(abc, theta, j);
        prod *= r;
        sum += prod;
        ratios.push(r);
        c.push(prod);
        partial_sums.push(sum);
    }
    let j0 = match ratios.iter().rposition(|&r| !(r < 1.0)) {
        None => Some(2),
        Some(last) if last + 1 < ratios.len() => Some(last + 3),
        Some(_) => None,
    };
    Ok(GsSeries {
        c,
        ratios,
        partial_sums,
        j0,
    })
}

fn gs_factor(abc: &AbcConstants, theta: f64, j: usize) -> f64 {
    let first = 2.0 * abc.half_lower(2.0 * j as f64, theta);
    let second = abc.bracket(2.0 * j as f64 + 1.0).sqrt();
    1.0 / (first * second)
}

/// Symmetric-sector matrix of Ĥ^Bog_j, rows indexed by r with n₀ = 2r.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalSector {
    pub n: usize,
    /// d_i = (k² + φ i/N)(N − i)
    pub diag: Vec<f64>,
    /// t_i = φ (N−i) √((i+1)(i+2)) / (2N), linking i ↔ i+2
    pub off: Vec<f64>,
}

pub fn tridiagonal_reduction(n: usize, k2: f64, phi: f64) -> Result<TridiagonalSector> {
    if n % 2 == 1 {
        return Err(Error::OddParticleNumber(n));
    }
    let nf = n as f64;
    let diag = (0..=n / 2)
        .map(|r| {
            let i = (2 * r) as f64;
            (k2 + phi * i / nf) * (nf - i)
        })
        .collect();
    let off = (0..n / 2)
        .map(|r| {
            let i = (2 * r) as f64;
            phi * (nf - i) * ((i + 1.0) * (i + 2.0)).sqrt() / (2.0 * nf)
        })
        .collect();
    Ok(TridiagonalSector { n, diag, off })
}

impl TridiagonalSector {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for r in 0..n {
            m[(r, r)] = self.diag[r];
            if r + 1 < n {
                m[(r, r + 1)] = self.off[r];
                m[(r + 1, r)] = self.off[r];
            }
        }
        m
    }

    /// Number of eigenvalues strictly below x (Sturm count via LDLᵀ pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for r in 0..self.dim() {
            let t2 = if r == 0 { 0.0 } else { self.off[r - 1].powi(2) };
            q = self.diag[r] - x - if r == 0 { 0.0 } else { t2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[r].abs() + x.abs()).max(1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }
}

/// 𝒲𝒲*_i(z) at n₀ = i, n_{±j} = (N−i)/2.
pub fn ww_coefficient(n: usize, k2: f64, phi: f64, z: f64, i: usize) -> Result<f64> {
    if i % 2 == 1 || i + 2 > n {
        return Err(Error::Parameter(format!(
            "level i={i} must be even and ≤ N−2"
        )));
    }
    let nf = n as f64;
    let n0 = i as f64;
    let n1 = (nf - n0) / 2.0;
    let s = nf - n0;
    let num = (n0 - 1.0) * n0 / (nf * nf) * phi * phi * (n1 + 1.0) * (n1 + 1.0);
    if num == 0.0 {
        return Ok(0.0);
    }
    let d1 = (n0 / nf * phi + k2) * s - z;
    let e = (n0 - 2.0) / nf * phi + k2;
    let d2 = e * s + 2.0 * e - z;
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::ResolventSingular {
            position: i,
            denom: d1.min(d2),
        });
    }
    Ok(num / (d1 * d2))
}

/// Arithmetic backend for the Ĝ recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Precision {
    #[default]
    Double,
    /// double-double accumulation, for N > 10⁶
    Extended,
}

/// Ĝ_{i,i} for i = 0, 2, …, N−2 (Ĝ₀ = 1, Ĝ_i = 1/(1 − 𝒲𝒲*_i Ĝ_{i−2})).
pub fn g_levels(n: usize, k2: f64, phi: f64, z: f64) -> Result<Vec<f64>> {
    let mut out = vec![1.0];
    let mut g = 1.0;
    for i in (2..n).step_by(2) {
        let ww = ww_coefficient(n, k2, phi, z, i)?;
        let factor = ww * g;
        if !(factor < 1.0) {
            return Err(Error::GeometricDivergence { level: i, factor });
        }
        g = 1.0 / (1.0 - factor);
        out.push(g);
    }
    Ok(out)
}

/// Ĝ_{N−2,N−2}(z), streaming.
pub fn g_check(n: usize, k2: f64, phi: f64, z: f64) -> Result<f64> {
    g_check_with(n, k2, phi, z, Precision::Double)
}

pub fn g_check_with(n: usize, k2: f64, phi: f64, z: f64, prec: Precision) -> Result<f64> {
    if n % 2 == 1 || n < 2 {
        return Err(Error::OddParticleNumber(n));
    }
    match prec {
        Precision::Double => {
            let mut g = 1.0;
            for i in (2..n).step_by(2) {
                let factor = ww_coefficient(n, k2, phi, z, i)? * g;
                if !(factor < 1.0) {
                    return Err(Error::GeometricDivergence { level: i, factor });
                }
                g = 1.0 / (1.0 - factor);
            }
            Ok(g)
        }
        Precision::Extended => {
            let mut g = TwoFloat::from(1.0);
            for i in (2..n).step_by(2) {
                let ww = ww_extended(n, k2, phi, z, i)?;
                let factor = ww * g;
                if !(f64::from(factor) < 1.0) {
                    return Err(Error::GeometricDivergence {
                        level: i,
                        factor: factor.into(),
                    });
                }
                g = TwoFloat::from(1.0) / (TwoFloat::from(1.0) - factor);
            }
            Ok(g.into())
        }
    }
}

fn ww_extended(n: usize, k2: f64, phi: f64, z: f64, i: usize) -> Result<TwoFloat> {
    let t = |x: f64| TwoFloat::from(x);
    let nf = t(n as f64);
    let n0 = t(i as f64);
    let s = nf - n0;
    let n1p = s / t(2.0) + t(1.0);
    let num = (n0 - t(1.0)) * n0 / (nf * nf) * t(phi) * t(phi) * n1p * n1p;
    if f64::from(num) == 0.0 {
        return Ok(t(0.0));
    }
    let d1 = (n0 / nf * t(phi) + t(k2)) * s - t(z);
    let e = (n0 - t(2.0)) / nf * t(phi) + t(k2);
    let d2 = e * s + t(2.0) * e - t(z);
    if !(f64::from(d1) > 0.0 && f64::from(d2) > 0.0) {
        return Err(Error::ResolventSingular {
            position: i,
            denom: f64::from(d1).min(d2.into()),
        });
    }
    Ok(num / (d1 * d2))
}

/// Last-step prefactor ⟨η, W R_{N−2} W* η⟩ without the Ĝ factor:
/// φ(N−1)/N / (2ε + 2(N−2)/N − z/φ).
pub fn last_step_prefactor(n: usize, k2: f64, phi: f64, z: f64) -> f64 {
    let nf = n as f64;
    let eps = k2 / phi;
    phi * (nf - 1.0) / nf / (2.0 * eps + 2.0 * (nf - 2.0) / nf - z / phi)
}

/// Scalar fixed-point function F(z) = −z − prefactor(z)·Ĝ_{N−2}(z); None when
/// z is not admissible (some pivot nonpositive).
pub fn scalar_f(n: usize, k2: f64, phi: f64, z: f64, prec: Precision) -> Option<f64> {
    if phi == 0.0 {
        return Some(-z);
    }
    let nf = n as f64;
    let d_last = 2.0 * (k2 + phi * (nf - 2.0) / nf) - z;
    if !(d_last > 0.0) {
        return None;
    }
    let g = g_check_with(n, k2, phi, z, prec).ok()?;
    // the level-(N−2) pivot d_last/Ĝ must be positive too
    if !(g > 0.0) {
        return None;
    }
    Some(-z - last_step_prefactor(n, k2, phi, z) * g)
}

/// Result of the scalar root search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarRoot {
    pub z: f64,
    pub residual: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Ground energy of the three-mode Bogoliubov problem from the scalar recursion.
pub fn scalar_fixed_point(n: usize, k2: f64, phi: f64) -> Result<ScalarRoot> {
    scalar_fixed_point_with(n, k2, phi, Precision::Double)
}

pub fn scalar_fixed_point_with(n: usize, k2: f64, phi: f64, prec: Precision) -> Result<ScalarRoot> {
    if n % 2 == 1 || n < 2 {
        return Err(Error::OddParticleNumber(n));
    }
    if !(k2 > 0.0) || !(phi >= 0.0) {
        return Err(Error::Parameter("need k^2 > 0 and phi >= 0".into()));
    }
    if phi == 0.0 {
        return Ok(ScalarRoot {
            z: 0.0,
            residual: 0.0,
            lo: -1.0,
            hi: 0.0,
            iterations: 0,
        });
    }
    // left of the root ⇔ every pivot positive and F > 0 (monotone predicate)
    let left = |z: f64| scalar_f(n, k2, phi, z, prec).is_some_and(|f| f > 0.0);
    let mut lo = -phi - 1.0;
    let mut hi = 1e-9;
    if !left(lo) || left(hi) {
        return Err(Error::Bracket {
            lo,
            hi,
            f_lo: scalar_f(n, k2, phi, lo, prec).unwrap_or(f64::NAN),
            f_hi: scalar_f(n, k2, phi, hi, prec).unwrap_or(f64::NAN),
        });
    }
    let mut it = 0;
    while hi - lo > 1e-14 * lo.abs().max(1.0) && it < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if left(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    // lo is admissible; polish with Newton steps on F using slope ≤ −1
    let mut z = lo;
    let tol = 1e-12 * z.abs().max(1.0);
    for _ in 0..8 {
        let Some(f) = scalar_f(n, k2, phi, z, prec) else {
            break;
        };
        if f.abs() <= 0.01 * tol {
            break;
        }
        let h = 1e-7 * z.abs().max(1.0);
        let Some(fl) = scalar_f(n, k2, phi, z - h, prec) else {
            break;
        };
        let slope = (f - fl) / h;
        let next = z - f / slope;
        if !(next > lo - h && next < hi + h) {
            break;
        }
        z = next;
        it += 1;
    }
    let residual = scalar_f(n, k2, phi, z, prec).map_or(f64::NAN, f64::abs);
    Ok(ScalarRoot {
        z,
        residual,
        lo,
        hi,
        iterations: it,
    })
}

/// Local log-log slopes −Δln|err|/Δln N and a least-squares fit over all points.
pub fn fitted_slope(ns: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}
