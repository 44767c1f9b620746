use std::f64::consts::TAU;

use fesh_core::fock::*;
use fesh_core::hamiltonians::*;
use fesh_core::operator::SparseOp;
use fesh_core::oracle::{dense_lowest, verify_psd};
use fesh_core::scalar::tridiagonal_reduction;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(d: usize, radius: i32, n: usize, pairs: &[(Vec<i32>, f64)]) -> (FockBasis, ModelSpec) {
    let w = build_mode_window(d, TAU, radius).unwrap();
    let pot = PotentialSpec {
        phi0: 3.0,
        pairs: pairs.to_vec(),
    };
    (
        FockBasis::new(&w, n).unwrap(),
        ModelSpec::new(&w, n, &pot).unwrap(),
    )
}

/// The pair potential written generically,
/// (1/2N) Σ_{j=±j_l} φ_l Σ_{p,q} a*_{p+j} a*_{q−j} a_q a_p,
/// without the j = 0 part and with every index kept inside the window.
fn generic_potential(basis: &FockBasis, model: &ModelSpec, list: &[usize]) -> SparseOp {
    let w = basis.window();
    let n = model.n as f64;
    let mut specs = Vec::new();
    for &l in list {
        let pair = &model.pairs[l];
        for j in [pair.plus, pair.minus] {
            let jm = w.mode(j).clone();
            for p in w.modes() {
                for q in w.modes() {
                    let pj: Vec<i32> = p.iter().zip(&jm).map(|(a, b)| a + b).collect();
                    let qj: Vec<i32> = q.iter().zip(&jm).map(|(a, b)| a - b).collect();
                    if w.index_of(&pj).is_none() || w.index_of(&qj).is_none() {
                        continue;
                    }
                    specs.push(MonomialSpec {
                        creations: vec![pj, qj],
                        annihilations: vec![q.clone(), p.clone()],
                        coefficient: pair.phi / (2.0 * n),
                    });
                }
            }
        }
    }
    let monos: Vec<Monomial> = specs.iter().map(|s| s.resolve(w).unwrap()).collect();
    assemble(basis, &monos)
}

fn sector_of(basis: &FockBasis, p: usize, mode: usize) -> i64 {
    basis.pair_occupation(p, mode) as i64
}

#[test]
fn kinetic_examples() {
    let (b, m) = setup(1, 1, 6, &[(vec![1], 50.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    let t = hs.kinetic();
    let c = b.condensate_index();
    assert_eq!(t.get(c, c), 0.0);
    let mut occ = vec![0u16; 3];
    occ[0] = 5;
    occ[b.window().index_of(&[1]).unwrap()] = 1;
    let p = b.index_of(&occ).unwrap();
    assert!((t.get(p, p) - 1.0).abs() < 1e-14);
    let diag = t.diagonal();
    let zeros: Vec<usize> = (0..b.dim()).filter(|&p| diag[p] == 0.0).collect();
    assert_eq!(zeros, vec![c]);
    assert!(diag.iter().all(|&v| v >= 0.0));
}

#[test]
fn bog_pair_terms_on_condensate() {
    let n = 12;
    let phi = 50.0;
    let (b, m) = setup(1, 2, n, &[(vec![1], phi)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    let (h0, w, wt) = hs.bog_pair_terms(0).unwrap();
    let eta = condensate_vector(&b);
    assert_eq!(eta.dot(&h0.matvec(&eta)), 0.0);
    assert_eq!(w.matvec(&eta).norm(), 0.0);
    let expect = phi * ((n * (n - 1)) as f64).sqrt() / n as f64;
    assert!((wt.matvec(&eta).norm() - expect).abs() < 1e-12 * expect);
    // W lowers s = n_j + n_{−j} by exactly two
    let j = m.pairs[0].plus;
    for (r, c, _) in w.triplets() {
        assert_eq!(sector_of(&b, r, j), sector_of(&b, c, j) - 2);
    }
    assert_eq!(w.transpose().to_dense(), wt.to_dense());
}

#[test]
fn zero_pair_mode_is_rejected() {
    let w = build_mode_window(1, TAU, 1).unwrap();
    let pot = PotentialSpec {
        phi0: 0.0,
        pairs: vec![(vec![0], 1.0)],
    };
    assert!(ModelSpec::new(&w, 4, &pot).is_err());
    let pot = PotentialSpec {
        phi0: 0.0,
        pairs: vec![(vec![1], 1.0), (vec![-1], 2.0)],
    };
    assert!(ModelSpec::new(&w, 4, &pot).is_err());
    assert!(ModelSpec::new(
        &w,
        5,
        &PotentialSpec {
            phi0: 0.0,
            pairs: vec![]
        }
    )
    .is_err());
}

#[test]
fn model_constants() {
    let (_, m) = setup(1, 1, 10, &[(vec![1], 50.0)]);
    assert!((m.c_n - 3.0 * (1.0 - 10.0) / 2.0).abs() < 1e-12);
    assert!((m.lambda - TAU / 10.0).abs() < 1e-14);
    let p = &m.pairs[0];
    assert!((p.eps - 0.02).abs() < 1e-15);
    assert!((p.delta - (1.0 + 0.02f64.sqrt())).abs() < 1e-15);
    assert!((m.default_xi() - (1.0 / 10f64.ln()).powf(0.25)).abs() < 1e-15);
    assert_eq!(m.default_ibar() % 2, 0);
    assert!(m.default_ibar() <= m.n - 2);
    // the strict regime flags 1/N > ε^ν at this N
    assert!(!m.regime_violations().is_empty());
    assert!(m.check_strict().is_err());
    let (_, big) = setup(1, 1, 400, &[(vec![1], 50.0)]);
    assert!(big.regime_violations().is_empty());
}

#[test]
fn h_bog_examples() {
    let (b, m) = setup(1, 1, 4, &[(vec![1], 50.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    assert_eq!(hs.h_bog(&[]).unwrap().to_dense(), hs.kinetic().to_dense());
    assert!(hs.h_bog(&[0, 0]).is_err());
    let h = hs.h_bog(&[0]).unwrap();
    let eta = condensate_vector(&b);
    assert_eq!(h.bilinear(&eta, &eta), 0.0);
    let lowest = dense_lowest(&h.to_dense(), 1).values[0];
    let tri = tridiagonal_reduction(4, 1.0, 50.0).unwrap();
    let sector = dense_lowest(&tri.to_dense(), 1).values[0];
    assert!((lowest - sector).abs() < 1e-11, "{lowest} vs {sector}");
}

#[test]
fn v_terms_on_small_windows() {
    let (b, m) = setup(1, 1, 8, &[(vec![1], 50.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    // on {−1,0,1} no cubic or quartic index combination stays inside the window
    assert_eq!(hs.monomial_counts(&[0], &[]).unwrap(), (0, 0));
    assert_eq!(hs.v_terms(&[0]).unwrap().nnz(), 0);
    let (b, m) = setup(1, 2, 8, &[(vec![1], 50.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    // hand count on {−2..2}, j_l = 1, each cubic term with its adjoint:
    // a*_{j+1}a*_0 a_j a_1 for j ∈ {−2, 1}, a*_{j−1}a*_0 a_j a_{−1} for j ∈ {−1, 2}
    assert_eq!(hs.cubic_monomials(0).len(), 8);
    // a*_{j+1}a*_{j'−1} a_j a_{j'} for j ∈ {−2, 1}, j' ∈ {−1, 2}
    assert_eq!(hs.quartic_monomials(0).len(), 4);
    let v = hs.v_terms(&[0]).unwrap();
    let eta = condensate_vector(&b);
    assert_eq!(v.matvec(&eta).norm(), 0.0);
    assert!(v.is_symmetric());
}

#[test]
fn full_hamiltonian_matches_generic_assembly() {
    for (d, radius, n, pairs) in [
        (1, 2, 6, vec![(vec![1], 7.0)]),
        (1, 2, 6, vec![(vec![1], 7.0), (vec![2], 3.0)]),
        (2, 1, 4, vec![(vec![1, 0], 5.0), (vec![1, 1], 2.0)]),
    ] {
        let (b, m) = setup(d, radius, n, &pairs);
        let hs = Hamiltonians::new(&b, &m).unwrap();
        let list: Vec<usize> = (0..m.pairs.len()).collect();
        let h = hs.h_full(m.pairs.len()).unwrap();
        let generic = hs.kinetic().add(&generic_potential(&b, &m, &list));
        let diff = (h.to_dense() - generic.to_dense()).amax();
        assert!(diff < 1e-12, "d={d} radius={radius}: {diff}");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let psi = DVector::from_fn(b.dim(), |_, _| rng.random::<f64>() - 0.5);
            let a = h.bilinear(&psi, &psi);
            let g = generic.bilinear(&psi, &psi);
            assert!((a - g).abs() < 1e-11 * a.abs().max(1.0));
        }
        assert!(h.asymmetry() <= 1e-14 * h.max_abs());
        let eta = condensate_vector(&b);
        assert_eq!(h.bilinear(&eta, &eta), 0.0);
    }
}

#[test]
fn selection_rules_per_pair() {
    let (b, m) = setup(1, 2, 8, &[(vec![1], 7.0), (vec![2], 3.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    let h = hs.h_full(2).unwrap();
    for pair in &m.pairs {
        for (r, c, _) in h.triplets() {
            assert!((sector_of(&b, r, pair.plus) - sector_of(&b, c, pair.plus)).abs() <= 2);
        }
    }
}

#[test]
fn sharp_hamiltonians() {
    let (b, m) = setup(1, 2, 8, &[(vec![1], 7.0), (vec![2], 3.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    assert_eq!(hs.h_sharp(1).unwrap().to_dense(), hs.kinetic().to_dense());
    let vs = hs.v_sharp(&[0], &[1]).unwrap();
    let s2 = diagonal_operator(&b, |s| (s[m.pairs[1].plus] + s[m.pairs[1].minus]) as f64);
    let comm = vs.matmul(&s2).sub(&s2.matmul(&vs));
    assert_eq!(comm.max_abs(), 0.0);
    let (all, sharp) = hs.monomial_counts(&[0], &[1]).unwrap();
    assert!(all > sharp);
    assert!(hs.v_sharp(&[0], &[0]).is_err());
    // excluding a pair the listed terms never touch changes nothing
    let (b3, m3) = setup(1, 3, 4, &[(vec![1], 7.0), (vec![3], 3.0)]);
    let hs3 = Hamiltonians::new(&b3, &m3).unwrap();
    let touching = hs3.monomial_counts(&[0], &[1]).unwrap();
    if touching.0 == touching.1 {
        assert_eq!(
            hs3.v_sharp(&[0], &[1]).unwrap().to_dense(),
            hs3.v_terms(&[0]).unwrap().to_dense()
        );
    }
    assert!(hs.h_sharp(0).is_err());
    assert!(hs.h_sharp(3).is_err());
}

#[test]
fn xi_deformation_identity() {
    let (b, m) = setup(1, 2, 6, &[(vec![1], 7.0), (vec![2], 3.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    for mm in [1, 2] {
        for xi in [0.3, m.default_xi()] {
            let parts = hs.xi_deformation(mm, xi).unwrap();
            let h = hs.h_sharp(mm).unwrap();
            let rest = h.sub(&parts.h_sharp_xi).sub(&parts.xi_t);
            assert!(rest.max_abs() < 1e-13 * h.max_abs().max(1.0));
        }
        let tiny = hs.xi_deformation(mm, 1e-12).unwrap();
        assert!(hs.h_sharp(mm).unwrap().sub(&tiny.h_sharp_xi).max_abs() < 1e-9);
    }
    assert!(hs.xi_deformation(1, 0.0).is_err());
    assert!(hs.xi_deformation(1, 1.0).is_err());
}

#[test]
fn e_bog_values() {
    assert_eq!(e_bog(1.0, 0.0).unwrap(), 0.0);
    assert!((e_bog(1.0, 1.0).unwrap() + (2.0 - 3f64.sqrt())).abs() < 1e-15);
    assert!((e_bog(2.0, 1.0).unwrap() + (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-15);
    assert!((e_bog(1.0, 50.0).unwrap() + 40.95012437887911).abs() < 1e-12);
    assert!(e_bog(0.0, 1.0).is_err());
    assert!(e_bog(1.0, -1.0).is_err());
}

#[test]
fn number_moments_on_condensate() {
    let (b, m) = setup(1, 1, 6, &[(vec![1], 50.0)]);
    let hs = Hamiltonians::new(&b, &m).unwrap();
    assert_eq!(hs.excited_moments(&condensate_vector(&b)), (0.0, 0.0));
}

fn control_quad_holds(b: &FockBasis, m: &ModelSpec) {
    let hs = Hamiltonians::new(b, m).unwrap();
    let t = hs.kinetic();
    let dim = b.dim();
    for mm in 1..=m.pairs.len() {
        let shift = SparseOp::identity(dim).scale(m.phi_sum(mm));
        let h = hs.h_full(mm).unwrap();
        let r = verify_psd(&h.sub(&t).add(&shift), 1e-10);
        assert!(r.pass, "H − T + Σφ: {}", r.min_eig);
        let shift = SparseOp::identity(dim).scale(m.phi_sum(mm - 1));
        let hsh = hs.h_sharp(mm).unwrap();
        let r = verify_psd(&hsh.sub(&t).add(&shift), 1e-10);
        assert!(r.pass, "H# − T + Σφ: {}", r.min_eig);
        let r = verify_psd(&hs.v4(mm - 1).unwrap(), 1e-10);
        assert!(r.pass, "V4: {}", r.min_eig);
    }
}

#[test]
fn control_quad_on_reference_instances() {
    let (b, m) = setup(1, 1, 8, &[(vec![1], 50.0)]);
    control_quad_holds(&b, &m);
    let (b, m) = setup(1, 2, 8, &[(vec![1], 50.0), (vec![2], 100.0)]);
    control_quad_holds(&b, &m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn invariants_hold_on_random_models(
        half in 1usize..=4,
        phi1 in 0.5f64..80.0,
        phi2 in 0.5f64..80.0,
        two in any::<bool>(),
    ) {
        let n = 2 * half;
        let pairs = if two { vec![(vec![1], phi1), (vec![2], phi2)] } else { vec![(vec![1], phi1)] };
        let (b, m) = setup(1, 2, n, &pairs);
        let hs = Hamiltonians::new(&b, &m).unwrap();
        let h = hs.h_full(m.pairs.len()).unwrap();
        let eta = condensate_vector(&b);
        prop_assert_eq!(h.bilinear(&eta, &eta), 0.0);
        prop_assert!(h.asymmetry() <= 1e-14 * h.max_abs());
        let t = hs.kinetic();
        let shift = SparseOp::identity(b.dim()).scale(m.phi_sum(m.pairs.len()));
        prop_assert!(verify_psd(&h.sub(&t).add(&shift), 1e-10).pass);
        for l in 0..m.pairs.len() {
            prop_assert!(verify_psd(&hs.v4(l).unwrap(), 1e-10).pass);
        }
    }
}

#[test]
fn default_ibar_rounds_the_root_up_to_even() {
    use fesh_core::hamiltonians::default_ibar;
    assert_eq!(default_ibar(12), 10);
    assert_eq!(default_ibar(1000), 998);
    // ⌊N^{1/16}⌋ = 2 from N = 65536 on
    assert_eq!(default_ibar(65_536), 65_534);
    // ⌊N^{1/16}⌋ = 3 first at 3^16, rounded up to 4
    assert_eq!(default_ibar(43_046_722), 43_046_718);
}
