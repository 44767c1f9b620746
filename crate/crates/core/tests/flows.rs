use fesh_core::feshbach::{
    bare_expansion, feshbach_map, fixed_point_fn, gap_ledger, occupation_bound,
    reconstruct_ground_state, run_bog_chain, run_bog_flow, run_full_flow, run_staged_full,
    solve_fixed_point, solve_ground_energy, truncated_gamma, Flow, FlowConfig, FlowKind,
    InverseStrategy, NeumannConfig,
};
use fesh_core::fock::{condensate_vector, FockBasis, ModeWindow};
use fesh_core::hamiltonians::{e_bog, Hamiltonians, ModelSpec, PotentialSpec};
use fesh_core::operator::SparseOp;
use fesh_core::oracle::{dense_lowest, lowest_eigenpairs, overlap, OracleConfig};
use fesh_core::scalar::{abc_constants, kz_constants, x_sequence, THETA_DEFAULT};
use fesh_core::Error;
use nalgebra::{DMatrix, DVector};

/// Three-mode Bogoliubov ground energies at k² = 1, φ = 50 (independent dense
/// diagonalization of the same window).
const THREE_MODE: [(usize, f64); 4] = [
    (8, -35.60214310661004),
    (12, -36.61028167386715),
    (16, -37.35820979895923),
    (20, -37.89621295179225),
];

fn three_mode(n: usize, phi: f64) -> (FockBasis, ModelSpec) {
    let w = ModeWindow::cube(1, std::f64::consts::TAU, 1).unwrap();
    let pot = PotentialSpec {
        phi0: phi,
        pairs: vec![(vec![1], phi)],
    };
    let model = ModelSpec::new(&w, n, &pot).unwrap();
    (FockBasis::new(&w, n).unwrap(), model)
}

fn two_pair(n: usize) -> (FockBasis, ModelSpec) {
    let w = ModeWindow::cube(1, std::f64::consts::TAU, 2).unwrap();
    let pot = PotentialSpec {
        phi0: 50.0,
        pairs: vec![(vec![1], 50.0), (vec![2], 100.0)],
    };
    let model = ModelSpec::new(&w, n, &pot).unwrap();
    (FockBasis::new(&w, n).unwrap(), model)
}

fn bog_flow(basis: &FockBasis, model: &ModelSpec) -> (Flow, SparseOp) {
    let h = Hamiltonians::new(basis, model)
        .unwrap()
        .h_bog(&[0])
        .unwrap();
    (Flow::new(&h, basis, model.pairs[0].plus, 0).unwrap(), h)
}

#[test]
fn feshbach_map_two_by_two() {
    let k = SparseOp::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
    let r = feshbach_map(
        &k,
        &[0],
        0.0,
        InverseStrategy::Direct,
        &NeumannConfig::default(),
    )
    .unwrap();
    assert!((r.effective[(0, 0)] - 1.5).abs() < 1e-15);
    let r = feshbach_map(
        &k,
        &[0],
        0.0,
        InverseStrategy::Both,
        &NeumannConfig::default(),
    )
    .unwrap();
    assert!((r.effective[(0, 0)] - 1.5).abs() < 1e-13);
    assert!(r.report.neumann_diff.unwrap() <= 1e-13);
}

#[test]
fn feshbach_map_block_diagonal_keeps_block() {
    let k = SparseOp::from_triplets(
        3,
        vec![
            (0, 0, 1.0),
            (0, 1, 0.5),
            (1, 0, 0.5),
            (1, 1, 3.0),
            (2, 2, 7.0),
        ],
    );
    let r = feshbach_map(
        &k,
        &[0, 1],
        0.25,
        InverseStrategy::Direct,
        &NeumannConfig::default(),
    )
    .unwrap();
    let expect = DMatrix::from_row_slice(2, 2, &[0.75, 0.5, 0.5, 2.75]);
    assert!((r.effective - expect).norm() < 1e-15);
}

#[test]
fn feshbach_map_rejects_complement_eigenvalue() {
    let k = SparseOp::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
    let err = feshbach_map(
        &k,
        &[0],
        2.0,
        InverseStrategy::Direct,
        &NeumannConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Singular { .. }), "{err:?}");
}

#[test]
fn feshbach_map_isospectral_on_random_matrices() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let a = DMatrix::from_fn(8, 8, |_, _| rng.random::<f64>() - 0.5);
        let a = &a + a.transpose();
        let trip = (0..8)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, a[(i, j)]))
            .collect();
        let k = SparseOp::from_triplets(8, trip);
        let eig = dense_lowest(&a, 8);
        let keep = [0usize, 3, 5];
        for (lam, v) in eig.values.iter().zip(&eig.vectors) {
            let proj: f64 = keep.iter().map(|&i| v[i] * v[i]).sum();
            if proj < 1e-3 {
                continue;
            }
            let Ok(r) = feshbach_map(
                &k,
                &keep,
                *lam,
                InverseStrategy::Direct,
                &NeumannConfig::default(),
            ) else {
                continue;
            };
            let min = r
                .effective
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |m, x| m.min(x.abs()));
            assert!(
                min < 1e-8 * r.effective.norm().max(1.0),
                "effective operator not singular: {min}"
            );
        }
    }
}

#[test]
fn bog_flow_matches_oracle_three_mode() {
    for (n, e) in THREE_MODE {
        let (basis, model) = three_mode(n, 50.0);
        let (flow, h) = bog_flow(&basis, &model);
        let seed = flow.seed_from(&condensate_vector(&basis)).unwrap();
        let root = solve_fixed_point(&flow, &seed, None, Some(-101.0), 1e-12).unwrap();
        assert!((root.z - e).abs() <= 1e-10, "N={n}: {} vs {e}", root.z);
        assert!(root.slope <= -1.0);
        let oracle = lowest_eigenpairs(&h, 1, &OracleConfig::default()).unwrap();
        assert!((root.z - oracle.values[0]).abs() <= 1e-10);
    }
}

#[test]
fn fixed_point_fn_vanishes_at_oracle_energy_and_decreases() {
    let (basis, model) = three_mode(8, 50.0);
    let (flow, _) = bog_flow(&basis, &model);
    let seed = flow.seed_from(&condensate_vector(&basis)).unwrap();
    let f = fixed_point_fn(&flow, THREE_MODE[0].1, &seed).unwrap();
    assert!(f.abs() <= 1e-9, "f = {f}");
    let zs: Vec<f64> = (0..40).map(|k| -80.0 + k as f64).collect();
    let fs: Vec<f64> = zs
        .iter()
        .map(|&z| fixed_point_fn(&flow, z, &seed).unwrap())
        .collect();
    for k in 1..zs.len() {
        let slope = (fs[k] - fs[k - 1]) / (zs[k] - zs[k - 1]);
        assert!(slope <= -1.0 + 1e-9, "slope {slope} at {}", zs[k]);
    }
}

#[test]
fn zero_coupling_flow_is_trivial() {
    let (basis, model) = three_mode(8, 0.0);
    let (flow, _) = bog_flow(&basis, &model);
    let seed = flow.seed_from(&condensate_vector(&basis)).unwrap();
    let trace = flow.evaluate(-0.5, &seed, &FlowConfig::default()).unwrap();
    for s in &trace.steps {
        assert_eq!(s.gamma.norm(), 0.0);
    }
    assert!((trace.last.f - 0.5).abs() < 1e-15);
    let root = solve_fixed_point(&flow, &seed, None, None, 1e-12).unwrap();
    assert!(root.z.abs() <= 1e-12);
    let tr = flow
        .evaluate(root.z, &seed, &FlowConfig::default())
        .unwrap();
    let psi = reconstruct_ground_state(&flow, &tr).unwrap();
    assert_eq!(psi, condensate_vector(&basis));
}

#[test]
fn semigroup_and_isospectrality_along_the_flow() {
    let (basis, model) = three_mode(12, 50.0);
    let (flow, h) = bog_flow(&basis, &model);
    let seed = flow.seed_from(&condensate_vector(&basis)).unwrap();
    let e0 = THREE_MODE[1].1;
    for w in [e0 - 3.0, e0 - 1e-3, e0 + 0.5] {
        let trace = flow.evaluate(w, &seed, &FlowConfig::default()).unwrap();
        for p in 0..flow.last() {
            let err = flow.semigroup_error(&trace, p).unwrap();
            assert!(err <= 1e-11, "semigroup error {err} at block {p}, w={w}");
            let gamma = if p + 1 == flow.last() {
                &trace.last.gamma
            } else {
                &trace.steps[p + 1].gamma
            };
            let k = flow.effective_operator(w, p + 1, gamma);
            let min = k.symmetric_eigenvalues().min();
            assert_eq!(min > 0.0, e0 > w, "sign mismatch at block {p}, w={w}");
        }
    }
    let _ = h;
}

#[test]
fn neumann_and_direct_agree() {
    let (basis, model) = three_mode(16, 50.0);
    let (flow, _) = bog_flow(&basis, &model);
    let seed = flow.seed_from(&condensate_vector(&basis)).unwrap();
    let cfg = FlowConfig {
        inverse_strategy: InverseStrategy::Both,
        ..FlowConfig::default()
    };
    let both = flow.evaluate(THREE_MODE[2].1, &seed, &cfg).unwrap();
    let direct = flow
        .evaluate(THREE_MODE[2].1, &seed, &FlowConfig::default())
        .unwrap();
    assert!((both.last.f - direct.last.f).abs() <= 1e-12);
    assert!(both.steps.iter().skip(1).all(|s| s.neumann_terms.is_some()));
    let cfg = FlowConfig {
        inverse_strategy: InverseStrategy::Neumann,
        ..FlowConfig::default()
    };
    let ser = flow.evaluate(THREE_MODE[2].1, &seed, &cfg).unwrap();
    assert!((ser.last.f - direct.last.f).abs() <= 1e-11);
}

#[test]
fn gamma_check_within_x_bound() {
    for (n, e) in THREE_MODE {
        let (basis, model) = three_mode(n, 50.0);
        let h = Hamiltonians::new(&basis, &model)
            .unwrap()
            .h_bog(&[0])
            .unwrap();
        let (_, trace) =
            run_bog_flow(&h, &basis, &model, 0, e, None, &FlowConfig::default()).unwrap();
        assert!(trace.steps.iter().all(|s| s.gamma_check_norm.is_finite()));
        assert!(trace.steps.iter().all(|s| s.x_value.is_some()));
        assert!(
            trace.gamma_bound_violations().is_empty(),
            "N={n}: {:?}",
            trace.summary()
        );
    }
}

#[test]
fn reconstruction_matches_oracle_vector() {
    for (n, _) in THREE_MODE {
        let (basis, model) = three_mode(n, 50.0);
        let (flow, h) = bog_flow(&basis, &model);
        let seed = flow.seed_from(&condensate_vector(&basis)).unwrap();
        let root = solve_fixed_point(&flow, &seed, None, Some(-101.0), 1e-12).unwrap();
        let trace = flow
            .evaluate(root.z, &seed, &FlowConfig::default())
            .unwrap();
        let psi = reconstruct_ground_state(&flow, &trace).unwrap();
        let oracle = lowest_eigenpairs(&h, 1, &OracleConfig::default()).unwrap();
        let ov = overlap(&psi, &oracle.vectors[0]).unwrap();
        assert!(ov >= 1.0 - 1e-8, "N={n}: overlap {ov}");
        let res = fesh_core::oracle::residual(&h, root.z, &psi).unwrap();
        assert!(res <= 1e-8, "N={n}: residual {res}");
        // selection rule: support only on even pair occupation
        for p in 0..basis.dim() {
            if basis.pair_occupation(p, 1) % 2 == 1 {
                assert_eq!(psi[p], 0.0);
            }
        }
    }
}

#[test]
fn truncated_gamma_reassembles_and_respects_tail_bound() {
    for (n, e) in THREE_MODE {
        let (basis, model) = three_mode(n, 50.0);
        let (flow, _) = bog_flow(&basis, &model);
        let p = &model.pairs[0];
        let abc = abc_constants(p.eps, p.delta, 1.4, 0.0).unwrap();
        let kz = kz_constants(&abc, n, THETA_DEFAULT).unwrap();
        for h in [2u32, 3, 4] {
            for target in 2..flow.last() {
                let d = truncated_gamma(&flow, e, target, h, Some(&kz)).unwrap();
                assert!(
                    d.reassembly_error <= 1e-12,
                    "N={n} h={h} target={target}: {}",
                    d.reassembly_error
                );
                assert!(
                    d.bound_violations().is_empty(),
                    "N={n} h={h}: {:?}",
                    d.summary()
                );
            }
        }
    }
}

#[test]
fn truncated_gamma_rejects_small_h_and_vanishes_for_large_h() {
    let (basis, model) = three_mode(12, 50.0);
    let (flow, _) = bog_flow(&basis, &model);
    assert!(truncated_gamma(&flow, -36.6, 3, 1, None).is_err());
    let d = truncated_gamma(&flow, -36.6, 4, 200, None).unwrap();
    assert!(
        d.plus_norms.iter().all(|&v| v <= 1e-13),
        "{:?}",
        d.plus_norms
    );
}

#[test]
fn bare_expansion_errors_decrease() {
    let (basis, model) = three_mode(40, 50.0);
    let (flow, h) = bog_flow(&basis, &model);
    let seed = flow.seed_from(&condensate_vector(&basis)).unwrap();
    let root = solve_fixed_point(&flow, &seed, None, Some(-101.0), 1e-12).unwrap();
    let trace = flow
        .evaluate(root.z, &seed, &FlowConfig::default())
        .unwrap();
    let psi = reconstruct_ground_state(&flow, &trace).unwrap();
    let eb = e_bog(1.0, 50.0).unwrap();
    let exp = bare_expansion(&basis, &h, 4, eb)
        .unwrap()
        .with_reference(&basis, &psi)
        .unwrap();
    assert_eq!(exp.orders[0], condensate_vector(&basis));
    assert!(exp.monotone(), "{:?}", exp.errors);
    // at z = z_* the same series is exact and converges to the flow state
    let exact = bare_expansion(&basis, &h, 60, root.z)
        .unwrap()
        .with_reference(&basis, &psi)
        .unwrap();
    assert!(exact.floor().unwrap() < exp.floor().unwrap());
}

#[test]
fn full_flow_single_pair_equals_oracle() {
    let (basis, model) = three_mode(12, 50.0);
    let cfg = FlowConfig {
        ibar: Some(8),
        ..FlowConfig::default()
    };
    let r = solve_ground_energy(
        &basis,
        &model,
        FlowKind::Full,
        1,
        &cfg,
        Some(&OracleConfig::default()),
    )
    .unwrap();
    assert!((r.z - -36.61028167386693).abs() <= 1e-10, "{}", r.z);
    assert!(r.oracle_delta().unwrap() <= 1e-10);
    assert!(r.off_term.is_finite());
}

#[test]
fn full_flow_with_zero_interaction_reduces_to_bog_flow() {
    let (basis, model) = three_mode(10, 50.0);
    let hs = Hamiltonians::new(&basis, &model).unwrap();
    let h_full = hs.h_full(1).unwrap();
    let h_bog = hs.h_bog(&[0]).unwrap();
    assert_eq!(h_full, h_bog);
    let cfg = FlowConfig {
        ibar: Some(0),
        ..FlowConfig::default()
    };
    let eta = condensate_vector(&basis);
    let (_, a) = run_full_flow(&h_full, &basis, &model, 0, -30.0, &eta, &cfg).unwrap();
    let (_, b) = run_bog_flow(&h_bog, &basis, &model, 0, -30.0, None, &cfg).unwrap();
    assert!((a.last.f - b.last.f).abs() <= 1e-12);
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert!((&x.gamma - &y.gamma).norm() <= 1e-12 * y.gamma.norm().max(1.0));
    }
}

#[test]
fn radius_two_single_pair_full_flow() {
    let w = ModeWindow::cube(1, std::f64::consts::TAU, 2).unwrap();
    let pot = PotentialSpec {
        phi0: 50.0,
        pairs: vec![(vec![1], 50.0)],
    };
    let model = ModelSpec::new(&w, 12, &pot).unwrap();
    let basis = FockBasis::new(&w, 12).unwrap();
    let r = solve_ground_energy(
        &basis,
        &model,
        FlowKind::Full,
        1,
        &FlowConfig::default(),
        Some(&OracleConfig::default()),
    )
    .unwrap();
    assert!((r.z - -40.64903629633635).abs() <= 1e-9, "{}", r.z);
    assert!((r.oracle_gap.unwrap() - (-36.005062036642194 - -40.64903629633635)).abs() <= 1e-8);
}

#[test]
fn staged_two_pair_run_matches_oracle() {
    let (basis, model) = two_pair(10);
    assert_eq!(basis.dim(), 1001);
    let stages = run_staged_full(
        &basis,
        &model,
        2,
        &FlowConfig::default(),
        Some(&OracleConfig::default()),
    )
    .unwrap();
    let last = &stages[1].result;
    assert!((last.z - -99.4984709402238).abs() <= 1e-9, "{}", last.z);
    assert!((last.oracle_gap.unwrap() - (-79.87805952395819 - -99.4984709402238)).abs() <= 1e-8);
    assert!(last.overlap.unwrap() >= 1.0 - 1e-8);
}

#[test]
fn bog_chain_occupation_and_gaps() {
    let (basis, model) = two_pair(10);
    let stages = run_bog_chain(
        &basis,
        &model,
        2,
        &FlowConfig::default(),
        Some(&OracleConfig::default()),
    )
    .unwrap();
    for st in &stages {
        assert!(
            st.result.oracle_delta().unwrap() <= 1e-9,
            "stage {}: {:?}",
            st.stage,
            st.result
        );
    }
    let hs = Hamiltonians::new(&basis, &model).unwrap();
    let (n1, n2) = hs.excited_moments(&stages[1].state);
    assert!(n1 <= occupation_bound(&model, 2));
    assert!(n2.is_finite() && n2 >= n1 * n1);
    let ledger = gap_ledger(
        &basis,
        &model,
        FlowKind::Bog,
        2,
        None,
        &OracleConfig::default(),
    )
    .unwrap();
    assert!(ledger.all_positive());
    assert_eq!(ledger.delta0, 1.0);
}

#[test]
fn x_sequence_is_available_for_three_mode_pairs() {
    let (_, model) = three_mode(20, 50.0);
    let p = &model.pairs[0];
    let abc = abc_constants(p.eps, p.delta, 1.4, 0.0).unwrap();
    let xs = x_sequence(&abc, 20, THETA_DEFAULT).unwrap();
    assert_eq!(xs.values.len(), 10);
    let _ = DVector::<f64>::zeros(1);
}
