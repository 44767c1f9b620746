//! Fixtures shared by the benchmarks.

use std::f64::consts::TAU;

use fesh_core::{FockBasis, Hamiltonians, ModeWindow, ModelSpec, PotentialSpec, SparseOp};

/// Basis, model and Bogoliubov operator of a d = 1 cube window.
pub struct Instance {
    pub basis: FockBasis,
    pub model: ModelSpec,
    pub h_bog: SparseOp,
}

/// Pairs j = 1..=radius with φ_j = 50·j.
pub fn instance(radius: i32, n: usize) -> Instance {
    let window = ModeWindow::cube(1, TAU, radius).expect("valid window");
    let pot = PotentialSpec {
        phi0: 50.0,
        pairs: (1..=radius).map(|j| (vec![j], 50.0 * j as f64)).collect(),
    };
    let basis = FockBasis::new(&window, n).expect("basis within cap");
    let model = ModelSpec::new(&window, n, &pot).expect("valid model");
    let all: Vec<usize> = (0..model.pairs.len()).collect();
    let h_bog = Hamiltonians::new(&basis, &model)
        .and_then(|h| h.h_bog(&all))
        .expect("operator assembles");
    Instance {
        basis,
        model,
        h_bog,
    }
}

/// The single-pair {−1, 0, 1} window.
pub fn three_mode(n: usize) -> Instance {
    instance(1, n)
}
