//! Deterministic fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use nh_stab::{ComplexSquareMatrix, DensityMatrix, NHHamiltonian, C64};

/// Dense non-Hermitian Hamiltonian of dimension `dim` with smooth,
/// reproducible entries.
pub fn dense_hamiltonian(dim: usize) -> NHHamiltonian {
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        let (a, b) = (i as f64, j as f64);
        C64::new((1.0 + a * 0.7 + b * 0.3).sin(), -0.2 * (a * 1.3 - b * 0.4).cos().abs())
    });
    let h = ComplexSquareMatrix::new(m).expect("square and finite");
    NHHamiltonian::from_matrix(&h, 1.0).expect("valid Hamiltonian")
}

/// The first basis state as a density matrix.
pub fn ground_state(dim: usize) -> DensityMatrix {
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[0] = C64::new(1.0, 0.0);
    DensityMatrix::pure(&psi).expect("normalized")
}

/// A reproducible real matrix with spectrum shifted into the left half plane.
pub fn hurwitz_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let v = ((i * 7 + j * 3) as f64).sin() * 0.5;
        if i == j {
            v - n as f64
        } else {
            v
        }
    })
}
