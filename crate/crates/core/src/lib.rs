//! Density-matrix evolution under non-Hermitian Hamiltonians `H = H₊ − iΓ`
//! and stability analysis of pure states against purity-changing
//! perturbations.

pub mod dynamics;
pub mod error;
pub mod models;
pub mod observables;
pub mod qmatrix;
pub mod stability;

pub use error::{Error, Result};
pub use qmatrix::{
    anticommutator, c64, commutator, decompose_hamiltonian, mean_value, pauli_x, pauli_y,
    pauli_z, trace_of_product, traceless_hermitian_basis, ComplexSquareMatrix, DensityMatrix,
    HermitianMatrix, OperatorBasis, VariationMatrix, C64,
};
pub use dynamics::{
    evolve, normalize, rhs_omega, rhs_rho, EvolutionConfig, Method, NHHamiltonian,
    Representation, Termination, Trajectory,
};
pub use observables::{
    gamma_reduced, linear_entropy, nonpurity_operator, purity, purity_rate, PuritySnapshot,
};
pub use models::{
    model1_analytic, model1_hamiltonian, model1_pure_state, model2_analytic, model2_hamiltonian,
    model2_pure_state, model2_singularity_time, perturbed_initial, PerturbationParams,
    TunnelingComplexElementModel, TunnelingDetuningModel,
};
pub use stability::{
    analyze, build_characteristic_matrix, characteristic_matrix_by_projection, classify,
    decompose_state, entropy_rate, linearized_entropy, linearized_entropy_rate,
    linearized_nonpurity, linearized_nonpurity_rhs, linearized_variation_rhs,
    lyapunov_certificate, nonpurity_from_variation, nonpurity_rhs, tls_exponent, variation_rhs,
    Classification, InstabilityType, PureReference, StabilityReport,
};
