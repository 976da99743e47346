//! Purity, linear entropy and the operators built from them.

use serde::Serialize;

use crate::dynamics::NHHamiltonian;
use crate::error::{Error, Result};
use crate::qmatrix::{
    trace_of_product, ComplexSquareMatrix, DensityMatrix, HermitianMatrix,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PuritySnapshot {
    pub purity: f64,
    /// Always `1 − purity`.
    pub linear_entropy: f64,
    pub purity_rate: f64,
}

/// `tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    let p = trace_of_product(rho, rho);
    debug_assert!(
        p.im.abs() < 1e-10 * p.re.abs().max(1.0),
        "purity has imaginary part {}",
        p.im
    );
    p.re
}

/// `S_L = 1 − tr(ρ²)`.
pub fn linear_entropy(rho: &DensityMatrix) -> f64 {
    1.0 - purity(rho)
}

/// Exact time derivative of the purity, `(4/ħ)[⟨Γ⟩𝒫 − tr(ρ²Γ)]`.
pub fn purity_rate(h: &NHHamiltonian, rho: &DensityMatrix) -> Result<f64> {
    h.check_dim(rho.dim())?;
    let gamma = h.gamma();
    let mean_gamma = trace_of_product(rho, gamma).re;
    let rho_sq = &**rho * &**rho;
    let tr_rho_sq_gamma = trace_of_product(&rho_sq, gamma).re;
    Ok(4.0 / h.hbar() * (mean_gamma * purity(rho) - tr_rho_sq_gamma))
}

pub fn snapshot(h: &NHHamiltonian, rho: &DensityMatrix) -> Result<PuritySnapshot> {
    let p = purity(rho);
    Ok(PuritySnapshot {
        purity: p,
        linear_entropy: 1.0 - p,
        purity_rate: purity_rate(h, rho)?,
    })
}

/// Non-purity operator `M = ρ − ρ²`; its trace is the linear entropy.
pub fn nonpurity_operator(rho: &DensityMatrix) -> HermitianMatrix {
    let m = &**rho - &(&**rho * &**rho);
    HermitianMatrix::hermitian_part(&m)
}

/// `A^(Γ) = ΓA − tr(ΓA)·I`.
pub fn gamma_reduced(
    gamma: &HermitianMatrix,
    a: &ComplexSquareMatrix,
) -> Result<ComplexSquareMatrix> {
    if gamma.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.dim(),
            found: a.dim(),
        });
    }
    let prod = &**gamma * a;
    let shift = ComplexSquareMatrix::identity(a.dim()).scale(prod.trace());
    Ok(&prod - &shift)
}
