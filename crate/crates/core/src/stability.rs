//! Stability of pure states against purity-changing perturbations.
//!
//! A state is split as `ρ = ρ_p + Δ` around a pure reference `ρ_p`. The
//! exact (nonlinear) evolution of `Δ`, of the non-purity operator
//! `M = ρ − ρ²` and of the linear entropy are provided together with their
//! linearizations. The linearized `δM` dynamics define a characteristic
//! matrix whose spectrum decides local stability; for two-level systems it
//! reduces to the scalar exponent `(2/ħ)(2⟨Γ⟩_p − tr Γ)`.
//!
//! Notation: `⟨Γ⟩_p = tr(ρ_p Γ)`, `⟨Γ⟩_Δ = tr(ΔΓ)` and
//! `A^(Γ) = ΓA − tr(ΓA)·I`.

use nalgebra::{Cholesky, DMatrix, Schur};
use serde::Serialize;

use crate::dynamics::NHHamiltonian;
use crate::error::{Error, Result};
use crate::observables::gamma_reduced;
use crate::qmatrix::{
    anticommutator, c64, commutator, trace_of_product, traceless_hermitian_basis,
    ComplexSquareMatrix, DensityMatrix, HermitianMatrix, VariationMatrix, C64,
};

/// Maximum `|ρ_p² − ρ_p|` accepted for a pure reference.
pub const PURITY_TOL: f64 = 1e-10;
/// Eigenvalues with `|Re λ|` at or below this are marginal.
pub const TOL_MARGIN: f64 = 1e-9;

/// Output tolerance of the right-hand sides (relative to entry size).
const RHS_TOL: f64 = 1e-9;

/// Pure reference state with its decay-operator mean `⟨Γ⟩_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureReference {
    rho_p: DensityMatrix,
    gamma_mean_p: f64,
}

impl PureReference {
    pub fn new(rho_p: DensityMatrix, gamma: &HermitianMatrix) -> Result<Self> {
        if rho_p.dim() != gamma.dim() {
            return Err(Error::DimensionMismatch {
                expected: gamma.dim(),
                found: rho_p.dim(),
            });
        }
        let dev = rho_p.idempotence_deviation();
        if dev > PURITY_TOL {
            return Err(Error::NotPureReference(dev));
        }
        let gamma_mean_p = trace_of_product(&rho_p, gamma).re;
        Ok(Self { rho_p, gamma_mean_p })
    }

    pub fn for_hamiltonian(rho_p: DensityMatrix, h: &NHHamiltonian) -> Result<Self> {
        Self::new(rho_p, h.gamma())
    }

    pub fn rho_p(&self) -> &DensityMatrix {
        &self.rho_p
    }

    pub fn gamma_mean(&self) -> f64 {
        self.gamma_mean_p
    }

    pub fn dim(&self) -> usize {
        self.rho_p.dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    LocallyStable,
    LocallyUnstable,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InstabilityType {
    Node,
    Spiral,
    Saddle,
    Center,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub char_matrix: DMatrix<f64>,
    pub eigenvalues: Vec<C64>,
    pub classification: Classification,
    /// Phase-portrait type; only assigned for 1×1 and 2×2 systems.
    pub instability_type: Option<InstabilityType>,
    /// Solution of `ΛᵀP + PΛ = −I` when it exists and is positive definite.
    pub lyapunov_p: Option<DMatrix<f64>>,
}

impl StabilityReport {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check(h: &NHHamiltonian, reference: &PureReference, m: &ComplexSquareMatrix) -> Result<()> {
    h.check_dim(reference.dim())?;
    h.check_dim(m.dim())
}

fn hermitian_output(m: ComplexSquareMatrix) -> Result<HermitianMatrix> {
    HermitianMatrix::with_tolerance(m, RHS_TOL)
}

fn variation_output(m: ComplexSquareMatrix) -> Result<VariationMatrix> {
    VariationMatrix::with_tolerance(m, RHS_TOL)
}

/// `−(i/ħ)[H₊, X] − (1/ħ){Γ, X}`, the part shared by every equation here.
fn linear_part(h: &NHHamiltonian, x: &ComplexSquareMatrix) -> Result<ComplexSquareMatrix> {
    let hbar = h.hbar();
    let comm = commutator(h.h_plus(), x)?.scale(c64(0.0, -1.0 / hbar));
    let anti = anticommutator(h.gamma(), x)?.scale_real(-1.0 / hbar);
    Ok(&comm + &anti)
}

/// `Δ = ρ − ρ_p`.
pub fn decompose_state(rho: &DensityMatrix, rho_p: &DensityMatrix) -> Result<VariationMatrix> {
    if rho.dim() != rho_p.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_p.dim(),
            found: rho.dim(),
        });
    }
    let dev = rho_p.idempotence_deviation();
    if dev > PURITY_TOL {
        return Err(Error::NotPureReference(dev));
    }
    VariationMatrix::new(&**rho - &**rho_p)
}

/// Non-purity operator of `ρ_p + Δ` written through the variation,
/// `M = Δ − {ρ_p, Δ} − Δ²`.
pub fn nonpurity_from_variation(
    reference: &PureReference,
    delta: &VariationMatrix,
) -> Result<HermitianMatrix> {
    let anti = anticommutator(reference.rho_p(), delta)?;
    let sq = &**delta * &**delta;
    hermitian_output(&(&**delta - &anti) - &sq)
}

/// Linearized non-purity operator `δM = δρ − {ρ_p, δρ}`.
pub fn linearized_nonpurity(
    reference: &PureReference,
    drho: &VariationMatrix,
) -> Result<HermitianMatrix> {
    let anti = anticommutator(reference.rho_p(), drho)?;
    hermitian_output(&**drho - &anti)
}

/// Exact right side of the variation equation:
/// `−(i/ħ)[H₊,Δ] − (1/ħ){Γ,Δ} + (2/ħ)ρ_p⟨Γ⟩_Δ + (2/ħ)(⟨Γ⟩_p + ⟨Γ⟩_Δ)Δ`.
pub fn variation_rhs(
    h: &NHHamiltonian,
    reference: &PureReference,
    delta: &VariationMatrix,
) -> Result<VariationMatrix> {
    check(h, reference, delta)?;
    let hbar = h.hbar();
    let g_p = reference.gamma_mean();
    let g_d = trace_of_product(delta, h.gamma()).re;
    let mut out = linear_part(h, delta)?;
    out = &out + &reference.rho_p().scale_real(2.0 * g_d / hbar);
    out = &out + &delta.scale_real(2.0 * (g_p + g_d) / hbar);
    variation_output(out)
}

/// Exact right side of the non-purity equation:
/// `−(i/ħ)[H₊,M] − (1/ħ){Γ,M} + (4/ħ)(⟨Γ⟩_p + ⟨Γ⟩_Δ)M
///  + (2/ħ)[(ρ_p + Δ)Δ^(Γ) + Δρ_p^(Γ)]`.
pub fn nonpurity_rhs(
    h: &NHHamiltonian,
    reference: &PureReference,
    delta: &VariationMatrix,
) -> Result<HermitianMatrix> {
    check(h, reference, delta)?;
    let hbar = h.hbar();
    let g_p = reference.gamma_mean();
    let g_d = trace_of_product(delta, h.gamma()).re;
    let m = nonpurity_from_variation(reference, delta)?;
    let rho = &**reference.rho_p() + &**delta;
    let delta_g = gamma_reduced(h.gamma(), delta)?;
    let rho_p_g = gamma_reduced(h.gamma(), reference.rho_p())?;
    let source = &(&rho * &delta_g) + &(&**delta * &rho_p_g);

    let mut out = linear_part(h, &m)?;
    out = &out + &m.scale_real(4.0 * (g_p + g_d) / hbar);
    out = &out + &source.scale_real(2.0 / hbar);
    hermitian_output(out)
}

/// Exact linear-entropy rate `(4/ħ)[(⟨Γ⟩_p + ⟨Γ⟩_Δ)S_L − tr(ΓM)]`.
pub fn entropy_rate(
    h: &NHHamiltonian,
    reference: &PureReference,
    delta: &VariationMatrix,
) -> Result<f64> {
    check(h, reference, delta)?;
    let g_p = reference.gamma_mean();
    let g_d = trace_of_product(delta, h.gamma()).re;
    let m = nonpurity_from_variation(reference, delta)?;
    let s_l = m.real_trace();
    let tr_gm = trace_of_product(h.gamma(), &m).re;
    Ok(4.0 / h.hbar() * ((g_p + g_d) * s_l - tr_gm))
}

/// Linearized variation equation:
/// `−(i/ħ)[H₊,δρ] − (1/ħ){Γ,δρ} + (2/ħ)[⟨Γ⟩_p δρ + ρ_p tr(δρ Γ)]`.
pub fn linearized_variation_rhs(
    h: &NHHamiltonian,
    reference: &PureReference,
    drho: &VariationMatrix,
) -> Result<VariationMatrix> {
    check(h, reference, drho)?;
    let hbar = h.hbar();
    let g_d = trace_of_product(drho, h.gamma()).re;
    let mut out = linear_part(h, drho)?;
    out = &out + &drho.scale_real(2.0 * reference.gamma_mean() / hbar);
    out = &out + &reference.rho_p().scale_real(2.0 * g_d / hbar);
    variation_output(out)
}

/// Linearized non-purity equation:
/// `−(i/ħ)[H₊,δM] − (1/ħ){Γ,δM} + (2/ħ)[2⟨Γ⟩_p δM + ρ_p δρ^(Γ) + δρ ρ_p^(Γ)]`.
///
/// The last source term is `δρ ρ_p^(Γ)`, the first-order part of
/// `Δ ρ_p^(Γ)` in the exact equation; with this ordering the right side is
/// Hermitian.
pub fn linearized_nonpurity_rhs(
    h: &NHHamiltonian,
    reference: &PureReference,
    drho: &VariationMatrix,
) -> Result<HermitianMatrix> {
    check(h, reference, drho)?;
    let hbar = h.hbar();
    let dm = linearized_nonpurity(reference, drho)?;
    let drho_g = gamma_reduced(h.gamma(), drho)?;
    let rho_p_g = gamma_reduced(h.gamma(), reference.rho_p())?;
    let source = &(&**reference.rho_p() * &drho_g) + &(&**drho * &rho_p_g);

    let mut out = linear_part(h, &dm)?;
    out = &out + &dm.scale_real(4.0 * reference.gamma_mean() / hbar);
    out = &out + &source.scale_real(2.0 / hbar);
    hermitian_output(out)
}

/// `δS_L = tr δM = −2 tr(ρ_p δρ)`.
pub fn linearized_entropy(reference: &PureReference, drho: &VariationMatrix) -> f64 {
    -2.0 * trace_of_product(reference.rho_p(), drho).re
}

/// Linearized entropy rate `(4/ħ)[⟨Γ⟩_p δS_L − tr(Γ δM)]`.
pub fn linearized_entropy_rate(
    h: &NHHamiltonian,
    reference: &PureReference,
    drho: &VariationMatrix,
) -> Result<f64> {
    check(h, reference, drho)?;
    let ds_l = linearized_entropy(reference, drho);
    let dm = linearized_nonpurity(reference, drho)?;
    let tr_gdm = trace_of_product(h.gamma(), &dm).re;
    Ok(4.0 / h.hbar() * (reference.gamma_mean() * ds_l - tr_gdm))
}

/// Two-level characteristic exponent `(2/ħ)(2⟨Γ⟩_p − tr Γ)`.
pub fn tls_exponent(reference: &PureReference, gamma: &HermitianMatrix, hbar: f64) -> Result<f64> {
    if reference.dim() != 2 {
        return Err(Error::WrongDimension(reference.dim()));
    }
    if gamma.dim() != 2 {
        return Err(Error::WrongDimension(gamma.dim()));
    }
    let g_p = trace_of_product(reference.rho_p(), gamma).re;
    Ok(2.0 / hbar * (2.0 * g_p - gamma.real_trace()))
}

/// Characteristic matrix of the linearized `δM` dynamics.
///
/// For two-level systems `δM = ½ δS_L·I` has a single component and the
/// matrix is `[[tls_exponent]]`. Otherwise see
/// [`characteristic_matrix_by_projection`].
pub fn build_characteristic_matrix(
    h: &NHHamiltonian,
    reference: &PureReference,
) -> Result<DMatrix<f64>> {
    h.check_dim(reference.dim())?;
    if reference.dim() == 2 {
        let lambda = tls_exponent(reference, h.gamma(), h.hbar())?;
        return Ok(DMatrix::from_element(1, 1, lambda));
    }
    characteristic_matrix_by_projection(h, reference)
}

/// Builds the characteristic matrix numerically for any dimension.
///
/// The map `δρ ↦ δM` sends the traceless Hermitian perturbations onto a
/// `(dim − 1)²`-dimensional space; its kernel consists of the
/// purity-preserving directions, on which the linearized `δM` right side
/// vanishes. Each traceless basis element is pushed through both the map
/// and the linearized right side. With `U` an orthonormal basis of the
/// image (from the SVD of the map `L`) and `K` the matrix of right sides,
/// the matrix is `Uᵀ K L⁺ U`, expressed in `U` coordinates of `δM`.
pub fn characteristic_matrix_by_projection(
    h: &NHHamiltonian,
    reference: &PureReference,
) -> Result<DMatrix<f64>> {
    h.check_dim(reference.dim())?;
    let dim = reference.dim();
    let basis = traceless_hermitian_basis(dim)?;
    let full = dim * dim;
    let n = basis.len();
    let unit = 1.0 / (dim as f64).sqrt();

    let coords = |m: &ComplexSquareMatrix| -> Result<Vec<f64>> {
        let mut c = Vec::with_capacity(full);
        c.push(m.trace().re * unit);
        c.extend(basis.coordinates(m)?);
        Ok(c)
    };

    let mut l = DMatrix::<f64>::zeros(full, n);
    let mut k = DMatrix::<f64>::zeros(full, n);
    for (j, e) in basis.elements().iter().enumerate() {
        let drho = VariationMatrix::new(e.as_complex().clone())?;
        let dm = linearized_nonpurity(reference, &drho)?;
        let rhs = linearized_nonpurity_rhs(h, reference, &drho)?;
        for (i, v) in coords(&dm)?.into_iter().enumerate() {
            l[(i, j)] = v;
        }
        for (i, v) in coords(&rhs)?.into_iter().enumerate() {
            k[(i, j)] = v;
        }
    }

    let svd = l.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = 1e-10 * smax.max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    let range = u.select_columns(keep.iter());
    let pinv = svd
        .pseudo_inverse(cutoff)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(range.transpose() * k * pinv * range)
}

fn check_finite_real(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

/// Eigenvalues sorted by descending real part. The real Schur iteration can
/// stall at machine-epsilon deflation, so the threshold is relaxed in steps.
fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    let max_iter = 100 + 50 * m.nrows();
    let mut eig: Vec<C64> = [f64::EPSILON, 1e-14, 1e-13, 1e-12]
        .iter()
        .find_map(|&eps| Schur::try_new(m.clone(), eps, max_iter))
        .ok_or(Error::EigenNoConvergence)?
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(eig)
}

fn phase_type(eig: &[C64]) -> Option<InstabilityType> {
    let zero = |x: f64| x.abs() <= TOL_MARGIN;
    match eig {
        [l] => Some(if zero(l.re) {
            InstabilityType::Degenerate
        } else {
            InstabilityType::Node
        }),
        [a, b] => {
            let complex = !zero(a.im) || !zero(b.im);
            Some(if complex {
                if zero(a.re) {
                    InstabilityType::Center
                } else {
                    InstabilityType::Spiral
                }
            } else if zero(a.re) || zero(b.re) {
                InstabilityType::Degenerate
            } else if a.re.signum() == b.re.signum() {
                InstabilityType::Node
            } else {
                InstabilityType::Saddle
            })
        }
        _ => None,
    }
}

/// Eigen-decomposes a characteristic matrix and classifies the reference
/// state. A Lyapunov certificate is attached for stable matrices.
pub fn classify(lambda: &DMatrix<f64>) -> Result<StabilityReport> {
    check_finite_real(lambda)?;
    let eigenvalues = eigenvalues(lambda)?;
    let max_re = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let classification = if max_re < -TOL_MARGIN {
        Classification::LocallyStable
    } else if max_re <= TOL_MARGIN {
        Classification::Marginal
    } else {
        Classification::LocallyUnstable
    };
    let lyapunov_p = if classification == Classification::LocallyStable {
        lyapunov_certificate(lambda).ok().flatten()
    } else {
        None
    };
    Ok(StabilityReport {
        char_matrix: lambda.clone(),
        instability_type: phase_type(&eigenvalues),
        eigenvalues,
        classification,
        lyapunov_p,
    })
}

/// Builds and classifies the characteristic matrix for `(H, ρ_p)`.
pub fn analyze(h: &NHHamiltonian, reference: &PureReference) -> Result<StabilityReport> {
    classify(&build_characteristic_matrix(h, reference)?)
}

/// Solves `ΛᵀP + PΛ = −I` by vectorization and returns `P` when it is
/// symmetric positive definite.
pub fn lyapunov_certificate(lambda: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    check_finite_real(lambda)?;
    let n = lambda.nrows();

    // The vectorized operator has eigenvalues λᵢ + λⱼ.
    let eig = eigenvalues(lambda)?;
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for a in &eig {
        for b in &eig {
            if (a + b).norm() <= 1e-9 * scale {
                return Err(Error::SingularLyapunov);
            }
        }
    }

    // Column-major vec: vec(ΛᵀP) = (I ⊗ Λᵀ) vec P, vec(PΛ) = (Λᵀ ⊗ I) vec P.
    let lt = lambda.transpose();
    let id = DMatrix::<f64>::identity(n, n);
    let op = id.kronecker(&lt) + lt.kronecker(&id);
    let rhs = -DMatrix::<f64>::identity(n, n).reshape_generic(nalgebra::Dyn(n * n), nalgebra::Dyn(1));
    let sol = op.lu().solve(&rhs).ok_or(Error::SingularLyapunov)?;
    let p = sol.reshape_generic(nalgebra::Dyn(n), nalgebra::Dyn(n));
    let p = (&p + p.transpose()) * 0.5;
    Ok(Cholesky::new(p.clone()).map(|_| p))
}
