//! Dense complex square matrices and the Hermitian wrappers used throughout
//! the crate.
//!
//! Every wrapper is an immutable value. Constructors symmetrize their input
//! (`(A + A†)/2`), correct the trace where the type requires it, and then
//! verify that the correction stayed within the construction tolerance.

use std::fmt;
use std::ops::{Add, Deref, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Construction tolerance for hermiticity (max elementwise deviation).
pub const TOL_HERM: f64 = 1e-12;
/// Construction tolerance for trace constraints.
pub const TOL_TRACE: f64 = 1e-12;

pub type C64 = Complex64;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense `dim × dim` complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexSquareMatrix {
    inner: DMatrix<C64>,
}

impl fmt::Debug for ComplexSquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.inner.row_iter().map(|row| {
                row.iter()
                    .map(|z| (z.re, z.im))
                    .collect::<Vec<_>>()
            }))
            .finish()
    }
}

impl ComplexSquareMatrix {
    pub fn new(inner: DMatrix<C64>) -> Result<Self> {
        if inner.nrows() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if inner.nrows() != inner.ncols() {
            return Err(Error::DimensionMismatch {
                expected: inner.nrows(),
                found: inner.ncols(),
            });
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { inner })
    }

    /// Internal constructor for results of arithmetic on already valid
    /// matrices. Finiteness is not rechecked.
    pub(crate) fn from_inner(inner: DMatrix<C64>) -> Self {
        debug_assert!(inner.is_square() && inner.nrows() > 0);
        Self { inner }
    }

    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Parses the matrix literal format: a row-major list of `[re, im]` pairs.
    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        let dim = (pairs.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != pairs.len() {
            return Err(Error::InvalidParameter(format!(
                "matrix literal has {} entries, which is not a positive square",
                pairs.len()
            )));
        }
        let entries: Vec<C64> = pairs.iter().map(|[re, im]| c64(*re, *im)).collect();
        Self::from_row_major(dim, &entries)
    }

    /// Row-major `[re, im]` pairs, the inverse of [`from_pairs`](Self::from_pairs).
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.inner
            .row_iter()
            .flat_map(|row| row.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect()
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<C64> = diag.iter().map(|&x| c64(x, 0.0)).collect();
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_inner(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_inner(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.inner[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn adjoint(&self) -> Self {
        Self::from_inner(self.inner.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_inner(&self.inner * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(c64(factor, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - A†|` elementwise.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.inner[(i, j)] - self.inner[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Checked product; errors on dimension mismatch.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::from_inner(&self.inner * &other.inner))
    }
}

impl<'a> Add<&'a ComplexSquareMatrix> for &'a ComplexSquareMatrix {
    type Output = ComplexSquareMatrix;
    fn add(self, rhs: Self) -> ComplexSquareMatrix {
        ComplexSquareMatrix::from_inner(&self.inner + &rhs.inner)
    }
}

impl<'a> Sub<&'a ComplexSquareMatrix> for &'a ComplexSquareMatrix {
    type Output = ComplexSquareMatrix;
    fn sub(self, rhs: Self) -> ComplexSquareMatrix {
        ComplexSquareMatrix::from_inner(&self.inner - &rhs.inner)
    }
}

impl<'a> Mul<&'a ComplexSquareMatrix> for &'a ComplexSquareMatrix {
    type Output = ComplexSquareMatrix;
    fn mul(self, rhs: Self) -> ComplexSquareMatrix {
        ComplexSquareMatrix::from_inner(&self.inner * &rhs.inner)
    }
}

impl Neg for &ComplexSquareMatrix {
    type Output = ComplexSquareMatrix;
    fn neg(self) -> ComplexSquareMatrix {
        ComplexSquareMatrix::from_inner(-&self.inner)
    }
}

fn same_dim(a: &ComplexSquareMatrix, b: &ComplexSquareMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Hermitian matrix, `A = A†`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexSquareMatrix);

impl HermitianMatrix {
    /// Verifies hermiticity within [`TOL_HERM`] (scaled by the entry
    /// magnitude when entries exceed one) and stores the projection
    /// `(A + A†)/2`.
    pub fn new(m: ComplexSquareMatrix) -> Result<Self> {
        Self::with_tolerance(m, TOL_HERM)
    }

    pub fn with_tolerance(m: ComplexSquareMatrix, tol: f64) -> Result<Self> {
        let dev = m.hermiticity_deviation();
        if dev > tol * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::hermitian_part(&m))
    }

    /// `(A + A†)/2` for any square matrix; never fails.
    pub fn hermitian_part(m: &ComplexSquareMatrix) -> Self {
        let inner = (&m.inner + m.inner.adjoint()) * c64(0.5, 0.0);
        HermitianMatrix(ComplexSquareMatrix::from_inner(inner))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(ComplexSquareMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix(ComplexSquareMatrix::identity(dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Ok(HermitianMatrix(ComplexSquareMatrix::from_real_diagonal(diag)?))
    }

    /// Real trace.
    pub fn real_trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HermitianMatrix(self.0.scale_real(factor))
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.0.inner.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn as_complex(&self) -> &ComplexSquareMatrix {
        &self.0
    }

    pub fn into_complex(self) -> ComplexSquareMatrix {
        self.0
    }
}

impl Deref for HermitianMatrix {
    type Target = ComplexSquareMatrix;
    fn deref(&self) -> &ComplexSquareMatrix {
        &self.0
    }
}

/// Hermitian, unit-trace matrix. Positivity is deliberately not enforced:
/// perturbed states may leave the positive cone. Use
/// [`is_positive`](Self::is_positive) as a diagnostic.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexSquareMatrix) -> Result<Self> {
        Self::with_tolerance(m, TOL_TRACE)
    }

    /// As [`new`](Self::new) with an explicit tolerance applied to both the
    /// hermiticity and the trace check. Used for integrated states whose
    /// round-off budget is larger than the construction tolerance.
    pub fn with_tolerance(m: ComplexSquareMatrix, tol: f64) -> Result<Self> {
        let h = HermitianMatrix::with_tolerance(m, tol.max(TOL_HERM))?;
        let tr = h.real_trace();
        let scale = h.max_abs().max(1.0);
        if (tr - 1.0).abs() > tol * scale {
            return Err(Error::TraceMismatch {
                expected: 1.0,
                found: tr,
            });
        }
        let n = h.dim();
        let shift = ComplexSquareMatrix::identity(n).scale_real((1.0 - tr) / n as f64);
        Ok(DensityMatrix(HermitianMatrix(&h.0 + &shift)))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(DensityMatrix(HermitianMatrix(
            ComplexSquareMatrix::identity(dim).scale_real(1.0 / dim as f64),
        )))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if psi.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if !(norm2.is_finite() && norm2 > 0.0) {
            return Err(Error::NonFiniteInput);
        }
        let n = psi.len();
        let inner = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm2);
        Self::new(ComplexSquareMatrix::new(inner)?)
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.0
    }

    /// `max |ρ² − ρ|` elementwise; zero for pure states.
    pub fn idempotence_deviation(&self) -> f64 {
        let sq = &self.0 .0 * &self.0 .0;
        sq.max_abs_diff(&self.0 .0)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.idempotence_deviation() <= tol
    }

    /// All eigenvalues `≥ -tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        self.0.eigenvalues().first().is_some_and(|&e| e >= -tol)
    }
}

impl Deref for DensityMatrix {
    type Target = ComplexSquareMatrix;
    fn deref(&self) -> &ComplexSquareMatrix {
        &self.0 .0
    }
}

/// Traceless Hermitian perturbation `Δ` of a density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationMatrix(HermitianMatrix);

impl VariationMatrix {
    pub fn new(m: ComplexSquareMatrix) -> Result<Self> {
        Self::with_tolerance(m, TOL_TRACE)
    }

    pub fn with_tolerance(m: ComplexSquareMatrix, tol: f64) -> Result<Self> {
        let h = HermitianMatrix::with_tolerance(m, tol.max(TOL_HERM))?;
        let tr = h.real_trace();
        if tr.abs() > tol * h.max_abs().max(1.0) {
            return Err(Error::TraceMismatch {
                expected: 0.0,
                found: tr,
            });
        }
        let n = h.dim();
        let shift = ComplexSquareMatrix::identity(n).scale_real(tr / n as f64);
        Ok(VariationMatrix(HermitianMatrix(&h.0 - &shift)))
    }

    pub fn zeros(dim: usize) -> Self {
        VariationMatrix(HermitianMatrix::zeros(dim))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        VariationMatrix(self.0.scaled(factor))
    }

    /// `a·X + b·Y`.
    pub fn combine(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        VariationMatrix(HermitianMatrix(&x.0 .0.scale_real(a) + &y.0 .0.scale_real(b)))
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.0
    }
}

impl Deref for VariationMatrix {
    type Target = ComplexSquareMatrix;
    fn deref(&self) -> &ComplexSquareMatrix {
        &self.0 .0
    }
}

/// Orthonormal basis of the traceless Hermitian matrices under
/// `(A, B) ↦ tr(AB)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<HermitianMatrix>,
}

impl OperatorBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Coordinates `tr(M eᵢ)` of `m` (real parts).
    pub fn coordinates(&self, m: &ComplexSquareMatrix) -> Result<Vec<f64>> {
        same_dim(&self.elements[0], m)?;
        Ok(self
            .elements
            .iter()
            .map(|e| trace_of_product(m, e).re)
            .collect())
    }

    /// `Σᵢ cᵢ eᵢ`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<HermitianMatrix> {
        if coeffs.len() != self.elements.len() {
            return Err(Error::DimensionMismatch {
                expected: self.elements.len(),
                found: coeffs.len(),
            });
        }
        let mut acc = ComplexSquareMatrix::zeros(self.dim);
        for (c, e) in coeffs.iter().zip(&self.elements) {
            acc = &acc + &e.0.scale_real(*c);
        }
        Ok(HermitianMatrix(acc))
    }
}

/// Generalized Gell-Mann basis normalized to `tr(eᵢ eⱼ) = δᵢⱼ`.
///
/// Ordering per off-diagonal pair `(j, k)`, `j < k`: symmetric element then
/// antisymmetric element, followed by the `dim - 1` diagonal elements. For
/// `dim = 2` this yields `{σx, σy, σz}/√2`.
pub fn traceless_hermitian_basis(dim: usize) -> Result<OperatorBasis> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements = Vec::with_capacity(dim * dim - 1);
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut sym = DMatrix::zeros(dim, dim);
            sym[(j, k)] = c64(inv_sqrt2, 0.0);
            sym[(k, j)] = c64(inv_sqrt2, 0.0);
            elements.push(HermitianMatrix(ComplexSquareMatrix::from_inner(sym)));

            let mut anti = DMatrix::zeros(dim, dim);
            anti[(j, k)] = c64(0.0, -inv_sqrt2);
            anti[(k, j)] = c64(0.0, inv_sqrt2);
            elements.push(HermitianMatrix(ComplexSquareMatrix::from_inner(anti)));
        }
    }
    for l in 1..dim {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = DMatrix::zeros(dim, dim);
        for m in 0..l {
            diag[(m, m)] = c64(norm, 0.0);
        }
        diag[(l, l)] = c64(-(l as f64) * norm, 0.0);
        elements.push(HermitianMatrix(ComplexSquareMatrix::from_inner(diag)));
    }
    Ok(OperatorBasis { dim, elements })
}

pub fn pauli_x() -> HermitianMatrix {
    HermitianMatrix(
        ComplexSquareMatrix::from_row_major(
            2,
            &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
        )
        .expect("valid literal"),
    )
}

pub fn pauli_y() -> HermitianMatrix {
    HermitianMatrix(
        ComplexSquareMatrix::from_row_major(
            2,
            &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
        )
        .expect("valid literal"),
    )
}

pub fn pauli_z() -> HermitianMatrix {
    HermitianMatrix(
        ComplexSquareMatrix::from_row_major(
            2,
            &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0)],
        )
        .expect("valid literal"),
    )
}

/// Splits `H` into `H₊ = (H + H†)/2` and `Γ = i(H − H†)/2`, so that
/// `H = H₊ − iΓ`.
pub fn decompose_hamiltonian(h: &ComplexSquareMatrix) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if !h.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let h_plus = HermitianMatrix::hermitian_part(h);
    let anti = (&h.inner - h.inner.adjoint()) * c64(0.0, 0.5);
    let gamma = HermitianMatrix::hermitian_part(&ComplexSquareMatrix::from_inner(anti));
    Ok((h_plus, gamma))
}

/// `AB − BA`.
pub fn commutator(a: &ComplexSquareMatrix, b: &ComplexSquareMatrix) -> Result<ComplexSquareMatrix> {
    same_dim(a, b)?;
    Ok(ComplexSquareMatrix::from_inner(
        &a.inner * &b.inner - &b.inner * &a.inner,
    ))
}

/// `AB + BA`.
pub fn anticommutator(
    a: &ComplexSquareMatrix,
    b: &ComplexSquareMatrix,
) -> Result<ComplexSquareMatrix> {
    same_dim(a, b)?;
    Ok(ComplexSquareMatrix::from_inner(
        &a.inner * &b.inner + &b.inner * &a.inner,
    ))
}

/// `tr(AB)` without forming the product.
pub fn trace_of_product(a: &ComplexSquareMatrix, b: &ComplexSquareMatrix) -> C64 {
    let n = a.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a.inner[(i, k)] * b.inner[(k, i)];
        }
    }
    acc
}

/// `⟨A⟩ = tr(ρA)`.
pub fn mean_value(rho: &DensityMatrix, a: &ComplexSquareMatrix) -> Result<C64> {
    same_dim(rho, a)?;
    Ok(trace_of_product(rho, a))
}
