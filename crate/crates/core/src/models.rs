//! Exactly solvable two-level models.
//!
//! Both families share `H₊ = −ħω σx`. The first adds an imaginary detuning,
//! `Γ = ħλ σz`, the second an imaginary tunneling element, `Γ = ħη σx`.
//! Time in the closed forms is the dimensionless `τ = ωt`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::NHHamiltonian;
use crate::error::{Error, Result};
use crate::qmatrix::{c64, pauli_x, pauli_z, ComplexSquareMatrix, DensityMatrix, C64};

/// Denominators with modulus at or below this are treated as singular.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

fn check_omega(omega: f64, hbar: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
    }
    Ok(())
}

/// `H₊ = −ħω σx`, `Γ = ħλ σz`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunnelingDetuningModel {
    omega: f64,
    lambda: f64,
    hbar: f64,
}

impl TunnelingDetuningModel {
    pub fn new(omega: f64, lambda: f64, hbar: f64) -> Result<Self> {
        check_omega(omega, hbar)?;
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be finite".into()));
        }
        Ok(Self { omega, lambda, hbar })
    }

    /// `ω = ħ = 1`, `λ = λ̃`.
    pub fn with_ratio(lambda_tilde: f64) -> Result<Self> {
        Self::new(1.0, lambda_tilde, 1.0)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `λ̃ = λ/ω`.
    pub fn lambda_tilde(&self) -> f64 {
        self.lambda / self.omega
    }
}

/// `H₊ = −ħω σx`, `Γ = ħη σx`, i.e. `ω → ω + iη`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunnelingComplexElementModel {
    omega: f64,
    eta: f64,
    hbar: f64,
}

impl TunnelingComplexElementModel {
    pub fn new(omega: f64, eta: f64, hbar: f64) -> Result<Self> {
        check_omega(omega, hbar)?;
        if !eta.is_finite() {
            return Err(Error::InvalidParameter("eta must be finite".into()));
        }
        Ok(Self { omega, eta, hbar })
    }

    pub fn with_ratio(eta_tilde: f64) -> Result<Self> {
        Self::new(1.0, eta_tilde, 1.0)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `η̃ = η/ω`.
    pub fn eta_tilde(&self) -> f64 {
        self.eta / self.omega
    }
}

/// Real perturbation `[[δ₂, δ₁], [δ₁, −δ₂]]`. No positivity constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub delta1: f64,
    pub delta2: f64,
}

impl PerturbationParams {
    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        if !(delta1.is_finite() && delta2.is_finite()) {
            return Err(Error::InvalidParameter("perturbation must be finite".into()));
        }
        Ok(Self { delta1, delta2 })
    }

    /// `p₁ = 2δ₁ + 1`.
    pub fn p1(&self) -> f64 {
        2.0 * self.delta1 + 1.0
    }

    /// `p₂ = 2δ₂ + 1`.
    pub fn p2(&self) -> f64 {
        2.0 * self.delta2 + 1.0
    }

    pub fn matrix(&self) -> ComplexSquareMatrix {
        let (d1, d2) = (self.delta1, self.delta2);
        ComplexSquareMatrix::from_row_major(
            2,
            &[c64(d2, 0.0), c64(d1, 0.0), c64(d1, 0.0), c64(-d2, 0.0)],
        )
        .expect("finite 2x2 literal")
    }
}

pub fn model1_hamiltonian(m: &TunnelingDetuningModel) -> NHHamiltonian {
    NHHamiltonian::new(
        pauli_x().scaled(-m.hbar * m.omega),
        pauli_z().scaled(m.hbar * m.lambda),
        m.hbar,
    )
    .expect("validated model parameters")
}

/// `|e⟩⟨e| = [[1, 0], [0, 0]]`.
pub fn model1_pure_state() -> DensityMatrix {
    DensityMatrix::pure(&[c64(1.0, 0.0), c64(0.0, 0.0)]).expect("unit vector")
}

pub fn model2_hamiltonian(m: &TunnelingComplexElementModel) -> NHHamiltonian {
    NHHamiltonian::new(
        pauli_x().scaled(-m.hbar * m.omega),
        pauli_x().scaled(m.hbar * m.eta),
        m.hbar,
    )
    .expect("validated model parameters")
}

/// `½ [[1, 1], [1, 1]]`.
pub fn model2_pure_state() -> DensityMatrix {
    DensityMatrix::pure(&[c64(1.0, 0.0), c64(1.0, 0.0)]).expect("nonzero vector")
}

/// `ρ_p + [[δ₂, δ₁], [δ₁, −δ₂]]`.
pub fn perturbed_initial(rho_p: &DensityMatrix, p: &PerturbationParams) -> Result<DensityMatrix> {
    if rho_p.dim() != 2 {
        return Err(Error::WrongDimension(rho_p.dim()));
    }
    DensityMatrix::new(&**rho_p + &p.matrix())
}

/// `sinh(z)/z`, entire in `z`.
fn sinhc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        c64(1.0, 0.0) + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    }
}

/// Bloch-form state `I/2 + x σx + y σy + z σz`.
fn bloch_state(x: f64, y: f64, z: f64) -> Result<DensityMatrix> {
    let m = ComplexSquareMatrix::from_row_major(
        2,
        &[
            c64(0.5 + z, 0.0),
            c64(x, -y),
            c64(x, y),
            c64(0.5 - z, 0.0),
        ],
    )?;
    DensityMatrix::new(m)
}

fn real_part_checked(z: C64, scale: f64) -> Result<f64> {
    if z.im.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "closed form has imaginary residue {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// Closed-form state of the detuning model started from `ρ_p^(1) + δρ`.
///
/// With `μ = √(λ̃² − 1)` the solution is a ratio of hyperbolic functions
/// of `μτ` that share the overall factor `μ²`. After dividing it out every
/// term is an even entire function of `μ`, so the oscillatory regime
/// `|λ̃| < 1` (imaginary `μ`) and the limit `|λ̃| = 1` need no special
/// branch beyond the small-argument series of `sinh(z)/z`.
pub fn model1_analytic(
    m: &TunnelingDetuningModel,
    p: &PerturbationParams,
    tau: f64,
) -> Result<DensityMatrix> {
    let lt = m.lambda_tilde();
    let p2 = p.p2();
    let mu = c64(lt * lt - 1.0, 0.0).sqrt();
    let z = mu * tau;
    let sh1 = sinhc(z);
    let sh2 = sinhc(z * 2.0);

    let fx = c64(p.delta1, 0.0);
    let fy = sh1 * tau * (z.cosh() * p2 - sh1 * (lt * tau));
    let fz = (z * 2.0).cosh() * p2 - sh2 * (2.0 * lt * tau);
    let den = c64(1.0, 0.0) + sh1 * sh1 * (2.0 * lt * lt * tau * tau) - sh2 * (2.0 * p2 * lt * tau);

    if den.norm() <= DENOMINATOR_FLOOR {
        return Err(Error::SingularDenominator(tau));
    }
    let scale = fy.norm().max(fz.norm()).max(den.norm());
    let x = real_part_checked(fx / den, scale)?;
    let y = real_part_checked(fy / den, scale)?;
    let zc = real_part_checked(fz / (den * 2.0), scale)?;
    bloch_state(x, y, zc)
}

/// `G(τ) = cosh(2η̃τ) − p₁ sinh(2η̃τ) = (1 + δ₁)e^{−2η̃τ} − δ₁e^{2η̃τ}`.
///
/// The exponential form avoids the cancellation between `cosh` and `sinh`
/// when `p₁ ≈ 1` and `|η̃τ|` is large.
fn model2_denominator(eta_tilde: f64, delta1: f64, tau: f64) -> f64 {
    let a = 2.0 * eta_tilde * tau;
    (1.0 + delta1) * (-a).exp() - delta1 * a.exp()
}

/// Closed-form state of the complex-tunneling model started from
/// `ρ_p^(2) + δρ`.
pub fn model2_analytic(
    m: &TunnelingComplexElementModel,
    p: &PerturbationParams,
    tau: f64,
) -> Result<DensityMatrix> {
    let et = m.eta_tilde();
    let a = 2.0 * et * tau;
    // p₁ cosh a − sinh a
    let gx = (1.0 + p.delta1) * (-a).exp() + p.delta1 * a.exp();
    let gy = p.delta2 * (2.0 * tau).sin();
    let gz = p.delta2 * (2.0 * tau).cos();
    let g = model2_denominator(et, p.delta1, tau);
    if g.abs() <= DENOMINATOR_FLOOR {
        return Err(Error::SingularDenominator(tau));
    }
    bloch_state(gx / (2.0 * g), gy / g, gz / g)
}

/// First `τ > 0` with `G(τ) = 0`, if any.
///
/// `G` vanishes where `tanh(2η̃τ) = 1/p₁`, which has a positive root iff
/// `1/p₁` lies strictly inside `(0, 1)` for `η̃ > 0` or inside `(−1, 0)`
/// for `η̃ < 0`.
pub fn model2_singularity_time(
    m: &TunnelingComplexElementModel,
    p: &PerturbationParams,
) -> Option<f64> {
    let k = 2.0 * m.eta_tilde();
    let p1 = p.p1();
    if k == 0.0 || p1 == 0.0 {
        return None;
    }
    let target = 1.0 / p1;
    let has_root = (k > 0.0 && target > 0.0 && target < 1.0)
        || (k < 0.0 && target < 0.0 && target > -1.0);
    has_root.then(|| target.atanh() / k)
}
