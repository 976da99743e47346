//! Time integration of the non-normalized (`Ω`) and normalized (`ρ`)
//! evolution equations.
//!
//! With `H = H₊ − iΓ`:
//!
//! ```text
//! dΩ/dt = −(i/ħ)[H₊, Ω] − (1/ħ){Γ, Ω}
//! dρ/dt = −(i/ħ)[H₊, ρ] − (1/ħ){Γ, ρ} + (2/ħ)⟨Γ⟩ρ,     ρ = Ω / tr Ω
//! ```
//!
//! The `ρ` equation is nonlinear and can blow up in finite time when
//! `tr Ω` crosses zero. [`evolve`] detects this and terminates the
//! trajectory with [`Termination::SingularityReached`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables;
use crate::qmatrix::{
    c64, ComplexSquareMatrix, DensityMatrix, HermitianMatrix, VariationMatrix, C64,
};

/// Default floor on `tr Ω` below which the normalization is singular.
pub const DEFAULT_TRACE_FLOOR: f64 = 1e-10;
/// Default ceiling on `|ρᵢⱼ|` above which the state is treated as divergent.
pub const DEFAULT_BLOWUP_CEILING: f64 = 1e12;
/// Elementwise local error target of the adaptive integrator.
pub const DEFAULT_ADAPTIVE_TOL: f64 = 1e-10;

/// Tolerance applied when recording integrated states as density matrices.
const RECORD_TOL: f64 = 1e-9;
/// A fixed step whose relative change exceeds this is retried with half
/// the step. Only reached next to a finite-time blowup.
const MAX_RELATIVE_JUMP: f64 = 1.0;
/// Step sizes below `MIN_STEP_FRACTION · dt` end the run as singular.
const MIN_STEP_FRACTION: f64 = 1e-14;

/// Non-Hermitian Hamiltonian `H = H₊ − iΓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct NHHamiltonian {
    h_plus: HermitianMatrix,
    gamma: HermitianMatrix,
    hbar: f64,
}

impl NHHamiltonian {
    pub fn new(h_plus: HermitianMatrix, gamma: HermitianMatrix, hbar: f64) -> Result<Self> {
        if h_plus.dim() != gamma.dim() {
            return Err(Error::DimensionMismatch {
                expected: h_plus.dim(),
                found: gamma.dim(),
            });
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { h_plus, gamma, hbar })
    }

    /// Builds the Hamiltonian from a full (non-Hermitian) matrix.
    pub fn from_matrix(h: &ComplexSquareMatrix, hbar: f64) -> Result<Self> {
        let (h_plus, gamma) = crate::qmatrix::decompose_hamiltonian(h)?;
        Self::new(h_plus, gamma, hbar)
    }

    pub fn h_plus(&self) -> &HermitianMatrix {
        &self.h_plus
    }

    pub fn gamma(&self) -> &HermitianMatrix {
        &self.gamma
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dim(&self) -> usize {
        self.h_plus.dim()
    }

    /// `H₊ − iΓ`.
    pub fn matrix(&self) -> ComplexSquareMatrix {
        &*self.h_plus - &self.gamma.scale(c64(0.0, 1.0))
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }

    /// Right side of the `Ω` equation on raw storage.
    fn omega_rhs_raw(&self, omega: &DMatrix<C64>) -> DMatrix<C64> {
        let hp = self.h_plus.as_matrix();
        let g = self.gamma.as_matrix();
        let comm = hp * omega - omega * hp;
        let anti = g * omega + omega * g;
        comm * c64(0.0, -1.0 / self.hbar) - anti * c64(1.0 / self.hbar, 0.0)
    }

    /// Right side of the `ρ` equation on raw storage.
    fn rho_rhs_raw(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mean_gamma = real_trace_of_product(rho, self.gamma.as_matrix());
        self.omega_rhs_raw(rho) + rho * c64(2.0 * mean_gamma / self.hbar, 0.0)
    }
}

fn real_trace_of_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a constant step.
    Rk4Fixed,
    /// Fourth-order Runge-Kutta with step-doubling error control.
    Rk4Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Integrate the nonlinear `ρ` equation directly.
    NormalizedRho,
    /// Integrate the linear `Ω` equation and normalize.
    OmegaThenNormalize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub t_end: f64,
    pub dt: f64,
    pub method: Method,
    pub representation: Representation,
    pub renormalize_each_step: bool,
    pub singularity_trace_floor: f64,
    pub blowup_ceiling: f64,
    pub record_stride: usize,
    /// Local error target of [`Method::Rk4Adaptive`].
    pub adaptive_tol: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            dt: 1e-3,
            method: Method::Rk4Fixed,
            representation: Representation::NormalizedRho,
            renormalize_each_step: false,
            singularity_trace_floor: DEFAULT_TRACE_FLOOR,
            blowup_ceiling: DEFAULT_BLOWUP_CEILING,
            record_stride: 10,
            adaptive_tol: DEFAULT_ADAPTIVE_TOL,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("t_end", self.t_end)?;
        positive("dt", self.dt)?;
        positive("singularity_trace_floor", self.singularity_trace_floor)?;
        positive("blowup_ceiling", self.blowup_ceiling)?;
        positive("adaptive_tol", self.adaptive_tol)?;
        if self.dt >= self.t_end {
            return Err(Error::InvalidParameter(format!(
                "dt ({}) must be smaller than t_end ({})",
                self.dt, self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Termination {
    Completed,
    /// The normalization vanished or the state diverged at this time.
    SingularityReached(f64),
    /// A NaN or infinity appeared at this time.
    NonFinite(f64),
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub purity: Vec<f64>,
    pub linear_entropy: Vec<f64>,
    pub purity_rate: Vec<f64>,
    pub termination: Termination,
    /// Largest `|tr ρ − 1|` seen on any step before normalization or
    /// recording.
    pub max_trace_error: f64,
    /// Largest `max|ρ − ρ†|` seen on any step.
    pub max_hermiticity_error: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            purity: Vec::with_capacity(n),
            linear_entropy: Vec::with_capacity(n),
            purity_rate: Vec::with_capacity(n),
            termination: Termination::Completed,
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
        }
    }

    fn push(&mut self, h: &NHHamiltonian, t: f64, rho: DensityMatrix) -> Result<()> {
        let snap = observables::snapshot(h, &rho)?;
        self.times.push(t);
        self.states.push(rho);
        self.purity.push(snap.purity);
        self.linear_entropy.push(snap.linear_entropy);
        self.purity_rate.push(snap.purity_rate);
        Ok(())
    }
}

/// Right side of the `Ω` equation.
pub fn rhs_omega(h: &NHHamiltonian, omega: &HermitianMatrix) -> Result<HermitianMatrix> {
    h.check_dim(omega.dim())?;
    let out = ComplexSquareMatrix::new(h.omega_rhs_raw(omega.as_matrix()))?;
    HermitianMatrix::new(out)
}

/// Right side of the normalized `ρ` equation. The result is traceless.
pub fn rhs_rho(h: &NHHamiltonian, rho: &DensityMatrix) -> Result<VariationMatrix> {
    h.check_dim(rho.dim())?;
    let out = ComplexSquareMatrix::new(h.rho_rhs_raw(rho.as_matrix()))?;
    VariationMatrix::new(out)
}

/// `ρ = Ω / tr Ω` with the default singularity floor.
pub fn normalize(omega: &HermitianMatrix) -> Result<DensityMatrix> {
    normalize_with_floor(omega, DEFAULT_TRACE_FLOOR)
}

pub fn normalize_with_floor(omega: &HermitianMatrix, floor: f64) -> Result<DensityMatrix> {
    let tr = omega.real_trace();
    if tr.abs() <= floor {
        return Err(Error::SingularTrace(tr));
    }
    DensityMatrix::new(omega.scale_real(1.0 / tr))
}

fn rk4_step<F>(f: &F, y: &DMatrix<C64>, h: f64) -> DMatrix<C64>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    let half = c64(0.5 * h, 0.0);
    let k1 = f(y);
    let k2 = f(&(y + &k1 * half));
    let k3 = f(&(y + &k2 * half));
    let k4 = f(&(y + &k3 * c64(h, 0.0)));
    y + (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(h / 6.0, 0.0)
}

fn all_finite(m: &DMatrix<C64>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn raw_hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

enum StepOutcome {
    Accepted { y: DMatrix<C64>, h: f64, next_h: f64 },
    Diverged { nonfinite: bool },
}

struct Stepper<'a, F> {
    f: F,
    cfg: &'a EvolutionConfig,
    guard_jumps: bool,
    min_step: f64,
}

impl<F> Stepper<'_, F>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    fn step(&self, y: &DMatrix<C64>, h_requested: f64, remaining: f64) -> StepOutcome {
        match self.cfg.method {
            Method::Rk4Fixed => self.fixed_step(y, h_requested, remaining),
            Method::Rk4Adaptive => self.adaptive_step(y, h_requested, remaining),
        }
    }

    fn fixed_step(&self, y: &DMatrix<C64>, h_requested: f64, remaining: f64) -> StepOutcome {
        let mut h = h_requested.min(remaining);
        let scale = max_abs(y).max(1.0);
        loop {
            let y_new = rk4_step(&self.f, y, h);
            let finite = all_finite(&y_new);
            let jumped =
                self.guard_jumps && finite && max_abs(&(&y_new - y)) > MAX_RELATIVE_JUMP * scale;
            if finite && !jumped {
                return StepOutcome::Accepted {
                    y: y_new,
                    h,
                    next_h: self.cfg.dt,
                };
            }
            if !self.guard_jumps && !finite {
                return StepOutcome::Diverged { nonfinite: true };
            }
            h *= 0.5;
            if h < self.min_step {
                return StepOutcome::Diverged { nonfinite: !finite };
            }
        }
    }

    fn adaptive_step(&self, y: &DMatrix<C64>, h_requested: f64, remaining: f64) -> StepOutcome {
        let mut h = h_requested.min(remaining);
        loop {
            let full = rk4_step(&self.f, y, h);
            let mid = rk4_step(&self.f, y, 0.5 * h);
            let half = rk4_step(&self.f, &mid, 0.5 * h);
            let err = if all_finite(&full) && all_finite(&half) {
                full.iter()
                    .zip(half.iter())
                    .map(|(a, b)| (a - b).norm() / (15.0 * self.cfg.adaptive_tol * b.norm().max(1.0)))
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            if err <= 1.0 {
                let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
                return StepOutcome::Accepted {
                    y: half,
                    h,
                    next_h: h * factor,
                };
            }
            h *= if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.25 };
            if h < self.min_step {
                let nonfinite = !all_finite(&half);
                return StepOutcome::Diverged { nonfinite };
            }
        }
    }
}

/// Integrates the evolution from `rho0` up to `cfg.t_end`.
///
/// States are recorded at `t = 0`, every `record_stride` accepted steps, and
/// at the final time. On a singularity the last valid state is kept and the
/// estimated singular time is stored in the termination.
pub fn evolve(
    h: &NHHamiltonian,
    rho0: &DensityMatrix,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    h.check_dim(rho0.dim())?;
    cfg.validate()?;

    let capacity = match cfg.method {
        Method::Rk4Fixed => ((cfg.t_end / cfg.dt).ceil() as usize) / cfg.record_stride + 2,
        Method::Rk4Adaptive => 64,
    };
    let mut traj = Trajectory::with_capacity(capacity);
    traj.push(h, 0.0, rho0.clone())?;

    let min_step = cfg.dt * MIN_STEP_FRACTION;
    match cfg.representation {
        Representation::NormalizedRho => {
            let stepper = Stepper {
                f: |y: &DMatrix<C64>| h.rho_rhs_raw(y),
                cfg,
                guard_jumps: true,
                min_step,
            };
            run_rho(h, rho0, cfg, &stepper, &mut traj)?;
        }
        Representation::OmegaThenNormalize => {
            let stepper = Stepper {
                f: |y: &DMatrix<C64>| h.omega_rhs_raw(y),
                cfg,
                guard_jumps: false,
                min_step,
            };
            run_omega(h, rho0, cfg, &stepper, &mut traj)?;
        }
    }
    Ok(traj)
}

fn end_reached(t: f64, t_end: f64) -> bool {
    t_end - t <= 1e-12 * t_end.max(1.0)
}

fn record_raw(
    traj: &mut Trajectory,
    h: &NHHamiltonian,
    t: f64,
    y: &DMatrix<C64>,
) -> Result<bool> {
    let rho = ComplexSquareMatrix::new(y.clone())
        .and_then(|m| DensityMatrix::with_tolerance(m, RECORD_TOL));
    match rho {
        Ok(rho) => {
            traj.push(h, t, rho)?;
            Ok(true)
        }
        Err(_) => Ok(false),
    }
}

fn run_rho<F>(
    h: &NHHamiltonian,
    rho0: &DensityMatrix,
    cfg: &EvolutionConfig,
    stepper: &Stepper<'_, F>,
    traj: &mut Trajectory,
) -> Result<()>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    let mut y = rho0.as_matrix().clone();
    let mut t = 0.0;
    let mut h_next = cfg.dt;
    let mut steps = 0usize;
    let mut last_recorded = 0usize;

    while !end_reached(t, cfg.t_end) {
        let (y_new, h_used, next) = match stepper.step(&y, h_next, cfg.t_end - t) {
            StepOutcome::Accepted { y, h, next_h } => (y, h, next_h),
            StepOutcome::Diverged { nonfinite } => {
                if last_recorded != steps {
                    record_raw(traj, h, t, &y)?;
                }
                traj.termination = if nonfinite {
                    Termination::NonFinite(t)
                } else {
                    Termination::SingularityReached(t)
                };
                return Ok(());
            }
        };
        let mut y_new = y_new;
        let t_new = t + h_used;

        traj.max_hermiticity_error = traj.max_hermiticity_error.max(raw_hermiticity_error(&y_new));
        let tr = y_new.trace();
        traj.max_trace_error = traj.max_trace_error.max((tr - c64(1.0, 0.0)).norm());
        if cfg.renormalize_each_step {
            y_new /= tr;
        }
        if max_abs(&y_new) > cfg.blowup_ceiling {
            if last_recorded != steps {
                record_raw(traj, h, t, &y)?;
            }
            traj.termination = Termination::SingularityReached(t_new);
            return Ok(());
        }

        y = y_new;
        t = t_new;
        h_next = next;
        steps += 1;
        if steps % cfg.record_stride == 0 || end_reached(t, cfg.t_end) {
            if !record_raw(traj, h, t, &y)? {
                traj.termination = Termination::NonFinite(t);
                return Ok(());
            }
            last_recorded = steps;
        }
    }
    Ok(())
}

fn run_omega<F>(
    h: &NHHamiltonian,
    rho0: &DensityMatrix,
    cfg: &EvolutionConfig,
    stepper: &Stepper<'_, F>,
    traj: &mut Trajectory,
) -> Result<()>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    // Ω is rescaled to unit trace after every step. The equation is linear,
    // so positive rescaling leaves ρ unchanged, and the trace of each new
    // step is measured relative to the previous one.
    let mut y = rho0.as_matrix().clone();
    let mut t = 0.0;
    let mut h_next = cfg.dt;
    let mut steps = 0usize;
    let mut last_recorded = 0usize;

    while !end_reached(t, cfg.t_end) {
        let (omega, h_used, next) = match stepper.step(&y, h_next, cfg.t_end - t) {
            StepOutcome::Accepted { y, h, next_h } => (y, h, next_h),
            StepOutcome::Diverged { nonfinite } => {
                if last_recorded != steps {
                    record_raw(traj, h, t, &y)?;
                }
                traj.termination = if nonfinite {
                    Termination::NonFinite(t)
                } else {
                    Termination::SingularityReached(t)
                };
                return Ok(());
            }
        };
        let t_new = t + h_used;
        let tr = omega.trace().re;
        if !all_finite(&omega) || !tr.is_finite() {
            if last_recorded != steps {
                record_raw(traj, h, t, &y)?;
            }
            traj.termination = Termination::NonFinite(t_new);
            return Ok(());
        }
        if tr < cfg.singularity_trace_floor {
            if last_recorded != steps {
                record_raw(traj, h, t, &y)?;
            }
            // Linear interpolation of tr Ω between 1 (at t) and tr (at t_new).
            let t_sing = t + h_used * (1.0 / (1.0 - tr)).clamp(0.0, 1.0);
            traj.termination = Termination::SingularityReached(t_sing);
            return Ok(());
        }

        traj.max_hermiticity_error =
            traj.max_hermiticity_error.max(raw_hermiticity_error(&omega) / tr);
        let y_new = omega / c64(tr, 0.0);
        if max_abs(&y_new) > cfg.blowup_ceiling {
            if last_recorded != steps {
                record_raw(traj, h, t, &y)?;
            }
            traj.termination = Termination::SingularityReached(t_new);
            return Ok(());
        }

        y = y_new;
        t = t_new;
        h_next = next;
        steps += 1;
        if steps % cfg.record_stride == 0 || end_reached(t, cfg.t_end) {
            if !record_raw(traj, h, t, &y)? {
                traj.termination = Termination::NonFinite(t);
                return Ok(());
            }
            last_recorded = steps;
        }
    }
    Ok(())
}
