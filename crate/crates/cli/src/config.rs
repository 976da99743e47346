//! JSON scenario configuration.
//!
//! Times in the `evolution` section (`t_end`, `dt`) are dimensionless
//! `τ = ωt`; they are converted to physical time before integration.

use std::path::{Path, PathBuf};

use nh_stab::{
    model1_hamiltonian, model1_pure_state, model2_hamiltonian, model2_pure_state,
    perturbed_initial, ComplexSquareMatrix, DensityMatrix, EvolutionConfig, HermitianMatrix,
    NHHamiltonian, PerturbationParams, TunnelingComplexElementModel, TunnelingDetuningModel,
    VariationMatrix,
};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Row-major list of `[re, im]` pairs.
pub type MatrixLiteral = Vec<[f64; 2]>;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub reference_state: StateSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `H = −ħω σx − iħλ σz`.
    Model1 {
        lambda_tilde: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default = "one")]
        hbar: f64,
    },
    /// `H = −ħω σx − iħη σx`.
    Model2 {
        eta_tilde: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default = "one")]
        hbar: f64,
    },
    /// Either `h_plus` together with `gamma`, or the full matrix `h`.
    Custom {
        #[serde(default)]
        h_plus: Option<MatrixLiteral>,
        #[serde(default)]
        gamma: Option<MatrixLiteral>,
        #[serde(default)]
        h: Option<MatrixLiteral>,
        #[serde(default = "one")]
        hbar: f64,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// The model's own pure state; not available for custom models.
    #[default]
    Default,
    Matrix(MatrixLiteral),
    /// State vector, normalized on use.
    Vector(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PerturbationSpec {
    Matrix(PerturbationMatrix),
    Params(PerturbationFields),
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec::Params(PerturbationFields::default())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationMatrix {
    pub matrix: MatrixLiteral,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationFields {
    #[serde(default)]
    pub delta1: f64,
    #[serde(default)]
    pub delta2: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trajectory_csv: Option<PathBuf>,
    pub stability_report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    LambdaTilde,
    EtaTilde,
    Delta1,
    Delta2,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::LambdaTilde => "lambda_tilde",
            SweepParameter::EtaTilde => "eta_tilde",
            SweepParameter::Delta1 => "delta1",
            SweepParameter::Delta2 => "delta2",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
}

impl SweepSpec {
    /// Grid points in order; `stop` is included when it lies on the grid.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let grid = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step.is_finite() && step > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Err(CliError::Config(format!(
                        "sweep range needs finite bounds and a positive step, got {start}..{stop} by {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor();
                if n < 0.0 {
                    Vec::new()
                } else {
                    (0..=n as usize).map(|i| start + i as f64 * step).collect()
                }
            }
            _ => {
                return Err(CliError::Config(
                    "sweep needs either `values` or all of `start`, `stop`, `step`".into(),
                ))
            }
        };
        if grid.is_empty() {
            return Err(CliError::Config("sweep grid is empty".into()));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("sweep values must be finite".into()));
        }
        Ok(grid)
    }
}

/// A fully resolved scenario ready for integration.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub hamiltonian: NHHamiltonian,
    pub reference: DensityMatrix,
    pub initial: DensityMatrix,
    /// Frequency unit: `τ = ω t`. One for custom models.
    pub omega: f64,
    /// Evolution settings in physical time.
    pub evolution: EvolutionConfig,
}

impl Scenario {
    pub fn tau(&self, t: f64) -> f64 {
        self.omega * t
    }
}

fn matrix(literal: &[[f64; 2]], what: &str) -> Result<ComplexSquareMatrix> {
    ComplexSquareMatrix::from_pairs(literal)
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Copy with one model or perturbation parameter replaced.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        match (parameter, &mut cfg.model) {
            (SweepParameter::LambdaTilde, ModelSpec::Model1 { lambda_tilde, .. }) => {
                *lambda_tilde = value
            }
            (SweepParameter::EtaTilde, ModelSpec::Model2 { eta_tilde, .. }) => *eta_tilde = value,
            (SweepParameter::Delta1 | SweepParameter::Delta2, _) => match &mut cfg.perturbation {
                PerturbationSpec::Params(p) if parameter == SweepParameter::Delta1 => p.delta1 = value,
                PerturbationSpec::Params(p) => p.delta2 = value,
                PerturbationSpec::Matrix(_) => {
                    return Err(CliError::Config(format!(
                        "cannot sweep {} with an explicit perturbation matrix",
                        parameter.name()
                    )))
                }
            },
            _ => {
                return Err(CliError::Config(format!(
                    "parameter {} does not apply to this model",
                    parameter.name()
                )))
            }
        }
        Ok(cfg)
    }

    fn hamiltonian(&self) -> Result<(NHHamiltonian, f64)> {
        match &self.model {
            ModelSpec::Model1 {
                lambda_tilde,
                omega,
                hbar,
            } => {
                let m = TunnelingDetuningModel::new(*omega, lambda_tilde * omega, *hbar)?;
                Ok((model1_hamiltonian(&m), *omega))
            }
            ModelSpec::Model2 {
                eta_tilde,
                omega,
                hbar,
            } => {
                let m = TunnelingComplexElementModel::new(*omega, eta_tilde * omega, *hbar)?;
                Ok((model2_hamiltonian(&m), *omega))
            }
            ModelSpec::Custom {
                h_plus,
                gamma,
                h,
                hbar,
            } => {
                let ham = match (h_plus, gamma, h) {
                    (Some(hp), Some(g), None) => NHHamiltonian::new(
                        HermitianMatrix::new(matrix(hp, "h_plus")?)?,
                        HermitianMatrix::new(matrix(g, "gamma")?)?,
                        *hbar,
                    )?,
                    (None, None, Some(h)) => NHHamiltonian::from_matrix(&matrix(h, "h")?, *hbar)?,
                    _ => {
                        return Err(CliError::Config(
                            "custom model needs exactly one of `h` or `h_plus` + `gamma`".into(),
                        ))
                    }
                };
                Ok((ham, 1.0))
            }
        }
    }

    fn reference_state(&self) -> Result<DensityMatrix> {
        Ok(match (&self.reference_state, &self.model) {
            (StateSpec::Default, ModelSpec::Model1 { .. }) => model1_pure_state(),
            (StateSpec::Default, ModelSpec::Model2 { .. }) => model2_pure_state(),
            (StateSpec::Default, ModelSpec::Custom { .. }) => {
                return Err(CliError::Config(
                    "custom models need an explicit reference_state".into(),
                ))
            }
            (StateSpec::Matrix(m), _) => DensityMatrix::new(matrix(m, "reference_state")?)?,
            (StateSpec::Vector(v), _) => {
                let psi: Vec<_> = v.iter().map(|[re, im]| nh_stab::c64(*re, *im)).collect();
                DensityMatrix::pure(&psi)?
            }
        })
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let (hamiltonian, omega) = self.hamiltonian()?;
        let reference = self.reference_state()?;
        if reference.dim() != hamiltonian.dim() {
            return Err(CliError::Config(format!(
                "reference_state has dimension {} but the model has dimension {}",
                reference.dim(),
                hamiltonian.dim()
            )));
        }
        let initial = match &self.perturbation {
            PerturbationSpec::Params(p) if p.delta1 == 0.0 && p.delta2 == 0.0 => reference.clone(),
            PerturbationSpec::Params(p) => {
                perturbed_initial(&reference, &PerturbationParams::new(p.delta1, p.delta2)?)?
            }
            PerturbationSpec::Matrix(m) => {
                let delta = VariationMatrix::new(matrix(&m.matrix, "perturbation")?)?;
                DensityMatrix::new(&*reference + &delta)?
            }
        };
        let mut evolution = self.evolution.clone();
        evolution.t_end /= omega;
        evolution.dt /= omega;
        evolution.validate()?;
        Ok(Scenario {
            hamiltonian,
            reference,
            initial,
            omega,
            evolution,
        })
    }
}
