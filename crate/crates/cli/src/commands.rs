use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nh_stab::{
    analyze, evolve, linear_entropy, model1_analytic, model1_hamiltonian, model1_pure_state,
    model2_analytic, model2_hamiltonian, model2_pure_state, perturbed_initial, tls_exponent,
    EvolutionConfig, PerturbationParams, PureReference, Representation, Termination,
    TunnelingComplexElementModel, TunnelingDetuningModel,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Scenario, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::output::{num, trajectory_csv, StabilityReportJson};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_SINGULAR: u8 = 2;

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn emit(target: Option<&Path>, text: &str) -> Result<()> {
    match target {
        Some(path) => write_file(path, text),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn termination_code(t: Termination) -> u8 {
    match t {
        Termination::Completed => EXIT_OK,
        Termination::SingularityReached(_) | Termination::NonFinite(_) => EXIT_SINGULAR,
    }
}

pub fn cmd_evolve(config: &Path, out: Option<&Path>, quiet: bool) -> Result<u8> {
    let cfg = ScenarioConfig::load(config)?;
    let s = cfg.resolve()?;
    let traj = evolve(&s.hamiltonian, &s.initial, &s.evolution)?;
    let target = out.map(Path::to_path_buf).or(cfg.outputs.trajectory_csv.clone());
    emit(target.as_deref(), &trajectory_csv(&traj, s.omega, None))?;
    let end = s.tau(*traj.times.last().expect("initial state is always recorded"));
    note(
        quiet,
        format!("{} rows, tau_end={end}, termination {:?}", traj.len(), traj.termination),
    );
    Ok(termination_code(traj.termination))
}

fn stability_report(s: &Scenario) -> Result<StabilityReportJson> {
    let reference = PureReference::for_hamiltonian(s.reference.clone(), &s.hamiltonian)?;
    let report = analyze(&s.hamiltonian, &reference)?;
    let lambda_tls = if s.hamiltonian.dim() == 2 {
        Some(tls_exponent(&reference, s.hamiltonian.gamma(), s.hamiltonian.hbar())?)
    } else {
        None
    };
    Ok(StabilityReportJson::new(&report, lambda_tls))
}

pub fn cmd_stability(config: &Path, out: Option<&Path>, quiet: bool) -> Result<u8> {
    let cfg = ScenarioConfig::load(config)?;
    let s = cfg.resolve()?;
    let report = stability_report(&s)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    let target = out.map(Path::to_path_buf).or(cfg.outputs.stability_report.clone());
    emit(target.as_deref(), &text)?;
    note(quiet, format!("{:?}", report.classification));
    Ok(EXIT_OK)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    Fig1,
    Fig2,
}

#[derive(Clone, Copy, Debug)]
enum Family {
    Detuning,
    ComplexTunneling,
}

#[derive(Clone, Debug, Serialize)]
struct CurveEntry {
    panel: char,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_tilde: Option<f64>,
    delta1: f64,
    delta2: f64,
    file: String,
    rows: usize,
    lambda_tls: f64,
    singular: bool,
    nonfinite: bool,
    singularity_tau: Option<f64>,
    max_abs_s_l_deviation: f64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    figure: &'static str,
    tau_end: f64,
    dt: f64,
    record_stride: usize,
    representation: Representation,
    columns: Vec<String>,
    curves: Vec<CurveEntry>,
}

struct Curve {
    entry: CurveEntry,
    csv: String,
}

const FIGURE_DELTAS: [f64; 5] = [-0.02, -0.01, 0.0, 0.01, 0.02];

fn figure_curve(
    family: Family,
    panel: char,
    ratio: f64,
    p: PerturbationParams,
    cfg: &EvolutionConfig,
) -> Result<Curve> {
    let (h, rho_p) = match family {
        Family::Detuning => (
            model1_hamiltonian(&TunnelingDetuningModel::with_ratio(ratio)?),
            model1_pure_state(),
        ),
        Family::ComplexTunneling => (
            model2_hamiltonian(&TunnelingComplexElementModel::with_ratio(ratio)?),
            model2_pure_state(),
        ),
    };
    let rho0 = perturbed_initial(&rho_p, &p)?;
    let traj = evolve(&h, &rho0, cfg)?;
    let analytic: Vec<f64> = traj
        .times
        .iter()
        .map(|&tau| {
            let exact = match family {
                Family::Detuning => model1_analytic(&TunnelingDetuningModel::with_ratio(ratio)?, &p, tau),
                Family::ComplexTunneling => {
                    model2_analytic(&TunnelingComplexElementModel::with_ratio(ratio)?, &p, tau)
                }
            };
            Ok(exact.map_or(f64::NAN, |rho| linear_entropy(&rho)))
        })
        .collect::<Result<_>>()?;
    let deviation = traj
        .linear_entropy
        .iter()
        .zip(&analytic)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let reference = PureReference::for_hamiltonian(rho_p, &h)?;
    let (singular, nonfinite, singularity_tau) = match traj.termination {
        Termination::Completed => (false, false, None),
        Termination::SingularityReached(t) => (true, false, Some(t)),
        Termination::NonFinite(t) => (true, true, Some(t)),
    };
    let (lambda_tilde, eta_tilde, tag) = match family {
        Family::Detuning => (Some(ratio), None, "lambda"),
        Family::ComplexTunneling => (None, Some(ratio), "eta"),
    };
    let varied = match family {
        Family::Detuning => format!("delta2_{}", p.delta2),
        Family::ComplexTunneling => format!("delta1_{}", p.delta1),
    };
    Ok(Curve {
        entry: CurveEntry {
            panel,
            lambda_tilde,
            eta_tilde,
            delta1: p.delta1,
            delta2: p.delta2,
            file: format!("{panel}_{tag}_{ratio}_{varied}.csv"),
            rows: traj.len(),
            lambda_tls: tls_exponent(&reference, h.gamma(), h.hbar())?,
            singular,
            nonfinite,
            singularity_tau,
            max_abs_s_l_deviation: deviation,
        },
        csv: trajectory_csv(&traj, 1.0, Some(&analytic)),
    })
}

/// Parameter sets of the two figures: panels in order, five curves each.
fn figure_plan(id: FigureId) -> (Family, Vec<(char, f64, PerturbationParams)>, EvolutionConfig) {
    let base = EvolutionConfig {
        dt: 1e-3,
        record_stride: 10,
        ..EvolutionConfig::default()
    };
    let mut curves = Vec::new();
    match id {
        FigureId::Fig1 => {
            for (panel, lt) in ['a', 'b', 'c', 'd'].into_iter().zip([0.5, 2.0, -0.5, -2.0]) {
                for d2 in FIGURE_DELTAS {
                    curves.push((panel, lt, PerturbationParams { delta1: 0.01, delta2: d2 }));
                }
            }
            (Family::Detuning, curves, EvolutionConfig { t_end: 10.0, ..base })
        }
        FigureId::Fig2 => {
            for (panel, et) in ['a', 'b'].into_iter().zip([-2.0, 2.0]) {
                for d1 in FIGURE_DELTAS {
                    curves.push((panel, et, PerturbationParams { delta1: d1, delta2: 0.01 }));
                }
            }
            let cfg = EvolutionConfig {
                t_end: 3.0,
                representation: Representation::OmegaThenNormalize,
                ..base
            };
            (Family::ComplexTunneling, curves, cfg)
        }
    }
}

pub fn cmd_figure(id: FigureId, out_dir: &Path, quiet: bool) -> Result<u8> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let (family, plan, cfg) = figure_plan(id);
    let curves: Vec<Curve> = plan
        .par_iter()
        .map(|&(panel, ratio, p)| figure_curve(family, panel, ratio, p, &cfg))
        .collect::<Result<_>>()?;
    let name = match id {
        FigureId::Fig1 => "fig1",
        FigureId::Fig2 => "fig2",
    };
    let dir = out_dir.join(name);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for c in &curves {
        write_file(&dir.join(&c.entry.file), &c.csv)?;
    }
    let columns = csv_header(&curves);
    let manifest = Manifest {
        figure: name,
        tau_end: cfg.t_end,
        dt: cfg.dt,
        record_stride: cfg.record_stride,
        representation: cfg.representation,
        columns,
        curves: curves.into_iter().map(|c| c.entry).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&dir.join("manifest.json"), &text)?;
    let singular = manifest.curves.iter().filter(|c| c.singular).count();
    note(
        quiet,
        format!(
            "{name}: {} curves written to {} ({singular} singular)",
            manifest.curves.len(),
            dir.display()
        ),
    );
    Ok(EXIT_OK)
}

fn csv_header(curves: &[Curve]) -> Vec<String> {
    curves
        .first()
        .and_then(|c| c.csv.lines().next())
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default()
}

struct SweepRow {
    value: f64,
    lambda_tls: Option<f64>,
    classification: String,
    s_l_end: f64,
    singularity_tau: Option<f64>,
}

fn sweep_row(cfg: &ScenarioConfig, parameter: crate::config::SweepParameter, value: f64) -> Result<SweepRow> {
    let s = cfg.with_parameter(parameter, value)?.resolve()?;
    let report = stability_report(&s)?;
    let traj = evolve(&s.hamiltonian, &s.initial, &s.evolution)?;
    let singularity_tau = match traj.termination {
        Termination::Completed => None,
        Termination::SingularityReached(t) | Termination::NonFinite(t) => Some(s.tau(t)),
    };
    Ok(SweepRow {
        value,
        lambda_tls: report.lambda_tls,
        classification: format!("{:?}", report.classification),
        s_l_end: *traj.linear_entropy.last().expect("initial state is always recorded"),
        singularity_tau,
    })
}

pub fn cmd_sweep(config: &Path, out: Option<&Path>, quiet: bool) -> Result<u8> {
    let cfg = ScenarioConfig::load(config)?;
    let spec = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("config has no `sweep` section".into()))?;
    let grid = spec.grid()?;
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&v| sweep_row(&cfg, spec.parameter, v))
        .collect::<Result<_>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let write = |w: &mut csv::Writer<Vec<u8>>, rec: &[String]| {
        w.write_record(rec).map_err(|e| CliError::Config(e.to_string()))
    };
    write(
        &mut w,
        &[
            spec.parameter.name().to_string(),
            "lambda_tls".into(),
            "classification".into(),
            "S_L_end".into(),
            "singularity_tau".into(),
        ],
    )?;
    for r in &rows {
        write(
            &mut w,
            &[
                num(r.value),
                opt(r.lambda_tls),
                r.classification.clone(),
                num(r.s_l_end),
                opt(r.singularity_tau),
            ],
        )?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?)
        .expect("ASCII output");
    let target: Option<PathBuf> = out.map(Path::to_path_buf);
    emit(target.as_deref(), &text)?;
    note(quiet, format!("{} sweep rows", rows.len()));
    Ok(EXIT_OK)
}
