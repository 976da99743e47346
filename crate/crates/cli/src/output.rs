//! CSV and JSON emission.

use nh_stab::{
    lyapunov_certificate, DensityMatrix, Error as CoreError, StabilityReport, Termination,
    Trajectory,
};
use serde::Serialize;

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Upper-triangle density-matrix column names: diagonal entries are real,
/// off-diagonal entries contribute real and imaginary parts.
pub fn rho_columns(dim: usize) -> Vec<String> {
    let mut cols = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            cols.push(format!("rho_{i}{j}_re"));
            if i != j {
                cols.push(format!("rho_{i}{j}_im"));
            }
        }
    }
    cols
}

fn rho_values(rho: &DensityMatrix) -> Vec<String> {
    let dim = rho.dim();
    let mut vals = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            let z = rho.get(i, j);
            vals.push(num(z.re));
            if i != j {
                vals.push(num(z.im));
            }
        }
    }
    vals
}

pub fn termination_footer(termination: Termination, omega: f64) -> Option<String> {
    match termination {
        Termination::Completed => None,
        Termination::SingularityReached(t) => Some(format!("# singularity tau={}", num(omega * t))),
        Termination::NonFinite(t) => Some(format!("# nonfinite tau={}", num(omega * t))),
    }
}

/// Trajectory as CSV text. `analytic_s_l`, when given, adds a column right
/// after `S_L` with one value per recorded time.
pub fn trajectory_csv(traj: &Trajectory, omega: f64, analytic_s_l: Option<&[f64]>) -> String {
    let dim = traj.states.first().map_or(0, |s| s.dim());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tau".to_string(), "S_L".to_string()];
    if analytic_s_l.is_some() {
        header.push("S_L_analytic".into());
    }
    header.extend(["purity".to_string(), "purity_rate".to_string()]);
    header.extend(rho_columns(dim));
    w.write_record(&header).expect("writing to memory");

    for i in 0..traj.len() {
        let mut row = vec![num(omega * traj.times[i]), num(traj.linear_entropy[i])];
        if let Some(a) = analytic_s_l {
            row.push(num(a[i]));
        }
        // Rate per unit τ.
        row.extend([num(traj.purity[i]), num(traj.purity_rate[i] / omega)]);
        row.extend(rho_values(&traj.states[i]));
        w.write_record(&row).expect("writing to memory");
    }
    let mut text = String::from_utf8(w.into_inner().expect("flush to memory")).expect("ASCII");
    if let Some(footer) = termination_footer(traj.termination, omega) {
        text.push_str(&footer);
        text.push('\n');
    }
    text
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovStatus {
    /// `certified`, `not_positive_definite` or `singular`.
    pub status: &'static str,
    pub p: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReportJson {
    pub dim: usize,
    pub lambda_tls: Option<f64>,
    pub char_matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<[f64; 2]>,
    pub max_real_part: f64,
    pub classification: nh_stab::Classification,
    pub instability_type: Option<nh_stab::InstabilityType>,
    pub lyapunov: LyapunovStatus,
}

impl StabilityReportJson {
    pub fn new(report: &StabilityReport, lambda_tls: Option<f64>) -> Self {
        let lyapunov = if let Some(p) = &report.lyapunov_p {
            LyapunovStatus {
                status: "certified",
                p: Some(p.row_iter().map(|r| r.iter().copied().collect()).collect()),
            }
        } else {
            let status = match lyapunov_certificate(&report.char_matrix) {
                Ok(Some(_)) => "certified",
                Ok(None) => "not_positive_definite",
                Err(CoreError::SingularLyapunov) => "singular",
                Err(_) => "unavailable",
            };
            LyapunovStatus { status, p: None }
        };
        Self {
            dim: report.char_matrix.nrows(),
            lambda_tls,
            char_matrix: report
                .char_matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            eigenvalues: report.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            max_real_part: report.max_real_part(),
            classification: report.classification,
            instability_type: report.instability_type,
            lyapunov,
        }
    }
}
