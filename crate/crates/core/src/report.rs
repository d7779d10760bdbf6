//! Energy-norm errors against the closed-form solutions, checks of the
//! two-sided error bounds over a training history, and CSV/JSON export.
//!
//! History CSV columns (fixed order):
//! `epoch,loss,sqrt_loss,phi_norm,energy_error,penalty,lower_bound_ok`.
//! `energy_error` and `lower_bound_ok` are empty when the problem has no
//! closed-form solution. Solution CSV columns: `x,u_theta,u_exact`, the last
//! one omitted when no closed form exists. Floats carry 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{BcMode, MlpParams};
use crate::problem::{continuity_constant, exact_solution, inf_sup_constant, Problem};
use crate::quadrature::{trapezoid, QuadratureRule};
use crate::residual::ResidualAssembly;
use crate::trainer::IterationRecord;

pub const HISTORY_HEADER: [&str; 7] = [
    "epoch",
    "loss",
    "sqrt_loss",
    "phi_norm",
    "energy_error",
    "penalty",
    "lower_bound_ok",
];

pub const SOLUTION_HEADER: [&str; 3] = ["x", "u_theta", "u_exact"];

/// Default trapezoid resolution for the energy-norm error.
pub const ERROR_NODES: usize = 10_000;

/// Fraction of recorded epochs, counted from the end, over which the
/// reliability ratio is taken.
pub const RELIABILITY_TAIL: f64 = 0.2;

/// Format with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Energy-norm error `√(ε ∫ (u' - u_θ')²)` by the trapezoid rule, with the
/// exact derivative tabulated once.
#[derive(Debug, Clone)]
pub struct ErrorEvaluator {
    quad: QuadratureRule,
    exact_du: Vec<f64>,
    epsilon: f64,
    exact_norm: f64,
}

impl ErrorEvaluator {
    pub fn new(problem: &Problem, n_nodes: usize) -> Result<Self> {
        let exact = exact_solution(problem)?;
        let quad = trapezoid(n_nodes, -1.0, 1.0)?;
        let exact_du: Vec<f64> = quad.nodes().iter().map(|&x| exact.derivative(x)).collect();
        let epsilon = problem.epsilon();
        let sq: Vec<f64> = exact_du.iter().map(|d| d * d).collect();
        let exact_norm = (epsilon * quad.integrate(&sq)).sqrt();
        Ok(Self {
            quad,
            exact_du,
            epsilon,
            exact_norm,
        })
    }

    pub fn energy_error(&self, params: &MlpParams, bc: BcMode) -> f64 {
        let (_, du) = params.eval_batch(self.quad.nodes(), bc);
        self.energy_error_from_derivatives(&du)
    }

    pub fn energy_error_from_derivatives(&self, du: &[f64]) -> f64 {
        let sq: Vec<f64> = self
            .exact_du
            .iter()
            .zip(du)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        (self.epsilon * self.quad.integrate(&sq)).sqrt()
    }

    /// `|u|_U`, the normalizer for relative errors.
    pub fn exact_norm(&self) -> f64 {
        self.exact_norm
    }

    pub fn nodes(&self) -> &[f64] {
        self.quad.nodes()
    }
}

/// `|u - u_θ|_U` with an `n_nodes` trapezoid rule.
pub fn energy_error(params: &MlpParams, problem: &Problem, n_nodes: usize) -> Result<f64> {
    Ok(ErrorEvaluator::new(problem, n_nodes)?.energy_error(params, problem.bc()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub energy_error: f64,
    pub phi_norm: f64,
    pub ratio: f64,
    pub mu: f64,
    pub alpha: f64,
    pub lower_bound_satisfied: bool,
}

pub fn error_report(
    params: &MlpParams,
    problem: &Problem,
    assembly: &ResidualAssembly,
    tol: f64,
) -> Result<ErrorReport> {
    let err = energy_error(params, problem, ERROR_NODES)?;
    let mu = continuity_constant(problem);
    Ok(ErrorReport {
        energy_error: err,
        phi_norm: assembly.phi_norm,
        ratio: assembly.loss.sqrt() / err,
        mu,
        alpha: inf_sup_constant(problem),
        lower_bound_satisfied: assembly.phi_norm / mu <= err * (1.0 + tol),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub has_exact_solution: bool,
    pub records: usize,
    /// Share of records with `‖φ‖/μ ≤ error·(1 + tol)`.
    pub lower_bound_fraction: Option<f64>,
    /// `max error/‖φ‖` over the final 20% of records.
    pub reliability_ratio: Option<f64>,
    /// Largest `(‖φ‖/μ) / error` seen; at most `1 + tol` when the bound holds.
    pub worst_efficiency_ratio: Option<f64>,
    pub mu: f64,
    pub tol: f64,
}

pub fn verify_bounds(history: &[IterationRecord], mu: f64, tol: f64) -> BoundSummary {
    let with_error: Vec<(&IterationRecord, f64)> = history
        .iter()
        .filter_map(|r| r.energy_error.map(|e| (r, e)))
        .collect();
    let mut summary = BoundSummary {
        has_exact_solution: !with_error.is_empty(),
        records: history.len(),
        lower_bound_fraction: None,
        reliability_ratio: None,
        worst_efficiency_ratio: None,
        mu,
        tol,
    };
    if with_error.is_empty() {
        return summary;
    }
    let ok = with_error
        .iter()
        .filter(|(r, e)| r.phi_norm / mu <= e * (1.0 + tol))
        .count();
    summary.lower_bound_fraction = Some(ok as f64 / with_error.len() as f64);
    summary.worst_efficiency_ratio = with_error
        .iter()
        .map(|(r, e)| r.phi_norm / mu / e)
        .reduce(f64::max);
    let tail_len = ((with_error.len() as f64 * RELIABILITY_TAIL).ceil() as usize).max(1);
    summary.reliability_ratio = with_error[with_error.len() - tail_len..]
        .iter()
        .map(|(r, e)| e / r.phi_norm)
        .reduce(f64::max);
    summary
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation of `log √loss` against `log error` over the history.
pub fn loss_error_log_correlation(history: &[IterationRecord]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = history
        .iter()
        .filter_map(|r| {
            r.energy_error
                .filter(|e| *e > 0.0 && r.loss > 0.0)
                .map(|e| (r.loss.sqrt().ln(), e.ln()))
        })
        .unzip();
    pearson(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryFormat {
    Csv,
    Json,
}

fn history_row(r: &IterationRecord) -> [String; 7] {
    [
        r.epoch.to_string(),
        fmt_f64(r.loss),
        fmt_f64(r.loss.sqrt()),
        fmt_f64(r.phi_norm),
        r.energy_error.map(fmt_f64).unwrap_or_default(),
        fmt_f64(r.penalty),
        r.lower_bound_ok.map(|b| b.to_string()).unwrap_or_default(),
    ]
}

pub fn write_history_csv<W: Write>(history: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_HEADER)?;
    for r in history {
        w.write_record(history_row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per record, keys as in the CSV header; absent values are
/// `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryRow {
    pub epoch: usize,
    pub loss: f64,
    pub sqrt_loss: f64,
    pub phi_norm: f64,
    pub energy_error: Option<f64>,
    pub penalty: f64,
    pub lower_bound_ok: Option<bool>,
}

impl From<&IterationRecord> for HistoryRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            epoch: r.epoch,
            loss: r.loss,
            sqrt_loss: r.loss.sqrt(),
            phi_norm: r.phi_norm,
            energy_error: r.energy_error,
            penalty: r.penalty,
            lower_bound_ok: r.lower_bound_ok,
        }
    }
}

impl From<HistoryRow> for IterationRecord {
    fn from(r: HistoryRow) -> Self {
        Self {
            epoch: r.epoch,
            loss: r.loss,
            phi_norm: r.phi_norm,
            energy_error: r.energy_error,
            lower_bound_ok: r.lower_bound_ok,
            penalty: r.penalty,
        }
    }
}

pub fn write_history_json<W: Write>(history: &[IterationRecord], out: W) -> Result<()> {
    let rows: Vec<HistoryRow> = history.iter().map(HistoryRow::from).collect();
    serde_json::to_writer_pretty(out, &rows)?;
    Ok(())
}

pub fn export_history(history: &[IterationRecord], path: &Path, format: HistoryFormat) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    match format {
        HistoryFormat::Csv => write_history_csv(history, &mut file)?,
        HistoryFormat::Json => write_history_json(history, &mut file)?,
    }
    file.flush()?;
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(field: &str, what: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("cannot parse {what} from {field:?}")))
}

pub fn read_history_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != HISTORY_HEADER {
        return Err(Error::Config(format!("unexpected history header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let req = |i: usize| -> Result<f64> {
            parse_opt(&rec[i], HISTORY_HEADER[i])?
                .ok_or_else(|| Error::Config(format!("missing {}", HISTORY_HEADER[i])))
        };
        out.push(IterationRecord {
            epoch: parse_opt(&rec[0], "epoch")?
                .ok_or_else(|| Error::Config("missing epoch".into()))?,
            loss: req(1)?,
            phi_norm: req(3)?,
            energy_error: parse_opt(&rec[4], "energy_error")?,
            penalty: req(5)?,
            lower_bound_ok: parse_opt(&rec[6], "lower_bound_ok")?,
        });
    }
    Ok(out)
}

pub fn read_history_json(path: &Path) -> Result<Vec<IterationRecord>> {
    let rows: Vec<HistoryRow> = serde_json::from_reader(File::open(path)?)?;
    Ok(rows.into_iter().map(IterationRecord::from).collect())
}

/// Samples `u_θ` (and the exact solution when known) at `n_samples`
/// equispaced points of [-1, 1].
pub fn export_solution(
    params: &MlpParams,
    problem: &Problem,
    n_samples: usize,
    path: &Path,
) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_solution_csv(params, problem, n_samples, file)
}

pub fn write_solution_csv<W: Write>(
    params: &MlpParams,
    problem: &Problem,
    n_samples: usize,
    out: W,
) -> Result<()> {
    let xs: Vec<f64> = match n_samples {
        0 => Vec::new(),
        1 => vec![0.0],
        n => trapezoid(n, -1.0, 1.0)?.nodes().to_vec(),
    };
    let exact = match exact_solution(problem) {
        Ok(e) => Some(e),
        Err(Error::NoExactSolution) => None,
        Err(e) => return Err(e),
    };
    let (u, _) = params.eval_batch(&xs, problem.bc());
    let mut w = csv::Writer::from_writer(out);
    let cols = if exact.is_some() { 3 } else { 2 };
    w.write_record(&SOLUTION_HEADER[..cols])?;
    for (x, u) in xs.iter().zip(&u) {
        let mut row = vec![fmt_f64(*x), fmt_f64(*u)];
        if let Some(e) = &exact {
            row.push(fmt_f64(e.value(*x)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
