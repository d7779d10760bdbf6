//! `train` and `sweep`: run, then write everything into the output directory.
//!
//! Files per run: `config.json` (resolved), `history.csv`, `solution.csv`,
//! `summary.json`. A sweep writes one such directory per ε plus `sweep.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rvpinn_core::mlp::MlpParams;
use rvpinn_core::problem::{continuity_constant, inf_sup_constant, Problem};
use rvpinn_core::report::{
    export_history, export_solution, fmt_f64, loss_error_log_correlation, verify_bounds,
    BoundSummary, ErrorEvaluator, HistoryFormat,
};
use rvpinn_core::trainer::{train, IterationRecord, TrainError, TrainOutcome};

use crate::config::RunConfig;
use crate::CliError;

pub const SOLUTION_SAMPLES: usize = 1001;

pub const SWEEP_HEADER: [&str; 13] = [
    "epsilon",
    "status",
    "epochs",
    "final_loss",
    "final_phi_norm",
    "final_energy_error",
    "final_relative_error",
    "best_epoch",
    "best_loss",
    "best_relative_error",
    "lower_bound_fraction",
    "reliability_ratio",
    "loss_error_correlation",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub epoch: usize,
    pub loss: f64,
    pub phi_norm: f64,
    pub penalty: f64,
    pub energy_error: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Abort {
    pub epoch: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub benchmark: String,
    pub epsilon: f64,
    pub beta: f64,
    pub status: &'static str,
    pub abort: Option<Abort>,
    pub records: usize,
    pub final_record: Option<Snapshot>,
    pub best: Option<Snapshot>,
    pub mu: f64,
    pub alpha: f64,
    pub exact_norm: Option<f64>,
    pub bounds: BoundSummary,
    pub loss_error_correlation: Option<f64>,
}

pub struct RunResult {
    pub summary: Summary,
    pub outcome: TrainOutcome,
}

fn snapshot(record: &IterationRecord, exact_norm: Option<f64>) -> Snapshot {
    Snapshot {
        epoch: record.epoch,
        loss: record.loss,
        phi_norm: record.phi_norm,
        penalty: record.penalty,
        energy_error: record.energy_error,
        relative_error: record.energy_error.zip(exact_norm).map(|(e, n)| e / n),
    }
}

/// Trains per `cfg` and writes the result files. Config problems are
/// reported before `cfg.output_dir` is touched; a numerical abort still
/// writes everything recorded so far.
pub fn execute(cfg: &RunConfig) -> Result<RunResult, CliError> {
    let result = run_and_write(cfg)?;
    if let Some(a) = &result.summary.abort {
        return Err(CliError::Numeric(format!(
            "training aborted at epoch {}: {}",
            a.epoch, a.message
        )));
    }
    Ok(result)
}

/// Like [`execute`], but an abort is only reported through the summary.
pub fn run_and_write(cfg: &RunConfig) -> Result<RunResult, CliError> {
    let problem = cfg.build_problem()?;
    let space = cfg.build_space()?;
    let (outcome, abort) = match train(&problem, &space, &cfg.train) {
        Ok(outcome) => (outcome, None),
        Err(TrainError::Setup(e)) => return Err(CliError::Config(e.to_string())),
        Err(TrainError::Aborted {
            epoch,
            source,
            partial,
        }) => (
            *partial,
            Some(Abort {
                epoch,
                message: source.to_string(),
            }),
        ),
    };
    let summary = summarize(cfg, &problem, &outcome, abort);
    write_outputs(cfg, &problem, &outcome, &summary)?;
    Ok(RunResult { summary, outcome })
}

fn summarize(
    cfg: &RunConfig,
    problem: &Problem,
    outcome: &TrainOutcome,
    abort: Option<Abort>,
) -> Summary {
    let evaluator = ErrorEvaluator::new(problem, cfg.train.error_nodes).ok();
    let exact_norm = evaluator.as_ref().map(ErrorEvaluator::exact_norm);
    let best = outcome
        .history
        .iter()
        .find(|r| r.epoch == outcome.best_epoch)
        .map(|r| snapshot(r, exact_norm));
    Summary {
        benchmark: cfg.problem.kind.name().to_owned(),
        epsilon: problem.epsilon(),
        beta: problem.beta(),
        status: if abort.is_some() { "aborted" } else { "ok" },
        abort,
        records: outcome.history.len(),
        final_record: outcome.history.last().map(|r| snapshot(r, exact_norm)),
        best,
        mu: outcome.mu,
        alpha: inf_sup_constant(problem),
        exact_norm,
        bounds: verify_bounds(
            &outcome.history,
            continuity_constant(problem),
            cfg.train.bound_tolerance,
        ),
        loss_error_correlation: loss_error_log_correlation(&outcome.history),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_outputs(
    cfg: &RunConfig,
    problem: &Problem,
    outcome: &TrainOutcome,
    summary: &Summary,
) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json() + "\n").map_err(|e| io_err(&path, e))?;
    let path = dir.join("history.csv");
    export_history(&outcome.history, &path, HistoryFormat::Csv).map_err(|e| io_err(&path, e))?;
    let path = dir.join("solution.csv");
    let params: &MlpParams = &outcome.best_params;
    export_solution(params, problem, SOLUTION_SAMPLES, &path).map_err(|e| io_err(&path, e))?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Directory name for one sweep member, e.g. `eps_0.005`.
pub fn sweep_dir(root: &Path, epsilon: f64) -> PathBuf {
    root.join(format!("eps_{epsilon}"))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn sweep_row(epsilon: f64, result: &Result<RunResult, CliError>) -> Vec<String> {
    let mut row = vec![fmt_f64(epsilon)];
    let s = match result {
        Ok(r) => &r.summary,
        Err(e) => {
            row.push(format!("failed: {}", e.message()));
            row.resize(SWEEP_HEADER.len(), String::new());
            return row;
        }
    };
    let last = s.final_record.as_ref();
    let best = s.best.as_ref();
    row.extend([
        s.status.to_owned(),
        last.map(|r| r.epoch.to_string()).unwrap_or_default(),
        opt(last.map(|r| r.loss)),
        opt(last.map(|r| r.phi_norm)),
        opt(last.and_then(|r| r.energy_error)),
        opt(last.and_then(|r| r.relative_error)),
        best.map(|r| r.epoch.to_string()).unwrap_or_default(),
        opt(best.map(|r| r.loss)),
        opt(best.and_then(|r| r.relative_error)),
        opt(s.bounds.lower_bound_fraction),
        opt(s.bounds.reliability_ratio),
        opt(s.loss_error_correlation),
    ]);
    row
}

/// Runs `base` once per ε, each into its own subdirectory of
/// `base.output_dir`, and aggregates into `sweep.csv`. Individual failures
/// are recorded and the sweep continues; the first numerical abort decides
/// the returned error.
pub fn sweep(base: &RunConfig, epsilons: &[f64]) -> Result<Vec<Option<Summary>>, CliError> {
    if epsilons.is_empty() {
        return Err(CliError::Config("sweep needs at least one epsilon".into()));
    }
    let mut configs = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut cfg = base.clone();
        cfg.problem.epsilon = Some(eps);
        cfg.output_dir = sweep_dir(&base.output_dir, eps);
        configs.push(
            cfg.resolve()
                .map_err(|e| CliError::Config(format!("epsilon {eps}: {}", e.message())))?,
        );
    }

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut first_error = None;
    for (cfg, &eps) in configs.iter().zip(epsilons) {
        let result = run_and_write(cfg);
        rows.push(sweep_row(eps, &result));
        match result {
            Ok(r) => {
                if let Some(a) = &r.summary.abort {
                    eprintln!("epsilon {eps}: aborted at epoch {}: {}", a.epoch, a.message);
                    first_error.get_or_insert(CliError::Numeric(format!(
                        "epsilon {eps}: training aborted at epoch {}",
                        a.epoch
                    )));
                }
                summaries.push(Some(r.summary));
            }
            Err(e) => {
                eprintln!("epsilon {eps}: {}", e.message());
                summaries.push(None);
                first_error.get_or_insert(e);
            }
        }
    }

    let dir = &base.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(SWEEP_HEADER).map_err(|e| io_err(&path, e))?;
    for row in &rows {
        w.write_record(row).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    match first_error {
        Some(e) => Err(e),
        None => Ok(summaries),
    }
}
