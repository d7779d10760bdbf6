//! Full-batch ADAM minimization of the robust loss with per-epoch
//! diagnostics.

use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::error::{Error, Result};
use crate::mlp::{mlp_init, validate_architecture, MlpParams, DEFAULT_ARCHITECTURE};
use crate::problem::{continuity_constant, Problem};
use crate::report::ErrorEvaluator;
use crate::residual::RvpinnLoss;
use crate::testspace::TestSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Epoch stride between history records.
    pub record_every: usize,
    pub architecture: Vec<usize>,
    /// Relative slack in the lower-bound check `‖φ‖/μ ≤ error·(1 + tol)`.
    pub bound_tolerance: f64,
    /// Trapezoid nodes for the energy-norm error.
    pub error_nodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            max_epochs: 6000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            record_every: 10,
            architecture: DEFAULT_ARCHITECTURE.to_vec(),
            bound_tolerance: 1e-2,
            error_nodes: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("train.learning_rate must be > 0, got {}", self.learning_rate));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("train.{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return fail(format!("train.adam_epsilon must be > 0, got {}", self.adam_epsilon));
        }
        if self.record_every == 0 {
            return fail("train.record_every must be >= 1".into());
        }
        if !(self.bound_tolerance >= 0.0) {
            return fail(format!(
                "train.bound_tolerance must be >= 0, got {}",
                self.bound_tolerance
            ));
        }
        if self.error_nodes < 2 {
            return fail(format!("train.error_nodes must be >= 2, got {}", self.error_nodes));
        }
        validate_architecture(&self.architecture)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected ADAM update of `theta` in place.
pub fn adam_step(
    state: &mut AdamState,
    theta: &mut [f64],
    grad: &[f64],
    cfg: &TrainConfig,
) -> Result<()> {
    if grad.len() != theta.len() || state.m.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: grad.len(),
        });
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: "adam gradient".into(),
            index: Some(index),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in theta
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub epoch: usize,
    pub loss: f64,
    pub phi_norm: f64,
    pub energy_error: Option<f64>,
    pub lower_bound_ok: Option<bool>,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<IterationRecord>,
    /// Parameters with the lowest recorded loss.
    pub best_params: MlpParams,
    pub best_epoch: usize,
    pub final_params: MlpParams,
    pub mu: f64,
}

#[derive(Debug, ThisError)]
pub enum TrainError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("training aborted at epoch {epoch}: {source}")]
    Aborted {
        epoch: usize,
        source: Error,
        partial: Box<TrainOutcome>,
    },
}

/// Runs up to `cfg.max_epochs` ADAM steps from the seeded initialization.
pub fn train(
    problem: &Problem,
    space: &TestSpace,
    cfg: &TrainConfig,
) -> std::result::Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let loss_fn = RvpinnLoss::new(problem, space)?;
    let evaluator = match ErrorEvaluator::new(problem, cfg.error_nodes) {
        Ok(e) => Some(e),
        Err(Error::NoExactSolution) => None,
        Err(e) => return Err(e.into()),
    };
    let mu = continuity_constant(problem);
    let mut params = mlp_init(&cfg.architecture, cfg.seed)?;
    let mut theta = params.flatten();
    let mut adam = AdamState::new(theta.len());

    let mut outcome = TrainOutcome {
        history: Vec::with_capacity(cfg.max_epochs / cfg.record_every + 2),
        best_params: params.clone(),
        best_epoch: 0,
        final_params: params.clone(),
        mu,
    };
    let mut best_loss = f64::INFINITY;
    let abort = |epoch, source, mut outcome: TrainOutcome, params: &MlpParams| {
        outcome.final_params = params.clone();
        TrainError::Aborted {
            epoch,
            source,
            partial: Box::new(outcome),
        }
    };

    for epoch in 0..=cfg.max_epochs {
        let (assembly, grad) = match loss_fn.value_and_grad(&params) {
            Ok(v) => v,
            Err(e) => return Err(abort(epoch, e, outcome, &params)),
        };
        if epoch % cfg.record_every == 0 || epoch == cfg.max_epochs {
            let energy_error = evaluator
                .as_ref()
                .map(|e| e.energy_error(&params, problem.bc()));
            let lower_bound_ok =
                energy_error.map(|err| assembly.phi_norm / mu <= err * (1.0 + cfg.bound_tolerance));
            outcome.history.push(IterationRecord {
                epoch,
                loss: assembly.loss,
                phi_norm: assembly.phi_norm,
                energy_error,
                lower_bound_ok,
                penalty: assembly.penalty,
            });
            if assembly.loss < best_loss {
                best_loss = assembly.loss;
                outcome.best_epoch = epoch;
                outcome.best_params = params.clone();
            }
        }
        if epoch == cfg.max_epochs {
            break;
        }
        if let Err(e) = adam_step(&mut adam, &mut theta, &grad, cfg) {
            return Err(abort(epoch, e, outcome, &params));
        }
        params.assign_flat(&theta)?;
    }
    outcome.final_params = params;
    Ok(outcome)
}
