//! Weak residual `R_n = r(u_θ, φ_n) = l(φ_n) - a(u_θ, φ_n)` and the losses
//! built on it.
//!
//! The robust loss is the squared norm of the discrete Riesz representative
//! of the residual, `Rᵀ G⁻¹ R`, plus the boundary penalty. The classical
//! loss `Σ R_n²` is kept for comparison; it coincides with the robust one only
//! when the test basis is orthonormal.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mlp::{grad_with, BcMode, MlpParams, NodeOutput, Probe};
use crate::problem::{linear_l, ExactSolution, Problem, SourceSpec};
use crate::quadrature::QuadratureRule;
use crate::tape::{Tape, Var};
use crate::testspace::{gram_assemble, gram_factorize, GramFactorization, TestSpace};

/// Rounding slack on `Rᵀ G⁻¹ R` before it is treated as an SPD violation.
pub const QUADRATIC_FORM_TOLERANCE: f64 = 1e-12;

/// Anything that can be evaluated (with derivative) at quadrature nodes in
/// place of the network.
pub trait TrialFunction {
    fn eval_points(&self, xs: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// A parameter vector together with the boundary treatment it is used with.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a> {
    pub params: &'a MlpParams,
    pub bc: BcMode,
}

impl TrialFunction for Network<'_> {
    fn eval_points(&self, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.params.eval_batch(xs, self.bc)
    }
}

impl TrialFunction for ExactSolution {
    fn eval_points(&self, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        xs.iter().map(|&x| (self.value(x), self.derivative(x))).unzip()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualAssembly {
    pub residual: Vec<f64>,
    pub eta: Vec<f64>,
    pub loss: f64,
    pub phi_norm: f64,
    pub penalty: f64,
}

/// The θ-independent part of the residual: loads `l(φ_n)` and the negated
/// weighted test-function derivatives `-w_q φ_n'(x_q)` at the quadrature
/// nodes, so that `R_n = l(φ_n) + Σ_q rows[n][q] (ε u'(x_q) - β u(x_q))`.
#[derive(Debug, Clone)]
pub struct ResidualOperator {
    problem: Problem,
    space: TestSpace,
    quad: QuadratureRule,
    load: Vec<f64>,
    rows: Vec<Arc<[f64]>>,
}

impl ResidualOperator {
    pub fn new(problem: &Problem, space: &TestSpace, quad: &QuadratureRule) -> Result<Self> {
        let n = space.dimension();
        let mut load = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for m in 1..=n {
            space.basis_eval(m, 0.0)?;
            let value = |x: f64| space.basis_eval(m, x).map(|(v, _)| v).unwrap_or(0.0);
            load.push(linear_l(problem, value, quad));
            let row: Vec<f64> = quad
                .nodes()
                .iter()
                .zip(quad.weights())
                .map(|(&x, &w)| -w * space.basis_eval(m, x).map(|(_, d)| d).unwrap_or(0.0))
                .collect();
            rows.push(row.into());
        }
        Ok(Self {
            problem: problem.clone(),
            space: space.clone(),
            quad: quad.clone(),
            load,
            rows,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn space(&self) -> &TestSpace {
        &self.space
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    fn flux(&self, u: f64, du: f64) -> f64 {
        self.problem.epsilon() * du - self.problem.beta() * u
    }

    /// Residual vector from trial values at the quadrature nodes.
    pub fn residual(&self, u: &[f64], du: &[f64]) -> Vec<f64> {
        let flux: Vec<f64> = u.iter().zip(du).map(|(&u, &d)| self.flux(u, d)).collect();
        self.rows
            .iter()
            .zip(&self.load)
            .map(|(row, &l)| l + row.iter().zip(&flux).map(|(w, f)| w * f).sum::<f64>())
            .collect()
    }

    pub fn residual_of(&self, trial: &impl TrialFunction) -> Vec<f64> {
        let (u, du) = trial.eval_points(self.quad.nodes());
        self.residual(&u, &du)
    }

    /// Residual vector recorded on the tape from network outputs at the
    /// quadrature nodes.
    pub fn record<'t>(&self, tape: &'t Tape, outputs: &[NodeOutput<'t>]) -> Vec<Var<'t>> {
        let (eps, beta) = (self.problem.epsilon(), self.problem.beta());
        let flux: Vec<Var<'t>> = outputs
            .iter()
            .map(|o| {
                tape.linear_combination(&[o.du, o.u], Arc::from([eps, -beta].as_slice()), 0.0)
            })
            .collect();
        tape.linear_map(&flux, &self.rows, &self.load)
    }
}

/// `C(u_θ) = u_θ(-1)² + u_θ(1)²`, identically zero under strong imposition.
pub fn boundary_penalty(params: &MlpParams, bc: BcMode) -> f64 {
    match bc {
        BcMode::Strong => 0.0,
        BcMode::Constrained => {
            let (u, _) = params.eval_batch(&[-1.0, 1.0], bc);
            u[0] * u[0] + u[1] * u[1]
        }
    }
}

fn penalty_on<'t>(probe: &mut Probe<'t>) -> Option<Var<'t>> {
    match probe.bc() {
        BcMode::Strong => None,
        BcMode::Constrained => {
            let ends = probe.eval(&[-1.0, 1.0]);
            Some(ends[0].u.square() + ends[1].u.square())
        }
    }
}

fn quadratic_form(residual: &[f64], eta: &[f64]) -> Result<f64> {
    let q: f64 = residual.iter().zip(eta).map(|(r, e)| r * e).sum();
    if q < -QUADRATIC_FORM_TOLERANCE {
        return Err(Error::NegativeQuadraticForm(q));
    }
    Ok(q.max(0.0))
}

/// The robust loss for a fixed problem and test space, with everything that
/// does not depend on θ (Gram factorization, loads, quadrature) precomputed.
#[derive(Debug, Clone)]
pub struct RvpinnLoss {
    operator: ResidualOperator,
    fact: GramFactorization,
}

impl RvpinnLoss {
    /// Uses the space's default quadrature.
    pub fn new(problem: &Problem, space: &TestSpace) -> Result<Self> {
        Self::with_quadrature(problem, space, &space.default_quadrature()?)
    }

    pub fn with_quadrature(
        problem: &Problem,
        space: &TestSpace,
        quad: &QuadratureRule,
    ) -> Result<Self> {
        let fact = gram_factorize(&gram_assemble(space, problem.epsilon()))?;
        Self::from_parts(ResidualOperator::new(problem, space, quad)?, fact)
    }

    pub fn from_parts(operator: ResidualOperator, fact: GramFactorization) -> Result<Self> {
        if fact.dimension() != operator.space.dimension() {
            return Err(Error::DimensionMismatch {
                expected: operator.space.dimension(),
                found: fact.dimension(),
            });
        }
        Ok(Self { operator, fact })
    }

    pub fn operator(&self) -> &ResidualOperator {
        &self.operator
    }

    pub fn factorization(&self) -> &GramFactorization {
        &self.fact
    }

    pub fn problem(&self) -> &Problem {
        &self.operator.problem
    }

    fn finish(&self, residual: Vec<f64>, penalty: f64) -> Result<ResidualAssembly> {
        let eta = self.fact.solve(&residual)?;
        let q = quadratic_form(&residual, &eta)?;
        Ok(ResidualAssembly {
            residual,
            eta,
            loss: q + penalty,
            phi_norm: q.sqrt(),
            penalty,
        })
    }

    /// Loss of an arbitrary trial function. Its boundary values enter the
    /// penalty when the problem uses constrained imposition.
    pub fn assemble(&self, trial: &impl TrialFunction) -> Result<ResidualAssembly> {
        let residual = self.operator.residual_of(trial);
        let penalty = match self.problem().bc() {
            BcMode::Strong => 0.0,
            BcMode::Constrained => {
                let (u, _) = trial.eval_points(&[-1.0, 1.0]);
                u[0] * u[0] + u[1] * u[1]
            }
        };
        self.finish(residual, penalty)
    }

    pub fn evaluate(&self, params: &MlpParams) -> Result<ResidualAssembly> {
        self.assemble(&Network {
            params,
            bc: self.problem().bc(),
        })
    }

    /// Loss and its gradient with respect to θ.
    ///
    /// The quadratic form enters the tape as a single node with partials
    /// `2η`, using the symmetry of `G⁻¹`.
    pub fn value_and_grad(&self, params: &MlpParams) -> Result<(ResidualAssembly, Vec<f64>)> {
        let (_, grad, assembly) = grad_with(params, self.problem().bc(), |probe| {
            let tape = probe.tape();
            let outputs = probe.eval(self.operator.quad.nodes());
            let r = self.operator.record(tape, &outputs);
            let penalty = penalty_on(probe);
            let residual: Vec<f64> = r.iter().map(Var::value).collect();
            let assembly =
                self.finish(residual, penalty.as_ref().map_or(0.0, Var::value))?;
            let partials = assembly.eta.iter().map(|e| 2.0 * e).collect();
            let q = tape.custom(&r, assembly.phi_norm.powi(2), partials);
            let loss = match penalty {
                Some(p) => q + p,
                None => q,
            };
            Ok((loss, assembly))
        })?;
        Ok((assembly, grad))
    }

    /// Same gradient, but with the two triangular solves recorded on the
    /// tape instead of the closed-form `2η` shortcut.
    pub fn value_and_grad_via_solves(&self, params: &MlpParams) -> Result<(f64, Vec<f64>)> {
        let (value, grad, ()) = grad_with(params, self.problem().bc(), |probe| {
            let tape = probe.tape();
            let outputs = probe.eval(self.operator.quad.nodes());
            let r = self.operator.record(tape, &outputs);
            let eta = self.fact.solve_on(tape, &r)?;
            let terms: Vec<Var> = r.iter().zip(&eta).map(|(&a, &b)| a * b).collect();
            let mut loss = tape.sum(&terms);
            if let Some(p) = penalty_on(probe) {
                loss = loss + p;
            }
            Ok((loss, ()))
        })?;
        Ok((value, grad))
    }

    /// `Σ R_n² + C(u_θ)`.
    pub fn classical(&self, params: &MlpParams) -> f64 {
        let bc = self.problem().bc();
        let residual = self.operator.residual_of(&Network { params, bc });
        residual.iter().map(|r| r * r).sum::<f64>() + boundary_penalty(params, bc)
    }
}

pub fn residual_vector(
    params: &MlpParams,
    problem: &Problem,
    space: &TestSpace,
    quad: &QuadratureRule,
) -> Result<Vec<f64>> {
    let op = ResidualOperator::new(problem, space, quad)?;
    Ok(op.residual_of(&Network {
        params,
        bc: problem.bc(),
    }))
}

pub fn rvpinn_loss(
    params: &MlpParams,
    problem: &Problem,
    space: &TestSpace,
    fact: &GramFactorization,
    quad: &QuadratureRule,
) -> Result<ResidualAssembly> {
    RvpinnLoss::from_parts(ResidualOperator::new(problem, space, quad)?, fact.clone())?
        .evaluate(params)
}

pub fn classical_vpinn_loss(
    params: &MlpParams,
    problem: &Problem,
    space: &TestSpace,
    quad: &QuadratureRule,
) -> Result<f64> {
    let residual = residual_vector(params, problem, space, quad)?;
    Ok(residual.iter().map(|r| r * r).sum::<f64>() + boundary_penalty(params, problem.bc()))
}

/// The robust loss for the sine basis written out term by term:
/// `4/(επ²) Σ_m r(u_θ, s_m)² / m² + C(u_θ)` with the unnormalized
/// `s_m = sin(mπ(x + 1)/2)`. Evaluated without any Gram matrix or
/// [`TestSpace`].
pub fn spectral_series_loss(
    params: &MlpParams,
    problem: &Problem,
    modes: usize,
    quad: &QuadratureRule,
) -> f64 {
    let (eps, beta) = (problem.epsilon(), problem.beta());
    let (u, du) = params.eval_batch(quad.nodes(), problem.bc());
    let sum: f64 = (1..=modes)
        .map(|m| {
            let k = m as f64 * PI / 2.0;
            let s = |x: f64| (k * (x + 1.0)).sin();
            let load = match problem.source() {
                SourceSpec::DiracDelta(x0) => s(*x0),
                SourceSpec::Constant(c) => quad.integrate_fn(|x| c * s(x)),
                SourceSpec::Analytic(f) => quad.integrate_fn(|x| f(x) * s(x)),
            };
            let a: f64 = quad
                .nodes()
                .iter()
                .zip(quad.weights())
                .zip(u.iter().zip(&du))
                .map(|((&x, &w), (&u, &du))| w * (eps * du - beta * u) * k * (k * (x + 1.0)).cos())
                .sum();
            let r = load - a;
            r * r / (m * m) as f64
        })
        .sum();
    4.0 / (eps * PI * PI) * sum + boundary_penalty(params, problem.bc())
}
