//! The model problem `-(ε u')' + β u' = f` on (-1, 1) with homogeneous
//! Dirichlet data, written in weak form as
//! `a(u, v) = ((ε u' - β u), v')` and `l(v) = <f, v>`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::BcMode;
use crate::quadrature::QuadratureRule;

/// Poincaré constant of H¹₀(-1, 1) for the L² norm of the function against
/// the L² norm of its derivative.
pub const POINCARE_CONSTANT: f64 = 2.0 / PI;

pub const DOMAIN: (f64, f64) = (-1.0, 1.0);

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SourceSpec {
    Analytic(ScalarFn),
    /// Point load `l(v) = v(location)`.
    DiracDelta(f64),
    Constant(f64),
}

impl fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Analytic(_) => f.write_str("Analytic(<fn>)"),
            SourceSpec::DiracDelta(x) => write!(f, "DiracDelta({x})"),
            SourceSpec::Constant(c) => write!(f, "Constant({c})"),
        }
    }
}

/// The three reference configurations with closed-form solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    /// `u = x sin(π(x + 1))` with a manufactured source.
    Smooth,
    /// Unit point load at x = 1/2.
    Delta,
    /// `f = 1`, `β = 1`; boundary layer at x = 1 for small ε.
    Advection,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Smooth => "smooth",
            Benchmark::Delta => "delta",
            Benchmark::Advection => "advection",
        }
    }

    pub fn default_epsilon(self) -> f64 {
        match self {
            Benchmark::Smooth | Benchmark::Delta => 1.0,
            Benchmark::Advection => 0.1,
        }
    }

    pub fn default_beta(self) -> f64 {
        match self {
            Benchmark::Smooth | Benchmark::Delta => 0.0,
            Benchmark::Advection => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    epsilon: f64,
    beta: f64,
    source: SourceSpec,
    bc: BcMode,
    benchmark: Option<Benchmark>,
}

impl Problem {
    pub fn new(epsilon: f64, beta: f64, source: SourceSpec, bc: BcMode) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !beta.is_finite() {
            return Err(Error::Config(format!("beta must be finite, got {beta}")));
        }
        if let SourceSpec::DiracDelta(x0) = source {
            if !(x0 > DOMAIN.0 && x0 < DOMAIN.1) {
                return Err(Error::Config(format!(
                    "delta location must lie strictly inside (-1, 1), got {x0}"
                )));
            }
        }
        Ok(Self {
            epsilon,
            beta,
            source,
            bc,
            benchmark: None,
        })
    }

    /// One of the reference configurations with the given coefficients.
    pub fn benchmark(kind: Benchmark, epsilon: f64, beta: f64, bc: BcMode) -> Result<Self> {
        let source = match kind {
            Benchmark::Smooth => SourceSpec::Constant(0.0),
            Benchmark::Delta => SourceSpec::DiracDelta(0.5),
            Benchmark::Advection => SourceSpec::Constant(1.0),
        };
        let mut problem = Self::new(epsilon, beta, source, bc)?;
        problem.benchmark = Some(kind);
        if kind == Benchmark::Smooth {
            problem.source = manufactured_source(&problem)?;
        }
        Ok(problem)
    }

    pub fn smooth(epsilon: f64, bc: BcMode) -> Result<Self> {
        Self::benchmark(Benchmark::Smooth, epsilon, 0.0, bc)
    }

    pub fn delta(bc: BcMode) -> Result<Self> {
        Self::benchmark(Benchmark::Delta, 1.0, 0.0, bc)
    }

    pub fn advection(epsilon: f64, bc: BcMode) -> Result<Self> {
        Self::benchmark(Benchmark::Advection, epsilon, 1.0, bc)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn source(&self) -> &SourceSpec {
        &self.source
    }

    pub fn bc(&self) -> BcMode {
        self.bc
    }

    pub fn benchmark_kind(&self) -> Option<Benchmark> {
        self.benchmark
    }

    pub fn with_bc(&self, bc: BcMode) -> Self {
        Self { bc, ..self.clone() }
    }
}

/// Pointwise integrand of `a(u, v)`: `(ε u' - β u) v'`.
pub fn bilinear_a(problem: &Problem, u: f64, du: f64, dv: f64) -> f64 {
    (problem.epsilon * du - problem.beta * u) * dv
}

/// `l(v)`. Point loads are evaluated exactly, other sources by `quad`.
pub fn linear_l(problem: &Problem, basis_fn: impl Fn(f64) -> f64, quad: &QuadratureRule) -> f64 {
    match &problem.source {
        SourceSpec::DiracDelta(x0) => basis_fn(*x0),
        SourceSpec::Constant(c) => quad.integrate_fn(|x| c * basis_fn(x)),
        SourceSpec::Analytic(f) => quad.integrate_fn(|x| f(x) * basis_fn(x)),
    }
}

/// `μ = 1 + C_Ω |β| / ε`.
pub fn continuity_constant(problem: &Problem) -> f64 {
    1.0 + POINCARE_CONSTANT * problem.beta.abs() / problem.epsilon
}

/// The bilinear form is coercive with constant one in the energy norm.
pub fn inf_sup_constant(_problem: &Problem) -> f64 {
    1.0
}

#[derive(Clone)]
pub struct ExactSolution {
    u: ScalarFn,
    du: ScalarFn,
    label: String,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl ExactSolution {
    pub fn new(label: impl Into<String>, u: ScalarFn, du: ScalarFn) -> Self {
        Self {
            u,
            du,
            label: label.into(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.u)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.du)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

fn smooth_u(x: f64) -> f64 {
    x * (PI * (x + 1.0)).sin()
}

fn smooth_du(x: f64) -> f64 {
    let t = PI * (x + 1.0);
    t.sin() + PI * x * t.cos()
}

fn smooth_d2u(x: f64) -> f64 {
    let t = PI * (x + 1.0);
    2.0 * PI * t.cos() - PI * PI * x * t.sin()
}

pub fn exact_solution(problem: &Problem) -> Result<ExactSolution> {
    let eps = problem.epsilon;
    match problem.benchmark {
        Some(Benchmark::Smooth) => Ok(ExactSolution::new(
            "x sin(pi (x + 1))",
            Arc::new(smooth_u),
            Arc::new(smooth_du),
        )),
        // Green's function of -ε u'' with a unit load at 1/2.
        Some(Benchmark::Delta) if problem.beta == 0.0 => Ok(ExactSolution::new(
            "piecewise linear point-load response",
            Arc::new(move |x| {
                if x <= 0.5 {
                    0.25 * (x + 1.0) / eps
                } else {
                    0.75 * (1.0 - x) / eps
                }
            }),
            Arc::new(move |x| if x < 0.5 { 0.25 / eps } else { -0.75 / eps }),
        )),
        Some(Benchmark::Advection) if problem.beta == 1.0 => {
            // 1 - exp(-2/ε), kept accurate for every ε.
            let denom = -(-2.0 / eps).exp_m1();
            Ok(ExactSolution::new(
                "boundary layer",
                Arc::new(move |x| -2.0 * ((x - 1.0) / eps).exp_m1() / denom + x - 1.0),
                Arc::new(move |x| 1.0 - 2.0 / eps * ((x - 1.0) / eps).exp() / denom),
            ))
        }
        _ => Err(Error::NoExactSolution),
    }
}

/// Source that makes `x sin(π(x + 1))` the solution: `f = -ε u'' + β u'`.
pub fn manufactured_source(problem: &Problem) -> Result<SourceSpec> {
    if problem.benchmark != Some(Benchmark::Smooth) {
        return Err(Error::Config(
            "manufactured source is only defined for the smooth benchmark".into(),
        ));
    }
    let (eps, beta) = (problem.epsilon, problem.beta);
    Ok(SourceSpec::Analytic(Arc::new(move |x| {
        -eps * smooth_d2u(x) + beta * smooth_du(x)
    })))
}
