//! Property suites behind `rvpinn verify <suite>`.

use clap::ValueEnum;

use rvpinn_core::mlp::{mlp_init, BcMode, MlpParams};
use rvpinn_core::problem::{exact_solution, Problem};
use rvpinn_core::quadrature::trapezoid;
use rvpinn_core::residual::RvpinnLoss;
use rvpinn_core::testspace::{gram_assemble, gram_by_quadrature, TestSpace, SPECTRAL_TRAPEZOID_NODES};
use rvpinn_core::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Gram,
    Grad,
    Rescale,
    Consistency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < limit,
            detail: format!("{value:.3e} < {limit:.0e}"),
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Gram => gram_checks(),
        Suite::Grad => grad_checks(),
        Suite::Rescale => rescale_checks(),
        Suite::Consistency => consistency_checks(),
    }
}

fn max_abs_diff(a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn gram_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let quad = trapezoid(SPECTRAL_TRAPEZOID_NODES, -1.0, 1.0)?;
    for eps in [1.0, 0.1, 0.005] {
        let space = TestSpace::spectral(50, eps)?;
        let g = gram_by_quadrature(&space, eps, &quad);
        let dev = max_abs_diff(&g, &ndarray::Array2::eye(50));
        out.push(Check::new(format!("spectral M=50 eps={eps} max|G-I|"), dev, 1e-5));
    }
    for m in [1, 10, 100] {
        let space = TestSpace::finite_element(m)?;
        let closed = gram_assemble(&space, 1.0);
        let numeric = gram_by_quadrature(&space, 1.0, &space.default_quadrature()?);
        out.push(Check::new(
            format!("fe M={m} closed form vs Gauss"),
            max_abs_diff(&closed, &numeric),
            1e-12,
        ));
    }
    Ok(out)
}

/// Central differences with step `h`, compared as `|g - fd| / max(|g|, 1)`.
pub fn fd_gradient_error(loss: &RvpinnLoss, params: &MlpParams, h: f64) -> Result<f64> {
    let (_, grad) = loss.value_and_grad(params)?;
    let theta = params.flatten();
    let mut worst = 0.0_f64;
    for (i, g) in grad.iter().enumerate() {
        let mut a = theta.clone();
        let mut b = theta.clone();
        a[i] += h;
        b[i] -= h;
        let fa = loss.evaluate(&params.unflatten(&a)?)?.loss;
        let fb = loss.evaluate(&params.unflatten(&b)?)?.loss;
        let fd = (fa - fb) / (2.0 * h);
        worst = worst.max((g - fd).abs() / g.abs().max(1.0));
    }
    Ok(worst)
}

pub fn grad_checks() -> Result<Vec<Check>> {
    let params = mlp_init(&[1, 5, 5, 1], 7)?;
    let mut out = Vec::new();
    for bc in [BcMode::Strong, BcMode::Constrained] {
        let problem = Problem::smooth(1.0, bc)?;
        for (label, space) in [
            ("fe", TestSpace::finite_element(5)?),
            ("spectral", TestSpace::spectral(5, 1.0)?),
        ] {
            let loss = RvpinnLoss::new(&problem, &space)?;
            let err = fd_gradient_error(&loss, &params, 1e-6)?;
            out.push(Check::new(format!("gradient {bc:?} {label} M=5"), err, 1e-4));
        }
    }
    Ok(out)
}

pub fn rescale_checks() -> Result<Vec<Check>> {
    let c = 1e3;
    let k = 3;
    let params = mlp_init(&[1, 5, 5, 1], 11)?;
    let problem = Problem::smooth(1.0, BcMode::Strong)?;
    let space = TestSpace::finite_element(10)?;
    let base = RvpinnLoss::new(&problem, &space)?;
    let scaled = RvpinnLoss::new(&problem, &space.with_scaled_basis(k, c)?)?;
    let a = base.evaluate(&params)?;
    let b = scaled.evaluate(&params)?;
    let drift = (a.loss - b.loss).abs() / a.loss;
    let term = b.residual[k - 1].powi(2) / a.residual[k - 1].powi(2);
    let classical_growth = scaled.classical(&params) / base.classical(&params);
    Ok(vec![
        Check::new("rvpinn loss relative drift, c=1e3", drift, 1e-9),
        Check::new(
            "classical term factor / c^2 - 1",
            (term / (c * c) - 1.0).abs(),
            1e-9,
        ),
        Check {
            name: "classical loss grows".into(),
            passed: classical_growth > 1.0,
            detail: format!("factor {classical_growth:.3e}"),
        },
    ])
}

pub fn consistency_checks() -> Result<Vec<Check>> {
    let problem = Problem::smooth(1.0, BcMode::Strong)?;
    let exact = exact_solution(&problem)?;
    let mut out = Vec::new();
    for (label, space) in [
        ("spectral M=50", TestSpace::spectral(50, 1.0)?),
        ("fe M=100", TestSpace::finite_element(100)?),
    ] {
        let a = RvpinnLoss::new(&problem, &space)?.assemble(&exact)?;
        let r_inf = a.residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        out.push(Check::new(format!("{label} exact |R|_inf"), r_inf, 1e-6));
        out.push(Check::new(format!("{label} exact loss"), a.loss, 1e-10));
    }
    Ok(out)
}
