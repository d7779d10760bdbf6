//! Fixed quadrature rules: composite Gauss–Legendre on a mesh and the
//! composite trapezoid rule on a uniform grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    GaussPerElement {
        points_per_element: usize,
        mesh: Vec<f64>,
    },
    Trapezoid {
        n_nodes: usize,
        a: f64,
        b: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on the reference interval [-1, 1].
fn reference_gauss(points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (nodes, weights) = match points {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let x = 1.0 / 3f64.sqrt();
            (vec![-x, x], vec![1.0, 1.0])
        }
        3 => {
            let x = (3.0f64 / 5.0).sqrt();
            (vec![-x, 0.0, x], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = 2.0 / 7.0 * (6.0f64 / 5.0).sqrt();
            let inner = (3.0 / 7.0 - r).sqrt();
            let outer = (3.0 / 7.0 + r).sqrt();
            let s30 = 30f64.sqrt();
            let w_inner = (18.0 + s30) / 36.0;
            let w_outer = (18.0 - s30) / 36.0;
            (
                vec![-outer, -inner, inner, outer],
                vec![w_outer, w_inner, w_inner, w_outer],
            )
        }
        5 => {
            let r = 2.0 * (10.0f64 / 7.0).sqrt();
            let inner = (5.0 - r).sqrt() / 3.0;
            let outer = (5.0 + r).sqrt() / 3.0;
            let s70 = 70f64.sqrt();
            let w_inner = (322.0 + 13.0 * s70) / 900.0;
            let w_outer = (322.0 - 13.0 * s70) / 900.0;
            (
                vec![-outer, -inner, 0.0, inner, outer],
                vec![w_outer, w_inner, 128.0 / 225.0, w_inner, w_outer],
            )
        }
        p => {
            return Err(Error::Config(format!(
                "gauss-legendre rule supports 1..=5 points per element, got {p}"
            )))
        }
    };
    Ok((nodes, weights))
}

/// Composite Gauss–Legendre rule with `points_per_element` points mapped into
/// every cell of `mesh`.
pub fn gauss_legendre(points_per_element: usize, mesh: &[f64]) -> Result<QuadratureRule> {
    let (ref_nodes, ref_weights) = reference_gauss(points_per_element)?;
    if mesh.len() < 2 {
        return Err(Error::Config("mesh needs at least two nodes".into()));
    }
    if mesh.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::UnsortedMesh);
    }
    let cells = mesh.len() - 1;
    let mut nodes = Vec::with_capacity(cells * points_per_element);
    let mut weights = Vec::with_capacity(cells * points_per_element);
    for cell in mesh.windows(2) {
        let (lo, hi) = (cell[0], cell[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (&xi, &wi) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    Ok(QuadratureRule {
        kind: RuleKind::GaussPerElement {
            points_per_element,
            mesh: mesh.to_vec(),
        },
        nodes,
        weights,
    })
}

/// Composite trapezoid rule with `n_nodes` equispaced nodes, endpoints included.
pub fn trapezoid(n_nodes: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n_nodes < 2 {
        return Err(Error::Config(format!(
            "trapezoid rule needs at least 2 nodes, got {n_nodes}"
        )));
    }
    if !(a < b) {
        return Err(Error::Config(format!("empty interval [{a}, {b}]")));
    }
    let h = (b - a) / (n_nodes - 1) as f64;
    let nodes: Vec<f64> = (0..n_nodes)
        .map(|i| if i == n_nodes - 1 { b } else { a + i as f64 * h })
        .collect();
    let mut weights = vec![h; n_nodes];
    weights[0] = 0.5 * h;
    weights[n_nodes - 1] = 0.5 * h;
    Ok(QuadratureRule {
        kind: RuleKind::Trapezoid { n_nodes, a, b },
        nodes,
        weights,
    })
}

impl QuadratureRule {
    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of integrand values given at the nodes.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len(), "integrand length");
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// The same weighted sum recorded as one linear node on the tape.
    pub fn integrate_on<'t>(&self, tape: &'t Tape, values: &[Var<'t>]) -> Var<'t> {
        let coeffs: Arc<[f64]> = self.weights.clone().into();
        tape.linear_combination(values, coeffs, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral(k: i32, a: f64, b: f64) -> f64 {
        (b.powi(k + 1) - a.powi(k + 1)) / f64::from(k + 1)
    }

    #[test]
    fn gauss_is_exact_to_degree_2p_minus_1() {
        for p in 1..=5usize {
            let rule = gauss_legendre(p, &[-1.0, 1.0]).unwrap();
            for k in 0..(2 * p as i32) {
                let got = rule.integrate_fn(|x| x.powi(k));
                let want = monomial_integral(k, -1.0, 1.0);
                assert!((got - want).abs() < 1e-14, "p={p} k={k}: {got} vs {want}");
            }
            // and not beyond
            let k = 2 * p as i32;
            let got = rule.integrate_fn(|x| x.powi(k));
            assert!((got - monomial_integral(k, -1.0, 1.0)).abs() > 1e-6);
        }
    }

    #[test]
    fn five_point_examples() {
        let rule = gauss_legendre(5, &[-1.0, 1.0]).unwrap();
        assert!(rule.integrate_fn(|x| x.powi(9)).abs() < 1e-15);
        assert!((rule.integrate_fn(|x| x * x) - 2.0 / 3.0).abs() < 1e-15);
        assert!((rule.weights().iter().sum::<f64>() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn composite_gauss_on_mesh() {
        let mesh: Vec<f64> = (0..=7).map(|i| -1.0 + 2.0 * i as f64 / 7.0).collect();
        let rule = gauss_legendre(5, &mesh).unwrap();
        assert_eq!(rule.len(), 35);
        assert!((rule.weights().iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(rule.weights().iter().all(|&w| w > 0.0));
        let got = rule.integrate_fn(|x| x.powi(9) + 3.0 * x.powi(4));
        assert!((got - 6.0 / 5.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_rejects_bad_input() {
        assert!(matches!(
            gauss_legendre(5, &[-1.0, 0.5, 0.0, 1.0]),
            Err(Error::UnsortedMesh)
        ));
        assert!(gauss_legendre(0, &[-1.0, 1.0]).is_err());
        assert!(gauss_legendre(6, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn trapezoid_examples() {
        let two = trapezoid(2, -1.0, 1.0).unwrap();
        assert_eq!(two.integrate_fn(|_| 1.0), 2.0);
        assert_eq!(two.weights(), &[1.0, 1.0]);

        let t4000 = trapezoid(4000, -1.0, 1.0).unwrap();
        let s = t4000.integrate_fn(|x| (std::f64::consts::PI * (x + 1.0) / 2.0).sin().powi(2));
        assert!((s - 1.0).abs() < 1e-6);
        assert_eq!(t4000.nodes()[0], -1.0);
        assert_eq!(t4000.nodes()[3999], 1.0);

        let t10k = trapezoid(10_000, -1.0, 1.0).unwrap();
        assert!((t10k.integrate_fn(|x| x * x) - 2.0 / 3.0).abs() < 1e-7);
        assert!((t10k.weights().iter().sum::<f64>() - 2.0).abs() < 1e-12);

        assert!(trapezoid(1, -1.0, 1.0).is_err());
    }

    #[test]
    fn integrate_basics() {
        let rule = trapezoid(101, -1.0, 1.0).unwrap();
        assert_eq!(rule.integrate(&vec![0.0; 101]), 0.0);
        assert!((rule.integrate(&vec![2.5; 101]) - 5.0).abs() < 1e-13);

        let mesh: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let gauss = gauss_legendre(5, &mesh).unwrap();
        let f = |x: f64| (2.0 * x).exp() * x.cos();
        let g = gauss.integrate_fn(f);
        let trap = trapezoid(2001, -1.0, 1.0).unwrap().integrate_fn(f);
        // Trapezoid error ~ h²/12 · max|f''| · (b - a).
        let h: f64 = 0.001;
        assert!((g - trap).abs() < h * h / 12.0 * 60.0 * 2.0);
    }

    #[test]
    fn tape_integration_matches_plain_sum() {
        let rule = gauss_legendre(3, &[-1.0, 0.0, 1.0]).unwrap();
        let tape = Tape::new();
        let vals: Vec<Var> = rule.nodes().iter().map(|&x| tape.var(x.sin())).collect();
        let plain = rule.integrate(&vals.iter().map(|v| v.value()).collect::<Vec<_>>());
        let on_tape = rule.integrate_on(&tape, &vals);
        assert_eq!(plain, on_tape.value());
        let g = on_tape.backward();
        for (v, w) in vals.iter().zip(rule.weights()) {
            assert_eq!(g.wrt(v), *w);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn integration_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 2usize..500) {
                let rule = trapezoid(n, -1.0, 1.0).unwrap();
                let f = |x: f64| x.sin() * a;
                let g = |x: f64| (x * b).cos();
                let sum = rule.integrate_fn(|x| f(x) + g(x));
                let parts = rule.integrate_fn(f) + rule.integrate_fn(g);
                prop_assert!((sum - parts).abs() < 1e-12 * (1.0 + sum.abs()));
            }
        }
    }
}
