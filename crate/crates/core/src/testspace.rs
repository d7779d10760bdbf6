//! Discrete test spaces, their Gram matrices in the energy inner product
//! `(v, w)_V = ε (v', w')`, and the Riesz solve `G η = R`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, trapezoid, QuadratureRule};
use crate::tape::{Tape, Var};

/// Gauss points per element used with finite-element test functions.
pub const FE_GAUSS_POINTS: usize = 5;
/// Trapezoid nodes used with spectral test functions.
pub const SPECTRAL_TRAPEZOID_NODES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisFamily {
    /// Interior hat functions on `M + 1` uniform cells.
    FiniteElement,
    /// `φ_m = 2 sin(mπ(x + 1)/2) / (√ε π m)`, orthonormal in `(·, ·)_V`.
    Spectral { epsilon: f64 },
}

/// Which member of the family sits at a given position, and its scale.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Member {
    index: usize,
    scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSpace {
    family: BasisFamily,
    members: Vec<Member>,
}

impl TestSpace {
    pub fn finite_element(dimension: usize) -> Result<Self> {
        Self::new(BasisFamily::FiniteElement, dimension)
    }

    pub fn spectral(dimension: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Self::new(BasisFamily::Spectral { epsilon }, dimension)
    }

    fn new(family: BasisFamily, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("test space dimension must be >= 1".into()));
        }
        Ok(Self {
            family,
            members: (1..=dimension)
                .map(|index| Member { index, scale: 1.0 })
                .collect(),
        })
    }

    /// Same space with basis function `m` (1-based) multiplied by `factor`.
    pub fn with_scaled_basis(&self, m: usize, factor: f64) -> Result<Self> {
        self.check_index(m)?;
        if factor == 0.0 || !factor.is_finite() {
            return Err(Error::Config(format!("basis scale must be non-zero, got {factor}")));
        }
        let mut out = self.clone();
        out.members[m - 1].scale *= factor;
        Ok(out)
    }

    /// Same space with the basis reordered: position `k` holds the former
    /// basis function `order[k]` (1-based).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.dimension()];
        for &m in order {
            self.check_index(m)?;
            if std::mem::replace(&mut seen[m - 1], true) {
                return Err(Error::Config(format!("index {m} repeated in permutation")));
            }
        }
        if order.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: order.len(),
            });
        }
        Ok(Self {
            family: self.family,
            members: order.iter().map(|&m| self.members[m - 1]).collect(),
        })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.members.len()
    }

    pub fn is_orthonormal(&self) -> bool {
        matches!(self.family, BasisFamily::Spectral { .. })
            && self.members.iter().all(|m| m.scale == 1.0)
    }

    /// Mesh spacing of the finite-element family.
    pub fn mesh_size(&self) -> Option<f64> {
        match self.family {
            BasisFamily::FiniteElement => Some(2.0 / (self.dimension() + 1) as f64),
            BasisFamily::Spectral { .. } => None,
        }
    }

    /// Mesh nodes `x_i = -1 + i h`, `i = 0..=M+1` (finite elements only).
    pub fn mesh(&self) -> Option<Vec<f64>> {
        let h = self.mesh_size()?;
        let cells = self.dimension() + 1;
        Some(
            (0..=cells)
                .map(|i| if i == cells { 1.0 } else { -1.0 + i as f64 * h })
                .collect(),
        )
    }

    /// Gauss on the mesh for hats, trapezoid over the domain for sines.
    pub fn default_quadrature(&self) -> Result<QuadratureRule> {
        match self.family {
            BasisFamily::FiniteElement => {
                gauss_legendre(FE_GAUSS_POINTS, &self.mesh().expect("fe mesh"))
            }
            BasisFamily::Spectral { .. } => trapezoid(SPECTRAL_TRAPEZOID_NODES, -1.0, 1.0),
        }
    }

    fn check_index(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.dimension() {
            return Err(Error::IndexOutOfRange {
                index: m,
                dimension: self.dimension(),
            });
        }
        Ok(())
    }

    fn family_eval(&self, index: usize, x: f64) -> (f64, f64) {
        match self.family {
            BasisFamily::FiniteElement => {
                let n = self.members.len();
                let h = 2.0 / (n + 1) as f64;
                let center = -1.0 + index as f64 * h;
                let (left, right) = (center - h, center + h);
                if x < left || x >= right {
                    (0.0, 0.0)
                } else if x < center {
                    ((x - left) / h, 1.0 / h)
                } else {
                    ((right - x) / h, -1.0 / h)
                }
            }
            BasisFamily::Spectral { epsilon } => {
                let k = index as f64 * PI / 2.0;
                let arg = k * (x + 1.0);
                let value = if x <= -1.0 || x >= 1.0 {
                    0.0
                } else {
                    2.0 * arg.sin() / (epsilon.sqrt() * PI * index as f64)
                };
                (value, arg.cos() / epsilon.sqrt())
            }
        }
    }

    /// Value and derivative of basis function `m` (1-based) at `x`.
    pub fn basis_eval(&self, m: usize, x: f64) -> Result<(f64, f64)> {
        self.check_index(m)?;
        let member = self.members[m - 1];
        let (v, d) = self.family_eval(member.index, x);
        Ok((member.scale * v, member.scale * d))
    }

    /// Closed-form `ε ∫ φ_i' φ_j'` of the underlying (unscaled) family.
    fn family_inner(&self, i: usize, j: usize, epsilon: f64) -> f64 {
        match self.family {
            BasisFamily::FiniteElement => {
                let h = self.mesh_size().expect("fe");
                match i.abs_diff(j) {
                    0 => 2.0 * epsilon / h,
                    1 => -epsilon / h,
                    _ => 0.0,
                }
            }
            BasisFamily::Spectral { .. } => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `G_nm = ε ∫ φ_m' φ_n'`. Hats use the exact element integrals; the
/// orthonormal sine basis returns the identity without integrating.
pub fn gram_assemble(space: &TestSpace, epsilon: f64) -> Array2<f64> {
    let n = space.dimension();
    if space.is_orthonormal() {
        return Array2::eye(n);
    }
    Array2::from_shape_fn((n, n), |(r, c)| {
        let (a, b) = (space.members[r], space.members[c]);
        a.scale * b.scale * space.family_inner(a.index, b.index, epsilon)
    })
}

/// Gram matrix by numerical integration of `ε φ_m' φ_n'` with `quad`.
pub fn gram_by_quadrature(space: &TestSpace, epsilon: f64, quad: &QuadratureRule) -> Array2<f64> {
    let n = space.dimension();
    let derivs: Vec<Vec<f64>> = (1..=n)
        .map(|m| {
            quad.nodes()
                .iter()
                .map(|&x| space.basis_eval(m, x).expect("index in range").1)
                .collect()
        })
        .collect();
    let mut g = Array2::zeros((n, n));
    for r in 0..n {
        for c in r..n {
            let v: f64 = quad
                .weights()
                .iter()
                .zip(derivs[r].iter().zip(&derivs[c]))
                .map(|(w, (a, b))| w * a * b)
                .sum::<f64>()
                * epsilon;
            g[(r, c)] = v;
            g[(c, r)] = v;
        }
    }
    g
}

/// Cholesky factorization `G = L Lᵀ` of a Gram matrix.
#[derive(Debug, Clone)]
pub struct GramFactorization {
    gram: Array2<f64>,
    chol: Array2<f64>,
}

pub fn gram_factorize(gram: &Array2<f64>) -> Result<GramFactorization> {
    let n = gram.nrows();
    if gram.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: gram.ncols(),
        });
    }
    let scale = gram.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for r in 0..n {
        for c in 0..r {
            if (gram[(r, c)] - gram[(c, r)]).abs() > 1e-12 * scale {
                return Err(Error::Config(format!(
                    "gram matrix is not symmetric at ({r}, {c})"
                )));
            }
        }
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = gram[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotSpd { row: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = gram[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(GramFactorization {
        gram: gram.clone(),
        chol: l,
    })
}

impl GramFactorization {
    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn chol(&self) -> &Array2<f64> {
        &self.chol
    }

    pub fn dimension(&self) -> usize {
        self.gram.nrows()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: len,
            });
        }
        Ok(())
    }

    /// Solves `G η = R` by forward and back substitution.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs.len())?;
        let n = self.dimension();
        let l = &self.chol;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= l[(i, j)] * y[j];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= l[(j, i)] * y[j];
            }
            y[i] = s / l[(i, i)];
        }
        Ok(y)
    }

    /// The same solve recorded on a tape; `η` is linear in `R` with constant
    /// coefficients, so each entry becomes one linear-combination node.
    pub fn solve_on<'t>(&self, tape: &'t Tape, rhs: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        self.check_len(rhs.len())?;
        let n = self.dimension();
        let l = &self.chol;
        let mut y: Vec<Var<'t>> = Vec::with_capacity(n);
        for i in 0..n {
            let d = l[(i, i)];
            let mut args = vec![rhs[i]];
            let mut coeffs = vec![1.0 / d];
            for j in 0..i {
                if l[(i, j)] != 0.0 {
                    args.push(y[j]);
                    coeffs.push(-l[(i, j)] / d);
                }
            }
            y.push(tape.linear_combination(&args, Arc::from(coeffs), 0.0));
        }
        let mut eta: Vec<Option<Var<'t>>> = vec![None; n];
        for i in (0..n).rev() {
            let d = l[(i, i)];
            let mut args = vec![y[i]];
            let mut coeffs = vec![1.0 / d];
            for j in (i + 1)..n {
                if l[(j, i)] != 0.0 {
                    args.push(eta[j].expect("solved"));
                    coeffs.push(-l[(j, i)] / d);
                }
            }
            eta[i] = Some(tape.linear_combination(&args, Arc::from(coeffs), 0.0));
        }
        Ok(eta.into_iter().map(|v| v.expect("solved")).collect())
    }
}

/// `η` with `G η = R`.
pub fn riesz_solve(fact: &GramFactorization, rhs: &[f64]) -> Result<Vec<f64>> {
    fact.solve(rhs)
}

/// `G · v` for a dense matrix.
pub fn mat_vec(g: &Array2<f64>, v: &[f64]) -> Vec<f64> {
    g.dot(&Array1::from(v.to_vec())).to_vec()
}
