//! Fully connected tanh network `u_θ : [-1, 1] → ℝ`.
//!
//! Hidden layers apply `tanh`, the output layer is affine. The spatial
//! derivative is propagated forward with dual numbers alongside the value.
//! Parameter gradients are obtained by a batched reverse sweep through that
//! dual forward pass (forward-over-reverse), which is what lets a loss that
//! contains `u_θ'` be differentiated with respect to θ.

use std::ops::{Add, Mul};

use ndarray::{Array1, Array2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

/// How the homogeneous Dirichlet condition is imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcMode {
    /// Network output multiplied by `(x + 1)(x - 1)`.
    Strong,
    /// Raw network output; boundary values are penalized in the loss.
    Constrained,
}

/// Value together with its derivative with respect to the spatial input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub dx: f64,
}

impl Dual {
    pub fn new(value: f64, dx: f64) -> Self {
        Self { value, dx }
    }

    /// The input coordinate itself, `dx/dx = 1`.
    pub fn variable(x: f64) -> Self {
        Self { value: x, dx: 1.0 }
    }

    pub fn constant(value: f64) -> Self {
        Self { value, dx: 0.0 }
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        Self {
            value: t,
            dx: (1.0 - t * t) * self.dx,
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.dx + rhs.dx)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.dx * rhs.value + self.value * rhs.dx,
        )
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual::new(self.value * rhs, self.dx * rhs)
    }
}

/// Trainable weights and biases. Layer `l` maps `architecture[l]` inputs to
/// `architecture[l + 1]` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_weights: Vec<Array2<f64>>,
    layer_biases: Vec<Array1<f64>>,
    architecture: Vec<usize>,
    seed: u64,
}

/// The architecture used for every benchmark: four hidden layers of 25.
pub const DEFAULT_ARCHITECTURE: [usize; 6] = [1, 25, 25, 25, 25, 1];

pub fn validate_architecture(architecture: &[usize]) -> Result<()> {
    if architecture.len() < 2 {
        return Err(Error::Config(format!(
            "architecture needs at least an input and an output width, got {architecture:?}"
        )));
    }
    if architecture.contains(&0) {
        return Err(Error::Config(format!(
            "architecture widths must be >= 1, got {architecture:?}"
        )));
    }
    if architecture[0] != 1 || architecture[architecture.len() - 1] != 1 {
        return Err(Error::Config(format!(
            "architecture must start and end with width 1, got {architecture:?}"
        )));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases.
pub fn mlp_init(architecture: &[usize], seed: u64) -> Result<MlpParams> {
    validate_architecture(architecture)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer_weights = Vec::with_capacity(architecture.len() - 1);
    let mut layer_biases = Vec::with_capacity(architecture.len() - 1);
    for pair in architecture.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        layer_weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
            dist.sample(&mut rng)
        }));
        layer_biases.push(Array1::zeros(fan_out));
    }
    Ok(MlpParams {
        layer_weights,
        layer_biases,
        architecture: architecture.to_vec(),
        seed,
    })
}

/// Network value and exact spatial derivative at `x`.
pub fn mlp_eval(params: &MlpParams, x: f64, bc: BcMode) -> (f64, f64) {
    let d = params.eval_dual(x, bc);
    (d.value, d.dx)
}

impl MlpParams {
    pub fn architecture(&self) -> &[usize] {
        &self.architecture
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_layers(&self) -> usize {
        self.layer_weights.len()
    }

    pub fn layer_weights(&self) -> &[Array2<f64>] {
        &self.layer_weights
    }

    pub fn layer_biases(&self) -> &[Array1<f64>] {
        &self.layer_biases
    }

    /// Parameter count `S`.
    pub fn len(&self) -> usize {
        self.layer_weights
            .iter()
            .zip(&self.layer_biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Layer by layer: weights in row-major order, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (w, b) in self.layer_weights.iter().zip(&self.layer_biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    /// Overwrites all parameters from a vector in [`flatten`](Self::flatten) order.
    pub fn assign_flat(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: theta.len(),
            });
        }
        let mut offset = 0;
        for (w, b) in self.layer_weights.iter_mut().zip(self.layer_biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            for (dst, src) in w.iter_mut().zip(&theta[offset..offset + nw]) {
                *dst = *src;
            }
            offset += nw;
            for (dst, src) in b.iter_mut().zip(&theta[offset..offset + nb]) {
                *dst = *src;
            }
            offset += nb;
        }
        Ok(())
    }

    pub fn unflatten(&self, theta: &[f64]) -> Result<MlpParams> {
        let mut out = self.clone();
        out.assign_flat(theta)?;
        Ok(out)
    }

    fn raw_dual(&self, x: f64) -> Dual {
        let mut act = vec![Dual::variable(x)];
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.layer_weights.iter().zip(&self.layer_biases).enumerate() {
            act = w
                .outer_iter()
                .zip(b.iter())
                .map(|(row, &bias)| {
                    let z = row
                        .iter()
                        .zip(&act)
                        .fold(Dual::constant(bias), |acc, (&wij, &a)| acc + a * wij);
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
        }
        act[0]
    }

    /// Scalar evaluation with forward-mode spatial derivative.
    pub fn eval_dual(&self, x: f64, bc: BcMode) -> Dual {
        let raw = self.raw_dual(x);
        match bc {
            BcMode::Constrained => raw,
            BcMode::Strong => raw * Dual::new((x + 1.0) * (x - 1.0), 2.0 * x),
        }
    }

    /// Batched values and derivatives at `xs`.
    pub fn eval_batch(&self, xs: &[f64], bc: BcMode) -> (Vec<f64>, Vec<f64>) {
        let cache = ForwardCache::new(self, xs, bc);
        (cache.u, cache.du)
    }
}

/// Intermediate quantities of a batched dual forward pass, kept for the
/// reverse sweep.
#[derive(Debug, Clone)]
struct ForwardCache {
    xs: Vec<f64>,
    bc: BcMode,
    /// Per layer input: activations and their x-derivatives (batch × width).
    inputs: Vec<(Array2<f64>, Array2<f64>)>,
    /// Per hidden layer: pre-activation x-derivative and post-activation value.
    hidden: Vec<(Array2<f64>, Array2<f64>)>,
    raw: Vec<f64>,
    raw_dx: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl ForwardCache {
    fn new(params: &MlpParams, xs: &[f64], bc: BcMode) -> Self {
        let n = xs.len();
        let mut a = Array2::from_shape_fn((n, 1), |(i, _)| xs[i]);
        let mut a_dx = Array2::from_elem((n, 1), 1.0);
        let last = params.num_layers() - 1;
        let mut inputs = Vec::with_capacity(params.num_layers());
        let mut hidden = Vec::with_capacity(last);
        for (l, (w, b)) in params
            .layer_weights
            .iter()
            .zip(&params.layer_biases)
            .enumerate()
        {
            let mut z = a.dot(&w.t());
            z += b;
            let z_dx = a_dx.dot(&w.t());
            inputs.push((a, a_dx));
            if l == last {
                a = z;
                a_dx = z_dx;
            } else {
                let act = z.mapv(f64::tanh);
                let mut act_dx = z_dx.clone();
                act_dx.zip_mut_with(&act, |d, &t| *d *= 1.0 - t * t);
                hidden.push((z_dx, act.clone()));
                a = act;
                a_dx = act_dx;
            }
        }
        let raw: Vec<f64> = a.column(0).to_vec();
        let raw_dx: Vec<f64> = a_dx.column(0).to_vec();
        let (u, du) = match bc {
            BcMode::Constrained => (raw.clone(), raw_dx.clone()),
            BcMode::Strong => xs
                .iter()
                .zip(raw.iter().zip(&raw_dx))
                .map(|(&x, (&r, &rd))| {
                    let m = (x + 1.0) * (x - 1.0);
                    (r * m, rd * m + r * 2.0 * x)
                })
                .unzip(),
        };
        Self {
            xs: xs.to_vec(),
            bc,
            inputs,
            hidden,
            raw,
            raw_dx,
            u,
            du,
        }
    }

    /// Accumulates `Σ_i (adj_u[i] ∂u_i/∂θ + adj_du[i] ∂u'_i/∂θ)` into `grad`
    /// (flattened parameter order).
    fn backward(&self, params: &MlpParams, adj_u: &[f64], adj_du: &[f64], grad: &mut [f64]) {
        let n = self.xs.len();
        let (mut g, mut g_dx) = match self.bc {
            BcMode::Constrained => (adj_u.to_vec(), adj_du.to_vec()),
            BcMode::Strong => {
                let mut g = Vec::with_capacity(n);
                let mut g_dx = Vec::with_capacity(n);
                for (i, &x) in self.xs.iter().enumerate() {
                    let m = (x + 1.0) * (x - 1.0);
                    g.push(adj_u[i] * m + adj_du[i] * 2.0 * x);
                    g_dx.push(adj_du[i] * m);
                }
                (g, g_dx)
            }
        };
        debug_assert_eq!(g.len(), self.raw.len());
        debug_assert_eq!(g_dx.len(), self.raw_dx.len());

        let offsets = layer_offsets(params);
        let last = params.num_layers() - 1;
        // Adjoints of the current layer's pre-activation and its x-derivative.
        let mut z_bar = Array2::from_shape_vec((n, 1), std::mem::take(&mut g)).expect("shape");
        let mut zdx_bar =
            Array2::from_shape_vec((n, 1), std::mem::take(&mut g_dx)).expect("shape");
        for l in (0..=last).rev() {
            let w = &params.layer_weights[l];
            let (a_in, a_in_dx) = &self.inputs[l];
            let mut w_bar = z_bar.t().dot(a_in);
            w_bar += &zdx_bar.t().dot(a_in_dx);
            let b_bar = z_bar.sum_axis(Axis(0));
            let off = offsets[l];
            for (dst, src) in grad[off..off + w.len()].iter_mut().zip(w_bar.iter()) {
                *dst += src;
            }
            let boff = off + w.len();
            for (dst, src) in grad[boff..boff + b_bar.len()].iter_mut().zip(b_bar.iter()) {
                *dst += src;
            }
            if l == 0 {
                break;
            }
            let a_bar = z_bar.dot(w);
            let adx_bar = zdx_bar.dot(w);
            // Input of layer l is tanh of the previous layer's pre-activation.
            let (z_dx_prev, act_prev) = &self.hidden[l - 1];
            let mut new_z_bar = a_bar;
            let mut new_zdx_bar = adx_bar.clone();
            ndarray::Zip::from(&mut new_z_bar)
                .and(&mut new_zdx_bar)
                .and(act_prev)
                .and(z_dx_prev)
                .and(&adx_bar)
                .for_each(|zb, zdb, &t, &zd, &adb| {
                    let s = 1.0 - t * t;
                    *zb = s * *zb - 2.0 * t * s * zd * adb;
                    *zdb = s * adb;
                });
            z_bar = new_z_bar;
            zdx_bar = new_zdx_bar;
        }
    }
}

fn layer_offsets(params: &MlpParams) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(params.num_layers());
    let mut acc = 0;
    for (w, b) in params.layer_weights.iter().zip(&params.layer_biases) {
        offsets.push(acc);
        acc += w.len() + b.len();
    }
    offsets
}

/// Network output at one point as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct NodeOutput<'t> {
    pub u: Var<'t>,
    pub du: Var<'t>,
}

/// Records network evaluations on a tape so that a downstream scalar can be
/// differentiated with respect to the parameters.
pub struct Probe<'t> {
    tape: &'t Tape,
    params: &'t MlpParams,
    bc: BcMode,
    batches: Vec<(ForwardCache, Vec<NodeOutput<'t>>)>,
}

impl<'t> Probe<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn bc(&self) -> BcMode {
        self.bc
    }

    /// Evaluates the network at every point of `xs`.
    pub fn eval(&mut self, xs: &[f64]) -> Vec<NodeOutput<'t>> {
        let cache = ForwardCache::new(self.params, xs, self.bc);
        let outputs: Vec<NodeOutput<'t>> = cache
            .u
            .iter()
            .zip(&cache.du)
            .map(|(&u, &du)| NodeOutput {
                u: self.tape.var(u),
                du: self.tape.var(du),
            })
            .collect();
        self.batches.push((cache, outputs.clone()));
        outputs
    }
}

/// Value of the scalar built by `f` and its gradient with respect to every
/// parameter, plus whatever auxiliary data `f` returns.
pub fn grad_with<T, F>(params: &MlpParams, bc: BcMode, f: F) -> Result<(f64, Vec<f64>, T)>
where
    F: for<'t> FnOnce(&mut Probe<'t>) -> Result<(Var<'t>, T)>,
{
    let tape = Tape::new();
    let mut probe = Probe {
        tape: &tape,
        params,
        bc,
        batches: Vec::new(),
    };
    let (output, extra) = f(&mut probe)?;
    let value = output.value();
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "scalar output".into(),
            index: None,
        });
    }
    let adjoints = output.backward();
    let mut grad = vec![0.0; params.len()];
    for (cache, outputs) in &probe.batches {
        let adj_u: Vec<f64> = outputs.iter().map(|o| adjoints.wrt(&o.u)).collect();
        let adj_du: Vec<f64> = outputs.iter().map(|o| adjoints.wrt(&o.du)).collect();
        if adj_u.iter().chain(&adj_du).all(|&a| a == 0.0) {
            continue;
        }
        cache.backward(params, &adj_u, &adj_du, &mut grad);
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: "parameter gradient".into(),
            index: Some(index),
        });
    }
    Ok((value, grad, extra))
}

/// `∂ scalar / ∂θ` for a scalar assembled from network evaluations.
pub fn grad_scalar<F>(params: &MlpParams, bc: BcMode, f: F) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> FnOnce(&mut Probe<'t>) -> Var<'t>,
{
    let (value, grad, ()) = grad_with(params, bc, |probe| Ok((f(probe), ())))?;
    Ok((value, grad))
}
