//! Second-order factorization machine over binary inputs.
//!
//! Parameters live in one flat vector with the layout
//!
//! ```text
//! [ w0 | w_0 .. w_{N-1} | v_{0,0} .. v_{0,K-1} | v_{1,0} .. | v_{N-1,K-1} ]
//! ```
//!
//! i.e. the bias, the linear weights, then the factor matrix `V` row-major.
//! Gradients use the same layout, and so do serialized snapshots.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::encoding::{DiscretizationGrid, OneHotVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmParams {
    n: usize,
    k: usize,
    theta: Vec<f64>,
}

impl FmParams {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self { n, k, theta: vec![0.0; 1 + n + n * k] }
    }

    /// Builds parameters from parts; `v` is row-major `N x K`.
    pub fn from_parts(omega0: f64, omega: Vec<f64>, v: Vec<f64>, k: usize) -> Result<Self> {
        let n = omega.len();
        if k == 0 || v.len() != n * k {
            return Err(Error::LengthMismatch { expected: n * k, actual: v.len() });
        }
        let mut theta = Vec::with_capacity(1 + n + n * k);
        theta.push(omega0);
        theta.extend(omega);
        theta.extend(v);
        if let Some(bad) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!("FM parameter at flat index {bad}")));
        }
        Ok(Self { n, k, theta })
    }

    pub fn n_bits(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn omega0(&self) -> f64 {
        self.theta[0]
    }

    pub fn omega(&self) -> &[f64] {
        &self.theta[1..1 + self.n]
    }

    /// Row-major factor matrix.
    pub fn v(&self) -> &[f64] {
        &self.theta[1 + self.n..]
    }

    pub fn v_row(&self, i: usize) -> &[f64] {
        let start = 1 + self.n + i * self.k;
        &self.theta[start..start + self.k]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Flat index of the first factor entry.
    pub fn v_offset(&self) -> usize {
        1 + self.n
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: len });
        }
        Ok(())
    }

    /// `sum_i v_{i,k} x_i` for each factor column.
    fn factor_sums(&self, active: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; self.k];
        for &i in active {
            for (s, v) in sums.iter_mut().zip(self.v_row(i)) {
                *s += v;
            }
        }
        sums
    }

    fn predict_active(&self, active: &[usize]) -> f64 {
        let sums = self.factor_sums(active);
        let omega = self.omega();
        let linear: f64 = active.iter().map(|&i| omega[i]).sum();
        let mut squares = vec![0.0; self.k];
        for &i in active {
            for (s, v) in squares.iter_mut().zip(self.v_row(i)) {
                *s += v * v;
            }
        }
        let pairwise: f64 =
            sums.iter().zip(&squares).map(|(s, sq)| s * s - sq).sum::<f64>() * 0.5;
        self.omega0() + linear + pairwise
    }

    /// Adds `weight * df/dtheta` at `x` into `grad`.
    fn accumulate_gradient(&self, active: &[usize], weight: f64, grad: &mut [f64]) {
        let sums = self.factor_sums(active);
        grad[0] += weight;
        let v_off = self.v_offset();
        for &i in active {
            grad[1 + i] += weight;
            let row = self.v_row(i);
            let g = &mut grad[v_off + i * self.k..v_off + (i + 1) * self.k];
            for l in 0..self.k {
                g[l] += weight * (sums[l] - row[l]);
            }
        }
    }
}

fn active_bits(x: &[u8]) -> Vec<usize> {
    debug_assert!(x.iter().all(|&b| b <= 1), "non-binary input");
    x.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect()
}

/// Xavier-uniform bound for the linear weights, with `fan_in = N`, `fan_out = 1`.
pub fn xavier_bound(n: usize) -> f64 {
    (6.0 / (n as f64 + 1.0)).sqrt()
}

/// Fresh parameters: `w0 = 0`, `w ~ U[-a, a]` (Xavier), `V ~ N(0, 1)`.
///
/// Draw order is `w` first, then `V` row-major.
pub fn init_params<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> FmParams {
    let mut params = FmParams::zeros(n, k);
    let a = xavier_bound(n);
    let linear = Uniform::new_inclusive(-a, a).expect("finite bound");
    for w in &mut params.theta[1..1 + n] {
        *w = linear.sample(rng);
    }
    for v in &mut params.theta[1 + n..] {
        *v = StandardNormal.sample(rng);
    }
    params
}

/// FM output, evaluated with the O(KN) factor-sum identity.
pub fn predict(params: &FmParams, x: &[u8]) -> Result<f64> {
    params.check_len(x.len())?;
    Ok(params.predict_active(&active_bits(x)))
}

/// `residual_weight * df/dtheta` at `x`, in the flat parameter layout.
pub fn gradient(params: &FmParams, x: &[u8], residual_weight: f64) -> Result<FmParams> {
    params.check_len(x.len())?;
    let mut grad = FmParams::zeros(params.n, params.k);
    params.accumulate_gradient(&active_bits(x), residual_weight, &mut grad.theta);
    Ok(grad)
}

/// Accumulated training data: one-hot inputs and minimization-signed targets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<OneHotVector>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(inputs: Vec<OneHotVector>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch { expected: inputs.len(), actual: targets.len() });
        }
        Ok(Self { inputs, targets })
    }

    pub fn push(&mut self, x: OneHotVector, target: f64) {
        self.inputs.push(x);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[OneHotVector] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn max_abs_target(&self) -> f64 {
        self.targets.iter().fold(0.0, |m, t| m.max(t.abs()))
    }
}

/// Mean squared error of the FM over the dataset.
pub fn loss(params: &FmParams, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        let r = predict(params, x.bits())? - y;
        total += r * r;
    }
    Ok(total / data.len() as f64)
}

/// Gradient of [`loss`]: `(2/D) sum_d (f(x_d) - y_d) df/dtheta`.
pub fn loss_gradient(params: &FmParams, data: &Dataset) -> Result<FmParams> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut grad = FmParams::zeros(params.n, params.k);
    batch_gradient(params, data, &(0..data.len()).collect::<Vec<_>>(), &mut grad.theta)?;
    Ok(grad)
}

fn batch_gradient(params: &FmParams, data: &Dataset, batch: &[usize], grad: &mut [f64]) -> Result<()> {
    let scale = 2.0 / batch.len() as f64;
    for &d in batch {
        let x = data.inputs[d].bits();
        params.check_len(x.len())?;
        let active = active_bits(x);
        let residual = params.predict_active(&active) - data.targets[d];
        params.accumulate_gradient(&active, scale * residual, grad);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Apply weight decay to the bias `w0` as well. Off by default.
    pub decay_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            batch_size: 8,
            epochs: 500,
            decay_bias: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("train: {msg}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return bad("beta1 must lie in (0, 1)");
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta2 must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        Ok(())
    }

    /// Per-step multiplicative decay `1 - lr * weight_decay`.
    pub fn decay_factor(&self) -> f64 {
        1.0 - self.learning_rate * self.weight_decay
    }
}

/// AdamW with decoupled weight decay over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: TrainConfig,
    first_decayed: usize,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    /// Entries before `first_decayed` are exempt from weight decay.
    pub fn new(config: TrainConfig, len: usize, first_decayed: usize) -> Self {
        Self { config, first_decayed, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(theta.len(), self.m.len());
        self.t += 1;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(self.t);
        let bias2 = 1.0 - c.beta2.powi(self.t);
        let decay = c.decay_factor();
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            let keep = if i >= self.first_decayed { decay } else { 1.0 };
            // theta - lr*lambda*theta - lr*m_hat/(sqrt(v_hat)+eps), with the decay folded
            // into one multiply so a zero-gradient entry is exactly theta*(1-lr*lambda).
            theta[i] = theta[i] * keep - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
}

/// Trains `params` in place; returns the number of optimizer steps taken.
pub fn fit<R: Rng + ?Sized>(
    params: &mut FmParams,
    data: &Dataset,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<usize> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let first_decayed = if config.decay_bias { 0 } else { 1 };
    let mut opt = AdamW::new(*config, params.theta.len(), first_decayed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; params.theta.len()];
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            batch_gradient(params, data, batch, &mut grad)?;
            opt.step(&mut params.theta, &grad);
        }
    }
    Ok(opt.steps() as usize)
}

/// Initializes fresh parameters from `rng` and trains them on `data`.
pub fn train<R: Rng + ?Sized>(
    data: &Dataset,
    config: &TrainConfig,
    grid: &DiscretizationGrid,
    rank: usize,
    rng: &mut R,
) -> Result<FmParams> {
    config.validate()?;
    if rank == 0 {
        return Err(Error::InvalidConfig("factor rank K must be positive".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut params = init_params(grid.n_bits(), rank, rng);
    fit(&mut params, data, config, rng)?;
    Ok(params)
}
