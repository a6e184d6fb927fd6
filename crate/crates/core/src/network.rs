//! The deep discriminative model.
//!
//! A stack of RBMs is trained greedily, layer by layer, with CD-1; its
//! weights seed a logistic feedforward classifier (`1024-256-64-16-1` in
//! production) that is then trained with momentum SGD on a squared error
//! loss with weight decay and a KL sparsity penalty on hidden activations.
//!
//! Gradient convention: the output error is `(L̂ − L)·L̂·(1 − L̂)` with no
//! factor 2, so [`backward`] returns the exact gradient of
//! [`LossTerms::objective`], which weights the squared error by ½. The
//! reported [`LossTerms::total`] keeps the unhalved squared error.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::imagery::{PatchVector, PATCH_DIM};
use crate::linalg::Matrix;

/// Production layer sizes, input first.
pub const ARCHITECTURE: [usize; 5] = [PATCH_DIM, 256, 64, 16, 1];

/// Half-width of the uniform weight initialization.
pub const INIT_RANGE: f64 = 0.01;

const RHO_CLAMP: f64 = 1e-8;

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `KL(ρ‖ρ̂)` between Bernoulli means, with `ρ̂` clamped away from 0 and 1.
pub fn kl_bernoulli(rho: f64, rho_hat: f64) -> f64 {
    let q = rho_hat.clamp(RHO_CLAMP, 1.0 - RHO_CLAMP);
    let mut kl = 0.0;
    if rho > 0.0 {
        kl += rho * libm::log(rho / q);
    }
    if rho < 1.0 {
        kl += (1.0 - rho) * libm::log((1.0 - rho) / (1.0 - q));
    }
    kl
}

fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, half_width: f64, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-half_width..half_width))
}

fn add_row_and_squash(m: &mut Matrix, bias: &[f64]) {
    for r in 0..m.rows() {
        for (v, b) in m.row_mut(r).iter_mut().zip(bias) {
            *v = logistic(*v + b);
        }
    }
}

// ---------------------------------------------------------------------------
// RBM

#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    /// `n_visible × n_hidden`
    pub weights: Matrix,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

/// Momentum buffers for [`RbmParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct RbmVelocity {
    weights: Matrix,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

impl RbmVelocity {
    pub fn zeros(rbm: &RbmParams) -> Self {
        Self {
            weights: Matrix::zeros(rbm.n_visible(), rbm.n_hidden()),
            visible_bias: vec![0.0; rbm.n_visible()],
            hidden_bias: vec![0.0; rbm.n_hidden()],
        }
    }
}

/// Settings shared by CD-1 steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbmStepConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Weight decay coefficient, scaled by the learning rate like the
    /// supervised update.
    pub weight_decay: f64,
}

impl RbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            weights: Matrix::zeros(n_visible, n_hidden),
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    /// Weights uniform in `(−0.01, 0.01)`, biases zero.
    pub fn random<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, rng: &mut R) -> Self {
        Self {
            weights: uniform_matrix(n_visible, n_hidden, INIT_RANGE, rng),
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn n_visible(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.cols()
    }

    /// `logistic(v·W + c)` for every row of `visible`.
    pub fn hidden_probs(&self, visible: &Matrix) -> Result<Matrix> {
        let mut h = visible.matmul(&self.weights)?;
        add_row_and_squash(&mut h, &self.hidden_bias);
        Ok(h)
    }

    /// `logistic(h·Wᵀ + b)` for every row of `hidden`.
    pub fn visible_probs(&self, hidden: &Matrix) -> Result<Matrix> {
        let mut v = hidden.matmul_t(&self.weights)?;
        add_row_and_squash(&mut v, &self.visible_bias);
        Ok(v)
    }

    /// Mean squared error of a deterministic up-down pass.
    pub fn reconstruction_error(&self, visible: &Matrix) -> Result<f64> {
        let recon = self.visible_probs(&self.hidden_probs(visible)?)?;
        let n = visible.as_slice().len().max(1) as f64;
        Ok(visible
            .as_slice()
            .iter()
            .zip(recon.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }

    /// One contrastive-divergence step on `batch`; returns the mean squared
    /// reconstruction error of the step.
    ///
    /// Hidden states are sampled from the data-driven probabilities and
    /// drive a probability-valued reconstruction; both phases accumulate
    /// statistics with hidden probabilities. The update follows the same
    /// momentum scheme as [`sgd_step`], ascending the likelihood.
    pub fn cd1_step<R: Rng + ?Sized>(
        &mut self,
        velocity: &mut RbmVelocity,
        batch: &Matrix,
        cfg: &RbmStepConfig,
        rng: &mut R,
    ) -> Result<f64> {
        if batch.rows() == 0 {
            return Err(Error::Empty("rbm batch"));
        }
        if batch.cols() != self.n_visible() {
            return Err(Error::DimensionMismatch {
                expected: self.n_visible(),
                actual: batch.cols(),
            });
        }
        let k = batch.rows() as f64;
        let h0 = self.hidden_probs(batch)?;
        let mut h0_sample = h0.clone();
        for p in h0_sample.as_mut_slice() {
            *p = if rng.random::<f64>() < *p { 1.0 } else { 0.0 };
        }
        let v1 = self.visible_probs(&h0_sample)?;
        let h1 = self.hidden_probs(&v1)?;

        let positive = batch.t_matmul(&h0)?;
        let negative = v1.t_matmul(&h1)?;

        let eps = cfg.learning_rate;
        for (((dw, w), p), n) in velocity
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(self.weights.as_mut_slice())
            .zip(positive.as_slice())
            .zip(negative.as_slice())
        {
            *dw = cfg.momentum * *dw - cfg.weight_decay * eps * *w + eps * (p - n) / k;
            *w += *dw;
        }
        for (j, (dv, b)) in velocity
            .visible_bias
            .iter_mut()
            .zip(self.visible_bias.iter_mut())
            .enumerate()
        {
            let g: f64 = (0..batch.rows()).map(|r| batch.get(r, j) - v1.get(r, j)).sum();
            *dv = cfg.momentum * *dv + eps * g / k;
            *b += *dv;
        }
        for (j, (dh, c)) in velocity
            .hidden_bias
            .iter_mut()
            .zip(self.hidden_bias.iter_mut())
            .enumerate()
        {
            let g: f64 = (0..batch.rows()).map(|r| h0.get(r, j) - h1.get(r, j)).sum();
            *dh = cfg.momentum * *dh + eps * g / k;
            *c += *dh;
        }

        let err = batch
            .as_slice()
            .iter()
            .zip(v1.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / batch.as_slice().len() as f64;
        Ok(err)
    }
}

/// `logistic(visible·W + hidden_bias)`
pub fn rbm_hidden_probs(rbm: &RbmParams, visible: &Matrix) -> Result<Matrix> {
    rbm.hidden_probs(visible)
}

fn gather_rows(data: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), data.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(data.row(i));
    }
    out
}

/// Trains `rbm` with CD-1 for `epochs` passes over `data` in shuffled
/// mini-batches. Returns the mean reconstruction error of each epoch.
pub fn train_rbm<R: Rng + ?Sized>(
    rbm: &mut RbmParams,
    data: &Matrix,
    epochs: usize,
    batch_size: usize,
    cfg: &RbmStepConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if data.rows() == 0 {
        return Err(Error::Empty("rbm training data"));
    }
    let batch_size = batch_size.max(1);
    let mut velocity = RbmVelocity::zeros(rbm);
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let batch = gather_rows(data, chunk);
            total += rbm.cd1_step(&mut velocity, &batch, cfg, rng)?;
            batches += 1;
        }
        history.push(total / batches as f64);
    }
    Ok(history)
}

/// Settings for greedy layer-wise pretraining.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub epochs_per_layer: usize,
    pub batch_size: usize,
    pub step: RbmStepConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs_per_layer: 10,
            batch_size: 100,
            step: RbmStepConfig {
                learning_rate: 0.002,
                momentum: 0.9,
                weight_decay: 0.002,
            },
        }
    }
}

/// Greedy layer-wise pretraining of every hidden layer of `architecture`.
///
/// Layer `m` is an RBM trained on the hidden probabilities of layer `m−1`
/// (the raw data for `m = 1`). The output layer is not pretrained; its
/// weights are drawn uniform in `(−0.01, 0.01)`.
pub fn pretrain_stack<R: Rng + ?Sized>(
    data: &Matrix,
    architecture: &[usize],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<NetworkParams> {
    pretrain_stack_observed(data, architecture, cfg, rng, |_, _| {})
}

/// [`pretrain_stack`] that also reports each RBM's training input as
/// `(layer_index, inputs)` before that layer trains.
pub fn pretrain_stack_observed<R: Rng + ?Sized>(
    data: &Matrix,
    architecture: &[usize],
    cfg: &PretrainConfig,
    rng: &mut R,
    mut observe: impl FnMut(usize, &Matrix),
) -> Result<NetworkParams> {
    if data.rows() == 0 {
        return Err(Error::Empty("pretraining data"));
    }
    if architecture.len() < 2 {
        return Err(Error::InvalidConfig("architecture needs at least two layers"));
    }
    if data.cols() != architecture[0] {
        return Err(Error::DimensionMismatch {
            expected: architecture[0],
            actual: data.cols(),
        });
    }
    let hidden_layers = architecture.len() - 2;
    let mut layers = Vec::with_capacity(architecture.len() - 1);
    let mut inputs = data.clone();
    for m in 0..hidden_layers {
        let mut rbm = RbmParams::random(architecture[m], architecture[m + 1], rng);
        observe(m, &inputs);
        train_rbm(&mut rbm, &inputs, cfg.epochs_per_layer, cfg.batch_size, &cfg.step, rng)?;
        if m + 1 < hidden_layers {
            inputs = rbm.hidden_probs(&inputs)?;
        }
        layers.push(Layer {
            weights: rbm.weights,
            bias: rbm.hidden_bias,
        });
    }
    let n_in = architecture[architecture.len() - 2];
    let n_out = architecture[architecture.len() - 1];
    layers.push(Layer {
        weights: uniform_matrix(n_in, n_out, INIT_RANGE, rng),
        bias: vec![0.0; n_out],
    });
    NetworkParams::new(layers)
}

// ---------------------------------------------------------------------------
// Feedforward classifier

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `n_in × n_out`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Weights and biases of the logistic feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

impl NetworkParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for l in &layers {
            if l.bias.len() != l.weights.cols() {
                return Err(Error::DimensionMismatch {
                    expected: l.weights.cols(),
                    actual: l.bias.len(),
                });
            }
        }
        for w in layers.windows(2) {
            if w[0].weights.cols() != w[1].weights.rows() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].weights.cols(),
                    actual: w[1].weights.rows(),
                });
            }
        }
        let finite = layers
            .iter()
            .all(|l| l.weights.as_slice().iter().chain(&l.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Numeric("non-finite network parameter"));
        }
        Ok(Self { layers })
    }

    pub fn zeros(architecture: &[usize]) -> Result<Self> {
        Self::new(
            architecture
                .windows(2)
                .map(|w| Layer {
                    weights: Matrix::zeros(w[0], w[1]),
                    bias: vec![0.0; w[1]],
                })
                .collect(),
        )
    }

    /// Weights uniform in `(−half_width, half_width)`, biases zero.
    pub fn random<R: Rng + ?Sized>(architecture: &[usize], half_width: f64, rng: &mut R) -> Result<Self> {
        Self::new(
            architecture
                .windows(2)
                .map(|w| Layer {
                    weights: uniform_matrix(w[0], w[1], half_width, rng),
                    bias: vec![0.0; w[1]],
                })
                .collect(),
        )
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn architecture(&self) -> Vec<usize> {
        let mut arch = vec![self.layers[0].weights.rows()];
        arch.extend(self.layers.iter().map(|l| l.weights.cols()));
        arch
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.as_slice().iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Final-layer output for every row of `inputs`.
    pub fn predict(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        let mut h = self.propagate(inputs, 0)?;
        for m in 1..self.layers.len() {
            h = self.propagate(&h, m)?;
        }
        Ok(h.column(0))
    }

    fn propagate(&self, inputs: &Matrix, m: usize) -> Result<Matrix> {
        let layer = &self.layers[m];
        let mut out = matmul(inputs, &layer.weights)?;
        add_row_and_squash(&mut out, &layer.bias);
        Ok(out)
    }
}

#[cfg(feature = "parallel")]
fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    use rayon::prelude::*;
    const ROWS_PER_TASK: usize = 16;
    if a.rows() <= ROWS_PER_TASK {
        return a.matmul(b);
    }
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: b.rows(),
        });
    }
    let parts: Vec<Matrix> = (0..a.rows())
        .collect::<Vec<_>>()
        .par_chunks(ROWS_PER_TASK)
        .map(|rows| {
            let slab = gather_rows(a, rows);
            slab.matmul(b)
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(a.rows() * b.cols());
    for p in parts {
        data.extend(p.into_vec());
    }
    Matrix::from_vec(a.rows(), b.cols(), data)
}

#[cfg(not(feature = "parallel"))]
#[inline]
fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

/// A labeled mini-batch: one input per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub inputs: Matrix,
    pub labels: Vec<f64>,
}

impl TrainBatch {
    pub fn new(inputs: Matrix, labels: Vec<f64>) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::Empty("training batch"));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                actual: labels.len(),
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_patches(patches: &[PatchVector], labels: Vec<f64>) -> Result<Self> {
        Self::new(Matrix::from_rows(patches)?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> TrainBatch {
        TrainBatch {
            inputs: gather_rows(&self.inputs, idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Activations of every layer for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `activations[0]` is the input, `activations[m]` the output of layer `m`.
    pub activations: Vec<Matrix>,
    /// Batch mean of every unit of layers `1..=L`; index `m − 1` for layer `m`.
    pub mean_activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn predictions(&self) -> Vec<f64> {
        self.activations[self.activations.len() - 1].column(0)
    }

    pub fn batch_len(&self) -> usize {
        self.activations[0].rows()
    }
}

pub fn forward(params: &NetworkParams, inputs: &Matrix) -> Result<ForwardTrace> {
    if inputs.cols() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            actual: inputs.cols(),
        });
    }
    let mut activations = Vec::with_capacity(params.layers.len() + 1);
    activations.push(inputs.clone());
    for m in 0..params.layers.len() {
        let next = params.propagate(&activations[m], m)?;
        activations.push(next);
    }
    let k = inputs.rows().max(1) as f64;
    let mean_activations = activations[1..]
        .iter()
        .map(|a| {
            let mut mean = vec![0.0; a.cols()];
            for r in 0..a.rows() {
                for (acc, v) in mean.iter_mut().zip(a.row(r)) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= k);
            mean
        })
        .collect();
    Ok(ForwardTrace {
        activations,
        mean_activations,
    })
}

/// Weights of the three penalty terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight decay `γ`.
    pub gamma: f64,
    /// Sparsity weight `η`.
    pub eta: f64,
    /// Target mean activation `ρ`.
    pub rho: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            eta: 1e-3,
            rho: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    /// `Σ_k (f(s_k) − l_k)²`
    pub euclidean: f64,
    /// `γ·Σ_m ‖W^m‖²_F`
    pub decay: f64,
    /// `η·Σ_m Σ_i KL(ρ‖ρ̂^m_i)` over hidden layers.
    pub sparsity: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.euclidean + self.decay + self.sparsity
    }

    /// The function [`backward`] differentiates: squared error halved.
    pub fn objective(&self) -> f64 {
        0.5 * self.euclidean + self.decay + self.sparsity
    }
}

pub fn loss_from_trace(params: &NetworkParams, trace: &ForwardTrace, labels: &[f64], w: &LossWeights) -> LossTerms {
    let euclidean = trace
        .predictions()
        .iter()
        .zip(labels)
        .map(|(f, l)| (f - l) * (f - l))
        .sum();
    let decay = w.gamma
        * params
            .layers
            .iter()
            .map(|l| l.weights.frobenius_sq())
            .sum::<f64>();
    let hidden = params.layers.len() - 1;
    let sparsity = w.eta
        * trace.mean_activations[..hidden]
            .iter()
            .flatten()
            .map(|&q| kl_bernoulli(w.rho, q))
            .sum::<f64>();
    LossTerms {
        euclidean,
        decay,
        sparsity,
    }
}

pub fn loss(params: &NetworkParams, batch: &TrainBatch, w: &LossWeights) -> Result<LossTerms> {
    let trace = forward(params, &batch.inputs)?;
    Ok(loss_from_trace(params, &trace, &batch.labels, w))
}

/// Gradient of [`LossTerms::objective`], one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Output-layer error `(L̂ − L)·L̂·(1 − L̂)` per sample.
pub fn output_error(prediction: f64, label: f64) -> f64 {
    (prediction - label) * prediction * (1.0 - prediction)
}

pub fn backward(params: &NetworkParams, batch: &TrainBatch, trace: &ForwardTrace, w: &LossWeights) -> Result<Gradients> {
    let k = batch.len();
    if trace.batch_len() != k || trace.activations.len() != params.layers.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: trace.batch_len(),
        });
    }
    let n_layers = params.layers.len();
    let kf = k as f64;

    let out = &trace.activations[n_layers];
    let mut error = Matrix::from_fn(k, out.cols(), |r, c| output_error(out.get(r, c), batch.labels[r]));

    let mut grads: Vec<Option<Layer>> = vec![None; n_layers];
    for m in (0..n_layers).rev() {
        let layer = &params.layers[m];
        let prev = &trace.activations[m];
        let mut gw = prev.t_matmul(&error)?;
        if w.gamma != 0.0 {
            for (g, wv) in gw.as_mut_slice().iter_mut().zip(layer.weights.as_slice()) {
                *g += 2.0 * w.gamma * wv;
            }
        }
        let mut gb = vec![0.0; error.cols()];
        for r in 0..k {
            for (acc, e) in gb.iter_mut().zip(error.row(r)) {
                *acc += e;
            }
        }
        grads[m] = Some(Layer { weights: gw, bias: gb });

        if m == 0 {
            break;
        }
        // Error of hidden layer m (activations[m]).
        let h = &trace.activations[m];
        let mut back = error.matmul_t(&layer.weights)?;
        let sparse: Vec<f64> = trace.mean_activations[m - 1]
            .iter()
            .map(|&q| {
                let q = q.clamp(RHO_CLAMP, 1.0 - RHO_CLAMP);
                (w.eta / kf) * (-w.rho / q + (1.0 - w.rho) / (1.0 - q))
            })
            .collect();
        for r in 0..k {
            for ((e, hv), s) in back.row_mut(r).iter_mut().zip(h.row(r)).zip(&sparse) {
                *e = (*e + s) * hv * (1.0 - hv);
            }
        }
        error = back;
    }
    Ok(Gradients {
        layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
    })
}

// ---------------------------------------------------------------------------
// Optimizer

/// Momentum and decay of the update `Δ ← μ·Δ − d·ε·W − ε·∂J/∂W; W ← W + Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocities: Vec<Layer>,
    pub iteration: u64,
}

impl OptimizerState {
    pub fn zeros(params: &NetworkParams) -> Self {
        Self {
            velocities: params
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            iteration: 0,
        }
    }
}

/// One momentum step. Biases follow the same rule without decay.
pub fn sgd_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    opt: &mut OptimizerState,
    learning_rate: f64,
    cfg: &SgdConfig,
) -> Result<()> {
    if grads.layers.len() != params.layers.len() || opt.velocities.len() != params.layers.len() {
        return Err(Error::DimensionMismatch {
            expected: params.layers.len(),
            actual: grads.layers.len(),
        });
    }
    for ((layer, g), v) in params.layers.iter_mut().zip(&grads.layers).zip(&mut opt.velocities) {
        if g.weights.shape() != layer.weights.shape() || v.weights.shape() != layer.weights.shape() {
            return Err(Error::DimensionMismatch {
                expected: layer.weights.as_slice().len(),
                actual: g.weights.as_slice().len(),
            });
        }
        if g.bias.len() != layer.bias.len() || v.bias.len() != layer.bias.len() {
            return Err(Error::DimensionMismatch {
                expected: layer.bias.len(),
                actual: g.bias.len(),
            });
        }
        for ((wv, gv), dv) in layer
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(g.weights.as_slice())
            .zip(v.weights.as_mut_slice())
        {
            *dv = cfg.momentum * *dv - cfg.weight_decay * learning_rate * *wv - learning_rate * gv;
            *wv += *dv;
        }
        for ((bv, gv), dv) in layer.bias.iter_mut().zip(&g.bias).zip(v.bias.iter_mut()) {
            *dv = cfg.momentum * *dv - learning_rate * gv;
            *bv += *dv;
        }
    }
    opt.iteration += 1;
    Ok(())
}

/// Supervised training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub sgd: SgdConfig,
    pub loss: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 100,
            learning_rate: 0.002,
            sgd: SgdConfig::default(),
            loss: LossWeights::default(),
        }
    }
}

/// Mini-batch SGD over `data`, reshuffled every epoch; the last short
/// batch is kept. Returns the number of optimizer steps taken.
pub fn train<R: Rng + ?Sized>(
    params: &mut NetworkParams,
    data: &TrainBatch,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<u64> {
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if data.inputs.cols() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            actual: data.inputs.cols(),
        });
    }
    let batch_size = cfg.batch_size.max(1);
    let mut opt = OptimizerState::zeros(params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size) {
            let batch = data.subset(chunk);
            let trace = forward(params, &batch.inputs)?;
            let grads = backward(params, &batch, &trace, &cfg.loss)?;
            sgd_step(params, &grads, &mut opt, cfg.learning_rate, &cfg.sgd)?;
        }
        if !params.is_finite() {
            return Err(Error::Numeric("training diverged"));
        }
    }
    Ok(opt.iteration)
}

/// Network output for each patch.
pub fn score(params: &NetworkParams, patches: &[PatchVector]) -> Result<Vec<f64>> {
    if patches.is_empty() {
        return Ok(Vec::new());
    }
    params.predict(&Matrix::from_rows(patches)?)
}

/// Fraction of samples whose prediction lands on the right side of 0.5.
pub fn accuracy(params: &NetworkParams, data: &TrainBatch) -> Result<f64> {
    let preds = params.predict(&data.inputs)?;
    let correct = preds
        .iter()
        .zip(&data.labels)
        .filter(|(p, l)| (**p >= 0.5) == (**l >= 0.5))
        .count();
    Ok(correct as f64 / data.len() as f64)
}
