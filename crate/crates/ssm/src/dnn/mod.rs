//! From-scratch feed-forward detectors with backpropagation.
//!
//! Two architectures share one trunk of affine layers with ReLU activations:
//!
//! - `Conventional`: plain MLP, classification heads only at the output.
//! - `Proposed`: batch normalization on every layer and a pair of antenna /
//!   symbol heads attached to every layer output `V_k`, trained with
//!   depth-weighted deep supervision. Inference reads the final-layer heads.
//!
//! Training is plain minibatch SGD plus an exponential moving average of all
//! parameters; the EMA copy is what evaluation and detection use. Everything
//! is `f64`, single-threaded, and bit-deterministic given the seed.

mod checkpoint;
mod data;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMetadata};
pub use data::{build_dataset, features_from, ChannelSource, FeatureStats, SampleSet};
pub use train::{train, TrainConfig, TrainHistory, TrainOutcome, ValidationPoint};

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorResult;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, CVector};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

/// Network architecture variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Conventional,
    Proposed,
}

/// Whether a forward pass uses batch statistics and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Loss selection for training.
#[derive(Debug, Clone)]
pub enum LossMode {
    /// Depth-weighted cross entropy over every head pair (the default).
    DeepSupervisionCe,
    /// Squared error between the transmit vector reconstructed from the
    /// final-layer head expectations and the true transmit vector.
    ReconstructionMse {
        /// Constellation points indexed by symbol label.
        points: Vec<Complex64>,
        /// Signal amplitude `sqrt(beta P_S)`.
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BnParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BnBuffers {
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerParams {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub bn: Option<BnParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HeadParams {
    pub w_ant: Array2<f64>,
    pub b_ant: Array1<f64>,
    pub w_sym: Array2<f64>,
    pub b_sym: Array1<f64>,
}

/// All learnable parameters. Gradients reuse the same shape.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub layers: Vec<LayerParams>,
    pub heads: Vec<HeadParams>,
}

impl Params {
    fn zeros_like(&self) -> Params {
        Params {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                    bn: l.bn.as_ref().map(|bn| BnParams {
                        gamma: Array1::zeros(bn.gamma.raw_dim()),
                        beta: Array1::zeros(bn.beta.raw_dim()),
                    }),
                })
                .collect(),
            heads: self
                .heads
                .iter()
                .map(|h| HeadParams {
                    w_ant: Array2::zeros(h.w_ant.raw_dim()),
                    b_ant: Array1::zeros(h.b_ant.raw_dim()),
                    w_sym: Array2::zeros(h.w_sym.raw_dim()),
                    b_sym: Array1::zeros(h.b_sym.raw_dim()),
                })
                .collect(),
        }
    }

    /// `self -= lr * grads`
    fn sgd_step(&mut self, grads: &Params, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.w.scaled_add(-lr, &g.w);
            l.b.scaled_add(-lr, &g.b);
            if let (Some(bn), Some(gbn)) = (l.bn.as_mut(), g.bn.as_ref()) {
                bn.gamma.scaled_add(-lr, &gbn.gamma);
                bn.beta.scaled_add(-lr, &gbn.beta);
            }
        }
        for (h, g) in self.heads.iter_mut().zip(&grads.heads) {
            h.w_ant.scaled_add(-lr, &g.w_ant);
            h.b_ant.scaled_add(-lr, &g.b_ant);
            h.w_sym.scaled_add(-lr, &g.w_sym);
            h.b_sym.scaled_add(-lr, &g.b_sym);
        }
    }

    /// `self = decay * self + (1 - decay) * other`, computed as
    /// `other + decay * (self - other)` so an already-converged shadow stays
    /// bit-identical.
    fn ema_update(&mut self, other: &Params, decay: f64) {
        let blend = |e: &mut Array2<f64>, p: &Array2<f64>| {
            e.zip_mut_with(p, |a, &b| *a = b + decay * (*a - b))
        };
        let blend1 = |e: &mut Array1<f64>, p: &Array1<f64>| {
            e.zip_mut_with(p, |a, &b| *a = b + decay * (*a - b))
        };
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            blend(&mut l.w, &o.w);
            blend1(&mut l.b, &o.b);
            if let (Some(bn), Some(obn)) = (l.bn.as_mut(), o.bn.as_ref()) {
                blend1(&mut bn.gamma, &obn.gamma);
                blend1(&mut bn.beta, &obn.beta);
            }
        }
        for (h, o) in self.heads.iter_mut().zip(&other.heads) {
            blend(&mut h.w_ant, &o.w_ant);
            blend1(&mut h.b_ant, &o.b_ant);
            blend(&mut h.w_sym, &o.w_sym);
            blend1(&mut h.b_sym, &o.b_sym);
        }
    }
}

/// A joint-inference network with per-layer antenna/symbol heads.
#[derive(Debug, Clone)]
pub struct DnnModel {
    pub arch: Arch,
    input_dim: usize,
    widths: Vec<usize>,
    n_t: usize,
    m: usize,
    dropout_p: f64,
    ema_decay: f64,
    /// Layer index each head pair attaches to.
    head_layers: Vec<usize>,
    /// Deep-supervision weights, nonnegative and summing to 1.
    head_weights: Vec<f64>,
    params: Params,
    ema: Params,
    bn_buffers: Vec<Option<BnBuffers>>,
}

fn uniform_init<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let scale = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| (2.0 * rng.random::<f64>() - 1.0) * scale)
}

impl DnnModel {
    /// Builds a fresh model. `Proposed` gets batch normalization on every
    /// layer and heads on every layer with weights proportional to depth;
    /// `Conventional` is the same trunk without batch normalization and with
    /// heads only at the output.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        arch: Arch,
        input_dim: usize,
        hidden: &[usize],
        n_t: usize,
        m: usize,
        dropout_p: f64,
        ema_decay: f64,
        rng: &mut R,
    ) -> Self {
        assert!(!hidden.is_empty(), "at least one hidden layer");
        assert!((0.0..1.0).contains(&dropout_p));
        assert!((0.0..1.0).contains(&ema_decay));
        let mut layers = Vec::with_capacity(hidden.len());
        let mut in_dim = input_dim;
        for &width in hidden {
            layers.push(LayerParams {
                w: uniform_init(rng, width, in_dim, in_dim),
                b: Array1::zeros(width),
                bn: (arch == Arch::Proposed).then(|| BnParams {
                    gamma: Array1::ones(width),
                    beta: Array1::zeros(width),
                }),
            });
            in_dim = width;
        }
        let head_layers: Vec<usize> = match arch {
            Arch::Proposed => (0..hidden.len()).collect(),
            Arch::Conventional => vec![hidden.len() - 1],
        };
        let head_weights: Vec<f64> = match arch {
            Arch::Proposed => {
                let total: f64 = (1..=hidden.len()).map(|k| k as f64).sum();
                (1..=hidden.len()).map(|k| k as f64 / total).collect()
            }
            Arch::Conventional => vec![1.0],
        };
        let heads: Vec<HeadParams> = head_layers
            .iter()
            .map(|&li| {
                let dim = hidden[li];
                HeadParams {
                    w_ant: uniform_init(rng, n_t, dim, dim),
                    b_ant: Array1::zeros(n_t),
                    w_sym: uniform_init(rng, m, dim, dim),
                    b_sym: Array1::zeros(m),
                }
            })
            .collect();
        let bn_buffers = layers
            .iter()
            .map(|l| {
                l.bn.as_ref().map(|_| BnBuffers {
                    running_mean: Array1::zeros(l.b.len()),
                    running_var: Array1::ones(l.b.len()),
                })
            })
            .collect();
        let params = Params { layers, heads };
        let ema = params.clone();
        Self {
            arch,
            input_dim,
            widths: hidden.to_vec(),
            n_t,
            m,
            dropout_p,
            ema_decay,
            head_layers,
            head_weights,
            params,
            ema,
            bn_buffers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dropout_p(&self) -> f64 {
        self.dropout_p
    }

    pub fn set_dropout_p(&mut self, p: f64) {
        assert!((0.0..1.0).contains(&p));
        self.dropout_p = p;
    }

    pub fn ema_decay(&self) -> f64 {
        self.ema_decay
    }

    pub fn set_ema_decay(&mut self, decay: f64) {
        assert!((0.0..1.0).contains(&decay));
        self.ema_decay = decay;
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.head_weights
    }

    /// A copy of the model whose active parameters are the EMA shadow.
    pub fn ema_snapshot(&self) -> DnnModel {
        let mut snap = self.clone();
        snap.params = self.ema.clone();
        snap
    }

    /// Forward pass through the trunk and heads.
    ///
    /// In `Train` mode batch statistics feed the normalization (updating the
    /// running buffers) and dropout masks are sampled from `rng`; in `Eval`
    /// mode running statistics are used and dropout is the identity, so no
    /// randomness is consumed.
    pub fn forward<R: Rng>(
        &mut self,
        features: &Array2<f64>,
        mode: Mode,
        rng: Option<&mut R>,
    ) -> Result<ForwardTrace> {
        if features.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "dnn forward",
                expected: format!("{} features", self.input_dim),
                actual: format!("{}", features.ncols()),
            });
        }
        let (trace, _) = self.forward_impl(features, mode, rng);
        Ok(trace)
    }

    /// Eval-mode forward that never consumes randomness or mutates buffers.
    pub fn forward_eval(&self, features: &Array2<f64>) -> Result<ForwardTrace> {
        if features.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "dnn forward",
                expected: format!("{} features", self.input_dim),
                actual: format!("{}", features.ncols()),
            });
        }
        // Buffers are only written in Train mode; cloning self is avoided by
        // a shared implementation over an immutable view of the parameters.
        let (trace, _) = forward_pass::<rand_chacha::ChaCha8Rng>(
            &self.params,
            &mut NoBuffers(&self.bn_buffers),
            &self.head_layers,
            self.dropout_p,
            features,
            Mode::Eval,
            None,
        );
        Ok(trace)
    }

    fn forward_impl<R: Rng>(
        &mut self,
        features: &Array2<f64>,
        mode: Mode,
        rng: Option<&mut R>,
    ) -> (ForwardTrace, Vec<LayerCache>) {
        forward_pass(
            &self.params,
            &mut MutBuffers(&mut self.bn_buffers),
            &self.head_layers,
            self.dropout_p,
            features,
            mode,
            rng,
        )
    }

    /// Loss and exact reverse-mode gradients for one batch (no update).
    pub fn loss_and_grads<R: Rng>(
        &mut self,
        features: &Array2<f64>,
        antenna_labels: &[usize],
        symbol_labels: &[usize],
        loss_mode: &LossMode,
        rng: Option<&mut R>,
    ) -> (f64, ParamGrads) {
        let (trace, caches) = self.forward_impl(features, Mode::Train, rng);
        let (loss, grads) = backward_pass(
            &self.params,
            &self.head_layers,
            &self.head_weights,
            &trace,
            &caches,
            features,
            antenna_labels,
            symbol_labels,
            loss_mode,
        );
        (loss, ParamGrads(grads))
    }

    /// One SGD step with EMA maintenance; returns the batch loss.
    pub fn backward_and_step<R: Rng>(
        &mut self,
        features: &Array2<f64>,
        antenna_labels: &[usize],
        symbol_labels: &[usize],
        loss_mode: &LossMode,
        learning_rate: f64,
        rng: Option<&mut R>,
    ) -> f64 {
        let (loss, grads) = self.loss_and_grads(features, antenna_labels, symbol_labels, loss_mode, rng);
        self.params.sgd_step(&grads.0, learning_rate);
        let decay = self.ema_decay;
        self.ema.ema_update(&self.params, decay);
        loss
    }

    /// Number of scalar learnable parameters.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.params.for_each(|_, _| n += 1);
        n
    }

    /// Visits every learnable parameter mutably in canonical order (the same
    /// order gradients are reported in).
    pub fn for_each_param_mut(&mut self, f: impl FnMut(&mut f64, ParamGroup)) {
        self.params.for_each_mut(f);
    }

    /// Joint decision from the final-layer heads in Eval mode.
    pub fn decide(&self, features: &Array2<f64>) -> Result<Vec<DetectorResult>> {
        let trace = self.forward_eval(features)?;
        let (ant, sym) = trace
            .head_probs
            .last()
            .expect("at least one head");
        Ok((0..features.nrows())
            .map(|i| DetectorResult {
                n_hat: argmax_row(ant, i),
                m_hat: argmax_row(sym, i),
            })
            .collect())
    }

    pub(crate) fn params(&self) -> &Params {
        &self.params
    }

    #[cfg(test)]
    pub(crate) fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    #[cfg(test)]
    pub(crate) fn ema_params(&self) -> &Params {
        &self.ema
    }

    pub(crate) fn bn_buffers(&self) -> &[Option<BnBuffers>] {
        &self.bn_buffers
    }

    #[cfg(test)]
    pub(crate) fn bn_buffers_mut(&mut self) -> &mut Vec<Option<BnBuffers>> {
        &mut self.bn_buffers
    }

    pub(crate) fn head_layers(&self) -> &[usize] {
        &self.head_layers
    }

    pub(crate) fn from_parts(
        arch: Arch,
        input_dim: usize,
        widths: Vec<usize>,
        n_t: usize,
        m: usize,
        dropout_p: f64,
        ema_decay: f64,
        head_layers: Vec<usize>,
        head_weights: Vec<f64>,
        params: Params,
        bn_buffers: Vec<Option<BnBuffers>>,
    ) -> Self {
        let ema = params.clone();
        Self {
            arch,
            input_dim,
            widths,
            n_t,
            m,
            dropout_p,
            ema_decay,
            head_layers,
            head_weights,
            params,
            ema,
            bn_buffers,
        }
    }
}

/// Parameter group tags, for diagnostics in parameter walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Weight,
    Bias,
    BnGamma,
    BnBeta,
    HeadWeight,
    HeadBias,
}

impl Params {
    /// Visits every scalar parameter in a fixed canonical order: per layer
    /// `w, b, gamma, beta`, then per head `w_ant, b_ant, w_sym, b_sym`.
    fn for_each(&self, mut f: impl FnMut(f64, ParamGroup)) {
        for l in &self.layers {
            l.w.iter().for_each(|&v| f(v, ParamGroup::Weight));
            l.b.iter().for_each(|&v| f(v, ParamGroup::Bias));
            if let Some(bn) = &l.bn {
                bn.gamma.iter().for_each(|&v| f(v, ParamGroup::BnGamma));
                bn.beta.iter().for_each(|&v| f(v, ParamGroup::BnBeta));
            }
        }
        for h in &self.heads {
            h.w_ant.iter().for_each(|&v| f(v, ParamGroup::HeadWeight));
            h.b_ant.iter().for_each(|&v| f(v, ParamGroup::HeadBias));
            h.w_sym.iter().for_each(|&v| f(v, ParamGroup::HeadWeight));
            h.b_sym.iter().for_each(|&v| f(v, ParamGroup::HeadBias));
        }
    }

    /// Mutable variant of [`Params::for_each`], same canonical order.
    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64, ParamGroup)) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|v| f(v, ParamGroup::Weight));
            l.b.iter_mut().for_each(|v| f(v, ParamGroup::Bias));
            if let Some(bn) = &mut l.bn {
                bn.gamma.iter_mut().for_each(|v| f(v, ParamGroup::BnGamma));
                bn.beta.iter_mut().for_each(|v| f(v, ParamGroup::BnBeta));
            }
        }
        for h in &mut self.heads {
            h.w_ant.iter_mut().for_each(|v| f(v, ParamGroup::HeadWeight));
            h.b_ant.iter_mut().for_each(|v| f(v, ParamGroup::HeadBias));
            h.w_sym.iter_mut().for_each(|v| f(v, ParamGroup::HeadWeight));
            h.b_sym.iter_mut().for_each(|v| f(v, ParamGroup::HeadBias));
        }
    }
}

/// Opaque gradient container returned by [`DnnModel::loss_and_grads`].
pub struct ParamGrads(Params);

impl ParamGrads {
    /// Visits every gradient scalar in the model's canonical parameter order.
    pub fn for_each(&self, f: impl FnMut(f64, ParamGroup)) {
        self.0.for_each(f);
    }
}

/// Hidden outputs and head probabilities from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Per-layer hidden output `V_k`, each `batch x width`.
    pub layer_outputs: Vec<Array2<f64>>,
    /// Per-head `(antenna, symbol)` probability matrices, rows summing to 1.
    pub head_probs: Vec<(Array2<f64>, Array2<f64>)>,
}

struct BnCache {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
}

struct LayerCache {
    /// Layer input (previous `V` or the features).
    input: Array2<f64>,
    bn: Option<BnCache>,
    /// Input to the ReLU (the normalized pre-activation).
    relu_in: Array2<f64>,
    /// Dropout mask scaled by `1/(1-p)`, if sampled.
    mask: Option<Array2<f64>>,
}

fn argmax_row(a: &Array2<f64>, row: usize) -> usize {
    let r = a.row(row);
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in r.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Row-wise softmax.
fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Access to batchnorm buffers that may or may not be updatable.
trait BufferAccess {
    fn get(&self, idx: usize) -> Option<&BnBuffers>;
    fn update(&mut self, idx: usize, mean: &Array1<f64>, var: &Array1<f64>);
}

struct MutBuffers<'a>(&'a mut Vec<Option<BnBuffers>>);
struct NoBuffers<'a>(&'a [Option<BnBuffers>]);

impl BufferAccess for MutBuffers<'_> {
    fn get(&self, idx: usize) -> Option<&BnBuffers> {
        self.0[idx].as_ref()
    }
    fn update(&mut self, idx: usize, mean: &Array1<f64>, var: &Array1<f64>) {
        if let Some(buf) = self.0[idx].as_mut() {
            buf.running_mean
                .zip_mut_with(mean, |r, &b| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b);
            buf.running_var
                .zip_mut_with(var, |r, &b| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b);
        }
    }
}

impl BufferAccess for NoBuffers<'_> {
    fn get(&self, idx: usize) -> Option<&BnBuffers> {
        self.0[idx].as_ref()
    }
    fn update(&mut self, _idx: usize, _mean: &Array1<f64>, _var: &Array1<f64>) {}
}

fn forward_pass<R: Rng>(
    params: &Params,
    buffers: &mut dyn BufferAccess,
    head_layers: &[usize],
    dropout_p: f64,
    features: &Array2<f64>,
    mode: Mode,
    mut rng: Option<&mut R>,
) -> (ForwardTrace, Vec<LayerCache>) {
    let batch = features.nrows();
    let mut x = features.clone();
    let mut layer_outputs = Vec::with_capacity(params.layers.len());
    let mut caches = Vec::with_capacity(params.layers.len());
    for (li, layer) in params.layers.iter().enumerate() {
        let input = x;
        // Affine.
        let mut z = input.dot(&layer.w.t());
        z += &layer.b;
        // Batch normalization.
        let (z_norm, bn_cache) = match (&layer.bn, mode) {
            (Some(bn), Mode::Train) => {
                let mu = z.mean_axis(Axis(0)).expect("nonempty batch");
                let centered = &z - &mu;
                let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("nonempty");
                buffers.update(li, &mu, &var);
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let x_hat = &centered * &inv_std;
                let out = &x_hat * &bn.gamma + &bn.beta;
                (
                    out,
                    Some(BnCache {
                        x_hat,
                        inv_std,
                    }),
                )
            }
            (Some(bn), Mode::Eval) => {
                let buf = buffers.get(li).expect("bn layer has buffers");
                let inv_std = buf.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let x_hat = (&z - &buf.running_mean) * &inv_std;
                let out = &x_hat * &bn.gamma + &bn.beta;
                (out, None)
            }
            (None, _) => (z, None),
        };
        // ReLU.
        let act = z_norm.mapv(|v| v.max(0.0));
        // Inverted dropout, Train mode only.
        let (out, mask) = if mode == Mode::Train && dropout_p > 0.0 {
            let rng = rng
                .as_deref_mut()
                .expect("Train-mode forward with dropout needs an RNG");
            let keep = 1.0 - dropout_p;
            let mask = Array2::from_shape_fn(act.raw_dim(), |_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            (&act * &mask, Some(mask))
        } else {
            (act.clone(), None)
        };
        caches.push(LayerCache {
            input,
            bn: bn_cache,
            relu_in: z_norm,
            mask,
        });
        layer_outputs.push(out.clone());
        x = out;
    }
    debug_assert_eq!(x.nrows(), batch);
    let head_probs = head_layers
        .iter()
        .zip(&params.heads)
        .map(|(&li, head)| {
            let v = &layer_outputs[li];
            let ant = softmax(&(v.dot(&head.w_ant.t()) + &head.b_ant));
            let sym = softmax(&(v.dot(&head.w_sym.t()) + &head.b_sym));
            (ant, sym)
        })
        .collect();
    (
        ForwardTrace {
            layer_outputs,
            head_probs,
        },
        caches,
    )
}

/// Mean cross entropy of `probs` against integer labels (natural log).
fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let b = probs.nrows() as f64;
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| -(probs[(i, l)].max(1e-300)).ln())
        .sum::<f64>()
        / b
}

/// Gradient of the softmax inputs given the gradient of its outputs.
fn softmax_backward(probs: &Array2<f64>, d_probs: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    for i in 0..probs.nrows() {
        let p = probs.row(i);
        let dp = d_probs.row(i);
        let dot: f64 = p.iter().zip(dp.iter()).map(|(a, b)| a * b).sum();
        for j in 0..probs.ncols() {
            out[(i, j)] = p[j] * (dp[j] - dot);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn backward_pass(
    params: &Params,
    head_layers: &[usize],
    head_weights: &[f64],
    trace: &ForwardTrace,
    caches: &[LayerCache],
    features: &Array2<f64>,
    antenna_labels: &[usize],
    symbol_labels: &[usize],
    loss_mode: &LossMode,
) -> (f64, Params) {
    let batch = features.nrows();
    let b = batch as f64;
    let n_layers = params.layers.len();
    let mut grads = params.zeros_like();
    // Gradient flowing into each layer's output V_k.
    let mut d_outputs: Vec<Array2<f64>> = trace
        .layer_outputs
        .iter()
        .map(|v| Array2::zeros(v.raw_dim()))
        .collect();

    let loss = match loss_mode {
        LossMode::DeepSupervisionCe => {
            let mut total = 0.0;
            for (hi, (&li, head)) in head_layers.iter().zip(&params.heads).enumerate() {
                let lambda = head_weights[hi];
                let (ant, sym) = &trace.head_probs[hi];
                total += lambda * (cross_entropy(ant, antenna_labels)
                    + cross_entropy(sym, symbol_labels));
                // d logits = lambda * (p - onehot) / B, standard softmax+CE.
                let mut d_ant = ant * (lambda / b);
                for (i, &l) in antenna_labels.iter().enumerate() {
                    d_ant[(i, l)] -= lambda / b;
                }
                let mut d_sym = sym * (lambda / b);
                for (i, &l) in symbol_labels.iter().enumerate() {
                    d_sym[(i, l)] -= lambda / b;
                }
                accumulate_head(
                    &mut grads.heads[hi],
                    head,
                    &trace.layer_outputs[li],
                    &d_ant,
                    &d_sym,
                    &mut d_outputs[li],
                );
            }
            total
        }
        LossMode::ReconstructionMse { points, amplitude } => {
            // Reconstruction from the final head pair only.
            let hi = params.heads.len() - 1;
            let li = *head_layers.last().expect("heads exist");
            let head = &params.heads[hi];
            let (ant, sym) = &trace.head_probs[hi];
            let n_t = ant.ncols();
            let amp = *amplitude;
            let (s_re, s_im): (Vec<f64>, Vec<f64>) =
                points.iter().map(|p| (p.re, p.im)).unzip();
            // Expected symbol per sample.
            let mut shat_re = vec![0.0; batch];
            let mut shat_im = vec![0.0; batch];
            for i in 0..batch {
                for (mi, (re, im)) in s_re.iter().zip(&s_im).enumerate() {
                    shat_re[i] += sym[(i, mi)] * re;
                    shat_im[i] += sym[(i, mi)] * im;
                }
            }
            let mut loss = 0.0;
            let mut d_ant = Array2::zeros(ant.raw_dim());
            let mut d_shat_re = vec![0.0; batch];
            let mut d_shat_im = vec![0.0; batch];
            for i in 0..batch {
                let n_true = antenna_labels[i];
                let m_true = symbol_labels[i];
                for j in 0..n_t {
                    let xhat_re = amp * ant[(i, j)] * shat_re[i];
                    let xhat_im = amp * ant[(i, j)] * shat_im[i];
                    let x_re = if j == n_true { amp * s_re[m_true] } else { 0.0 };
                    let x_im = if j == n_true { amp * s_im[m_true] } else { 0.0 };
                    let (er, ei) = (xhat_re - x_re, xhat_im - x_im);
                    loss += (er * er + ei * ei) / b;
                    let (der, dei) = (2.0 * er / b, 2.0 * ei / b);
                    d_ant[(i, j)] += amp * (der * shat_re[i] + dei * shat_im[i]);
                    d_shat_re[i] += amp * der * ant[(i, j)];
                    d_shat_im[i] += amp * dei * ant[(i, j)];
                }
            }
            let mut d_sym = Array2::zeros(sym.raw_dim());
            for i in 0..batch {
                for (mi, (re, im)) in s_re.iter().zip(&s_im).enumerate() {
                    d_sym[(i, mi)] = d_shat_re[i] * re + d_shat_im[i] * im;
                }
            }
            let d_ant_logits = softmax_backward(ant, &d_ant);
            let d_sym_logits = softmax_backward(sym, &d_sym);
            accumulate_head(
                &mut grads.heads[hi],
                head,
                &trace.layer_outputs[li],
                &d_ant_logits,
                &d_sym_logits,
                &mut d_outputs[li],
            );
            loss
        }
    };

    // Trunk, last layer first.
    for li in (0..n_layers).rev() {
        let cache = &caches[li];
        let layer = &params.layers[li];
        let mut d_out = std::mem::take(&mut d_outputs[li]);
        // Dropout.
        if let Some(mask) = &cache.mask {
            d_out *= mask;
        }
        // ReLU.
        let mut d_pre = d_out;
        d_pre.zip_mut_with(&cache.relu_in, |g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        // Batch normalization.
        let d_z = if let (Some(bn), Some(bn_cache)) = (&layer.bn, &cache.bn) {
            let g = grads.layers[li].bn.as_mut().expect("bn grads allocated");
            for i in 0..d_pre.nrows() {
                for j in 0..d_pre.ncols() {
                    g.gamma[j] += d_pre[(i, j)] * bn_cache.x_hat[(i, j)];
                    g.beta[j] += d_pre[(i, j)];
                }
            }
            // d x_hat = d_pre * gamma; then the batch-statistics terms.
            let d_xhat = &d_pre * &bn.gamma;
            let bsz = d_pre.nrows() as f64;
            let sum_dxhat = d_xhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&d_xhat * &bn_cache.x_hat).sum_axis(Axis(0));
            let mut d_z = Array2::zeros(d_pre.raw_dim());
            for i in 0..d_z.nrows() {
                for j in 0..d_z.ncols() {
                    d_z[(i, j)] = bn_cache.inv_std[j] / bsz
                        * (bsz * d_xhat[(i, j)]
                            - sum_dxhat[j]
                            - bn_cache.x_hat[(i, j)] * sum_dxhat_xhat[j]);
                }
            }
            d_z
        } else {
            d_pre
        };
        // Affine.
        grads.layers[li].w += &d_z.t().dot(&cache.input);
        grads.layers[li].b += &d_z.sum_axis(Axis(0));
        if li > 0 {
            d_outputs[li - 1] += &d_z.dot(&layer.w);
        }
    }
    (loss, grads)
}

/// Head gradients and the gradient contribution to the attached layer output.
fn accumulate_head(
    grad: &mut HeadParams,
    head: &HeadParams,
    v: &Array2<f64>,
    d_ant_logits: &Array2<f64>,
    d_sym_logits: &Array2<f64>,
    d_v: &mut Array2<f64>,
) {
    grad.w_ant += &d_ant_logits.t().dot(v);
    grad.b_ant += &d_ant_logits.sum_axis(Axis(0));
    grad.w_sym += &d_sym_logits.t().dot(v);
    grad.b_sym += &d_sym_logits.sum_axis(Axis(0));
    *d_v += &d_ant_logits.dot(&head.w_ant);
    *d_v += &d_sym_logits.dot(&head.w_sym);
}

/// Computes the loss of a batch without touching gradients (test support and
/// finite-difference checks).
pub fn batch_loss<R: Rng>(
    model: &mut DnnModel,
    features: &Array2<f64>,
    antenna_labels: &[usize],
    symbol_labels: &[usize],
    loss_mode: &LossMode,
    rng: Option<&mut R>,
) -> f64 {
    let (loss, _) = model.loss_and_grads(features, antenna_labels, symbol_labels, loss_mode, rng);
    loss
}

/// A trained model bundled with its training-set feature statistics.
#[derive(Debug, Clone)]
pub struct TrainedDetector {
    pub model: DnnModel,
    pub stats: FeatureStats,
}

impl TrainedDetector {
    /// Joint detection of one received vector given the effective channel.
    pub fn detect(&self, y: &CVector, h_eff: &CMatrix) -> Result<DetectorResult> {
        let raw = features_from(y, h_eff);
        if raw.len() != self.model.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "dnn_detect features",
                expected: format!("{}", self.model.input_dim()),
                actual: format!("{}", raw.len()),
            });
        }
        let standardized = self.stats.apply_to(&raw);
        let features = Array2::from_shape_vec((1, raw.len()), standardized)
            .expect("shape matches length");
        Ok(self.model.decide(&features)?[0])
    }
}

#[cfg(test)]
mod tests;
