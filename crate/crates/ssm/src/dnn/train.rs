//! Minibatch training loop with periodic validation and early stopping.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DnnModel, LossMode, SampleSet};
use crate::numerics::RngStream;

fn default_validate_every() -> usize {
    100
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Maximum number of minibatch iterations.
    pub max_iters: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_p: f64,
    /// Validate (with EMA weights) every this many iterations.
    #[serde(default = "default_validate_every")]
    pub validate_every: usize,
    /// Stop after this many consecutive non-improving validations.
    pub patience: usize,
    pub seed: u64,
}

/// One validation snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub iter: usize,
    /// Fraction of validation samples whose joint (antenna, symbol) decision
    /// is wrong.
    pub joint_error_rate: f64,
}

/// Full loss and validation history of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Training loss per iteration.
    pub losses: Vec<f64>,
    pub validations: Vec<ValidationPoint>,
    pub best_iter: usize,
    pub stopped_early: bool,
}

/// A trained model (best-validation EMA snapshot) and its history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DnnModel,
    pub history: TrainHistory,
}

/// Joint (antenna, symbol) error rate of a model over a sample set, evaluated
/// in chunks to bound the working set.
pub fn joint_error_rate(model: &DnnModel, set: &SampleSet) -> f64 {
    let n = set.len();
    if n == 0 {
        return 0.0;
    }
    let mut wrong = 0usize;
    let chunk = 2048;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let block: Array2<f64> = set.features.slice(ndarray::s![start..end, ..]).to_owned();
        let decisions = model.decide(&block).expect("dims fixed by the set");
        for (i, d) in decisions.iter().enumerate() {
            let k = start + i;
            if d.n_hat != set.antenna_labels[k] || d.m_hat != set.symbol_labels[k] {
                wrong += 1;
            }
        }
        start = end;
    }
    wrong as f64 / n as f64
}

/// Number of step-decay stages over a full training run.
const LR_DECAY_STAGES: u32 = 8;

/// Step-decayed learning rate: `learning_rate` is the initial value, halved
/// at each of the evenly spaced decay stages.
pub fn learning_rate_at(cfg: &TrainConfig, iter: usize) -> f64 {
    let stage_len = cfg.max_iters.div_ceil(LR_DECAY_STAGES as usize).max(1);
    let stage = ((iter - 1) / stage_len) as u32;
    cfg.learning_rate * 0.5f64.powi(stage.min(LR_DECAY_STAGES - 1) as i32)
}

/// Trains `model` on `train_set`, validating on `val_set` with EMA weights
/// every `validate_every` iterations and early-stopping after `patience`
/// non-improving validations. The learning rate starts at
/// `cfg.learning_rate` and follows the step-decay schedule. Returns the
/// best-validation EMA snapshot (or the final EMA snapshot if no validation
/// ever ran) together with the full history. Deterministic given `cfg.seed`.
pub fn train(
    mut model: DnnModel,
    train_set: &SampleSet,
    val_set: &SampleSet,
    cfg: &TrainConfig,
    loss_mode: &LossMode,
) -> TrainOutcome {
    assert!(cfg.batch_size >= 1 && cfg.validate_every >= 1);
    assert!(train_set.standardized && val_set.standardized, "standardize first");
    model.set_dropout_p(cfg.dropout_p);
    let mut history = TrainHistory::default();
    if cfg.max_iters == 0 {
        return TrainOutcome { model, history };
    }
    let mut rng = RngStream::new(cfg.seed).rng();
    let n = train_set.len();
    let mut best: Option<(f64, DnnModel)> = None;
    let mut stale = 0usize;
    for iter in 1..=cfg.max_iters {
        let idx = rand::seq::index::sample(&mut rng, n, cfg.batch_size.min(n)).into_vec();
        let batch = train_set.features.select(ndarray::Axis(0), &idx);
        let ant: Vec<usize> = idx.iter().map(|&i| train_set.antenna_labels[i]).collect();
        let sym: Vec<usize> = idx.iter().map(|&i| train_set.symbol_labels[i]).collect();
        let loss = model.backward_and_step(
            &batch,
            &ant,
            &sym,
            loss_mode,
            learning_rate_at(cfg, iter),
            Some(&mut rng),
        );
        history.losses.push(loss);
        if iter % cfg.validate_every == 0 {
            let snapshot = model.ema_snapshot();
            let err = joint_error_rate(&snapshot, val_set);
            history.validations.push(ValidationPoint {
                iter,
                joint_error_rate: err,
            });
            let improved = best.as_ref().is_none_or(|(b, _)| err < *b);
            if improved {
                best = Some((err, snapshot));
                history.best_iter = iter;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    let model = match best {
        Some((_, snapshot)) => snapshot,
        None => model.ema_snapshot(),
    };
    TrainOutcome { model, history }
}
