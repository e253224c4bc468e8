//! Seeded parallel Monte-Carlo sweeps.
//!
//! Every trial derives its RNG stream from `(seed, snr index, trial index)`,
//! so outcomes are independent of worker count and scheduling; reductions
//! fold the ordered trial results sequentially. Method comparisons inside one
//! sweep reuse identical channel and noise draws per trial (common random
//! numbers).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anpa::{
    build_an_projector, pa_exhaustive, pa_fixed, pa_gradient, pa_max_p_sinr_ansnr, AnProjector,
};
use crate::detectors::{ml_detect, mmse_detect, zf_detect};
use crate::dnn::{load_checkpoint, TrainedDetector};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::secrecy::secrecy_rate_auto;
use crate::smcore::{
    demap_word, draw_channel_use, random_word, receive, ChannelPair, Constellation, Receiver,
    Scheme, SelectionPattern, SystemConfig,
};
use crate::tas::{tas_edas, tas_exhaustive_sr, tas_max_slnr, tas_random, EdasMode, TasMethod};

use super::config::{DetectorSpec, ExperimentConfig, PaMethodSpec};

/// Trials per scheduling chunk; stopping rules are checked on chunk
/// boundaries so early stopping cannot depend on worker count.
const CHUNK: u64 = 2048;

const TRIAL_TAG: u64 = 0x7217;
const SELECT_TAG: u64 = 0x5E1;
const EVAL_TAG: u64 = 0xE7A1;

/// Which quantity a result row reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Ber,
    Sr,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "BER" => Ok(Metric::Ber),
            "SR" => Ok(Metric::Sr),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Ber => "BER",
            Metric::Sr => "SR",
        })
    }
}

/// One aggregated point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub metric: Metric,
    pub method: String,
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub errors: u64,
    pub seed: u64,
}

/// All points of a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// RNG stream of one trial: fully determined by seed, SNR index and trial
/// index.
fn trial_stream(seed: u64, snr_idx: usize, trial_idx: u64) -> RngStream {
    RngStream::new(seed)
        .substream(TRIAL_TAG)
        .substream(snr_idx as u64)
        .substream(trial_idx)
}

/// Antenna pattern for a trial. Selection methods that need randomness use
/// the trial's selection sub-stream.
fn select_pattern(
    method: Option<TasMethod>,
    chan: &ChannelPair,
    cfg: &SystemConfig,
    constellation: &Constellation,
    stream: RngStream,
    mc_samples: usize,
) -> Result<SelectionPattern> {
    let sel_stream = stream.substream(SELECT_TAG);
    Ok(match method {
        None => SelectionPattern::first(cfg.n_t),
        Some(TasMethod::Random) => tas_random(sel_stream, cfg).pattern,
        Some(TasMethod::MaxSlnr) => {
            let proj_full = (cfg.beta < 1.0 && cfg.n_rb < cfg.n_a)
                .then(|| AnProjector::from_effective_channel(&chan.h_b))
                .transpose()?;
            tas_max_slnr(chan, proj_full.as_ref(), cfg).pattern
        }
        Some(TasMethod::EdasMaxBob) => {
            tas_edas(chan, constellation, cfg, EdasMode::MaxBobDmin)?.pattern
        }
        Some(TasMethod::EdasMinEve) => {
            tas_edas(chan, constellation, cfg, EdasMode::MinEveDmin)?.pattern
        }
        Some(TasMethod::ExhaustiveSr) => {
            tas_exhaustive_sr(chan, cfg, stream.substream(EVAL_TAG), mc_samples)?.pattern
        }
    })
}

/// Loaded detector list for a BER sweep.
enum BerDetector {
    Ml,
    Zf,
    Mmse,
    Dnn(Box<TrainedDetector>),
}

impl BerDetector {
    fn load(spec: &DetectorSpec) -> Result<Self> {
        Ok(match spec {
            DetectorSpec::Ml => BerDetector::Ml,
            DetectorSpec::Zf => BerDetector::Zf,
            DetectorSpec::Mmse => BerDetector::Mmse,
            DetectorSpec::Dnn { path } => {
                let (detector, _) = load_checkpoint(path)?;
                BerDetector::Dnn(Box::new(detector))
            }
        })
    }
}

/// BER versus SNR for every configured detector, with paired trials.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let specs = cfg
        .detectors
        .as_ref()
        .ok_or_else(|| Error::Config("simulate-ber needs a detectors list".into()))?;
    if specs.is_empty() {
        return Err(Error::Config("detectors list is empty".into()));
    }
    let detectors: Vec<BerDetector> = specs.iter().map(BerDetector::load).collect::<Result<_>>()?;
    let names: Vec<String> = specs.iter().map(|s| s.method_name()).collect();
    // No AN is possible without a null space at Bob.
    let mut system = cfg.system.clone();
    if system.n_rb >= system.n_t {
        system.beta = 1.0;
    }
    let constellation = Constellation::new(Scheme::for_size(system.m)?);
    let pool = thread_pool(cfg.workers)?;
    let bits_per_trial = system.bits_per_use() as u64;
    let mut rows = Vec::new();

    for (snr_idx, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let point_cfg = system.with_snr_db(snr_db);
        let n_det = detectors.len();
        let mut err_sum = vec![0u64; n_det];
        let mut err_sum_sq = vec![0.0f64; n_det];
        let mut done: u64 = 0;
        while done < cfg.trials {
            let end = (done + CHUNK).min(cfg.trials);
            let chunk: Vec<Vec<u32>> = pool.install(|| {
                (done..end)
                    .into_par_iter()
                    .map(|t| {
                        ber_trial(
                            cfg.seed,
                            snr_idx,
                            t,
                            &point_cfg,
                            &constellation,
                            cfg.tas_method,
                            cfg.mc_samples,
                            &detectors,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            for trial_errs in &chunk {
                for (k, &e) in trial_errs.iter().enumerate() {
                    err_sum[k] += e as u64;
                    err_sum_sq[k] += (e as f64) * (e as f64);
                }
            }
            done = end;
            if let Some(target) = cfg.target_errors {
                if err_sum.iter().all(|&e| e >= target) {
                    break;
                }
            }
        }
        let bits = done * bits_per_trial;
        for (k, name) in names.iter().enumerate() {
            let n = done as f64;
            let mean_errs = err_sum[k] as f64 / n;
            let var = if done > 1 {
                ((err_sum_sq[k] - n * mean_errs * mean_errs) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            let se = (var / n).sqrt() / bits_per_trial as f64;
            rows.push(SweepRow {
                snr_db,
                metric: Metric::Ber,
                method: name.clone(),
                value: err_sum[k] as f64 / bits as f64,
                std_error: se,
                trials: done,
                errors: err_sum[k],
                seed: cfg.seed,
            });
        }
    }
    Ok(SweepResult { rows })
}

/// One paired BER trial: a fresh channel, word and noise, detected by every
/// configured detector. Returns bit errors per detector.
#[allow(clippy::too_many_arguments)]
fn ber_trial(
    seed: u64,
    snr_idx: usize,
    trial_idx: u64,
    cfg: &SystemConfig,
    constellation: &Constellation,
    tas_method: Option<TasMethod>,
    mc_samples: usize,
    detectors: &[BerDetector],
) -> Result<Vec<u32>> {
    let stream = trial_stream(seed, snr_idx, trial_idx);
    let mut rng = stream.rng();
    let chan = ChannelPair::rayleigh(&mut rng, cfg);
    let sel = select_pattern(tas_method, &chan, cfg, constellation, stream, mc_samples)?;
    let proj = if cfg.beta < 1.0 {
        Some(build_an_projector(&chan.h_b, &sel)?)
    } else {
        None
    };
    let word = random_word(&mut rng, cfg);
    let an_dim = proj.as_ref().map_or(0, |p| p.an_dim());
    let draw = draw_channel_use(&mut rng, an_dim, cfg.n_rb, cfg.sigma2_b);
    let y = receive(
        &word,
        constellation,
        &chan,
        &sel,
        proj.as_ref(),
        &draw,
        cfg,
        Receiver::Bob,
    )?;
    let h_eff = sel.effective_channel(&chan.h_b);
    detectors
        .iter()
        .map(|d| {
            let decision = match d {
                BerDetector::Ml => ml_detect(&y, &h_eff, constellation, cfg),
                BerDetector::Zf => zf_detect(&y, &h_eff, constellation, cfg),
                BerDetector::Mmse => mmse_detect(&y, &h_eff, constellation, cfg),
                BerDetector::Dnn(t) => t.detect(&y, &h_eff)?,
            };
            let bits = demap_word(decision.n_hat, decision.m_hat, cfg);
            Ok((bits ^ word.bits).count_ones())
        })
        .collect()
}

/// A method compared by an SR sweep: either a selection rule (PA fixed by the
/// system config) or a PA strategy (pattern fixed by `tas_method`).
#[derive(Debug, Clone, PartialEq)]
pub enum SrMethod {
    Tas(TasMethod),
    Pa(PaMethodSpec),
}

impl SrMethod {
    pub fn method_name(&self) -> String {
        match self {
            SrMethod::Tas(t) => match t {
                TasMethod::Random => "random".into(),
                TasMethod::MaxSlnr => "max-slnr".into(),
                TasMethod::EdasMaxBob => "edas-max-bob".into(),
                TasMethod::EdasMinEve => "edas-min-eve".into(),
                TasMethod::ExhaustiveSr => "exhaustive-sr".into(),
            },
            SrMethod::Pa(p) => p.method_name(),
        }
    }
}

/// Mean secrecy rate versus SNR for each method, averaged over channel
/// realizations with common random numbers across methods.
pub fn run_sr_sweep(cfg: &ExperimentConfig, methods: &[SrMethod]) -> Result<SweepResult> {
    if methods.is_empty() {
        return Err(Error::Config("no SR methods to compare".into()));
    }
    let constellation = Constellation::new(Scheme::for_size(cfg.system.m)?);
    let pool = thread_pool(cfg.workers)?;
    let mut rows = Vec::new();
    for (snr_idx, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let point_cfg = cfg.system.with_snr_db(snr_db);
        let per_trial: Vec<Vec<f64>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    sr_trial(
                        cfg.seed,
                        snr_idx,
                        t,
                        &point_cfg,
                        &constellation,
                        cfg.tas_method,
                        cfg.mc_samples,
                        methods,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (k, method) in methods.iter().enumerate() {
            let n = cfg.trials as f64;
            let sum: f64 = per_trial.iter().map(|v| v[k]).sum();
            let mean = sum / n;
            let var = per_trial
                .iter()
                .map(|v| (v[k] - mean) * (v[k] - mean))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            rows.push(SweepRow {
                snr_db,
                metric: Metric::Sr,
                method: method.method_name(),
                value: mean,
                std_error: (var / n).sqrt(),
                trials: cfg.trials,
                errors: 0,
                seed: cfg.seed,
            });
        }
    }
    Ok(SweepResult { rows })
}

/// Secrecy rates of every compared method on one channel realization, all
/// evaluated with the same estimator draws.
#[allow(clippy::too_many_arguments)]
fn sr_trial(
    seed: u64,
    snr_idx: usize,
    trial_idx: u64,
    cfg: &SystemConfig,
    constellation: &Constellation,
    pa_tas_method: Option<TasMethod>,
    mc_samples: usize,
    methods: &[SrMethod],
) -> Result<Vec<f64>> {
    let stream = trial_stream(seed, snr_idx, trial_idx);
    let mut rng = stream.rng();
    let chan = ChannelPair::rayleigh(&mut rng, cfg);
    let eval_stream = stream.substream(EVAL_TAG);
    methods
        .iter()
        .map(|method| match method {
            SrMethod::Tas(tas) => {
                if *tas == TasMethod::ExhaustiveSr {
                    // The search already evaluates every pattern with the
                    // common draws; its score is the winning pattern's SR.
                    Ok(tas_exhaustive_sr(&chan, cfg, eval_stream, mc_samples)?.score)
                } else {
                    let pattern = select_pattern(
                        Some(*tas),
                        &chan,
                        cfg,
                        constellation,
                        stream,
                        mc_samples,
                    )?;
                    Ok(secrecy_rate_auto(&chan, &pattern, cfg, eval_stream, mc_samples)?.sr)
                }
            }
            SrMethod::Pa(spec) => {
                let pattern = select_pattern(
                    pa_tas_method,
                    &chan,
                    cfg,
                    constellation,
                    stream,
                    mc_samples,
                )?;
                let result = match spec {
                    PaMethodSpec::Fixed { beta } => {
                        pa_fixed(&chan, &pattern, cfg, *beta, eval_stream, mc_samples)?
                    }
                    PaMethodSpec::Exhaustive { grid_step } => {
                        pa_exhaustive(&chan, &pattern, cfg, *grid_step, eval_stream, mc_samples)?
                    }
                    PaMethodSpec::Gradient {
                        beta0,
                        step0,
                        iters,
                    } => pa_gradient(
                        &chan, &pattern, cfg, *beta0, *step0, *iters, eval_stream, mc_samples,
                    )?,
                    PaMethodSpec::MaxPSinrAnsnr => {
                        pa_max_p_sinr_ansnr(&chan, &pattern, cfg, eval_stream, mc_samples)?
                    }
                };
                Ok(result.sr)
            }
        })
        .collect()
}
