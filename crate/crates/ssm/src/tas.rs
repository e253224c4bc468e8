//! Transmit antenna selection: random, Max-SLNR, generalized EDAS, and
//! exhaustive search over the secrecy rate.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::anpa::AnProjector;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, RngStream};
use crate::secrecy::secrecy_rate_auto;
use crate::smcore::{ChannelPair, Constellation, SelectionPattern, SystemConfig};

/// Pattern budget for EDAS enumeration.
pub const EDAS_PATTERN_LIMIT: u128 = 1_000_000;
/// Pattern budget for exhaustive secrecy-rate search.
pub const EXHAUSTIVE_SR_PATTERN_LIMIT: u128 = 10_000;

/// Selection method tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TasMethod {
    Random,
    MaxSlnr,
    EdasMaxBob,
    EdasMinEve,
    ExhaustiveSr,
}

/// EDAS objective: maximize Bob's minimum distance or minimize Eve's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdasMode {
    MaxBobDmin,
    MinEveDmin,
}

/// A selection outcome with its method-specific objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct TasResult {
    pub pattern: SelectionPattern,
    pub score: f64,
    pub method: TasMethod,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All `N_t`-subsets of `0..n_a` in lexicographic order.
fn patterns(n_a: usize, n_t: usize) -> impl Iterator<Item = SelectionPattern> {
    (0..n_a)
        .combinations(n_t)
        .map(|c| SelectionPattern::new(c).expect("combinations are strictly increasing"))
}

/// Uniformly random selection of `N_t` antennas.
pub fn tas_random(stream: RngStream, cfg: &SystemConfig) -> TasResult {
    let mut rng = stream.rng();
    let mut indices = rand::seq::index::sample(&mut rng, cfg.n_a, cfg.n_t).into_vec();
    indices.sort_unstable();
    TasResult {
        pattern: SelectionPattern::new(indices).expect("sampled indices are distinct"),
        score: 0.0,
        method: TasMethod::Random,
    }
}

/// Per-antenna signal-to-leakage-and-noise ratios.
///
/// `SLNR(i) = beta P_S ||h_b[i]||^2 /
///            (beta P_S ||h_e[i]||^2 + AN power at Eve + n_re sigma2_e)`.
///
/// The AN power term is computed once from the full-array null-space
/// projector; it does not depend on the antenna index, so it shifts every
/// SLNR equally and preserves the ranking.
pub fn slnr_per_antenna(
    chan: &ChannelPair,
    proj_full: Option<&AnProjector>,
    cfg: &SystemConfig,
) -> Vec<f64> {
    let an_term = match proj_full {
        Some(p) if cfg.beta < 1.0 => {
            let g = &chan.h_e * p.matrix();
            (1.0 - cfg.beta) * cfg.p_s * p.normalization().powi(2) * g.norm_squared()
                / p.an_dim() as f64
        }
        _ => 0.0,
    };
    let noise_term = cfg.n_re as f64 * cfg.sigma2_e;
    (0..cfg.n_a)
        .map(|i| {
            let sig = cfg.beta * cfg.p_s * chan.h_b.column(i).norm_squared();
            let leak = cfg.beta * cfg.p_s * chan.h_e.column(i).norm_squared();
            sig / (leak + an_term + noise_term)
        })
        .collect()
}

/// Selects the `N_t` antennas with the largest SLNR (descending sort,
/// index-ascending tie-break). The score is the smallest selected SLNR.
pub fn tas_max_slnr(
    chan: &ChannelPair,
    proj_full: Option<&AnProjector>,
    cfg: &SystemConfig,
) -> TasResult {
    let slnr = slnr_per_antenna(chan, proj_full, cfg);
    let mut order: Vec<usize> = (0..cfg.n_a).collect();
    order.sort_by(|&a, &b| slnr[b].partial_cmp(&slnr[a]).unwrap().then(a.cmp(&b)));
    let mut selected = order[..cfg.n_t].to_vec();
    selected.sort_unstable();
    let score = selected.iter().map(|&i| slnr[i]).fold(f64::INFINITY, f64::min);
    TasResult {
        pattern: SelectionPattern::new(selected).expect("distinct indices"),
        score,
        method: TasMethod::MaxSlnr,
    }
}

/// Minimum squared Euclidean distance between distinct transmit hypotheses
/// seen through `h_eff`: `min ||H T (e_n s_m - e_n' s_m')||^2`.
pub fn min_hypothesis_distance(h_eff: &CMatrix, constellation: &Constellation) -> f64 {
    let n_t = h_eff.ncols();
    let m = constellation.size();
    let k = n_t * m;
    let mut points = Vec::with_capacity(k);
    for n in 0..n_t {
        let col = h_eff.column(n);
        for s in 0..m {
            let scale = constellation.point(s);
            points.push(col.map(|h| h * scale));
        }
    }
    let mut d_min = f64::INFINITY;
    for i in 0..k {
        for j in 0..i {
            d_min = d_min.min((&points[i] - &points[j]).norm_squared());
        }
    }
    d_min
}

/// Generalized Euclidean-distance antenna selection: maximizes Bob's minimum
/// hypothesis distance or minimizes Eve's, over all patterns. Ties keep the
/// lexicographically smallest pattern.
pub fn tas_edas(
    chan: &ChannelPair,
    constellation: &Constellation,
    cfg: &SystemConfig,
    mode: EdasMode,
) -> Result<TasResult> {
    let count = binomial(cfg.n_a, cfg.n_t);
    if count > EDAS_PATTERN_LIMIT {
        return Err(Error::TooManyPatterns {
            n_a: cfg.n_a,
            n_t: cfg.n_t,
            count,
            limit: EDAS_PATTERN_LIMIT,
        });
    }
    let (h, method) = match mode {
        EdasMode::MaxBobDmin => (&chan.h_b, TasMethod::EdasMaxBob),
        EdasMode::MinEveDmin => (&chan.h_e, TasMethod::EdasMinEve),
    };
    let mut best: Option<(SelectionPattern, f64)> = None;
    for pattern in patterns(cfg.n_a, cfg.n_t) {
        let d = min_hypothesis_distance(&pattern.effective_channel(h), constellation);
        let better = match &best {
            None => true,
            Some((_, best_d)) => match mode {
                EdasMode::MaxBobDmin => d > *best_d,
                EdasMode::MinEveDmin => d < *best_d,
            },
        };
        if better {
            best = Some((pattern, d));
        }
    }
    let (pattern, score) = best.expect("at least one pattern");
    Ok(TasResult {
        pattern,
        score,
        method,
    })
}

/// Exhaustive search over patterns maximizing the Monte-Carlo secrecy rate,
/// with common random numbers across patterns. Ties keep the
/// lexicographically smallest pattern.
pub fn tas_exhaustive_sr(
    chan: &ChannelPair,
    cfg: &SystemConfig,
    stream: RngStream,
    samples: usize,
) -> Result<TasResult> {
    let count = binomial(cfg.n_a, cfg.n_t);
    if count > EXHAUSTIVE_SR_PATTERN_LIMIT {
        return Err(Error::TooManyPatterns {
            n_a: cfg.n_a,
            n_t: cfg.n_t,
            count,
            limit: EXHAUSTIVE_SR_PATTERN_LIMIT,
        });
    }
    let mut best: Option<(SelectionPattern, f64)> = None;
    for pattern in patterns(cfg.n_a, cfg.n_t) {
        let sr = secrecy_rate_auto(chan, &pattern, cfg, stream, samples)?.sr;
        if best.as_ref().is_none_or(|(_, b)| sr > *b) {
            best = Some((pattern, sr));
        }
    }
    let (pattern, score) = best.expect("at least one pattern");
    Ok(TasResult {
        pattern,
        score,
        method: TasMethod::ExhaustiveSr,
    })
}
