//! Monte-Carlo mutual information for the finite-alphabet channel and the
//! secrecy rate.
//!
//! The SM channel is discrete-input continuous-output memoryless: its mutual
//! information has no closed form and is estimated by averaging over noise
//! draws. After whitening the (possibly colored) noise, for equiprobable
//! hypotheses `x_1 .. x_K` and `w ~ CN(0, I)`:
//!
//! ```text
//! I = log2 K - (1/K) sum_k E_w[ log2 sum_k' exp(-||d_kk' + w||^2 + ||w||^2) ]
//! ```
//!
//! with `d_kk' = x_k - x_k'` in whitened units. At Eve the AN-plus-thermal
//! noise is Gaussian with an exactly known second-order covariance (the AN is
//! Gaussian by construction), so whitening is exact rather than approximate.

use num_complex::Complex64;

use crate::anpa::AnProjector;
use crate::error::{Error, Result};
use crate::numerics::{
    cholesky_lower, complex_gaussian_sample, pivoted_cholesky, CMatrix, CVector, RngStream,
};
use crate::smcore::{ChannelPair, Constellation, Scheme, SelectionPattern, SystemConfig};

/// Exponent gap below which a hypothesis term cannot affect the log-sum-exp
/// at f64 precision (exp(-45) ~ 3e-20).
const LSE_CUTOFF: f64 = 45.0;

const BOB_STREAM_TAG: u64 = 0xB0B;
const EVE_STREAM_TAG: u64 = 0xE5E;

/// A Monte-Carlo mutual-information estimate in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub value: f64,
    /// Standard error of the mean over noise draws.
    pub std_error: f64,
    pub samples: usize,
}

/// Secrecy rate `max(0, I_Bob - I_Eve)` with both constituents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrEstimate {
    pub sr: f64,
    pub mi_bob: MiEstimate,
    pub mi_eve: MiEstimate,
}

impl SrEstimate {
    /// Combined standard error of the Bob/Eve difference.
    pub fn std_error(&self) -> f64 {
        self.mi_bob
            .std_error
            .hypot(self.mi_eve.std_error)
    }
}

/// Estimates the mutual information of an equiprobable finite alphabet
/// observed in Gaussian noise of covariance `noise_cov`.
///
/// `alphabet` holds the noiseless receive-space points. The estimator whitens
/// with the Cholesky factor of `noise_cov`, maps the whitened points to
/// canonical coordinates of their span (a pivoted Cholesky of their Gram
/// matrix, so alphabets that agree up to a unitary produce identical
/// coordinates), then averages the log-sum-exp statistic over `samples` noise
/// draws. The noise component orthogonal to the span cancels from the
/// statistic exactly, so draws live in the span only. The per-draw statistic
/// (averaged over transmit hypotheses with a shared draw) also yields the
/// standard error. The estimate is clamped to be nonnegative.
pub fn dcmc_mi(
    alphabet: &[CVector],
    noise_cov: &CMatrix,
    stream: RngStream,
    samples: usize,
) -> Result<MiEstimate> {
    let k = alphabet.len();
    assert!(k >= 1, "alphabet must be nonempty");
    assert!(samples >= 1, "samples must be positive");
    let l = cholesky_lower(noise_cov)?;
    let whitened: Vec<CVector> = alphabet
        .iter()
        .map(|p| {
            l.solve_lower_triangular(p)
                .expect("Cholesky factor is nonsingular")
        })
        .collect();

    // Canonical span coordinates: Gram = X^H X with X (rank x K) from a
    // pivoted Cholesky.
    let mut gram = CMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = whitened[i].dotc(&whitened[j]);
        }
    }
    let (lg, rank) = pivoted_cholesky(&gram, 1e-12);
    let coords = lg.adjoint(); // rank x K, column k = coordinates of point k
    let dim = rank;

    // Flattened pairwise differences: for pair (i, j) the interleaved
    // re/im components of d_ij, plus the constant -||d_ij||^2 term.
    let mut diff = vec![0.0f64; k * k * 2 * dim];
    let mut neg_dist_sq = vec![0.0f64; k * k];
    for i in 0..k {
        for j in 0..k {
            let base = (i * k + j) * 2 * dim;
            let mut nd = 0.0;
            for l_idx in 0..dim {
                let d = coords[(l_idx, i)] - coords[(l_idx, j)];
                diff[base + 2 * l_idx] = d.re;
                diff[base + 2 * l_idx + 1] = d.im;
                nd += d.norm_sqr();
            }
            neg_dist_sq[i * k + j] = -nd;
        }
    }

    let log2_k = (k as f64).log2();
    let inv_ln2 = std::f64::consts::LOG2_E;
    let mut rng = stream.rng();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut w = vec![0.0f64; 2 * dim];
    let mut exponents = vec![0.0f64; k];
    for _ in 0..samples {
        for slot in w.chunks_exact_mut(2) {
            let z = complex_gaussian_sample(&mut rng, 1.0);
            slot[0] = z.re;
            slot[1] = z.im;
        }
        let mut draw_stat = 0.0;
        for i in 0..k {
            let mut max_e = f64::NEG_INFINITY;
            for j in 0..k {
                let base = (i * k + j) * 2 * dim;
                let mut cross = 0.0;
                for l_idx in 0..2 * dim {
                    cross += diff[base + l_idx] * w[l_idx];
                }
                // -||d + w||^2 + ||w||^2 = -||d||^2 - 2 Re(d^H w)
                let e = neg_dist_sq[i * k + j] - 2.0 * cross;
                exponents[j] = e;
                if e > max_e {
                    max_e = e;
                }
            }
            let mut acc = 0.0;
            for &e in &exponents[..k] {
                if e >= max_e - LSE_CUTOFF {
                    acc += (e - max_e).exp();
                }
            }
            draw_stat += (max_e + acc.ln()) * inv_ln2;
        }
        draw_stat /= k as f64;
        sum += draw_stat;
        sum_sq += draw_stat * draw_stat;
    }
    let n = samples as f64;
    let mean = sum / n;
    let std_error = if samples > 1 {
        let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MiEstimate {
        value: (log2_k - mean).max(0.0),
        std_error,
        samples,
    })
}

/// The `N_t * M` noiseless receive-space points `sqrt(beta P_S) H T e_n s_m`,
/// indexed `k = n * M + m`.
pub fn noiseless_alphabet(
    h_eff: &CMatrix,
    constellation: &Constellation,
    signal_amplitude: f64,
) -> Vec<CVector> {
    let n_t = h_eff.ncols();
    let m = constellation.size();
    let mut points = Vec::with_capacity(n_t * m);
    for n in 0..n_t {
        let col = h_eff.column(n);
        for s in 0..m {
            let scale = constellation.point(s) * signal_amplitude;
            points.push(col.map(|h| h * scale));
        }
    }
    points
}

/// Eve's exact noise-plus-AN covariance:
/// `(1 - beta) P_S (H_e T P_AN)(H_e T P_AN)^H / d + sigma2_e I`.
pub fn eve_noise_covariance(
    h_eff_e: &CMatrix,
    proj: Option<&AnProjector>,
    cfg: &SystemConfig,
) -> CMatrix {
    let n_re = h_eff_e.nrows();
    let mut cov = CMatrix::identity(n_re, n_re) * Complex64::new(cfg.sigma2_e, 0.0);
    if cfg.beta < 1.0 {
        if let Some(p) = proj {
            let g = h_eff_e * p.matrix();
            let scale =
                (1.0 - cfg.beta) * cfg.p_s * p.normalization().powi(2) / p.an_dim() as f64;
            cov += (&g * g.adjoint()) * Complex64::new(scale, 0.0);
        }
    }
    cov
}

/// Secrecy rate of the link for a given antenna pattern and projector.
///
/// Bob's noise covariance is `sigma2_b I` (the AN is nulled at Bob); Eve's is
/// the colored AN-plus-thermal covariance. Both mutual informations use
/// sub-streams derived from `stream`, so calls with a common stream share
/// their noise draws (common random numbers).
pub fn secrecy_rate(
    chan: &ChannelPair,
    sel: &SelectionPattern,
    proj: Option<&AnProjector>,
    cfg: &SystemConfig,
    stream: RngStream,
    samples: usize,
) -> Result<SrEstimate> {
    if cfg.beta < 1.0 && proj.is_none() {
        return Err(Error::ProjectorRequired);
    }
    let constellation = Constellation::new(Scheme::for_size(cfg.m)?);
    let amplitude = (cfg.beta * cfg.p_s).sqrt();

    let h_eff_b = sel.effective_channel(&chan.h_b);
    let alphabet_b = noiseless_alphabet(&h_eff_b, &constellation, amplitude);
    let cov_b = CMatrix::identity(cfg.n_rb, cfg.n_rb) * Complex64::new(cfg.sigma2_b, 0.0);
    let mi_bob = dcmc_mi(&alphabet_b, &cov_b, stream.substream(BOB_STREAM_TAG), samples)?;

    let h_eff_e = sel.effective_channel(&chan.h_e);
    let alphabet_e = noiseless_alphabet(&h_eff_e, &constellation, amplitude);
    let cov_e = eve_noise_covariance(&h_eff_e, proj, cfg);
    let mi_eve = dcmc_mi(&alphabet_e, &cov_e, stream.substream(EVE_STREAM_TAG), samples)?;

    Ok(SrEstimate {
        sr: (mi_bob.value - mi_eve.value).max(0.0),
        mi_bob,
        mi_eve,
    })
}

/// Secrecy rate, building the AN projector on demand when `beta < 1`.
pub fn secrecy_rate_auto(
    chan: &ChannelPair,
    sel: &SelectionPattern,
    cfg: &SystemConfig,
    stream: RngStream,
    samples: usize,
) -> Result<SrEstimate> {
    let proj = if cfg.beta < 1.0 {
        Some(crate::anpa::build_an_projector(&chan.h_b, sel)?)
    } else {
        None
    };
    secrecy_rate(chan, sel, proj.as_ref(), cfg, stream, samples)
}
