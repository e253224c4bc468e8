//! Classical joint detectors at the desired receiver: maximum likelihood,
//! zero forcing, and MMSE, plus FLOP accounting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_solve, pseudo_inverse, CMatrix, CVector};
use crate::smcore::{Constellation, SystemConfig};

/// Joint decision on the active antenna and the constellation symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorResult {
    pub n_hat: usize,
    pub m_hat: usize,
}

/// Detector tags for complexity accounting and sweep configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Ml,
    Zf,
    Mmse,
}

/// Candidate count and FLOP estimate for a detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityEstimate {
    pub candidates: usize,
    pub flops: usize,
}

/// Joint maximum-likelihood detection:
/// `argmin_(n,m) || y - sqrt(beta P_S) h_eff e_n s_m ||^2`.
/// Ties keep the smallest `(n, m)` in lexicographic order.
pub fn ml_detect(
    y: &CVector,
    h_eff: &CMatrix,
    constellation: &Constellation,
    cfg: &SystemConfig,
) -> DetectorResult {
    let amplitude = (cfg.beta * cfg.p_s).sqrt();
    let n_t = h_eff.ncols();
    let mut best = DetectorResult { n_hat: 0, m_hat: 0 };
    let mut best_metric = f64::INFINITY;
    let mut residual = CVector::zeros(y.len());
    for n in 0..n_t {
        let col = h_eff.column(n);
        for m in 0..constellation.size() {
            let s = constellation.point(m) * amplitude;
            for r in 0..y.len() {
                residual[r] = y[r] - col[r] * s;
            }
            let metric = residual.norm_squared();
            if metric < best_metric {
                best_metric = metric;
                best = DetectorResult { n_hat: n, m_hat: m };
            }
        }
    }
    best
}

/// Two-stage antenna/symbol decision from an equalized estimate: the antenna
/// with the largest magnitude, then the nearest constellation point on it.
/// Ties keep the smallest index.
fn decide_from_estimate(x_hat: &CVector, constellation: &Constellation) -> DetectorResult {
    let mut n_hat = 0;
    let mut best_mag = f64::NEG_INFINITY;
    for (i, v) in x_hat.iter().enumerate() {
        let mag = v.norm_sqr();
        if mag > best_mag {
            best_mag = mag;
            n_hat = i;
        }
    }
    DetectorResult {
        n_hat,
        m_hat: constellation.nearest(x_hat[n_hat]),
    }
}

/// Zero-forcing detection: pseudo-inverse equalization followed by the
/// two-stage antenna/symbol decision.
pub fn zf_detect(
    y: &CVector,
    h_eff: &CMatrix,
    constellation: &Constellation,
    cfg: &SystemConfig,
) -> DetectorResult {
    let pinv = pseudo_inverse(h_eff, 1e-12);
    let scale = Complex64::new(1.0 / (cfg.beta * cfg.p_s).sqrt(), 0.0);
    let x_hat = pinv * y * scale;
    decide_from_estimate(&x_hat, constellation)
}

/// MMSE detection:
/// `x_hat = (h^H h + (sigma2 / (beta P_S)) I)^-1 h^H y / sqrt(beta P_S)`,
/// then the two-stage decision. The regularized Gram matrix is positive
/// definite for any `sigma2 > 0`.
pub fn mmse_detect(
    y: &CVector,
    h_eff: &CMatrix,
    constellation: &Constellation,
    cfg: &SystemConfig,
) -> DetectorResult {
    assert!(cfg.sigma2_b > 0.0, "MMSE requires positive noise variance");
    let n_t = h_eff.ncols();
    let reg = cfg.sigma2_b / (cfg.beta * cfg.p_s);
    let a = h_eff.adjoint() * h_eff + CMatrix::identity(n_t, n_t) * Complex64::new(reg, 0.0);
    let rhs = h_eff.adjoint() * y;
    let z = hermitian_solve(&a, &CMatrix::from_column_slice(n_t, 1, rhs.as_slice()))
        .expect("regularized Gram matrix is positive definite");
    let scale = Complex64::new(1.0 / (cfg.beta * cfg.p_s).sqrt(), 0.0);
    let x_hat = CVector::from_column_slice(z.as_slice()) * scale;
    decide_from_estimate(&x_hat, constellation)
}

/// Candidate and FLOP counts per channel use.
///
/// Counting convention: a complex multiply-accumulate is 8 FLOPs and a
/// squared magnitude accumulate is 2 FLOPs. The ML detector evaluates
/// `N_t * M` candidates at `8 n_r + 2 n_r` FLOPs each; ZF/MMSE apply one
/// precomputed `n_t x n_r` filter (`8 n_r n_t` FLOPs, filter formation
/// excluded) and then make `N_t + M` comparisons at 2 FLOPs each.
pub fn complexity_of(detector: DetectorKind, cfg: &SystemConfig) -> ComplexityEstimate {
    match detector {
        DetectorKind::Ml => {
            let candidates = cfg.n_t * cfg.m;
            ComplexityEstimate {
                candidates,
                flops: candidates * (8 * cfg.n_rb + 2 * cfg.n_rb),
            }
        }
        DetectorKind::Zf | DetectorKind::Mmse => {
            let comparisons = cfg.n_t + cfg.m;
            ComplexityEstimate {
                candidates: comparisons,
                flops: 8 * cfg.n_rb * cfg.n_t + 2 * comparisons,
            }
        }
    }
}

/// Parses a detector tag from its kebab-case name.
pub fn detector_from_name(name: &str) -> Result<DetectorKind> {
    match name {
        "ml" => Ok(DetectorKind::Ml),
        "zf" => Ok(DetectorKind::Zf),
        "mmse" => Ok(DetectorKind::Mmse),
        other => Err(Error::UnknownDetector(other.to_string())),
    }
}
