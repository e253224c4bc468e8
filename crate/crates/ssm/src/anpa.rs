//! Artificial-noise projection and power allocation over the PA factor `beta`.
//!
//! The AN projection matrix is an orthonormal basis of the null space of the
//! effective desired channel `H_b T`, so the AN lands entirely at the
//! eavesdropper. Power-allocation strategies pick the fraction `beta` of the
//! power budget carrying the confidential message; the remainder jams Eve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{orthonormal_null_basis, CMatrix, RngStream};
use crate::secrecy::secrecy_rate;
use crate::smcore::{ChannelPair, SelectionPattern, SystemConfig};

/// Orthonormal AN projection matrix for an effective channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AnProjector {
    matrix: CMatrix,
    normalization: f64,
}

impl AnProjector {
    /// Projector onto the null space of an effective channel (`n_r x n_t`).
    ///
    /// Requires `n_r < n_t`; the basis has `n_t - n_r` columns for a full
    /// row rank channel. Columns are orthonormal, so with AN drawn i.i.d.
    /// `CN(0, 1/d)` the projected AN has unit mean power and `beta` splits
    /// the power budget exactly; `normalization` stays 1.
    pub fn from_effective_channel(h_eff: &CMatrix) -> Result<Self> {
        let (n_r, n_t) = h_eff.shape();
        if n_r >= n_t {
            return Err(Error::NoNullSpace { n_r, n_t });
        }
        let matrix = orthonormal_null_basis(h_eff)?;
        Ok(Self {
            matrix,
            normalization: 1.0,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Number of AN dimensions (columns of the projection matrix).
    pub fn an_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Scale applied to the projected AN so its mean power is 1.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }
}

/// Builds the AN projector for the selected antennas of the desired channel.
pub fn build_an_projector(h_b: &CMatrix, sel: &SelectionPattern) -> Result<AnProjector> {
    AnProjector::from_effective_channel(&sel.effective_channel(h_b))
}

/// Power-allocation strategy tags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaMethod {
    Fixed,
    Exhaustive,
    Gradient,
    MaxPSinrAnsnr,
}

/// Outcome of a power-allocation strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PaResult {
    pub beta: f64,
    /// Secrecy rate at `beta`, in bits per channel use.
    pub sr: f64,
    /// Number of secrecy-rate (or product-objective) evaluations spent.
    pub evaluations: usize,
    pub method: PaMethod,
}

/// Secrecy-rate objective over `beta` with common random numbers: every
/// evaluation reuses the same noise draws, so the profile is a deterministic
/// function once the stream is fixed.
pub struct SrObjective<'a> {
    chan: &'a ChannelPair,
    sel: &'a SelectionPattern,
    cfg: SystemConfig,
    proj: Option<AnProjector>,
    stream: RngStream,
    samples: usize,
}

impl<'a> SrObjective<'a> {
    pub fn new(
        chan: &'a ChannelPair,
        sel: &'a SelectionPattern,
        cfg: &SystemConfig,
        stream: RngStream,
        samples: usize,
    ) -> Result<Self> {
        let proj = if cfg.n_rb < cfg.n_t {
            Some(build_an_projector(&chan.h_b, sel)?)
        } else {
            None
        };
        Ok(Self {
            chan,
            sel,
            cfg: cfg.clone(),
            proj,
            stream,
            samples,
        })
    }

    /// Secrecy rate at `beta` under the common draws.
    pub fn eval(&self, beta: f64) -> Result<f64> {
        if beta < 1.0 && self.proj.is_none() {
            return Err(Error::NoNullSpace {
                n_r: self.cfg.n_rb,
                n_t: self.cfg.n_t,
            });
        }
        let cfg = self.cfg.with_beta(beta);
        Ok(secrecy_rate(
            self.chan,
            self.sel,
            self.proj.as_ref(),
            &cfg,
            self.stream,
            self.samples,
        )?
        .sr)
    }

    pub fn projector(&self) -> Option<&AnProjector> {
        self.proj.as_ref()
    }
}

/// Fixed power allocation: validates `beta` and evaluates the SR once.
pub fn pa_fixed(
    chan: &ChannelPair,
    sel: &SelectionPattern,
    cfg: &SystemConfig,
    beta: f64,
    stream: RngStream,
    samples: usize,
) -> Result<PaResult> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            range: "[0, 1]",
        });
    }
    let obj = SrObjective::new(chan, sel, cfg, stream, samples)?;
    Ok(PaResult {
        beta,
        sr: obj.eval(beta)?,
        evaluations: 1,
        method: PaMethod::Fixed,
    })
}

/// The evaluation grid `{0, grid_step, ..., 1}`.
pub fn beta_grid(grid_step: f64) -> Vec<f64> {
    assert!(grid_step > 0.0 && grid_step <= 0.5);
    let k = (1.0 / grid_step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=k).map(|i| i as f64 * grid_step).collect();
    if 1.0 - grid[k] > 1e-12 {
        grid.push(1.0);
    } else {
        grid[k] = 1.0;
    }
    grid
}

/// Exhaustive grid search for the PA factor under common random numbers.
/// Ties keep the smallest `beta`.
pub fn pa_exhaustive(
    chan: &ChannelPair,
    sel: &SelectionPattern,
    cfg: &SystemConfig,
    grid_step: f64,
    stream: RngStream,
    samples: usize,
) -> Result<PaResult> {
    if !(0.0 < grid_step && grid_step <= 0.5) {
        return Err(Error::OutOfRange {
            name: "grid_step",
            value: grid_step,
            range: "(0, 0.5]",
        });
    }
    let obj = SrObjective::new(chan, sel, cfg, stream, samples)?;
    let grid = beta_grid(grid_step);
    let mut best = (grid[0], obj.eval(grid[0])?);
    for &b in &grid[1..] {
        let sr = obj.eval(b)?;
        if sr > best.1 {
            best = (b, sr);
        }
    }
    Ok(PaResult {
        beta: best.0,
        sr: best.1,
        evaluations: grid.len(),
        method: PaMethod::Exhaustive,
    })
}

/// Projected gradient ascent on a 1-D objective over `[0.01, 0.99]` with a
/// central finite-difference gradient (h = 0.01) and backtracking halving.
/// Returns the best iterate seen: `(x, f(x), evaluations)`.
pub fn gradient_ascent_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    step0: f64,
    iters: usize,
) -> (f64, f64, usize) {
    const H: f64 = 0.01;
    let clamp = |x: f64| x.clamp(0.01, 0.99);
    let mut x = clamp(x0);
    let mut fx = f(x);
    let mut evals = 1;
    let (mut best_x, mut best_f) = (x, fx);
    for _ in 0..iters {
        let xp = clamp(x + H);
        let xm = clamp(x - H);
        let grad = (f(xp) - f(xm)) / (xp - xm);
        evals += 2;
        if grad == 0.0 {
            break;
        }
        let mut step = step0;
        let mut moved = false;
        while step > step0 * 1e-3 {
            let cand = clamp(x + step * grad);
            if cand == x {
                break;
            }
            let fc = f(cand);
            evals += 1;
            if fc > fx {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if fx > best_f {
            best_x = x;
            best_f = fx;
        }
        if !moved {
            break;
        }
    }
    (best_x, best_f, evals)
}

/// Gradient-descent power allocation on the Monte-Carlo SR with common
/// random numbers across all finite-difference evaluations.
#[allow(clippy::too_many_arguments)]
pub fn pa_gradient(
    chan: &ChannelPair,
    sel: &SelectionPattern,
    cfg: &SystemConfig,
    beta0: f64,
    step0: f64,
    iters: usize,
    stream: RngStream,
    samples: usize,
) -> Result<PaResult> {
    if !(0.0 < beta0 && beta0 < 1.0) {
        return Err(Error::OutOfRange {
            name: "beta0",
            value: beta0,
            range: "(0, 1)",
        });
    }
    let obj = SrObjective::new(chan, sel, cfg, stream, samples)?;
    let mut failure = None;
    let (beta, sr, evaluations) = gradient_ascent_1d(
        |b| match obj.eval(b) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        beta0,
        step0,
        iters,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PaResult {
        beta,
        sr,
        evaluations,
        method: PaMethod::Gradient,
    })
}

/// Golden-section maximization of a unimodal function on `[lo, hi]` to an
/// argument tolerance `tol`. Returns `(x, f(x), evaluations)`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    (x, fx, evals + 1)
}

/// Terms of the product objective `SINR_B(beta) * ANSNR_E(beta)`.
#[derive(Debug, Clone, Copy)]
pub struct ProductObjective {
    /// Mean squared column norm of `H_b T`.
    pub g_b: f64,
    /// Mean squared column norm of `H_e T`.
    pub g_e: f64,
    /// Mean projected-AN power at Eve, `E[||H_e T P_AN n||^2]`.
    pub g_an: f64,
    pub p_s: f64,
    pub n_rb: usize,
    pub n_re: usize,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
}

impl ProductObjective {
    pub fn from_link(
        chan: &ChannelPair,
        sel: &SelectionPattern,
        proj: &AnProjector,
        cfg: &SystemConfig,
    ) -> Self {
        let h_eff_b = sel.effective_channel(&chan.h_b);
        let h_eff_e = sel.effective_channel(&chan.h_e);
        let n_t = sel.len() as f64;
        let g = &h_eff_e * proj.matrix();
        Self {
            g_b: h_eff_b.norm_squared() / n_t,
            g_e: h_eff_e.norm_squared() / n_t,
            g_an: g.norm_squared() * proj.normalization().powi(2) / proj.an_dim() as f64,
            p_s: cfg.p_s,
            n_rb: cfg.n_rb,
            n_re: cfg.n_re,
            sigma2_b: cfg.sigma2_b,
            sigma2_e: cfg.sigma2_e,
        }
    }

    /// `f(beta) = SINR_B(beta) * ANSNR_E(beta)`: the product of Bob's SINR
    /// (linear increasing in `beta`) and Eve's AN-to-signal-plus-noise ratio
    /// (decreasing rational), unimodal on `[0, 1]`.
    pub fn eval(&self, beta: f64) -> f64 {
        let sinr_b = beta * self.p_s * self.g_b / (self.n_rb as f64 * self.sigma2_b);
        let ansnr_e = (1.0 - beta) * self.p_s * self.g_an
            / (beta * self.p_s * self.g_e + self.n_re as f64 * self.sigma2_e);
        sinr_b * ansnr_e
    }
}

/// Product-maximizing power allocation: maximizes `SINR_B * ANSNR_E` by
/// golden-section search to `|d beta| < 1e-6`, then evaluates the SR at the
/// optimum. Degenerate links with no AN leakage at Eve fall back to
/// `beta = 0.5`.
pub fn pa_max_p_sinr_ansnr(
    chan: &ChannelPair,
    sel: &SelectionPattern,
    cfg: &SystemConfig,
    stream: RngStream,
    samples: usize,
) -> Result<PaResult> {
    let proj = build_an_projector(&chan.h_b, sel)?;
    let objective = ProductObjective::from_link(chan, sel, &proj, cfg);
    let (beta, evals) = if objective.g_an <= 0.0 {
        (0.5, 0)
    } else {
        let (b, _, evals) = golden_section_max(|b| objective.eval(b), 0.0, 1.0, 1e-6);
        (b, evals)
    };
    let sr = secrecy_rate(chan, sel, Some(&proj), &cfg.with_beta(beta), stream, samples)?.sr;
    Ok(PaResult {
        beta,
        sr,
        evaluations: evals + 1,
        method: PaMethod::MaxPSinrAnsnr,
    })
}
