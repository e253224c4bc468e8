//! SM bit mapping, constellations, and the physical-layer transmit/receive
//! model.
//!
//! A channel use carries `log2(N_t) + log2(M)` source bits: the first group
//! selects the active antenna (natural binary over the sorted selection
//! pattern), the second group selects a Gray-labeled constellation symbol.
//! The transmit vector superimposes the confidential symbol and an
//! artificial-noise component weighted by the power-allocation factor `beta`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anpa::AnProjector;
use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian_matrix, complex_gaussian_vector, CMatrix, CVector};

/// Scalar parameters of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Total transmit antennas at Alice.
    pub n_a: usize,
    /// Selected antennas used for index mapping (a power of two).
    pub n_t: usize,
    /// Receive antennas at Bob.
    pub n_rb: usize,
    /// Receive antennas at Eve.
    pub n_re: usize,
    /// Constellation size.
    pub m: usize,
    /// Total transmit power constraint (linear).
    pub p_s: f64,
    /// Power-allocation factor: fraction of `p_s` carrying the confidential
    /// message; the remaining `1 - beta` feeds the AN component.
    pub beta: f64,
    /// Per-antenna noise variance at Bob.
    pub sigma2_b: f64,
    /// Per-antenna noise variance at Eve.
    pub sigma2_e: f64,
}

impl SystemConfig {
    /// Config with `n_t` auto-derived as the largest power of two not
    /// exceeding `n_a`.
    pub fn new(
        n_a: usize,
        n_rb: usize,
        n_re: usize,
        m: usize,
        p_s: f64,
        beta: f64,
        sigma2_b: f64,
        sigma2_e: f64,
    ) -> Result<Self> {
        let cfg = Self {
            n_a,
            n_t: derive_nt(n_a),
            n_rb,
            n_re,
            m,
            p_s,
            beta,
            sigma2_b,
            sigma2_e,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_rb == 0 || self.n_re == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        if self.n_t == 0 || !self.n_t.is_power_of_two() || self.n_t > self.n_a {
            return Err(Error::Config(format!(
                "n_t = {} must be a power of two <= n_a = {}",
                self.n_t, self.n_a
            )));
        }
        if self.m < 2 || !self.m.is_power_of_two() {
            return Err(Error::Config(format!(
                "constellation size m = {} must be a power of two >= 2",
                self.m
            )));
        }
        if self.p_s <= 0.0 {
            return Err(Error::OutOfRange {
                name: "p_s",
                value: self.p_s,
                range: "(0, inf)",
            });
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::OutOfRange {
                name: "beta",
                value: self.beta,
                range: "[0, 1]",
            });
        }
        if self.sigma2_b <= 0.0 || self.sigma2_e <= 0.0 {
            return Err(Error::Config("noise variances must be positive".into()));
        }
        Ok(())
    }

    /// Copy with a different power-allocation factor.
    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    /// Copy with both receivers' noise variances set to `p_s / snr_linear`,
    /// i.e. SNR defined as total transmit power over per-antenna noise power.
    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        let sigma2 = self.p_s / 10f64.powf(snr_db / 10.0);
        Self {
            sigma2_b: sigma2,
            sigma2_e: sigma2,
            ..self.clone()
        }
    }

    /// Antenna index bits per channel use.
    pub fn antenna_bits(&self) -> u32 {
        self.n_t.trailing_zeros()
    }

    /// Symbol bits per channel use.
    pub fn symbol_bits(&self) -> u32 {
        self.m.trailing_zeros()
    }

    /// Source bits per channel use.
    pub fn bits_per_use(&self) -> u32 {
        self.antenna_bits() + self.symbol_bits()
    }
}

/// Largest power of two not exceeding `n_a`: the number of antennas usable
/// for index mapping.
pub fn derive_nt(n_a: usize) -> usize {
    assert!(n_a >= 1);
    1 << (usize::BITS - 1 - n_a.leading_zeros())
}

/// Spectral efficiency in bits per channel use.
pub fn spectral_efficiency(cfg: &SystemConfig) -> f64 {
    (cfg.n_t as f64).log2() + (cfg.m as f64).log2()
}

/// Built-in constellation schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Bpsk,
    Qpsk,
    #[serde(rename = "16QAM")]
    Qam16,
}

impl Scheme {
    pub fn size(&self) -> usize {
        match self {
            Scheme::Bpsk => 2,
            Scheme::Qpsk => 4,
            Scheme::Qam16 => 16,
        }
    }

    /// Scheme matching a constellation size.
    pub fn for_size(m: usize) -> Result<Self> {
        match m {
            2 => Ok(Scheme::Bpsk),
            4 => Ok(Scheme::Qpsk),
            16 => Ok(Scheme::Qam16),
            _ => Err(Error::Config(format!("no built-in constellation of size {m}"))),
        }
    }
}

/// A unit-mean-power constellation with Gray-coded bit labels.
///
/// `points[m]` is the symbol whose bit label is the binary expansion of `m`;
/// Gray coding is realized geometrically, so labels of nearest-neighbor
/// points differ in exactly one bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    scheme: Scheme,
}

/// Decodes a binary-reflected Gray code.
fn gray_decode(mut g: usize) -> usize {
    let mut n = 0;
    while g != 0 {
        n ^= g;
        g >>= 1;
    }
    n
}

impl Constellation {
    pub fn new(scheme: Scheme) -> Self {
        let points = match scheme {
            Scheme::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Scheme::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                (0..4)
                    .map(|label| {
                        let i = 1.0 - 2.0 * ((label >> 1) & 1) as f64;
                        let q = 1.0 - 2.0 * (label & 1) as f64;
                        Complex64::new(i * s, q * s)
                    })
                    .collect()
            }
            Scheme::Qam16 => {
                // Per-axis Gray labeling over levels {-3, -1, 1, 3} / sqrt(10).
                let levels = [-3.0, -1.0, 1.0, 3.0];
                let s = 1.0 / 10f64.sqrt();
                (0..16)
                    .map(|label| {
                        let i = levels[gray_decode((label >> 2) & 0b11)];
                        let q = levels[gray_decode(label & 0b11)];
                        Complex64::new(i * s, q * s)
                    })
                    .collect()
            }
        };
        Self { points, scheme }
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn point(&self, m: usize) -> Complex64 {
        self.points[m]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Index of the constellation point nearest to `z` (smallest index on ties).
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
        best
    }

    /// Mean symbol power `(1/M) sum |s_m|^2`.
    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

/// One channel use worth of source bits mapped to an (antenna, symbol) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxWord {
    /// Antenna index within the selection pattern, in `[0, N_t)`.
    pub n: usize,
    /// Symbol index (equals the symbol's Gray bit label), in `[0, M)`.
    pub m: usize,
    /// The source bits, antenna bits in the high positions.
    pub bits: u32,
}

/// Maps a bit word to an (antenna, symbol) pair. The first `log2(N_t)` bits
/// select the antenna in natural binary; the remaining `log2(M)` bits are the
/// symbol's Gray label.
pub fn map_bits(bits: u32, cfg: &SystemConfig) -> Result<TxWord> {
    let width = cfg.bits_per_use();
    if bits >> width != 0 {
        return Err(Error::WrongBitCount {
            expected: width,
            actual: 32 - bits.leading_zeros(),
        });
    }
    let n = (bits >> cfg.symbol_bits()) as usize;
    let m = (bits & (cfg.m as u32 - 1)) as usize;
    Ok(TxWord { n, m, bits })
}

/// Inverse of [`map_bits`].
pub fn demap_word(n: usize, m: usize, cfg: &SystemConfig) -> u32 {
    debug_assert!(n < cfg.n_t && m < cfg.m);
    ((n as u32) << cfg.symbol_bits()) | m as u32
}

/// Uniformly random transmit word.
pub fn random_word<R: Rng>(rng: &mut R, cfg: &SystemConfig) -> TxWord {
    let bits = rng.random_range(0..(1u32 << cfg.bits_per_use()));
    map_bits(bits, cfg).expect("in-range word")
}

/// Complex channel matrices from Alice to Bob and to Eve.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    /// `n_rb x n_a` channel to Bob.
    pub h_b: CMatrix,
    /// `n_re x n_a` channel to Eve.
    pub h_e: CMatrix,
}

impl ChannelPair {
    /// Unit-variance Rayleigh fading draw for both links.
    pub fn rayleigh<R: Rng>(rng: &mut R, cfg: &SystemConfig) -> Self {
        Self {
            h_b: complex_gaussian_matrix(rng, cfg.n_rb, cfg.n_a, 1.0),
            h_e: complex_gaussian_matrix(rng, cfg.n_re, cfg.n_a, 1.0),
        }
    }
}

/// Which receiver observes the channel use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    Bob,
    Eve,
}

/// An ordered choice of `N_t` distinct antenna indices out of `N_a`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SelectionPattern {
    indices: Vec<usize>,
}

impl SelectionPattern {
    /// Builds a pattern from strictly increasing indices.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "selection pattern {indices:?} must be strictly increasing and nonempty"
            )));
        }
        Ok(Self { indices })
    }

    /// The pattern selecting antennas `0..n_t`.
    pub fn first(n_t: usize) -> Self {
        Self {
            indices: (0..n_t).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The `n_a x n_t` selection matrix `T` with `T[i_k, k] = 1`.
    pub fn selection_matrix(&self, n_a: usize) -> CMatrix {
        let mut t = CMatrix::zeros(n_a, self.indices.len());
        for (k, &i) in self.indices.iter().enumerate() {
            t[(i, k)] = Complex64::new(1.0, 0.0);
        }
        t
    }

    /// Effective channel `H * T`: the selected columns of `h`.
    pub fn effective_channel(&self, h: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(h.nrows(), self.indices.len());
        for (k, &i) in self.indices.iter().enumerate() {
            out.column_mut(k).copy_from(&h.column(i));
        }
        out
    }
}

/// The per-channel-use random draws: the AN vector and the receiver noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelUseDraw {
    /// AN samples, i.i.d. `CN(0, 1/d)` with `d = cols(P_AN)`, so the
    /// projected AN has unit mean power. Empty when no AN is transmitted.
    pub an: CVector,
    /// Receiver thermal noise, i.i.d. `CN(0, sigma2)`.
    pub rx_noise: CVector,
}

/// Draws the AN vector and receiver noise for one channel use.
pub fn draw_channel_use<R: Rng>(
    rng: &mut R,
    an_dim: usize,
    n_r: usize,
    sigma2: f64,
) -> ChannelUseDraw {
    let an = if an_dim == 0 {
        CVector::zeros(0)
    } else {
        complex_gaussian_vector(rng, an_dim, 1.0 / an_dim as f64)
    };
    ChannelUseDraw {
        an,
        rx_noise: complex_gaussian_vector(rng, n_r, sigma2),
    }
}

/// Builds the transmit vector
/// `x = sqrt(beta P_S) e_n s_m + sqrt((1 - beta) P_S) P_AN n`.
///
/// With the projector's column orthonormality and the AN draw statistics,
/// `E[||x||^2] = P_S` for any `beta`.
pub fn build_transmit(
    word: &TxWord,
    constellation: &Constellation,
    proj: Option<&AnProjector>,
    draw: &ChannelUseDraw,
    cfg: &SystemConfig,
) -> Result<CVector> {
    let mut x = CVector::zeros(cfg.n_t);
    if cfg.beta > 0.0 {
        x[word.n] = constellation.point(word.m) * (cfg.beta * cfg.p_s).sqrt();
    }
    if cfg.beta < 1.0 {
        let proj = proj.ok_or(Error::ProjectorRequired)?;
        if proj.matrix().nrows() != cfg.n_t {
            return Err(Error::DimensionMismatch {
                context: "build_transmit projector",
                expected: format!("{} rows", cfg.n_t),
                actual: format!("{} rows", proj.matrix().nrows()),
            });
        }
        if draw.an.len() != proj.an_dim() {
            return Err(Error::DimensionMismatch {
                context: "build_transmit AN draw",
                expected: format!("{}", proj.an_dim()),
                actual: format!("{}", draw.an.len()),
            });
        }
        let an_part = proj.matrix() * &draw.an;
        let scale = ((1.0 - cfg.beta) * cfg.p_s).sqrt() * proj.normalization();
        x += an_part * Complex64::new(scale, 0.0);
    }
    Ok(x)
}

/// The receive signal
/// `y = sqrt(beta P_S) H T e_n s_m + sqrt((1 - beta) P_S) H T P_AN n + n_r`
/// at Bob or Eve.
#[allow(clippy::too_many_arguments)]
pub fn receive(
    word: &TxWord,
    constellation: &Constellation,
    chan: &ChannelPair,
    sel: &SelectionPattern,
    proj: Option<&AnProjector>,
    draw: &ChannelUseDraw,
    cfg: &SystemConfig,
    at: Receiver,
) -> Result<CVector> {
    let h = match at {
        Receiver::Bob => &chan.h_b,
        Receiver::Eve => &chan.h_e,
    };
    let h_eff = sel.effective_channel(h);
    if draw.rx_noise.len() != h_eff.nrows() {
        return Err(Error::DimensionMismatch {
            context: "receive noise",
            expected: format!("{}", h_eff.nrows()),
            actual: format!("{}", draw.rx_noise.len()),
        });
    }
    let x = build_transmit(word, constellation, proj, draw, cfg)?;
    Ok(&h_eff * x + &draw.rx_noise)
}
