//! Dataset generation for the neural detectors.
//!
//! Each sample is one simulated channel use at the desired receiver: a fresh
//! effective channel, a uniform transmit word, and receiver noise at an SNR
//! drawn uniformly from the configured grid. The received vector and the
//! vectorized effective channel form the features; the (antenna, symbol)
//! labels are the two classification targets.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{complex_gaussian_matrix, complex_gaussian_vector, CMatrix, CVector, RngStream};
use crate::smcore::{random_word, Constellation, Scheme, SystemConfig};

/// Where dataset channels come from.
#[derive(Debug, Clone)]
pub enum ChannelSource {
    /// A fresh unit-variance Rayleigh effective channel per sample.
    IidRayleigh,
    /// One fixed effective channel for every sample.
    Fixed(CMatrix),
}

/// Per-feature standardization statistics, fitted on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Standardizes a raw feature vector.
    pub fn apply_to(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// A labeled feature matrix for training or evaluation.
#[derive(Debug, Clone)]
pub struct SampleSet {
    /// `n_samples x feature_dim`, raw until [`SampleSet::standardize`] runs.
    pub features: Array2<f64>,
    pub antenna_labels: Vec<usize>,
    pub symbol_labels: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub standardized: bool,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Per-feature mean and standard deviation. Constant features get unit
    /// standard deviation so standardization leaves them at zero.
    pub fn fit_stats(&self) -> FeatureStats {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.feature_dim()];
        let mut std = vec![0.0; self.feature_dim()];
        for j in 0..self.feature_dim() {
            let col = self.features.column(j);
            let m = col.sum() / n;
            let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            mean[j] = m;
            std[j] = if var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
        }
        FeatureStats { mean, std }
    }

    /// Applies standardization in place.
    pub fn standardize(&mut self, stats: &FeatureStats) {
        for j in 0..self.feature_dim() {
            let (m, s) = (stats.mean[j], stats.std[j]);
            for x in self.features.column_mut(j) {
                *x = (*x - m) / s;
            }
        }
        self.standardized = true;
    }

    /// Splits off the first `n_train` samples; the remainder becomes the
    /// second set.
    pub fn split(self, n_train: usize) -> (SampleSet, SampleSet) {
        assert!(n_train <= self.len());
        let d = self.feature_dim();
        let (head, tail) = self.features.view().split_at(ndarray::Axis(0), n_train);
        let make = |f: ndarray::ArrayView2<f64>, a: &[usize], s: &[usize], snr: &[f64]| SampleSet {
            features: f.to_owned(),
            antenna_labels: a.to_vec(),
            symbol_labels: s.to_vec(),
            snr_db: snr.to_vec(),
            standardized: self.standardized,
        };
        let train = make(
            head,
            &self.antenna_labels[..n_train],
            &self.symbol_labels[..n_train],
            &self.snr_db[..n_train],
        );
        let val = make(
            tail,
            &self.antenna_labels[n_train..],
            &self.symbol_labels[n_train..],
            &self.snr_db[n_train..],
        );
        let _ = d;
        (train, val)
    }
}

/// Raw feature vector `[Re y; Im y; Re vec(h_eff); Im vec(h_eff)]` with
/// column-major channel vectorization. Length `2 n_r (1 + n_t)`.
pub fn features_from(y: &CVector, h_eff: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * y.len() + 2 * h_eff.len());
    out.extend(y.iter().map(|z| z.re));
    out.extend(y.iter().map(|z| z.im));
    out.extend(h_eff.iter().map(|z| z.re));
    out.extend(h_eff.iter().map(|z| z.im));
    out
}

/// Generates `n_samples` labeled channel uses. Features are raw; fit and
/// apply [`FeatureStats`] from the training split before feeding a model.
pub fn build_dataset(
    cfg: &SystemConfig,
    source: &ChannelSource,
    snr_grid_db: &[f64],
    n_samples: usize,
    stream: RngStream,
) -> SampleSet {
    assert!(n_samples >= 1);
    assert!(!snr_grid_db.is_empty());
    let constellation = Constellation::new(Scheme::for_size(cfg.m).expect("built-in scheme"));
    let amplitude = (cfg.beta * cfg.p_s).sqrt();
    let dim = 2 * cfg.n_rb * (1 + cfg.n_t);
    let mut rng = stream.rng();
    let mut features = Array2::zeros((n_samples, dim));
    let mut antenna_labels = Vec::with_capacity(n_samples);
    let mut symbol_labels = Vec::with_capacity(n_samples);
    let mut snr_db = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let h_eff = match source {
            ChannelSource::IidRayleigh => {
                complex_gaussian_matrix(&mut rng, cfg.n_rb, cfg.n_t, 1.0)
            }
            ChannelSource::Fixed(h) => h.clone(),
        };
        let word = random_word(&mut rng, cfg);
        let snr = snr_grid_db[rng.random_range(0..snr_grid_db.len())];
        let sigma2 = cfg.p_s / 10f64.powf(snr / 10.0);
        let noise = complex_gaussian_vector(&mut rng, cfg.n_rb, sigma2);
        let y = h_eff.column(word.n) * (constellation.point(word.m) * amplitude) + noise;
        let raw = features_from(&y, &h_eff);
        for (j, v) in raw.into_iter().enumerate() {
            features[(i, j)] = v;
        }
        antenna_labels.push(word.n);
        symbol_labels.push(word.m);
        snr_db.push(snr);
    }
    SampleSet {
        features,
        antenna_labels,
        symbol_labels,
        snr_db,
        standardized: false,
    }
}
