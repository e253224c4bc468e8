//! Versioned JSON model checkpoints.
//!
//! The document stores the architecture, every parameter array, the feature
//! standardization statistics, and training metadata. `format_version` gates
//! loading: unknown versions are rejected.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{
    Arch, BnBuffers, BnParams, DnnModel, FeatureStats, HeadParams, LayerParams, Params,
    TrainedDetector,
};
use crate::error::{Error, Result};
use crate::smcore::SystemConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixCk {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixCk {
    fn from(a: &Array2<f64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().cloned().collect(),
        }
    }

    fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|_| Error::Config("checkpoint matrix shape mismatch".into()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BnCk {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerCk {
    w: MatrixCk,
    b: Vec<f64>,
    bn: Option<BnCk>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadCk {
    w_ant: MatrixCk,
    b_ant: Vec<f64>,
    w_sym: MatrixCk,
    b_sym: Vec<f64>,
}

/// Provenance carried alongside the parameters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMetadata {
    pub trained_iters: usize,
    pub best_val_error: f64,
    pub seed: u64,
    pub snr_grid_db: Vec<f64>,
    pub system: Option<SystemConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    arch: Arch,
    input_dim: usize,
    widths: Vec<usize>,
    n_t: usize,
    m: usize,
    dropout_p: f64,
    ema_decay: f64,
    head_layers: Vec<usize>,
    head_weights: Vec<f64>,
    layers: Vec<LayerCk>,
    heads: Vec<HeadCk>,
    stats: FeatureStats,
    metadata: CheckpointMetadata,
}

/// Writes a trained detector to a JSON checkpoint.
pub fn save_checkpoint(
    path: &Path,
    detector: &TrainedDetector,
    metadata: &CheckpointMetadata,
) -> Result<()> {
    let model = &detector.model;
    let params = model.params();
    let buffers = model.bn_buffers();
    let layers = params
        .layers
        .iter()
        .zip(buffers)
        .map(|(l, buf)| LayerCk {
            w: MatrixCk::from(&l.w),
            b: l.b.to_vec(),
            bn: l.bn.as_ref().map(|bn| {
                let buf = buf.as_ref().expect("bn layer has buffers");
                BnCk {
                    gamma: bn.gamma.to_vec(),
                    beta: bn.beta.to_vec(),
                    running_mean: buf.running_mean.to_vec(),
                    running_var: buf.running_var.to_vec(),
                }
            }),
        })
        .collect();
    let heads = params
        .heads
        .iter()
        .map(|h| HeadCk {
            w_ant: MatrixCk::from(&h.w_ant),
            b_ant: h.b_ant.to_vec(),
            w_sym: MatrixCk::from(&h.w_sym),
            b_sym: h.b_sym.to_vec(),
        })
        .collect();
    let ck = Checkpoint {
        format_version: FORMAT_VERSION,
        arch: model.arch,
        input_dim: model.input_dim(),
        widths: model.widths().to_vec(),
        n_t: model.n_t(),
        m: model.m(),
        dropout_p: model.dropout_p(),
        ema_decay: model.ema_decay(),
        head_layers: model.head_layers().to_vec(),
        head_weights: model.head_weights().to_vec(),
        layers,
        heads,
        stats: detector.stats.clone(),
        metadata: metadata.clone(),
    };
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer(&mut writer, &ck)?;
    writer.flush()?;
    Ok(())
}

/// Loads a trained detector, rejecting unknown format versions.
pub fn load_checkpoint(path: &Path) -> Result<(TrainedDetector, CheckpointMetadata)> {
    let file = std::fs::File::open(path)?;
    let ck: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
    if ck.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(ck.format_version));
    }
    let mut layers = Vec::with_capacity(ck.layers.len());
    let mut buffers = Vec::with_capacity(ck.layers.len());
    for l in &ck.layers {
        layers.push(LayerParams {
            w: l.w.to_array()?,
            b: Array1::from_vec(l.b.clone()),
            bn: l.bn.as_ref().map(|bn| BnParams {
                gamma: Array1::from_vec(bn.gamma.clone()),
                beta: Array1::from_vec(bn.beta.clone()),
            }),
        });
        buffers.push(l.bn.as_ref().map(|bn| BnBuffers {
            running_mean: Array1::from_vec(bn.running_mean.clone()),
            running_var: Array1::from_vec(bn.running_var.clone()),
        }));
    }
    let heads = ck
        .heads
        .iter()
        .map(|h| {
            Ok(HeadParams {
                w_ant: h.w_ant.to_array()?,
                b_ant: Array1::from_vec(h.b_ant.clone()),
                w_sym: h.w_sym.to_array()?,
                b_sym: Array1::from_vec(h.b_sym.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = DnnModel::from_parts(
        ck.arch,
        ck.input_dim,
        ck.widths,
        ck.n_t,
        ck.m,
        ck.dropout_p,
        ck.ema_decay,
        ck.head_layers,
        ck.head_weights,
        Params { layers, heads },
        buffers,
    );
    Ok((
        TrainedDetector {
            model,
            stats: ck.stats,
        },
        ck.metadata,
    ))
}
