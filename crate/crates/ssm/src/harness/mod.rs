//! Experiment configuration, the seeded parallel sweep engine, and CSV
//! emission.

mod config;
mod csv;
mod sweep;

pub use config::{DetectorSpec, DnnSection, ExperimentConfig, LossKind, PaMethodSpec};
pub use csv::{emit_csv, emit_csv_string, emit_plot_data, format_sig10, parse_csv, CSV_HEADER};
pub use sweep::{run_ber_sweep, run_sr_sweep, Metric, SrMethod, SweepResult, SweepRow};

use std::path::Path;

use crate::dnn::{
    build_dataset, save_checkpoint, train, ChannelSource, CheckpointMetadata, DnnModel, LossMode,
    TrainedDetector,
};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::smcore::{Constellation, Scheme};

const DATASET_TRAIN_TAG: u64 = 0xDA7A;
const DATASET_VAL_TAG: u64 = 0xDA7B;
const INIT_TAG: u64 = 0x1217;

/// Trains a DNN detector per the config's `dnn` section and writes the
/// checkpoint to `out`. Returns the best validation error.
pub fn train_dnn_from_config(cfg: &ExperimentConfig, out: &Path) -> Result<f64> {
    let section = cfg
        .dnn
        .as_ref()
        .ok_or_else(|| Error::Config("train-dnn needs a dnn section".into()))?;
    let snr_grid = section
        .train_snr_grid_db
        .clone()
        .unwrap_or_else(|| cfg.snr_grid_db.clone());
    let system = cfg.system.clone();
    let root = RngStream::new(cfg.seed);
    let mut train_set = build_dataset(
        &system,
        &ChannelSource::IidRayleigh,
        &snr_grid,
        section.n_samples,
        root.substream(DATASET_TRAIN_TAG),
    );
    let mut val_set = build_dataset(
        &system,
        &ChannelSource::IidRayleigh,
        &snr_grid,
        section.val_samples,
        root.substream(DATASET_VAL_TAG),
    );
    let stats = train_set.fit_stats();
    train_set.standardize(&stats);
    val_set.standardize(&stats);

    let mut init_rng = root.substream(INIT_TAG).rng();
    let model = DnnModel::new(
        section.arch,
        train_set.feature_dim(),
        &section.hidden,
        system.n_t,
        system.m,
        section.train.dropout_p,
        0.999,
        &mut init_rng,
    );
    let loss_mode = match section.loss {
        LossKind::DeepSupervisionCe => LossMode::DeepSupervisionCe,
        LossKind::ReconstructionMse => {
            let constellation = Constellation::new(Scheme::for_size(system.m)?);
            LossMode::ReconstructionMse {
                points: constellation.points().to_vec(),
                amplitude: (system.beta * system.p_s).sqrt(),
            }
        }
    };
    let outcome = train(model, &train_set, &val_set, &section.train, &loss_mode);
    let best_val_error = outcome
        .history
        .validations
        .iter()
        .map(|v| v.joint_error_rate)
        .fold(f64::INFINITY, f64::min);
    let detector = TrainedDetector {
        model: outcome.model,
        stats,
    };
    let metadata = CheckpointMetadata {
        trained_iters: outcome.history.losses.len(),
        best_val_error: if best_val_error.is_finite() {
            best_val_error
        } else {
            1.0
        },
        seed: cfg.seed,
        snr_grid_db: snr_grid,
        system: Some(system),
    };
    save_checkpoint(out, &detector, &metadata)?;
    Ok(metadata.best_val_error)
}

/// Generates a dataset per the config and writes it as a compact little-endian
/// binary (see [`write_dataset`] for the layout).
pub fn gen_dataset_from_config(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let section = cfg
        .dnn
        .as_ref()
        .ok_or_else(|| Error::Config("gen-dataset needs a dnn section".into()))?;
    let snr_grid = section
        .train_snr_grid_db
        .clone()
        .unwrap_or_else(|| cfg.snr_grid_db.clone());
    let set = build_dataset(
        &cfg.system,
        &ChannelSource::IidRayleigh,
        &snr_grid,
        section.n_samples,
        RngStream::new(cfg.seed).substream(DATASET_TRAIN_TAG),
    );
    write_dataset(&set, out)
}

/// BER sweep of a checkpointed DNN (plus ML as the reference) per config.
pub fn eval_dnn_from_config(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let section = cfg
        .dnn
        .as_ref()
        .ok_or_else(|| Error::Config("eval-dnn needs a dnn section".into()))?;
    let model_path = section
        .model_path
        .as_ref()
        .ok_or_else(|| Error::Config("eval-dnn needs dnn.model_path".into()))?;
    let mut ber_cfg = cfg.clone();
    ber_cfg.detectors = Some(vec![
        DetectorSpec::Ml,
        DetectorSpec::Dnn {
            path: model_path.clone(),
        },
    ]);
    run_ber_sweep(&ber_cfg)
}

const DATASET_MAGIC: &[u8; 8] = b"SSMDATA1";

/// Binary dataset layout: the 8-byte magic, then `n_samples`, `feature_dim`
/// (little-endian u64), then the row-major feature matrix as f64, then the
/// antenna and symbol labels as u32, then per-sample SNR in dB as f64.
pub fn write_dataset(set: &crate::dnn::SampleSet, path: &Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&(set.feature_dim() as u64).to_le_bytes())?;
    for v in set.features.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &l in &set.antenna_labels {
        w.write_all(&(l as u32).to_le_bytes())?;
    }
    for &l in &set.symbol_labels {
        w.write_all(&(l as u32).to_le_bytes())?;
    }
    for &s in &set.snr_db {
        w.write_all(&s.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<crate::dnn::SampleSet> {
    use std::io::Read;
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Config("not a dataset file".into()));
    }
    let mut u64buf = [0u8; 8];
    file.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    file.read_exact(&mut u64buf)?;
    let dim = u64::from_le_bytes(u64buf) as usize;
    let mut features = ndarray::Array2::zeros((n, dim));
    for v in features.iter_mut() {
        file.read_exact(&mut u64buf)?;
        *v = f64::from_le_bytes(u64buf);
    }
    let mut read_u32s = |count: usize| -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(count);
        let mut buf = [0u8; 4];
        for _ in 0..count {
            file.read_exact(&mut buf)?;
            out.push(u32::from_le_bytes(buf) as usize);
        }
        Ok(out)
    };
    let antenna_labels = read_u32s(n)?;
    let symbol_labels = read_u32s(n)?;
    let mut snr_db = Vec::with_capacity(n);
    for _ in 0..n {
        file.read_exact(&mut u64buf)?;
        snr_db.push(f64::from_le_bytes(u64buf));
    }
    Ok(crate::dnn::SampleSet {
        features,
        antenna_labels,
        symbol_labels,
        snr_db,
        standardized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnn::{build_dataset, ChannelSource};
    use crate::smcore::SystemConfig;

    #[test]
    fn dataset_file_roundtrip() {
        let cfg = SystemConfig::new(4, 4, 4, 4, 1.0, 1.0, 0.1, 0.1).unwrap();
        let set = build_dataset(
            &cfg,
            &ChannelSource::IidRayleigh,
            &[0.0, 10.0],
            64,
            RngStream::new(5),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.bin");
        write_dataset(&set, &path).unwrap();
        let loaded = read_dataset(&path).unwrap();
        assert_eq!(loaded.features, set.features);
        assert_eq!(loaded.antenna_labels, set.antenna_labels);
        assert_eq!(loaded.symbol_labels, set.symbol_labels);
        assert_eq!(loaded.snr_db, set.snr_db);
    }
}
