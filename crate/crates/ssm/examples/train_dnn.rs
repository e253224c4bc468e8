//! Neural joint detection: train a small per-layer-supervised model, save a
//! checkpoint, reload it, and detect a few channel uses.
//!
//! This is a desk-scale demo (a couple of minutes); the full-size training
//! behind the BER comparisons uses the `train-dnn` subcommand or the
//! acceptance suite.
//!
//! ```bash
//! cargo run -p ssm --release --example train_dnn
//! ```

use rand::Rng;
use ssm::dnn::{
    build_dataset, load_checkpoint, save_checkpoint, train, Arch, ChannelSource,
    CheckpointMetadata, DnnModel, LossMode, TrainConfig, TrainedDetector,
};
use ssm::numerics::{complex_gaussian_matrix, complex_gaussian_vector, RngStream};
use ssm::smcore::{map_bits, Constellation, Scheme, SystemConfig};

fn main() {
    let system = SystemConfig::new(4, 4, 4, 4, 1.0, 1.0, 0.1, 0.1).unwrap();
    let grid: Vec<f64> = vec![6.0, 10.0, 14.0];
    let root = RngStream::new(99);

    let mut train_set =
        build_dataset(&system, &ChannelSource::IidRayleigh, &grid, 60_000, root.substream(1));
    let mut val_set =
        build_dataset(&system, &ChannelSource::IidRayleigh, &grid, 5_000, root.substream(2));
    let stats = train_set.fit_stats();
    train_set.standardize(&stats);
    val_set.standardize(&stats);

    let tc = TrainConfig {
        max_iters: 4_000,
        batch_size: 256,
        learning_rate: 0.6,
        dropout_p: 0.0,
        validate_every: 100,
        patience: 20,
        seed: 1,
    };
    let mut init = root.substream(3).rng();
    let model = DnnModel::new(
        Arch::Proposed,
        train_set.feature_dim(),
        &[128, 128, 128, 128],
        system.n_t,
        system.m,
        tc.dropout_p,
        0.99,
        &mut init,
    );
    println!("training {} parameters...", model.param_count());
    let outcome = train(model, &train_set, &val_set, &tc, &LossMode::DeepSupervisionCe);
    for v in outcome.history.validations.iter().step_by(8) {
        println!("  iter {:>5}: validation joint error {:.4}", v.iter, v.joint_error_rate);
    }

    let path = std::env::temp_dir().join("ssm_demo_model.json");
    save_checkpoint(
        &path,
        &TrainedDetector {
            model: outcome.model,
            stats,
        },
        &CheckpointMetadata::default(),
    )
    .unwrap();
    println!("checkpoint written to {}", path.display());

    let (detector, _) = load_checkpoint(&path).unwrap();
    let constellation = Constellation::new(Scheme::Qpsk);
    let cfg = system.with_snr_db(14.0);
    let mut rng = root.substream(4).rng();
    let mut correct = 0;
    let trials = 2_000;
    for _ in 0..trials {
        let h_eff = complex_gaussian_matrix(&mut rng, cfg.n_rb, cfg.n_t, 1.0);
        let word = map_bits(rng.random_range(0..16), &cfg).unwrap();
        let y = h_eff.column(word.n) * (constellation.point(word.m) * cfg.p_s.sqrt())
            + complex_gaussian_vector(&mut rng, cfg.n_rb, cfg.sigma2_b);
        let d = detector.detect(&y, &h_eff).unwrap();
        if (d.n_hat, d.m_hat) == (word.n, word.m) {
            correct += 1;
        }
    }
    println!(
        "reloaded model: joint accuracy {:.3} over {trials} uses at 14 dB",
        correct as f64 / trials as f64
    );
}
