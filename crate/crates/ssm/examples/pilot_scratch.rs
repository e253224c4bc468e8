// Scratch pilot for DNN training feasibility. Deleted before release.
use std::time::Instant;

use ssm::dnn::{build_dataset, train, Arch, ChannelSource, DnnModel, LossMode, TrainConfig, TrainedDetector};
use ssm::harness::{run_ber_sweep, DetectorSpec, ExperimentConfig};
use ssm::numerics::RngStream;
use ssm::smcore::SystemConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_train: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(100_000);
    let iters: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(4000);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let ema: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.99);
    let arch = match args.get(4).map(|s| s.as_str()).unwrap_or("proposed") {
        "conv" => Arch::Conventional,
        _ => Arch::Proposed,
    };
    let system = SystemConfig::new(4, 4, 4, 4, 1.0, 1.0, 0.1, 0.1).unwrap();
    let grid_lo: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let dropout: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(0.02);
    let width: usize = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(128);
    let grid: Vec<f64> = (0..=16).step_by(2).map(f64::from).filter(|&x| x >= grid_lo).collect();
    let root = RngStream::new(0xBEEF);
    let t0 = Instant::now();
    let mut train_set = build_dataset(&system, &ChannelSource::IidRayleigh, &grid, n_train, root.substream(1));
    let mut val_set = build_dataset(&system, &ChannelSource::IidRayleigh, &grid, 10_000, root.substream(2));
    let stats = train_set.fit_stats();
    train_set.standardize(&stats);
    val_set.standardize(&stats);
    println!("dataset: {:?}", t0.elapsed());

    let tc = TrainConfig {
        max_iters: iters,
        batch_size: 256,
        learning_rate: lr,
        dropout_p: dropout,
        validate_every: 100,
        patience: 1_000_000,
        seed: 7,
    };
    let mut init = root.substream(3).rng();
    let model = DnnModel::new(arch, train_set.feature_dim(), &[width, width, width, width], 4, 4, tc.dropout_p, ema, &mut init);
    let t1 = Instant::now();
    let outcome = train(model, &train_set, &val_set, &tc, &LossMode::DeepSupervisionCe);
    let dt = t1.elapsed();
    println!(
        "train {} iters: {:?} ({:.1} ms/iter)",
        outcome.history.losses.len(),
        dt,
        dt.as_secs_f64() * 1000.0 / outcome.history.losses.len().max(1) as f64
    );
    for v in outcome.history.validations.iter().step_by(5) {
        println!("  iter {:6}: val joint err {:.4}", v.iter, v.joint_error_rate);
    }
    let dir = std::env::temp_dir().join("ssm_pilot.json");
    ssm::dnn::save_checkpoint(
        &dir,
        &TrainedDetector { model: outcome.model, stats },
        &Default::default(),
    )
    .unwrap();

    let mut cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "system": {"n_a":4,"n_t":4,"n_rb":4,"n_re":4,"m":4,"p_s":1.0,"beta":1.0,"sigma2_b":0.1,"sigma2_e":0.1},
        "snr_grid_db": [2.0,4.0,6.0,8.0,10.0,12.0],
        "trials": 150000u64,
        "target_errors": 120u64,
        "seed": 99,
        "workers": 2
    }))
    .unwrap();
    cfg.detectors = Some(vec![DetectorSpec::Ml, DetectorSpec::Dnn { path: dir }]);
    let t2 = Instant::now();
    let result = run_ber_sweep(&cfg).unwrap();
    println!("eval: {:?}", t2.elapsed());
    for row in &result.rows {
        println!("  {} @ {:>4} dB: {:.3e} ({} errs / {} trials)", row.method, row.snr_db, row.value, row.errors, row.trials);
    }
}
