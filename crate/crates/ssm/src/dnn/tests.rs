use super::*;
use crate::dnn::train::joint_error_rate;
use crate::numerics::RngStream;
use crate::smcore::{Constellation, Scheme, SystemConfig};
use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

type NoRng = Option<&'static mut ChaCha8Rng>;
const NO_RNG: NoRng = None;

fn small_model(arch: Arch, seed: u64) -> DnnModel {
    let mut rng = RngStream::new(seed).rng();
    DnnModel::new(arch, 6, &[5, 4], 2, 4, 0.0, 0.9, &mut rng)
}

fn random_batch(seed: u64, rows: usize, dim: usize) -> Array2<f64> {
    let mut rng = RngStream::new(seed).rng();
    Array2::from_shape_fn((rows, dim), |_| rng.random::<f64>() * 2.0 - 1.0)
}

fn sm_config() -> SystemConfig {
    SystemConfig::new(4, 4, 4, 4, 1.0, 1.0, 0.1, 0.1).unwrap()
}

// Flat parameter indexing for finite-difference checks: layers (w, b, gamma,
// beta) then heads (w_ant, b_ant, w_sym, b_sym).
fn flat_slices(p: &Params) -> Vec<(&'static str, usize)> {
    let mut out = Vec::new();
    for l in &p.layers {
        out.push(("w", l.w.len()));
        out.push(("b", l.b.len()));
        if let Some(bn) = &l.bn {
            out.push(("gamma", bn.gamma.len()));
            out.push(("beta", bn.beta.len()));
        }
    }
    for h in &p.heads {
        out.push(("w_ant", h.w_ant.len()));
        out.push(("b_ant", h.b_ant.len()));
        out.push(("w_sym", h.w_sym.len()));
        out.push(("b_sym", h.b_sym.len()));
    }
    out
}

fn with_flat<R>(p: &mut Params, idx: usize, f: impl FnOnce(&mut f64) -> R) -> (&'static str, R) {
    let mut offset = 0usize;
    macro_rules! try_slot {
        ($name:expr, $arr:expr) => {
            if idx < offset + $arr.len() {
                let v = $arr.iter_mut().nth(idx - offset).unwrap();
                return ($name, f(v));
            }
            offset += $arr.len();
        };
    }
    for l in &mut p.layers {
        try_slot!("w", l.w);
        try_slot!("b", l.b);
        if let Some(bn) = &mut l.bn {
            try_slot!("gamma", bn.gamma);
            try_slot!("beta", bn.beta);
        }
    }
    for h in &mut p.heads {
        try_slot!("w_ant", h.w_ant);
        try_slot!("b_ant", h.b_ant);
        try_slot!("w_sym", h.w_sym);
        try_slot!("b_sym", h.b_sym);
    }
    panic!("flat index {idx} out of range");
}

fn total_params(p: &Params) -> usize {
    flat_slices(p).iter().map(|(_, n)| n).sum()
}

fn check_gradients(arch: Arch, loss_mode: &LossMode) {
    let mut model = small_model(arch, 42);
    let x = random_batch(7, 3, 6);
    let ant = vec![0usize, 1, 0];
    let sym = vec![2usize, 0, 3];
    let (_, grads) = model.loss_and_grads(&x, &ant, &sym, loss_mode, NO_RNG);
    let analytic = grads.0;
    let n = total_params(model.params());
    let h = 1e-5;
    for idx in 0..n {
        let (_, orig) = with_flat(model.params_mut(), idx, |v| {
            let orig = *v;
            *v = orig + h;
            orig
        });
        let lp = batch_loss(&mut model, &x, &ant, &sym, loss_mode, NO_RNG);
        with_flat(model.params_mut(), idx, |v| *v = orig - h);
        let lm = batch_loss(&mut model, &x, &ant, &sym, loss_mode, NO_RNG);
        with_flat(model.params_mut(), idx, |v| *v = orig);
        let fd = (lp - lm) / (2.0 * h);
        let (group, ga) = with_flat(&mut analytic.clone(), idx, |v| *v);
        let denom = ga.abs().max(fd.abs()).max(1e-3);
        assert!(
            (ga - fd).abs() / denom < 1e-4,
            "{arch:?} {group} param {idx}: analytic {ga} vs fd {fd}"
        );
    }
}

#[test]
fn gradients_match_finite_differences_ce() {
    check_gradients(Arch::Proposed, &LossMode::DeepSupervisionCe);
    check_gradients(Arch::Conventional, &LossMode::DeepSupervisionCe);
}

#[test]
fn gradients_match_finite_differences_mse() {
    let con = Constellation::new(Scheme::Qpsk);
    let mode = LossMode::ReconstructionMse {
        points: con.points().to_vec(),
        amplitude: 1.0,
    };
    check_gradients(Arch::Proposed, &mode);
    check_gradients(Arch::Conventional, &mode);
}

#[test]
fn head_probabilities_sum_to_one() {
    for seed in 0..5 {
        let model = small_model(Arch::Proposed, seed);
        let x = random_batch(seed + 100, 4, 6);
        let trace = model.forward_eval(&x).unwrap();
        assert_eq!(trace.head_probs.len(), 2);
        for (ant, sym) in &trace.head_probs {
            for probs in [ant, sym] {
                for row in probs.rows() {
                    let s: f64 = row.sum();
                    assert!((s - 1.0).abs() < 1e-6, "row sum {s}");
                    assert!(row.iter().all(|&p| p >= 0.0));
                }
            }
        }
    }
}

#[test]
fn relu_zeroes_negative_preactivations() {
    let mut model = small_model(Arch::Conventional, 1);
    // Force strongly negative pre-activations in the first layer.
    for v in model.params_mut().layers[0].b.iter_mut() {
        *v = -100.0;
    }
    for v in model.params_mut().layers[0].w.iter_mut() {
        *v = 0.0;
    }
    let x = random_batch(2, 3, 6);
    let trace = model.forward_eval(&x).unwrap();
    assert!(trace.layer_outputs[0].iter().all(|&v| v == 0.0));
}

#[test]
fn train_and_eval_agree_without_stochastic_elements() {
    // Batch of one row replicated; batch statistics then equal the running
    // statistics frozen to them, so Train and Eval forward passes coincide.
    for arch in [Arch::Conventional, Arch::Proposed] {
        let mut model = small_model(arch, 3);
        let row = random_batch(5, 1, 6);
        let batch = Array2::from_shape_fn((4, 6), |(_, j)| row[(0, j)]);
        let (train_trace, _) = {
            let t = model
                .forward::<ChaCha8Rng>(&batch, Mode::Train, None)
                .unwrap();
            // Freeze running stats to the batch stats seen in Train mode:
            // replicated rows have zero batch variance and mean equal to the
            // row itself, reproduced here exactly.
            (t, ())
        };
        if arch == Arch::Proposed {
            let z0 = {
                let l = &model.params().layers[0];
                row.dot(&l.w.t()) + &l.b
            };
            let bufs = model.bn_buffers_mut();
            if let Some(buf) = bufs[0].as_mut() {
                buf.running_mean.assign(&z0.row(0));
                buf.running_var.fill(0.0);
            }
            // Second layer input is constant across the batch too.
            let v0 = {
                let l = &model.params().layers[0];
                let bn = l.bn.as_ref().unwrap();
                // x_hat = 0, so the layer output is relu(beta), dropout off.
                bn.beta.mapv(|b| b.max(0.0))
            };
            let z1 = {
                let l = &model.params().layers[1];
                Array2::from_shape_fn((1, v0.len()), |(_, j)| v0[j]).dot(&l.w.t()) + &l.b
            };
            let bufs = model.bn_buffers_mut();
            if let Some(buf) = bufs[1].as_mut() {
                buf.running_mean.assign(&z1.row(0));
                buf.running_var.fill(0.0);
            }
        }
        let eval_trace = model.forward_eval(&batch).unwrap();
        for (t, e) in train_trace
            .layer_outputs
            .iter()
            .zip(&eval_trace.layer_outputs)
        {
            let diff = (t - e).iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "{arch:?}: max layer diff {diff}");
        }
        for ((ta, ts), (ea, es)) in train_trace.head_probs.iter().zip(&eval_trace.head_probs) {
            assert!((ta - ea).iter().all(|v| v.abs() < 1e-9));
            assert!((ts - es).iter().all(|v| v.abs() < 1e-9));
        }
    }
}

#[test]
fn eval_forward_is_bit_deterministic() {
    let model = small_model(Arch::Proposed, 9);
    let x = random_batch(10, 8, 6);
    let t1 = model.forward_eval(&x).unwrap();
    let t2 = model.forward_eval(&x).unwrap();
    for (a, b) in t1.layer_outputs.iter().zip(&t2.layer_outputs) {
        assert_eq!(a, b);
    }
    for ((a1, s1), (a2, s2)) in t1.head_probs.iter().zip(&t2.head_probs) {
        assert_eq!(a1, a2);
        assert_eq!(s1, s2);
    }
}

fn force_one_hot_heads(model: &mut DnnModel, n0: usize, m0: usize) {
    for h in &mut model.params_mut().heads {
        h.w_ant.fill(0.0);
        h.b_ant.fill(-2000.0);
        h.b_ant[n0] = 0.0;
        h.w_sym.fill(0.0);
        h.b_sym.fill(-2000.0);
        h.b_sym[m0] = 0.0;
    }
}

#[test]
fn perfect_heads_give_zero_ce_loss() {
    let mut model = small_model(Arch::Proposed, 11);
    force_one_hot_heads(&mut model, 1, 2);
    let x = random_batch(12, 3, 6);
    let ant = vec![1usize; 3];
    let sym = vec![2usize; 3];
    let loss = batch_loss(&mut model, &x, &ant, &sym, &LossMode::DeepSupervisionCe, NO_RNG);
    assert_eq!(loss, 0.0);
}

#[test]
fn uniform_heads_give_entropy_loss() {
    let mut model = small_model(Arch::Proposed, 13);
    for h in &mut model.params_mut().heads {
        h.w_ant.fill(0.0);
        h.b_ant.fill(0.0);
        h.w_sym.fill(0.0);
        h.b_sym.fill(0.0);
    }
    let x = random_batch(14, 5, 6);
    let ant = vec![0usize; 5];
    let sym = vec![3usize; 5];
    let loss = batch_loss(&mut model, &x, &ant, &sym, &LossMode::DeepSupervisionCe, NO_RNG);
    // Antenna head is uniform over 2, symbol head over 4; weights sum to 1.
    let expected = 2f64.ln() + 4f64.ln();
    assert!((loss - expected).abs() < 1e-12, "loss {loss}");
}

#[test]
fn exact_reconstruction_gives_zero_mse() {
    let con = Constellation::new(Scheme::Qpsk);
    let mut model = small_model(Arch::Conventional, 15);
    force_one_hot_heads(&mut model, 1, 3);
    let mode = LossMode::ReconstructionMse {
        points: con.points().to_vec(),
        amplitude: 2.0,
    };
    let x = random_batch(16, 4, 6);
    let loss = batch_loss(&mut model, &x, &vec![1; 4], &vec![3; 4], &mode, NO_RNG);
    assert!(loss.abs() < 1e-250, "loss {loss}");
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let mut model = small_model(Arch::Proposed, 17);
    let before_params = model.params().clone();
    let before_ema = model.ema_params().clone();
    let x = random_batch(18, 4, 6);
    model.backward_and_step(
        &x,
        &[0, 1, 0, 1],
        &[1, 2, 3, 0],
        &LossMode::DeepSupervisionCe,
        0.0,
        NO_RNG,
    );
    assert_eq!(model.params(), &before_params);
    assert_eq!(model.ema_params(), &before_ema);
}

#[test]
fn zero_ema_decay_tracks_parameters() {
    let mut model = small_model(Arch::Proposed, 19);
    model.set_ema_decay(0.0);
    let x = random_batch(20, 4, 6);
    model.backward_and_step(
        &x,
        &[0, 1, 1, 0],
        &[1, 0, 2, 3],
        &LossMode::DeepSupervisionCe,
        0.05,
        NO_RNG,
    );
    assert_eq!(model.params(), model.ema_params());
}

#[test]
fn dropout_expectation_is_identity_on_first_layer() {
    let mut model = small_model(Arch::Conventional, 21);
    model.set_dropout_p(0.3);
    let x = random_batch(22, 1, 6);
    let reference = model.forward_eval(&x).unwrap().layer_outputs[0].clone();
    let mut rng = RngStream::new(23).rng();
    let mut acc = Array2::<f64>::zeros(reference.raw_dim());
    let n = 20_000;
    for _ in 0..n {
        let trace = model.forward(&x, Mode::Train, Some(&mut rng)).unwrap();
        acc += &trace.layer_outputs[0];
    }
    acc /= n as f64;
    for (avg, r) in acc.iter().zip(reference.iter()) {
        if r.abs() > 0.05 {
            assert!(
                (avg / r - 1.0).abs() < 0.01,
                "unit expectation {avg} vs reference {r}"
            );
        }
    }
}

#[test]
fn dataset_has_expected_shape_and_uniform_labels() {
    let cfg = sm_config();
    let set = build_dataset(
        &cfg,
        &ChannelSource::IidRayleigh,
        &[0.0, 10.0],
        100_000,
        RngStream::new(24),
    );
    assert_eq!(set.feature_dim(), 2 * 4 * (1 + 4));
    let mut counts = vec![0usize; 16];
    for (&n, &m) in set.antenna_labels.iter().zip(&set.symbol_labels) {
        counts[n * 4 + m] += 1;
    }
    let p = 1.0 / 16.0;
    let sigma = (set.len() as f64 * p * (1.0 - p)).sqrt();
    for (k, &c) in counts.iter().enumerate() {
        let dev = (c as f64 - set.len() as f64 * p).abs();
        assert!(dev < 3.0 * sigma, "pair {k}: count {c}");
    }
}

#[test]
fn dataset_is_seed_deterministic() {
    let cfg = sm_config();
    let a = build_dataset(&cfg, &ChannelSource::IidRayleigh, &[5.0], 64, RngStream::new(25));
    let b = build_dataset(&cfg, &ChannelSource::IidRayleigh, &[5.0], 64, RngStream::new(25));
    assert_eq!(a.features, b.features);
    assert_eq!(a.antenna_labels, b.antenna_labels);
    assert_eq!(a.symbol_labels, b.symbol_labels);
}

#[test]
fn zero_iteration_training_returns_initial_model() {
    let cfg = sm_config();
    let mut set = build_dataset(&cfg, &ChannelSource::IidRayleigh, &[10.0], 64, RngStream::new(26));
    let stats = set.fit_stats();
    set.standardize(&stats);
    let (train_set, val_set) = set.split(48);
    let mut rng = RngStream::new(27).rng();
    let model = DnnModel::new(Arch::Proposed, 40, &[16], 4, 4, 0.0, 0.9, &mut rng);
    let before = model.params().clone();
    let tc = TrainConfig {
        max_iters: 0,
        batch_size: 16,
        learning_rate: 0.1,
        dropout_p: 0.0,
        validate_every: 100,
        patience: 3,
        seed: 1,
    };
    let out = train(model, &train_set, &val_set, &tc, &LossMode::DeepSupervisionCe);
    assert!(out.history.losses.is_empty());
    assert!(out.history.validations.is_empty());
    assert_eq!(out.model.params(), &before);
}

fn toy_separable_set(seed: u64, n: usize) -> SampleSet {
    // Two Gaussian blobs, jointly labeled on both heads.
    let mut rng = RngStream::new(seed).rng();
    let mut features = Array2::zeros((n, 2));
    let mut ant = Vec::with_capacity(n);
    let mut sym = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let center = if class == 0 { 1.5 } else { -1.5 };
        features[(i, 0)] = center + rng.random::<f64>() - 0.5;
        features[(i, 1)] = center + rng.random::<f64>() - 0.5;
        ant.push(class);
        sym.push(class);
    }
    SampleSet {
        features,
        antenna_labels: ant,
        symbol_labels: sym,
        snr_db: vec![0.0; n],
        standardized: false,
    }
}

#[test]
fn toy_task_trains_to_high_accuracy() {
    let mut set = toy_separable_set(28, 4000);
    let stats = set.fit_stats();
    set.standardize(&stats);
    let (train_set, val_set) = set.split(3000);
    let mut rng = RngStream::new(29).rng();
    let model = DnnModel::new(Arch::Proposed, 2, &[16, 16], 2, 2, 0.0, 0.9, &mut rng);
    let tc = TrainConfig {
        max_iters: 2000,
        batch_size: 32,
        learning_rate: 0.1,
        dropout_p: 0.0,
        validate_every: 100,
        patience: 50,
        seed: 30,
    };
    let out = train(model, &train_set, &val_set, &tc, &LossMode::DeepSupervisionCe);
    let err = joint_error_rate(&out.model, &val_set);
    assert!(err <= 0.01, "validation error {err}");
}

#[test]
fn training_history_is_seed_deterministic() {
    let cfg = sm_config();
    let mut set =
        build_dataset(&cfg, &ChannelSource::IidRayleigh, &[10.0], 2000, RngStream::new(31));
    let stats = set.fit_stats();
    set.standardize(&stats);
    let (train_set, val_set) = set.split(1600);
    let tc = TrainConfig {
        max_iters: 300,
        batch_size: 32,
        learning_rate: 0.05,
        dropout_p: 0.1,
        validate_every: 100,
        patience: 10,
        seed: 33,
    };
    let run = |seed: u64| {
        let mut rng = RngStream::new(seed).rng();
        let model = DnnModel::new(Arch::Proposed, 40, &[32, 32], 4, 4, 0.1, 0.9, &mut rng);
        train(model, &train_set, &val_set, &tc, &LossMode::DeepSupervisionCe).history
    };
    assert_eq!(run(32), run(32));
}

#[test]
fn training_loss_trends_down_on_sm_task() {
    let cfg = sm_config();
    let mut set =
        build_dataset(&cfg, &ChannelSource::IidRayleigh, &[10.0], 20_000, RngStream::new(34));
    let stats = set.fit_stats();
    set.standardize(&stats);
    let (train_set, val_set) = set.split(18_000);
    let mut rng = RngStream::new(35).rng();
    let model = DnnModel::new(Arch::Proposed, 40, &[64, 64], 4, 4, 0.05, 0.95, &mut rng);
    let tc = TrainConfig {
        max_iters: 2000,
        batch_size: 64,
        learning_rate: 0.1,
        dropout_p: 0.05,
        validate_every: 100,
        patience: 100,
        seed: 36,
    };
    let out = train(model, &train_set, &val_set, &tc, &LossMode::DeepSupervisionCe);
    let ma = |center: usize| -> f64 {
        let lo = center.saturating_sub(50);
        let hi = (center + 50).min(out.history.losses.len());
        out.history.losses[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    };
    assert!(
        ma(1999) < ma(100),
        "loss moving average did not decrease: {} vs {}",
        ma(1999),
        ma(100)
    );
}

#[test]
fn detect_follows_hardwired_heads() {
    let mut model = small_model(Arch::Proposed, 37);
    force_one_hot_heads(&mut model, 1, 3);
    let detector = TrainedDetector {
        model,
        stats: FeatureStats {
            mean: vec![0.0; 6],
            std: vec![1.0; 6],
        },
    };
    let mut rng = RngStream::new(38).rng();
    // 6 = 2 * 1 * (1 + 2): one receive antenna, two transmit antennas.
    let h_eff = crate::numerics::complex_gaussian_matrix(&mut rng, 1, 2, 1.0);
    let y = crate::numerics::complex_gaussian_vector(&mut rng, 1, 1.0);
    let d = detector.detect(&y, &h_eff).unwrap();
    assert_eq!((d.n_hat, d.m_hat), (1, 3));
}

#[test]
fn checkpoint_roundtrip_preserves_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let mut model = small_model(Arch::Proposed, 39);
    // Make buffers nontrivial.
    let x = random_batch(40, 8, 6);
    model
        .forward::<ChaCha8Rng>(&x, Mode::Train, None)
        .unwrap();
    let detector = TrainedDetector {
        model,
        stats: FeatureStats {
            mean: (0..6).map(|i| i as f64 / 7.0).collect(),
            std: vec![1.5; 6],
        },
    };
    let meta = CheckpointMetadata {
        trained_iters: 123,
        best_val_error: 0.25,
        seed: 7,
        snr_grid_db: vec![0.0, 5.0],
        system: Some(sm_config()),
    };
    save_checkpoint(&path, &detector, &meta).unwrap();
    let (loaded, loaded_meta) = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.model.params(), detector.model.params());
    assert_eq!(loaded.stats, detector.stats);
    assert_eq!(loaded_meta.trained_iters, meta.trained_iters);
    let probs_a = detector.model.forward_eval(&x).unwrap();
    let probs_b = loaded.model.forward_eval(&x).unwrap();
    for ((a1, s1), (a2, s2)) in probs_a.head_probs.iter().zip(&probs_b.head_probs) {
        assert_eq!(a1, a2);
        assert_eq!(s1, s2);
    }
}

#[test]
fn checkpoint_rejects_unknown_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let model = small_model(Arch::Conventional, 41);
    let detector = TrainedDetector {
        model,
        stats: FeatureStats {
            mean: vec![0.0; 6],
            std: vec![1.0; 6],
        },
    };
    save_checkpoint(&path, &detector, &CheckpointMetadata::default()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let bumped = text.replace("\"format_version\":1", "\"format_version\":99");
    assert_ne!(text, bumped);
    std::fs::write(&path, bumped).unwrap();
    match load_checkpoint(&path) {
        Err(Error::UnsupportedVersion(99)) => {}
        other => panic!("expected UnsupportedVersion, got {other:?}"),
    }
}
