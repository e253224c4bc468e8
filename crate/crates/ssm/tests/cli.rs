//! End-to-end tests of the `ssm` binary: exit codes, output files, and
//! worker-count determinism of the emitted CSV.

use std::path::Path;
use std::process::Command;

fn ssm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssm"))
}

fn base_config() -> serde_json::Value {
    serde_json::json!({
        "system": {
            "n_a": 4, "n_t": 4, "n_rb": 4, "n_re": 4, "m": 4,
            "p_s": 1.0, "beta": 1.0, "sigma2_b": 0.1, "sigma2_e": 0.1
        },
        "snr_grid_db": [0.0, 6.0],
        "trials": 1500,
        "detectors": ["ml", "zf"],
        "seed": 9,
        "workers": 1
    })
}

fn write_config(dir: &Path, value: &serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

#[test]
fn missing_config_exits_2() {
    let out = ssm()
        .args(["simulate-ber", "--config", "/nonexistent.json", "--out", "/tmp/x.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["trails"] = serde_json::json!(5);
    let path = write_config(dir.path(), &cfg);
    let out_csv = dir.path().join("out.csv");
    let out = ssm()
        .args(["simulate-ber", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn invalid_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["snr_grid_db"] = serde_json::json!([6.0, 0.0]);
    let path = write_config(dir.path(), &cfg);
    let out = ssm()
        .args(["simulate-ber", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn missing_method_section_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &base_config());
    // sweep-pa without a pa_methods list is a config error.
    let out = ssm()
        .args(["sweep-pa", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn ber_sweep_is_worker_invariant_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &base_config());
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out_csv = dir.path().join(format!("out_{workers}.csv"));
        let plot = dir.path().join(format!("plot_{workers}.csv"));
        let status = ssm()
            .args(["simulate-ber", "--config"])
            .arg(&path)
            .args(["--workers", workers])
            .arg("--out")
            .arg(&out_csv)
            .arg("--plot-data")
            .arg(&plot)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        outputs.push(std::fs::read(&out_csv).unwrap());
        assert!(plot.exists());
    }
    assert_eq!(outputs[0], outputs[1], "CSV bytes differ across worker counts");
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("snr_db,metric,method,value,std_error,trials,errors,seed\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2, "header plus 2 methods x 2 points");
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &base_config());
    let run = |seed: &str, name: &str| {
        let out_csv = dir.path().join(name);
        let status = ssm()
            .args(["simulate-ber", "--config"])
            .arg(&path)
            .args(["--seed", seed])
            .arg("--out")
            .arg(&out_csv)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        std::fs::read(out_csv).unwrap()
    };
    let a = run("9", "a.csv");
    let b = run("10", "b.csv");
    assert_ne!(a, b);
}

#[test]
fn sr_and_pa_sweeps_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["system"]["n_a"] = serde_json::json!(5);
    cfg["system"]["n_t"] = serde_json::json!(4);
    cfg["system"]["n_rb"] = serde_json::json!(2);
    cfg["system"]["n_re"] = serde_json::json!(2);
    cfg["trials"] = serde_json::json!(6);
    cfg["mc_samples"] = serde_json::json!(80);
    cfg["snr_grid_db"] = serde_json::json!([10.0]);
    cfg["tas_method"] = serde_json::json!("max-slnr");
    cfg["pa_methods"] = serde_json::json!([
        {"fixed": {"beta": 0.5}},
        "max-p-sinr-ansnr"
    ]);
    cfg["tas_methods"] = serde_json::json!(["random", "max-slnr"]);
    let path = write_config(dir.path(), &cfg);
    for sub in ["simulate-sr", "sweep-pa", "sweep-tas"] {
        let out_csv = dir.path().join(format!("{sub}.csv"));
        let out = ssm()
            .args([sub, "--config"])
            .arg(&path)
            .arg("--out")
            .arg(&out_csv)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{sub}: {out:?}");
        let text = std::fs::read_to_string(&out_csv).unwrap();
        assert!(text.contains("SR"), "{sub} output:\n{text}");
    }
}

#[test]
fn dataset_train_eval_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config();
    cfg["snr_grid_db"] = serde_json::json!([8.0, 12.0]);
    cfg["trials"] = serde_json::json!(3000);
    cfg["target_errors"] = serde_json::json!(50);
    cfg["dnn"] = serde_json::json!({
        "arch": "proposed",
        "hidden": [32, 32],
        "train": {
            "max_iters": 400,
            "batch_size": 128,
            "learning_rate": 0.5,
            "dropout_p": 0.0,
            "patience": 50,
            "seed": 3
        },
        "n_samples": 8000,
        "val_samples": 1000
    });
    let path = write_config(dir.path(), &cfg);

    let dataset = dir.path().join("data.bin");
    let out = ssm()
        .args(["gen-dataset", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&dataset)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let set = ssm::harness::read_dataset(&dataset).unwrap();
    assert_eq!(set.len(), 8000);
    assert_eq!(set.feature_dim(), 40);

    let model = dir.path().join("model.json");
    let out = ssm()
        .args(["train-dnn", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(model.exists());

    // eval-dnn needs the model path in the config.
    cfg["dnn"]["model_path"] = serde_json::json!(model);
    let path = write_config(dir.path(), &cfg);
    let ber_csv = dir.path().join("dnn_ber.csv");
    let out = ssm()
        .args(["eval-dnn", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&ber_csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = std::fs::read_to_string(&ber_csv).unwrap();
    assert!(text.contains("dnn:model"), "output:\n{text}");
    assert!(text.contains("ml"), "output:\n{text}");
}
