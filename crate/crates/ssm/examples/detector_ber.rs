//! Classical joint detection: paired BER of ML, MMSE and ZF over a quick
//! SNR sweep, plus the candidate/FLOP accounting.
//!
//! ```bash
//! cargo run -p ssm --release --example detector_ber
//! ```

use ssm::detectors::{complexity_of, DetectorKind};
use ssm::harness::{run_ber_sweep, DetectorSpec, ExperimentConfig};

fn main() {
    let mut cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "system": {
            "n_a": 4, "n_t": 4, "n_rb": 4, "n_re": 4, "m": 4,
            "p_s": 1.0, "beta": 1.0, "sigma2_b": 0.1, "sigma2_e": 0.1
        },
        "snr_grid_db": [0.0, 4.0, 8.0, 12.0],
        "trials": 60000,
        "target_errors": 200,
        "seed": 5,
        "workers": 2
    }))
    .unwrap();
    cfg.detectors = Some(vec![DetectorSpec::Ml, DetectorSpec::Mmse, DetectorSpec::Zf]);

    println!("complexity per channel use (4 antennas, QPSK):");
    for kind in [DetectorKind::Ml, DetectorKind::Zf, DetectorKind::Mmse] {
        let c = complexity_of(kind, &cfg.system);
        println!("  {kind:?}: {} candidates, {} flops", c.candidates, c.flops);
    }

    let result = run_ber_sweep(&cfg).unwrap();
    println!("\npaired BER (same channel/noise draws per trial):");
    println!("snr_db      ml        mmse      zf");
    for &snr in &cfg.snr_grid_db {
        let get = |m: &str| {
            result
                .rows
                .iter()
                .find(|r| r.snr_db == snr && r.method == m)
                .unwrap()
                .value
        };
        println!(
            "{snr:>5}   {:.3e}  {:.3e}  {:.3e}",
            get("ml"),
            get("mmse"),
            get("zf")
        );
    }
}
