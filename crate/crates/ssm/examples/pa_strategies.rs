//! Power allocation: the secrecy-rate profile over the PA factor for one
//! channel, and what each strategy picks.
//!
//! ```bash
//! cargo run -p ssm --release --example pa_strategies
//! ```

use ssm::anpa::{pa_exhaustive, pa_fixed, pa_gradient, pa_max_p_sinr_ansnr, SrObjective};
use ssm::numerics::RngStream;
use ssm::smcore::{ChannelPair, SelectionPattern, SystemConfig};

fn main() {
    let cfg = SystemConfig::new(6, 2, 2, 4, 1.0, 0.5, 0.1, 0.1)
        .unwrap()
        .with_snr_db(15.0);
    let mut rng = RngStream::new(11).rng();
    let chan = ChannelPair::rayleigh(&mut rng, &cfg);
    let sel = SelectionPattern::first(cfg.n_t);
    let eval = RngStream::new(12);
    let samples = 400;

    println!("SR(beta) profile (common random numbers):");
    let objective = SrObjective::new(&chan, &sel, &cfg, eval, samples).unwrap();
    for i in 0..=10 {
        let beta = i as f64 / 10.0;
        let sr = objective.eval(beta).unwrap();
        let bar = "#".repeat((sr * 12.0).round() as usize);
        println!("  beta {beta:.1}: {sr:.4}  {bar}");
    }

    println!("\nstrategies:");
    let es = pa_exhaustive(&chan, &sel, &cfg, 0.05, eval, samples).unwrap();
    println!(
        "  exhaustive (0.05 grid): beta {:.2}, SR {:.4} ({} evaluations)",
        es.beta, es.sr, es.evaluations
    );
    let gd = pa_gradient(&chan, &sel, &cfg, 0.5, 0.2, 12, eval, samples).unwrap();
    println!(
        "  gradient ascent:        beta {:.3}, SR {:.4} ({} evaluations)",
        gd.beta, gd.sr, gd.evaluations
    );
    let maxp = pa_max_p_sinr_ansnr(&chan, &sel, &cfg, eval, samples).unwrap();
    println!(
        "  max-p-sinr-ansnr:       beta {:.3}, SR {:.4} (closed 1-D search)",
        maxp.beta, maxp.sr
    );
    for beta in [0.1, 0.5, 0.9] {
        let fixed = pa_fixed(&chan, &sel, &cfg, beta, eval, samples).unwrap();
        println!("  fixed({beta:.1}):             SR {:.4}", fixed.sr);
    }
}
