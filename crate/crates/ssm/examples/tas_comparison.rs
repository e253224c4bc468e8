//! Transmit-antenna selection: secrecy rate of the four selection rules on a
//! batch of fading channels, evaluated with common random numbers.
//!
//! ```bash
//! cargo run -p ssm --release --example tas_comparison
//! ```

use rayon::prelude::*;
use ssm::numerics::RngStream;
use ssm::secrecy::secrecy_rate_auto;
use ssm::smcore::{ChannelPair, Constellation, Scheme, SystemConfig};
use ssm::tas::{tas_edas, tas_exhaustive_sr, tas_max_slnr, tas_random, EdasMode};

fn main() {
    let cfg = SystemConfig::new(6, 2, 2, 4, 1.0, 1.0, 0.1, 0.1)
        .unwrap()
        .with_snr_db(10.0);
    let constellation = Constellation::new(Scheme::Qpsk);
    let channels = 100u64;
    let samples = 300;

    let sums = (0..channels)
        .into_par_iter()
        .map(|t| {
            let stream = RngStream::new(42).substream(t);
            let mut rng = stream.rng();
            let chan = ChannelPair::rayleigh(&mut rng, &cfg);
            let eval = stream.substream(1);
            let sr_of = |pattern| {
                secrecy_rate_auto(&chan, &pattern, &cfg, eval, samples)
                    .unwrap()
                    .sr
            };
            let es = tas_exhaustive_sr(&chan, &cfg, eval, samples).unwrap();
            let slnr = tas_max_slnr(&chan, None, &cfg);
            let edas = tas_edas(&chan, &constellation, &cfg, EdasMode::MaxBobDmin).unwrap();
            let random = tas_random(stream.substream(2), &cfg);
            [
                es.score,
                sr_of(slnr.pattern),
                sr_of(edas.pattern),
                sr_of(random.pattern),
            ]
        })
        .reduce(
            || [0.0; 4],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    println!("mean secrecy rate over {channels} channels at 10 dB (bits/channel use):");
    for (name, sum) in ["exhaustive search", "max-slnr", "edas (max Bob d_min)", "random"]
        .iter()
        .zip(sums)
    {
        println!("  {name:<22} {:.4}", sum / channels as f64);
    }
}
