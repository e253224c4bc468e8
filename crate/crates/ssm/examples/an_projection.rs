//! Artificial-noise projection: build the null-space projector for a random
//! link and show where the AN power lands.
//!
//! ```bash
//! cargo run -p ssm --release --example an_projection
//! ```

use ssm::anpa::build_an_projector;
use ssm::numerics::RngStream;
use ssm::smcore::{draw_channel_use, ChannelPair, SelectionPattern, SystemConfig};

fn main() {
    // 4 selected antennas, 2 receive antennas at each side: the null space
    // of Bob's effective channel has 2 dimensions for the AN to live in.
    let cfg = SystemConfig::new(6, 2, 2, 4, 1.0, 0.5, 0.05, 0.05).unwrap();
    let mut rng = RngStream::new(7).rng();
    let chan = ChannelPair::rayleigh(&mut rng, &cfg);
    let sel = SelectionPattern::first(cfg.n_t);

    let proj = build_an_projector(&chan.h_b, &sel).unwrap();
    println!(
        "projector: {} x {} (AN dimension {})",
        proj.matrix().nrows(),
        proj.matrix().ncols(),
        proj.an_dim()
    );

    let h_eff_b = sel.effective_channel(&chan.h_b);
    let h_eff_e = sel.effective_channel(&chan.h_e);
    println!(
        "null-space residual at Bob: {:.3e} (relative to ||H_b||)",
        (&h_eff_b * proj.matrix()).norm() / chan.h_b.norm()
    );

    // Empirical AN power at both receivers over many channel uses.
    let trials = 50_000;
    let (mut p_bob, mut p_eve) = (0.0, 0.0);
    for _ in 0..trials {
        let draw = draw_channel_use(&mut rng, proj.an_dim(), cfg.n_rb, cfg.sigma2_b);
        let an = proj.matrix() * &draw.an;
        p_bob += (&h_eff_b * &an).norm_squared();
        p_eve += (&h_eff_e * &an).norm_squared();
    }
    let scale = (1.0 - cfg.beta) * cfg.p_s / trials as f64;
    println!(
        "mean AN power x (1-beta) P_S: at Bob {:.3e}, at Eve {:.3}",
        p_bob * scale,
        p_eve * scale
    );
    println!("the AN budget lands on the eavesdropper only.");
}
