//! Shared test oracles.
//!
//! The quadrature oracle computes the BPSK-AWGN mutual information by
//! Gauss-Hermite integration, fully independent of the Monte-Carlo estimator
//! it is used to check.

/// Gauss-Hermite nodes and weights for the weight `exp(-x^2)`.
///
/// Newton iteration on the Hermite recurrence (physicists' convention).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const EPS: f64 = 3e-14;
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= EPS {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `log2(1 + exp(u))`, stable for large `|u|`.
fn log2_1p_exp(u: f64) -> f64 {
    (u.max(0.0) + (-u.abs()).exp().ln_1p()) * std::f64::consts::LOG2_E
}

/// Mutual information in bits of equiprobable BPSK (`+-a`) observed in
/// circularly-symmetric complex Gaussian noise of total variance `sigma2`.
///
/// Only the real noise component (variance `sigma2 / 2`) matters:
/// `I = 1 - E_v[ log2(1 + exp(-2a(a + v)/s^2)) ]` with `v ~ N(0, s^2)`,
/// integrated by Gauss-Hermite quadrature.
pub fn bpsk_awgn_mi_quadrature(a: f64, sigma2: f64, nodes: usize) -> f64 {
    let s2 = sigma2 / 2.0;
    let s = s2.sqrt();
    let (x, w) = gauss_hermite(nodes);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let v = std::f64::consts::SQRT_2 * s * xi;
        acc += wi * log2_1p_exp(-2.0 * a * (a + v) / s2);
    }
    1.0 - acc / std::f64::consts::PI.sqrt()
}

/// Same integral by brute-force trapezoid over `+-12` standard deviations;
/// a second, independent route used to validate the quadrature itself.
pub fn bpsk_awgn_mi_trapezoid(a: f64, sigma2: f64, steps: usize) -> f64 {
    let s2 = sigma2 / 2.0;
    let s = s2.sqrt();
    let lo = -12.0 * s;
    let hi = 12.0 * s;
    let h = (hi - lo) / steps as f64;
    let density = |v: f64| (-v * v / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
    let integrand = |v: f64| density(v) * log2_1p_exp(-2.0 * a * (a + v) / s2);
    let mut acc = 0.5 * (integrand(lo) + integrand(hi));
    for i in 1..steps {
        acc += integrand(lo + i as f64 * h);
    }
    1.0 - acc * h
}

#[allow(dead_code)]
pub fn snr_db_to_sigma2(p_s: f64, snr_db: f64) -> f64 {
    p_s / 10f64.powf(snr_db / 10.0)
}
