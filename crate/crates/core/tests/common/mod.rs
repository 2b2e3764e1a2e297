//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use depolcap::qstate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Two-photon Hong-Ou-Mandel probability that the photons leave a balanced
/// beamsplitter through different ports, by explicit Fock-space expansion.
///
/// Photon A enters port 0 in temporal mode e₀, photon B enters port 1 in
/// `overlap·e₀ + √(1 − overlap²)·e₁`. Modes are (port, polarization, time).
pub fn fock_different_port_probability(amps: &[C64; 4], overlap: f64) -> f64 {
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let time_b = [overlap, (1.0 - overlap * overlap).max(0.0).sqrt()];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // output port amplitudes for each input port
    let bs = [[h, h], [h, -h]];
    let mode = |port: usize, pol: usize, t: usize| port * 4 + pol * 2 + t;

    // coefficients of a†_i a†_j (i ≤ j) acting on vacuum
    let mut terms: HashMap<(usize, usize), C64> = HashMap::new();
    for pa in 0..2 {
        for pb in 0..2 {
            let c = amps[2 * pa + pb] / norm;
            for (tb, &ab) in time_b.iter().enumerate() {
                for oa in 0..2 {
                    for ob in 0..2 {
                        let coef = c * ab * bs[0][oa] * bs[1][ob];
                        let i = mode(oa, pa, 0);
                        let j = mode(ob, pb, tb);
                        *terms.entry((i.min(j), i.max(j))).or_default() += coef;
                    }
                }
            }
        }
    }
    let mut total = 0.0;
    let mut split = 0.0;
    for ((i, j), coef) in terms {
        // |1_i 1_j⟩ has amplitude coef; |2_i⟩ has amplitude √2·coef
        let p = if i == j { 2.0 * coef.norm_sqr() } else { coef.norm_sqr() };
        total += p;
        if i / 4 != j / 4 {
            split += p;
        }
    }
    assert!((total - 1.0).abs() < 1e-12, "Fock state not normalized: {total}");
    split
}

/// Normalized overlap `∫S(ν)cos(2π(ν−ν₀)τ)dν / ∫S(ν)dν` of a Gaussian
/// spectral intensity with FWHM `fwhm_hz`, by trapezoidal quadrature.
pub fn spectral_overlap(fwhm_hz: f64, delay: f64) -> f64 {
    let sigma = fwhm_hz / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let n = 4000;
    let lo = -14.0 * sigma;
    let step = 28.0 * sigma / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let dnu = lo + step * k as f64;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let s = (-0.5 * (dnu / sigma).powi(2)).exp();
        num += w * s * (2.0 * std::f64::consts::PI * dnu * delay).cos();
        den += w * s;
    }
    num / den
}

pub fn random_pure_amplitudes(rng: &mut ChaCha8Rng) -> [C64; 4] {
    std::array::from_fn(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
