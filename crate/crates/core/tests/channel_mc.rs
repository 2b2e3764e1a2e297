use depolcap::channel::{
    twirl_exact, twirl_monte_carlo, twirl_monte_carlo_sharded, ChannelModel,
};
use depolcap::qstate::{InputLabel, Matrix4c, PolarizationUnitary, TwoQubitState, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plain sequential average over `n` Haar unitaries, independent of the
/// crate's per-index seeding and block summation.
fn haar_average(rho: &TwoQubitState, n: usize, seed: u64, independent: bool) -> TwoQubitState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Matrix4c::zeros();
    for _ in 0..n {
        let u = PolarizationUnitary::haar(&mut rng);
        let out = if independent {
            let v = PolarizationUnitary::haar(&mut rng);
            rho.apply_local(&u, &v)
        } else {
            rho.apply_collective(&u)
        };
        acc += out.matrix();
    }
    TwoQubitState::from_matrix(acc * C64::new(1.0 / n as f64, 0.0)).unwrap()
}

#[test]
fn haar_oracle_agrees_with_exact_twirl_for_parallel() {
    let rho = TwoQubitState::named(InputLabel::Parallel);
    let oracle = haar_average(&rho, 100_000, 1, false);
    let exact = twirl_exact(&rho);
    assert!(oracle.trace_distance(&exact.state) < 0.01);
    assert!(exact.state.trace_distance(&TwoQubitState::werner(0.0).unwrap()) < 1e-12);
}

#[test]
fn independent_unitaries_give_maximally_mixed_state() {
    let rho = TwoQubitState::named(InputLabel::Singlet);
    let oracle = haar_average(&rho, 100_000, 2, true);
    assert!(oracle.trace_distance(&TwoQubitState::maximally_mixed()) < 0.01);
}

#[test]
fn monte_carlo_converges_at_statistical_rate() {
    for n in [1_000u64, 10_000, 100_000] {
        for l in InputLabel::ALL {
            let rho = TwoQubitState::named(l);
            let mc = twirl_monte_carlo(&rho, &ChannelModel::monte_carlo(n, 42)).unwrap();
            let d = mc.state.trace_distance(&twirl_exact(&rho).state);
            assert!(d <= 3.0 / (n as f64).sqrt(), "{l} n={n} d={d}");
            assert!((mc.singlet_weight - mc.state.singlet_fidelity()).abs() < 1e-10);
        }
    }
}

#[test]
fn monte_carlo_is_shard_count_independent() {
    let rho = TwoQubitState::named(InputLabel::Orthogonal);
    let mut model = ChannelModel::monte_carlo(5_000, 99);
    model.decorrelation_angle_std = 0.4;
    model.coherence_time = 6e-9;
    let reference = twirl_monte_carlo(&rho, &model).unwrap();
    for shards in [1, 2, 3, 7, 16] {
        let r = twirl_monte_carlo_sharded(&rho, &model, shards).unwrap();
        for (a, b) in r.state.matrix().iter().zip(reference.state.matrix().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
    let again = twirl_monte_carlo(&rho, &model).unwrap();
    assert_eq!(again, reference);
}

#[test]
fn saturated_decorrelation_scrambles_the_singlet() {
    let mut model = ChannelModel::monte_carlo(100_000, 3);
    model.decorrelation_angle_std = std::f64::consts::PI;
    model.pulse_separation = 1.0;
    model.coherence_time = 1e-6;
    let r = twirl_monte_carlo(&TwoQubitState::named(InputLabel::Singlet), &model).unwrap();
    let d = r.state.trace_distance(&TwoQubitState::maximally_mixed());
    assert!(d < 0.02, "trace distance {d}");
}

#[test]
fn small_decorrelation_matches_rotation_average() {
    // For δU = exp(−iα n·σ) the singlet keeps weight cos²α. Small steps add
    // as rotation vectors, so the net angle has E[α²] = σ² and 1 − F ≈ σ².
    let sigma: f64 = 0.05;
    let mut model = ChannelModel::monte_carlo(20_000, 8);
    model.decorrelation_angle_std = sigma;
    model.pulse_separation = 1.0;
    model.coherence_time = 1.0;
    let r = twirl_monte_carlo(&TwoQubitState::named(InputLabel::Singlet), &model).unwrap();
    let loss = 1.0 - r.singlet_weight;
    let expected = sigma * sigma;
    assert!((loss - expected).abs() < 0.1 * expected, "loss {loss} expected {expected}");
}
