use depolcap::capacity::{
    binary_capacity_closed_form, blahut_arimoto, holevo_quantity, optimize_two_state_prior,
    ClassicalChannelMatrix,
};
use depolcap::channel::twirl_exact;
use depolcap::qstate::{InputLabel, TwoQubitState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_row(rng: &mut ChaCha8Rng, width: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..width).map(|_| rng.random::<f64>() + 1e-3).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|v| v / sum).collect()
}

/// I(X;Y) in bits computed directly from the joint distribution.
fn mutual_information(rows: &[Vec<f64>], prior: &[f64]) -> f64 {
    let outputs = rows[0].len();
    let q: Vec<f64> = (0..outputs)
        .map(|y| rows.iter().zip(prior).map(|(r, p)| p * r[y]).sum())
        .collect();
    let mut total = 0.0;
    for (row, &p) in rows.iter().zip(prior) {
        for (y, &w) in row.iter().enumerate() {
            if p > 0.0 && w > 0.0 {
                total += p * w * (w / q[y]).log2();
            }
        }
    }
    total
}

#[test]
fn blahut_arimoto_matches_binary_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let ch = ClassicalChannelMatrix::new(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap();
        let ba = blahut_arimoto(&ch, 1e-10, 1_000_000).unwrap();
        let exact = binary_capacity_closed_form(a, b).unwrap();
        assert!(
            (ba.capacity_bits - exact.capacity_bits).abs() < 1e-9,
            "a={a} b={b}: {} vs {}",
            ba.capacity_bits,
            exact.capacity_bits
        );
        // the closed-form prior attains the closed-form value
        let direct = mutual_information(ch.rows(), &exact.optimal_prior);
        assert!((direct - exact.capacity_bits).abs() < 1e-12);
    }
}

#[test]
fn blahut_arimoto_beats_prior_grid_search_on_three_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| random_row(&mut rng, 4)).collect();
        let ch = ClassicalChannelMatrix::new(rows.clone()).unwrap();
        let ba = blahut_arimoto(&ch, 1e-10, 1_000_000).unwrap();
        let steps = 200;
        let mut best = 0.0f64;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let p = [i as f64, j as f64, (steps - i - j) as f64].map(|v| v / steps as f64);
                best = best.max(mutual_information(&rows, &p));
            }
        }
        assert!(ba.capacity_bits + 1e-9 >= best);
        assert!(ba.capacity_bits - best < 1e-4);
        let at_prior = mutual_information(&rows, &ba.optimal_prior);
        assert!((at_prior - ba.capacity_bits).abs() < 1e-9);
    }
}

#[test]
fn merged_outcomes_carry_no_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let row = random_row(&mut rng, 3);
        let ch = ClassicalChannelMatrix::new(vec![row.clone(), row.clone(), row]).unwrap();
        let r = blahut_arimoto(&ch, 1e-12, 10).unwrap();
        assert!(r.capacity_bits.abs() < 1e-12);
    }
    // inputs distinguishable only through outcomes that are then merged
    let merged = ClassicalChannelMatrix::new(vec![vec![1.0], vec![1.0]]).unwrap();
    assert_eq!(blahut_arimoto(&merged, 1e-12, 10).unwrap().capacity_bits, 0.0);
}

#[test]
fn holevo_bound_dominates_singlet_triplet_measurement() {
    // A singlet/triplet measurement on Werner states yields the binary channel
    // with P(singlet | i) = F_i.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (f0, f1): (f64, f64) = (rng.random(), rng.random());
        let (w0, w1) = (TwoQubitState::werner(f0).unwrap(), TwoQubitState::werner(f1).unwrap());
        let chi = optimize_two_state_prior(&w0, &w1, 1e-9).unwrap().chi_bits;
        let c = binary_capacity_closed_form(f0, f1).unwrap().capacity_bits;
        assert!(chi + 1e-9 >= c, "F=({f0},{f1}) χ={chi} C={c}");
    }
}

#[test]
fn holevo_bound_is_attained_for_both_ensembles() {
    let twirled = |l: InputLabel| twirl_exact(&TwoQubitState::named(l)).state;
    let sep = optimize_two_state_prior(
        &twirled(InputLabel::Parallel),
        &twirled(InputLabel::Orthogonal),
        1e-9,
    )
    .unwrap();
    let sep_c = binary_capacity_closed_form(0.0, 0.5).unwrap().capacity_bits;
    assert!((sep.chi_bits - sep_c).abs() < 1e-9);
    assert!((sep.prior - 0.4).abs() < 1e-4);

    let ent = optimize_two_state_prior(
        &twirled(InputLabel::Singlet),
        &twirled(InputLabel::TripletPlus),
        1e-9,
    )
    .unwrap();
    assert!((ent.chi_bits - 1.0).abs() < 1e-9);
    assert!((ent.prior - 0.5).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn capacity_is_permutation_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..3).map(|_| random_row(&mut rng, 3)).collect();
        let base = blahut_arimoto(&ClassicalChannelMatrix::new(rows.clone()).unwrap(), 1e-10, 1_000_000)
            .unwrap()
            .capacity_bits;
        // swap inputs 0 and 2, rotate outputs
        let permuted: Vec<Vec<f64>> = [2, 1, 0]
            .iter()
            .map(|&i| vec![rows[i][1], rows[i][2], rows[i][0]])
            .collect();
        let other = blahut_arimoto(&ClassicalChannelMatrix::new(permuted).unwrap(), 1e-10, 1_000_000)
            .unwrap()
            .capacity_bits;
        prop_assert!((base - other).abs() < 2e-10);
    }

    #[test]
    fn capacity_within_trivial_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..2).map(|_| random_row(&mut rng, 3)).collect();
        let r = blahut_arimoto(&ClassicalChannelMatrix::new(rows).unwrap(), 1e-10, 1_000_000).unwrap();
        prop_assert!(r.capacity_bits >= 0.0 && r.capacity_bits <= 1.0 + 1e-12);
        prop_assert!((r.optimal_prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holevo_quantity_is_bounded_by_prior_entropy(p in 0.0f64..1.0, f0 in 0.0f64..1.0, f1 in 0.0f64..1.0) {
        let chi = holevo_quantity(&[
            (1.0 - p, TwoQubitState::werner(f0).unwrap()),
            (p, TwoQubitState::werner(f1).unwrap()),
        ])
        .unwrap();
        let h = depolcap::capacity::binary_entropy(p);
        prop_assert!(chi >= 0.0 && chi <= h + 1e-12);
    }
}
