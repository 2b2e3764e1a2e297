//! The noisy fiber link.
//!
//! Birefringence fluctuates slowly compared with the spacing of the two
//! photons, so both see (nearly) the same random unitary `U`. Averaged over
//! Haar-distributed `U` this is the `U⊗U` twirl, which keeps only the singlet
//! weight of the input.
//!
//! The Monte Carlo route lets the second photon see `U·δU`. The decorrelation
//! `δU` is an isotropic random walk on SU(2): [`DECORRELATION_SUBSTEPS`]
//! rotations about independent uniformly random axes, each by a Gaussian
//! (Jones-vector) angle of standard deviation `σ/√K`, where
//! `σ = decorrelation_angle_std · min(1, pulse_separation / coherence_time)`.
//! For small `σ` this is a single rotation by an angle of rms `σ`; for
//! `σ ≳ π/2` the walk has mixed to the Haar measure and the two photons see
//! independent unitaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{Matrix4c, PolarizationUnitary, TwoQubitState, C64};

/// Number of sub-rotations composing the decorrelation random walk.
pub const DECORRELATION_SUBSTEPS: usize = 16;

/// Samples per deterministic summation block. Block sums are always added in
/// index order so the result does not depend on how blocks are distributed.
pub const MC_BLOCK_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ExactTwirl,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub regime: Regime,
    /// Birefringence fluctuation timescale, seconds.
    pub coherence_time: f64,
    /// Temporal separation of the two photons in the fiber, seconds.
    pub pulse_separation: f64,
    /// Rms rotation angle between the two photons' unitaries at full
    /// decorrelation, radians.
    pub decorrelation_angle_std: f64,
    pub mc_samples: u64,
    pub rng_seed: u64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            regime: Regime::ExactTwirl,
            coherence_time: 1e-3,
            pulse_separation: 6e-9,
            decorrelation_angle_std: 0.0,
            mc_samples: 100_000,
            rng_seed: 0,
        }
    }
}

impl ChannelModel {
    pub fn monte_carlo(mc_samples: u64, rng_seed: u64) -> Self {
        ChannelModel {
            regime: Regime::MonteCarlo,
            mc_samples,
            rng_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coherence_time > 0.0 && self.coherence_time.is_finite()) {
            return Err(Error::Config(format!(
                "coherence_time must be positive, got {}",
                self.coherence_time
            )));
        }
        if !(self.pulse_separation >= 0.0 && self.pulse_separation.is_finite()) {
            return Err(Error::Config(format!(
                "pulse_separation must be non-negative, got {}",
                self.pulse_separation
            )));
        }
        if !(self.decorrelation_angle_std >= 0.0 && self.decorrelation_angle_std.is_finite()) {
            return Err(Error::Config(format!(
                "decorrelation_angle_std must be non-negative, got {}",
                self.decorrelation_angle_std
            )));
        }
        if self.mc_samples < 1 {
            return Err(Error::Config("mc_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Std of the decorrelation angle actually applied between the photons.
    pub fn effective_decorrelation_std(&self) -> f64 {
        self.decorrelation_angle_std * (self.pulse_separation / self.coherence_time).min(1.0)
    }

    /// Sends `rho` through the channel in the configured regime.
    pub fn transmit(&self, rho: &TwoQubitState) -> Result<TwirlResult> {
        self.validate()?;
        match self.regime {
            Regime::ExactTwirl => Ok(twirl_exact(rho)),
            Regime::MonteCarlo => twirl_monte_carlo(rho, self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwirlResult {
    pub state: TwoQubitState,
    /// `F` in `F·Π₋ + (1 − F)·Π_t/3`.
    pub singlet_weight: f64,
    pub sample_count: u64,
}

/// Exact `U⊗U` Haar twirl.
pub fn twirl_exact(rho: &TwoQubitState) -> TwirlResult {
    let f = rho.singlet_fidelity();
    let state = TwoQubitState::werner(f).expect("fidelity is clamped to [0, 1]");
    TwirlResult {
        singlet_weight: state.singlet_fidelity(),
        state,
        sample_count: 1,
    }
}

/// Monte Carlo average of `(U⊗U·δU) ρ (U⊗U·δU)†`, parallelized over blocks.
pub fn twirl_monte_carlo(rho: &TwoQubitState, model: &ChannelModel) -> Result<TwirlResult> {
    let plan = McPlan::new(model)?;
    let sums: Vec<Matrix4c> = (0..plan.blocks())
        .into_par_iter()
        .map(|b| plan.block_sum(rho, b))
        .collect();
    Ok(plan.finish(sums))
}

/// Same as [`twirl_monte_carlo`], split over exactly `shards` OS threads.
///
/// The output is bit-identical for every shard count.
pub fn twirl_monte_carlo_sharded(
    rho: &TwoQubitState,
    model: &ChannelModel,
    shards: usize,
) -> Result<TwirlResult> {
    let plan = McPlan::new(model)?;
    let shards = shards.max(1);
    let blocks = plan.blocks();
    let per_shard = blocks.div_ceil(shards);
    let plan_ref = &plan;
    let sums: Vec<Matrix4c> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..shards)
            .map(|s| {
                let lo = (s * per_shard).min(blocks);
                let hi = ((s + 1) * per_shard).min(blocks);
                scope.spawn(move || {
                    (lo..hi)
                        .map(|b| plan_ref.block_sum(rho, b))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("monte carlo shard panicked"))
            .collect()
    });
    Ok(plan.finish(sums))
}

/// The no-correlation baseline: independent Haar twirls on each photon.
pub fn scramble_single_use(_rho: &TwoQubitState) -> TwoQubitState {
    TwoQubitState::maximally_mixed()
}

/// Draws the pair of unitaries `(U, U·δU)` for sample `index`.
///
/// Each index gets its own ChaCha stream so any sample can be regenerated
/// independently of the others.
pub fn sample_unitary_pair(
    seed: u64,
    index: u64,
    decorrelation_std: f64,
) -> (PolarizationUnitary, PolarizationUnitary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let u = PolarizationUnitary::haar(&mut rng);
    if decorrelation_std == 0.0 {
        return (u, u);
    }
    let step_std = decorrelation_std / (DECORRELATION_SUBSTEPS as f64).sqrt();
    let delta = (0..DECORRELATION_SUBSTEPS).fold(PolarizationUnitary::identity(), |acc, _| {
        let angle: f64 = step_std * rng.sample::<f64, _>(StandardNormal);
        acc * PolarizationUnitary::random_axis_rotation(&mut rng, angle)
    });
    (u, u * delta)
}

struct McPlan {
    seed: u64,
    samples: u64,
    decorrelation_std: f64,
}

impl McPlan {
    fn new(model: &ChannelModel) -> Result<Self> {
        if model.regime != Regime::MonteCarlo {
            return Err(Error::Config(
                "twirl_monte_carlo requires the monte-carlo regime".into(),
            ));
        }
        model.validate()?;
        Ok(McPlan {
            seed: model.rng_seed,
            samples: model.mc_samples,
            decorrelation_std: model.effective_decorrelation_std(),
        })
    }

    fn blocks(&self) -> usize {
        (self.samples as usize).div_ceil(MC_BLOCK_SIZE)
    }

    fn block_sum(&self, rho: &TwoQubitState, block: usize) -> Matrix4c {
        let lo = (block * MC_BLOCK_SIZE) as u64;
        let hi = (lo + MC_BLOCK_SIZE as u64).min(self.samples);
        let m = rho.matrix();
        (lo..hi).fold(Matrix4c::zeros(), |acc, i| {
            let (u1, u2) = sample_unitary_pair(self.seed, i, self.decorrelation_std);
            let k = crate::qstate::kron(u1.matrix(), u2.matrix());
            acc + k * m * k.adjoint()
        })
    }

    fn finish(&self, block_sums: Vec<Matrix4c>) -> TwirlResult {
        let total = block_sums
            .into_iter()
            .fold(Matrix4c::zeros(), |acc, s| acc + s);
        let state =
            TwoQubitState::from_trusted(total * C64::new(1.0 / self.samples as f64, 0.0));
        TwirlResult {
            singlet_weight: state.singlet_fidelity(),
            state,
            sample_count: self.samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::InputLabel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_twirl_examples() {
        let s = twirl_exact(&TwoQubitState::named(InputLabel::Singlet));
        assert_abs_diff_eq!(s.singlet_weight, 1.0, epsilon = 1e-15);
        assert!(s.state.trace_distance(&TwoQubitState::named(InputLabel::Singlet)) < 1e-12);

        let p = twirl_exact(&TwoQubitState::named(InputLabel::Parallel));
        assert_abs_diff_eq!(p.singlet_weight, 0.0, epsilon = 1e-15);
        assert!(p.state.trace_distance(&TwoQubitState::werner(0.0).unwrap()) < 1e-12);

        let mm = twirl_exact(&TwoQubitState::maximally_mixed());
        assert_abs_diff_eq!(mm.singlet_weight, 0.25, epsilon = 1e-15);
        assert!(mm.state.trace_distance(&TwoQubitState::maximally_mixed()) < 1e-12);
        assert_eq!(mm.sample_count, 1);
    }

    #[test]
    fn exact_twirl_is_idempotent() {
        for l in InputLabel::ALL {
            let once = twirl_exact(&TwoQubitState::named(l)).state;
            let twice = twirl_exact(&once).state;
            let d = (once.matrix() - twice.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn single_use_scrambling_is_maximally_mixed() {
        for l in InputLabel::ALL {
            let out = scramble_single_use(&TwoQubitState::named(l));
            assert_eq!(out, TwoQubitState::maximally_mixed());
        }
        let mm = TwoQubitState::maximally_mixed();
        assert_eq!(scramble_single_use(&mm), mm);
    }

    #[test]
    fn monte_carlo_requires_its_regime() {
        let model = ChannelModel::default();
        let err = twirl_monte_carlo(&TwoQubitState::named(InputLabel::Singlet), &model);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn perfectly_correlated_singlet_stays_singlet() {
        let model = ChannelModel::monte_carlo(10_000, 5);
        let r = twirl_monte_carlo(&TwoQubitState::named(InputLabel::Singlet), &model).unwrap();
        assert!((r.singlet_weight - 1.0).abs() < 1e-12);
        assert_eq!(r.sample_count, 10_000);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut m = ChannelModel::monte_carlo(10, 1);
        m.coherence_time = 0.0;
        assert!(m.validate().is_err());
        let mut m = ChannelModel::monte_carlo(0, 1);
        assert!(m.validate().is_err());
        m.mc_samples = 1;
        m.decorrelation_angle_std = -1.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn effective_std_saturates() {
        let mut m = ChannelModel::monte_carlo(10, 1);
        m.decorrelation_angle_std = 2.0;
        m.coherence_time = 12e-9;
        assert_abs_diff_eq!(m.effective_decorrelation_std(), 1.0, epsilon = 1e-15);
        m.coherence_time = 1e-9;
        assert_abs_diff_eq!(m.effective_decorrelation_std(), 2.0, epsilon = 1e-15);
    }
}
