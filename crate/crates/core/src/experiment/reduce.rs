use serde::{Deserialize, Serialize};

use super::fit::DipFit;
use crate::analyzer::AnalyzerModel;
use crate::capacity::{blahut_arimoto, CapacityResult, ClassicalChannelMatrix};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::qstate::{InputLabel, TwoQubitState};

/// Capacity tolerance used for every reduced channel.
pub const CAPACITY_TOL: f64 = 1e-9;
pub const CAPACITY_MAX_ITER: usize = 1_000_000;

/// Outcome columns of every reduced channel.
pub const OUTCOMES: [&str; 2] = ["singlet", "triplet"];

/// Binary input alphabets sent through the fiber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// `|↗↗⟩` and `|↗↖⟩`.
    Separable,
    /// `|Ψ₋⟩` and `(|↗↗⟩ + |↖↖⟩)/√2`.
    Entangled,
}

impl Ensemble {
    pub const ALL: [Ensemble; 2] = [Ensemble::Separable, Ensemble::Entangled];

    /// Input symbols in row order of the reduced channel.
    pub fn labels(self) -> [InputLabel; 2] {
        match self {
            Ensemble::Separable => [InputLabel::Parallel, InputLabel::Orthogonal],
            Ensemble::Entangled => [InputLabel::Singlet, InputLabel::TripletPlus],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ensemble::Separable => "separable",
            Ensemble::Entangled => "entangled",
        }
    }
}

impl std::fmt::Display for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two-input, two-outcome channel extracted from a pair of fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedChannel {
    pub matrix: ClassicalChannelMatrix,
    pub provenance: [DipFit; 2],
}

/// Conditional singlet probability for one input:
///
/// ```text
/// s = B_s·(1 − v_s),  t = B_t·(1 − v_t)        fitted curves at τ₀
/// r = B_s / B_t                                 pedestal ratio (ideal 2)
/// P(singlet | input) = s / (s + r·t)
/// ```
///
/// At large delay both ideal outcomes have probability 1/2, so the pedestal
/// ratio is the ratio of singlet to triplet detection efficiencies; scaling
/// `t` by it undoes the cascade penalty on triplet events.
pub fn singlet_probability(fit: &DipFit) -> Result<f64> {
    fit.validate().map_err(|e| Error::Reduction(e.to_string()))?;
    if !(fit.baseline_singlet > 0.0 && fit.baseline_triplet > 0.0) {
        return Err(Error::Reduction(format!(
            "pedestals must be positive (singlet {}, triplet {})",
            fit.baseline_singlet, fit.baseline_triplet
        )));
    }
    let s = (fit.baseline_singlet * (1.0 - fit.visibility_singlet)).max(0.0);
    let t = (fit.baseline_triplet * (1.0 - fit.visibility_triplet)).max(0.0);
    let r = fit.baseline_singlet / fit.baseline_triplet;
    let denom = s + r * t;
    if !(denom > 0.0) {
        return Err(Error::Reduction(
            "both fitted curves vanish at the dip center".into(),
        ));
    }
    Ok(s / denom)
}

pub fn reduce_to_channel(fit0: &DipFit, fit1: &DipFit) -> Result<ReducedChannel> {
    let rows = [fit0, fit1]
        .iter()
        .map(|f| singlet_probability(f).map(|p| vec![p, 1.0 - p]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReducedChannel {
        matrix: ClassicalChannelMatrix::new(rows).map_err(|e| Error::Reduction(e.to_string()))?,
        provenance: [fit0.clone(), fit1.clone()],
    })
}

pub fn evaluate_capacity(rc: &ReducedChannel) -> Result<CapacityResult> {
    blahut_arimoto(&rc.matrix, CAPACITY_TOL, CAPACITY_MAX_ITER)
}

/// Noise-free fit parameters implied by the models, i.e. what a perfect fit
/// of the expected counts returns.
pub fn model_dip_fit(
    label: InputLabel,
    channel: &ChannelModel,
    analyzer: &AnalyzerModel,
    trials_per_point: u64,
) -> Result<DipFit> {
    analyzer.validate()?;
    let f = channel
        .transmit(&TwoQubitState::named(label))?
        .singlet_weight;
    let n = trials_per_point as f64;
    let eta = analyzer.pair_efficiency();
    let acc = analyzer.accidental_rate;
    let swing = eta * analyzer.indistinguishability_max * (1.0 - 2.0 * f);
    let bs = n * (eta / 2.0 + acc);
    let bt = n * (eta / 4.0 + acc);
    let vis = |amp: f64, base: f64| if base > 0.0 { amp / base } else { 0.0 };
    Ok(DipFit {
        input_label: Some(label),
        baseline_singlet: bs,
        baseline_triplet: bt,
        visibility_singlet: vis(n * swing / 2.0, bs),
        visibility_triplet: vis(-n * swing / 4.0, bt),
        width: analyzer.overlap_width(),
        center: 0.0,
        fit_residual: 0.0,
        standard_errors: None,
        iterations: 0,
    })
}

/// Capacity of an ensemble computed from noise-free model fits.
pub fn model_capacity(
    ensemble: Ensemble,
    channel: &ChannelModel,
    analyzer: &AnalyzerModel,
) -> Result<CapacityResult> {
    let [a, b] = ensemble.labels();
    let fa = model_dip_fit(a, channel, analyzer, 1)?;
    let fb = model_dip_fit(b, channel, analyzer, 1)?;
    evaluate_capacity(&reduce_to_channel(&fa, &fb)?)
}

/// Peak mode overlap `m₀` at which the noise-free pipeline yields
/// `target_bits` for `ensemble`, by bisection on the monotone capacity curve.
pub fn calibrate_overlap(
    ensemble: Ensemble,
    target_bits: f64,
    channel: &ChannelModel,
    analyzer: &AnalyzerModel,
) -> Result<f64> {
    let cap = |m: f64| -> Result<f64> {
        Ok(model_capacity(ensemble, channel, &analyzer.clone().with_overlap(m))?.capacity_bits)
    };
    let (c_lo, c_hi) = (cap(0.0)?, cap(1.0)?);
    if !(c_lo..=c_hi).contains(&target_bits) {
        return Err(Error::Config(format!(
            "target {target_bits} bits outside the attainable range [{c_lo:.6}, {c_hi:.6}] for the {ensemble} ensemble"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if cap(mid)? < target_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ideal_fit(label: InputLabel) -> DipFit {
        model_dip_fit(label, &ChannelModel::default(), &AnalyzerModel::ideal(), 1000).unwrap()
    }

    #[test]
    fn ideal_separable_fits_reduce_to_z_channel() {
        let rc = reduce_to_channel(&ideal_fit(InputLabel::Parallel), &ideal_fit(InputLabel::Orthogonal))
            .unwrap();
        let rows = rc.matrix.rows();
        assert_abs_diff_eq!(rows[0][0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[1][0], 0.5, epsilon = 1e-12);
        let c = evaluate_capacity(&rc).unwrap();
        assert_abs_diff_eq!(c.capacity_bits, 0.321928, epsilon = 1e-6);
    }

    #[test]
    fn ideal_entangled_fits_reduce_to_identity() {
        let rc = reduce_to_channel(&ideal_fit(InputLabel::Singlet), &ideal_fit(InputLabel::TripletPlus))
            .unwrap();
        let rows = rc.matrix.rows();
        assert_abs_diff_eq!(rows[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[1][0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(evaluate_capacity(&rc).unwrap().capacity_bits, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn reduced_overlap_recovers_outcome_probabilities() {
        let m0 = 0.8;
        let a = AnalyzerModel::default().with_overlap(m0);
        for l in InputLabel::ALL {
            let fit = model_dip_fit(l, &ChannelModel::default(), &a, 1000).unwrap();
            let f = TwoQubitState::named(l).singlet_fidelity();
            let expected = (1.0 - m0 * (1.0 - 2.0 * f)) / 2.0;
            assert_abs_diff_eq!(singlet_probability(&fit).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_pedestal_is_rejected() {
        let mut f = ideal_fit(InputLabel::Parallel);
        f.baseline_triplet = 0.0;
        assert!(matches!(singlet_probability(&f), Err(Error::Reduction(_))));
    }

    #[test]
    fn calibration_hits_target() {
        let a = AnalyzerModel::default();
        let ch = ChannelModel::default();
        let m = calibrate_overlap(Ensemble::Entangled, 0.82, &ch, &a).unwrap();
        let c = model_capacity(Ensemble::Entangled, &ch, &a.clone().with_overlap(m)).unwrap();
        assert_abs_diff_eq!(c.capacity_bits, 0.82, epsilon = 1e-8);
        assert!(calibrate_overlap(Ensemble::Separable, 0.5, &ch, &a).is_err());
    }
}
