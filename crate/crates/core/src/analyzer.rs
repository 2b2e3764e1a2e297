//! Receiver side: Hong-Ou-Mandel interference at the balanced coupler BS3
//! followed by the non-number-resolving cascade BS4/BS5 → D1..D4.
//!
//! Photons leaving BS3 through different ports herald the singlet projection.
//! Both photons in one port herald the symmetric (triplet) subspace, but the
//! cascade coupler after that port separates them onto two detectors only half
//! of the time, hence the factor 1/2 on detected triplet coincidences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::TwoQubitState;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerModel {
    /// Per-photon detection probability.
    pub detector_efficiency: f64,
    /// Probability that the pair takes the required path through BS1 and BS2.
    pub routing_efficiency: f64,
    /// Peak two-photon mode overlap `m₀`, i.e. the Hong-Ou-Mandel visibility
    /// at zero delay (the squared single-photon amplitude overlap).
    pub indistinguishability_max: f64,
    /// Interference filter FWHM, meters.
    pub filter_fwhm_wavelength: f64,
    /// Filter center wavelength, meters.
    pub center_wavelength: f64,
    /// Coincidence window, seconds.
    pub coincidence_window: f64,
    /// Expected accidental coincidences per trial, added to both classes.
    pub accidental_rate: f64,
}

impl Default for AnalyzerModel {
    /// Defaults describe the fiber-coupler setup. `detector_efficiency = 1`
    /// and `indistinguishability_max = 0.95` are assumptions, not measured
    /// values; dead time, dark counts and afterpulsing are not modeled.
    fn default() -> Self {
        AnalyzerModel {
            detector_efficiency: 1.0,
            routing_efficiency: 0.25 * 0.25,
            indistinguishability_max: 0.95,
            filter_fwhm_wavelength: 10.5e-9,
            center_wavelength: 780e-9,
            coincidence_window: 3e-9,
            accidental_rate: 0.0,
        }
    }
}

impl AnalyzerModel {
    /// Lossless routing and detection with perfect mode overlap.
    pub fn ideal() -> Self {
        AnalyzerModel {
            detector_efficiency: 1.0,
            routing_efficiency: 1.0,
            indistinguishability_max: 1.0,
            ..Default::default()
        }
    }

    pub fn with_overlap(mut self, m0: f64) -> Self {
        self.indistinguishability_max = m0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("detector_efficiency", self.detector_efficiency),
            ("routing_efficiency", self.routing_efficiency),
            ("indistinguishability_max", self.indistinguishability_max),
            ("accidental_rate", self.accidental_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let positive = [
            ("filter_fwhm_wavelength", self.filter_fwhm_wavelength),
            ("center_wavelength", self.center_wavelength),
            ("coincidence_window", self.coincidence_window),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Filter bandwidth in frequency, `Δν = c·Δλ/λ²`.
    pub fn frequency_fwhm(&self) -> f64 {
        SPEED_OF_LIGHT * self.filter_fwhm_wavelength / (self.center_wavelength * self.center_wavelength)
    }

    /// Rms width `σ_τ` of the overlap in delay.
    ///
    /// For a Gaussian spectral intensity of rms width `σ_ν = Δν / (2√(2 ln 2))`
    /// shared by both photons, the amplitude overlap at delay `τ` is
    /// `∫ S(ν) e^{2πiντ} dν / ∫ S(ν) dν = exp(−2π²σ_ν²τ²)`. Interference
    /// visibility goes with its square, `exp(−4π²σ_ν²τ²)`, a Gaussian in `τ`
    /// with `σ_τ = 1 / (2√2·π σ_ν)`.
    pub fn overlap_width(&self) -> f64 {
        let sigma_nu = self.frequency_fwhm() / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        1.0 / (2.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI * sigma_nu)
    }

    /// Overall detection probability of a routed, separated photon pair.
    pub fn pair_efficiency(&self) -> f64 {
        self.routing_efficiency * self.detector_efficiency * self.detector_efficiency
    }

    /// Whether clicks from photons that took the unbalanced paths (offset by
    /// `pulse_separation`) fall outside the coincidence window.
    pub fn rejects_satellites(&self, pulse_separation: f64) -> bool {
        pulse_separation > self.coincidence_window
    }
}

/// `m(τ) = m₀·exp(−τ²/(2σ_τ²))`.
pub fn mode_overlap(delay: f64, model: &AnalyzerModel) -> f64 {
    let s = model.overlap_width();
    model.indistinguishability_max * (-(delay * delay) / (2.0 * s * s)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbabilities {
    /// Photons leave BS3 through different ports.
    pub p_singlet_ideal: f64,
    /// Photons leave BS3 through the same port.
    pub p_triplet_ideal: f64,
    pub p_singlet_detected: f64,
    pub p_triplet_detected: f64,
}

/// Outcome probabilities for a pair in state `rho` at relative delay `delay`.
///
/// With singlet weight `F` and overlap `m`, the different-port probability
/// is `[1 − m(1 − 2F)]/2`.
pub fn outcome_probabilities(
    rho: &TwoQubitState,
    delay: f64,
    model: &AnalyzerModel,
) -> OutcomeProbabilities {
    let f = rho.singlet_fidelity();
    let m = mode_overlap(delay, model);
    let p_singlet_ideal = (0.5 * (1.0 - m * (1.0 - 2.0 * f))).clamp(0.0, 1.0);
    let p_triplet_ideal = 1.0 - p_singlet_ideal;
    let eta = model.pair_efficiency();
    OutcomeProbabilities {
        p_singlet_ideal,
        p_triplet_ideal,
        p_singlet_detected: eta * p_singlet_ideal + model.accidental_rate,
        p_triplet_detected: eta * p_triplet_ideal / 2.0 + model.accidental_rate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    D1,
    D2,
    D3,
    D4,
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "D1" => Ok(Detector::D1),
            "D2" => Ok(Detector::D2),
            "D3" => Ok(Detector::D3),
            "D4" => Ok(Detector::D4),
            other => Err(Error::invalid(format!("unknown detector `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventClass {
    Singlet,
    Triplet,
}

/// D1, D2 sit behind one BS3 port and D3, D4 behind the other.
pub fn classify_detector_pair(a: Detector, b: Detector) -> Result<EventClass> {
    use Detector::*;
    match (a.min(b), a.max(b)) {
        (x, y) if x == y => Err(Error::invalid(format!(
            "a coincidence needs two distinct detectors, got {x} twice"
        ))),
        (D1, D2) | (D3, D4) => Ok(EventClass::Triplet),
        _ => Ok(EventClass::Singlet),
    }
}
