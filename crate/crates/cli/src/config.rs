//! Flat TOML run configuration with unit-suffixed keys.
//!
//! Every key can be overridden by an environment variable named
//! `DEPOLCAP_<KEY>` (upper case), whose value is parsed as a TOML value and
//! falls back to a plain string.

use std::path::{Path, PathBuf};

use depolcap::analyzer::AnalyzerModel;
use depolcap::channel::{ChannelModel, Regime};
use depolcap::experiment::{delay_grid, DEFAULT_DELAY_POINTS, DEFAULT_SPAN_FWHMS, DEFAULT_TRIALS_PER_POINT};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const ENV_PREFIX: &str = "DEPOLCAP_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // channel
    pub regime: Regime,
    pub coherence_time_s: f64,
    pub pulse_separation_s: f64,
    pub decorrelation_angle_std_rad: f64,
    pub mc_samples: u64,

    // analyzer
    pub detector_efficiency: f64,
    pub routing_efficiency: f64,
    pub indistinguishability_max: f64,
    pub filter_fwhm_m: f64,
    pub center_wavelength_m: f64,
    pub coincidence_window_s: f64,
    pub accidental_rate_per_trial: f64,

    // scans
    pub delay_points: usize,
    /// Half span of the delay grid; `None` means ±3 FWHM of the dip.
    pub delay_half_span_s: Option<f64>,
    pub trials_per_point: u64,

    // run
    pub output_dir: PathBuf,
    pub seed: Option<u64>,

    // reproduce
    pub ideal_tolerance_bits: f64,
    pub experimental_tolerance_bits: f64,
    pub experimental_separable_bits: f64,
    pub experimental_entangled_bits: f64,
    pub experimental_trials_per_point: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ch = ChannelModel::default();
        let an = AnalyzerModel::default();
        RunConfig {
            regime: ch.regime,
            coherence_time_s: ch.coherence_time,
            pulse_separation_s: ch.pulse_separation,
            decorrelation_angle_std_rad: ch.decorrelation_angle_std,
            mc_samples: ch.mc_samples,
            detector_efficiency: an.detector_efficiency,
            routing_efficiency: an.routing_efficiency,
            indistinguishability_max: an.indistinguishability_max,
            filter_fwhm_m: an.filter_fwhm_wavelength,
            center_wavelength_m: an.center_wavelength,
            coincidence_window_s: an.coincidence_window,
            accidental_rate_per_trial: an.accidental_rate,
            delay_points: DEFAULT_DELAY_POINTS,
            delay_half_span_s: None,
            trials_per_point: DEFAULT_TRIALS_PER_POINT,
            output_dir: PathBuf::from("out"),
            seed: None,
            ideal_tolerance_bits: 0.01,
            experimental_tolerance_bits: 0.02,
            experimental_separable_bits: 0.30,
            experimental_entangled_bits: 0.82,
            experimental_trials_per_point: 10_000_000,
        }
    }
}

impl RunConfig {
    /// Defaults, then the optional file, then environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let vars: Vec<(String, String)> = std::env::vars().collect();
        Self::load_with_env(path, &vars)
    }

    pub fn load_with_env(path: Option<&Path>, env: &[(String, String)]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (name, raw) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.clone()));
            table.insert(key, value);
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: depolcap::Error| CliError::Usage(e.to_string());
        self.channel().validate().map_err(usage)?;
        self.analyzer().validate().map_err(usage)?;
        self.delays()?;
        if self.trials_per_point == 0 || self.experimental_trials_per_point == 0 {
            return Err(CliError::Usage("trials per point must be at least 1".into()));
        }
        for (k, v) in [
            ("ideal_tolerance_bits", self.ideal_tolerance_bits),
            ("experimental_tolerance_bits", self.experimental_tolerance_bits),
        ] {
            if !(v > 0.0) {
                return Err(CliError::Usage(format!("{k} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn channel(&self) -> ChannelModel {
        ChannelModel {
            regime: self.regime,
            coherence_time: self.coherence_time_s,
            pulse_separation: self.pulse_separation_s,
            decorrelation_angle_std: self.decorrelation_angle_std_rad,
            mc_samples: self.mc_samples,
            rng_seed: 0,
        }
    }

    pub fn analyzer(&self) -> AnalyzerModel {
        AnalyzerModel {
            detector_efficiency: self.detector_efficiency,
            routing_efficiency: self.routing_efficiency,
            indistinguishability_max: self.indistinguishability_max,
            filter_fwhm_wavelength: self.filter_fwhm_m,
            center_wavelength: self.center_wavelength_m,
            coincidence_window: self.coincidence_window_s,
            accidental_rate: self.accidental_rate_per_trial,
        }
    }

    pub fn delays(&self) -> Result<Vec<f64>, CliError> {
        let fwhm = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * self.analyzer().overlap_width();
        let span = self.delay_half_span_s.unwrap_or(DEFAULT_SPAN_FWHMS * fwhm);
        delay_grid(span, self.delay_points).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// SHA-256 of the effective configuration (seed excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = None;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_validate() {
        let c = RunConfig::load_with_env(None, &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.delays().unwrap().len(), 61);
    }

    #[test]
    fn env_overrides_and_unknown_keys() {
        let c = RunConfig::load_with_env(
            None,
            &env(&[
                ("DEPOLCAP_TRIALS_PER_POINT", "1234"),
                ("DEPOLCAP_REGIME", "monte-carlo"),
                ("DEPOLCAP_OUTPUT_DIR", "/tmp/x"),
                ("OTHER", "1"),
            ]),
        )
        .unwrap();
        assert_eq!(c.trials_per_point, 1234);
        assert_eq!(c.regime, Regime::MonteCarlo);
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));

        match RunConfig::load_with_env(None, &env(&[("DEPOLCAP_TRIALS", "5")])) {
            Err(CliError::Usage(m)) => assert!(m.contains("trials"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::load_with_env(None, &env(&[("DEPOLCAP_ROUTING_EFFICIENCY", "2")])).is_err());
    }

    #[test]
    fn hash_ignores_seed() {
        let mut a = RunConfig::default();
        let h = a.hash();
        a.seed = Some(5);
        assert_eq!(a.hash(), h);
        a.trials_per_point = 7;
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }
}
