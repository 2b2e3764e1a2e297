//! Simulated delay scans and their reduction to a classical channel.
//!
//! `simulate_scan → fit_gaussian_joint → reduce_to_channel → evaluate_capacity`

mod fit;
mod reduce;
mod scan;

pub use fit::{
    fit_curves, fit_curves_unshared, fit_gaussian_joint, fit_gaussian_pair, fit_gaussian_pair_unshared, DipFit,
    DipFitErrors, UnsharedDipFit, LM_EDM_TOL, LM_MAX_ITERATIONS, LM_PARAM_TOL, MIN_FIT_POINTS,
};
pub use reduce::{
    calibrate_overlap, evaluate_capacity, model_capacity, model_dip_fit, reduce_to_channel,
    singlet_probability, Ensemble, ReducedChannel, CAPACITY_MAX_ITER, CAPACITY_TOL, OUTCOMES,
};
pub use scan::{
    default_delay_grid, delay_grid, expected_counts, simulate_scan, ScanRecord,
    DEFAULT_DELAY_POINTS, DEFAULT_SPAN_FWHMS, DEFAULT_TRIALS_PER_POINT,
};

use serde::Serialize;

use crate::analyzer::AnalyzerModel;
use crate::capacity::CapacityResult;
use crate::channel::ChannelModel;
use crate::error::Result;
use crate::qstate::InputLabel;

/// All artifacts of one ensemble run through the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleRun {
    pub ensemble: Ensemble,
    pub scans: [ScanRecord; 2],
    pub fits: [DipFit; 2],
    pub reduced: ReducedChannel,
    pub capacity: CapacityResult,
}

/// Seed of the scan for `label` derived from a run seed.
pub fn scan_seed(run_seed: u64, label: InputLabel) -> u64 {
    let idx = InputLabel::ALL.iter().position(|&l| l == label).unwrap_or(0) as u64;
    run_seed ^ (idx + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Scans both inputs of `ensemble` (concurrently), fits them jointly with a
/// shared center and width, reduces and evaluates the capacity.
pub fn run_ensemble(
    ensemble: Ensemble,
    channel: &ChannelModel,
    analyzer: &AnalyzerModel,
    delays: &[f64],
    trials_per_point: u64,
    seed: u64,
) -> Result<EnsembleRun> {
    let [a, b] = ensemble.labels();
    let scan = |label: InputLabel| {
        simulate_scan(
            label,
            channel,
            analyzer,
            delays,
            trials_per_point,
            scan_seed(seed, label),
        )
    };
    let (sa, sb) = rayon::join(|| scan(a), || scan(b));
    let (sa, sb) = (sa?, sb?);
    let mut fits = fit_gaussian_joint(&[sa.clone(), sb.clone()])?;
    let (fb, fa) = (fits.pop().expect("two fits"), fits.pop().expect("two fits"));
    let reduced = reduce_to_channel(&fa, &fb)?;
    let capacity = evaluate_capacity(&reduced)?;
    Ok(EnsembleRun {
        ensemble,
        scans: [sa, sb],
        fits: [fa, fb],
        reduced,
        capacity,
    })
}
