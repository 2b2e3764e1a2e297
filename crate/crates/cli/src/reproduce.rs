//! Full pipeline for both ensembles with all intermediate artifacts.
//!
//! Output directory layout:
//!
//! ```text
//! scan_<label>.csv            simulated delay scans
//! fit_<label>.json            fitted Gaussian pairs (joint per ensemble)
//! channel_<ensemble>.csv      reduced P(outcome | input)
//! capacity_<ensemble>.json    Blahut-Arimoto result
//! panel_<x>_<label>.dat       plot data, one file per scan panel
//! summary.json                measured vs expected
//! ```

use std::fmt::Write as _;
use std::path::Path;

use depolcap::analyzer::AnalyzerModel;
use depolcap::experiment::{calibrate_overlap, run_ensemble, DipFit, Ensemble, EnsembleRun, ScanRecord, OUTCOMES};
use depolcap::qstate::InputLabel;
use serde::Serialize;

use crate::commands::{seeded_channel, write};
use crate::config::RunConfig;
use crate::{Case, CliError};

/// Panel letters in scan order: parallel, orthogonal, triplet-plus, singlet.
const PANELS: [(char, InputLabel); 4] = [
    ('a', InputLabel::Parallel),
    ('b', InputLabel::Orthogonal),
    ('c', InputLabel::TripletPlus),
    ('d', InputLabel::Singlet),
];
const FIT_CURVE_POINTS: usize = 241;

#[derive(Debug, Serialize)]
struct Row {
    ensemble: Ensemble,
    expected_bits: f64,
    measured_bits: f64,
    tolerance_bits: f64,
    pass: bool,
    indistinguishability_max: f64,
    /// How `indistinguishability_max` was chosen.
    overlap_source: &'static str,
    channel: Vec<Vec<f64>>,
    optimal_prior: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    case: &'static str,
    seed: u64,
    config_sha256: String,
    trials_per_point: u64,
    rows: Vec<Row>,
    entangled_to_separable_ratio: f64,
}

pub fn reproduce(cfg: &RunConfig, case: Case, dir: &Path) -> Result<(), CliError> {
    let seed = cfg.seed.unwrap_or(0);
    let hash = cfg.hash();
    let channel = seeded_channel(cfg);
    let (case_name, trials, tolerance, source) = match case {
        Case::Ideal => ("ideal", cfg.trials_per_point, cfg.ideal_tolerance_bits, "ideal analyzer"),
        Case::Experimental => (
            "experimental",
            cfg.experimental_trials_per_point,
            cfg.experimental_tolerance_bits,
            "calibrated to the expected capacity",
        ),
    };

    let mut rows = Vec::new();
    for ensemble in Ensemble::ALL {
        let (expected, analyzer) = match case {
            Case::Ideal => {
                let a = AnalyzerModel {
                    detector_efficiency: 1.0,
                    routing_efficiency: 1.0,
                    indistinguishability_max: 1.0,
                    accidental_rate: 0.0,
                    ..cfg.analyzer()
                };
                let expected = match ensemble {
                    Ensemble::Separable => 1.25f64.log2(),
                    Ensemble::Entangled => 1.0,
                };
                (expected, a)
            }
            Case::Experimental => {
                let target = match ensemble {
                    Ensemble::Separable => cfg.experimental_separable_bits,
                    Ensemble::Entangled => cfg.experimental_entangled_bits,
                };
                let base = cfg.analyzer();
                let m0 = calibrate_overlap(ensemble, target, &channel, &base)?;
                (target, base.with_overlap(m0))
            }
        };
        let delays = cfg.delays()?;
        let run = run_ensemble(ensemble, &channel, &analyzer, &delays, trials, seed)?;
        write_ensemble_artifacts(dir, &run, &analyzer, case_name, &hash)?;
        let measured = run.capacity.capacity_bits;
        rows.push(Row {
            ensemble,
            expected_bits: expected,
            measured_bits: measured,
            tolerance_bits: tolerance,
            pass: (measured - expected).abs() <= tolerance,
            indistinguishability_max: analyzer.indistinguishability_max,
            overlap_source: source,
            channel: run.reduced.matrix.rows().to_vec(),
            optimal_prior: run.capacity.optimal_prior.clone(),
        });
    }

    let ratio = rows[1].measured_bits / rows[0].measured_bits;
    let summary = Summary {
        case: case_name,
        seed,
        config_sha256: hash,
        trials_per_point: trials,
        rows,
        entangled_to_separable_ratio: ratio,
    };
    write(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"))?;
    let table = render_table(&summary);
    print!("{table}");
    println!("artifacts written to {}", dir.display());

    let failed: Vec<&str> = summary
        .rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.ensemble.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "{} capacity outside tolerance",
            failed.join(" and ")
        )))
    }
}

fn render_table(s: &Summary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "case: {}  seed: {}  config: {}  trials/point: {}", s.case, s.seed, &s.config_sha256[..12], s.trials_per_point);
    let _ = writeln!(
        t,
        "{:<10} {:>10} {:>10} {:>10} {:>8} {:>9}  status",
        "ensemble", "expected", "measured", "|diff|", "tol", "m0"
    );
    for r in &s.rows {
        let _ = writeln!(
            t,
            "{:<10} {:>10.6} {:>10.6} {:>10.6} {:>8.4} {:>9.5}  {}",
            r.ensemble.as_str(),
            r.expected_bits,
            r.measured_bits,
            (r.measured_bits - r.expected_bits).abs(),
            r.tolerance_bits,
            r.indistinguishability_max,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    let _ = writeln!(t, "entangled/separable ratio: {:.3}", s.entangled_to_separable_ratio);
    if let Some(r) = s.rows.first() {
        let _ = writeln!(t, "m0: {}", r.overlap_source);
    }
    t
}

fn write_ensemble_artifacts(
    dir: &Path,
    run: &EnsembleRun,
    analyzer: &AnalyzerModel,
    case: &str,
    hash: &str,
) -> Result<(), CliError> {
    let extra = [
        ("config_sha256", hash.to_string()),
        ("case", case.to_string()),
        ("ensemble", run.ensemble.to_string()),
        ("indistinguishability_max", format!("{:.12}", analyzer.indistinguishability_max)),
    ];
    for (scan, fit) in run.scans.iter().zip(&run.fits) {
        let label = scan.input_label;
        write(&dir.join(format!("scan_{label}.csv")), &scan.to_csv(&extra))?;
        write(&dir.join(format!("fit_{label}.json")), &(serde_json::to_string_pretty(fit).expect("serializable") + "\n"))?;
        let panel = PANELS.iter().find(|(_, l)| *l == label).map(|(p, _)| *p).unwrap_or('x');
        write(&dir.join(format!("panel_{panel}_{label}.dat")), &plot_data(panel, scan, fit, hash))?;
    }
    let e = run.ensemble;
    write(&dir.join(format!("channel_{e}.csv")), &run.reduced.matrix.to_csv(&OUTCOMES))?;
    write(&dir.join(format!("capacity_{e}.json")), &(serde_json::to_string_pretty(&run.capacity).expect("serializable") + "\n"))?;
    Ok(())
}

/// Four whitespace-separated blocks, two blank lines apart (gnuplot `index`):
/// singlet data, triplet data (delay, counts, error), then the fitted
/// singlet and triplet curves (delay, counts).
fn plot_data(panel: char, scan: &ScanRecord, fit: &DipFit, hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# panel ({panel}) input={}", scan.input_label);
    let _ = writeln!(out, "# seed={} trials_per_point={}", scan.rng_seed, scan.trials_per_point);
    let _ = writeln!(out, "# config_sha256={hash}");
    for (name, counts) in [("singlet", &scan.singlet_counts), ("triplet", &scan.triplet_counts)] {
        let _ = writeln!(out, "# {name} coincidences: delay_s counts sigma");
        for (d, &n) in scan.delays.iter().zip(counts.iter()) {
            let _ = writeln!(out, "{d:.6e} {n} {:.3}", (n.max(1) as f64).sqrt());
        }
        out.push_str("\n\n");
    }
    let (lo, hi) = (scan.delays[0], scan.delays[scan.delays.len() - 1]);
    for (name, curve) in [
        ("singlet", DipFit::singlet_at as fn(&DipFit, f64) -> f64),
        ("triplet", DipFit::triplet_at),
    ] {
        let _ = writeln!(out, "# fitted {name} curve: delay_s counts");
        for i in 0..FIT_CURVE_POINTS {
            let d = lo + (hi - lo) * i as f64 / (FIT_CURVE_POINTS - 1) as f64;
            let _ = writeln!(out, "{d:.6e} {:.4}", curve(fit, d));
        }
        out.push_str("\n\n");
    }
    out
}
