use std::path::Path;

use depolcap::capacity::{blahut_arimoto, CapacityResult, ClassicalChannelMatrix};
use depolcap::channel::{ChannelModel, Regime};
use depolcap::experiment::{
    fit_gaussian_pair, fit_gaussian_pair_unshared, reduce_to_channel, simulate_scan, DipFit,
    ScanRecord, CAPACITY_MAX_ITER, CAPACITY_TOL, OUTCOMES,
};
use depolcap::qstate::{InputLabel, TwoQubitState};

use crate::config::RunConfig;
use crate::CliError;

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Channel model of a run with the run seed wired in.
pub fn seeded_channel(cfg: &RunConfig) -> ChannelModel {
    let mut ch = cfg.channel();
    ch.rng_seed = cfg.seed.unwrap_or(0);
    ch
}

pub fn twirl(
    cfg: &RunConfig,
    label: Option<InputLabel>,
    state_file: Option<&Path>,
    mc: bool,
    samples: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let rho = match (label, state_file) {
        (Some(l), _) => TwoQubitState::named(l),
        (None, Some(p)) => TwoQubitState::from_json(&read(p)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        (None, None) => return Err(CliError::Usage("give --state or --state-file".into())),
    };
    let mut ch = seeded_channel(cfg);
    if mc {
        ch.regime = Regime::MonteCarlo;
    }
    if let Some(n) = samples {
        ch.mc_samples = n;
    }
    ch.validate()?;
    let result = ch.transmit(&rho)?;
    println!("regime: {:?}", ch.regime);
    if ch.regime == Regime::MonteCarlo {
        println!("samples: {}  seed: {}", result.sample_count, ch.rng_seed);
    }
    println!("input singlet weight:  {:.12}", rho.singlet_fidelity());
    println!("output singlet weight: {:.12}", result.singlet_weight);
    println!("output state:");
    let m = result.state.matrix();
    for r in 0..4 {
        let cells: Vec<String> = (0..4)
            .map(|c| format!("{:+.6}{:+.6}i", m[(r, c)].re, m[(r, c)].im))
            .collect();
        println!("  {}", cells.join("  "));
    }
    if let Some(path) = out {
        write(path, &to_json(&result))?;
    }
    Ok(())
}

pub fn scan(cfg: &RunConfig, label: InputLabel, trials: Option<u64>, out: &Path) -> Result<(), CliError> {
    let trials = trials.unwrap_or(cfg.trials_per_point);
    let seed = cfg.seed.unwrap_or(0);
    let record = simulate_scan(label, &seeded_channel(cfg), &cfg.analyzer(), &cfg.delays()?, trials, seed)?;
    write(out, &record.to_csv(&[("config_sha256", cfg.hash())]))?;
    print_scan_summary(&record);
    Ok(())
}

fn print_scan_summary(r: &ScanRecord) {
    let range = |c: &[u64]| {
        let lo = c.iter().min().copied().unwrap_or(0);
        let hi = c.iter().max().copied().unwrap_or(0);
        (lo, hi)
    };
    let (s_lo, s_hi) = range(&r.singlet_counts);
    let (t_lo, t_hi) = range(&r.triplet_counts);
    // largest deviation from the first/last point average
    let n = r.delays.len();
    let edge = 0.5 * (r.singlet_counts[0] + r.singlet_counts[n - 1]) as f64;
    let ext = (0..n)
        .max_by(|&a, &b| {
            let d = |i: usize| (r.singlet_counts[i] as f64 - edge).abs();
            d(a).total_cmp(&d(b))
        })
        .unwrap_or(0);
    println!("input: {}  points: {n}  trials/point: {}  seed: {}", r.input_label, r.trials_per_point, r.rng_seed);
    println!("singlet counts: {s_lo}..{s_hi}");
    println!("triplet counts: {t_lo}..{t_hi}");
    println!("extremal singlet point at {:.3e} s", r.delays[ext]);
}

pub fn fit(scan_path: &Path, unshared: bool, out: Option<&Path>) -> Result<(), CliError> {
    let text = read(scan_path)?;
    let scan = ScanRecord::from_csv(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", scan_path.display())))?;
    let fit = fit_gaussian_pair(&scan)?;
    print_fit(&fit);
    if unshared {
        let u = fit_gaussian_pair_unshared(&scan)?;
        println!("independent widths:");
        println!("  singlet  {:.4e} ± {} s", u.width_singlet, fmt_err(u.width_singlet_error));
        println!("  triplet  {:.4e} ± {} s", u.width_triplet, fmt_err(u.width_triplet_error));
        if let (Some(a), Some(b)) = (u.width_singlet_error, u.width_triplet_error) {
            let pull = (u.width_singlet - u.width_triplet) / (a * a + b * b).sqrt();
            println!("  difference / combined error: {pull:+.2}");
        }
    }
    if let Some(path) = out {
        write(path, &to_json(&fit))?;
    }
    Ok(())
}

fn fmt_err(e: Option<f64>) -> String {
    e.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "n/a".into())
}

fn print_fit(f: &DipFit) {
    let e = f.standard_errors.clone().unwrap_or_default();
    if let Some(l) = f.input_label {
        println!("input: {l}");
    }
    println!("baseline singlet    {:>12.3} ± {}", f.baseline_singlet, fmt_err(e.baseline_singlet));
    println!("baseline triplet    {:>12.3} ± {}", f.baseline_triplet, fmt_err(e.baseline_triplet));
    println!("visibility singlet  {:>+12.5} ± {}", f.visibility_singlet, fmt_err(e.visibility_singlet));
    println!("visibility triplet  {:>+12.5} ± {}", f.visibility_triplet, fmt_err(e.visibility_triplet));
    println!("width               {:>12.4e} ± {} s", f.width, fmt_err(e.width));
    println!("center              {:>12.4e} ± {} s", f.center, fmt_err(e.center));
    println!("chi2/dof            {:>12.4}", f.fit_residual);
}

pub fn read_fit(path: &Path) -> Result<DipFit, CliError> {
    let fit: DipFit = serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    fit.validate()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(fit)
}

pub fn capacity(channel: Option<&Path>, fits: Option<&[std::path::PathBuf]>, out: Option<&Path>) -> Result<(), CliError> {
    let matrix = match (channel, fits) {
        (Some(p), _) => ClassicalChannelMatrix::from_csv(&read(p)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        (None, Some([a, b])) => reduce_to_channel(&read_fit(a)?, &read_fit(b)?)?.matrix,
        _ => return Err(CliError::Usage("give --channel or --fits FIT0 FIT1".into())),
    };
    let result = capacity_of(&matrix)?;
    print_capacity(&matrix, &result);
    if let Some(path) = out {
        write(path, &to_json(&result))?;
    }
    Ok(())
}

pub fn capacity_of(matrix: &ClassicalChannelMatrix) -> Result<CapacityResult, CliError> {
    Ok(blahut_arimoto(matrix, CAPACITY_TOL, CAPACITY_MAX_ITER)?)
}

fn print_capacity(m: &ClassicalChannelMatrix, r: &CapacityResult) {
    if m.outputs() == OUTCOMES.len() {
        println!("P(outcome | input): {}", OUTCOMES.join(", "));
    }
    for (i, row) in m.rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
        println!("  input {i}: {}", cells.join("  "));
    }
    println!("capacity:      {:.6} bits per pair", r.capacity_bits);
    let prior: Vec<String> = r.optimal_prior.iter().map(|p| format!("{p:.6}")).collect();
    println!("optimal prior: [{}]", prior.join(", "));
    println!("bracket width: {:.2e} after {} iterations", r.residual, r.iterations);
}
