use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::analyzer::{outcome_probabilities, AnalyzerModel};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::qstate::{InputLabel, TwoQubitState};

/// Number of delay points in the default grid.
pub const DEFAULT_DELAY_POINTS: usize = 61;
/// Half-span of the default grid in units of the overlap FWHM.
pub const DEFAULT_SPAN_FWHMS: f64 = 3.0;
pub const DEFAULT_TRIALS_PER_POINT: u64 = 100_000;

/// Coincidence counts versus optical delay for one input state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub input_label: InputLabel,
    /// Seconds, strictly increasing.
    pub delays: Vec<f64>,
    pub singlet_counts: Vec<u64>,
    pub triplet_counts: Vec<u64>,
    pub trials_per_point: u64,
    pub rng_seed: u64,
}

impl ScanRecord {
    pub fn validate(&self) -> Result<()> {
        let n = self.delays.len();
        if self.singlet_counts.len() != n || self.triplet_counts.len() != n {
            return Err(Error::invalid("delay and count columns differ in length"));
        }
        check_increasing(&self.delays)?;
        if let Some(c) = self
            .singlet_counts
            .iter()
            .chain(&self.triplet_counts)
            .find(|&&c| c > self.trials_per_point)
        {
            return Err(Error::invalid(format!(
                "count {c} exceeds trials_per_point = {}",
                self.trials_per_point
            )));
        }
        Ok(())
    }

    /// CSV with a `#` comment header carrying the metadata. `extra` entries
    /// are written as additional `# key=value` lines.
    pub fn to_csv(&self, extra: &[(&str, String)]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# input_label={}", self.input_label);
        let _ = writeln!(out, "# trials_per_point={}", self.trials_per_point);
        let _ = writeln!(out, "# seed={}", self.rng_seed);
        for (k, v) in extra {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("delay_s,singlet_counts,triplet_counts\n");
        for ((d, s), t) in self.delays.iter().zip(&self.singlet_counts).zip(&self.triplet_counts) {
            let _ = writeln!(out, "{d:e},{s},{t}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut label = None;
        let mut trials = None;
        let mut seed = None;
        let mut header_seen = false;
        let (mut delays, mut singlet, mut triplet) = (Vec::new(), Vec::new(), Vec::new());
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            let perr = |message: String| Error::Parse { line: line_no, message };
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let v = v.trim();
                    match k.trim() {
                        "input_label" => {
                            label = Some(v.parse::<InputLabel>().map_err(|e| perr(e.to_string()))?)
                        }
                        "trials_per_point" => {
                            trials = Some(v.parse::<u64>().map_err(|e| perr(format!("trials_per_point: {e}")))?)
                        }
                        "seed" => seed = Some(v.parse::<u64>().map_err(|e| perr(format!("seed: {e}")))?),
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != ["delay_s", "singlet_counts", "triplet_counts"] {
                    return Err(perr(
                        "expected header `delay_s,singlet_counts,triplet_counts`".into(),
                    ));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(perr(format!("expected 3 columns, found {}", cols.len())));
            }
            let d: f64 = cols[0].parse().map_err(|e| perr(format!("delay_s: {e}")))?;
            if !d.is_finite() {
                return Err(perr("delay_s is not finite".into()));
            }
            delays.push(d);
            singlet.push(cols[1].parse().map_err(|e| perr(format!("singlet_counts: {e}")))?);
            triplet.push(cols[2].parse().map_err(|e| perr(format!("triplet_counts: {e}")))?);
        }
        let missing = |what: &str| Error::Parse {
            line: 1,
            message: format!("missing `# {what}=` header line"),
        };
        if !header_seen {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                message: "missing column header".into(),
            });
        }
        let rec = ScanRecord {
            input_label: label.ok_or_else(|| missing("input_label"))?,
            delays,
            singlet_counts: singlet,
            triplet_counts: triplet,
            trials_per_point: trials.ok_or_else(|| missing("trials_per_point"))?,
            rng_seed: seed.unwrap_or(0),
        };
        rec.validate()?;
        Ok(rec)
    }
}

/// `points` delays evenly spaced over `[-half_span, half_span]`.
pub fn delay_grid(half_span: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(half_span > 0.0 && half_span.is_finite()) {
        return Err(Error::Config(
            "delay grid needs at least 2 points and a positive span".into(),
        ));
    }
    let step = 2.0 * half_span / (points - 1) as f64;
    Ok((0..points).map(|i| -half_span + step * i as f64).collect())
}

/// 61 points over ±3 FWHM of the analyzer's overlap dip.
pub fn default_delay_grid(analyzer: &AnalyzerModel) -> Vec<f64> {
    let fwhm = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * analyzer.overlap_width();
    delay_grid(DEFAULT_SPAN_FWHMS * fwhm, DEFAULT_DELAY_POINTS).expect("positive span")
}

/// Expected `(singlet, triplet)` detected coincidences at each delay.
pub fn expected_counts(
    label: InputLabel,
    channel: &ChannelModel,
    analyzer: &AnalyzerModel,
    delays: &[f64],
    trials_per_point: u64,
) -> Result<Vec<(f64, f64)>> {
    analyzer.validate()?;
    let out = channel.transmit(&TwoQubitState::named(label))?;
    let n = trials_per_point as f64;
    Ok(delays
        .iter()
        .map(|&d| {
            let p = outcome_probabilities(&out.state, d, analyzer);
            (n * p.p_singlet_detected, n * p.p_triplet_detected)
        })
        .collect())
}

/// Simulated delay scan.
///
/// Each trial yields at most one coincidence, so per delay the counts are a
/// multinomial draw over (singlet, triplet, nothing), realised as two
/// chained binomials. Point `i` draws from ChaCha stream `i` of `seed`.
pub fn simulate_scan(
    label: InputLabel,
    channel: &ChannelModel,
    analyzer: &AnalyzerModel,
    delays: &[f64],
    trials_per_point: u64,
    seed: u64,
) -> Result<ScanRecord> {
    if trials_per_point < 1 {
        return Err(Error::Config("trials_per_point must be at least 1".into()));
    }
    if delays.is_empty() {
        return Err(Error::Config("delay grid is empty".into()));
    }
    check_increasing(delays)?;
    analyzer.validate()?;
    let out = channel.transmit(&TwoQubitState::named(label))?;

    let mut singlet_counts = Vec::with_capacity(delays.len());
    let mut triplet_counts = Vec::with_capacity(delays.len());
    for (i, &d) in delays.iter().enumerate() {
        let p = outcome_probabilities(&out.state, d, analyzer);
        let (ps, pt) = (p.p_singlet_detected, p.p_triplet_detected);
        if ps + pt > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "detected coincidence probabilities sum to {} > 1; lower accidental_rate",
                ps + pt
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let s = draw_binomial(&mut rng, trials_per_point, ps);
        let pt_cond = if ps < 1.0 { (pt / (1.0 - ps)).min(1.0) } else { 0.0 };
        let t = draw_binomial(&mut rng, trials_per_point - s, pt_cond);
        singlet_counts.push(s);
        triplet_counts.push(t);
    }
    Ok(ScanRecord {
        input_label: label,
        delays: delays.to_vec(),
        singlet_counts,
        triplet_counts,
        trials_per_point,
        rng_seed: seed,
    })
}

fn draw_binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}

fn check_increasing(delays: &[f64]) -> Result<()> {
    if delays.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("delays must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_scan(label: InputLabel, trials: u64, seed: u64) -> ScanRecord {
        let a = AnalyzerModel::ideal();
        simulate_scan(label, &ChannelModel::default(), &a, &default_delay_grid(&a), trials, seed)
            .unwrap()
    }

    #[test]
    fn default_grid_is_symmetric_and_contains_zero() {
        let g = default_delay_grid(&AnalyzerModel::default());
        assert_eq!(g.len(), 61);
        assert_eq!(g[30], 0.0);
        assert!((g[0] + g[60]).abs() < 1e-25);
    }

    #[test]
    fn parallel_singlets_vanish_at_zero_delay() {
        let s = ideal_scan(InputLabel::Parallel, 100_000, 1);
        assert_eq!(s.singlet_counts[30], 0);
        assert!(s.triplet_counts[30] > 45_000);
    }

    #[test]
    fn singlet_input_dominates_at_zero_delay() {
        let s = ideal_scan(InputLabel::Singlet, 100_000, 2);
        assert_eq!(s.singlet_counts[30], 100_000);
        assert_eq!(s.triplet_counts[30], 0);
    }

    #[test]
    fn far_delays_give_two_to_one_ratio() {
        let a = AnalyzerModel::ideal();
        let far = [-1e-11, -5e-12, 5e-12, 1e-11];
        for l in InputLabel::ALL {
            let e = expected_counts(l, &ChannelModel::default(), &a, &far, 1000).unwrap();
            for (s, t) in e {
                assert!((s / t - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scans_are_deterministic_given_seed() {
        let a = ideal_scan(InputLabel::Orthogonal, 5000, 9);
        let b = ideal_scan(InputLabel::Orthogonal, 5000, 9);
        let c = ideal_scan(InputLabel::Orthogonal, 5000, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip() {
        let a = ideal_scan(InputLabel::TripletPlus, 1000, 4);
        let text = a.to_csv(&[("config_hash", "abc".into())]);
        assert!(text.contains("# config_hash=abc"));
        let back = ScanRecord::from_csv(&text).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "# input_label=parallel\n# trials_per_point=10\ndelay_s,singlet_counts,triplet_counts\n0,1,2\n1e-13,x,2\n";
        match ScanRecord::from_csv(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        let text = "# input_label=parallel\n# trials_per_point=10\ndelay_s,singlet_counts,triplet_counts\n0,1\n";
        assert!(matches!(ScanRecord::from_csv(text), Err(Error::Parse { line: 4, .. })));
        let text = "# input_label=parallel\n# trials_per_point=10\ndelay_s,singlet_counts,triplet_counts\n0,11,2\n";
        assert!(ScanRecord::from_csv(text).is_err());
        let text = "# input_label=parallel\n# trials_per_point=10\ndelay_s,singlet_counts,triplet_counts\n1,1,2\n0,1,2\n";
        assert!(ScanRecord::from_csv(text).is_err());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let a = AnalyzerModel::ideal();
        let ch = ChannelModel::default();
        assert!(simulate_scan(InputLabel::Singlet, &ch, &a, &[0.0], 0, 1).is_err());
        assert!(simulate_scan(InputLabel::Singlet, &ch, &a, &[1.0, 0.0], 10, 1).is_err());
        assert!(delay_grid(1.0, 1).is_err());
    }
}
