//! Classical capacities in bits per channel use (here: per photon pair).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::TwoQubitState;

/// Row-sum tolerance of a conditional probability matrix.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Conditional probabilities `P(outcome | input)`, one row per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ClassicalChannelMatrix {
    rows: Vec<Vec<f64>>,
}

impl ClassicalChannelMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 {
            return Err(Error::invalid("channel matrix must have at least one row and column"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {width}",
                    row.len()
                )));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::invalid(format!("row {i} has entry {p} outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {sum}, expected 1")));
            }
        }
        Ok(ClassicalChannelMatrix { rows })
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `I(X;Y)` in bits for the given input distribution.
    pub fn mutual_information(&self, prior: &[f64]) -> f64 {
        let q = self.output_distribution(prior);
        self.rows
            .iter()
            .zip(prior)
            .map(|(row, &p)| p * relative_entropy_bits(row, &q))
            .sum::<f64>()
            .max(0.0)
    }

    fn output_distribution(&self, prior: &[f64]) -> Vec<f64> {
        (0..self.outputs())
            .map(|y| self.rows.iter().zip(prior).map(|(r, p)| p * r[y]).sum())
            .collect()
    }

    /// CSV with a header naming the outcomes, one row per input.
    pub fn to_csv(&self, outcome_names: &[&str]) -> String {
        let mut out = outcome_names.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.17}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Parses the CSV layout written by [`ClassicalChannelMatrix::to_csv`].
    /// Blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty channel file".into(),
        })?;
        let width = header.split(',').count();
        if header.split(',').any(|h| h.trim().parse::<f64>().is_ok()) {
            return Err(Error::Parse {
                line: hline,
                message: "expected a header row naming the outcomes".into(),
            });
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    line: n,
                    message: format!("bad probability: {e}"),
                })?;
            if row.len() != width {
                return Err(Error::Parse {
                    line: n,
                    message: format!("expected {width} columns, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        Self::new(rows)
    }
}

impl TryFrom<Vec<Vec<f64>>> for ClassicalChannelMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<ClassicalChannelMatrix> for Vec<Vec<f64>> {
    fn from(m: ClassicalChannelMatrix) -> Self {
        m.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Certified lower end of the capacity bracket.
    pub capacity_bits: f64,
    pub optimal_prior: Vec<f64>,
    pub iterations: usize,
    /// Width of the capacity bracket in bits.
    pub residual: f64,
}

/// Blahut-Arimoto iteration with the usual per-step bracket
///
/// `log₂ Σₓ p(x)·2^{D(x)} ≤ C ≤ maxₓ D(x)`, where `D(x) = D(W(·|x) ‖ q)`,
///
/// stopping once the bracket is no wider than `tol`.
pub fn blahut_arimoto(
    ch: &ClassicalChannelMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let n = ch.inputs();
    let mut prior = vec![1.0 / n as f64; n];
    let mut best = CapacityResult {
        capacity_bits: 0.0,
        optimal_prior: prior.clone(),
        iterations: 0,
        residual: f64::INFINITY,
    };
    for iter in 1..=max_iter {
        let q = ch.output_distribution(&prior);
        let divergences: Vec<f64> = ch
            .rows()
            .iter()
            .map(|row| relative_entropy_bits(row, &q))
            .collect();
        let weights: Vec<f64> = prior
            .iter()
            .zip(&divergences)
            .map(|(p, d)| p * d.exp2())
            .collect();
        let z: f64 = weights.iter().sum();
        let lower = z.log2().max(0.0);
        let upper = divergences.iter().copied().fold(0.0, f64::max);
        let residual = (upper - lower).max(0.0);
        if residual < best.residual {
            best = CapacityResult {
                capacity_bits: lower,
                optimal_prior: prior.clone(),
                iterations: iter,
                residual,
            };
        }
        if residual <= tol {
            return Ok(best);
        }
        prior = weights.iter().map(|w| w / z).collect();
    }
    Err(Error::NotConverged(Box::new(best)))
}

/// Exact capacity of a binary-input, binary-output channel.
///
/// `a = P(y₀|x₀)`, `b = P(y₀|x₁)`. Setting `dI/dp = 0` for the weight `p` of
/// `x₁` gives `log₂((1 − q)/q) = (H₂(b) − H₂(a))/(b − a)` for the optimal
/// output probability `q = P(y₀)`, from which `p = (q − a)/(b − a)`.
pub fn binary_capacity_closed_form(a: f64, b: f64) -> Result<CapacityResult> {
    for p in [a, b] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
    }
    if a == b {
        return Ok(CapacityResult {
            capacity_bits: 0.0,
            optimal_prior: vec![0.5, 0.5],
            iterations: 0,
            residual: 0.0,
        });
    }
    let slope = (binary_entropy(b) - binary_entropy(a)) / (b - a);
    let q = 1.0 / (1.0 + slope.exp2());
    let p = ((q - a) / (b - a)).clamp(0.0, 1.0);
    let q = (1.0 - p) * a + p * b;
    let c = binary_entropy(q) - (1.0 - p) * binary_entropy(a) - p * binary_entropy(b);
    Ok(CapacityResult {
        capacity_bits: c.max(0.0),
        optimal_prior: vec![1.0 - p, p],
        iterations: 0,
        residual: 0.0,
    })
}

/// `χ = S(Σ pᵢρᵢ) − Σ pᵢ S(ρᵢ)` in bits.
pub fn holevo_quantity(ensemble: &[(f64, TwoQubitState)]) -> Result<f64> {
    let parts: Vec<(f64, &TwoQubitState)> = ensemble.iter().map(|(p, s)| (*p, s)).collect();
    let average = TwoQubitState::mixture(&parts)?;
    let conditional: f64 = ensemble
        .iter()
        .map(|(p, s)| p * s.von_neumann_entropy())
        .sum();
    Ok((average.von_neumann_entropy() - conditional).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateOptimum {
    /// Weight of the second state.
    pub prior: f64,
    pub chi_bits: f64,
}

/// Maximizes `χ` over the weight of `rho1` by golden-section search on `[0, 1]`.
pub fn optimize_two_state_prior(
    rho0: &TwoQubitState,
    rho1: &TwoQubitState,
    tol: f64,
) -> Result<TwoStateOptimum> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let chi = |p: f64| -> f64 {
        holevo_quantity(&[(1.0 - p, rho0.clone()), (p, rho1.clone())])
            .expect("weights are a valid distribution")
    };
    let prior = golden_section_max(chi, 0.0, 1.0, tol);
    Ok(TwoStateOptimum {
        prior,
        chi_bits: chi(prior),
    })
}

/// Location of the maximum of a unimodal `f` on `[lo, hi]`, bracketed to `tol`.
pub(crate) fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

pub fn binary_entropy(p: f64) -> f64 {
    crate::qstate::entropy_bits([p, 1.0 - p])
}

fn relative_entropy_bits(row: &[f64], q: &[f64]) -> f64 {
    row.iter()
        .zip(q)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, qy)| w * (w / qy).log2())
        .sum()
}
