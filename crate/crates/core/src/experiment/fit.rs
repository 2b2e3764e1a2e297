//! Joint fit of the singlet and triplet coincidence curves with
//! `N_k(τ) = B_k·[1 − v_k·exp(−(τ − τ₀)²/(2w²))]`, shared `τ₀` and `w`.
//!
//! The optimizer is a damped Gauss-Newton (Levenberg-Marquardt) iteration
//! with Marquardt's diagonal scaling, run on delays rescaled to `[-1, 1]`.
//! Parameters are projected onto their bounds after every step. Convergence is
//! declared on a small relative parameter change or a negligible predicted
//! χ² decrease. Residuals are
//! weighted by Poisson errors `σ = √max(N, 1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::scan::ScanRecord;
use crate::error::{Error, Result};
use crate::qstate::InputLabel;

pub const LM_INITIAL_DAMPING: f64 = 1e-3;
pub const LM_DAMPING_UP: f64 = 10.0;
pub const LM_DAMPING_DOWN: f64 = 10.0;
/// Damping beyond which no descent direction remains.
pub const LM_DAMPING_MAX: f64 = 1e16;
pub const LM_MAX_ITERATIONS: usize = 200;
/// Relative parameter change below which the fit has converged.
pub const LM_PARAM_TOL: f64 = 1e-10;
/// Converged once the undamped Gauss-Newton step predicts a χ² decrease
/// below this (χ² units, so far below one standard error). Needed for flat
/// curves, where center and width are barely constrained and drift slowly.
pub const LM_EDM_TOL: f64 = 1e-8;
pub const MIN_FIT_POINTS: usize = 6;

/// The dip must lie inside the scan with its pedestals visible: the center is
/// confined to the inner half of the delay span and the rms width to between
/// one grid step and a quarter of the span (both as fractions of the half span).
pub const MAX_CENTER_FRACTION: f64 = 0.5;
pub const MAX_WIDTH_FRACTION: f64 = 0.5;

/// Tolerated excess of `|v|` over 1.
pub const VISIBILITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DipFitErrors {
    pub baseline_singlet: Option<f64>,
    pub baseline_triplet: Option<f64>,
    pub visibility_singlet: Option<f64>,
    pub visibility_triplet: Option<f64>,
    pub width: Option<f64>,
    pub center: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_label: Option<InputLabel>,
    pub baseline_singlet: f64,
    pub baseline_triplet: f64,
    /// Positive for a dip, negative for a peak.
    pub visibility_singlet: f64,
    pub visibility_triplet: f64,
    /// Seconds.
    pub width: f64,
    /// Seconds.
    pub center: f64,
    /// χ² per degree of freedom.
    pub fit_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<DipFitErrors>,
    #[serde(default)]
    pub iterations: usize,
}

impl DipFit {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::invalid(format!("fit width must be positive, got {}", self.width)));
        }
        for v in [self.visibility_singlet, self.visibility_triplet] {
            if !(v.abs() <= 1.0 + VISIBILITY_SLACK) {
                return Err(Error::invalid(format!("visibility {v} outside [-1, 1]")));
            }
        }
        if !(self.baseline_singlet.is_finite() && self.baseline_triplet.is_finite()) {
            return Err(Error::invalid("fit baselines are not finite"));
        }
        Ok(())
    }

    fn gauss(&self, delay: f64) -> f64 {
        let z = (delay - self.center) / self.width;
        (-0.5 * z * z).exp()
    }

    pub fn singlet_at(&self, delay: f64) -> f64 {
        self.baseline_singlet * (1.0 - self.visibility_singlet * self.gauss(delay))
    }

    pub fn triplet_at(&self, delay: f64) -> f64 {
        self.baseline_triplet * (1.0 - self.visibility_triplet * self.gauss(delay))
    }
}

/// Fit with separate widths for the two curves, used to test the shared-width
/// assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsharedDipFit {
    pub baseline_singlet: f64,
    pub baseline_triplet: f64,
    pub visibility_singlet: f64,
    pub visibility_triplet: f64,
    pub width_singlet: f64,
    pub width_triplet: f64,
    pub center: f64,
    pub fit_residual: f64,
    pub width_singlet_error: Option<f64>,
    pub width_triplet_error: Option<f64>,
}

pub fn fit_gaussian_pair(scan: &ScanRecord) -> Result<DipFit> {
    let mut fits = fit_gaussian_joint(std::slice::from_ref(scan))?;
    Ok(fits.remove(0))
}

/// Joint fit of several scans over the same delay grid, with one center and
/// one width shared by every curve. Used for the two scans of an ensemble:
/// a flat scan does not constrain `τ₀` or `w` by itself.
pub fn fit_gaussian_joint(scans: &[ScanRecord]) -> Result<Vec<DipFit>> {
    let first = scans
        .first()
        .ok_or_else(|| Error::Fit("no scans to fit".into()))?;
    for scan in scans {
        scan.validate()?;
        if scan.delays != first.delays {
            return Err(Error::Fit(format!(
                "scans for {} and {} use different delay grids",
                first.input_label, scan.input_label
            )));
        }
    }
    let counts: Vec<Vec<f64>> = scans
        .iter()
        .flat_map(|s| [&s.singlet_counts, &s.triplet_counts])
        .map(|c| c.iter().map(|&n| n as f64).collect())
        .collect();
    let curves: Vec<&[f64]> = counts.iter().map(Vec::as_slice).collect();
    let mut fits = shared_fits(&first.delays, &curves)?;
    for (fit, scan) in fits.iter_mut().zip(scans) {
        fit.input_label = Some(scan.input_label);
    }
    Ok(fits)
}

/// Shared-width fit on raw (possibly non-integer) counts.
pub fn fit_curves(delays: &[f64], singlet: &[f64], triplet: &[f64]) -> Result<DipFit> {
    Ok(shared_fits(delays, &[singlet, triplet])?.remove(0))
}

/// `curves` holds singlet/triplet pairs; one `DipFit` per pair.
fn shared_fits(delays: &[f64], curves: &[&[f64]]) -> Result<Vec<DipFit>> {
    let problem = Problem::new(delays, curves, false)?;
    let sol = problem.solve()?;
    let p = &sol.params;
    let k = curves.len();
    let (ic, iw) = (2 * k, 2 * k + 1);
    let err = |j: usize, scale: f64| sol.errors.as_ref().and_then(|e| e[j]).map(|e| e * scale);
    Ok((0..k / 2)
        .map(|pair| {
            let (s, t) = (2 * pair, 2 * pair + 1);
            DipFit {
                input_label: None,
                baseline_singlet: p[s],
                baseline_triplet: p[t],
                visibility_singlet: p[k + s],
                visibility_triplet: p[k + t],
                center: problem.mid + p[ic] * problem.scale,
                width: p[iw] * problem.scale,
                fit_residual: sol.reduced_chi2,
                standard_errors: sol.errors.as_ref().map(|_| DipFitErrors {
                    baseline_singlet: err(s, 1.0),
                    baseline_triplet: err(t, 1.0),
                    visibility_singlet: err(k + s, 1.0),
                    visibility_triplet: err(k + t, 1.0),
                    center: err(ic, problem.scale),
                    width: err(iw, problem.scale),
                }),
                iterations: sol.iterations,
            }
        })
        .collect())
}

pub fn fit_gaussian_pair_unshared(scan: &ScanRecord) -> Result<UnsharedDipFit> {
    scan.validate()?;
    let s: Vec<f64> = scan.singlet_counts.iter().map(|&c| c as f64).collect();
    let t: Vec<f64> = scan.triplet_counts.iter().map(|&c| c as f64).collect();
    fit_curves_unshared(&scan.delays, &s, &t)
}

pub fn fit_curves_unshared(delays: &[f64], singlet: &[f64], triplet: &[f64]) -> Result<UnsharedDipFit> {
    let curves = [singlet, triplet];
    let problem = Problem::new(delays, &curves, true)?;
    let sol = problem.solve()?;
    let p = &sol.params;
    let err = |j: usize| sol.errors.as_ref().and_then(|e| e[j]).map(|e| e * problem.scale);
    Ok(UnsharedDipFit {
        baseline_singlet: p[0],
        baseline_triplet: p[1],
        visibility_singlet: p[2],
        visibility_triplet: p[3],
        center: problem.mid + p[4] * problem.scale,
        width_singlet: p[5] * problem.scale,
        width_triplet: p[6] * problem.scale,
        fit_residual: sol.reduced_chi2,
        width_singlet_error: err(5),
        width_triplet_error: err(6),
    })
}

/// Parameter layout for `K` curves: `[B_0..B_K, v_0..v_K, τ₀, w]`, or with
/// one width per curve `[.., τ₀, w_0..w_K]`. Delays are rescaled to `[-1, 1]`.
struct Problem<'a> {
    x: Vec<f64>,
    curves: &'a [&'a [f64]],
    sigmas: Vec<Vec<f64>>,
    per_curve_width: bool,
    mid: f64,
    scale: f64,
    w_min: f64,
    w_max: f64,
    b_min: f64,
}

struct Solution {
    params: Vec<f64>,
    errors: Option<Vec<Option<f64>>>,
    reduced_chi2: f64,
    iterations: usize,
}

impl<'a> Problem<'a> {
    fn new(delays: &[f64], curves: &'a [&'a [f64]], per_curve_width: bool) -> Result<Self> {
        let n = delays.len();
        if curves.iter().any(|c| c.len() != n) {
            return Err(Error::Fit("delay and count columns differ in length".into()));
        }
        if n < MIN_FIT_POINTS {
            return Err(Error::Fit(format!(
                "need at least {MIN_FIT_POINTS} delay points, got {n}"
            )));
        }
        if delays.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Fit("delays must be strictly increasing".into()));
        }
        if curves.iter().flat_map(|c| c.iter()).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Fit("counts must be finite and non-negative".into()));
        }
        for (i, curve) in curves.iter().enumerate() {
            if curve.iter().all(|&c| c == 0.0) {
                let name = if i % 2 == 0 { "singlet" } else { "triplet" };
                return Err(Error::Fit(format!(
                    "degenerate data: the {name} curve has no counts"
                )));
            }
        }
        let (lo, hi) = (delays[0], delays[n - 1]);
        let mid = 0.5 * (lo + hi);
        let scale = 0.5 * (hi - lo);
        let x: Vec<f64> = delays.iter().map(|d| (d - mid) / scale).collect();
        let min_step = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let peak = curves.iter().flat_map(|c| c.iter()).copied().fold(0.0, f64::max);
        Ok(Problem {
            sigmas: curves
                .iter()
                .map(|c| c.iter().map(|y| y.max(1.0).sqrt()).collect())
                .collect(),
            x,
            curves,
            per_curve_width,
            mid,
            scale,
            w_min: min_step.min(MAX_WIDTH_FRACTION),
            w_max: MAX_WIDTH_FRACTION,
            b_min: 1e-9 * peak,
        })
    }

    fn k(&self) -> usize {
        self.curves.len()
    }

    fn n_params(&self) -> usize {
        let k = self.k();
        2 * k + 1 + if self.per_curve_width { k } else { 1 }
    }

    fn center_index(&self) -> usize {
        2 * self.k()
    }

    fn width_index(&self, curve: usize) -> usize {
        2 * self.k() + 1 + if self.per_curve_width { curve } else { 0 }
    }

    /// Baselines from the outer quarter of the points, center at the most
    /// extreme point, width a quarter of the span, visibilities from the
    /// extreme-to-baseline ratio.
    fn initial_guess(&self) -> Vec<f64> {
        let n = self.x.len();
        let m = (n / 8).max(1);
        let outer: Vec<usize> = (0..m).chain(n - m..n).collect();
        let base: Vec<f64> = self
            .curves
            .iter()
            .map(|c| {
                let mean = outer.iter().map(|&i| c[i]).sum::<f64>() / outer.len() as f64;
                mean.max(self.b_min.max(1e-300))
            })
            .collect();
        let dev = |i: usize| -> f64 {
            self.curves
                .iter()
                .zip(&base)
                .map(|(c, b)| (c[i] / b - 1.0).abs())
                .sum()
        };
        let ext = (0..n).max_by(|&i, &j| dev(i).total_cmp(&dev(j))).unwrap_or(n / 2);
        let mut p = base.clone();
        p.extend(
            self.curves
                .iter()
                .zip(&base)
                .map(|(c, b)| (1.0 - c[ext] / b).clamp(-1.0, 1.0)),
        );
        p.push(self.x[ext]);
        let w = 0.5_f64.clamp(self.w_min, self.w_max);
        p.resize(self.n_params(), w);
        p
    }

    fn bounds(&self, j: usize) -> (f64, f64) {
        let k = self.k();
        if j < k {
            (self.b_min, f64::INFINITY)
        } else if j < 2 * k {
            (-1.0, 1.0)
        } else if j == 2 * k {
            (-MAX_CENTER_FRACTION, MAX_CENTER_FRACTION)
        } else {
            (self.w_min, self.w_max)
        }
    }

    fn project(&self, p: &mut [f64]) {
        for (j, v) in p.iter_mut().enumerate() {
            let (lo, hi) = self.bounds(j);
            *v = v.clamp(lo, hi);
        }
    }

    /// Parameters sitting on a bound with the descent direction pointing
    /// outward are held fixed for the step.
    fn free_parameters(&self, p: &[f64], jtr: &DVector<f64>) -> Vec<usize> {
        (0..p.len())
            .filter(|&j| {
                let (lo, hi) = self.bounds(j);
                !((p[j] <= lo && jtr[j] < 0.0) || (p[j] >= hi && jtr[j] > 0.0))
            })
            .collect()
    }

    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        let (n, k) = (self.x.len(), self.k());
        let c = p[self.center_index()];
        DVector::from_fn(k * n, |r, _| {
            let (curve, i) = (r / n, r % n);
            let w = p[self.width_index(curve)];
            let dx = self.x[i] - c;
            let g = (-0.5 * dx * dx / (w * w)).exp();
            (self.curves[curve][i] - p[curve] * (1.0 - p[k + curve] * g)) / self.sigmas[curve][i]
        })
    }

    /// Jacobian of the weighted model (not of the residual).
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let (n, k) = (self.x.len(), self.k());
        let ic = self.center_index();
        let mut j = DMatrix::zeros(k * n, self.n_params());
        for curve in 0..k {
            let iw = self.width_index(curve);
            let (b, v, w) = (p[curve], p[k + curve], p[iw]);
            for i in 0..n {
                let row = curve * n + i;
                let sigma = self.sigmas[curve][i];
                let dx = self.x[i] - p[ic];
                let g = (-0.5 * dx * dx / (w * w)).exp();
                j[(row, curve)] = (1.0 - v * g) / sigma;
                j[(row, k + curve)] = -b * g / sigma;
                j[(row, ic)] = -b * v * g * dx / (w * w) / sigma;
                j[(row, iw)] = -b * v * g * dx * dx / (w * w * w) / sigma;
            }
        }
        j
    }

    fn solve(&self) -> Result<Solution> {
        let np = self.n_params();
        let mut p = self.initial_guess();
        self.project(&mut p);
        let mut r = self.residuals(&p);
        let mut chi2 = r.norm_squared();
        let mut lambda = LM_INITIAL_DAMPING;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < LM_MAX_ITERATIONS {
            iterations += 1;
            let j = self.jacobian(&p);
            let jtj = j.transpose() * &j;
            let jtr = j.transpose() * &r;
            let free = self.free_parameters(&p, &jtr);
            let nf = free.len();
            if nf == 0 {
                converged = true;
                break;
            }
            let jtj = DMatrix::from_fn(nf, nf, |a, b| jtj[(free[a], free[b])]);
            let jtr = DVector::from_fn(nf, |a, _| jtr[free[a]]);
            let diag_floor = 1e-12 * jtj.diagonal().max().max(1e-300);
            let edm = jtj
                .clone()
                .cholesky()
                .map(|c| jtr.dot(&c.solve(&jtr)))
                .unwrap_or(f64::INFINITY);
            if edm < LM_EDM_TOL {
                converged = true;
                break;
            }

            let mut accepted = false;
            while lambda <= LM_DAMPING_MAX {
                let mut a = jtj.clone();
                for k in 0..nf {
                    a[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
                }
                let Some(reduced) = a.cholesky().map(|c| c.solve(&jtr)) else {
                    lambda *= LM_DAMPING_UP;
                    continue;
                };
                let mut step = vec![0.0; np];
                for (a, &k) in free.iter().enumerate() {
                    step[k] = reduced[a];
                }
                let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                self.project(&mut trial);
                let r_new = self.residuals(&trial);
                let chi2_new = r_new.norm_squared();
                if chi2_new.is_finite() && chi2_new < chi2 {
                    let typical = |k: usize| match k {
                        0 | 1 => p[k].abs().max(self.b_min),
                        5 | 6 => p[k].abs(),
                        _ => 1.0,
                    };
                    let rel = (0..np)
                        .map(|k| (trial[k] - p[k]).abs() / typical(k))
                        .fold(0.0, f64::max);
                    p = trial;
                    r = r_new;
                    chi2 = chi2_new;
                    lambda = (lambda / LM_DAMPING_DOWN).max(1e-15);
                    accepted = true;
                    if rel < LM_PARAM_TOL {
                        converged = true;
                    }
                    break;
                }
                lambda *= LM_DAMPING_UP;
            }
            if !accepted {
                // no step reduces χ² at any damping: stationary point
                converged = true;
            }
            if converged {
                break;
            }
        }
        if !converged {
            return Err(Error::Fit(format!(
                "no convergence after {LM_MAX_ITERATIONS} iterations (χ² = {chi2:.4e})"
            )));
        }

        let dof = (self.k() * self.x.len()).saturating_sub(np).max(1);
        let j = self.jacobian(&p);
        let errors = (j.transpose() * &j).try_inverse().map(|cov| {
            (0..np)
                .map(|k| {
                    let v = cov[(k, k)];
                    (v.is_finite() && v >= 0.0).then(|| v.sqrt())
                })
                .collect()
        });
        Ok(Solution {
            params: p,
            errors,
            reduced_chi2: chi2 / dof as f64,
            iterations,
        })
    }
}
