//! Two-qubit polarization states of a photon pair.
//!
//! Every matrix is written in the diagonal polarization basis with the tensor
//! ordering `|↗↗⟩, |↗↖⟩, |↖↗⟩, |↖↖⟩` (index `2·a + b`, `↗ = 0`, `↖ = 1`, first
//! photon most significant).

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{StandardNormal, UnitSphere};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix4c = Matrix4<C64>;
pub type Matrix2c = Matrix2<C64>;

/// Max elementwise `|ρ − ρ†|` accepted for a density operator.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max `|tr ρ − 1|` accepted for a density operator.
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue tolerated as numerical noise.
pub const PSD_SLACK: f64 = 1e-10;
/// Eigenvalues below this are treated as exact zeros in entropy sums.
pub const EIGEN_CLAMP: f64 = 1e-12;
/// Max elementwise `|U†U − 𝟙|` accepted for a polarization unitary.
pub const UNITARY_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Labels of the four input states used by the two communication ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputLabel {
    /// `|↗↗⟩`
    Parallel,
    /// `|↗↖⟩`
    Orthogonal,
    /// `(|↗↗⟩ + |↖↖⟩)/√2`
    TripletPlus,
    /// `(|↗↖⟩ − |↖↗⟩)/√2`
    Singlet,
}

impl InputLabel {
    pub const ALL: [InputLabel; 4] = [
        InputLabel::Parallel,
        InputLabel::Orthogonal,
        InputLabel::TripletPlus,
        InputLabel::Singlet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputLabel::Parallel => "parallel",
            InputLabel::Orthogonal => "orthogonal",
            InputLabel::TripletPlus => "triplet-plus",
            InputLabel::Singlet => "singlet",
        }
    }

    /// Pure-state amplitudes in the fixed basis order.
    pub fn amplitudes(self) -> [C64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            InputLabel::Parallel => [ONE, ZERO, ZERO, ZERO],
            InputLabel::Orthogonal => [ZERO, ONE, ZERO, ZERO],
            InputLabel::TripletPlus => [r(h), ZERO, ZERO, r(h)],
            InputLabel::Singlet => [ZERO, r(h), r(-h), ZERO],
        }
    }
}

impl fmt::Display for InputLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown state label `{s}` (expected parallel, orthogonal, triplet-plus or singlet)"
                ))
            })
    }
}

/// Density operator of the joint polarization of a photon pair.
///
/// Instances are always Hermitian, unit-trace and positive semidefinite within
/// the tolerances above; the only way to build one from raw data is
/// [`TwoQubitState::from_matrix`], which checks all three.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    matrix: Matrix4c,
}

impl TwoQubitState {
    /// Validates `matrix` as a density operator.
    pub fn from_matrix(matrix: Matrix4c) -> Result<Self> {
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("density matrix has non-finite entries"));
        }
        let herm_err = (matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm_err > HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "density matrix is not Hermitian (max |ρ − ρ†| = {herm_err:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::invalid(format!(
                "density matrix trace is {:.12}{:+.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let state = TwoQubitState {
            matrix: hermitize(&matrix),
        };
        let min_eig = state.eigenvalues().min();
        if min_eig < -PSD_SLACK {
            return Err(Error::invalid(format!(
                "density matrix is not positive semidefinite (eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(state)
    }

    /// Builds `|ψ⟩⟨ψ|`, normalizing `amps` first.
    pub fn from_pure(amps: &[C64; 4]) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("pure state has zero or non-finite norm"));
        }
        let v = Vector4::from_iterator(amps.iter().map(|a| a / norm));
        Ok(TwoQubitState {
            matrix: hermitize(&(v * v.adjoint())),
        })
    }

    /// The named input state as a pure-state density operator.
    pub fn named(label: InputLabel) -> Self {
        Self::from_pure(&label.amplitudes()).expect("named states are normalized")
    }

    pub fn maximally_mixed() -> Self {
        TwoQubitState {
            matrix: Matrix4c::identity() * C64::new(0.25, 0.0),
        }
    }

    /// `F·|Ψ₋⟩⟨Ψ₋| + (1 − F)·Π_t/3`, the general state invariant under every `U⊗U`.
    pub fn werner(singlet_weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&singlet_weight) {
            return Err(Error::invalid(format!(
                "singlet weight {singlet_weight} outside [0, 1]"
            )));
        }
        let f = singlet_weight;
        let m = singlet_projector() * C64::new(f, 0.0)
            + triplet_projector() * C64::new((1.0 - f) / 3.0, 0.0);
        Ok(TwoQubitState {
            matrix: hermitize(&m),
        })
    }

    /// Wraps an operator that is a density matrix by construction.
    pub(crate) fn from_trusted(matrix: Matrix4c) -> Self {
        TwoQubitState {
            matrix: hermitize(&matrix),
        }
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.matrix
    }

    /// `⟨Ψ₋|ρ|Ψ₋⟩`, clamped to `[0, 1]`.
    pub fn singlet_fidelity(&self) -> f64 {
        let m = &self.matrix;
        // |Ψ₋⟩ has amplitudes ±1/√2 on indices 1 and 2 only
        let f = 0.5 * (m[(1, 1)] + m[(2, 2)] - m[(1, 2)] - m[(2, 1)]);
        debug_assert!(f.im.abs() < 1e-12);
        f.re.clamp(0.0, 1.0)
    }

    /// `(U⊗U) ρ (U⊗U)†`.
    pub fn apply_collective(&self, u: &PolarizationUnitary) -> Self {
        let uu = u.collective();
        TwoQubitState::from_trusted(uu * self.matrix * uu.adjoint())
    }

    /// `(U₁⊗U₂) ρ (U₁⊗U₂)†` with independent unitaries on the two photons.
    pub fn apply_local(&self, first: &PolarizationUnitary, second: &PolarizationUnitary) -> Self {
        let k = kron(&first.matrix, &second.matrix);
        TwoQubitState::from_trusted(k * self.matrix * k.adjoint())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vector4<f64> {
        sorted_eigenvalues(&self.matrix)
    }

    /// Entropy in bits, `0·log 0 := 0`.
    pub fn von_neumann_entropy(&self) -> f64 {
        entropy_bits(self.eigenvalues().iter().copied())
    }

    /// `½·Σ|λᵢ(ρ − σ)|`.
    pub fn trace_distance(&self, other: &TwoQubitState) -> f64 {
        0.5 * sorted_eigenvalues(&(self.matrix - other.matrix))
            .iter()
            .map(|l| l.abs())
            .sum::<f64>()
    }

    /// Mixture `Σ pᵢ ρᵢ`; weights must be non-negative and sum to 1 within 1e-9.
    pub fn mixture(parts: &[(f64, &TwoQubitState)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(p, _)| p).sum();
        if parts.iter().any(|(p, _)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "mixture weights must be non-negative and sum to 1 (sum = {total})"
            )));
        }
        let m = parts
            .iter()
            .fold(Matrix4c::zeros(), |acc, (p, s)| acc + s.matrix * C64::new(*p / total, 0.0));
        Ok(TwoQubitState::from_trusted(m))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: ComplexMatrixJson = serde_json::from_str(text)?;
        Self::from_matrix(parsed.into_matrix()?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serialization is infallible")
    }
}

impl Serialize for TwoQubitState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ComplexMatrixJson::from_matrix(&self.matrix).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TwoQubitState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let parsed = ComplexMatrixJson::deserialize(deserializer)?;
        parsed
            .into_matrix()
            .and_then(TwoQubitState::from_matrix)
            .map_err(serde::de::Error::custom)
    }
}

/// JSON layout of a 4×4 complex matrix: `[re, im]` pairs, row-major, either
/// nested as four rows or as a flat list of sixteen.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ComplexMatrixJson {
    Nested(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

impl ComplexMatrixJson {
    fn from_matrix(m: &Matrix4c) -> Self {
        ComplexMatrixJson::Nested(
            (0..4)
                .map(|r| (0..4).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        )
    }

    fn into_matrix(self) -> Result<Matrix4c> {
        let flat: Vec<[f64; 2]> = match self {
            ComplexMatrixJson::Nested(rows) => {
                if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
                    return Err(Error::invalid("matrix must have 4 rows of 4 [re, im] pairs"));
                }
                rows.into_iter().flatten().collect()
            }
            ComplexMatrixJson::Flat(v) => v,
        };
        if flat.len() != 16 {
            return Err(Error::invalid(format!(
                "matrix must have 16 entries, found {}",
                flat.len()
            )));
        }
        Ok(Matrix4c::from_row_iterator(
            flat.into_iter().map(|[re, im]| C64::new(re, im)),
        ))
    }
}

/// A 2×2 unitary acting on the polarization of one photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationUnitary {
    matrix: Matrix2c,
}

impl PolarizationUnitary {
    pub fn new(matrix: Matrix2c) -> Result<Self> {
        let err = (matrix.adjoint() * matrix - Matrix2c::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !(err < UNITARY_TOL) {
            return Err(Error::invalid(format!(
                "matrix is not unitary (max |U†U − 1| = {err:.3e})"
            )));
        }
        Ok(PolarizationUnitary { matrix })
    }

    pub fn identity() -> Self {
        PolarizationUnitary {
            matrix: Matrix2c::identity(),
        }
    }

    /// Haar-random element of SU(2) from a uniformly distributed unit quaternion.
    pub fn haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut q = [0.0f64; 4];
        let norm = loop {
            for x in q.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                break n;
            }
        };
        let [a, b, c, d] = q.map(|x| x / norm);
        PolarizationUnitary {
            matrix: Matrix2c::new(
                C64::new(a, b),
                C64::new(c, d),
                C64::new(-c, d),
                C64::new(a, -b),
            ),
        }
    }

    /// Half-wave plate with its fast axis at `axis_angle` from `↗`.
    pub fn half_wave_plate(axis_angle: f64) -> Self {
        let (s, c) = (2.0 * axis_angle).sin_cos();
        PolarizationUnitary {
            matrix: Matrix2c::new(
                C64::new(c, 0.0),
                C64::new(s, 0.0),
                C64::new(s, 0.0),
                C64::new(-c, 0.0),
            ),
        }
    }

    /// `exp(−i·angle·n·σ)` for a unit axis `n`.
    ///
    /// The angle is measured on the Jones vector, so about `n = ŷ` this is the
    /// optical rotator `[[cos, −sin], [sin, cos]]`; the corresponding rotation
    /// of the Poincaré sphere is by `2·angle`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) || !angle.is_finite() {
            return Err(Error::invalid("rotation needs a non-zero finite axis and angle"));
        }
        let [x, y, z] = axis.map(|v| v / n);
        let (s, c) = angle.sin_cos();
        Ok(PolarizationUnitary {
            matrix: Matrix2c::new(
                C64::new(c, -s * z),
                C64::new(-s * y, -s * x),
                C64::new(s * y, -s * x),
                C64::new(c, s * z),
            ),
        })
    }

    /// Rotation about a uniformly random axis.
    pub fn random_axis_rotation<R: Rng + ?Sized>(rng: &mut R, angle: f64) -> Self {
        let axis: [f64; 3] = rng.sample(UnitSphere);
        Self::rotation(axis, angle).expect("unit axis")
    }

    pub fn matrix(&self) -> &Matrix2c {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        PolarizationUnitary {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `U⊗U`.
    pub fn collective(&self) -> Matrix4c {
        kron(&self.matrix, &self.matrix)
    }
}

impl Mul for PolarizationUnitary {
    type Output = PolarizationUnitary;

    fn mul(self, rhs: Self) -> Self {
        PolarizationUnitary {
            matrix: self.matrix * rhs.matrix,
        }
    }
}

pub fn kron(a: &Matrix2c, b: &Matrix2c) -> Matrix4c {
    Matrix4c::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// `|Ψ₋⟩⟨Ψ₋|`.
pub fn singlet_projector() -> Matrix4c {
    *TwoQubitState::named(InputLabel::Singlet).matrix()
}

/// `𝟙 − |Ψ₋⟩⟨Ψ₋|`, the (unnormalized) projector onto the symmetric subspace.
pub fn triplet_projector() -> Matrix4c {
    Matrix4c::identity() - singlet_projector()
}

/// Shannon entropy in bits of a spectrum; entries below [`EIGEN_CLAMP`] count as zero.
pub fn entropy_bits<I: IntoIterator<Item = f64>>(spectrum: I) -> f64 {
    let s: f64 = spectrum
        .into_iter()
        .filter(|&l| l > EIGEN_CLAMP)
        .map(|l| -l * l.log2())
        .sum();
    s.max(0.0)
}

fn hermitize(m: &Matrix4c) -> Matrix4c {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn sorted_eigenvalues(m: &Matrix4c) -> Vector4<f64> {
    let mut ev: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Vector4::from_vec(ev)
}
