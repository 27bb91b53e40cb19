//! Mapping between target coupling matrices and mode entanglement phases.
//!
//! One drive block applies `U = exp(i Σ_j Φ_j Σ_{n,m} O_j^(n) O_j^(m) σσ)`,
//! so the per-block coupling matrix realized by a phase vector Φ is
//! `J = Oᵀ·diag(Φ)·O` with the physically irrelevant diagonal dropped.
//! The inverse direction finds the Φ whose off-diagonal couplings best match
//! a target, reports how much of the target is unrealizable, and solves the
//! per-mode drive amplitudes that produce those phases.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::crystal::ModeDecomposition;

/// Entanglement phase accumulated through one mode by the two-pair drive,
/// per unit (η r Ω₀ / ξ)². Fixed by the pair detunings ξ and 3ξ:
/// Φ = (ηrΩ₀/2)² · (2π/ξ) · (1/ξ + 1/3ξ) = (2π/3) · (ηrΩ₀/ξ)².
pub const DRIVE_PHASE_FACTOR: f64 = 2.0 * std::f64::consts::PI / 3.0;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("coupling matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("coupling matrix asymmetric by {0:.3e} (tolerance 1e-12)")]
    NotSymmetric(f64),
    #[error("coupling matrix has nonzero diagonal entry {0:.3e}")]
    NonzeroDiagonal(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("zero-norm coupling matrix: direction undefined")]
    ZeroTarget,
    #[error("least-squares solve failed: {0}")]
    SolveFailed(&'static str),
    #[error("invalid drive parameter: {0}")]
    InvalidDrive(String),
}

/// Mode entanglement phases Φ_j, radians, one per motional mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Element-wise scaling (used for half-phase blocks).
    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|p| p * factor).collect())
    }
}

/// Symmetric zero-diagonal coupling matrix (dimensionless phase per block,
/// or an arbitrary-units target shape).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    values: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Validate and wrap a symmetric zero-diagonal matrix.
    pub fn new(values: DMatrix<f64>) -> Result<Self, CompileError> {
        if values.nrows() != values.ncols() {
            return Err(CompileError::NotSquare {
                rows: values.nrows(),
                cols: values.ncols(),
            });
        }
        let asym = (&values - values.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(CompileError::NotSymmetric(asym));
        }
        for i in 0..values.nrows() {
            if values[(i, i)] != 0.0 {
                return Err(CompileError::NonzeroDiagonal(values[(i, i)]));
            }
        }
        Ok(Self { values })
    }

    /// Build from the strict upper triangle of `entries[(n, m)] = J_{n,m}`.
    pub fn from_upper(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, CompileError> {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, v) in entries {
            if i >= n || j >= n || i == j {
                return Err(CompileError::DimensionMismatch(format!(
                    "bond ({i},{j}) out of range for {n} sites"
                )));
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Self::new(m)
    }

    /// Nearest-neighbor ring with a sign-flipped closure bond:
    /// J_{i,i+1} = scale and J_{0,N-1} = -scale.
    pub fn ring_antiperiodic(n: usize, scale: f64) -> Result<Self, CompileError> {
        if n < 3 {
            return Err(CompileError::DimensionMismatch(format!(
                "ring needs at least 3 sites, got {n}"
            )));
        }
        let mut bonds: Vec<(usize, usize, f64)> =
            (0..n - 1).map(|i| (i, i + 1, scale)).collect();
        bonds.push((0, n - 1, -scale));
        Self::from_upper(n, &bonds)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[(n, m)]
    }

    /// Strict-upper-triangle vectorization, row-major.
    pub fn upper_vec(&self) -> Vec<f64> {
        let n = self.n();
        let mut v = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                v.push(self.values[(i, j)]);
            }
        }
        v
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.norm()
    }
}

/// Result of inverse compilation.
#[derive(Debug, Clone)]
pub struct CompileReport {
    /// Gauge-shifted phases (COM entry exactly zero).
    pub phases: PhaseVector,
    /// ‖forward_map(phases) − target‖_F / ‖target‖_F; zero iff realizable.
    pub residual: f64,
    /// Overlap F between the target and the realized coupling matrix.
    pub overlap_f: f64,
}

/// Per-mode drive amplitudes realizing a phase vector.
#[derive(Debug, Clone)]
pub struct DriveAmplitudes {
    /// Relative tone-pair amplitudes, normalized so the strongest is 1.
    pub rel_amps: Vec<f64>,
    /// Which side of each sideband the tone pairs sit on (= sign of Φ_j).
    pub detuning_signs: Vec<i8>,
    /// Total Rabi frequency Ω₀ of the strongest pair, rad/s.
    pub rabi_freq: f64,
    /// Calibration constant κ absorbing hardware scale factors.
    pub calib_const: f64,
}

/// Forward map: J = Mᵀ·diag(Φ)·M with the diagonal zeroed.
pub fn forward_map(
    phases: &PhaseVector,
    modes: &ModeDecomposition,
    use_effective: bool,
) -> Result<CouplingMatrix, CompileError> {
    let m = modes.matrix(use_effective);
    let n = m.ncols();
    if phases.len() != m.nrows() {
        return Err(CompileError::DimensionMismatch(format!(
            "{} phases for {} modes",
            phases.len(),
            m.nrows()
        )));
    }
    let full = full_coupling(phases, m);
    let mut j = full;
    for i in 0..n {
        j[(i, i)] = 0.0;
    }
    // Symmetrize exactly: roundoff can leave J_{nm} and J_{mn} a few ulps apart.
    let j = (j.clone() + j.transpose()) * 0.5;
    CouplingMatrix::new(j)
}

/// Mᵀ·diag(Φ)·M including the diagonal (global-phase) part.
pub fn full_coupling(phases: &PhaseVector, matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(phases.as_slice()));
    matrix.transpose() * diag * matrix
}

/// Uniform shift putting the center-of-mass phase to exactly zero.
///
/// With an orthonormal mode matrix this changes the forward map only on the
/// physically irrelevant diagonal.
pub fn gauge_shift_com(phases: &PhaseVector) -> PhaseVector {
    if phases.is_empty() {
        return phases.clone();
    }
    let c = phases.0[0];
    PhaseVector(phases.0.iter().map(|p| p - c).collect())
}

/// Overlap F: cosine similarity of the strict-upper-triangle vectorizations.
pub fn overlap_f(a: &CouplingMatrix, b: &CouplingMatrix) -> Result<f64, CompileError> {
    if a.n() != b.n() {
        return Err(CompileError::DimensionMismatch(format!(
            "{} vs {} sites",
            a.n(),
            b.n()
        )));
    }
    let va = a.upper_vec();
    let vb = b.upper_vec();
    let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(CompileError::ZeroTarget);
    }
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let f = dot / (na * nb);
    // Guard against ulp-level overshoot of the Cauchy-Schwarz bound.
    Ok(f.clamp(-1.0, 1.0))
}

/// Inverse map: find the COM-decoupled phases whose realized off-diagonal
/// couplings are closest (Frobenius) to the target.
///
/// The diagonal of the coupling matrix is a global phase, so the fit runs on
/// the strict upper triangle with the diagonal left free. With the ideal
/// orthonormal O the column space is degenerate along uniform shifts and the
/// minimum-norm solution is taken before gauge shifting; with the weighted Õ
/// (rows not orthonormal) the COM phase is constrained to zero directly,
/// since a drive that does not address the COM mode cannot use it.
pub fn phases_from_target(
    target: &CouplingMatrix,
    modes: &ModeDecomposition,
    use_effective: bool,
) -> Result<CompileReport, CompileError> {
    let m = modes.matrix(use_effective);
    let n = m.ncols();
    if target.n() != n {
        return Err(CompileError::DimensionMismatch(format!(
            "target has {} sites, modes have {}",
            target.n(),
            n
        )));
    }
    let t = target.upper_vec();
    let tnorm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    if tnorm == 0.0 {
        return Err(CompileError::ZeroTarget);
    }

    let n_pairs = n * (n - 1) / 2;
    // Columns: realizable "bond patterns" of each mode, skipping the COM
    // column when its phase is pinned to zero.
    let j_offset = usize::from(use_effective);
    let n_cols = n - j_offset;
    let mut b = DMatrix::zeros(n_pairs, n_cols);
    for (col, j) in (j_offset..n).enumerate() {
        let mut row = 0;
        for p in 0..n {
            for q in p + 1..n {
                b[(row, col)] = m[(j, p)] * m[(j, q)];
                row += 1;
            }
        }
    }

    let rhs = DVector::from_column_slice(&t);
    let svd = b.svd(true, true);
    let smax = svd.singular_values.max();
    let solution = svd
        .solve(&rhs, smax * 1e-12)
        .map_err(CompileError::SolveFailed)?;

    let mut phases = vec![0.0; n];
    for (col, j) in (j_offset..n).enumerate() {
        phases[j] = solution[col];
    }
    let phases = gauge_shift_com(&PhaseVector(phases));

    let realized = forward_map(&phases, modes, use_effective)?;
    let diff = realized.values() - target.values();
    let residual = diff.norm() / target.frobenius_norm();
    let overlap = overlap_f(target, &realized)?;

    Ok(CompileReport {
        phases,
        residual,
        overlap_f: overlap,
    })
}

/// Solve the per-mode relative amplitudes realizing `phases`.
///
/// The defining relation is |Φ_j| = κ · C · (η_j r_j Ω₀ / ξ)² with
/// C = [`DRIVE_PHASE_FACTOR`]; the sign of Φ_j is realized by the detuning
/// side of the tone pairs. Amplitudes are normalized so the strongest pair
/// has r = 1 and the Rabi frequency is rescaled to compensate.
pub fn amplitudes_from_phases(
    phases: &PhaseVector,
    modes: &ModeDecomposition,
    xi: f64,
    rabi: f64,
    kappa: f64,
) -> Result<DriveAmplitudes, CompileError> {
    if !(xi > 0.0) {
        return Err(CompileError::InvalidDrive(format!(
            "detuning xi must be positive, got {xi}"
        )));
    }
    if !(rabi > 0.0) {
        return Err(CompileError::InvalidDrive(format!(
            "rabi frequency must be positive, got {rabi}"
        )));
    }
    if !(kappa > 0.0) {
        return Err(CompileError::InvalidDrive(format!(
            "calibration constant must be positive, got {kappa}"
        )));
    }
    if phases.len() != modes.n_ions() {
        return Err(CompileError::DimensionMismatch(format!(
            "{} phases for {} modes",
            phases.len(),
            modes.n_ions()
        )));
    }

    let mut raw = Vec::with_capacity(phases.len());
    let mut signs = Vec::with_capacity(phases.len());
    for (j, &phi) in phases.as_slice().iter().enumerate() {
        let eta = modes.lamb_dicke[j];
        signs.push(if phi < 0.0 { -1 } else { 1 });
        if phi == 0.0 {
            raw.push(0.0);
        } else {
            raw.push(xi / (eta * rabi) * (phi.abs() / (kappa * DRIVE_PHASE_FACTOR)).sqrt());
        }
    }
    let rmax = raw.iter().fold(0.0f64, |a, &r| a.max(r));
    if rmax == 0.0 {
        return Ok(DriveAmplitudes {
            rel_amps: raw,
            detuning_signs: signs,
            rabi_freq: rabi,
            calib_const: kappa,
        });
    }
    Ok(DriveAmplitudes {
        rel_amps: raw.iter().map(|r| r / rmax).collect(),
        detuning_signs: signs,
        rabi_freq: rabi * rmax,
        calib_const: kappa,
    })
}

/// Reconstruct the phases a [`DriveAmplitudes`] produces (inverse of
/// [`amplitudes_from_phases`]).
pub fn phases_from_amplitudes(
    amps: &DriveAmplitudes,
    modes: &ModeDecomposition,
    xi: f64,
) -> Result<PhaseVector, CompileError> {
    if !(xi > 0.0) {
        return Err(CompileError::InvalidDrive(format!(
            "detuning xi must be positive, got {xi}"
        )));
    }
    if amps.rel_amps.len() != modes.n_ions() {
        return Err(CompileError::DimensionMismatch(format!(
            "{} amplitudes for {} modes",
            amps.rel_amps.len(),
            modes.n_ions()
        )));
    }
    let phases = amps
        .rel_amps
        .iter()
        .zip(&amps.detuning_signs)
        .zip(&modes.lamb_dicke)
        .map(|((&r, &s), &eta)| {
            let mag =
                amps.calib_const * DRIVE_PHASE_FACTOR * (eta * r * amps.rabi_freq / xi).powi(2);
            f64::from(s) * mag
        })
        .collect();
    Ok(PhaseVector(phases))
}
