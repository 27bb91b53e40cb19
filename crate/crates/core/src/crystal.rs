//! Equilibrium geometry and axial normal modes of a linear ion chain.
//!
//! Positions are dimensionless: physical positions are `u_n · l` with
//! `l³ = e²/(4πε₀ M ω²)` the standard Coulomb length scale, which drops out
//! of everything downstream. Mode frequencies and the orthonormal mode
//! matrix come from the eigen-decomposition of the dimensionless axial
//! Hessian, so the mode geometry depends only on the ion count.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::constants::HBAR;

#[derive(Debug, Error)]
pub enum CrystalError {
    #[error("invalid trap config: {0}")]
    InvalidConfig(String),
    #[error(
        "equilibrium solver did not converge after {iterations} iterations \
         (force residual {residual:.3e}, tolerance {tolerance:.1e})"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("axial Hessian asymmetric by {0:.3e}; positions are inconsistent")]
    AsymmetricHessian(f64),
    #[error("unstable configuration: Hessian eigenvalue {0:.6e} is not positive")]
    UnstableMode(f64),
}

/// Static description of the trap and drive geometry.
#[derive(Debug, Clone)]
pub struct TrapConfig {
    /// Number of ions in the chain (≥ 2).
    pub n_ions: usize,
    /// Axial (center-of-mass) trap frequency, rad/s.
    pub axial_freq: f64,
    /// Single-ion mass, kg.
    pub ion_mass: f64,
    /// Effective drive wavenumber along the axial direction, 1/m.
    pub wavevector: f64,
    /// Per-ion Rabi-amplitude weights w_n ∈ (0, 1]; all 1 for a wide beam.
    pub beam_weights: Vec<f64>,
}

impl TrapConfig {
    /// Homogeneous-beam config (all weights 1).
    pub fn new(
        n_ions: usize,
        axial_freq: f64,
        ion_mass: f64,
        wavevector: f64,
    ) -> Result<Self, CrystalError> {
        let cfg = Self {
            n_ions,
            axial_freq,
            ion_mass,
            wavevector,
            beam_weights: vec![1.0; n_ions],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replace the beam weights, keeping everything else.
    pub fn with_beam_weights(mut self, weights: Vec<f64>) -> Result<Self, CrystalError> {
        self.beam_weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CrystalError> {
        if self.n_ions < 2 {
            return Err(CrystalError::InvalidConfig(format!(
                "n_ions must be at least 2, got {}",
                self.n_ions
            )));
        }
        if !(self.axial_freq > 0.0) {
            return Err(CrystalError::InvalidConfig(format!(
                "axial_freq must be positive, got {}",
                self.axial_freq
            )));
        }
        if !(self.ion_mass > 0.0) {
            return Err(CrystalError::InvalidConfig(format!(
                "ion_mass must be positive, got {}",
                self.ion_mass
            )));
        }
        if !(self.wavevector > 0.0) {
            return Err(CrystalError::InvalidConfig(format!(
                "wavevector must be positive, got {}",
                self.wavevector
            )));
        }
        if self.beam_weights.len() != self.n_ions {
            return Err(CrystalError::InvalidConfig(format!(
                "beam_weights has length {}, expected {}",
                self.beam_weights.len(),
                self.n_ions
            )));
        }
        if let Some(w) = self
            .beam_weights
            .iter()
            .find(|&&w| !(w > 0.0 && w <= 1.0))
        {
            return Err(CrystalError::InvalidConfig(format!(
                "beam weight {w} outside (0, 1]"
            )));
        }
        Ok(())
    }
}

/// Axial normal-mode decomposition of the chain.
///
/// Mode `j` lives in row `j` of `mode_matrix`; the center-of-mass mode is
/// row 0 and frequencies are sorted ascending.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    /// Mode angular frequencies ν_j, rad/s, ascending (COM first).
    pub freqs: Vec<f64>,
    /// Orthonormal mode matrix O; row j holds ion participations O_j^(n).
    pub mode_matrix: DMatrix<f64>,
    /// Lamb–Dicke parameters η_j of each mode.
    pub lamb_dicke: Vec<f64>,
    /// Beam-weighted matrix Õ with Õ_j^(n) = w_n · O_j^(n).
    pub effective_matrix: DMatrix<f64>,
}

impl ModeDecomposition {
    pub fn n_ions(&self) -> usize {
        self.freqs.len()
    }

    /// The matrix selected by `use_effective`.
    pub fn matrix(&self, use_effective: bool) -> &DMatrix<f64> {
        if use_effective {
            &self.effective_matrix
        } else {
            &self.mode_matrix
        }
    }
}

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-12;

/// Force residual of the dimensionless equilibrium equations.
///
/// f_m = u_m − Σ_{n<m} (u_m−u_n)⁻² + Σ_{n>m} (u_n−u_m)⁻²
fn force_residual(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut f = vec![0.0; n];
    for m in 0..n {
        let mut acc = u[m];
        for k in 0..n {
            if k < m {
                acc -= (u[m] - u[k]).powi(-2);
            } else if k > m {
                acc += (u[k] - u[m]).powi(-2);
            }
        }
        f[m] = acc;
    }
    f
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Dimensionless axial Hessian at positions `u`.
///
/// A_{mm} = 1 + Σ_{k≠m} 2/|u_m−u_k|³,  A_{mk} = −2/|u_m−u_k|³ (k ≠ m).
fn hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut a = DMatrix::zeros(n, n);
    for m in 0..n {
        let mut diag = 1.0;
        for k in 0..n {
            if k != m {
                let w = 2.0 / (u[m] - u[k]).abs().powi(3);
                diag += w;
                a[(m, k)] = -w;
            }
        }
        a[(m, m)] = diag;
    }
    a
}

/// Solve the chain equilibrium by damped Newton iteration.
///
/// Seeded with a uniformly spaced chain; each step is halved until the force
/// residual decreases and the ion ordering is preserved.
pub fn equilibrium_positions(cfg: &TrapConfig) -> Result<Vec<f64>, CrystalError> {
    cfg.validate()?;
    let n = cfg.n_ions;

    // Empirical minimum-spacing estimate for the seed.
    let spacing = 2.018 / (n as f64).powf(0.559);
    let mut u: Vec<f64> = (0..n)
        .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing)
        .collect();

    let mut f = force_residual(&u);
    let mut res = max_abs(&f);
    for _ in 0..NEWTON_MAX_ITER {
        if res < NEWTON_TOL {
            return Ok(u);
        }
        let jac = hessian(&u);
        let rhs = DVector::from_column_slice(&f);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(CrystalError::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                residual: res,
                tolerance: NEWTON_TOL,
            })?;

        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(&ui, &si)| ui - lambda * si)
                .collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let tf = force_residual(&trial);
                let tres = max_abs(&tf);
                if tres < res {
                    u = trial;
                    f = tf;
                    res = tres;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(CrystalError::NoConvergence {
                    iterations: NEWTON_MAX_ITER,
                    residual: res,
                    tolerance: NEWTON_TOL,
                });
            }
        }
    }
    if res < NEWTON_TOL {
        Ok(u)
    } else {
        Err(CrystalError::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: res,
            tolerance: NEWTON_TOL,
        })
    }
}

/// Diagonalize the axial Hessian into a [`ModeDecomposition`].
///
/// Eigenvector rows are sign-fixed so each row's first entry of significant
/// magnitude is positive, making compiled phases reproducible across runs.
pub fn axial_modes(cfg: &TrapConfig, positions: &[f64]) -> Result<ModeDecomposition, CrystalError> {
    cfg.validate()?;
    if positions.len() != cfg.n_ions {
        return Err(CrystalError::InvalidConfig(format!(
            "positions length {} does not match n_ions {}",
            positions.len(),
            cfg.n_ions
        )));
    }
    let n = cfg.n_ions;
    let a = hessian(positions);
    let asym = (&a - a.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(CrystalError::AsymmetricHessian(asym));
    }

    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let mut freqs = Vec::with_capacity(n);
    let mut mode_matrix = DMatrix::zeros(n, n);
    for (row, &idx) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 {
            return Err(CrystalError::UnstableMode(lambda));
        }
        freqs.push(cfg.axial_freq * lambda.sqrt());
        let col = eig.eigenvectors.column(idx);
        // Fix the eigenvector gauge: first significant entry positive.
        let sign = col
            .iter()
            .find(|x| x.abs() > 1e-9)
            .map_or(1.0, |x| x.signum());
        for k in 0..n {
            mode_matrix[(row, k)] = sign * col[k];
        }
    }

    let lamb_dicke = lamb_dicke_params(cfg, &freqs);
    let mut effective_matrix = mode_matrix.clone();
    for j in 0..n {
        for k in 0..n {
            effective_matrix[(j, k)] *= cfg.beam_weights[k];
        }
    }

    Ok(ModeDecomposition {
        freqs,
        mode_matrix,
        lamb_dicke,
        effective_matrix,
    })
}

/// Lamb–Dicke parameters η_j = k · sqrt(ħ / (2 M ν_j)).
pub fn lamb_dicke_params(cfg: &TrapConfig, freqs: &[f64]) -> Vec<f64> {
    freqs
        .iter()
        .map(|&nu| cfg.wavevector * (HBAR / (2.0 * cfg.ion_mass * nu)).sqrt())
        .collect()
}

/// Convenience: equilibrium positions plus mode decomposition in one call.
pub fn chain_modes(cfg: &TrapConfig) -> Result<(Vec<f64>, ModeDecomposition), CrystalError> {
    let positions = equilibrium_positions(cfg)?;
    let modes = axial_modes(cfg, &positions)?;
    Ok((positions, modes))
}
