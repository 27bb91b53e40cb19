//! Excitation-subspace grouping, parity fringes, and coupling reconstruction.
//!
//! The parity experiment evolves the register for a few blocks, applies one
//! global π/2 pulse, and reads bipartite σ_z σ_z correlators; scanning the
//! pulse phase traces out a fringe at 2φ whose amplitude reconstructs the
//! coupling. The rotation axis is scanned opposite to the analysis phase
//! (axis −φ) so that a positive compiled coupling produces a positive
//! `sin 2φ` fringe; the fit amplitude is then directly comparable to the
//! coupling matrix entry.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::compiler::{CompileError, CouplingMatrix, PhaseVector};
use crate::crystal::ModeDecomposition;
use crate::sim::{run_schedule, NoiseModel, ShotCounts, SimError, StateVector, Step, TrotterSchedule};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("empty counts: no shots recorded")]
    EmptyCounts,
    #[error("all shots have odd parity; nothing survives post-selection")]
    AllOdd,
    #[error("fringe grid must contain at least 3 distinct phases, got {0}")]
    GridTooSmall(usize),
    #[error("degenerate fringe grid: sin(2φ) vanishes at every point")]
    DegenerateGrid,
    #[error("phase/value arrays differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("missing fringe fit for pair ({0}, {1})")]
    MissingPair(usize, usize),
    #[error("evolution time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Populations grouped by excitation number (popcount 0..=N).
#[derive(Debug, Clone)]
pub struct EsPopulations {
    pub populations: Vec<f64>,
    pub post_selected: bool,
}

/// Group sampled counts by excitation number.
pub fn group_by_excitation(counts: &ShotCounts) -> Result<EsPopulations, AnalysisError> {
    if counts.total == 0 {
        return Err(AnalysisError::EmptyCounts);
    }
    let mut populations = vec![0.0; counts.n_qubits + 1];
    for (&k, &c) in &counts.counts {
        populations[k.count_ones() as usize] += c as f64;
    }
    for p in &mut populations {
        *p /= counts.total as f64;
    }
    Ok(EsPopulations {
        populations,
        post_selected: false,
    })
}

/// Exact excitation-number populations of a pure state.
pub fn exact_es_populations(state: &StateVector) -> Vec<f64> {
    let mut populations = vec![0.0; state.n_qubits() + 1];
    for (k, p) in state.probabilities().iter().enumerate() {
        populations[k.count_ones() as usize] += p;
    }
    populations
}

/// Drop odd-popcount outcomes; the surviving counts are unchanged and
/// renormalization happens when populations are computed.
pub fn postselect_even(counts: &ShotCounts) -> Result<ShotCounts, AnalysisError> {
    if counts.total == 0 {
        return Err(AnalysisError::EmptyCounts);
    }
    let kept: std::collections::BTreeMap<usize, u64> = counts
        .counts
        .iter()
        .filter(|(k, _)| k.count_ones() % 2 == 0)
        .map(|(&k, &c)| (k, c))
        .collect();
    let total: u64 = kept.values().sum();
    if total == 0 {
        return Err(AnalysisError::AllOdd);
    }
    Ok(ShotCounts {
        n_qubits: counts.n_qubits,
        counts: kept,
        total,
        seed: counts.seed,
    })
}

/// ⟨σ_z σ_z⟩ estimator from sampled counts (0-based sites).
pub fn correlator_zz(counts: &ShotCounts, n: usize, m: usize) -> f64 {
    let mut acc = 0.0;
    for (&k, &c) in &counts.counts {
        acc += StateVector::z_value(counts.n_qubits, k, n)
            * StateVector::z_value(counts.n_qubits, k, m)
            * c as f64;
    }
    acc / counts.total as f64
}

/// Exact ⟨σ_z σ_z⟩ of a pure state (σ_zσ_z is diagonal).
pub fn correlator_zz_exact(state: &StateVector, n: usize, m: usize) -> f64 {
    state
        .probabilities()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            StateVector::z_value(state.n_qubits(), k, n)
                * StateVector::z_value(state.n_qubits(), k, m)
                * p
        })
        .sum()
}

/// Full parity-fringe data set over a phase grid.
#[derive(Debug, Clone)]
pub struct ParityScan {
    pub phi: Vec<f64>,
    /// Site pairs (n < m), 0-based, in row-major upper-triangle order.
    pub pairs: Vec<(usize, usize)>,
    /// `sampled[i][p]`: C estimator at `phi[i]` for `pairs[p]`.
    pub sampled: Vec<Vec<f64>>,
    /// 2σ shot-noise bound per sampled point.
    pub two_sigma: Vec<Vec<f64>>,
    /// Infinite-shot correlators from the exact state.
    pub exact: Vec<Vec<f64>>,
    pub shots: u64,
    pub seed: u64,
}

/// Run the parity sequence: `n_blocks` interaction blocks, one global π/2
/// pulse at axis −φ, then σ_zσ_z readout for every pair and every φ.
#[allow(clippy::too_many_arguments)]
pub fn parity_experiment(
    phases: &PhaseVector,
    n_blocks: usize,
    modes: &ModeDecomposition,
    use_effective: bool,
    phi_grid: &[f64],
    shots: u64,
    noise: &NoiseModel,
) -> Result<ParityScan, AnalysisError> {
    if phi_grid.is_empty() {
        return Err(AnalysisError::GridTooSmall(0));
    }
    let n = modes.n_ions();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();

    let mut sampled = Vec::with_capacity(phi_grid.len());
    let mut two_sigma = Vec::with_capacity(phi_grid.len());
    let mut exact = Vec::with_capacity(phi_grid.len());

    for (idx, &phi) in phi_grid.iter().enumerate() {
        let mut steps: Vec<Step> = (0..n_blocks)
            .map(|_| Step::IsingBlock {
                phases: phases.clone(),
                axis_phase: 0.0,
                duration_frac: 1.0,
            })
            .collect();
        steps.push(Step::GlobalRotation {
            angle: std::f64::consts::FRAC_PI_2,
            axis_phase: -phi,
        });
        let len = steps.len();
        let schedule = TrotterSchedule {
            steps,
            record_points: vec![len],
        };
        // Each phi point is its own experiment on its own noise substream.
        let point_noise = noise.derived(idx as u64);
        let snaps = run_schedule(
            &StateVector::ground(n)?,
            &schedule,
            modes,
            use_effective,
            &point_noise,
            shots,
        )?;
        let snap = &snaps[0];

        let mut row_c = Vec::with_capacity(pairs.len());
        let mut row_s = Vec::with_capacity(pairs.len());
        let mut row_e = Vec::with_capacity(pairs.len());
        for &(a, b) in &pairs {
            let c = if shots > 0 {
                correlator_zz(&snap.counts, a, b)
            } else {
                0.0
            };
            row_c.push(c);
            row_s.push(if shots > 0 {
                2.0 * ((1.0 - c * c).max(0.0) / shots as f64).sqrt()
            } else {
                0.0
            });
            row_e.push(correlator_zz_exact(&snap.exact, a, b));
        }
        sampled.push(row_c);
        two_sigma.push(row_s);
        exact.push(row_e);
    }

    Ok(ParityScan {
        phi: phi_grid.to_vec(),
        pairs,
        sampled,
        two_sigma,
        exact,
        shots,
        seed: noise.seed,
    })
}

/// Single-parameter fringe fit C(φ) ≃ A·sin(2φ).
#[derive(Debug, Clone)]
pub struct FringeFit {
    /// Site pair (n < m), 0-based.
    pub pair: (usize, usize),
    /// Fitted amplitude A (the reconstructed coupling entry).
    pub amplitude: f64,
    /// RMS of the fit residuals.
    pub residual_rms: f64,
    /// 2σ amplitude uncertainty propagated from per-point shot noise.
    pub two_sigma: f64,
}

/// Closed-form least squares: A = Σ C_i sin2φ_i / Σ sin²2φ_i.
pub fn fit_parity_fringe(
    pair: (usize, usize),
    phi: &[f64],
    c_values: &[f64],
    point_two_sigma: Option<&[f64]>,
) -> Result<FringeFit, AnalysisError> {
    if phi.len() != c_values.len() {
        return Err(AnalysisError::LengthMismatch(phi.len(), c_values.len()));
    }
    let mut distinct = phi.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    if distinct.len() < 3 {
        return Err(AnalysisError::GridTooSmall(distinct.len()));
    }

    let s: Vec<f64> = phi.iter().map(|p| (2.0 * p).sin()).collect();
    let denom: f64 = s.iter().map(|x| x * x).sum();
    if denom < 1e-12 {
        return Err(AnalysisError::DegenerateGrid);
    }
    let amplitude: f64 = c_values.iter().zip(&s).map(|(c, x)| c * x).sum::<f64>() / denom;

    let residual_sq: f64 = c_values
        .iter()
        .zip(&s)
        .map(|(c, x)| (c - amplitude * x).powi(2))
        .sum::<f64>();
    let residual_rms = (residual_sq / c_values.len() as f64).sqrt();

    let two_sigma = match point_two_sigma {
        Some(ts) => {
            if ts.len() != phi.len() {
                return Err(AnalysisError::LengthMismatch(phi.len(), ts.len()));
            }
            // Var(A) = Σ s_i² σ_i² / (Σ s_i²)², with σ_i = ts_i / 2.
            let var: f64 = ts
                .iter()
                .zip(&s)
                .map(|(t, x)| (x * t / 2.0).powi(2))
                .sum::<f64>()
                / (denom * denom);
            2.0 * var.sqrt()
        }
        None => 0.0,
    };

    Ok(FringeFit {
        pair,
        amplitude,
        residual_rms,
        two_sigma,
    })
}

/// Assemble fitted amplitudes into a symmetric zero-diagonal matrix.
pub fn reconstruct_matrix(n: usize, fits: &[FringeFit]) -> Result<CouplingMatrix, AnalysisError> {
    let mut values = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let fit = fits
                .iter()
                .find(|f| f.pair == (a, b) || f.pair == (b, a))
                .ok_or(AnalysisError::MissingPair(a, b))?;
            values[(a, b)] = fit.amplitude;
            values[(b, a)] = fit.amplitude;
        }
    }
    Ok(CouplingMatrix::new(values)?)
}

/// Effective coupling: mean |J| over the N cyclic nearest-neighbor bonds,
/// divided by the evolution time.
pub fn effective_coupling(j: &CouplingMatrix, t: f64) -> Result<f64, AnalysisError> {
    if !(t > 0.0) {
        return Err(AnalysisError::NonPositiveTime(t));
    }
    let n = j.n();
    let sum: f64 = (0..n).map(|a| j.get(a, (a + 1) % n).abs()).sum();
    Ok(sum / (n as f64 * t))
}

/// Suppression envelope of the off-resonant excitation estimate,
/// `scale / (1 + (δ/4Ω̃)²)`.
pub fn excitation_envelope(delta: f64, omega_eff: f64, scale: f64) -> f64 {
    assert!(omega_eff > 0.0, "effective coupling must be positive");
    let x = delta / (4.0 * omega_eff);
    scale / (1.0 + x * x)
}

/// Off-resonant-excitation estimate for the two-block transverse recipe:
/// `1 − Pr(0…0) ≈ scale · sin²(3√(1+x²)) / (1+x²)` with `x = δ/(4Ω̃)`.
pub fn excitation_estimate(delta: f64, omega_eff: f64, scale: f64) -> f64 {
    assert!(omega_eff > 0.0, "effective coupling must be positive");
    let x = delta / (4.0 * omega_eff);
    let root = (1.0 + x * x).sqrt();
    scale * (3.0 * root).sin().powi(2) / (1.0 + x * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn counts_of(n_qubits: usize, entries: &[(usize, u64)]) -> ShotCounts {
        let counts: BTreeMap<usize, u64> = entries.iter().copied().collect();
        let total = counts.values().sum();
        ShotCounts {
            n_qubits,
            counts,
            total,
            seed: 0,
        }
    }

    #[test]
    fn grouping_basics() {
        let c = counts_of(4, &[(0, 100)]);
        let es = group_by_excitation(&c).unwrap();
        assert_eq!(es.populations, vec![1.0, 0.0, 0.0, 0.0, 0.0]);

        let c = counts_of(4, &[(0b1100, 50), (0b0011, 50)]);
        let es = group_by_excitation(&c).unwrap();
        assert_eq!(es.populations, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((es.populations.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        assert!(group_by_excitation(&counts_of(4, &[])).is_err());
    }

    #[test]
    fn postselection_basics() {
        let c = counts_of(4, &[(0b1100, 50), (0b0011, 50)]);
        let kept = postselect_even(&c).unwrap();
        assert_eq!(kept.total, 100);

        let c = counts_of(4, &[(0b1100, 50), (0b1000, 50)]);
        let kept = postselect_even(&c).unwrap();
        assert_eq!(kept.total, 50);
        assert_eq!(kept.counts.get(&0b1100), Some(&50));
        assert!(kept.counts.get(&0b1000).is_none());

        let c = counts_of(4, &[(0b1000, 10), (0b0111, 5)]);
        assert!(matches!(postselect_even(&c), Err(AnalysisError::AllOdd)));
    }

    #[test]
    fn correlator_signs() {
        let c = counts_of(2, &[(0b00, 50), (0b11, 50)]);
        assert_eq!(correlator_zz(&c, 0, 1), 1.0);
        let c = counts_of(2, &[(0b01, 60), (0b10, 40)]);
        assert_eq!(correlator_zz(&c, 0, 1), -1.0);
    }

    #[test]
    fn fringe_fit_exact_recovery() {
        let phi: Vec<f64> = (0..13).map(|i| i as f64 * std::f64::consts::PI / 13.0).collect();
        for amp in [0.5, -0.3] {
            let c: Vec<f64> = phi.iter().map(|p| amp * (2.0 * p).sin()).collect();
            let fit = fit_parity_fringe((0, 1), &phi, &c, None).unwrap();
            assert!((fit.amplitude - amp).abs() < 1e-12);
            assert!(fit.residual_rms < 1e-12);
            assert_eq!(fit.two_sigma, 0.0);
        }
    }

    #[test]
    fn fringe_fit_rejects_bad_grids() {
        let c = vec![0.0, 0.1, 0.2];
        assert!(matches!(
            fit_parity_fringe((0, 1), &[0.0, 0.1], &c[..2], None),
            Err(AnalysisError::GridTooSmall(2))
        ));
        // sin(2φ) vanishes at 0, π/2, π.
        let phi = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI];
        assert!(matches!(
            fit_parity_fringe((0, 1), &phi, &c, None),
            Err(AnalysisError::DegenerateGrid)
        ));
    }

    #[test]
    fn fit_uncertainty_scales_with_point_noise() {
        let phi: Vec<f64> = (0..13).map(|i| i as f64 * std::f64::consts::PI / 13.0).collect();
        let c: Vec<f64> = phi.iter().map(|p| 0.4 * (2.0 * p).sin()).collect();
        let ts = vec![0.1; phi.len()];
        let fit = fit_parity_fringe((0, 1), &phi, &c, Some(&ts)).unwrap();
        assert!(fit.two_sigma > 0.0);
        let ts2 = vec![0.2; phi.len()];
        let fit2 = fit_parity_fringe((0, 1), &phi, &c, Some(&ts2)).unwrap();
        assert!((fit2.two_sigma / fit.two_sigma - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reconstruction_shape() {
        let fits: Vec<FringeFit> = [(0usize, 1usize), (0, 2), (1, 2)]
            .iter()
            .enumerate()
            .map(|(i, &pair)| FringeFit {
                pair,
                amplitude: i as f64 + 1.0,
                residual_rms: 0.0,
                two_sigma: 0.0,
            })
            .collect();
        let j = reconstruct_matrix(3, &fits).unwrap();
        assert_eq!(j.get(0, 1), 1.0);
        assert_eq!(j.get(2, 1), 3.0);
        assert_eq!(j.get(1, 1), 0.0);

        assert!(matches!(
            reconstruct_matrix(3, &fits[..2]),
            Err(AnalysisError::MissingPair(1, 2))
        ));
    }

    #[test]
    fn effective_coupling_cyclic_mean() {
        let j = CouplingMatrix::ring_antiperiodic(4, 1.0).unwrap();
        assert!((effective_coupling(&j, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((effective_coupling(&j, 2.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(effective_coupling(&j, 0.0).is_err());
    }

    #[test]
    fn excitation_estimate_limits() {
        // δ = 0: the argument collapses to 3 radians.
        let at_zero = excitation_estimate(0.0, 1.0, 1.0);
        assert!((at_zero - (3.0f64).sin().powi(2)).abs() < 1e-12);
        assert!((at_zero - 0.0199).abs() < 2e-4);

        // Large transverse field: the initial state becomes an eigenstate.
        assert!(excitation_estimate(1e6, 1.0, 1.0) < 1e-10);

        // The envelope decreases monotonically in |δ|.
        let mut last = excitation_envelope(0.0, 1.0, 1.0);
        for k in 1..40 {
            let next = excitation_envelope(k as f64 * 0.5, 1.0, 1.0);
            assert!(next < last);
            last = next;
        }
    }
}
