//! Dense state-vector simulation of the stroboscopic evolution.
//!
//! Basis ordering: qubit 1 is the most significant bit, so `|0…0⟩` is index
//! 0 and basis index `k` assigns qubit `n` (1-based) the bit at position
//! `N − n`. A bit value 0 means σ_z eigenvalue +1.
//!
//! The interaction block applies `exp(i Σ_{n,m} J̃_{n,m} σ_φ σ_φ)` exactly:
//! all σ_φσ_φ terms commute, so the block is diagonal in the φ-rotated
//! basis and costs one diagonal sweep plus two single-qubit passes. The
//! diagonal includes the n = m (global-phase) terms for determinism.
//!
//! Dephasing noise is a per-qubit Gaussian z-phase kick after every
//! interaction block, with variance `2·T_block/T₂`; applied as
//! `exp(−i(a/2)σ_z)` this decays single-qubit coherences at exactly `1/T₂`.
//! Shots are sampled on independent per-(record point, shot) substreams of
//! a counter-based generator, so results are invariant to execution order
//! and thread count.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::compiler::{full_coupling, PhaseVector};
use crate::crystal::ModeDecomposition;

/// Hard cap on the register size (dense amplitudes).
pub const MAX_QUBITS: usize = 16;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("qubit count {0} exceeds the dense-simulation cap {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("qubit count must be at least 1")]
    NoQubits,
    #[error("amplitude vector has norm {0}, expected 1 within 1e-10")]
    NotNormalized(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("schedule has no steps")]
    EmptySchedule,
    #[error("record point {point} out of range 0..={max}")]
    RecordPointOutOfRange { point: usize, max: usize },
    #[error("record points must be strictly increasing")]
    UnorderedRecordPoints,
    #[error("shots must be positive when noise sampling is requested")]
    ShotsRequired,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
}

/// Pure state of an N-qubit register.
#[derive(Debug, Clone)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn ground(n_qubits: usize) -> Result<Self, SimError> {
        if n_qubits == 0 {
            return Err(SimError::NoQubits);
        }
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wrap explicit amplitudes; must be normalized within 1e-10.
    pub fn from_amps(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self, SimError> {
        if n_qubits == 0 {
            return Err(SimError::NoQubits);
        }
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        if amps.len() != 1 << n_qubits {
            return Err(SimError::DimensionMismatch(format!(
                "{} amplitudes for {} qubits",
                amps.len(),
                n_qubits
            )));
        }
        let state = Self { n_qubits, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.amps[k].norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &Self) -> f64 {
        let overlap: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        overlap.norm_sqr()
    }

    /// σ_z eigenvalue (+1 or -1) of 0-based `qubit` in basis state `k`.
    pub fn z_value(n_qubits: usize, k: usize, qubit: usize) -> f64 {
        let bit = (k >> (n_qubits - 1 - qubit)) & 1;
        1.0 - 2.0 * bit as f64
    }

    /// Render basis index `k` as a bitstring, qubit 1 leftmost.
    pub fn bitstring(n_qubits: usize, k: usize) -> String {
        format!("{k:0width$b}", width = n_qubits)
    }

    fn apply_one_qubit(&mut self, qubit: usize, gate: [Complex64; 4]) {
        // `qubit` is 0-based; qubit 0 owns the most significant bit.
        let pos = self.n_qubits - 1 - qubit;
        let stride = 1usize << pos;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i0 in base..base + stride {
                let i1 = i0 | stride;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = gate[0] * a0 + gate[1] * a1;
                self.amps[i1] = gate[2] * a0 + gate[3] * a1;
            }
            base += stride << 1;
        }
    }

    fn apply_diag(&mut self, diag: &[Complex64]) {
        for (a, d) in self.amps.iter_mut().zip(diag) {
            *a *= d;
        }
    }

    /// Multiply by exp(−i·(a/2)·σ_z) on one 0-based qubit.
    fn apply_z_kick(&mut self, qubit: usize, angle: f64) {
        let pos = self.n_qubits - 1 - qubit;
        let up = Complex64::from_polar(1.0, -angle / 2.0);
        let down = Complex64::from_polar(1.0, angle / 2.0);
        for (k, a) in self.amps.iter_mut().enumerate() {
            *a *= if (k >> pos) & 1 == 0 { up } else { down };
        }
    }
}

/// Diagonal phases φ_k = xᵀ·J̃·x of one interaction block in the rotated
/// basis, with x_n = ±1 read off the bits of k.
fn ising_phases(phases: &PhaseVector, modes: &ModeDecomposition, use_effective: bool) -> Vec<f64> {
    let coupling = full_coupling(phases, modes.matrix(use_effective));
    let n = coupling.nrows();
    let dim = 1usize << n;
    let mut out = vec![0.0; dim];
    for (k, slot) in out.iter_mut().enumerate() {
        let x: Vec<f64> = (0..n)
            .map(|q| 1.0 - 2.0 * ((k >> (n - 1 - q)) & 1) as f64)
            .collect();
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += coupling[(a, b)] * x[a] * x[b];
            }
        }
        *slot = acc;
    }
    out
}

/// Basis-change gate W with σ_φ = W σ_z W†.
fn phi_basis_gate(phi: f64) -> ([Complex64; 4], [Complex64; 4]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let e = Complex64::from_polar(s, phi);
    let w = [Complex64::new(s, 0.0), Complex64::new(s, 0.0), e, -e];
    let w_dag = [
        Complex64::new(s, 0.0),
        e.conj(),
        Complex64::new(s, 0.0),
        -e.conj(),
    ];
    (w, w_dag)
}

/// Exact application of one interaction block
/// `exp(i Σ_j Φ_j Σ_{n,m} O_j^(n) O_j^(m) σ_φ σ_φ)`.
pub fn apply_ising_block(
    state: &mut StateVector,
    phases: &PhaseVector,
    modes: &ModeDecomposition,
    use_effective: bool,
    axis_phase: f64,
) -> Result<(), SimError> {
    if phases.len() != modes.n_ions() || modes.n_ions() != state.n_qubits() {
        return Err(SimError::DimensionMismatch(format!(
            "{} phases, {} modes, {} qubits",
            phases.len(),
            modes.n_ions(),
            state.n_qubits()
        )));
    }
    let diag: Vec<Complex64> = ising_phases(phases, modes, use_effective)
        .into_iter()
        .map(|p| Complex64::from_polar(1.0, p))
        .collect();
    let (w, w_dag) = phi_basis_gate(axis_phase);
    for q in 0..state.n_qubits() {
        state.apply_one_qubit(q, w_dag);
    }
    state.apply_diag(&diag);
    for q in 0..state.n_qubits() {
        state.apply_one_qubit(q, w);
    }
    Ok(())
}

/// Product of identical single-qubit rotations `exp(i(angle/2)σ_φ)`.
pub fn apply_global_rotation(state: &mut StateVector, angle: f64, axis_phase: f64) {
    let theta = angle / 2.0;
    let cos = Complex64::new(theta.cos(), 0.0);
    let isin = Complex64::new(0.0, theta.sin());
    let gate = [
        cos,
        isin * Complex64::from_polar(1.0, -axis_phase),
        isin * Complex64::from_polar(1.0, axis_phase),
        cos,
    ];
    for q in 0..state.n_qubits() {
        state.apply_one_qubit(q, gate);
    }
}

/// Transverse-field step `exp(−i·angle·Σ_n σ_z^(n))`.
pub fn apply_z_field(state: &mut StateVector, angle: f64) {
    let n = state.n_qubits();
    let dim = state.dim();
    let diag: Vec<Complex64> = (0..dim)
        .map(|k| {
            let zsum = n as f64 - 2.0 * (k.count_ones() as f64);
            Complex64::from_polar(1.0, -angle * zsum)
        })
        .collect();
    state.apply_diag(&diag);
}

/// One step of a stroboscopic schedule.
#[derive(Debug, Clone)]
pub enum Step {
    /// One interaction block; `duration_frac` scales the block time for
    /// noise purposes (0.5 for a half-phase block).
    IsingBlock {
        phases: PhaseVector,
        axis_phase: f64,
        duration_frac: f64,
    },
    GlobalRotation { angle: f64, axis_phase: f64 },
    ZField { angle: f64 },
}

/// Ordered steps plus the step boundaries to snapshot (0 = initial state).
#[derive(Debug, Clone)]
pub struct TrotterSchedule {
    pub steps: Vec<Step>,
    pub record_points: Vec<usize>,
}

/// Dephasing model: coherence time and the wall-clock length of one block.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    /// T₂ in seconds; `f64::INFINITY` disables dephasing.
    pub t2: f64,
    /// Duration of a full interaction block, seconds.
    pub block_duration: f64,
    /// Base seed; every (record point, shot) derives its own substream.
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            t2: f64::INFINITY,
            block_duration: 0.0,
            seed,
        }
    }

    /// Independent substream for the `index`-th sub-experiment of a run
    /// (e.g. one fringe phase or one sweep point).
    pub fn derived(&self, index: u64) -> Self {
        Self {
            seed: self
                .seed
                .wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.t2 > 0.0) {
            return Err(SimError::InvalidNoise(format!(
                "t2 must be positive, got {}",
                self.t2
            )));
        }
        if self.t2.is_finite() && !(self.block_duration > 0.0) {
            return Err(SimError::InvalidNoise(format!(
                "finite t2 requires a positive block duration, got {}",
                self.block_duration
            )));
        }
        Ok(())
    }

    fn is_noisy(&self) -> bool {
        self.t2.is_finite()
    }
}

/// Measurement histogram for one record point.
#[derive(Debug, Clone)]
pub struct ShotCounts {
    pub n_qubits: usize,
    /// Basis index → count; keys are ordered for deterministic output.
    pub counts: BTreeMap<usize, u64>,
    pub total: u64,
    pub seed: u64,
}

impl ShotCounts {
    pub fn bitstring(&self, k: usize) -> String {
        StateVector::bitstring(self.n_qubits, k)
    }
}

/// One snapshot: sampled counts plus the exact noise-free state.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Step boundary index (0 = before the first step).
    pub index: usize,
    pub counts: ShotCounts,
    pub exact: StateVector,
}

enum CompiledStep {
    Block {
        diag: Vec<Complex64>,
        axis_phase: f64,
        duration_frac: f64,
    },
    Rotation { angle: f64, axis_phase: f64 },
    Z { angle: f64 },
}

fn compile_steps(
    schedule: &TrotterSchedule,
    modes: &ModeDecomposition,
    use_effective: bool,
    n_qubits: usize,
) -> Result<Vec<CompiledStep>, SimError> {
    schedule
        .steps
        .iter()
        .map(|step| match step {
            Step::IsingBlock {
                phases,
                axis_phase,
                duration_frac,
            } => {
                if phases.len() != n_qubits || modes.n_ions() != n_qubits {
                    return Err(SimError::DimensionMismatch(format!(
                        "{} phases, {} modes, {} qubits",
                        phases.len(),
                        modes.n_ions(),
                        n_qubits
                    )));
                }
                let diag = ising_phases(phases, modes, use_effective)
                    .into_iter()
                    .map(|p| Complex64::from_polar(1.0, p))
                    .collect();
                Ok(CompiledStep::Block {
                    diag,
                    axis_phase: *axis_phase,
                    duration_frac: *duration_frac,
                })
            }
            Step::GlobalRotation { angle, axis_phase } => Ok(CompiledStep::Rotation {
                angle: *angle,
                axis_phase: *axis_phase,
            }),
            Step::ZField { angle } => Ok(CompiledStep::Z { angle: *angle }),
        })
        .collect()
}

fn apply_compiled(state: &mut StateVector, step: &CompiledStep) {
    match step {
        CompiledStep::Block {
            diag, axis_phase, ..
        } => {
            let (w, w_dag) = phi_basis_gate(*axis_phase);
            for q in 0..state.n_qubits() {
                state.apply_one_qubit(q, w_dag);
            }
            state.apply_diag(diag);
            for q in 0..state.n_qubits() {
                state.apply_one_qubit(q, w);
            }
        }
        CompiledStep::Rotation { angle, axis_phase } => {
            apply_global_rotation(state, *angle, *axis_phase);
        }
        CompiledStep::Z { angle } => apply_z_field(state, *angle),
    }
}

/// Run one schedule: exact states at every record point plus sampled
/// measurement histograms.
///
/// Each record point is an independent experiment (the register is measured
/// destructively), so every (record point, shot) pair evolves its own noisy
/// state from `initial` on substream `(record_index << 32) | shot`. Shots
/// may be evaluated in parallel; the merge is a commutative count sum, so
/// results do not depend on thread count.
pub fn run_schedule(
    initial: &StateVector,
    schedule: &TrotterSchedule,
    modes: &ModeDecomposition,
    use_effective: bool,
    noise: &NoiseModel,
    shots: u64,
) -> Result<Vec<Snapshot>, SimError> {
    noise.validate()?;
    if schedule.steps.is_empty() {
        return Err(SimError::EmptySchedule);
    }
    if schedule.record_points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::UnorderedRecordPoints);
    }
    if let Some(&p) = schedule
        .record_points
        .iter()
        .find(|&&p| p > schedule.steps.len())
    {
        return Err(SimError::RecordPointOutOfRange {
            point: p,
            max: schedule.steps.len(),
        });
    }
    if noise.is_noisy() && shots == 0 {
        return Err(SimError::ShotsRequired);
    }

    let compiled = compile_steps(schedule, modes, use_effective, initial.n_qubits())?;

    // Exact (noise-free) states at each record point.
    let mut exact_states = Vec::with_capacity(schedule.record_points.len());
    {
        let mut state = initial.clone();
        let mut next = schedule.record_points.iter().peekable();
        if next.peek() == Some(&&0) {
            exact_states.push(state.clone());
            next.next();
        }
        for (i, step) in compiled.iter().enumerate() {
            apply_compiled(&mut state, step);
            if next.peek() == Some(&&(i + 1)) {
                exact_states.push(state.clone());
                next.next();
            }
        }
    }

    let dim = initial.dim();
    let snapshots = schedule
        .record_points
        .iter()
        .zip(exact_states)
        .enumerate()
        .map(|(ri, (&point, exact))| {
            let histogram: Vec<u64> = (0..shots)
                .into_par_iter()
                .fold(
                    || vec![0u64; dim],
                    |mut acc, shot| {
                        let k = sample_one(
                            initial,
                            &compiled[..point],
                            noise,
                            ((ri as u64) << 32) | shot,
                        );
                        acc[k] += 1;
                        acc
                    },
                )
                .reduce(
                    || vec![0u64; dim],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                        a
                    },
                );
            let counts: BTreeMap<usize, u64> = histogram
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .collect();
            Snapshot {
                index: point,
                counts: ShotCounts {
                    n_qubits: initial.n_qubits(),
                    counts,
                    total: shots,
                    seed: noise.seed,
                },
                exact,
            }
        })
        .collect();

    Ok(snapshots)
}

/// Evolve one noisy shot up to `steps` and measure once.
fn sample_one(
    initial: &StateVector,
    steps: &[CompiledStep],
    noise: &NoiseModel,
    stream: u64,
) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(stream);
    let mut state = initial.clone();
    for step in steps {
        apply_compiled(&mut state, step);
        if let CompiledStep::Block { duration_frac, .. } = step {
            if noise.is_noisy() {
                let std = (2.0 * duration_frac * noise.block_duration / noise.t2).sqrt();
                let normal = Normal::new(0.0, std).expect("valid std");
                for q in 0..state.n_qubits() {
                    let kick = normal.sample(&mut rng);
                    state.apply_z_kick(q, kick);
                }
            }
        }
    }
    // Inverse-CDF draw from |amp|^2.
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, a) in state.amps().iter().enumerate() {
        acc += a.norm_sqr();
        if u < acc {
            return k;
        }
    }
    state.dim() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::SR88_MASS;
    use crate::crystal::{chain_modes, TrapConfig};

    const TAU: f64 = std::f64::consts::TAU;

    fn modes(n: usize) -> ModeDecomposition {
        let cfg = TrapConfig::new(n, TAU * 1.0e6, SR88_MASS, 9.3e6).unwrap();
        chain_modes(&cfg).unwrap().1
    }

    #[test]
    fn ground_state_layout() {
        let s = StateVector::ground(3).unwrap();
        assert_eq!(s.dim(), 8);
        assert_eq!(s.probability(0), 1.0);
        assert_eq!(StateVector::bitstring(3, 0b110), "110");
        // Qubit 0 is the most significant bit.
        assert_eq!(StateVector::z_value(3, 0b100, 0), -1.0);
        assert_eq!(StateVector::z_value(3, 0b100, 2), 1.0);
    }

    #[test]
    fn zero_phases_is_identity() {
        let m = modes(3);
        let mut s = StateVector::ground(3).unwrap();
        apply_global_rotation(&mut s, 0.7, 0.3);
        let before = s.clone();
        apply_ising_block(&mut s, &PhaseVector(vec![0.0; 3]), &m, false, 0.4).unwrap();
        assert!(s.fidelity(&before) > 1.0 - 1e-12);
    }

    #[test]
    fn stretch_block_makes_bell_state() {
        // Phi_2 = -pi/4 on two ions: exp(i pi/4 sx sx)|00> up to global phase.
        let m = modes(2);
        let mut s = StateVector::ground(2).unwrap();
        apply_ising_block(
            &mut s,
            &PhaseVector(vec![0.0, -std::f64::consts::FRAC_PI_4]),
            &m,
            false,
            0.0,
        )
        .unwrap();
        let p = s.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!(p[1] < 1e-12 && p[2] < 1e-12);
        assert!((p[3] - 0.5).abs() < 1e-12);
        // Relative phase i between |00> and |11>.
        let rel = s.amps()[3] / s.amps()[0];
        assert!((rel - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn rotation_basics() {
        let mut s = StateVector::ground(4).unwrap();
        let before = s.clone();
        apply_global_rotation(&mut s, 0.0, 0.0);
        assert!(s.fidelity(&before) > 1.0 - 1e-12);

        // 2*pi rotation: probabilities untouched (spinor sign is global).
        let mut s = StateVector::ground(3).unwrap();
        apply_global_rotation(&mut s, 2.0 * std::f64::consts::PI, 0.4);
        let p = s.probabilities();
        assert!((p[0] - 1.0).abs() < 1e-12);

        // pi/2 rotation from the ground state: uniform probabilities.
        for n in [1usize, 3, 5] {
            let mut s = StateVector::ground(n).unwrap();
            apply_global_rotation(&mut s, std::f64::consts::FRAC_PI_2, 0.0);
            let want = 1.0 / (1 << n) as f64;
            for p in s.probabilities() {
                assert!((p - want).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn z_field_is_diagonal() {
        use rand::Rng;
        let mut s = StateVector::ground(4).unwrap();
        apply_z_field(&mut s, 0.0);
        assert!((s.probability(0) - 1.0).abs() < 1e-12);

        apply_z_field(&mut s, 0.93);
        assert!((s.probability(0) - 1.0).abs() < 1e-12);

        // Populations (hence excitation-subspace groupings) of any state
        // are invariant under z rotations.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let mut s = StateVector::ground(3).unwrap();
            apply_global_rotation(
                &mut s,
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
            );
            apply_ising_block(
                &mut s,
                &PhaseVector((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()),
                &modes(3),
                false,
                rng.random_range(0.0..TAU),
            )
            .unwrap();
            let p_before = s.probabilities();
            apply_z_field(&mut s, rng.random_range(0.0..TAU));
            let p_after = s.probabilities();
            for (a, b) in p_before.iter().zip(&p_after) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norm_preserved_through_random_schedule() {
        use rand::Rng;
        let m = modes(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = StateVector::ground(4).unwrap();
        for _ in 0..40 {
            match rng.random_range(0..3) {
                0 => {
                    let phases =
                        PhaseVector((0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
                    apply_ising_block(&mut s, &phases, &m, false, rng.random_range(0.0..TAU))
                        .unwrap();
                }
                1 => apply_global_rotation(
                    &mut s,
                    rng.random_range(0.0..TAU),
                    rng.random_range(0.0..TAU),
                ),
                _ => apply_z_field(&mut s, rng.random_range(0.0..TAU)),
            }
            assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn parity_sectors_never_mix_without_rotations() {
        use rand::Rng;
        let m = modes(4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut steps = Vec::new();
            for _ in 0..rng.random_range(1..6) {
                if rng.random_range(0..2) == 0 {
                    steps.push(Step::IsingBlock {
                        phases: PhaseVector(
                            (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                        ),
                        axis_phase: rng.random_range(0.0..TAU),
                        duration_frac: 1.0,
                    });
                } else {
                    steps.push(Step::ZField {
                        angle: rng.random_range(0.0..TAU),
                    });
                }
            }
            let n_steps = steps.len();
            let schedule = TrotterSchedule {
                steps,
                record_points: vec![n_steps],
            };
            let snaps = run_schedule(
                &StateVector::ground(4).unwrap(),
                &schedule,
                &m,
                false,
                &NoiseModel::noiseless(1),
                0,
            )
            .unwrap();
            for (k, p) in snaps[0].exact.probabilities().iter().enumerate() {
                if k.count_ones() % 2 == 1 {
                    assert!(*p < 1e-10, "odd state {k} populated: {p}");
                }
            }
        }
    }

    #[test]
    fn schedule_validation_errors() {
        let m = modes(2);
        let ground = StateVector::ground(2).unwrap();
        let noise = NoiseModel::noiseless(0);
        let empty = TrotterSchedule {
            steps: vec![],
            record_points: vec![0],
        };
        assert!(matches!(
            run_schedule(&ground, &empty, &m, false, &noise, 1),
            Err(SimError::EmptySchedule)
        ));

        let sched = TrotterSchedule {
            steps: vec![Step::ZField { angle: 0.1 }],
            record_points: vec![2],
        };
        assert!(matches!(
            run_schedule(&ground, &sched, &m, false, &noise, 1),
            Err(SimError::RecordPointOutOfRange { .. })
        ));

        let sched = TrotterSchedule {
            steps: vec![Step::ZField { angle: 0.1 }],
            record_points: vec![1, 1],
        };
        assert!(matches!(
            run_schedule(&ground, &sched, &m, false, &noise, 1),
            Err(SimError::UnorderedRecordPoints)
        ));

        let noisy = NoiseModel {
            t2: 1.0,
            block_duration: 1e-4,
            seed: 0,
        };
        let sched = TrotterSchedule {
            steps: vec![Step::ZField { angle: 0.1 }],
            record_points: vec![1],
        };
        assert!(matches!(
            run_schedule(&ground, &sched, &m, false, &noisy, 0),
            Err(SimError::ShotsRequired)
        ));
    }

    #[test]
    fn identity_schedule_counts_concentrate_on_ground() {
        let m = modes(3);
        let schedule = TrotterSchedule {
            steps: vec![Step::IsingBlock {
                phases: PhaseVector(vec![0.0; 3]),
                axis_phase: 0.0,
                duration_frac: 1.0,
            }],
            record_points: vec![1],
        };
        let snaps = run_schedule(
            &StateVector::ground(3).unwrap(),
            &schedule,
            &m,
            false,
            &NoiseModel::noiseless(5),
            400,
        )
        .unwrap();
        assert_eq!(snaps[0].counts.total, 400);
        assert_eq!(snaps[0].counts.counts.get(&0), Some(&400));
    }

    #[test]
    fn seeded_runs_reproduce_across_thread_counts() {
        let m = modes(4);
        let schedule = TrotterSchedule {
            steps: vec![
                Step::IsingBlock {
                    phases: PhaseVector(vec![0.0, 0.4, -0.7, -1.1]),
                    axis_phase: 0.0,
                    duration_frac: 1.0,
                },
                Step::GlobalRotation {
                    angle: std::f64::consts::FRAC_PI_2,
                    axis_phase: 0.3,
                },
            ],
            record_points: vec![1, 2],
        };
        let noise = NoiseModel {
            t2: 5e-3,
            block_duration: 1.333e-4,
            seed: 42,
        };
        let ground = StateVector::ground(4).unwrap();
        let run = || run_schedule(&ground, &schedule, &m, false, &noise, 300).unwrap();
        let a = run();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        for (sa, sb) in a.iter().zip(&single) {
            assert_eq!(sa.counts.counts, sb.counts.counts);
        }
    }

    #[test]
    fn dephasing_decays_single_qubit_coherence_at_t2_rate() {
        // Prepare |+> on one qubit, dephase over n blocks, measure <sigma_x>
        // via the closing rotation. Expect exp(-t/T2).
        let m = modes(2);
        let t_block = 1.0e-4;
        let t2 = 8.0e-4;
        let n_blocks = 4;
        let mut steps = vec![Step::GlobalRotation {
            angle: std::f64::consts::FRAC_PI_2,
            axis_phase: std::f64::consts::FRAC_PI_2,
        }];
        for _ in 0..n_blocks {
            steps.push(Step::IsingBlock {
                phases: PhaseVector(vec![0.0, 0.0]),
                axis_phase: 0.0,
                duration_frac: 1.0,
            });
        }
        steps.push(Step::GlobalRotation {
            angle: -std::f64::consts::FRAC_PI_2,
            axis_phase: std::f64::consts::FRAC_PI_2,
        });
        let len = steps.len();
        let schedule = TrotterSchedule {
            steps,
            record_points: vec![len],
        };
        let noise = NoiseModel {
            t2,
            block_duration: t_block,
            seed: 7,
        };
        let shots = 40_000;
        let snaps = run_schedule(
            &StateVector::ground(2).unwrap(),
            &schedule,
            &m,
            false,
            &noise,
            shots,
        )
        .unwrap();
        // <sigma_x> of qubit 0 equals <sigma_z> after the closing rotation.
        let mut acc = 0.0;
        for (&k, &c) in &snaps[0].counts.counts {
            acc += StateVector::z_value(2, k, 0) * c as f64;
        }
        let measured = acc / shots as f64;
        let expect = (-(n_blocks as f64) * t_block / t2).exp();
        assert!(
            (measured - expect).abs() < 0.02,
            "<sx> = {measured}, expected {expect}"
        );
    }
}
