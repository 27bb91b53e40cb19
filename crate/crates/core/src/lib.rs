//! Compilation of target Ising couplings into global-drive parameters for a
//! trapped-ion chain, plus exact stroboscopic spin simulation and the
//! fringe-based reconstruction analysis that benchmarks the result.
//!
//! The pipeline runs in five stages, one module each:
//!
//! - [`crystal`]: equilibrium geometry and axial normal modes of the chain.
//! - [`compiler`]: target coupling matrix ↔ mode entanglement phases, with
//!   center-of-mass gauge fixing and per-mode drive amplitudes.
//! - [`drive`]: explicit tone tables for one interaction block, phase-ramp
//!   schedules, and analytic loop-closure verification.
//! - [`sim`]: dense state-vector simulation of the stroboscopic evolution
//!   with dephasing noise and deterministic shot sampling.
//! - [`analysis`]: excitation-subspace grouping, parity fringes, coupling
//!   reconstruction, and the transverse-field excitation estimate.
//!
//! [`config`] parses the flat key/value experiment files and [`experiments`]
//! wires the stages into the named figure-level recipes, rendering their
//! data files as deterministic text.

pub mod analysis;
pub mod compiler;
pub mod config;
pub mod constants;
pub mod crystal;
pub mod drive;
pub mod experiments;
pub mod sim;
pub mod textfmt;

pub use config::ExperimentConfig;
pub use compiler::{CompileReport, CouplingMatrix, DriveAmplitudes, PhaseVector};
pub use crystal::{ModeDecomposition, TrapConfig};
pub use drive::{Tone, ToneTable};
pub use sim::{NoiseModel, ShotCounts, StateVector, Step, TrotterSchedule};
