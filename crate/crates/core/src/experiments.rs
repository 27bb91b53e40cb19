//! Config-driven experiment recipes and their rendered data files.
//!
//! Each runner takes a parsed [`ExperimentConfig`], executes one pipeline
//! stage end to end, and returns structured results plus the data files as
//! rendered text. Identical configs produce byte-identical files: all
//! floats go through the canonical 17-digit formatter, map iteration is
//! ordered, and shot sampling is seed-deterministic.
//!
//! Figure recipes resolve their own defaults for the optional config
//! fields: `dynamics`/`es2` run 10 blocks with half-block snapshots,
//! `parity` runs 3 blocks, `transverse` runs 2 blocks around one z-field
//! step. The default ring drive scale is 0.05 per-block nearest-neighbor
//! phase (0.008 for `transverse`, where the off-resonance estimate is only
//! valid at weak excitation); the run manifest always records the resolved
//! values.

use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::{
    effective_coupling, exact_es_populations, excitation_estimate, fit_parity_fringe,
    group_by_excitation, parity_experiment, postselect_even, reconstruct_matrix, AnalysisError,
    FringeFit,
};
use crate::compiler::{
    amplitudes_from_phases, forward_map, overlap_f, phases_from_target, CompileError,
    CompileReport, CouplingMatrix, DriveAmplitudes,
};
use crate::config::{ConfigError, ExperimentConfig, TargetSpec};
use crate::crystal::{chain_modes, CrystalError, ModeDecomposition};
use crate::drive::{build_tone_table, render_tone_table, verify_loop_closure, DriveError, ToneTable};
use crate::sim::{run_schedule, NoiseModel, SimError, Snapshot, StateVector, Step, TrotterSchedule};
use crate::textfmt::{sci, sci_row};

/// Default per-block nearest-neighbor phase of the ring recipes.
pub const DEFAULT_RING_SCALE: f64 = 0.05;
/// Weaker default for the transverse sweep (estimate valid at weak drive).
pub const DEFAULT_TRANSVERSE_SCALE: f64 = 0.008;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Crystal(#[from] CrystalError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Drive(#[from] DriveError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("unknown figure {0:?}; expected dynamics, es2, parity, or transverse")]
    UnknownFigure(String),
}

impl ExperimentError {
    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            ExperimentError::Config(_) => ErrorKind::Config,
            ExperimentError::UnknownFigure(_) => ErrorKind::Config,
            ExperimentError::Compile(CompileError::ZeroTarget) => ErrorKind::Unrealizable,
            // An empty schedule can only come from a zero-block request.
            ExperimentError::Sim(SimError::EmptySchedule) => ErrorKind::Config,
            ExperimentError::Crystal(CrystalError::NoConvergence { .. }) => {
                ErrorKind::NonConvergence
            }
            _ => ErrorKind::Internal,
        }
    }
}

/// Error categories, mirrored in the CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Unrealizable,
    NonConvergence,
    Internal,
}

/// One rendered output file.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub content: String,
}

/// Named figure recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Dynamics,
    Es2,
    Parity,
    Transverse,
}

impl FigureKind {
    pub fn parse(name: &str) -> Result<Self, ExperimentError> {
        match name {
            "dynamics" => Ok(Self::Dynamics),
            "es2" => Ok(Self::Es2),
            "parity" => Ok(Self::Parity),
            "transverse" => Ok(Self::Transverse),
            other => Err(ExperimentError::UnknownFigure(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Dynamics => "dynamics",
            Self::Es2 => "es2",
            Self::Parity => "parity",
            Self::Transverse => "transverse",
        }
    }

    fn default_blocks(&self) -> usize {
        match self {
            Self::Dynamics | Self::Es2 => 10,
            Self::Parity => 3,
            Self::Transverse => 2,
        }
    }

    fn default_half_steps(&self) -> bool {
        matches!(self, Self::Dynamics | Self::Es2)
    }

    fn default_scale(&self) -> f64 {
        match self {
            Self::Transverse => DEFAULT_TRANSVERSE_SCALE,
            _ => DEFAULT_RING_SCALE,
        }
    }
}

/// Mode-report output.
#[derive(Debug, Clone)]
pub struct ModesOutput {
    pub n_ions: usize,
    pub positions: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub lamb_dicke: Vec<f64>,
    pub mode_matrix: Vec<Vec<f64>>,
    pub files: Vec<DataFile>,
}

/// Compile output: report plus drive program.
#[derive(Debug, Clone)]
pub struct CompileOutput {
    pub phases: Vec<f64>,
    pub residual: f64,
    pub overlap_f: f64,
    /// Overlap at or above `compile.min_overlap`.
    pub realizable: bool,
    pub tone_count: usize,
    pub max_displacement: f64,
    pub files: Vec<DataFile>,
}

/// Figure output: metric summary plus data files.
#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub figure: &'static str,
    pub metrics: Vec<(String, f64)>,
    pub files: Vec<DataFile>,
}

fn target_matrix(cfg: &ExperimentConfig, scale: f64) -> Result<CouplingMatrix, CompileError> {
    match &cfg.target {
        TargetSpec::RingAntiperiodic => CouplingMatrix::ring_antiperiodic(cfg.trap_n_ions, scale),
        TargetSpec::Matrix(rows) => {
            let n = rows.len();
            let mut m = nalgebra::DMatrix::zeros(n, n);
            for (i, row) in rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            CouplingMatrix::new(m * scale)
        }
    }
}

fn noise_model(cfg: &ExperimentConfig) -> NoiseModel {
    NoiseModel {
        t2: cfg.t2_s,
        block_duration: 1.0 / cfg.xi_hz,
        seed: cfg.seed,
    }
}

fn manifest(cfg: &ExperimentConfig, command: &str) -> DataFile {
    let mut text = String::new();
    let _ = writeln!(text, "# run manifest: re-run with `iondrive {command} --config <this file>`");
    let _ = writeln!(text, "# generator version {}", env!("CARGO_PKG_VERSION"));
    text.push_str(&cfg.canonical_text());
    DataFile {
        name: "manifest.txt".to_string(),
        content: text,
    }
}

/// Compute and render the chain geometry and normal modes.
pub fn run_modes(cfg: &ExperimentConfig) -> Result<ModesOutput, ExperimentError> {
    cfg.validate()?;
    let trap = cfg.to_trap_config()?;
    let (positions, modes) = chain_modes(&trap)?;
    let n = trap.n_ions;

    let mut text = String::new();
    let _ = writeln!(text, "# chain modes: equilibrium positions (dimensionless),");
    let _ = writeln!(text, "# mode frequencies (Hz), Lamb-Dicke parameters, and the");
    let _ = writeln!(text, "# orthonormal mode matrix (row j = mode j, tab separated).");
    let _ = writeln!(text, "n_ions={n}");
    for (i, u) in positions.iter().enumerate() {
        let _ = writeln!(text, "position[{i}]={}", sci(*u));
    }
    let freqs_hz: Vec<f64> = modes
        .freqs
        .iter()
        .map(|f| f / std::f64::consts::TAU)
        .collect();
    for (j, f) in freqs_hz.iter().enumerate() {
        let _ = writeln!(text, "freq_hz[{j}]={}", sci(*f));
    }
    for (j, eta) in modes.lamb_dicke.iter().enumerate() {
        let _ = writeln!(text, "lamb_dicke[{j}]={}", sci(*eta));
    }
    let mut matrix_rows = Vec::with_capacity(n);
    for j in 0..n {
        let row: Vec<f64> = (0..n).map(|k| modes.mode_matrix[(j, k)]).collect();
        let _ = writeln!(text, "mode_row[{j}]={}", sci_row(&row));
        matrix_rows.push(row);
    }
    if cfg.trap_beam_weights.is_some() {
        for j in 0..n {
            let row: Vec<f64> = (0..n).map(|k| modes.effective_matrix[(j, k)]).collect();
            let _ = writeln!(text, "effective_row[{j}]={}", sci_row(&row));
        }
    }

    Ok(ModesOutput {
        n_ions: n,
        positions,
        freqs_hz,
        lamb_dicke: modes.lamb_dicke.clone(),
        mode_matrix: matrix_rows,
        files: vec![
            DataFile {
                name: "modes.txt".to_string(),
                content: text,
            },
            manifest(cfg, "modes"),
        ],
    })
}

struct CompiledRing {
    modes: ModeDecomposition,
    report: CompileReport,
    expected: CouplingMatrix,
}

fn compile_target(cfg: &ExperimentConfig, scale: f64) -> Result<CompiledRing, ExperimentError> {
    let trap = cfg.to_trap_config()?;
    let (_, modes) = chain_modes(&trap)?;
    let target = target_matrix(cfg, scale)?;
    let report = phases_from_target(&target, &modes, cfg.compile_use_effective)?;
    let expected = forward_map(&report.phases, &modes, cfg.compile_use_effective)?;
    Ok(CompiledRing {
        modes,
        report,
        expected,
    })
}

/// Resolve the drive scale: explicit value, else 1 for explicit matrices
/// (they already carry their own units), else the recipe default.
fn resolve_scale(cfg: &ExperimentConfig, recipe_default: f64) -> f64 {
    cfg.target_scale.unwrap_or(match cfg.target {
        TargetSpec::Matrix(_) => 1.0,
        TargetSpec::RingAntiperiodic => recipe_default,
    })
}

/// Compile the target into phases, drive amplitudes, and a tone table.
pub fn run_compile(cfg: &ExperimentConfig) -> Result<CompileOutput, ExperimentError> {
    cfg.validate()?;
    let scale = resolve_scale(cfg, DEFAULT_RING_SCALE);
    let compiled = compile_target(cfg, scale)?;
    let report = &compiled.report;

    let amps: DriveAmplitudes = amplitudes_from_phases(
        &report.phases,
        &compiled.modes,
        cfg.xi(),
        std::f64::consts::TAU * cfg.rabi_hz,
        cfg.kappa,
    )?;
    let table: ToneTable = build_tone_table(
        &amps,
        &compiled.modes,
        cfg.xi(),
        std::f64::consts::TAU * cfg.carrier_hz,
        0.0,
    )?;
    let closures = verify_loop_closure(&table, &compiled.modes)?;
    let max_displacement = closures
        .iter()
        .map(|c| c.displacement_abs)
        .fold(0.0, f64::max);

    let mut text = String::new();
    let _ = writeln!(text, "# compile report: gauge-shifted mode phases, residual,");
    let _ = writeln!(text, "# and overlap with the requested target.");
    let _ = writeln!(text, "phases={}", sci_row(report.phases.as_slice()));
    let _ = writeln!(text, "residual={}", sci(report.residual));
    let _ = writeln!(text, "overlap_f={}", sci(report.overlap_f));

    let realizable = report.overlap_f >= cfg.compile_min_overlap;
    Ok(CompileOutput {
        phases: report.phases.as_slice().to_vec(),
        residual: report.residual,
        overlap_f: report.overlap_f,
        realizable,
        tone_count: table.tones.len(),
        max_displacement,
        files: vec![
            DataFile {
                name: "compile_report.txt".to_string(),
                content: text,
            },
            DataFile {
                name: "tone_table.txt".to_string(),
                content: render_tone_table(&table),
            },
            manifest(cfg, "compile"),
        ],
    })
}

/// Run one figure recipe.
pub fn run_figure(cfg: &ExperimentConfig, kind: FigureKind) -> Result<FigureOutput, ExperimentError> {
    cfg.validate()?;
    let mut resolved = cfg.clone();
    resolved.target_scale = Some(resolve_scale(cfg, kind.default_scale()));
    resolved.blocks = Some(cfg.blocks.unwrap_or_else(|| kind.default_blocks()));
    resolved.half_steps = Some(cfg.half_steps.unwrap_or_else(|| kind.default_half_steps()));

    match kind {
        FigureKind::Dynamics => figure_dynamics(&resolved, false),
        FigureKind::Es2 => figure_dynamics(&resolved, true),
        FigureKind::Parity => figure_parity(&resolved),
        FigureKind::Transverse => figure_transverse(&resolved),
    }
}

/// Stroboscopic snapshot schedule shared by `dynamics` and `es2`.
fn dynamics_snapshots(
    cfg: &ExperimentConfig,
) -> Result<(Vec<Snapshot>, Vec<f64>), ExperimentError> {
    let blocks = cfg.blocks.expect("resolved");
    let half = cfg.half_steps.expect("resolved");
    let compiled = compile_target(cfg, cfg.target_scale.expect("resolved"))?;

    let (steps, times): (Vec<Step>, Vec<f64>) = if half {
        let steps = (0..2 * blocks)
            .map(|_| Step::IsingBlock {
                phases: compiled.report.phases.scaled(0.5),
                axis_phase: 0.0,
                duration_frac: 0.5,
            })
            .collect();
        let times = (0..=2 * blocks).map(|i| i as f64 * 0.5).collect();
        (steps, times)
    } else {
        let steps = (0..blocks)
            .map(|_| Step::IsingBlock {
                phases: compiled.report.phases.clone(),
                axis_phase: 0.0,
                duration_frac: 1.0,
            })
            .collect();
        let times = (0..=blocks).map(|i| i as f64).collect();
        (steps, times)
    };

    let record_points: Vec<usize> = (0..=steps.len()).collect();
    let schedule = TrotterSchedule {
        steps,
        record_points,
    };
    let snaps = run_schedule(
        &StateVector::ground(cfg.trap_n_ions)?,
        &schedule,
        &compiled.modes,
        cfg.compile_use_effective,
        &noise_model(cfg),
        cfg.shots,
    )?;
    Ok((snaps, times))
}

fn render_snapshots(cfg: &ExperimentConfig, snaps: &[Snapshot], times: &[f64]) -> DataFile {
    let dim = 1usize << cfg.trap_n_ions;
    let mut text = String::new();
    let _ = writeln!(text, "# stroboscopic snapshots, one record per basis state and time");
    let _ = writeln!(
        text,
        "# columns: time_index\tbitstring\tcount\texact_probability \
         (time_index in blocks; half-integers when half_steps)"
    );
    let _ = writeln!(text, "seed={}", cfg.seed);
    let _ = writeln!(text, "shots={}", cfg.shots);
    for (snap, t) in snaps.iter().zip(times) {
        let probs = snap.exact.probabilities();
        for k in 0..dim {
            let count = snap.counts.counts.get(&k).copied().unwrap_or(0);
            let _ = writeln!(
                text,
                "{}\t{}\t{}\t{}",
                sci(*t),
                StateVector::bitstring(cfg.trap_n_ions, k),
                count,
                sci(probs[k])
            );
        }
    }
    DataFile {
        name: "snapshots.tsv".to_string(),
        content: text,
    }
}

fn figure_dynamics(cfg: &ExperimentConfig, es2: bool) -> Result<FigureOutput, ExperimentError> {
    let (snaps, times) = dynamics_snapshots(cfg)?;
    let n = cfg.trap_n_ions;
    let mut files = vec![render_snapshots(cfg, &snaps, &times)];
    let mut metrics = Vec::new();

    if !es2 {
        let mut text = String::new();
        let _ = writeln!(text, "# excitation-subspace populations per snapshot");
        let mut header = "# columns: time_blocks".to_string();
        for k in 0..=n {
            let _ = write!(header, "\tes{k}");
        }
        for k in 0..=n {
            let _ = write!(header, "\texact_es{k}");
        }
        let _ = writeln!(text, "{header}");
        let _ = writeln!(text, "seed={}", cfg.seed);
        for (snap, t) in snaps.iter().zip(&times) {
            let sampled = if snap.counts.total > 0 {
                group_by_excitation(&snap.counts)?.populations
            } else {
                vec![0.0; n + 1]
            };
            let exact = exact_es_populations(&snap.exact);
            let mut row = vec![*t];
            row.extend(sampled);
            row.extend(exact);
            let _ = writeln!(text, "{}", sci_row(&row));
        }
        files.push(DataFile {
            name: "es_populations.tsv".to_string(),
            content: text,
        });

        // Odd-subspace ceiling over the whole run (exact states).
        let max_odd = snaps
            .iter()
            .flat_map(|s| {
                exact_es_populations(&s.exact)
                    .into_iter()
                    .enumerate()
                    .filter(|(k, _)| k % 2 == 1)
                    .map(|(_, p)| p)
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        metrics.push(("max_exact_odd_population".to_string(), max_odd));
    } else {
        // Post-selected populations of every two-excitation basis state.
        let states: Vec<usize> = (0..(1usize << n))
            .filter(|k| k.count_ones() == 2)
            .collect();
        let mut text = String::new();
        let _ = writeln!(
            text,
            "# post-selected populations of the two-excitation basis states"
        );
        let mut header = "# columns: time_blocks".to_string();
        for &k in &states {
            let _ = write!(header, "\tp_{}", StateVector::bitstring(n, k));
        }
        for &k in &states {
            let _ = write!(header, "\texact_p_{}", StateVector::bitstring(n, k));
        }
        let _ = writeln!(text, "{header}");
        let _ = writeln!(text, "seed={}", cfg.seed);
        for (snap, t) in snaps.iter().zip(&times) {
            let mut row = vec![*t];
            if snap.counts.total > 0 {
                let kept = postselect_even(&snap.counts)?;
                for &k in &states {
                    let c = kept.counts.get(&k).copied().unwrap_or(0);
                    row.push(c as f64 / kept.total as f64);
                }
            } else {
                row.extend(std::iter::repeat_n(0.0, states.len()));
            }
            let probs = snap.exact.probabilities();
            let even_norm: f64 = probs
                .iter()
                .enumerate()
                .filter(|(k, _)| k.count_ones() % 2 == 0)
                .map(|(_, p)| p)
                .sum();
            for &k in &states {
                row.push(probs[k] / even_norm);
            }
            let _ = writeln!(text, "{}", sci_row(&row));
        }
        files.push(DataFile {
            name: "es2_populations.tsv".to_string(),
            content: text,
        });

        // Nearest-neighbor dominance at the end of the run (exact).
        let last = snaps.last().expect("at least one snapshot");
        let probs = last.exact.probabilities();
        let nn_states = [0b1100usize, 0b0110, 0b0011, 0b1001];
        let nnn_states = [0b1010usize, 0b0101];
        if n == 4 {
            let nn: f64 = nn_states.iter().map(|&k| probs[k]).sum();
            let nnn: f64 = nnn_states.iter().map(|&k| probs[k]).sum();
            metrics.push(("final_nn_population".to_string(), nn));
            metrics.push(("final_nnn_population".to_string(), nnn));
        }
    }

    files.push(manifest(cfg, &format!("figure {}", if es2 { "es2" } else { "dynamics" })));
    Ok(FigureOutput {
        figure: if es2 { "es2" } else { "dynamics" },
        metrics,
        files,
    })
}

fn phi_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| i as f64 * std::f64::consts::PI / points as f64)
        .collect()
}

fn figure_parity(cfg: &ExperimentConfig) -> Result<FigureOutput, ExperimentError> {
    let compiled = compile_target(cfg, cfg.target_scale.expect("resolved"))?;
    let blocks = cfg.blocks.expect("resolved");
    let grid = phi_grid(cfg.phi_points);
    let scan = parity_experiment(
        &compiled.report.phases,
        blocks,
        &compiled.modes,
        cfg.compile_use_effective,
        &grid,
        cfg.shots,
        &noise_model(cfg),
    )?;

    let fits: Vec<FringeFit> = scan
        .pairs
        .iter()
        .enumerate()
        .map(|(p, &pair)| {
            let col: Vec<f64> = scan.sampled.iter().map(|row| row[p]).collect();
            let ts: Vec<f64> = scan.two_sigma.iter().map(|row| row[p]).collect();
            fit_parity_fringe(pair, &scan.phi, &col, Some(&ts))
        })
        .collect::<Result<_, _>>()?;
    let reconstructed = reconstruct_matrix(cfg.trap_n_ions, &fits)?;
    let f_rec = overlap_f(&compiled.expected, &reconstructed)?;
    let t_parity = blocks as f64 / cfg.xi_hz;
    let omega_eff = effective_coupling(&reconstructed, t_parity)?;

    // Fringe data: phi, then per pair the estimator, its 2-sigma, and the
    // infinite-shot value.
    let mut fringes = String::new();
    let _ = writeln!(fringes, "# parity fringes after {blocks} blocks");
    let mut header = "# columns: phi".to_string();
    for &(a, b) in &scan.pairs {
        let _ = write!(header, "\tc_{a}_{b}\ttwo_sigma_{a}_{b}\texact_{a}_{b}");
    }
    let _ = writeln!(fringes, "{header}");
    let _ = writeln!(fringes, "seed={}", cfg.seed);
    let _ = writeln!(fringes, "shots={}", cfg.shots);
    for (i, &phi) in scan.phi.iter().enumerate() {
        let mut row = vec![phi];
        for p in 0..scan.pairs.len() {
            row.push(scan.sampled[i][p]);
            row.push(scan.two_sigma[i][p]);
            row.push(scan.exact[i][p]);
        }
        let _ = writeln!(fringes, "{}", sci_row(&row));
    }

    let mut fit_text = String::new();
    let _ = writeln!(fit_text, "# single-parameter fringe fits C = A sin(2 phi)");
    let _ = writeln!(fit_text, "# columns: site_a\tsite_b\tamplitude\tresidual_rms\ttwo_sigma");
    for fit in &fits {
        let _ = writeln!(
            fit_text,
            "{}\t{}\t{}\t{}\t{}",
            fit.pair.0,
            fit.pair.1,
            sci(fit.amplitude),
            sci(fit.residual_rms),
            sci(fit.two_sigma)
        );
    }

    let render_matrix = |name: &str, m: &CouplingMatrix| {
        let mut text = String::new();
        let _ = writeln!(text, "# {name}, row-major");
        let _ = writeln!(text, "n={}", m.n());
        for i in 0..m.n() {
            let row: Vec<f64> = (0..m.n()).map(|j| m.get(i, j)).collect();
            let _ = writeln!(text, "{}", sci_row(&row));
        }
        text
    };

    let nn_mean = (0..cfg.trap_n_ions)
        .map(|a| reconstructed.get(a, (a + 1) % cfg.trap_n_ions).abs())
        .sum::<f64>()
        / cfg.trap_n_ions as f64;
    let mut max_nnn: f64 = 0.0;
    for a in 0..cfg.trap_n_ions {
        for b in (a + 1)..cfg.trap_n_ions {
            let cyclic_nn = b == a + 1 || (a == 0 && b == cfg.trap_n_ions - 1);
            if !cyclic_nn {
                max_nnn = max_nnn.max(reconstructed.get(a, b).abs());
            }
        }
    }

    let metrics = vec![
        ("overlap_expected_reconstructed".to_string(), f_rec),
        ("overlap_target_expected".to_string(), compiled.report.overlap_f),
        ("omega_eff_rad_per_s".to_string(), omega_eff),
        ("mean_abs_nn".to_string(), nn_mean),
        ("max_abs_nnn_over_mean_nn".to_string(), max_nnn / nn_mean),
    ];
    let mut metrics_text = String::from("# parity reconstruction metrics\n");
    for (k, v) in &metrics {
        let _ = writeln!(metrics_text, "{k}={}", sci(*v));
    }

    Ok(FigureOutput {
        figure: "parity",
        metrics,
        files: vec![
            DataFile {
                name: "fringes.tsv".to_string(),
                content: fringes,
            },
            DataFile {
                name: "fits.tsv".to_string(),
                content: fit_text,
            },
            DataFile {
                name: "expected_matrix.tsv".to_string(),
                content: render_matrix("expected coupling matrix", &compiled.expected),
            },
            DataFile {
                name: "reconstructed_matrix.tsv".to_string(),
                content: render_matrix("reconstructed coupling matrix", &reconstructed),
            },
            DataFile {
                name: "metrics.txt".to_string(),
                content: metrics_text,
            },
            manifest(cfg, "figure parity"),
        ],
    })
}

fn figure_transverse(cfg: &ExperimentConfig) -> Result<FigureOutput, ExperimentError> {
    let compiled = compile_target(cfg, cfg.target_scale.expect("resolved"))?;
    let blocks = cfg.blocks.expect("resolved");
    let block_t = 1.0 / cfg.xi_hz;
    let omega_eff = effective_coupling(&compiled.expected, block_t)?;

    let mut rows = Vec::new();
    for (i, &ratio) in cfg.delta_over_omega.iter().enumerate() {
        let delta = ratio * omega_eff;
        // z step sandwiched mid-sequence, carrying the full angle delta * t.
        let mut steps = Vec::with_capacity(blocks + 1);
        for b in 0..blocks {
            if b == blocks.div_ceil(2) {
                steps.push(Step::ZField {
                    angle: delta * blocks as f64 * block_t,
                });
            }
            steps.push(Step::IsingBlock {
                phases: compiled.report.phases.clone(),
                axis_phase: 0.0,
                duration_frac: 1.0,
            });
        }
        if blocks.div_ceil(2) >= blocks {
            steps.push(Step::ZField {
                angle: delta * blocks as f64 * block_t,
            });
        }
        let len = steps.len();
        let schedule = TrotterSchedule {
            steps,
            record_points: vec![len],
        };
        let point_noise = noise_model(cfg).derived(i as u64);
        let snaps = run_schedule(
            &StateVector::ground(cfg.trap_n_ions)?,
            &schedule,
            &compiled.modes,
            cfg.compile_use_effective,
            &point_noise,
            cfg.shots,
        )?;
        let snap = &snaps[0];
        let pr0_exact = snap.exact.probability(0);
        let pr0_sampled = if snap.counts.total > 0 {
            snap.counts.counts.get(&0).copied().unwrap_or(0) as f64 / snap.counts.total as f64
        } else {
            pr0_exact
        };
        rows.push((ratio, delta, pr0_exact, pr0_sampled));
    }

    // Scale the off-resonance estimate to the first (delta = 0) point.
    let base = rows
        .first()
        .map(|r| 1.0 - r.2)
        .unwrap_or(0.0);
    let scale = base / excitation_estimate(0.0, omega_eff, 1.0);

    let mut text = String::new();
    let _ = writeln!(text, "# transverse-field sweep after {blocks} blocks + 1 z step");
    let _ = writeln!(
        text,
        "# columns: delta_over_omega\tdelta_rad_per_s\tpr0000_exact\t\
         one_minus_pr0000_exact\testimate_scaled\tpr0000_sampled"
    );
    let _ = writeln!(text, "seed={}", cfg.seed);
    let _ = writeln!(text, "shots={}", cfg.shots);
    let mut max_dev: f64 = 0.0;
    for &(ratio, delta, pr0, pr0_sampled) in &rows {
        let est = excitation_estimate(delta, omega_eff, scale);
        max_dev = max_dev.max((est - (1.0 - pr0)).abs());
        let _ = writeln!(
            text,
            "{}",
            sci_row(&[ratio, delta, pr0, 1.0 - pr0, est, pr0_sampled])
        );
    }

    let metrics = vec![
        ("omega_eff_rad_per_s".to_string(), omega_eff),
        ("estimate_scale".to_string(), scale),
        ("max_abs_estimate_deviation".to_string(), max_dev),
        (
            "retention_increase".to_string(),
            rows.last().map(|r| r.2).unwrap_or(0.0) - rows.first().map(|r| r.2).unwrap_or(0.0),
        ),
    ];
    let mut metrics_text = String::from("# transverse sweep metrics\n");
    for (k, v) in &metrics {
        let _ = writeln!(metrics_text, "{k}={}", sci(*v));
    }

    Ok(FigureOutput {
        figure: "transverse",
        metrics,
        files: vec![
            DataFile {
                name: "transverse.tsv".to_string(),
                content: text,
            },
            DataFile {
                name: "metrics.txt".to_string(),
                content: metrics_text,
            },
            manifest(cfg, "figure transverse"),
        ],
    })
}
