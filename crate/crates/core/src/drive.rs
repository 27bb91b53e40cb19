//! Tone tables for one interaction block, phase ramps, and loop closure.
//!
//! Each mode with a nonzero drive amplitude gets two symmetric tone pairs,
//! at `carrier ± (ν_j + s·ξ)` and `carrier ± (ν_j + s·3ξ)` with equal
//! amplitudes and opposite pair phases, where the detuning side `s` realizes
//! the sign of the requested entanglement phase. Over one block of duration
//! `2π/ξ` every mode's phase-space loop closes and the accumulated phase per
//! mode is `s · (2π/3) · (η r Ω₀ / ξ)²`.
//!
//! [`verify_loop_closure`] re-derives displacement and accumulated phase
//! from a tone table alone, in closed form. The phase-space integrals are
//! taken over the co-rotating force envelope (counter-rotating terms at
//! `2ν_j` are dropped, the usual adiabatic-regime bookkeeping), and the
//! orientation is fixed so a pair on the positive detuning side accumulates
//! a positive phase, matching the compiler's sign convention.

use num_complex::Complex64;
use thiserror::Error;

use crate::compiler::DriveAmplitudes;
use crate::crystal::ModeDecomposition;
use crate::textfmt::sci;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum DriveError {
    #[error("invalid drive parameter: {0}")]
    InvalidInput(String),
    #[error(
        "tone collision: {f1_hz:.6} Hz and {f2_hz:.6} Hz closer than xi/100; \
         mode spacing too dense for the chosen xi"
    )]
    ToneCollision { f1_hz: f64, f2_hz: f64 },
    #[error("malformed tone table: {0}")]
    MalformedTable(String),
}

/// One spectral component of the drive.
#[derive(Debug, Clone, PartialEq)]
pub struct Tone {
    /// Absolute angular frequency, rad/s.
    pub freq: f64,
    /// Relative amplitude in [0, 1].
    pub amp: f64,
    /// Phase, radians.
    pub phase: f64,
}

/// Full drive spectrum for one interaction block.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneTable {
    pub tones: Vec<Tone>,
    /// Block duration 2π/ξ, seconds.
    pub block_duration: f64,
    /// Spectrum center (the qubit transition in the synthesizer frame),
    /// rad/s. Tables are generated about the RF center of the synthesis
    /// chain, which keeps beat-note arithmetic far below the pair-symmetry
    /// tolerance; an absolute optical frequency would not.
    pub carrier_freq: f64,
    /// Detuning ξ, rad/s.
    pub xi: f64,
    /// Total Rabi frequency of a unit-amplitude pair, rad/s.
    pub rabi_freq: f64,
}

/// Loop-closure figures for one mode at the end of a block.
#[derive(Debug, Clone)]
pub struct ModeClosure {
    /// |α_j(T)|: residual phase-space displacement, dimensionless.
    pub displacement_abs: f64,
    /// Φ_j(T): accumulated entanglement phase, radians.
    pub accumulated_phase: f64,
}

/// Build the tone table realizing one block with overall axis phase `phi`.
///
/// Modes with zero amplitude contribute no tones, so the COM sidebands are
/// absent after the gauge shift. Pair phases: the ξ pair carries `phi`, the
/// 3ξ pair `phi + π` (opposite), both tones of a pair sharing the phase so
/// the motional phase stays at zero and the spin phase is `phi`.
pub fn build_tone_table(
    amps: &DriveAmplitudes,
    modes: &ModeDecomposition,
    xi: f64,
    carrier_freq: f64,
    phi: f64,
) -> Result<ToneTable, DriveError> {
    if !(xi > 0.0) {
        return Err(DriveError::InvalidInput(format!(
            "xi must be positive, got {xi}"
        )));
    }
    if amps.rel_amps.len() != modes.n_ions() {
        return Err(DriveError::InvalidInput(format!(
            "{} amplitudes for {} modes",
            amps.rel_amps.len(),
            modes.n_ions()
        )));
    }
    let mut tones = Vec::new();
    for (j, (&r, &s)) in amps
        .rel_amps
        .iter()
        .zip(&amps.detuning_signs)
        .enumerate()
    {
        if r == 0.0 {
            continue;
        }
        let nu = modes.freqs[j];
        let side = f64::from(s);
        for (mult, pair_phase) in [(1.0, phi), (3.0, phi + std::f64::consts::PI)] {
            let beat = nu + side * mult * xi;
            if beat <= 0.0 {
                return Err(DriveError::InvalidInput(format!(
                    "sideband beat {beat} rad/s not positive for mode {j}"
                )));
            }
            for sign in [1.0, -1.0] {
                tones.push(Tone {
                    freq: carrier_freq + sign * beat,
                    amp: r,
                    phase: pair_phase,
                });
            }
        }
    }

    // Reject spectra where distinct requested tones (or a tone and the
    // carrier) crowd within xi/100: they would merge in hardware.
    let min_gap = xi / 100.0;
    let mut freqs: Vec<f64> = tones.iter().map(|t| t.freq).collect();
    freqs.push(carrier_freq);
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in freqs.windows(2) {
        if w[1] - w[0] < min_gap {
            return Err(DriveError::ToneCollision {
                f1_hz: w[0] / TAU,
                f2_hz: w[1] / TAU,
            });
        }
    }

    Ok(ToneTable {
        tones,
        block_duration: TAU / xi,
        carrier_freq,
        xi,
        rabi_freq: amps.rabi_freq,
    })
}

/// Per-block axis-phase offsets realizing a transverse field δ:
/// φ_k = 2·δ·T_block·k. One block then advances the interaction frame by
/// the same angle as an explicit z-field step of δ·T_block.
pub fn phase_ramp_schedule(delta: f64, n_blocks: usize, block_duration: f64) -> Vec<f64> {
    (0..n_blocks)
        .map(|k| 2.0 * delta * block_duration * k as f64)
        .collect()
}

impl ToneTable {
    /// Check the red/blue pair symmetry about the carrier (1e-6 rad/s).
    pub fn validate_symmetric(&self) -> Result<(), DriveError> {
        let mut offsets: Vec<f64> = self
            .tones
            .iter()
            .map(|t| t.freq - self.carrier_freq)
            .collect();
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (neg, pos): (Vec<f64>, Vec<f64>) = offsets.iter().partition(|&&x| x < 0.0);
        if neg.len() != pos.len() {
            return Err(DriveError::MalformedTable(format!(
                "{} red vs {} blue tones",
                neg.len(),
                pos.len()
            )));
        }
        for (r, b) in neg.iter().rev().zip(pos.iter()) {
            if (r + b).abs() > 1e-6 {
                return Err(DriveError::MalformedTable(format!(
                    "unpaired offsets {r} and {b} rad/s"
                )));
            }
        }
        Ok(())
    }
}

/// Closed-form displacement and accumulated phase per mode at `T = 2π/ξ`.
///
/// Pairs are read back from the table alone: each blue-side tone is
/// assigned to the nearest mode and its detuning from that sideband taken
/// as the pair's beat offset. The per-mode force envelope is
/// `g(t) = Σ_p A_p e^{−i(ξ̃_p t + θ_p)}` with `A_p = η_j amp_p Ω₀ / 2`, and
///
///   α_j(T) = ∫₀ᵀ g dt,
///   Φ_j(T) = ∫₀ᵀ dt ∫₀ᵗ dt′ Im[g*(t) g(t′)].
pub fn verify_loop_closure(
    table: &ToneTable,
    modes: &ModeDecomposition,
) -> Result<Vec<ModeClosure>, DriveError> {
    table.validate_symmetric()?;
    let n = modes.n_ions();
    let t_end = table.block_duration;

    // (detuning from sideband, force amplitude, pair phase) per mode.
    let mut pairs: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); n];
    for tone in &table.tones {
        let beat = tone.freq - table.carrier_freq;
        if beat <= 0.0 {
            continue;
        }
        let j = (0..n)
            .min_by(|&a, &b| {
                let da = (beat - modes.freqs[a]).abs();
                let db = (beat - modes.freqs[b]).abs();
                da.partial_cmp(&db).unwrap()
            })
            .expect("at least one mode");
        let detuning = beat - modes.freqs[j];
        if detuning == 0.0 {
            return Err(DriveError::MalformedTable(format!(
                "tone exactly on sideband of mode {j}"
            )));
        }
        let amp = modes.lamb_dicke[j] * tone.amp * table.rabi_freq / 2.0;
        pairs[j].push((detuning, amp, tone.phase));
    }

    let closures = pairs
        .iter()
        .map(|mode_pairs| {
            let mut alpha = Complex64::new(0.0, 0.0);
            for &(xi_p, a_p, th_p) in mode_pairs {
                // ∫₀ᵀ e^{−i(ξt+θ)} dt = e^{−iθ} (1 − e^{−iξT}) / (iξ)
                let num = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -xi_p * t_end);
                alpha += Complex64::from_polar(a_p, -th_p) * num / Complex64::new(0.0, xi_p);
            }
            let mut phase = 0.0;
            for &(xi_p, a_p, th_p) in mode_pairs {
                for &(xi_q, a_q, th_q) in mode_pairs {
                    // Im[g*(t) g(t')] term: sin(ξ_p t − ξ_q t' + θ_p − θ_q)
                    phase += a_p * a_q * double_integral_sin(xi_p, xi_q, th_p - th_q, t_end);
                }
            }
            ModeClosure {
                displacement_abs: alpha.norm(),
                accumulated_phase: phase,
            }
        })
        .collect();
    Ok(closures)
}

/// ∫₀ᵀ dt ∫₀ᵗ dt′ sin(a·t − b·t′ + Δ), with b ≠ 0.
fn double_integral_sin(a: f64, b: f64, delta: f64, t_end: f64) -> f64 {
    // Inner: [cos(a t − b t′ + Δ)/b]₀ᵗ = (cos((a−b)t + Δ) − cos(a t + Δ)) / b
    (cos_integral(a - b, delta, t_end) - cos_integral(a, delta, t_end)) / b
}

/// ∫₀ᵀ cos(ωt + Δ) dt.
fn cos_integral(omega: f64, delta: f64, t_end: f64) -> f64 {
    if omega == 0.0 {
        t_end * delta.cos()
    } else {
        ((omega * t_end + delta).sin() - delta.sin()) / omega
    }
}

/// Render the table as the structured text format (decimal Hz fields).
pub fn render_tone_table(table: &ToneTable) -> String {
    let mut out = String::new();
    out.push_str("# tone table: header keys, then one tone record per line\n");
    out.push_str("# tone\tfreq_hz\trel_amp\tphase_rad\n");
    out.push_str(&format!("carrier_hz={}\n", sci(table.carrier_freq / TAU)));
    out.push_str(&format!("xi_hz={}\n", sci(table.xi / TAU)));
    out.push_str(&format!("block_duration_s={}\n", sci(table.block_duration)));
    out.push_str(&format!("rabi_hz={}\n", sci(table.rabi_freq / TAU)));
    for t in &table.tones {
        out.push_str(&format!(
            "tone\t{}\t{}\t{}\n",
            sci(t.freq / TAU),
            sci(t.amp),
            sci(t.phase)
        ));
    }
    out
}

/// Parse the structured text format back into a table.
pub fn parse_tone_table(text: &str) -> Result<ToneTable, DriveError> {
    let mut carrier_hz = None;
    let mut xi_hz = None;
    let mut block_duration = None;
    let mut rabi_hz = None;
    let mut tones = Vec::new();

    let parse_f64 = |value: &str, line_no: usize| {
        value.trim().parse::<f64>().map_err(|_| {
            DriveError::MalformedTable(format!("line {line_no}: bad number {value:?}"))
        })
    };

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("tone\t") {
            let fields: Vec<&str> = rest.split('\t').collect();
            if fields.len() != 3 {
                return Err(DriveError::MalformedTable(format!(
                    "line {line_no}: tone record needs 3 fields, got {}",
                    fields.len()
                )));
            }
            tones.push(Tone {
                freq: parse_f64(fields[0], line_no)? * TAU,
                amp: parse_f64(fields[1], line_no)?,
                phase: parse_f64(fields[2], line_no)?,
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            DriveError::MalformedTable(format!("line {line_no}: expected key=value"))
        })?;
        match key.trim() {
            "carrier_hz" => carrier_hz = Some(parse_f64(value, line_no)?),
            "xi_hz" => xi_hz = Some(parse_f64(value, line_no)?),
            "block_duration_s" => block_duration = Some(parse_f64(value, line_no)?),
            "rabi_hz" => rabi_hz = Some(parse_f64(value, line_no)?),
            other => {
                return Err(DriveError::MalformedTable(format!(
                    "line {line_no}: unknown key {other:?}"
                )))
            }
        }
    }

    let missing = |name: &str| DriveError::MalformedTable(format!("missing header key {name}"));
    Ok(ToneTable {
        tones,
        block_duration: block_duration.ok_or_else(|| missing("block_duration_s"))?,
        carrier_freq: carrier_hz.ok_or_else(|| missing("carrier_hz"))? * TAU,
        xi: xi_hz.ok_or_else(|| missing("xi_hz"))? * TAU,
        rabi_freq: rabi_hz.ok_or_else(|| missing("rabi_hz"))? * TAU,
    })
}
