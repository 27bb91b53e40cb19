//! Flat key/value experiment configuration.
//!
//! The format is line-oriented `key = value` with `#` comments and dotted
//! section prefixes, chosen so runs diff cleanly and golden files stay
//! stable. [`ExperimentConfig::canonical_text`] renders a config that
//! reparses to the identical struct (floats via 17-significant-digit
//! decimals), which is what run manifests embed.

use thiserror::Error;

use crate::constants::AMU;
use crate::crystal::{CrystalError, TrapConfig};
use crate::textfmt::sci;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    NotKeyValue { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key {key}: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("key {key}: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Trap(#[from] CrystalError),
}

/// What the compiler should target.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Nearest-neighbor ring with a sign-flipped closure bond.
    RingAntiperiodic,
    /// Explicit symmetric zero-diagonal matrix, row-major.
    Matrix(Vec<Vec<f64>>),
}

/// One experiment run, fully parameterized.
///
/// `target_scale`, `blocks`, and `half_steps` are optional: commands fill in
/// per-figure defaults when unset, and the run manifest echoes the resolved
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trap_n_ions: usize,
    pub trap_axial_freq_hz: f64,
    pub trap_mass_amu: f64,
    pub trap_wavevector_per_m: f64,
    pub trap_beam_weights: Option<Vec<f64>>,
    pub target: TargetSpec,
    /// Per-block nearest-neighbor phase of the ring target.
    pub target_scale: Option<f64>,
    pub xi_hz: f64,
    pub rabi_hz: f64,
    pub kappa: f64,
    pub carrier_hz: f64,
    pub blocks: Option<usize>,
    pub half_steps: Option<bool>,
    pub delta_over_omega: Vec<f64>,
    pub shots: u64,
    pub seed: u64,
    /// Coherence time in seconds; infinity when configured as `inf`.
    pub t2_s: f64,
    pub output_dir: String,
    pub phi_points: usize,
    pub compile_min_overlap: f64,
    pub compile_use_effective: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trap_n_ions: 4,
            trap_axial_freq_hz: 1.0e6,
            trap_mass_amu: 87.905_612_2,
            trap_wavevector_per_m: std::f64::consts::TAU / 674e-9,
            trap_beam_weights: None,
            target: TargetSpec::RingAntiperiodic,
            target_scale: None,
            xi_hz: 7.5e3,
            rabi_hz: 20.0e3,
            kappa: 1.0,
            carrier_hz: 200.0e6,
            blocks: None,
            half_steps: None,
            delta_over_omega: vec![0.0, 1.0, 2.0, 4.0, 8.0],
            shots: 500,
            seed: 1,
            t2_s: f64::INFINITY,
            output_dir: "out".to_string(),
            phi_points: 13,
            compile_min_overlap: 0.9,
            compile_use_effective: false,
        }
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: format!("not a number: {value:?}"),
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: format!("not a non-negative integer: {value:?}"),
    })
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: format!("not a non-negative integer: {value:?}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            message: format!("expected true or false, got {other:?}"),
        }),
    }
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|s| parse_f64(line, key, s))
        .collect()
}

impl ExperimentConfig {
    /// Parse a config file; unset keys take defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                ConfigError::NotKeyValue {
                    line,
                    text: content.to_string(),
                }
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            match key {
                "trap.n_ions" => cfg.trap_n_ions = parse_usize(line, key, value)?,
                "trap.axial_freq_hz" => cfg.trap_axial_freq_hz = parse_f64(line, key, value)?,
                "trap.mass_amu" => cfg.trap_mass_amu = parse_f64(line, key, value)?,
                "trap.wavevector_per_m" => {
                    cfg.trap_wavevector_per_m = parse_f64(line, key, value)?
                }
                "trap.beam_weights" => {
                    cfg.trap_beam_weights = Some(parse_list(line, key, value)?)
                }
                "target" => {
                    cfg.target = match value {
                        "ring_antiperiodic" => TargetSpec::RingAntiperiodic,
                        "matrix" => TargetSpec::Matrix(Vec::new()),
                        other => {
                            return Err(ConfigError::BadValue {
                                line,
                                key: key.to_string(),
                                message: format!(
                                    "expected ring_antiperiodic or matrix, got {other:?}"
                                ),
                            })
                        }
                    }
                }
                "target.scale" => cfg.target_scale = Some(parse_f64(line, key, value)?),
                "target.matrix" => {
                    let rows: Result<Vec<Vec<f64>>, _> = value
                        .split(';')
                        .map(|row| parse_list(line, key, row))
                        .collect();
                    cfg.target = TargetSpec::Matrix(rows?);
                }
                "xi_hz" => cfg.xi_hz = parse_f64(line, key, value)?,
                "rabi_hz" => cfg.rabi_hz = parse_f64(line, key, value)?,
                "kappa" => cfg.kappa = parse_f64(line, key, value)?,
                "carrier_hz" => cfg.carrier_hz = parse_f64(line, key, value)?,
                "blocks" => cfg.blocks = Some(parse_usize(line, key, value)?),
                "half_steps" => cfg.half_steps = Some(parse_bool(line, key, value)?),
                "delta_over_omega" => cfg.delta_over_omega = parse_list(line, key, value)?,
                "shots" => cfg.shots = parse_u64(line, key, value)?,
                "seed" => cfg.seed = parse_u64(line, key, value)?,
                "t2_s" => {
                    cfg.t2_s = if value == "inf" {
                        f64::INFINITY
                    } else {
                        parse_f64(line, key, value)?
                    }
                }
                "output_dir" => cfg.output_dir = value.to_string(),
                "phi_points" => cfg.phi_points = parse_usize(line, key, value)?,
                "compile.min_overlap" => cfg.compile_min_overlap = parse_f64(line, key, value)?,
                "compile.use_effective" => {
                    cfg.compile_use_effective = parse_bool(line, key, value)?
                }
                other => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: other.to_string(),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| -> Result<(), ConfigError> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key: key.to_string(),
                    message: format!("must be positive, got {v}"),
                })
            }
        };
        positive("xi_hz", self.xi_hz)?;
        positive("rabi_hz", self.rabi_hz)?;
        positive("kappa", self.kappa)?;
        positive("carrier_hz", self.carrier_hz)?;
        positive("t2_s", self.t2_s)?;
        if self.shots == 0 && self.t2_s.is_finite() {
            return Err(ConfigError::Invalid {
                key: "shots".to_string(),
                message: "must be positive when t2_s is finite".to_string(),
            });
        }
        if self.phi_points < 3 {
            return Err(ConfigError::Invalid {
                key: "phi_points".to_string(),
                message: format!("need at least 3 fringe phases, got {}", self.phi_points),
            });
        }
        if let TargetSpec::Matrix(rows) = &self.target {
            let n = self.trap_n_ions;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(ConfigError::Invalid {
                    key: "target.matrix".to_string(),
                    message: format!("expected {n}x{n} row-major entries"),
                });
            }
            for i in 0..n {
                if rows[i][i] != 0.0 {
                    return Err(ConfigError::Invalid {
                        key: "target.matrix".to_string(),
                        message: format!("diagonal entry ({i},{i}) must be zero"),
                    });
                }
                for j in 0..n {
                    if (rows[i][j] - rows[j][i]).abs() > 1e-12 {
                        return Err(ConfigError::Invalid {
                            key: "target.matrix".to_string(),
                            message: format!("entries ({i},{j}) and ({j},{i}) differ"),
                        });
                    }
                }
            }
        }
        // Trap parameters are validated by construction.
        self.to_trap_config()?;
        Ok(())
    }

    /// Build the trap description in SI units.
    pub fn to_trap_config(&self) -> Result<TrapConfig, CrystalError> {
        let cfg = TrapConfig::new(
            self.trap_n_ions,
            std::f64::consts::TAU * self.trap_axial_freq_hz,
            self.trap_mass_amu * AMU,
            self.trap_wavevector_per_m,
        )?;
        match &self.trap_beam_weights {
            Some(w) => cfg.with_beam_weights(w.clone()),
            None => Ok(cfg),
        }
    }

    /// Detuning ξ in rad/s.
    pub fn xi(&self) -> f64 {
        std::f64::consts::TAU * self.xi_hz
    }

    /// Render the canonical form: fixed key order, exact decimals, and all
    /// optional values resolved if set. Reparsing reproduces the struct.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("trap.n_ions", self.trap_n_ions.to_string());
        kv("trap.axial_freq_hz", sci(self.trap_axial_freq_hz));
        kv("trap.mass_amu", sci(self.trap_mass_amu));
        kv("trap.wavevector_per_m", sci(self.trap_wavevector_per_m));
        if let Some(w) = &self.trap_beam_weights {
            kv(
                "trap.beam_weights",
                w.iter().map(|x| sci(*x)).collect::<Vec<_>>().join(","),
            );
        }
        match &self.target {
            TargetSpec::RingAntiperiodic => kv("target", "ring_antiperiodic".to_string()),
            TargetSpec::Matrix(rows) => {
                kv(
                    "target.matrix",
                    rows.iter()
                        .map(|r| r.iter().map(|x| sci(*x)).collect::<Vec<_>>().join(","))
                        .collect::<Vec<_>>()
                        .join(";"),
                );
            }
        }
        if let Some(s) = self.target_scale {
            kv("target.scale", sci(s));
        }
        kv("xi_hz", sci(self.xi_hz));
        kv("rabi_hz", sci(self.rabi_hz));
        kv("kappa", sci(self.kappa));
        kv("carrier_hz", sci(self.carrier_hz));
        if let Some(b) = self.blocks {
            kv("blocks", b.to_string());
        }
        if let Some(h) = self.half_steps {
            kv("half_steps", h.to_string());
        }
        kv(
            "delta_over_omega",
            self.delta_over_omega
                .iter()
                .map(|x| sci(*x))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("shots", self.shots.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "t2_s",
            if self.t2_s.is_finite() {
                sci(self.t2_s)
            } else {
                "inf".to_string()
            },
        );
        kv("output_dir", self.output_dir.clone());
        kv("phi_points", self.phi_points.to_string());
        kv("compile.min_overlap", sci(self.compile_min_overlap));
        kv("compile.use_effective", self.compile_use_effective.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.trap_n_ions, 4);
        assert_eq!(cfg.xi_hz, 7.5e3);
        assert!(cfg.t2_s.is_infinite());
    }

    #[test]
    fn parses_keys_and_comments() {
        let text = "\
# four-ion ring
trap.n_ions = 4
xi_hz = 8000   # detuning
t2_s = 0.005
blocks = 5
half_steps = true
delta_over_omega = 0, 0.5, 1
target.scale = 0.03
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.xi_hz, 8000.0);
        assert_eq!(cfg.t2_s, 0.005);
        assert_eq!(cfg.blocks, Some(5));
        assert_eq!(cfg.half_steps, Some(true));
        assert_eq!(cfg.delta_over_omega, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.target_scale, Some(0.03));
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let err = ExperimentConfig::parse("bogus_key = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 1, .. }), "{err}");

        let err = ExperimentConfig::parse("\n\nxi_hz - 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::NotKeyValue { line: 3, .. }), "{err}");

        let err = ExperimentConfig::parse("xi_hz = fast\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1") && msg.contains("xi_hz"), "{msg}");

        let err = ExperimentConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(ExperimentConfig::parse("xi_hz = -5\n").is_err());
        assert!(ExperimentConfig::parse("trap.n_ions = 1\n").is_err());
        assert!(ExperimentConfig::parse("phi_points = 2\n").is_err());
        assert!(ExperimentConfig::parse("t2_s = 0.005\nshots = 0\n").is_err());
        assert!(ExperimentConfig::parse("target = rings\n").is_err());
        // Matrix target must match the ion count.
        assert!(ExperimentConfig::parse("trap.n_ions = 3\ntarget.matrix = 0,1;1,0\n").is_err());
    }

    #[test]
    fn matrix_target_must_be_symmetric_zero_diagonal() {
        assert!(ExperimentConfig::parse("trap.n_ions = 2\ntarget.matrix = 0,1;2,0\n").is_err());
        assert!(ExperimentConfig::parse("trap.n_ions = 2\ntarget.matrix = 1,0;0,1\n").is_err());
    }

    #[test]
    fn matrix_target_round_trips() {
        let text = "trap.n_ions = 2\ntarget.matrix = 0,0.5;0.5,0\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        match &cfg.target {
            TargetSpec::Matrix(rows) => {
                assert_eq!(rows, &vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
            }
            other => panic!("wrong target {other:?}"),
        }
    }

    #[test]
    fn canonical_text_reparses_identically() {
        let mut cfg = ExperimentConfig::default();
        cfg.target_scale = Some(0.05);
        cfg.blocks = Some(3);
        cfg.half_steps = Some(false);
        cfg.t2_s = 4.2e-3;
        cfg.trap_beam_weights = Some(vec![1.0, 0.97, 0.97, 1.0]);
        let text = cfg.canonical_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        // And canonicalization is idempotent (byte-stable manifests).
        assert_eq!(back.canonical_text(), text);
    }
}
