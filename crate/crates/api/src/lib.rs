//! Wire types shared by the iondrive service, client, and CLI.
//!
//! All endpoints exchange JSON. Requests carry the experiment config as the
//! raw config-file text so that one parser (server side) owns validation
//! and error diagnostics; responses carry structured summaries plus the
//! rendered data files, which clients write to disk verbatim. File contents
//! use 17-significant-digit decimals throughout, so identical runs are
//! byte-identical end to end.

use serde::{Deserialize, Serialize};

/// Route paths, shared so client and server cannot drift.
pub mod routes {
    pub const HEALTH: &str = "/health";
    pub const MODES: &str = "/v1/modes";
    pub const COMPILE: &str = "/v1/compile";
    /// Figure runs POST to `/v1/figure/{name}`.
    pub const FIGURE_PREFIX: &str = "/v1/figure";
}

/// A run request: config text plus optional overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRequest {
    /// Experiment config in the flat key/value file format.
    pub config_text: String,
    /// Replaces the config seed when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One rendered output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDto {
    pub name: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModesResponse {
    pub n_ions: usize,
    /// Dimensionless equilibrium positions, ascending.
    pub positions: Vec<f64>,
    /// Mode frequencies in Hz, center-of-mass first.
    pub freqs_hz: Vec<f64>,
    pub lamb_dicke: Vec<f64>,
    /// Orthonormal mode matrix, row per mode.
    pub mode_matrix: Vec<Vec<f64>>,
    pub output_dir: String,
    pub files: Vec<FileDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompileResponse {
    /// Gauge-shifted mode phases (first entry exactly zero).
    pub phases: Vec<f64>,
    pub residual: f64,
    pub overlap_f: f64,
    /// Whether the overlap clears the configured threshold.
    pub realizable: bool,
    pub tone_count: usize,
    /// Largest residual phase-space displacement over all modes.
    pub max_displacement: f64,
    pub output_dir: String,
    pub files: Vec<FileDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricDto {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigureResponse {
    pub figure: String,
    pub metrics: Vec<MetricDto>,
    pub output_dir: String,
    pub files: Vec<FileDto>,
}

/// Error categories; the CLI maps them to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKindDto {
    Config,
    Unrealizable,
    NonConvergence,
    Internal,
}

impl ErrorKindDto {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Config => 2,
            Self::Unrealizable => 3,
            Self::NonConvergence => 4,
            Self::Internal => 1,
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            Self::Config => 400,
            Self::Unrealizable => 422,
            Self::NonConvergence | Self::Internal => 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub kind: ErrorKindDto,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kind_round_trips_as_snake_case() {
        let json = serde_json::to_string(&ErrorKindDto::NonConvergence).unwrap();
        assert_eq!(json, "\"non_convergence\"");
        let back: ErrorKindDto = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ErrorKindDto::NonConvergence);
    }

    #[test]
    fn exit_codes_match_contract() {
        assert_eq!(ErrorKindDto::Config.exit_code(), 2);
        assert_eq!(ErrorKindDto::Unrealizable.exit_code(), 3);
        assert_eq!(ErrorKindDto::NonConvergence.exit_code(), 4);
    }

    #[test]
    fn file_payload_survives_json_byte_exactly(){
        let file = FileDto {
            name: "data.tsv".to_string(),
            content: "x\t7.5000000000000000e3\n".to_string(),
        };
        let json = serde_json::to_string(&file).unwrap();
        let back: FileDto = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
    }
}
