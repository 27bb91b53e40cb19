//! HTTP service exposing the compile and simulation pipeline.
//!
//! Stateless: every request carries its full experiment config as text and
//! is parsed, validated, and executed on a blocking worker. Determinism is
//! inherited from the pipeline (seeded sampling, canonical decimal
//! rendering), so repeated identical requests return identical bodies.

use axum::extract::Path;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};

use iondrive_api::{
    routes, CompileResponse, ErrorKindDto, ErrorResponse, FigureResponse, FileDto,
    HealthResponse, MetricDto, ModesResponse, RunRequest,
};
use iondrive_core::experiments::{
    run_compile, run_figure, run_modes, DataFile, ErrorKind, ExperimentError, FigureKind,
};
use iondrive_core::ExperimentConfig;

/// Build the application router.
pub fn app() -> Router {
    Router::new()
        .route(routes::HEALTH, get(health))
        .route(routes::MODES, post(modes))
        .route(routes::COMPILE, post(compile))
        .route(&format!("{}/{{name}}", routes::FIGURE_PREFIX), post(figure))
}

/// Serve `app()` on an already-bound listener (used by the CLI's embedded
/// mode and by `iondrive serve`).
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, app()).await
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

struct ApiError(ErrorResponse);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.kind.http_status())
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

fn api_error(err: ExperimentError) -> ApiError {
    let kind = match err.kind() {
        ErrorKind::Config => ErrorKindDto::Config,
        ErrorKind::Unrealizable => ErrorKindDto::Unrealizable,
        ErrorKind::NonConvergence => ErrorKindDto::NonConvergence,
        ErrorKind::Internal => ErrorKindDto::Internal,
    };
    ApiError(ErrorResponse {
        kind,
        message: err.to_string(),
    })
}

fn parse_request(req: &RunRequest) -> Result<ExperimentConfig, ApiError> {
    let mut cfg = ExperimentConfig::parse(&req.config_text)
        .map_err(|e| api_error(ExperimentError::Config(e)))?;
    if let Some(seed) = req.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn files_dto(files: Vec<DataFile>) -> Vec<FileDto> {
    files
        .into_iter()
        .map(|f| FileDto {
            name: f.name,
            content: f.content,
        })
        .collect()
}

/// Run CPU-bound pipeline work off the async executor.
async fn run_blocking<T, F>(work: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ExperimentError> + Send + 'static,
{
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|join| {
            ApiError(ErrorResponse {
                kind: ErrorKindDto::Internal,
                message: format!("worker panicked: {join}"),
            })
        })?
        .map_err(api_error)
}

async fn modes(Json(req): Json<RunRequest>) -> Result<Json<ModesResponse>, ApiError> {
    let cfg = parse_request(&req)?;
    let output_dir = cfg.output_dir.clone();
    let out = run_blocking(move || run_modes(&cfg)).await?;
    Ok(Json(ModesResponse {
        n_ions: out.n_ions,
        positions: out.positions,
        freqs_hz: out.freqs_hz,
        lamb_dicke: out.lamb_dicke,
        mode_matrix: out.mode_matrix,
        output_dir,
        files: files_dto(out.files),
    }))
}

async fn compile(Json(req): Json<RunRequest>) -> Result<Json<CompileResponse>, ApiError> {
    let cfg = parse_request(&req)?;
    let output_dir = cfg.output_dir.clone();
    let out = run_blocking(move || run_compile(&cfg)).await?;
    Ok(Json(CompileResponse {
        phases: out.phases,
        residual: out.residual,
        overlap_f: out.overlap_f,
        realizable: out.realizable,
        tone_count: out.tone_count,
        max_displacement: out.max_displacement,
        output_dir,
        files: files_dto(out.files),
    }))
}

async fn figure(
    Path(name): Path<String>,
    Json(req): Json<RunRequest>,
) -> Result<Json<FigureResponse>, ApiError> {
    let kind = FigureKind::parse(&name).map_err(api_error)?;
    let cfg = parse_request(&req)?;
    let output_dir = cfg.output_dir.clone();
    let out = run_blocking(move || run_figure(&cfg, kind)).await?;
    Ok(Json(FigureResponse {
        figure: out.figure.to_string(),
        metrics: out
            .metrics
            .into_iter()
            .map(|(name, value)| MetricDto { name, value })
            .collect(),
        output_dir,
        files: files_dto(out.files),
    }))
}
