//! Thin blocking HTTP client for the iondrive service.

use iondrive_api::{
    routes, CompileResponse, ErrorResponse, FigureResponse, HealthResponse, ModesResponse,
    RunRequest,
};
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{message}")]
    Api {
        kind: iondrive_api::ErrorKindDto,
        message: String,
    },
    #[error("unexpected response from {url}: status {status}")]
    Protocol { url: String, status: u16 },
}

pub struct Client {
    base: String,
    http: reqwest::blocking::Client,
}

impl Client {
    /// `base_url` like `http://127.0.0.1:8780`, no trailing slash needed.
    pub fn new(base_url: &str) -> Self {
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            http: reqwest::blocking::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn health(&self) -> Result<HealthResponse, ClientError> {
        let url = format!("{}{}", self.base, routes::HEALTH);
        let resp = self.http.get(&url).send()?;
        Self::decode(resp)
    }

    pub fn modes(&self, req: &RunRequest) -> Result<ModesResponse, ClientError> {
        self.post(routes::MODES, req)
    }

    pub fn compile(&self, req: &RunRequest) -> Result<CompileResponse, ClientError> {
        self.post(routes::COMPILE, req)
    }

    pub fn figure(&self, name: &str, req: &RunRequest) -> Result<FigureResponse, ClientError> {
        self.post(&format!("{}/{name}", routes::FIGURE_PREFIX), req)
    }

    fn post<T: DeserializeOwned>(&self, path: &str, req: &RunRequest) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = self.http.post(&url).json(req).send()?;
        Self::decode(resp)
    }

    fn decode<T: DeserializeOwned>(resp: reqwest::blocking::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json::<T>()?);
        }
        let url = resp.url().to_string();
        // Error bodies carry a structured kind; fall back to the raw status.
        match resp.json::<ErrorResponse>() {
            Ok(body) => Err(ClientError::Api {
                kind: body.kind,
                message: body.message,
            }),
            Err(_) => Err(ClientError::Protocol {
                url,
                status: status.as_u16(),
            }),
        }
    }
}
