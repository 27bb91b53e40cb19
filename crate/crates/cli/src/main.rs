//! Experiment-runner CLI.
//!
//! All commands are HTTP clients of the iondrive service: with `--server`
//! they talk to a running instance, otherwise they spin up an in-process
//! server on an ephemeral localhost port for the duration of the run. Data
//! files from the response are written verbatim, so identical config+seed
//! runs produce byte-identical outputs either way.
//!
//! Exit codes: 0 success, 2 config error, 3 unrealizable target,
//! 4 numerical non-convergence, 1 anything else.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use iondrive_api::{ErrorKindDto, FileDto, MetricDto, RunRequest};
use iondrive_client::{Client, ClientError};

#[derive(Parser)]
#[command(name = "iondrive", version, about = "Ising-target compilation and stroboscopic simulation for trapped-ion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Parser, Debug)]
struct RunArgs {
    /// Experiment config file (flat key = value text).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use a running service instead of the embedded one.
    #[arg(long)]
    server: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chain geometry, normal modes, and Lamb-Dicke parameters.
    Modes(RunArgs),
    /// Compile the target into phases, amplitudes, and a tone table.
    Compile(RunArgs),
    /// Run a named experiment recipe (dynamics, es2, parity, transverse).
    Figure {
        /// Which recipe to run.
        name: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        /// Listen address.
        #[arg(long, default_value = "127.0.0.1:8780")]
        addr: SocketAddr,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve { addr } => {
            serve_forever(addr)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Modes(args) => with_client(&args, |client, req, out_dir| {
            let resp = client.modes(req)?;
            let out_dir = out_dir.unwrap_or_else(|| PathBuf::from(&resp.output_dir));
            if let Err(err) = write_files(&out_dir, &resp.files) {
                eprintln!("error: writing outputs to {}: {err}", out_dir.display());
                return Ok(ExitCode::from(1));
            }
            println!(
                "modes: {} ions, com {:.6} kHz, highest {:.6} kHz",
                resp.n_ions,
                resp.freqs_hz.first().copied().unwrap_or(0.0) / 1e3,
                resp.freqs_hz.last().copied().unwrap_or(0.0) / 1e3
            );
            Ok(ExitCode::SUCCESS)
        }),
        Command::Compile(args) => with_client(&args, |client, req, out_dir| {
            let resp = client.compile(req)?;
            let out_dir = out_dir.unwrap_or_else(|| PathBuf::from(&resp.output_dir));
            if let Err(err) = write_files(&out_dir, &resp.files) {
                eprintln!("error: writing outputs to {}: {err}", out_dir.display());
                return Ok(ExitCode::from(1));
            }
            let phases: Vec<String> = resp.phases.iter().map(|p| format!("{p:.4}")).collect();
            println!("compiled phases: [{}]", phases.join(", "));
            println!(
                "residual: {:.6}  overlap_f: {:.6}  tones: {}  max |alpha|: {:.3e}",
                resp.residual, resp.overlap_f, resp.tone_count, resp.max_displacement
            );
            if resp.realizable {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "target not realizable to the configured overlap threshold \
                     (F = {:.4}); report written anyway",
                    resp.overlap_f
                );
                Ok(ExitCode::from(3))
            }
        }),
        Command::Figure { name, args } => with_client(&args, |client, req, out_dir| {
            let resp = client.figure(&name, req)?;
            let out_dir = out_dir.unwrap_or_else(|| PathBuf::from(&resp.output_dir));
            if let Err(err) = write_files(&out_dir, &resp.files) {
                eprintln!("error: writing outputs to {}: {err}", out_dir.display());
                return Ok(ExitCode::from(1));
            }
            print_metrics(&resp.figure, &resp.metrics);
            Ok(ExitCode::SUCCESS)
        }),
    }
}

fn print_metrics(figure: &str, metrics: &[MetricDto]) {
    if metrics.is_empty() {
        println!("figure {figure}: done");
        return;
    }
    println!("figure {figure}:");
    for m in metrics {
        println!("  {} = {:.6}", m.name, m.value);
    }
}

fn with_client<F>(args: &RunArgs, body: F) -> Result<ExitCode>
where
    F: FnOnce(&Client, &RunRequest, Option<PathBuf>) -> Result<ExitCode, ClientError>,
{
    let config_text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let req = RunRequest {
        config_text,
        seed: args.seed,
    };

    let embedded = match &args.server {
        Some(_) => None,
        None => Some(EmbeddedServer::start()?),
    };
    let base = match (&args.server, &embedded) {
        (Some(url), _) => url.clone(),
        (None, Some(srv)) => format!("http://{}", srv.addr),
        _ => unreachable!(),
    };
    let client = Client::new(&base);

    let result = body(&client, &req, args.out.clone());
    if let Some(srv) = embedded {
        srv.shutdown();
    }
    match result {
        Ok(code) => Ok(code),
        Err(ClientError::Api { kind, message }) => {
            eprintln!("error: {message}");
            Ok(exit_for(kind))
        }
        Err(other) => Err(other.into()),
    }
}

fn exit_for(kind: ErrorKindDto) -> ExitCode {
    ExitCode::from(u8::try_from(kind.exit_code()).unwrap_or(1))
}

fn write_files(dir: &Path, files: &[FileDto]) -> std::io::Result<()> {
    for file in files {
        let path = dir.join(&file.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &file.content)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// In-process service on an ephemeral localhost port.
struct EmbeddedServer {
    addr: SocketAddr,
    runtime: Option<tokio::runtime::Runtime>,
}

impl EmbeddedServer {
    fn start() -> Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .context("starting embedded runtime")?;
        let (tx, rx) = std::sync::mpsc::channel();
        runtime.spawn(async move {
            match tokio::net::TcpListener::bind("127.0.0.1:0").await {
                Ok(listener) => {
                    let addr = listener.local_addr().expect("bound listener has an address");
                    tx.send(Ok(addr)).ok();
                    if let Err(err) = iondrive_service::serve(listener).await {
                        eprintln!("embedded service stopped: {err}");
                    }
                }
                Err(err) => {
                    tx.send(Err(err)).ok();
                }
            }
        });
        let addr = rx
            .recv()
            .context("embedded service did not start")?
            .context("binding embedded service")?;
        Ok(Self {
            addr,
            runtime: Some(runtime),
        })
    }

    fn shutdown(mut self) {
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_background();
        }
    }
}

fn serve_forever(addr: SocketAddr) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("iondrive service listening on http://{addr}");
        tokio::select! {
            result = iondrive_service::serve(listener) => result.context("serving"),
            _ = tokio::signal::ctrl_c() => {
                println!("shutting down");
                Ok(())
            }
        }
    })
}
