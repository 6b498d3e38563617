use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use serde_json::json;
use venuetrace_core::ml::ClassifierModel;
use venuetrace_service::clock::SystemClock;
use venuetrace_service::config::ServiceConfig;
use venuetrace_service::{router, AppState};

use crate::error::{data, runtime, CliResult};
use crate::manifest::{ensure_dir, Recorder};

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Service TOML; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

pub fn run(args: ServeArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            ServiceConfig::from_toml(&text).map_err(|e| data(format!("{}: {e}", path.display())))?
        }
        None => ServiceConfig::default(),
    };
    if let Some(b) = &args.bind {
        cfg.bind = b.clone();
    }
    if let Some(p) = args.port {
        cfg.port = p;
    }
    cfg.validate().map_err(data)?;
    let text = fs::read_to_string(&args.model).map_err(|e| data(format!("model {}: {e}", args.model.display())))?;
    let model: ClassifierModel =
        serde_json::from_str(&text).map_err(|e| data(format!("model {}: {e}", args.model.display())))?;
    ensure_dir(&args.out_dir)?;
    let mut rec = Recorder::start("serve", &cfg, cfg.rng_seed);
    rec.input(&args.model)?;
    if let Some(path) = &args.config {
        rec.input(path)?;
    }
    let state = AppState::new(cfg.clone(), model, Arc::new(SystemClock)).map_err(data)?;

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)?;
    let served = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((cfg.bind.as_str(), cfg.port))
            .await
            .map_err(|e| runtime(format!("cannot bind {}:{}: {e}", cfg.bind, cfg.port)))?;
        let addr = listener.local_addr().map_err(runtime)?;
        println!("listening on {addr}");
        let _ = std::io::stdout().flush();
        tracing::info!(%addr, silos = cfg.silos.n_silos, "service started");
        axum::serve(listener, router(state.clone()).into_make_service_with_connect_info::<SocketAddr>())
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(runtime)?;
        Ok::<_, crate::error::CliError>(addr)
    })?;
    tracing::info!("drained; shutting down");
    let health = state.health();
    rec.finish(&args.out_dir, json!({"address": served.to_string(), "final_health": health}))?;
    println!("stopped");
    Ok(())
}
