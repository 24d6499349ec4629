use clap::Parser;
use spatial3d::kernels::Backend;
use spatial3d::sqlfe::Engine;
use spatial3d::store::Store;
use spatial3d::wire::{AuthMode, Server, ServerConfig};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

/// PostgreSQL-protocol endpoint for 3D spatial queries.
///
/// Flags override the config file; SPATIAL3D_PORT and SPATIAL3D_AUTH_MODE
/// override both.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// TOML config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen_addr: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    auth_mode: Option<AuthMode>,
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    worker_count: Option<usize>,
    /// Extra CSV table as NAME=PATH (repeatable).
    #[arg(long = "table", value_name = "NAME=PATH")]
    tables: Vec<String>,
}

fn run(args: Args) -> Result<(), String> {
    let mut cfg = match &args.config {
        Some(p) => ServerConfig::from_file(p).map_err(|e| e.to_string())?,
        None => ServerConfig::default(),
    };
    if let Some(v) = args.listen_addr {
        cfg.listen_addr = v;
    }
    if let Some(v) = args.port {
        cfg.port = v;
    }
    if let Some(v) = args.auth_mode {
        cfg.auth_mode = v;
    }
    if let Some(v) = args.backend {
        cfg.backend = v;
    }
    if let Some(v) = args.worker_count {
        cfg.worker_count = v;
    }
    for t in &args.tables {
        let (name, path) = t
            .split_once('=')
            .ok_or_else(|| format!("--table expects NAME=PATH, got '{t}'"))?;
        cfg.tables.push(spatial3d::wire::TableConfig {
            name: name.into(),
            geom_column: None,
            csv: Some(path.into()),
            upstream: None,
            source_table: None,
            id_column: None,
        });
    }
    cfg.apply_env(|k| std::env::var(k).ok()).map_err(|e| e.to_string())?;

    let store = Arc::new(Store::new());
    cfg.load_tables(&store).map_err(|e| e.to_string())?;
    let engine = Arc::new(Engine::new(store, cfg.executor()));

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let addr = format!("{}:{}", cfg.listen_addr, cfg.port);
        let server = Server::bind(
            &addr,
            engine,
            cfg.auth(),
            Duration::from_secs(cfg.shutdown_deadline_secs),
        )
        .await
        .map_err(|e| e.to_string())?;
        log::info!(
            "listening on {} ({:?} auth, {} backend)",
            server.local_addr().map_err(|e| e.to_string())?,
            cfg.auth_mode,
            cfg.backend
        );
        let (tx, rx) = tokio::sync::watch::channel(false);
        tokio::spawn(async move {
            if tokio::signal::ctrl_c().await.is_ok() {
                log::info!("shutting down");
                let _ = tx.send(true);
            }
        });
        server.run(rx).await.map_err(|e| e.to_string())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spatial3d-server: {e}");
            ExitCode::FAILURE
        }
    }
}
