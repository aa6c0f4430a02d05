use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use inflight_core::southbound::FaultConfig;
use inflight_service::{serve, start_core, ServiceConfig};
use log::info;

/// Intent orchestrator daemon.
#[derive(Debug, Parser)]
#[command(name = "inflightd", version)]
struct Args {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    compliance: Option<PathBuf>,
    /// Event log path.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ServiceConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ServiceConfig::default(),
    };
    if let Some(p) = args.port {
        config.port = p;
    }
    if let Some(p) = args.topology {
        config.topology = p;
    }
    if let Some(p) = args.compliance {
        config.compliance = p;
    }
    if let Some(p) = args.log {
        config.log = p;
    }
    let env_faults = std::env::var(FaultConfig::ENV_VAR).ok();
    let (handle, core_thread) = start_core(&config, env_faults.as_deref())?;

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port))
            .await
            .with_context(|| format!("binding port {}", config.port))?;
        info!("listening on {}", listener.local_addr()?);
        serve(listener, handle, async {
            let _ = tokio::signal::ctrl_c().await;
            info!("shutting down");
        })
        .await?;
        anyhow::Ok(())
    })?;
    core_thread.join();
    Ok(())
}
