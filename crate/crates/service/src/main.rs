use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;

#[derive(Parser, Debug)]
#[command(
    name = "solarsite-serve",
    version,
    about = "HTTP service for solar site suitability runs"
)]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Directory that scenario configs may read from.
    #[arg(long)]
    data_root: PathBuf,
    /// Where run artifacts are written. Defaults to a directory under the
    /// system temp dir.
    #[arg(long)]
    runs_dir: Option<PathBuf>,
    /// Pipeline runs allowed at the same time.
    #[arg(long, default_value_t = 1)]
    parallel_runs: usize,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let runs_dir = args
        .runs_dir
        .unwrap_or_else(|| std::env::temp_dir().join(format!("solarsite-runs-{}", std::process::id())));
    let state = solarsite_service::AppState::new(&args.data_root, &runs_dir, args.parallel_runs)?;
    let app = solarsite_service::router(state);
    let listener = tokio::net::TcpListener::bind(args.bind)
        .await
        .with_context(|| format!("binding {}", args.bind))?;
    log::info!("listening on {}, data root {}", args.bind, args.data_root.display());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
