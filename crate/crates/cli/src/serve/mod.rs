pub mod aa;
pub mod rp;
pub mod subject;

use std::io::Write;
use std::net::SocketAddr;

use anyhow::{Context, Result};
use axum::Router;

/// Binds, announces the bound address on stdout, and serves until ctrl-c.
pub async fn listen(addr: SocketAddr, role: &str, app: Router) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    let bound = listener.local_addr()?;
    {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{role} listening on http://{bound}")?;
        out.flush()?;
    }
    tracing::info!(%bound, role, "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub async fn healthz() -> &'static str {
    "ok"
}
