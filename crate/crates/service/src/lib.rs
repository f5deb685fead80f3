//! HTTP service for playing with humans in the loop.
//!
//! Two session modes: a human answers the agent's questions as the oracle,
//! or a human reads a finished dialogue and guesses the target. Guesses are
//! appended to a JSON Lines record log and exported as CSV.

pub mod api;
pub mod error;
pub mod records;
pub mod session;
pub mod state;

use std::net::SocketAddr;
use std::path::Path;
use std::time::{Duration, Instant};

pub use api::router;
pub use error::{ApiError, SetupError};
pub use records::{AnnotationRecord, LogRecord, RecordLog};
pub use session::{Mode, Provenance};
pub use state::{AppState, CreateSession, ServiceConfig};

const SWEEP_INTERVAL: Duration = Duration::from_secs(60);

/// Serves until the process is stopped, expiring idle sessions once a minute.
pub async fn serve(state: AppState, addr: SocketAddr, static_dir: Option<&Path>) -> std::io::Result<()> {
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(SWEEP_INTERVAL);
        loop {
            tick.tick().await;
            let dropped = sweeper.expire_idle(Instant::now());
            if dropped > 0 {
                tracing::info!(dropped, "expired idle sessions");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state, static_dir)).await
}
