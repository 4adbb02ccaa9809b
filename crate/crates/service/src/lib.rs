//! HTTP annotation service: a human labels the batches an active-learning
//! strategy queries, and the session advances one cycle per resolved batch.
//!
//! | Route | Method | Body / response |
//! |-------|--------|-----------------|
//! | `/session` | POST | [`SessionConfig`] → `{session_id, progress}` |
//! | `/session/{id}/batch` | GET | [`BatchView`] |
//! | `/session/{id}/labels` | POST | `{labels: {id: class \| "skip"}}` → [`SubmitOutcome`] |
//! | `/session/{id}/progress` | GET | `{progress: Progress}` |
//!
//! Each session lives in its own directory under the store root and is
//! replayed from its event log at startup.

mod api;
pub mod session;
mod store;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

pub use api::router;
pub use session::{BatchView, Event, Progress, SampleStatus, Session, SessionConfig, SubmitOutcome};
pub use store::SessionStore;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    NotFound(String),

    #[error("{0}")]
    BadRequest(String),

    #[error("corrupt session: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Core(#[from] ndsal::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;

/// Open the sessions under `root` and serve them on `addr` until the
/// process stops.
pub async fn serve(addr: SocketAddr, root: &Path) -> Result<()> {
    let store = Arc::new(SessionStore::open(root)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} sessions from {} on {}", store.len(), root.display(), listener.local_addr()?);
    axum::serve(listener, router(store)).await?;
    Ok(())
}
