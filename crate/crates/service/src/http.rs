use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use log::info;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::device::DeviceRegistry;
use crate::error::{ServiceError, ServiceResult};
use crate::job::SequenceBundle;
use crate::orchestrator::{Orchestrator, ServiceConfig};

type Shared = State<Arc<Orchestrator>>;

async fn submit(State(orch): Shared, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let bundle: SequenceBundle =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("malformed bundle: {e}")))?;
    let job = orch.submit(bundle)?;
    Ok((StatusCode::CREATED, Json(job)))
}

async fn status(State(orch): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(orch.job(&id)?))
}

async fn result(State(orch): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    let text = orch.result(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text))
}

async fn workers(State(orch): Shared) -> impl IntoResponse {
    Json(orch.workers())
}

async fn heartbeat(State(orch): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(orch.heartbeat(&id)?))
}

pub fn router(orch: Arc<Orchestrator>) -> Router {
    Router::new()
        .route("/sequences", post(submit))
        .route("/sequences/{id}", get(status))
        .route("/sequences/{id}/result", get(result))
        .route("/workers", get(workers))
        .route("/workers/{id}/heartbeat", post(heartbeat))
        .with_state(orch)
}

pub struct RunningService {
    pub addr: SocketAddr,
    pub orchestrator: Arc<Orchestrator>,
    pub handle: JoinHandle<std::io::Result<()>>,
}

/// Binds the configured address (port 0 picks a free one) and serves in the
/// background.
pub async fn spawn(config: ServiceConfig, devices: DeviceRegistry) -> ServiceResult<RunningService> {
    let listener = TcpListener::bind((config.host.as_str(), config.port)).await?;
    let addr = listener.local_addr()?;
    let orchestrator = Orchestrator::start(config, devices)?;
    let app = router(Arc::clone(&orchestrator));
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok(RunningService {
        addr,
        orchestrator,
        handle,
    })
}

/// Serves with simulated workers until interrupted.
pub async fn serve(config: ServiceConfig) -> ServiceResult<()> {
    if config.workers == 0 {
        return Err(ServiceError::BadRequest("at least one worker is required".into()));
    }
    let devices = DeviceRegistry::simulated(config.workers, config.rt_factor);
    let listener = TcpListener::bind((config.host.as_str(), config.port)).await?;
    info!(
        "listening on {} with {} workers (real-time factor {}, seed {})",
        listener.local_addr()?,
        config.workers,
        config.rt_factor,
        config.seed
    );
    let app = router(Orchestrator::start(config, devices)?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
