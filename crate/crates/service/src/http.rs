//! HTTP front end. Submission only persists and enqueues; worker threads
//! pick jobs up from the queue independently.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crate::{Executor, JobKind, JobService, ServiceError};

#[derive(Debug, Deserialize)]
pub struct SubmitRequest {
    pub kind: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub idempotency_key: Option<String>,
}

fn error(status: StatusCode, message: String) -> Response {
    (status, Json(serde_json::json!({ "error": message }))).into_response()
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::InvalidInputs(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::StoreUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        };
        error(status, self.to_string())
    }
}

async fn submit(State(svc): State<Arc<JobService>>, Json(req): Json<SubmitRequest>) -> Response {
    let kind: JobKind = match req.kind.parse() {
        Ok(k) => k,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let joined = tokio::task::spawn_blocking(move || svc.submit_detailed(kind, req.inputs, req.idempotency_key.as_deref())).await;
    match joined {
        Ok(Ok(s)) => {
            let status = if s.created { StatusCode::CREATED } else { StatusCode::OK };
            (status, Json(s.job)).into_response()
        }
        Ok(Err(e)) => e.into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_job(State(svc): State<Arc<JobService>>, Path(id): Path<String>) -> Response {
    match tokio::task::spawn_blocking(move || svc.get_job(&id)).await {
        Ok(Ok(job)) => Json(job).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(svc: Arc<JobService>) -> Router {
    Router::new()
        .route("/jobs", post(submit))
        .route("/jobs/{id}", get(get_job))
        .route("/healthz", get(healthz))
        .with_state(svc)
}

/// A running server with its worker threads.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    shutdown_tx: Option<tokio::sync::oneshot::Sender<()>>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting requests, lets in-flight jobs finish and joins all
    /// threads.
    pub fn shutdown(mut self) {
        self.stop_all();
    }

    fn stop_all(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(tx) = self.shutdown_tx.take() {
            let _ = tx.send(());
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    /// Blocks until SIGINT/ctrl-c, then shuts down.
    pub fn wait_for_ctrl_c(mut self) -> std::io::Result<()> {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
        rt.block_on(tokio::signal::ctrl_c())?;
        log::info!("shutting down");
        self.stop_all();
        Ok(())
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_all();
    }
}

/// Recovers the store, starts `workers` worker threads and serves HTTP on
/// `bind` (port 0 picks a free port).
pub fn spawn(
    svc: JobService,
    bind: SocketAddr,
    workers: usize,
    executor: Arc<dyn Executor>,
) -> std::io::Result<ServerHandle> {
    let requeued = svc.recover().map_err(std::io::Error::other)?;
    if requeued > 0 {
        log::info!("requeued {requeued} jobs on startup");
    }
    let svc = Arc::new(svc);
    let stop = Arc::new(AtomicBool::new(false));
    let mut threads = Vec::new();
    for i in 0..workers.max(1) {
        let (svc, stop, executor) = (svc.clone(), stop.clone(), executor.clone());
        threads.push(
            std::thread::Builder::new()
                .name(format!("worker-{i}"))
                .spawn(move || svc.run_worker(executor.as_ref(), &stop))?,
        );
    }

    let listener = std::net::TcpListener::bind(bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(svc);
    threads.push(std::thread::Builder::new().name("http".into()).spawn(move || {
        let rt = match tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build() {
            Ok(rt) => rt,
            Err(e) => return log::error!("starting runtime: {e}"),
        };
        rt.block_on(async move {
            let listener = match tokio::net::TcpListener::from_std(listener) {
                Ok(l) => l,
                Err(e) => return log::error!("listener: {e}"),
            };
            let served = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            });
            if let Err(e) = served.await {
                log::error!("http server: {e}");
            }
        });
    })?);
    log::info!("listening on {addr} with {} workers", workers.max(1));
    Ok(ServerHandle { addr, stop, shutdown_tx: Some(shutdown_tx), threads })
}
