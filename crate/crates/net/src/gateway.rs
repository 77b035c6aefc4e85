//! HTTP/WebSocket bridge for the HMI.

use std::io;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pufguard_core::fault::FaultKind;
use pufguard_core::harness::HoldingWrite;
use pufguard_core::plc::modbus::ExceptionCode;
use pufguard_core::plc::{HR_ENROLL, HR_TEMPORAL_RESET};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;

use crate::live::{LiveError, LiveHandle};

pub const DEFAULT_GATEWAY_PORT: u16 = 8080;
/// Wall-clock period of the snapshot stream.
pub const STREAM_PERIOD: Duration = Duration::from_millis(100);

#[derive(Deserialize)]
struct RegisterWrite {
    addr: u16,
    value: u16,
}

#[derive(Deserialize)]
struct EnrollRequest {
    on: bool,
}

#[derive(Deserialize)]
struct InjectRequest {
    kind: String,
    duration: f64,
    #[serde(default)]
    magnitude: Option<f64>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<LiveError> for ApiError {
    fn from(e: LiveError) -> Self {
        match e {
            LiveError::Rejected(ExceptionCode::IllegalDataAddress) => {
                ApiError(StatusCode::NOT_FOUND, e.to_string())
            }
            LiveError::Rejected(_) | LiveError::Invalid(_) => {
                ApiError(StatusCode::BAD_REQUEST, e.to_string())
            }
            LiveError::Stopped => ApiError(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
        }
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

async fn state(State(h): State<LiveHandle>) -> impl IntoResponse {
    Json(h.snapshot().as_ref().clone())
}

async fn write_register(
    State(h): State<LiveHandle>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: RegisterWrite = parse(&body)?;
    h.write(HoldingWrite::single(req.addr, req.value)).await?;
    Ok(Json(json!({ "addr": req.addr, "value": req.value })))
}

async fn reset_temporal(State(h): State<LiveHandle>) -> Result<impl IntoResponse, ApiError> {
    h.write(HoldingWrite::single(HR_TEMPORAL_RESET, 1)).await?;
    Ok(Json(json!({ "reset": true })))
}

async fn enroll(State(h): State<LiveHandle>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: EnrollRequest = parse(&body)?;
    h.write(HoldingWrite::single(HR_ENROLL, u16::from(req.on)))
        .await?;
    Ok(Json(json!({ "enroll": req.on })))
}

async fn inject(State(h): State<LiveHandle>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: InjectRequest = parse(&body)?;
    let kind = FaultKind::parse(&req.kind).ok_or_else(|| {
        ApiError(
            StatusCode::BAD_REQUEST,
            format!("unknown fault kind {:?}", req.kind),
        )
    })?;
    let event = h.inject(kind, req.duration, req.magnitude).await?;
    Ok(Json(event))
}

async fn stream(State(h): State<LiveHandle>, ws: WebSocketUpgrade) -> impl IntoResponse {
    ws.on_upgrade(move |socket| push_snapshots(socket, h))
}

async fn push_snapshots(mut socket: WebSocket, h: LiveHandle) {
    let mut every = tokio::time::interval(STREAM_PERIOD);
    loop {
        every.tick().await;
        let text = serde_json::to_string(h.snapshot().as_ref()).expect("snapshot serializes");
        if socket.send(Message::Text(text.into())).await.is_err() {
            return;
        }
    }
}

pub fn router(handle: LiveHandle) -> Router {
    Router::new()
        .route("/api/state", get(state))
        .route("/api/registers", post(write_register))
        .route("/api/reset-temporal", post(reset_temporal))
        .route("/api/enroll", post(enroll))
        .route("/api/inject", post(inject))
        .route("/api/stream", get(stream))
        .with_state(handle)
}

pub async fn serve_gateway(listener: TcpListener, handle: LiveHandle) -> io::Result<()> {
    axum::serve(listener, router(handle)).await
}
