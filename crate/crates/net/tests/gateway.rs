mod common;

use std::time::Duration;

use futures::StreamExt;
use pufguard_core::harness::Snapshot;
use pufguard_core::plc::{HR_ENROLL, HR_LOW_SP};
use pufguard_net::{serve_gateway, LiveHandle};
use reqwest::StatusCode;
use serde_json::{json, Value};

async fn start(acceleration: f64) -> (LiveHandle, String) {
    let handle = common::live(acceleration);
    let (listener, addr) = common::bind().await;
    tokio::spawn(serve_gateway(listener, handle.clone()));
    handle.wait_past(0).await.unwrap();
    (handle, format!("http://{addr}"))
}

async fn state(base: &str) -> Snapshot {
    reqwest::get(format!("{base}/api/state"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}

async fn post(base: &str, path: &str, body: Value) -> reqwest::Response {
    reqwest::Client::new()
        .post(format!("{base}{path}"))
        .json(&body)
        .send()
        .await
        .unwrap()
}

async fn wait_for(handle: &LiveHandle, seconds: f64) {
    let target = handle.snapshot().tick + (seconds * handle.tick_hz()) as u64;
    handle.wait_past(target).await.unwrap();
}

#[tokio::test]
async fn state_reports_normal_operation() {
    let (handle, base) = start(30.0).await;
    let raw: Value = reqwest::get(format!("{base}/api/state"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    for key in [
        "sim_time",
        "true_level",
        "reported_level",
        "registers",
        "code",
        "temporal",
        "enrollment_coverage",
    ] {
        assert!(raw.get(key).is_some(), "missing {key}");
    }
    for key in ["diff", "enrolled_max", "latched"] {
        assert!(raw["temporal"].get(key).is_some(), "missing temporal.{key}");
    }
    let s = state(&base).await;
    assert_eq!(s.code, 3);
    assert_eq!(s.enrollment_coverage, 1.0);
    assert_eq!(s.registers.holding[6], 3);
    handle.stop();
}

#[tokio::test]
async fn register_writes_and_errors() {
    let (handle, base) = start(30.0).await;
    let r = post(
        &base,
        "/api/registers",
        json!({"addr": HR_LOW_SP, "value": 4200}),
    )
    .await;
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(
        state(&base).await.registers.holding[HR_LOW_SP as usize],
        4200
    );

    let r = post(&base, "/api/registers", json!({"addr": 42, "value": 1})).await;
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let r = post(&base, "/api/registers", json!({"addr": "x"})).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = reqwest::Client::new()
        .post(format!("{base}/api/registers"))
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let r = post(&base, "/api/enroll", json!({"on": true})).await;
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(state(&base).await.registers.holding[HR_ENROLL as usize], 1);
    post(&base, "/api/enroll", json!({"on": false})).await;
    assert_eq!(
        post(&base, "/api/enroll", json!({})).await.status(),
        StatusCode::BAD_REQUEST
    );
    handle.stop();
}

#[tokio::test]
async fn spike_alert_then_reset() {
    let (handle, base) = start(30.0).await;
    let r = post(
        &base,
        "/api/inject",
        json!({"kind": "spike", "duration": 4.59, "magnitude": 100}),
    )
    .await;
    assert_eq!(r.status(), StatusCode::OK);
    let event: Value = r.json().await.unwrap();
    assert_eq!(event["kind"], "spike");
    wait_for(&handle, 0.5).await;
    let s = state(&base).await;
    assert_eq!(s.code, 1);
    assert!(s.temporal.latched);

    // latched after the spike is over
    wait_for(&handle, 8.0).await;
    assert_eq!(state(&base).await.code, 1);

    assert_eq!(
        post(&base, "/api/reset-temporal", json!({})).await.status(),
        StatusCode::OK
    );
    assert_eq!(state(&base).await.code, 3);

    let bad = post(
        &base,
        "/api/inject",
        json!({"kind": "meteor", "duration": 1.0}),
    )
    .await;
    assert_eq!(bad.status(), StatusCode::BAD_REQUEST);
    let bad = post(
        &base,
        "/api/inject",
        json!({"kind": "spike", "duration": -1.0}),
    )
    .await;
    assert_eq!(bad.status(), StatusCode::BAD_REQUEST);
    handle.stop();
}

#[tokio::test]
async fn websocket_streams_snapshots() {
    let (handle, base) = start(30.0).await;
    let url = base.replace("http://", "ws://") + "/api/stream";
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    let mut ticks = Vec::new();
    let started = std::time::Instant::now();
    for _ in 0..3 {
        let msg = tokio::time::timeout(Duration::from_secs(2), ws.next())
            .await
            .unwrap()
            .unwrap()
            .unwrap();
        let snap: Snapshot = serde_json::from_str(msg.to_text().unwrap()).unwrap();
        ticks.push(snap.tick);
    }
    assert!(ticks.windows(2).all(|w| w[1] > w[0]), "{ticks:?}");
    assert!(started.elapsed() >= Duration::from_millis(150));
    handle.stop();
}
