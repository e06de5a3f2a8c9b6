#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;
use vocalize_core::conversation::{default_exemplars, Dialog, IntentClassifier, DEFAULT_INTENT_THRESHOLD};
use vocalize_core::scoring::FixtureTranscriber;
use vocalize_service::app::{router, AppState};
use vocalize_service::config::ServiceConfig;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> Vec<u8> {
    std::fs::read(fixtures_dir().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Offline service over `data_dir` using the bundled transcript map.
pub fn app(data_dir: &Path) -> Router {
    let config = ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        ..ServiceConfig::default()
    };
    let transcriber = FixtureTranscriber::from_json(&fixture("e2e/transcripts.json")).unwrap();
    let dialog = Dialog::offline(IntentClassifier::offline(&default_exemplars(), DEFAULT_INTENT_THRESHOLD));
    router(Arc::new(AppState::new(config, dialog, Arc::new(transcriber)).unwrap()))
}

pub async fn send(app: &Router, request: Request<Body>) -> (StatusCode, Vec<u8>) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, json: serde_json::Value) -> (StatusCode, serde_json::Value) {
    let request = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(json.to_string()))
        .unwrap();
    let (status, body) = send(app, request).await;
    (status, serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null))
}

pub fn json(body: &[u8]) -> serde_json::Value {
    serde_json::from_slice(body).unwrap()
}

pub async fn text(app: &Router, campaign: &str, user: &str, content: &str, at: &str) -> (StatusCode, serde_json::Value) {
    post_json(
        app,
        &format!("/campaigns/{campaign}/messages"),
        serde_json::json!({"user_id": user, "kind": "text", "content": content, "at": at}),
    )
    .await
}

const BOUNDARY: &str = "vocalize-test-boundary";

/// Multipart upload of a WAV voice note.
pub async fn audio(app: &Router, campaign: &str, user: &str, wav: &[u8], at: &str) -> (StatusCode, Vec<u8>) {
    let mut body = Vec::new();
    for (name, value) in [("user_id", user), ("at", at)] {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes(),
        );
    }
    body.extend_from_slice(
        format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"audio\"; filename=\"note.wav\"\r\nContent-Type: audio/wav\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(wav);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    let request = Request::post(format!("/campaigns/{campaign}/messages"))
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap();
    send(app, request).await
}

/// Creates the bundled end-to-end campaign and walks `user` through sign-up.
pub async fn onboard(app: &Router, user: &str) {
    let (status, _) = post_json(app, "/campaigns", json(&fixture("e2e/campaign.json"))).await;
    assert!(status == StatusCode::CREATED || status == StatusCode::CONFLICT, "{status}");
    for content in ["hi", "Ana", &format!("{user}@example.com")] {
        let (status, body) = text(app, "berlin-e2e", user, content, "2024-07-17T10:00:00Z").await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
}

pub fn log_lines(data_dir: &Path, campaign: &str) -> usize {
    std::fs::read_to_string(data_dir.join("logs").join(format!("{campaign}.jsonl")))
        .map(|s| s.lines().count())
        .unwrap_or(0)
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}
