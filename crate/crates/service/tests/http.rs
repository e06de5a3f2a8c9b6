mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine as _;
use common::*;
use serde_json::json;
use vocalize_core::audio::encode_wav16;
use vocalize_core::synth::shaped_tone;
use vocalize_service::app::MessageResponse;

const AT: &str = "2024-07-17T10:05:00Z";

fn short_wav() -> Vec<u8> {
    encode_wav16(&shaped_tone(&[1.0; 40], 0.05, 16_000, 220.0, 0.5))
}

#[tokio::test]
async fn health_and_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, body) = get(&app, "/healthz").await;
    assert_eq!((status, json(&body)), (StatusCode::OK, json!({"status": "ok"})));

    let (status, body) = get(&app, "/campaigns/nope/leaderboard").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let body = json(&body);
    assert_eq!(body["error"], "unknown_campaign");
    assert!(body["message"].is_string());

    onboard(&app, "u1").await;
    let (status, body) = get(&app, "/campaigns/berlin-e2e/users/ghost/stats").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["error"], "unknown_user");
}

#[tokio::test]
async fn create_show_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let definition = json(&fixture("e2e/campaign.json"));
    let (status, created) = post_json(&app, "/campaigns", definition.clone()).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["id"], "berlin-e2e");
    assert_eq!(created["contour"]["bins"].as_array().unwrap().len(), 40);
    assert!(dir.path().join("campaigns/berlin-e2e.json").exists());

    let (status, shown) = get(&app, "/campaigns/berlin-e2e").await;
    assert_eq!((status, json(&shown)), (StatusCode::OK, created.clone()));
    let (_, listed) = get(&app, "/campaigns").await;
    assert_eq!(json(&listed), json!([created]));

    let (status, body) = post_json(&app, "/campaigns", definition.clone()).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("campaign_exists")));

    let mut bad = definition.clone();
    bad["id"] = json!("other");
    bad["ends_at"] = bad["starts_at"].clone();
    let (status, body) = post_json(&app, "/campaigns", bad).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_schedule")));

    let request = Request::post("/campaigns").body(Body::from("{not json")).unwrap();
    let (status, body) = send(&app, request).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"], "invalid_json");
}

#[tokio::test]
async fn create_from_silhouette() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let definition = json!({
        "id": "skyline",
        "catch_phrase": "I love Berlin",
        "silhouette": {"pgm_base64": base64::engine::general_purpose::STANDARD.encode(fixture("e2e/berlin.pgm"))},
        "starts_at": "2024-07-17T08:00:00Z",
        "ends_at": "2024-07-19T20:00:00Z"
    });
    let (status, created) = post_json(&app, "/campaigns", definition).await;
    assert_eq!(status, StatusCode::CREATED);
    let bundled = json(&fixture("e2e/campaign.json"));
    assert_eq!(created["contour"]["bins"], bundled["contour"]["bins"]);
}

#[tokio::test]
async fn first_contact_and_fresh_leaderboard() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post_json(&app, "/campaigns", json(&fixture("e2e/campaign.json"))).await;

    let (status, body) = get(&app, "/campaigns/berlin-e2e/leaderboard").await;
    assert_eq!((status, json(&body)), (StatusCode::OK, json!([])));

    let (status, body) = text(&app, "berlin-e2e", "u1", "hi", AT).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!body["outbound"].as_array().unwrap().is_empty());
    assert_eq!(body["phase"], "rules_explained");
    assert_eq!(body["attempt"], serde_json::Value::Null);

    let (_, funnel) = get(&app, "/campaigns/berlin-e2e/reports/funnel").await;
    let funnel = json(&funnel);
    assert_eq!(funnel["potential_leads"], 1);
    assert_eq!(funnel["leads"], 0);

    let (status, body) = get(&app, "/campaigns/berlin-e2e/reports/concentration").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["participant_fraction"], serde_json::Value::Null);
}

#[tokio::test]
async fn scored_recording_reports_rank_and_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    onboard(&app, "u1").await;
    let (status, body) = audio(&app, "berlin-e2e", "u1", &fixture("e2e/attempt.wav"), AT).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let response: MessageResponse = serde_json::from_slice(&body).unwrap();
    let attempt = response.attempt.unwrap();
    assert_eq!((attempt.rank, attempt.attempt_count, attempt.gap_to_next), (1, 1, None));
    assert_eq!(
        serde_json::to_string(&attempt).unwrap(),
        String::from_utf8(fixture("e2e/expected_result.json")).unwrap().trim_end()
    );
    assert!(response.outbound[0].contains(&format!("{:.2}", attempt.combined)));

    // A second player trails the first and sees the gap.
    onboard(&app, "u2").await;
    let weaker = encode_wav16(&shaped_tone(&[1.0; 40], 2.0, 16_000, 220.0, 0.5));
    let (status, body) = post_json(
        &app,
        "/campaigns/berlin-e2e/messages",
        json!({"user_id": "u2", "kind": "audio", "at": AT,
               "content": base64::engine::general_purpose::STANDARD.encode(&weaker)}),
    )
    .await;
    // Unknown recording: no transcript, so no attempt.
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"], "provider_unavailable");
    assert!(!body["outbound"].as_array().unwrap().is_empty());

    let (_, stats) = get(&app, "/campaigns/berlin-e2e/users/u1/stats").await;
    let stats = json(&stats);
    assert_eq!((stats["rank"].clone(), stats["attempt_count"].clone()), (json!(1), json!(1)));
    let (_, board) = get(&app, "/campaigns/berlin-e2e/leaderboard?top_k=5").await;
    assert_eq!(json(&board).as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    onboard(&app, "u1").await;

    let (status, body) = audio(&app, "berlin-e2e", "u1", &short_wav(), AT).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json(&body)["error"], "recording_rejected");

    let (status, body) = audio(&app, "berlin-e2e", "u1", b"RIFF-not-really", AT).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"], "invalid_audio");

    let before = log_lines(dir.path(), "berlin-e2e");
    let (status, body) = text(&app, "berlin-e2e", "u1", "hi", "2024-08-01T00:00:00Z").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "campaign_closed");
    assert_eq!(log_lines(dir.path(), "berlin-e2e"), before);

    let (status, body) = get(&app, "/campaigns/berlin-e2e/reports/concentration?share=1.5").await;
    assert_eq!((status, json(&body)["error"].clone()), (StatusCode::BAD_REQUEST, json!("invalid_share")));
    let (status, _) = get(&app, "/campaigns/berlin-e2e/leaderboard?top_k=many").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = post_json(
        &app,
        "/campaigns/berlin-e2e/messages",
        json!({"user_id": "u1", "kind": "video", "content": "x"}),
    )
    .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_json")));

    let huge = vec![0u8; 11 * 1024 * 1024];
    let (status, _) = audio(&app, "berlin-e2e", "u1", &huge, AT).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn audio_before_sign_up_is_answered_not_scored() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    post_json(&app, "/campaigns", json(&fixture("e2e/campaign.json"))).await;
    text(&app, "berlin-e2e", "u1", "hi", AT).await;
    let (status, body) = audio(&app, "berlin-e2e", "u1", &fixture("e2e/attempt.wav"), AT).await;
    assert_eq!(status, StatusCode::OK);
    let body = json(&body);
    assert_eq!(body["attempt"], serde_json::Value::Null);
    assert_eq!(body["phase"], "rules_explained");
}

#[tokio::test]
async fn reads_append_nothing_and_writes_append() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    onboard(&app, "u1").await;
    let mut count = log_lines(dir.path(), "berlin-e2e");
    assert!(count >= 6);

    let (status, _) = audio(&app, "berlin-e2e", "u1", &fixture("e2e/attempt.wav"), AT).await;
    assert_eq!(status, StatusCode::OK);
    assert!(log_lines(dir.path(), "berlin-e2e") > count);
    count = log_lines(dir.path(), "berlin-e2e");

    for uri in [
        "/campaigns",
        "/campaigns/berlin-e2e",
        "/campaigns/berlin-e2e/leaderboard",
        "/campaigns/berlin-e2e/users/u1/stats",
        "/campaigns/berlin-e2e/reports/funnel",
        "/campaigns/berlin-e2e/reports/concentration?share=0.5",
        "/healthz",
    ] {
        let (status, _) = get(&app, uri).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
    }
    assert_eq!(log_lines(dir.path(), "berlin-e2e"), count);

    let (status, _) = text(&app, "berlin-e2e", "u1", "what is my rank", AT).await;
    assert_eq!(status, StatusCode::OK);
    assert!(log_lines(dir.path(), "berlin-e2e") > count);
}

#[tokio::test]
async fn restart_reproduces_reads() {
    let dir = tempfile::tempdir().unwrap();
    let uris = [
        "/campaigns/berlin-e2e/leaderboard",
        "/campaigns/berlin-e2e/users/u1/stats",
        "/campaigns/berlin-e2e/users/u2/stats",
        "/campaigns/berlin-e2e/reports/funnel",
        "/campaigns/berlin-e2e/reports/concentration",
    ];
    let before = {
        let app = app(dir.path());
        onboard(&app, "u1").await;
        onboard(&app, "u2").await;
        audio(&app, "berlin-e2e", "u1", &fixture("e2e/attempt.wav"), AT).await;
        audio(&app, "berlin-e2e", "u2", &fixture("e2e/attempt.wav"), "2024-07-17T10:06:00Z").await;
        let mut out = Vec::new();
        for uri in uris {
            out.push(get(&app, uri).await);
        }
        out
    };
    let app = app(dir.path());
    for (uri, expected) in uris.iter().zip(before) {
        assert_eq!(get(&app, uri).await, expected, "{uri}");
    }
    // Registered users resume competing after the restart.
    let (_, body) = text(&app, "berlin-e2e", "u2", "what is my rank", AT).await;
    assert_eq!(body["phase"], "competing");
    assert!(body["outbound"][0].as_str().unwrap().contains("rank 2"));
}

#[tokio::test]
async fn bundled_fixture_funnels() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures_dir().join("data"), dir.path());
    let app = app(dir.path());
    let (status, body) = get(&app, "/campaigns/wearedevelopers-2024/reports/funnel").await;
    assert_eq!(status, StatusCode::OK);
    let f = json(&body);
    assert_eq!(
        (f["leads_pct"].as_f64(), f["participants_pct"].as_f64(), f["recurring_pct"].as_f64()),
        (Some(71.16), Some(68.60), Some(64.42))
    );
    assert_eq!((f["text_share"].as_f64(), f["audio_share"].as_f64()), (Some(25.0), Some(75.0)));

    let (_, body) = get(&app, "/campaigns/wearedevelopers-2024/reports/concentration?share=0.8").await;
    let c = json(&body);
    assert_eq!(c["participant_pct"].as_f64(), Some(24.07));
    let curve = c["curve"].as_array().unwrap();
    assert_eq!(curve.first().unwrap(), &json!([0.0, 0.0]));
    assert_eq!(curve.last().unwrap(), &json!([1.0, 1.0]));
}

#[tokio::test]
async fn contour_preview() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let request = Request::post("/contour").body(Body::from(fixture("e2e/berlin.pgm"))).unwrap();
    let (status, body) = send(&app, request).await;
    assert_eq!(status, StatusCode::OK);
    let bundled = json(&fixture("e2e/campaign.json"));
    assert_eq!(json(&body)["bins"], bundled["contour"]["bins"]);

    let request = Request::post("/contour").body(Body::from("P2 nope")).unwrap();
    let (status, body) = send(&app, request).await;
    assert_eq!((status, json(&body)["error"].clone()), (StatusCode::BAD_REQUEST, json!("invalid_contour")));
}
