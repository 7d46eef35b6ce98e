use std::collections::HashMap;
use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use medcurate::eval::{PairChoice, QaConfig, SideOrder};
use medcurate::synthetic::{clip_corpus, video_corpus};
use medcurate_pipeline::review::{clip_media_index, router, AppState, Session, Store};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &Path) -> Router {
    app_with(dir, HashMap::new())
}

fn app_with(dir: &Path, clips: HashMap<String, medcurate_pipeline::review::ClipMedia>) -> Router {
    let store = Store::open(dir.join("review")).unwrap();
    router(AppState::new(store, dir, clips, QaConfig::default()))
}

async fn call(app: &Router, method: &str, uri: &str, rater: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(r) = rater {
        req = req.header("x-rater-id", r);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn raw(app: &Router, uri: &str, range: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().uri(uri);
    if let Some(r) = range {
        req = req.header("range", r);
    }
    let res = app.clone().oneshot(req.body(Body::empty()).unwrap()).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn items(n: usize) -> Vec<Value> {
    (0..n).map(|i| json!({ "item_id": format!("clip{i:02}") })).collect()
}

#[tokio::test]
async fn stage_qa_session_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, created) = call(&app, "POST", "/api/sessions", None, Some(json!({
        "session_id": "qa-ocr", "kind": "stage_qa", "stage": "ocr", "items": items(10)
    }))).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    assert_eq!(created["status"], "open");

    let (_, report) = call(&app, "GET", "/api/sessions/qa-ocr/report", None, None).await;
    assert_eq!(report["unrated"].as_array().unwrap().len(), 10);
    assert!(report["gate"].is_null());

    for n in 0..10 {
        let level = if n == 0 { "noisy" } else if n % 2 == 0 { "clean" } else { "slightly_noisy" };
        let (status, body) = call(&app, "POST", &format!("/api/sessions/qa-ocr/items/{n}/rating"), Some("ann"), Some(json!({ "value": level }))).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
    }
    let (_, session) = call(&app, "GET", "/api/sessions/qa-ocr", Some("ann"), None).await;
    assert_eq!(session["status"], "complete");
    assert_eq!(session["progress"]["ann"], 10);
    assert!(session["next_item"].is_null());

    let (status, report) = call(&app, "GET", "/api/sessions/qa-ocr/report", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["gate"]["rated"], 10);
    assert_eq!(report["gate"]["passing"], 9);
    assert_eq!(report["gate"]["pass_rate"], 0.9);
    assert_eq!(report["gate"]["passed"], false);
}

#[tokio::test]
async fn invalid_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, "POST", "/api/sessions", None, Some(json!({ "session_id": "s1", "kind": "stage_qa", "items": items(2) }))).await;

    let (status, body) = call(&app, "POST", "/api/sessions/s1/items/0/rating", Some("r"), Some(json!({ "value": "meh" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "value");

    let (status, _) = call(&app, "POST", "/api/sessions/s1/items/0/rating", None, Some(json!({ "value": "clean" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, "POST", "/api/sessions/s1/items/0/rating", Some("r"), Some(json!({ "value": "clean" }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = call(&app, "POST", "/api/sessions/s1/items/0/rating", Some("r"), Some(json!({ "value": "noisy" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    assert_eq!(call(&app, "GET", "/api/sessions/nope", None, None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/api/sessions/s1/items/2", None, None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(
        call(&app, "POST", "/api/sessions/s1/items/9/rating", Some("r"), Some(json!({ "value": "clean" }))).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&app, "POST", "/api/sessions", None, Some(json!({ "session_id": "s1", "kind": "stage_qa", "items": items(1) }))).await.0,
        StatusCode::CONFLICT
    );
    assert_eq!(
        call(&app, "POST", "/api/sessions", None, Some(json!({ "kind": "stage_qa", "items": [] }))).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        call(&app, "POST", "/api/sessions", None, Some(json!({ "kind": "survey", "items": items(1) }))).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
}

fn pairwise_request(n: usize) -> Value {
    json!({
        "session_id": "pw",
        "kind": "pairwise",
        "model_x": "alphanet",
        "model_y": "rivalnet",
        "seed": 11,
        "items": (0..n).map(|i| json!({
            "item_id": format!("p{i:02}"),
            "prompt": format!("A surgeon closes incision {i}"),
            "media_x": format!("gen/alphanet/p{i:02}.mp4"),
            "media_y": format!("gen/rivalnet/p{i:02}.mp4"),
        })).collect::<Vec<_>>(),
    })
}

#[tokio::test]
async fn pairwise_session_stays_blinded_until_complete() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..4 {
        for model in ["alphanet", "rivalnet"] {
            let path = dir.path().join(format!("gen/{model}/p{i:02}.mp4"));
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, format!("{model}-{i}")).unwrap();
        }
    }
    let app = app(dir.path());
    let (status, created) = call(&app, "POST", "/api/sessions", None, Some(pairwise_request(4))).await;
    assert_eq!(status, StatusCode::CREATED);
    let leak = |v: &Value| {
        let text = v.to_string();
        text.contains("alphanet") || text.contains("rivalnet")
    };
    assert!(!leak(&created));

    let session: Session = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("review/sessions/pw.json")).unwrap(),
    )
    .unwrap();
    let map = session.blinding.clone().unwrap();

    for n in 0..4 {
        let (_, item) = call(&app, "GET", &format!("/api/sessions/pw/items/{n}"), Some("expert"), None).await;
        assert!(!leak(&item), "{item}");
        assert!(item.get("item_id").is_none());
        // Side A serves whichever model the blinding map put there.
        let url_a = item["media"][0]["url"].as_str().unwrap();
        let (status, bytes) = raw(&app, url_a, None).await;
        assert_eq!(status, StatusCode::OK);
        let item_id = format!("p{n:02}");
        let expected_a = match map.sides[&item_id] {
            SideOrder::XOnA => "alphanet",
            SideOrder::XOnB => "rivalnet",
        };
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{expected_a}-{n}"));

        let (_, summary) = call(&app, "GET", "/api/sessions/pw", Some("expert"), None).await;
        assert!(!leak(&summary));
        let (status, report) = call(&app, "GET", "/api/sessions/pw/report", None, None).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert!(!leak(&report));

        // Always prefer side A on text alignment; B on quality; both lose on accuracy.
        let (status, stored) = call(&app, "POST", &format!("/api/sessions/pw/items/{n}/rating"), Some("expert"), Some(json!({
            "choices": { "text_alignment": "A", "medical_accuracy": "both_loss", "visual_quality": "B" }
        }))).await;
        assert_eq!(status, StatusCode::CREATED);
        assert!(!leak(&stored));
    }

    let x_on_a = map.sides.values().filter(|s| **s == SideOrder::XOnA).count();
    let (status, report) = call(&app, "GET", "/api/sessions/pw/report", None, None).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    let tally = &report["tally"]["dimensions"];
    assert_eq!(tally["text_alignment"]["model_x_wins"], x_on_a);
    assert_eq!(tally["text_alignment"]["model_y_wins"], 4 - x_on_a);
    assert_eq!(tally["visual_quality"]["model_x_wins"], 4 - x_on_a);
    assert_eq!(tally["medical_accuracy"]["both_loss"], 4);
    let (_, summary) = call(&app, "GET", "/api/sessions/pw", None, None).await;
    assert_eq!(summary["models"]["model_x"], "alphanet");
    let _ = PairChoice::A;
}

#[tokio::test]
async fn pairwise_needs_all_three_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, "POST", "/api/sessions", None, Some(pairwise_request(1))).await;
    let (status, body) = call(&app, "POST", "/api/sessions/pw/items/0/rating", Some("e"), Some(json!({
        "choices": { "text_alignment": "A", "medical_accuracy": "B" }
    }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "choices.visual_quality");
    let (status, body) = call(&app, "POST", "/api/sessions/pw/items/0/rating", Some("e"), Some(json!({
        "choices": { "text_alignment": "A", "medical_accuracy": "B", "visual_quality": "C" }
    }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "choices.visual_quality");
}

#[tokio::test]
async fn distortion_session_takes_three_raters_and_reports_warping_error() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, "POST", "/api/sessions", None, Some(json!({ "session_id": "d", "kind": "distortion", "items": items(10) }))).await;
    let (_, item) = call(&app, "GET", "/api/sessions/d/items/0", None, None).await;
    assert_eq!(item["rubric"]["options"][0]["criteria"], "No deformation was observed, and the image is fully intact.");

    for n in 0..10 {
        // Items 0..3 get two severe ratings and are unacceptable.
        let levels = if n < 3 { ["severe", "moderate", "none"] } else { ["none", "minor", "severe"] };
        for (rater, level) in ["r1", "r2", "r3"].iter().zip(levels) {
            let (status, _) = call(&app, "POST", &format!("/api/sessions/d/items/{n}/rating"), Some(rater), Some(json!({ "value": level }))).await;
            assert_eq!(status, StatusCode::CREATED);
        }
    }
    let (status, _) = call(&app, "POST", "/api/sessions/d/items/0/rating", Some("r4"), Some(json!({ "value": "none" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, report) = call(&app, "GET", "/api/sessions/d/report", None, None).await;
    assert_eq!(report["status"], "complete");
    assert_eq!(report["report"]["unacceptable"], 3);
    assert_eq!(report["report"]["acceptable"], 7);
    assert_eq!(report["report"]["warping_error"], 30.0);
    assert_eq!(report["report"]["kappa"]["raters"], json!(["r1", "r2", "r3"]));
}

#[tokio::test]
async fn ratings_survive_restart_and_resume_point_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    {
        let app = app(dir.path());
        call(&app, "POST", "/api/sessions", None, Some(json!({ "session_id": "s", "kind": "stage_qa", "items": items(3) }))).await;
        call(&app, "POST", "/api/sessions/s/items/0/rating", Some("r"), Some(json!({ "value": "clean" }))).await;
    }
    let app = app(dir.path());
    let (_, summary) = call(&app, "GET", "/api/sessions/s", Some("r"), None).await;
    assert_eq!(summary["next_item"], 1);
    let (status, _) = call(&app, "POST", "/api/sessions/s/items/0/rating", Some("r"), Some(json!({ "value": "clean" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let lines = std::fs::read_to_string(dir.path().join("review/ratings.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 1);
}

#[tokio::test]
async fn concurrent_ratings_are_all_stored_once() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, "POST", "/api/sessions", None, Some(json!({ "session_id": "c", "kind": "stage_qa", "items": items(20), "required_raters": 5 }))).await;
    let mut handles = Vec::new();
    for rater in 0..5 {
        for n in 0..20 {
            for _attempt in 0..2 {
                let app = app.clone();
                handles.push(tokio::spawn(async move {
                    call(&app, "POST", &format!("/api/sessions/c/items/{n}/rating"), Some(&format!("r{rater}")), Some(json!({ "value": "clean" }))).await.0
                }));
            }
        }
    }
    let mut created = 0;
    for h in handles {
        match h.await.unwrap() {
            StatusCode::CREATED => created += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!(created, 100);
    let lines = std::fs::read_to_string(dir.path().join("review/ratings.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 100);
    let (_, summary) = call(&app, "GET", "/api/sessions/c", None, None).await;
    assert_eq!(summary["status"], "complete");
}

#[tokio::test]
async fn clip_media_served_from_source_video_with_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let videos = video_corpus(1, 2);
    let clips = clip_corpus(1, 3);
    for v in &videos {
        let path = dir.path().join(&v.media_path);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, b"0123456789").unwrap();
    }
    let app = app_with(dir.path(), clip_media_index(&clips, &videos));
    let clip = &clips[1];
    call(&app, "POST", "/api/sessions", None, Some(json!({ "session_id": "m", "kind": "stage_qa", "items": [{ "item_id": clip.clip_id }] }))).await;
    let (_, item) = call(&app, "GET", "/api/sessions/m/items/0", None, None).await;
    assert_eq!(item["window"]["start_s"], clip.start_index);
    let url = item["media"][0]["url"].as_str().unwrap();
    assert!(url.contains("%23"), "{url}");
    let (status, bytes) = raw(&app, url, None).await;
    assert_eq!((status, bytes.as_slice()), (StatusCode::OK, &b"0123456789"[..]));
    let (status, bytes) = raw(&app, url, Some("bytes=2-4")).await;
    assert_eq!((status, bytes.as_slice()), (StatusCode::PARTIAL_CONTENT, &b"234"[..]));
    assert_eq!(raw(&app, "/media/unknown", None).await.0, StatusCode::NOT_FOUND);
}
