use ampdx::engine::SymptomChecker;
use ampdx::service::{router, AppState, InferResponse};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, request: Request<Body>) -> (StatusCode, Value) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, body)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(uri: &str, body: &str) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn loaded() -> Router {
    router(AppState::loaded(SymptomChecker::demo()), None)
}

#[tokio::test]
async fn health_reports_the_load_state() {
    let state = AppState::empty();
    let app = router(state.clone(), None);
    let (status, body) = call(&app, get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["catalog_loaded"], false);

    let (status, _) = call(&app, get("/api/catalog")).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, _) = call(&app, post("/api/infer", "{}")).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);

    state.load(SymptomChecker::demo());
    let (_, body) = call(&app, get("/api/health")).await;
    assert_eq!(body["catalog_loaded"], true);
}

#[tokio::test]
async fn catalog_lists_ids_and_names() {
    let (status, body) = call(&loaded(), get("/api/catalog")).await;
    assert_eq!(status, StatusCode::OK);
    let symptoms = body["symptoms"].as_array().unwrap();
    assert_eq!(symptoms.len(), 27);
    assert_eq!(symptoms[0], json!({ "id": 0, "name": "redness" }));
    assert_eq!(body["diseases"].as_array().unwrap().len(), 28);
}

#[tokio::test]
async fn infer_returns_a_sorted_ranking() {
    let app = loaded();
    let request = r#"{"present": [0, 1], "absent": [14], "algorithm": "gvamp", "top_k": 5}"#;
    let (status, body) = call(&app, post("/api/infer", request)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let response: InferResponse = serde_json::from_value(body.clone()).unwrap();
    assert_eq!(response.ranking.len(), 5);
    assert!(response.ranking.windows(2).all(|w| w[0].score >= w[1].score));
    assert_eq!(response.diagnostics.algorithm, "gvamp");
    assert_eq!(response.request_echo.present, vec![0, 1]);

    let (_, again) = call(&app, post("/api/infer", request)).await;
    assert_eq!(body, again);
}

#[tokio::test]
async fn infer_defaults_apply() {
    let (status, body) = call(&loaded(), post("/api/infer", r#"{"present": [2]}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["ranking"].as_array().unwrap().len(), 3);
    assert_eq!(body["request_echo"]["algorithm"], "gvamp");
}

#[tokio::test]
async fn infer_rejects_bad_requests() {
    let app = loaded();
    let cases = [
        (r#"{"present": [99]}"#, StatusCode::BAD_REQUEST),
        (r#"{"present": [3], "absent": [3]}"#, StatusCode::BAD_REQUEST),
        (r#"{"present": [3], "top_k": 0}"#, StatusCode::BAD_REQUEST),
        (r#"{"present": [3], "top_k": 29}"#, StatusCode::BAD_REQUEST),
        (r#"{"present": "#, StatusCode::BAD_REQUEST),
        (r#"{"present": [3], "algorithm": "lasso"}"#, StatusCode::UNPROCESSABLE_ENTITY),
    ];
    for (request, expected) in cases {
        let (status, body) = call(&app, post("/api/infer", request)).await;
        assert_eq!(status, expected, "{request}");
        assert!(body["error"].is_string(), "{request}: {body}");
    }
}

#[tokio::test]
async fn openapi_document_is_served() {
    let (status, body) = call(&loaded(), get("/api/spec")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["openapi"].as_str().unwrap().starts_with("3."));
    assert!(body["paths"]["/api/infer"]["post"].is_object());
}

#[tokio::test]
async fn static_directory_is_served_outside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>ui</h1>").unwrap();
    let app = router(AppState::loaded(SymptomChecker::demo()), Some(dir.path()));
    let response = app.oneshot(get("/index.html")).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<h1>ui</h1>");
}
