use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use prefxfer_core::formats::{parse_ratings, parse_report, parse_trace, parse_weights};
use prefxfer_core::irl::learn_weights;
use prefxfer_core::{rollout_predictions, shipped};
use prefxfer_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(config).unwrap())
}

fn app() -> Router {
    app_with(ServiceConfig::default())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["phase"], "rating-canonical");
    body["session_id"].as_str().unwrap().to_string()
}

/// Nominal ratings for a shipped task, rescaled to a 1..7 questionnaire.
fn ratings_body(task: &str) -> Value {
    let text = if task == "canonical" {
        shipped::CANONICAL_RATINGS
    } else {
        shipped::ACTUAL_RATINGS
    };
    let rec = parse_ratings(text).unwrap();
    let scale = |v: f64| {
        let unit = (v - rec.scale_min) / (rec.scale_max - rec.scale_min);
        (1.0 + 6.0 * unit).round()
    };
    let ratings: Vec<Value> = rec
        .raw
        .iter()
        .map(|&(a, p, m)| json!({"action": a, "physical": scale(p), "mental": scale(m)}))
        .collect();
    json!({"task_id": task, "scale": {"min": 1.0, "max": 7.0}, "ratings": ratings})
}

const CANONICAL_DEMO: [usize; 6] = [2, 1, 4, 0, 5, 3];

async fn rate(app: &Router, id: &str, task: &str) {
    let (status, body) = call(
        app,
        Method::POST,
        &format!("/sessions/{id}/ratings"),
        Some(ratings_body(task)),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
}

async fn act(app: &Router, id: &str, action: usize) -> (StatusCode, Value) {
    call(
        app,
        Method::POST,
        &format!("/sessions/{id}/actions"),
        Some(json!({ "action": action })),
    )
    .await
}

async fn step(app: &Router, id: &str) -> Value {
    let (status, body) = call(app, Method::GET, &format!("/sessions/{id}/step"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body
}

/// Runs a whole session. On the actual task the participant follows the
/// anticipation on even steps and takes the highest feasible id otherwise.
async fn full_session(app: &Router) -> (String, Vec<usize>, Value) {
    let id = create(app).await;
    rate(app, &id, "canonical").await;
    let mut learned = Value::Null;
    for &a in &CANONICAL_DEMO {
        let (status, body) = act(app, &id, a).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        if body.get("learned").is_some() {
            learned = body["learned"].clone();
        }
    }
    assert!(learned["diagnostics"]["converged"].as_bool().unwrap());
    rate(app, &id, "actual").await;
    let mut trace = Vec::new();
    let mut report = Value::Null;
    for t in 0..17 {
        let view = step(app, &id).await;
        assert_eq!(view["step"], t);
        assert_eq!(view["total_steps"], 17);
        let predicted = view["anticipation"].as_u64().unwrap() as usize;
        let feasible: Vec<usize> = view["feasible"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a["id"].as_u64().unwrap() as usize)
            .collect();
        assert!(feasible.contains(&predicted));
        let a = if t % 2 == 0 {
            predicted
        } else {
            *feasible.last().unwrap()
        };
        let (status, body) = act(app, &id, a).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_eq!(body["hit"], a == predicted);
        trace.push(a);
        if t == 16 {
            assert_eq!(body["phase"], "done");
            report = body["report"].clone();
        } else {
            assert!(body.get("report").is_none());
        }
    }
    (id, trace, report)
}

#[tokio::test]
async fn scripted_session_produces_full_report() {
    let app = app();
    let (id, trace, report) = full_session(&app).await;
    let steps = report["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 17);
    for (t, s) in steps.iter().enumerate() {
        assert_eq!(s["step"], t);
        assert_eq!(s["actual"], trace[t]);
    }
    // every even step followed the anticipation
    assert!(report["hits"].as_u64().unwrap() >= 9);
    let done = step(&app, &id).await;
    assert_eq!(done["done"], true);
    assert!(done["feasible"].as_array().unwrap().is_empty());
    let (status, body) = act(&app, &id, 0).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "wrong_phase");
}

#[tokio::test]
async fn export_replays_through_core() {
    let app = app();
    let (id, _, _) = full_session(&app).await;
    let (status, export) = call(&app, Method::GET, &format!("/sessions/{id}/export"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(export["partial"], false);
    let files = export["files"].as_object().unwrap();
    let file = |name: &str| files[name].as_str().unwrap().to_string();

    let canonical = shipped::canonical_task();
    let actual = shipped::actual_task();
    let c_ratings = parse_ratings(&file("canonical.ratings.toml")).unwrap();
    assert_eq!((c_ratings.scale_min, c_ratings.scale_max), (1.0, 7.0));
    assert_eq!(c_ratings.user_id, id);
    let c_trace = parse_trace(&file("canonical.trace.toml")).unwrap();
    assert_eq!(c_trace.actions, CANONICAL_DEMO);
    let (w, diag) = learn_weights(
        &canonical,
        &c_ratings.to_ratings(&canonical).unwrap(),
        &c_trace.to_trace(&canonical).unwrap(),
        &Default::default(),
    )
    .unwrap();
    let stored = parse_weights(&file("weights.toml")).unwrap();
    assert_eq!(stored.weights, w);
    assert_eq!(stored.diagnostics.unwrap(), diag);

    let a_ratings = parse_ratings(&file("actual.ratings.toml"))
        .unwrap()
        .to_ratings(&actual)
        .unwrap();
    let a_trace = parse_trace(&file("actual.trace.toml"))
        .unwrap()
        .to_trace(&actual)
        .unwrap();
    let replayed = rollout_predictions(&actual, &a_ratings, &w, &a_trace).unwrap();
    let live = parse_report(&file("report.json")).unwrap();
    assert_eq!(live.user_id, id);
    assert_eq!(live.report, replayed);
}

#[tokio::test]
async fn concurrent_sessions_are_isolated() {
    let app = app();
    let ids: Vec<String> = futures_join(&app, 8).await;
    let mut unique = ids.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 8);

    rate(&app, &ids[0], "canonical").await;
    act(&app, &ids[0], 2).await;
    assert_eq!(step(&app, &ids[0]).await["step"], 1);
    // the others are untouched
    for id in &ids[1..] {
        let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/step"), None).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(body["code"], "wrong_phase");
    }
}

async fn futures_join(app: &Router, n: usize) -> Vec<String> {
    let handles: Vec<_> = (0..n)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { create(&app).await })
        })
        .collect();
    let mut ids = Vec::new();
    for h in handles {
        ids.push(h.await.unwrap());
    }
    ids
}

#[tokio::test]
async fn unknown_things_are_404() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/sessions/nope/step", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_session");
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"actual_task_id": "boat"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_task");
}

#[tokio::test]
async fn invalid_input_is_rejected_without_side_effects() {
    let app = app();
    let id = create(&app).await;
    let uri = format!("/sessions/{id}/ratings");

    let mut missing = ratings_body("canonical");
    missing["ratings"].as_array_mut().unwrap().pop();
    let (status, body) = call(&app, Method::POST, &uri, Some(missing)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "missing_ratings");

    let mut high = ratings_body("canonical");
    high["ratings"][0]["physical"] = json!(9.0);
    let (status, body) = call(&app, Method::POST, &uri, Some(high)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "rating_out_of_bounds");

    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"task_id": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");

    rate(&app, &id, "canonical").await;
    // 3 needs 0 first
    let (status, body) = act(&app, &id, 3).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "infeasible_action");
    assert!(
        body["message"].as_str().unwrap().contains("0 -> 3"),
        "{body}"
    );
    let (status, _) = act(&app, &id, 42).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let view = step(&app, &id).await;
    assert_eq!(view["step"], 0);
    let blocked: Vec<u64> = view["blocked"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["id"].as_u64().unwrap())
        .collect();
    assert_eq!(blocked, vec![3, 4]);
}

#[tokio::test]
async fn partial_export_mid_session() {
    let app = app();
    let id = create(&app).await;
    rate(&app, &id, "canonical").await;
    act(&app, &id, 2).await;
    let (_, export) = call(&app, Method::GET, &format!("/sessions/{id}/export"), None).await;
    assert_eq!(export["partial"], true);
    assert_eq!(export["phase"], "demo-canonical");
    let names: Vec<&String> = export["files"].as_object().unwrap().keys().collect();
    assert_eq!(names, ["canonical.ratings.toml", "canonical.trace.toml"]);
    let trace = parse_trace(export["files"]["canonical.trace.toml"].as_str().unwrap()).unwrap();
    assert_eq!(trace.actions, [2]);
}

#[tokio::test]
async fn hidden_anticipation_is_still_logged() {
    let app = app_with(ServiceConfig {
        hide_anticipation: true,
        ..Default::default()
    });
    let id = create(&app).await;
    rate(&app, &id, "canonical").await;
    for &a in &CANONICAL_DEMO {
        act(&app, &id, a).await;
    }
    rate(&app, &id, "actual").await;
    let view = step(&app, &id).await;
    assert!(view.get("anticipation").is_none());
    let (_, body) = act(&app, &id, 6).await;
    assert!(body["hit"].is_boolean());
}

#[tokio::test]
async fn snapshots_are_written() {
    let dir = std::env::temp_dir().join(format!("prefxfer-snap-{}", std::process::id()));
    let state = AppState::new(ServiceConfig::default()).unwrap();
    let app = router(state.clone());
    let id = create(&app).await;
    rate(&app, &id, "canonical").await;
    assert_eq!(state.snapshot_to(&dir).unwrap(), 1);
    let text = std::fs::read_to_string(dir.join(format!("{id}.json"))).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["phase"], "demo-canonical");
    assert!(!dir.join(format!("{id}.json.tmp")).exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[tokio::test]
async fn lists_tasks() {
    let (status, body) = call(&app(), Method::GET, "/tasks", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body[0]["task_id"], "actual");
    assert_eq!(body[0]["total_steps"], 17);
    assert_eq!(body[1]["task_id"], "canonical");
}
