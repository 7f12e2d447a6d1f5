use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use droptest::advisor::builtin_table;
use droptest::fixtures::{table_one_traces, table_two_config, table_two_part, table_two_trials};
use droptest::simrig::{simulate_drop, SimConfig};
use droptest::trace::{force_trace_to_csv, kin_trace_to_csv};
use droptest_service::api::{router, AppState};
use droptest_service::ops::RigSettings;
use droptest_service::store::Store;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

fn app() -> (Router, TempDir) {
    let dir = TempDir::new().unwrap();
    let state = AppState::new(
        Store::open(dir.path()).unwrap(),
        RigSettings::default(),
        builtin_table(),
    );
    (router(state), dir)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Option<String>, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_owned());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()));
    (status, ctype, body)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let (status, _, value) = send(app, req.body(body).unwrap()).await;
    (status, value)
}

async fn table_two_campaign(app: &Router) -> String {
    let body = json!({"id": "t2", "part": table_two_part(), "config": table_two_config()});
    let (status, doc) = call(app, Method::POST, "/campaigns", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{doc}");
    doc["id"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn table_two_over_http() {
    let (app, _dir) = app();
    let id = table_two_campaign(&app).await;
    for trial in table_two_trials() {
        let (status, next) = call(&app, Method::GET, &format!("/campaigns/{id}/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(next["action"], "drop");
        assert_eq!(next["height_cm"].as_f64().unwrap(), trial.height_cm);
        let (status, receipt) =
            call(&app, Method::POST, &format!("/campaigns/{id}/trials"), Some(json!(trial))).await;
        assert_eq!(status, StatusCode::CREATED, "{receipt}");
    }
    let (_, next) = call(&app, Method::GET, &format!("/campaigns/{id}/next"), None).await;
    assert_eq!(next["action"], "finished");
    let (status, report) = call(&app, Method::GET, &format!("/campaigns/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["result"]["breaking_height_cm"].as_f64(), Some(4.4));
    assert_eq!(report["result"]["breaking_force_n"].as_f64(), Some(65.0));

    let (_, doc) = call(&app, Method::GET, &format!("/campaigns/{id}"), None).await;
    assert_eq!(doc["id"], "t2");
    assert_eq!(doc["trials"].as_array().unwrap().len(), 16);

    let req = Request::get(format!("/campaigns/{id}/report?format=csv")).body(Body::empty()).unwrap();
    let (status, ctype, csv) = send(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("text/csv"));
    assert!(csv.as_str().unwrap().contains("4.4,N/A,65.0,N/A,65.0"), "{csv}");
}

#[tokio::test]
async fn status_codes() {
    let (app, _dir) = app();
    let id = table_two_campaign(&app).await;

    // Protocol violation: the pending height is 4.0 cm.
    let (status, problem) = call(
        &app,
        Method::POST,
        &format!("/campaigns/{id}/trials"),
        Some(json!({"height_cm": 3.0, "outcome": "intact", "peak_force_n": 40.0})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(problem["status"], 409);
    assert_eq!(problem["type"], "urn:droptest:problem:protocol-violation");

    // Missing measurement on an intact trial.
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/campaigns/{id}/trials"),
        Some(json!({"height_cm": 4.0, "outcome": "intact"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Unknown trace reference.
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/campaigns/{id}/trials"),
        Some(json!({"height_cm": 4.0, "outcome": "broke", "trace_id": "ab".repeat(32)})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Malformed body and wrong field types.
    let req = Request::post(format!("/campaigns/{id}/trials"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let (status, ctype, _) = send(&app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(ctype.as_deref(), Some("application/problem+json"));
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/campaigns/{id}/trials"),
        Some(json!({"height_cm": "high", "outcome": "broke"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Unknown ids.
    for uri in ["/campaigns/nope", "/campaigns/nope/next", "/campaigns/nope/report"] {
        assert_eq!(call(&app, Method::GET, uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    assert_eq!(
        call(&app, Method::GET, &format!("/traces/{}", "0".repeat(64)), None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(call(&app, Method::GET, "/nowhere", None).await.0, StatusCode::NOT_FOUND);

    // Invalid campaign config.
    let mut config = json!(table_two_config());
    config["fine_step_cm"] = json!(0.3);
    let (status, _) = call(
        &app,
        Method::POST,
        "/campaigns",
        Some(json!({"part": table_two_part(), "config": config})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Result not ready.
    let (status, report) = call(&app, Method::GET, &format!("/campaigns/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(report["result"].is_null());
}

#[tokio::test]
async fn campaign_creation_is_idempotent() {
    let (app, _dir) = app();
    let body = json!({"id": "c1", "part": table_two_part(), "config": table_two_config()});
    let (first, a) = call(&app, Method::POST, "/campaigns", Some(body.clone())).await;
    let (second, b) = call(&app, Method::POST, "/campaigns", Some(body)).await;
    assert_eq!((first, second), (StatusCode::CREATED, StatusCode::OK));
    assert_eq!(a, b);
    let other = json!({"id": "c1", "part": {"slot_depth_mm": 2.0, "wall_loops": 3}, "config": table_two_config()});
    assert_eq!(call(&app, Method::POST, "/campaigns", Some(other)).await.0, StatusCode::CONFLICT);

    let (status, generated) = call(
        &app,
        Method::POST,
        "/campaigns",
        Some(json!({"part": table_two_part(), "config": table_two_config()})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, ids) = call(&app, Method::GET, "/campaigns", None).await;
    assert_eq!(ids.as_array().unwrap().len(), 2);
    assert!(ids.as_array().unwrap().contains(&generated["id"]));
}

#[tokio::test]
async fn trial_retry_with_idempotency_key() {
    let (app, _dir) = app();
    let id = table_two_campaign(&app).await;
    let post = |key: &'static str, body: Value| {
        let app = app.clone();
        let uri = format!("/campaigns/{id}/trials");
        async move {
            let req = Request::post(uri)
                .header(header::CONTENT_TYPE, "application/json")
                .header("Idempotency-Key", key)
                .body(Body::from(body.to_string()))
                .unwrap();
            let (status, _, v) = send(&app, req).await;
            (status, v)
        }
    };
    let trial = json!({"height_cm": 4.0, "outcome": "intact", "peak_force_n": 20.0});
    let (s1, r1) = post("k-1", trial.clone()).await;
    let (s2, r2) = post("k-1", trial.clone()).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::OK));
    assert_eq!(r1, r2);
    assert_eq!(r1["idempotency_key"], "k-1");

    let (_, doc) = call(&app, Method::GET, &format!("/campaigns/{id}"), None).await;
    assert_eq!(doc["trials"].as_array().unwrap().len(), 1);

    // Same key, different body.
    let (status, _) = post("k-1", json!({"height_cm": 4.0, "outcome": "broke"})).await;
    assert_eq!(status, StatusCode::CONFLICT);

    // Header and body keys must agree.
    let (status, _) = post("k-2", json!({"height_cm": 4.0, "outcome": "broke", "idempotency_key": "k-3"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Concurrent double submit records once.
    let (_, next) = call(&app, Method::GET, &format!("/campaigns/{id}/next"), None).await;
    let trial = json!({"height_cm": next["height_cm"], "outcome": "broke"});
    let (a, b) = tokio::join!(post("k-4", trial.clone()), post("k-4", trial.clone()));
    let mut statuses = [a.0, b.0];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::CREATED]);
    assert_eq!(a.1, b.1);
    let (_, doc) = call(&app, Method::GET, &format!("/campaigns/{id}"), None).await;
    assert_eq!(doc["trials"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn advise_endpoint() {
    let (app, _dir) = app();
    let (status, advice) = call(&app, Method::POST, "/advise", Some(json!({"target": 65}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(advice["slot_depth_mm"].as_f64(), Some(1.0));
    assert_eq!(advice["wall_loops"], 3);
    assert_eq!(advice["mean_breaking_force_n"].as_f64(), Some(65.0));
    assert_eq!(advice["margin_n"].as_f64(), Some(0.0));

    let (_, advice) = call(&app, Method::POST, "/advise", Some(json!({"target_f_max_n": 50.0}))).await;
    assert_eq!(advice["slot_depth_mm"].as_f64(), Some(2.0));
    assert_eq!(advice["wall_loops"], 3);

    let (status, problem) = call(&app, Method::POST, "/advise", Some(json!({"target": 20}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(problem["type"], "urn:droptest:problem:infeasible-target");
}

async fn settled_report(app: &Router, id: &str) -> Value {
    for _ in 0..200 {
        let (_, report) = call(app, Method::GET, &format!("/campaigns/{id}/report"), None).await;
        if report["pending_analyses"].as_array().unwrap().is_empty() {
            return report;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("analysis never completed");
}

#[tokio::test]
async fn traces_upload_and_async_analysis() {
    let (app, _dir) = app();
    let (force, kin) = table_one_traces();
    let upload = json!({"force_csv": force_trace_to_csv(&force), "kin_csv": kin_trace_to_csv(&kin)});
    let (status, receipt) = call(&app, Method::POST, "/traces", Some(upload.clone())).await;
    assert_eq!(status, StatusCode::CREATED);
    let trace_id = receipt["trace_id"].as_str().unwrap().to_owned();
    assert_eq!(trace_id.len(), 64);
    let (status, again) = call(&app, Method::POST, "/traces", Some(upload)).await;
    assert_eq!((status, &again), (StatusCode::OK, &receipt));

    let (status, stored) = call(&app, Method::GET, &format!("/traces/{trace_id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stored["force_csv"].as_str().unwrap(), force_trace_to_csv(&force));

    // Multipart upload of a different drop.
    let run = simulate_drop(&SimConfig::default()).unwrap();
    let boundary = "XyZboundary";
    let multipart = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"force\"; filename=\"f.csv\"\r\nContent-Type: text/csv\r\n\r\n{}\r\n--{boundary}\r\nContent-Disposition: form-data; name=\"kin\"; filename=\"k.csv\"\r\nContent-Type: text/csv\r\n\r\n{}\r\n--{boundary}--\r\n",
        force_trace_to_csv(&run.force),
        kin_trace_to_csv(&run.kin)
    );
    let req = Request::post("/traces")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(multipart))
        .unwrap();
    let (status, _, sim_receipt) = send(&app, req).await;
    assert_eq!(status, StatusCode::CREATED, "{sim_receipt}");
    assert_ne!(sim_receipt, receipt);

    let (status, problem) = call(
        &app,
        Method::POST,
        "/traces",
        Some(json!({"force_csv": "", "kin_csv": kin_trace_to_csv(&kin)})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{problem}");

    // A trial referencing the Table I trace: the peak comes from the trace,
    // the analysis lands in the report later.
    let id = table_two_campaign(&app).await;
    let (status, trial) = call(
        &app,
        Method::POST,
        &format!("/campaigns/{id}/trials"),
        Some(json!({"height_cm": 4.0, "outcome": "intact", "trace_id": trace_id})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{trial}");
    assert_eq!(trial["peak_force_n"].as_f64(), Some(75.6));
    assert_eq!(trial["analysis_queued"], true);

    let report = settled_report(&app, &id).await;
    let analysis = &report["ledger"][0]["trials"][0]["analysis"];
    assert!((analysis["f_theoretical_n"].as_f64().unwrap() - 89.0).abs() < 0.1, "{analysis}");
    assert!((analysis["error_pct"].as_f64().unwrap() - 17.7).abs() < 0.1);
    assert_eq!(analysis["signature"], "intact");
    assert!(report["disagreements"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn classifier_disagreement_is_reported() {
    let (app, _dir) = app();
    let run = simulate_drop(&SimConfig {
        drop_height_cm: 10.0,
        part_break_threshold_n: Some(40.0),
        ..SimConfig::default()
    })
    .unwrap();
    let upload = json!({"force_csv": force_trace_to_csv(&run.force), "kin_csv": kin_trace_to_csv(&run.kin)});
    let (_, receipt) = call(&app, Method::POST, "/traces", Some(upload)).await;
    let id = table_two_campaign(&app).await;
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/campaigns/{id}/trials"),
        Some(json!({"height_cm": 4.0, "outcome": "intact", "peak_force_n": 30.0, "trace_id": receipt["trace_id"]})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let report = settled_report(&app, &id).await;
    let d = &report["disagreements"][0];
    assert_eq!(d["operator"], "intact");
    assert_eq!(d["classifier"], "broke");
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = TempDir::new().unwrap();
    let make = || {
        router(AppState::new(
            Store::open(dir.path()).unwrap(),
            RigSettings::default(),
            builtin_table(),
        ))
    };
    let app = make();
    let id = table_two_campaign(&app).await;
    for trial in table_two_trials().iter().take(7) {
        call(&app, Method::POST, &format!("/campaigns/{id}/trials"), Some(json!(trial))).await;
    }
    let (_, before) = call(&app, Method::GET, &format!("/campaigns/{id}"), None).await;
    drop(app);
    let app = make();
    let (_, after) = call(&app, Method::GET, &format!("/campaigns/{id}"), None).await;
    assert_eq!(before, after);
}
