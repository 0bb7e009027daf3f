use std::sync::Arc;

use arena_core::{Action, Episode, EpisodeConfig, Instrument, Money, ScenarioCatalog, ToolCall};
use arena_server::{router, AppState};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new(ScenarioCatalog::with_default()))
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = send_raw(app, method, uri, body).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn send_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

async fn create(app: &Router, seed: u64) -> String {
    let (status, body) = send(
        app,
        Method::POST,
        "/v1/sessions",
        Some(json!({"seed": seed, "agent_label": "api"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["status"], "continue");
    assert_eq!(body["observation"]["t"], 0);
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn lists_the_default_scenario() {
    let (status, body) = send(&app(), Method::GET, "/v1/scenarios", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["scenarios"][0]["id"], "default");
    assert_eq!(body["scenarios"][0]["horizon"], 132);
}

#[tokio::test]
async fn budget_is_enforced_over_http() {
    let app = app();
    let id = create(&app, 1).await;
    let uri = format!("/v1/sessions/{id}/tools");
    for i in 1..=20 {
        let (status, body) = send(
            &app,
            Method::POST,
            &uri,
            Some(json!({"name": "verify_cash_position"})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "call {i}: {body}");
        assert_eq!(body["budget_remaining"], 20 - i);
        assert_eq!(body["result"]["tool"], "verify_cash_position");
    }
    let (status, body) = send(
        &app,
        Method::POST,
        &uri,
        Some(json!({"name": "verify_cash_position"})),
    )
    .await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS);
    assert_eq!(body["code"], "budget_exhausted");
    assert_eq!(body["budget_remaining"], 0);
    assert_eq!(body["month"], 0);

    let mem = format!("/v1/sessions/{id}/memory");
    let (status, body) = send(
        &app,
        Method::POST,
        &mem,
        Some(json!({"operation": "save_note", "content": "hold", "tags": ["a"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["result"], "saved");
    let (status, body) = send(
        &app,
        Method::POST,
        &mem,
        Some(json!({"operation": "recall_notes", "tags": ["a"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["notes"][0]["content"], "hold");

    let (_, session) = send(&app, Method::GET, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(session["budget_remaining"], 0);
    assert_eq!(session["phase"], "awaiting_action");
}

#[tokio::test]
async fn errors_carry_codes_and_statuses() {
    let app = app();
    let (status, body) = send(&app, Method::GET, "/v1/sessions/nope", None).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("session_not_found"))
    );
    let (status, body) = send(
        &app,
        Method::POST,
        "/v1/sessions",
        Some(json!({"scenario_id": "mars"})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("scenario_not_found"))
    );
    let (status, body) = send(&app, Method::POST, "/v1/sessions", Some(json!({"sede": 1}))).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_request"))
    );

    let id = create(&app, 2).await;
    let tools = format!("/v1/sessions/{id}/tools");
    let action = format!("/v1/sessions/{id}/action");
    let (status, body) = send(
        &app,
        Method::POST,
        &tools,
        Some(json!({"name": "teleport"})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_request"))
    );
    let bad_projection = json!({"name": "conduct_cashflow_projection", "params": {"horizon_months": -1, "monthly_burn": 5.0}});
    let (status, body) = send(&app, Method::POST, &tools, Some(bad_projection)).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("bad_assumptions"))
    );
    assert_eq!(body["budget_remaining"], 20);
    let zero =
        json!({"name": "fund_raising_request", "params": {"instrument": "equity", "amount": 0.0}});
    let (status, body) = send(&app, Method::POST, &action, Some(zero)).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (
            StatusCode::UNPROCESSABLE_ENTITY,
            Some("non_positive_amount")
        )
    );
    let (status, body) = send_raw(&app, Method::POST, &action, None).await;
    assert_eq!(
        status,
        StatusCode::BAD_REQUEST,
        "{}",
        String::from_utf8_lossy(&body)
    );

    // Month pinning: stale action, stale tool call, future month.
    let (status, _) = send(
        &app,
        Method::POST,
        &action,
        Some(json!({"name": "pass", "month": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = send(
        &app,
        Method::POST,
        &action,
        Some(json!({"name": "pass", "month": 0})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("second_action"))
    );
    let (status, body) = send(
        &app,
        Method::POST,
        &tools,
        Some(json!({"name": "verify_cash_position", "month": 0})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("contract_violation"))
    );
    let (status, body) = send(
        &app,
        Method::POST,
        &tools,
        Some(json!({"name": "verify_cash_position", "month": 7})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("contract_violation"))
    );
    assert_eq!(body["month"], 1);
}

#[tokio::test]
async fn passing_to_the_end_kills_the_company() {
    let app = app();
    let id = create(&app, 0).await;
    let action = format!("/v1/sessions/{id}/action");
    let mut last = Value::Null;
    for _ in 0..132 {
        let (status, body) = send(&app, Method::POST, &action, Some(json!({"name": "pass"}))).await;
        if status != StatusCode::OK {
            assert_eq!(body["code"], "episode_over");
            break;
        }
        last = body;
    }
    assert_eq!(last["next"]["status"], "terminated");
    let terminal = &last["next"]["terminal"];
    assert_eq!(terminal["survived"], false);
    assert_eq!(terminal["score"], 0.0);
    let months = terminal["months_lived"].as_u64().unwrap();
    assert!((30..=70).contains(&months), "died at {months}");
    let (_, session) = send(&app, Method::GET, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(session["phase"], "terminated");
    assert_eq!(session["alive"], false);
}

/// The same decisions sent over HTTP and applied in process produce the
/// same transcript bytes.
#[tokio::test]
async fn wire_and_engine_transcripts_match() {
    let app = app();
    let id = create(&app, 6).await;
    let mut local = Episode::new(
        EpisodeConfig::new("default", 6).with_agent("api"),
        Arc::new(arena_core::Scenario::default_scenario()),
    )
    .unwrap();
    local.start().unwrap();
    for month in 0..36u32 {
        let tool = json!({"name": "analyze_market_conditions", "params": {"from_month": month.saturating_sub(2)}});
        send(
            &app,
            Method::POST,
            &format!("/v1/sessions/{id}/tools"),
            Some(tool),
        )
        .await;
        local
            .call_tool(
                ToolCall::from_parts(
                    "analyze_market_conditions",
                    json!({"from_month": month.saturating_sub(2)}),
                )
                .unwrap(),
            )
            .unwrap();
        let (wire, engine) = match month % 4 {
            0 => (json!({"name": "book_closing"}), Action::book_closing()),
            2 => (
                json!({"name": "fund_raising_request", "params": {"instrument": "debt", "amount": 3000000.0}}),
                Action::raise(Instrument::Debt, Money::from_units(3_000_000)),
            ),
            _ => (json!({"name": "pass"}), Action::pass()),
        };
        let (status, _) = send(
            &app,
            Method::POST,
            &format!("/v1/sessions/{id}/action"),
            Some(wire),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        local.act(engine).unwrap();
    }
    let (status, bytes) = send_raw(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/transcript"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        String::from_utf8(bytes).unwrap(),
        local.transcript().to_jsonl()
    );
}

/// Concurrent calls to one session are serialized: exactly the budget's
/// worth succeed and the rest are refused.
#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_calls_respect_the_budget() {
    let app = app();
    let id = create(&app, 3).await;
    let uri = format!("/v1/sessions/{id}/tools");
    let mut handles = Vec::new();
    for _ in 0..30 {
        let app = app.clone();
        let uri = uri.clone();
        handles.push(tokio::spawn(async move {
            send(
                &app,
                Method::POST,
                &uri,
                Some(json!({"name": "verify_cash_position"})),
            )
            .await
            .0
        }));
    }
    let mut ok = 0;
    let mut refused = 0;
    for h in handles {
        match h.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::TOO_MANY_REQUESTS => refused += 1,
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!((ok, refused), (20, 10));
}

#[tokio::test]
async fn finished_transcripts_are_written() {
    let tmp = tempfile::tempdir().unwrap();
    let app = router(
        AppState::new(ScenarioCatalog::with_default())
            .with_transcript_dir(tmp.path().to_path_buf()),
    );
    let (_, body) = send(
        &app,
        Method::POST,
        "/v1/sessions",
        Some(json!({"seed": 1, "horizon": 3})),
    )
    .await;
    let id = body["session_id"].as_str().unwrap().to_string();
    for _ in 0..3 {
        send(
            &app,
            Method::POST,
            &format!("/v1/sessions/{id}/action"),
            Some(json!({"name": "pass"})),
        )
        .await;
    }
    let written = std::fs::read_to_string(tmp.path().join(format!("{id}.jsonl"))).unwrap();
    let (_, served) = send_raw(
        &app,
        Method::GET,
        &format!("/v1/sessions/{id}/transcript"),
        None,
    )
    .await;
    assert_eq!(written.as_bytes(), &served[..]);
}

#[tokio::test]
async fn real_socket_round_trip() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = tokio::spawn(arena_server::serve(
        listener,
        AppState::new(ScenarioCatalog::with_default()),
    ));
    let client = reqwest::Client::new();
    let base = format!("http://{addr}");
    let created: Value = client
        .post(format!("{base}/v1/sessions"))
        .json(&json!({"seed": 4, "client_kind": "human"}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = created["session_id"].as_str().unwrap();
    let resp = client
        .post(format!("{base}/v1/sessions/{id}/action"))
        .json(&json!({"name": "book_closing", "month": 0}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), reqwest::StatusCode::OK);
    let outcome: Value = resp.json().await.unwrap();
    assert_eq!(outcome["resolution"]["action"], "book_closing");
    let bs = &outcome["resolution"]["balance_sheet"];
    let lhs = bs["total_assets"].as_f64().unwrap();
    let rhs = bs["debt"].as_f64().unwrap() + bs["equity"].as_f64().unwrap();
    assert!((lhs - rhs).abs() < 0.005);
    let session: Value = client
        .get(format!("{base}/v1/sessions/{id}"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(session["client_kind"], "human");
    assert_eq!(session["month"], 1);
    server.abort();
}
