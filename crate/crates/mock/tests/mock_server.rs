use std::time::{Duration, Instant};

use bridge_mock::{MockMode, MockServer};
use serde_json::{json, Value};

fn body(user: &str, max_tokens: u32) -> Value {
    json!({
        "model": "Llama-2-13b-chat",
        "temperature": 0.8,
        "max_tokens": max_tokens,
        "messages": [
            {"role": "system", "content": "be chill"},
            {"role": "user", "content": user},
        ],
    })
}

fn post(server: &MockServer, body: &Value) -> (u16, Value) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = agent.post(format!("{}/chat/completions", server.url())).send_json(body).unwrap();
    let status = resp.status().as_u16();
    let value: Value = resp.body_mut().read_json().unwrap();
    (status, value)
}

fn content(v: &Value) -> &str {
    v["choices"][0]["message"]["content"].as_str().unwrap()
}

#[test]
fn scripted_cycles_in_order() {
    let server = MockServer::start(MockMode::scripted(["yo!", "sup"]), "127.0.0.1:0").unwrap();
    let got: Vec<String> = (0..3).map(|_| content(&post(&server, &body("hi", 60)).1).to_string()).collect();
    assert_eq!(got, ["yo!", "sup", "yo!"]);
    assert_eq!(server.served_count(), 3);
}

#[test]
fn echo_returns_last_user_message() {
    let server = MockServer::start(MockMode::Echo, "127.0.0.1:0").unwrap();
    let (status, v) = post(&server, &body("ping", 60));
    assert_eq!(status, 200);
    assert_eq!(content(&v), "ping");
    assert_eq!(v["object"], "chat.completion");
}

#[test]
fn overlong_ignores_max_tokens() {
    let server = MockServer::start(MockMode::Overlong(5), "127.0.0.1:0").unwrap();
    let (_, v) = post(&server, &body("tell me everything", 60));
    assert!(content(&v).chars().count() > 300);
    assert_eq!(v["choices"][0]["finish_reason"], "length");
}

#[test]
fn fail_mode_returns_status() {
    let server = MockServer::start(MockMode::Fail(503), "127.0.0.1:0").unwrap();
    let (status, v) = post(&server, &body("hi", 60));
    assert_eq!(status, 503);
    assert!(v["error"].is_object());
}

#[test]
fn delayed_mode_sleeps() {
    let server =
        MockServer::start(MockMode::delayed(Duration::from_millis(150), MockMode::scripted(["late"])), "127.0.0.1:0")
            .unwrap();
    let t = Instant::now();
    let (_, v) = post(&server, &body("hi", 60));
    assert!(t.elapsed() >= Duration::from_millis(150));
    assert_eq!(content(&v), "late");
}

#[test]
fn records_request_bodies() {
    let server = MockServer::start(MockMode::Echo, "127.0.0.1:0").unwrap();
    let sent = body("one", 42);
    post(&server, &sent);
    let recorded = server.requests();
    assert_eq!(recorded, vec![sent.clone()]);

    let mut resp = ureq::get(format!("http://{}/requests", server.addr())).call().unwrap();
    let over_http: Value = resp.body_mut().read_json().unwrap();
    assert_eq!(over_http, json!([sent]));
}

#[test]
fn rejects_malformed_request() {
    let server = MockServer::start(MockMode::Echo, "127.0.0.1:0").unwrap();
    let (status, _) = post(&server, &json!({"model": "m", "messages": "nope"}));
    assert_eq!(status, 400);
}

#[test]
fn set_mode_switches_behaviour() {
    let server = MockServer::start(MockMode::Echo, "127.0.0.1:0").unwrap();
    server.set_mode(MockMode::scripted(["switched"])).unwrap();
    assert_eq!(content(&post(&server, &body("x", 60)).1), "switched");
}

#[test]
fn bind_conflict_is_an_error() {
    let server = MockServer::start(MockMode::Echo, "127.0.0.1:0").unwrap();
    let taken = server.addr().to_string();
    assert!(matches!(MockServer::start(MockMode::Echo, &taken), Err(bridge_mock::MockError::Bind { .. })));
}
