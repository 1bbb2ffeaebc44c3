//! Exercises the HTTP transport against a minimal in-process server:
//! request bodies, response parsing, auth forwarding, retry behavior and
//! the rate-limit and malformed-response error paths.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use reident::backends::{
    predict, resolve_backend, resolve_embedder, BackendError, BackendSpec, PromptTemplate,
    TaskKind,
};
use reident::model::{normalize_name, DocumentKind, MaskedDocument, DEFAULT_MASK_TOKEN};

/// One canned response: status, extra headers, body.
type Canned = (u16, Vec<(&'static str, String)>, String);

struct TestServer {
    endpoint: String,
    requests: Arc<Mutex<Vec<String>>>,
    handle: thread::JoinHandle<()>,
}

impl TestServer {
    /// Serves the canned responses in order, one connection each, and
    /// records every raw request (headers + body).
    fn start(responses: Vec<Canned>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind localhost");
        let endpoint = format!("http://{}", listener.local_addr().unwrap());
        let requests: Arc<Mutex<Vec<String>>> = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        let handle = thread::spawn(move || {
            for (status, headers, body) in responses {
                let (mut stream, _) = listener.accept().expect("accept");
                let raw = read_http_request(&mut stream);
                seen.lock().unwrap().push(raw);
                let mut head = format!(
                    "HTTP/1.1 {status} Canned\r\ncontent-length: {}\r\nconnection: close\r\n",
                    body.len()
                );
                for (k, v) in &headers {
                    head.push_str(&format!("{k}: {v}\r\n"));
                }
                head.push_str("\r\n");
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(body.as_bytes());
            }
        });
        TestServer {
            endpoint,
            requests,
            handle,
        }
    }

    fn finish(self) -> Vec<String> {
        self.handle.join().expect("server thread");
        Arc::try_unwrap(self.requests)
            .expect("all clones dropped")
            .into_inner()
            .unwrap()
    }
}

fn read_http_request(stream: &mut TcpStream) -> String {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    // headers end at \r\n\r\n
    while !buf.ends_with(b"\r\n\r\n") {
        if stream.read(&mut byte).unwrap_or(0) == 0 {
            break;
        }
        buf.push(byte[0]);
    }
    let head = String::from_utf8_lossy(&buf).to_string();
    let content_length: usize = head
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let mut body = vec![0u8; content_length];
    if content_length > 0 {
        stream.read_exact(&mut body).expect("body");
    }
    format!("{head}{}", String::from_utf8_lossy(&body))
}

fn doc() -> MaskedDocument {
    MaskedDocument::new(
        "d1",
        "<mask> wrote many essays about politics and language.",
        DEFAULT_MASK_TOKEN,
        Some(normalize_name("George Orwell").unwrap()),
        DocumentKind::Wikipedia,
    )
    .unwrap()
}

fn spec_for(endpoint: &str, task: TaskKind) -> BackendSpec {
    let mut spec = BackendSpec::for_locator(endpoint);
    spec.id = "remote".into();
    spec.task = task;
    spec.top_n = 5;
    spec
}

fn chat_response(names: &[&str]) -> String {
    let choices: Vec<serde_json::Value> = names
        .iter()
        .map(|n| serde_json::json!({"message": {"content": *n}}))
        .collect();
    serde_json::json!({"choices": choices}).to_string()
}

#[test]
fn generation_request_and_parse() {
    let server = TestServer::start(vec![(
        200,
        vec![],
        chat_response(&["George Orwell", "\"Eric Blair\"\nextra"]),
    )]);
    let spec = spec_for(&server.endpoint, TaskKind::Generation);
    let backend = resolve_backend(&spec).unwrap();
    let template = PromptTemplate::new("t", "Who is <mask> in:\n", "");

    let set = predict(backend.as_ref(), &spec, &template, &doc()).unwrap();
    assert_eq!(set.predictions, vec!["George Orwell", "Eric Blair"]);

    let requests = server.finish();
    assert_eq!(requests.len(), 1);
    let body = requests[0].split("\r\n\r\n").nth(1).unwrap();
    let value: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(value["n"], 5);
    assert_eq!(value["temperature"], 1.0);
    assert_eq!(value["num_beams"], 5);
    let content = value["messages"][0]["content"].as_str().unwrap();
    assert!(content.starts_with("Who is <mask> in:"));
    assert!(content.contains("wrote many essays"));
}

#[test]
fn auth_header_is_forwarded_from_env() {
    std::env::set_var("REIDENT_TEST_TOKEN", "sekrit-0");
    let server = TestServer::start(vec![(200, vec![], chat_response(&["X Y"]))]);
    let mut spec = spec_for(&server.endpoint, TaskKind::Generation);
    spec.auth_env = Some("REIDENT_TEST_TOKEN".into());
    let backend = resolve_backend(&spec).unwrap();
    let template = PromptTemplate::passthrough("t");
    predict(backend.as_ref(), &spec, &template, &doc()).unwrap();

    let requests = server.finish();
    assert!(requests[0].to_lowercase().contains("authorization: bearer sekrit-0"));
}

#[test]
fn missing_auth_variable_fails_fast() {
    let mut spec = spec_for("http://127.0.0.1:1", TaskKind::Generation);
    spec.auth_env = Some("REIDENT_TEST_TOKEN_UNSET".into());
    match resolve_backend(&spec) {
        Err(BackendError::MissingAuth(var)) => assert_eq!(var, "REIDENT_TEST_TOKEN_UNSET"),
        Err(other) => panic!("expected MissingAuth, got {other:?}"),
        Ok(_) => panic!("expected MissingAuth, got a backend"),
    }
}

#[test]
fn server_errors_are_retried_then_succeed() {
    let server = TestServer::start(vec![
        (503, vec![], "overloaded".into()),
        (503, vec![], "overloaded".into()),
        (200, vec![], chat_response(&["George Orwell"])),
    ]);
    let spec = spec_for(&server.endpoint, TaskKind::Generation);
    let backend = resolve_backend(&spec).unwrap();
    let template = PromptTemplate::passthrough("t");
    let set = predict(backend.as_ref(), &spec, &template, &doc()).unwrap();
    assert_eq!(set.predictions, vec!["George Orwell"]);
    assert_eq!(server.finish().len(), 3, "two retries before success");
}

#[test]
fn rate_limit_exhausts_retries() {
    let server = TestServer::start(vec![
        (429, vec![("retry-after", "0".into())], "slow down".into()),
        (429, vec![("retry-after", "0".into())], "slow down".into()),
        (429, vec![("retry-after", "0".into())], "slow down".into()),
    ]);
    let spec = spec_for(&server.endpoint, TaskKind::Generation);
    let backend = resolve_backend(&spec).unwrap();
    let template = PromptTemplate::passthrough("t");
    match predict(backend.as_ref(), &spec, &template, &doc()) {
        Err(BackendError::RateLimited { retry_after_secs }) => {
            assert_eq!(retry_after_secs, Some(0));
        }
        other => panic!("expected RateLimited, got {other:?}"),
    }
    assert_eq!(server.finish().len(), 3);
}

#[test]
fn client_errors_do_not_retry() {
    let server = TestServer::start(vec![(400, vec![], "bad request".into())]);
    let spec = spec_for(&server.endpoint, TaskKind::Generation);
    let backend = resolve_backend(&spec).unwrap();
    let template = PromptTemplate::passthrough("t");
    match predict(backend.as_ref(), &spec, &template, &doc()) {
        Err(BackendError::EndpointUnavailable { retryable, .. }) => assert!(!retryable),
        other => panic!("expected EndpointUnavailable, got {other:?}"),
    }
    assert_eq!(server.finish().len(), 1, "4xx must not retry");
}

#[test]
fn malformed_json_is_reported() {
    let server = TestServer::start(vec![(200, vec![], "not json at all".into())]);
    let spec = spec_for(&server.endpoint, TaskKind::Generation);
    let backend = resolve_backend(&spec).unwrap();
    let template = PromptTemplate::passthrough("t");
    match predict(backend.as_ref(), &spec, &template, &doc()) {
        Err(BackendError::MalformedResponse(_)) => {}
        other => panic!("expected MalformedResponse, got {other:?}"),
    }
    server.finish();
}

#[test]
fn fill_mask_body_and_response() {
    let response = serde_json::json!([
        {"token_str": " Orwell", "score": 0.9},
        {"token_str": "Blair", "score": 0.1},
    ])
    .to_string();
    let server = TestServer::start(vec![(200, vec![], response)]);
    let spec = spec_for(&server.endpoint, TaskKind::FillMask);
    let backend = resolve_backend(&spec).unwrap();
    let template = PromptTemplate::passthrough("t");
    let set = predict(backend.as_ref(), &spec, &template, &doc()).unwrap();
    assert_eq!(set.predictions, vec!["Orwell", "Blair"]);

    let requests = server.finish();
    let body = requests[0].split("\r\n\r\n").nth(1).unwrap();
    let value: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(value["top_k"], 5);
    assert!(value["text"].as_str().unwrap().contains("<mask>"));
}

#[test]
fn embedder_parses_and_checks_dimension() {
    let first = serde_json::json!({"data": [
        {"embedding": [1.0, 2.0]},
        {"embedding": [3.0, 4.0]},
    ]})
    .to_string();
    let second = serde_json::json!({"data": [{"embedding": [1.0, 2.0, 3.0]}]}).to_string();
    let server = TestServer::start(vec![(200, vec![], first), (200, vec![], second)]);

    let embedder = resolve_embedder(&server.endpoint, None).unwrap();
    let vectors = embedder.embed(&["a", "b"]).unwrap();
    assert_eq!(vectors, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);

    match embedder.embed(&["c"]) {
        Err(BackendError::DimensionMismatch { expected: 2, got: 3 }) => {}
        other => panic!("expected DimensionMismatch, got {other:?}"),
    }
    server.finish();
}
