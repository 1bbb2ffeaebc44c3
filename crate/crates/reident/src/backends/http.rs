//! Remote endpoints speaking JSON over HTTP.
//!
//! Generation and QA backends use chat-completions-compatible bodies; the
//! fill-mask task posts `{"text", "top_k"}`. Embedding endpoints accept
//! `{"input": [..]}` and answer `{"data": [{"embedding": [..]}, ..]}`.
//! Requests retry up to three times with exponential backoff on transport
//! failures, 5xx responses and rate limits; everything else fails fast and
//! is recorded per document by the caller.

use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, BackendSpec, Embedder, InferenceBackend, PredictRequest, RawResponse, TaskKind};
use crate::model::DecodingStrategy;

const MAX_ATTEMPTS: u32 = 3;
const DEFAULT_BACKOFF_MS: u64 = 200;
const REQUEST_TIMEOUT_SECS: u64 = 120;

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(REQUEST_TIMEOUT_SECS)))
        .build()
        .new_agent()
}

fn resolve_auth(auth_env: Option<&str>) -> Result<Option<String>, BackendError> {
    match auth_env {
        None => Ok(None),
        Some(var) => match std::env::var(var) {
            Ok(v) if !v.is_empty() => Ok(Some(v)),
            _ => Err(BackendError::MissingAuth(var.to_owned())),
        },
    }
}

struct HttpClient {
    endpoint: String,
    bearer: Option<String>,
    agent: ureq::Agent,
    backoff_ms: u64,
}

impl HttpClient {
    fn new(endpoint: &str, auth_env: Option<&str>) -> Result<Self, BackendError> {
        Ok(HttpClient {
            endpoint: endpoint.to_owned(),
            bearer: resolve_auth(auth_env)?,
            agent: agent(),
            backoff_ms: DEFAULT_BACKOFF_MS,
        })
    }

    fn post_once(&self, body: &str) -> Result<Value, BackendError> {
        let mut request = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.bearer {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send(body.as_bytes()).map_err(|e| {
            BackendError::EndpointUnavailable {
                message: e.to_string(),
                retryable: true,
            }
        })?;
        let status = response.status().as_u16();
        if status == 429 {
            let retry_after_secs = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok());
            return Err(BackendError::RateLimited { retry_after_secs });
        }
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::EndpointUnavailable {
                message: format!("status {status}: {}", text.chars().take(200).collect::<String>()),
                retryable: (500..600).contains(&status),
            });
        }
        serde_json::from_str(&text)
            .map_err(|e| BackendError::MalformedResponse(format!("{e}: {text}")))
    }

    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let body = body.to_string();
        let mut last_err = None;
        for attempt in 0..MAX_ATTEMPTS {
            match self.post_once(&body) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt + 1 < MAX_ATTEMPTS => {
                    let wait = match &e {
                        BackendError::RateLimited {
                            retry_after_secs: Some(s),
                        } => Duration::from_secs(*s),
                        _ => Duration::from_millis(self.backoff_ms << attempt),
                    };
                    std::thread::sleep(wait);
                    last_err = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("loop returns or records an error"))
    }
}

/// A remote candidate-name producer.
pub struct HttpBackend {
    id: String,
    task: TaskKind,
    client: HttpClient,
}

impl HttpBackend {
    pub fn new(spec: &BackendSpec) -> Result<Self, BackendError> {
        spec.validate()?;
        Ok(HttpBackend {
            id: spec.id.clone(),
            task: spec.task,
            client: HttpClient::new(&spec.endpoint, spec.auth_env.as_deref())?,
        })
    }

    fn chat_body(&self, req: &PredictRequest, n: usize) -> Value {
        let mut body = json!({
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.decoding.temperature,
            "n": n,
        });
        match req.decoding.strategy {
            DecodingStrategy::Greedy => {}
            DecodingStrategy::Beam { width } => body["num_beams"] = json!(width),
            DecodingStrategy::TopK { k } => body["top_k"] = json!(k),
            DecodingStrategy::TopP { p } => body["top_p"] = json!(p),
        }
        body
    }

    fn parse_chat(value: &Value) -> Result<Vec<String>, BackendError> {
        let choices = value
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::MalformedResponse("missing choices array".into()))?;
        let mut out = Vec::with_capacity(choices.len());
        for choice in choices {
            let content = choice
                .pointer("/message/content")
                .or_else(|| choice.get("text"))
                .and_then(Value::as_str)
                .ok_or_else(|| {
                    BackendError::MalformedResponse("choice without message content".into())
                })?;
            out.push(content.to_owned());
        }
        Ok(out)
    }

    fn parse_fill_mask(value: &Value) -> Result<Vec<String>, BackendError> {
        let items = value
            .as_array()
            .or_else(|| value.get("candidates").and_then(Value::as_array))
            .ok_or_else(|| BackendError::MalformedResponse("missing fill-mask candidates".into()))?;
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            let text = item
                .as_str()
                .or_else(|| item.get("token_str").and_then(Value::as_str))
                .or_else(|| item.get("sequence").and_then(Value::as_str))
                .ok_or_else(|| {
                    BackendError::MalformedResponse("fill-mask candidate without text".into())
                })?;
            out.push(text.to_owned());
        }
        Ok(out)
    }
}

impl InferenceBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError> {
        let (body, value) = match self.task {
            TaskKind::Generation | TaskKind::Qa => {
                let body = self.chat_body(req, req.top_n);
                let value = self.client.post(&body)?;
                (Self::parse_chat(&value)?, value)
            }
            TaskKind::FillMask => {
                let body = json!({"text": req.prompt, "top_k": req.top_n});
                let value = self.client.post(&body)?;
                (Self::parse_fill_mask(&value)?, value)
            }
        };
        Ok(RawResponse {
            candidates: body,
            raw: value.to_string(),
        })
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        let body = self.chat_body(req, 1);
        let value = self.client.post(&body)?;
        Self::parse_chat(&value)?
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::MalformedResponse("empty choices".into()))
    }
}

/// A remote embedding provider; checks that the vector dimension stays
/// constant across the run.
pub struct HttpEmbedder {
    id: String,
    client: HttpClient,
    dimension: Mutex<Option<usize>>,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, auth_env: Option<&str>) -> Result<Self, BackendError> {
        Ok(HttpEmbedder {
            id: endpoint.to_owned(),
            client: HttpClient::new(endpoint, auth_env)?,
            dimension: Mutex::new(None),
        })
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        let value = self.client.post(&json!({"input": texts}))?;
        let data = value
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::MalformedResponse("missing data array".into()))?;
        if data.len() != texts.len() {
            return Err(BackendError::MalformedResponse(format!(
                "{} embeddings for {} inputs",
                data.len(),
                texts.len()
            )));
        }
        let mut out = Vec::with_capacity(data.len());
        for item in data {
            let vector: Vec<f32> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| BackendError::MalformedResponse("item without embedding".into()))?
                .iter()
                .map(|v| v.as_f64().map(|f| f as f32))
                .collect::<Option<Vec<f32>>>()
                .ok_or_else(|| BackendError::MalformedResponse("non-numeric embedding".into()))?;
            let mut dim = self.dimension.lock().expect("dimension lock");
            match *dim {
                None => *dim = Some(vector.len()),
                Some(expected) if expected != vector.len() => {
                    return Err(BackendError::DimensionMismatch {
                        expected,
                        got: vector.len(),
                    })
                }
                _ => {}
            }
            out.push(vector);
        }
        Ok(out)
    }
}
