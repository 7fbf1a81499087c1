//! Stateless HTTP facade over the engine.
//!
//! Every POST route takes a problem document and answers with the same report
//! the CLI prints under `--json`. Work runs on the blocking pool under a
//! cancellation token that fires when the time budget runs out or when the
//! client goes away (the handler future is dropped).
//!
//! Bodies are deterministic for identical requests: searches run on one
//! thread so node-limit truncation is reproducible, and the wall time goes in
//! the `x-solve-time-ms` header rather than the body.

use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::json;

use manna_core::report::{audit_report, classify_report, components_report, enumerate_report, solve_report, Settings};
use manna_core::{parse_document, run_demo, CancelToken, Error, Limits, Mode, ProblemDocument, DEMOS};

pub const SOLVE_TIME_HEADER: &str = "x-solve-time-ms";
/// Largest side of the utility matrix the service accepts.
pub const MAX_SIDE: usize = 12;
pub const MAX_BODY_BYTES: usize = 64 * 1024;
pub const MAX_ORACLE_GRID: usize = 400;
pub const MAX_AXIOM_TRIALS: usize = 64;

#[derive(Debug, Clone)]
pub struct Config {
    /// Wall-clock budget per request.
    pub budget: Duration,
    pub max_body_bytes: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self { budget: Duration::from_secs(5), max_body_bytes: MAX_BODY_BYTES }
    }
}

pub fn app() -> Router {
    app_with(Config::default())
}

pub fn app_with(config: Config) -> Router {
    let limit = config.max_body_bytes;
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/classify", post(classify))
        .route("/api/solve", post(solve))
        .route("/api/enumerate", post(enumerate))
        .route("/api/audit", post(audit))
        .route("/api/components", post(components))
        .route("/api/demos", get(list_demos))
        .route("/api/demos/{name}", get(demo))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(config)
}

/// JSON error body: `{"error": {"kind", "message", "pointer"?}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    pointer: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into(), pointer: None }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (status, kind) = match &e {
            Error::Schema { pointer, message } => {
                return Self {
                    status: StatusCode::BAD_REQUEST,
                    kind: "schema",
                    message: message.clone(),
                    pointer: Some(pointer.clone()),
                }
            }
            Error::Parse(_) => (StatusCode::BAD_REQUEST, "parse"),
            Error::Dimension(_) => (StatusCode::BAD_REQUEST, "dimension"),
            Error::InvalidProblem(_) => (StatusCode::BAD_REQUEST, "invalid_problem"),
            Error::Empty(_) => (StatusCode::BAD_REQUEST, "empty"),
            Error::ClassificationMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "classification_mismatch"),
            Error::Arity(_) => (StatusCode::UNPROCESSABLE_ENTITY, "arity"),
            Error::Unsupported(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unsupported"),
            Error::LimitExceeded(_) => (StatusCode::PAYLOAD_TOO_LARGE, "limit_exceeded"),
            Error::Cancelled => (StatusCode::PAYLOAD_TOO_LARGE, "time_budget"),
            Error::Lp(_) | Error::NonConvergence { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "numeric"),
        };
        Self { status, kind, message, pointer: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"kind": self.kind, "message": self.message});
        if let Some(p) = self.pointer {
            body["pointer"] = json!(p);
        }
        json_response(self.status, &json!({ "error": body }), None)
    }
}

fn json_response<T: Serialize>(status: StatusCode, value: &T, elapsed: Option<Duration>) -> Response {
    let body = match serde_json::to_vec(value) {
        Ok(b) => b,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    };
    let mut response =
        (status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response();
    if let Some(t) = elapsed {
        if let Ok(v) = HeaderValue::from_str(&t.as_millis().to_string()) {
            response.headers_mut().insert(SOLVE_TIME_HEADER, v);
        }
    }
    response
}

/// Cancels the token when dropped, so an abandoned request stops its solve.
struct CancelOnDrop(CancelToken);

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        self.0.cancel();
    }
}

/// Runs `work` on the blocking pool under the time budget.
async fn run_blocking<T, F>(config: &Config, work: F) -> Result<(T, Duration), ApiError>
where
    T: Send + 'static,
    F: FnOnce(CancelToken) -> Result<T, Error> + Send + 'static,
{
    let token = CancelToken::new();
    let guard = CancelOnDrop(token.clone());
    let start = Instant::now();
    let task = tokio::task::spawn_blocking(move || work(token));
    let out = match tokio::time::timeout(config.budget, task).await {
        Ok(Ok(result)) => result.map_err(ApiError::from),
        Ok(Err(join)) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", join.to_string())),
        Err(_) => Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "time_budget",
            format!("time budget of {} ms exceeded", config.budget.as_millis()),
        )),
    };
    drop(guard);
    out.map(|v| (v, start.elapsed()))
}

/// Parses and bounds-checks a request document and derives its settings.
fn prepare(body: &[u8], token: CancelToken) -> Result<(ProblemDocument, Settings), Error> {
    let doc = parse_document(body)?;
    let (n, m) = (doc.problem.n(), doc.problem.m());
    if n > MAX_SIDE || m > MAX_SIDE {
        return Err(Error::LimitExceeded(format!(
            "{n} x {m} matrix; the service accepts at most {MAX_SIDE} x {MAX_SIDE}"
        )));
    }
    let mut s = Settings::for_document(&doc);
    if s.oracle_grid.is_some_and(|g| g > MAX_ORACLE_GRID) {
        return Err(Error::LimitExceeded(format!("oracle grid above {MAX_ORACLE_GRID}")));
    }
    if s.axiom_trials > MAX_AXIOM_TRIALS {
        return Err(Error::LimitExceeded(format!("more than {MAX_AXIOM_TRIALS} axiom trials")));
    }
    let defaults = Limits::default();
    s.limits.max_supports = s.limits.max_supports.min(defaults.max_supports);
    s.limits.max_size = s.limits.max_size.min(defaults.max_size);
    s.limits.parallel = false;
    s.limits.cancel = Some(token);
    Ok((doc, s))
}

async fn handle<T, F>(config: Config, body: Bytes, report: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&ProblemDocument, &Settings) -> Result<T, Error> + Send + 'static,
{
    let result = run_blocking(&config, move |token| {
        let (doc, settings) = prepare(&body, token)?;
        report(&doc, &settings)
    })
    .await;
    match result {
        Ok((value, elapsed)) => json_response(StatusCode::OK, &value, Some(elapsed)),
        Err(e) => e.into_response(),
    }
}

async fn classify(State(config): State<Config>, body: Bytes) -> Response {
    handle(config, body, |doc, _| classify_report(doc)).await
}

async fn solve(State(config): State<Config>, body: Bytes) -> Response {
    handle(config, body, solve_report).await
}

async fn enumerate(State(config): State<Config>, body: Bytes) -> Response {
    handle(config, body, enumerate_report).await
}

async fn audit(State(config): State<Config>, body: Bytes) -> Response {
    handle(config, body, audit_report).await
}

async fn components(State(config): State<Config>, body: Bytes) -> Response {
    handle(config, body, components_report).await
}

async fn list_demos() -> Response {
    let list: Vec<_> = DEMOS.iter().map(|(name, title)| json!({"name": name, "title": title})).collect();
    json_response(StatusCode::OK, &list, None)
}

#[derive(Debug, Deserialize)]
struct DemoQuery {
    #[serde(default)]
    mode: Mode,
}

async fn demo(State(config): State<Config>, Path(name): Path<String>, Query(q): Query<DemoQuery>) -> Response {
    if !DEMOS.iter().any(|(n, _)| *n == name) {
        return ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown demo {name:?}")).into_response();
    }
    match run_blocking(&config, move |_| run_demo(&name, q.mode)).await {
        Ok((report, elapsed)) => json_response(StatusCode::OK, &report, Some(elapsed)),
        Err(e) => e.into_response(),
    }
}
