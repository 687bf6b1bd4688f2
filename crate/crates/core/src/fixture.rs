//! In-process HTTP server speaking the completion and label protocols.
//!
//! Completions come from [`SyntheticBackend`] keyed by the request's model
//! name; labels come from a [`LexiconPredictor`]. Used by `mock-serve` and by
//! tests that need a real socket.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Request, Response, Server};

use crate::boundary::{BoundaryPredictor, LexiconPredictor, TokenKind, WireLabelRequest, WireLabelResponse};
use crate::gateway::http::{WireChoice, WireCompletionRequest, WireCompletionResponse};
use crate::gateway::mock::{MockSpec, SyntheticBackend};

#[derive(Debug, thiserror::Error)]
#[error("cannot bind fixture server on {addr}: {reason}")]
pub struct FixtureError {
    pub addr: String,
    pub reason: String,
}

/// Counters exposed for tests.
#[derive(Debug, Default)]
pub struct FixtureStats {
    pub completions: AtomicUsize,
    pub labels: AtomicUsize,
    pub injected_failures: AtomicUsize,
}

struct State {
    backend: SyntheticBackend,
    predictor: LexiconPredictor,
    stats: Arc<FixtureStats>,
    /// Answer this many completion requests with 503 before serving.
    fail_first: usize,
}

pub struct FixtureServer {
    server: Arc<Server>,
    addr: SocketAddr,
    stats: Arc<FixtureStats>,
    workers: Vec<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start(addr: &str, spec: MockSpec, predictor: LexiconPredictor) -> Result<Self, FixtureError> {
        Self::start_with_faults(addr, spec, predictor, 0)
    }

    pub fn start_with_faults(
        addr: &str,
        spec: MockSpec,
        predictor: LexiconPredictor,
        fail_first: usize,
    ) -> Result<Self, FixtureError> {
        let server = Server::http(addr).map_err(|e| FixtureError {
            addr: addr.to_string(),
            reason: e.to_string(),
        })?;
        let bound = server.server_addr().to_ip().ok_or_else(|| FixtureError {
            addr: addr.to_string(),
            reason: "not an IP listener".into(),
        })?;
        let server = Arc::new(server);
        let stats = Arc::new(FixtureStats::default());
        let state = Arc::new(State {
            backend: SyntheticBackend::new(spec),
            predictor,
            stats: stats.clone(),
            fail_first,
        });
        let workers = (0..8)
            .map(|_| {
                let server = server.clone();
                let state = state.clone();
                std::thread::spawn(move || {
                    for request in server.incoming_requests() {
                        handle(&state, request);
                    }
                })
            })
            .collect();
        Ok(FixtureServer {
            server,
            addr: bound,
            stats,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> &FixtureStats {
        &self.stats
    }

    /// Blocks until the server is shut down from elsewhere.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        // one unblock per worker
        for _ in 1..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        if !self.workers.is_empty() {
            self.stop();
        }
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn error_body(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn handle(state: &State, mut request: Request) {
    let mut body = String::new();
    if request.as_reader().read_to_string(&mut body).is_err() {
        let _ = request.respond(json_response(400, error_body("body is not UTF-8")));
        return;
    }
    let (status, reply) = match (request.method(), request.url()) {
        (Method::Get, "/healthz") => (200, "{\"ok\":true}".to_string()),
        (Method::Post, "/v1/completions") => completions(state, &body),
        (Method::Post, "/v1/label") => label(state, &body),
        _ => (404, error_body("not found")),
    };
    let _ = request.respond(json_response(status, reply));
}

fn completions(state: &State, body: &str) -> (u16, String) {
    let n = state.stats.completions.fetch_add(1, Ordering::SeqCst);
    if n < state.fail_first {
        state.stats.injected_failures.fetch_add(1, Ordering::SeqCst);
        return (503, error_body("injected failure"));
    }
    let req: WireCompletionRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return (400, error_body(&format!("bad request: {e}"))),
    };
    if req.max_tokens == 0 {
        return (400, error_body("max_tokens must be positive"));
    }
    let out = state.backend.generate(&req.model, &req.prompt, req.max_tokens);
    let resp = WireCompletionResponse {
        choices: vec![WireChoice {
            text: out.text,
            finish_reason: Some(out.finish_reason.as_wire().to_string()),
        }],
    };
    (200, serde_json::to_string(&resp).expect("response serializes"))
}

fn label(state: &State, body: &str) -> (u16, String) {
    state.stats.labels.fetch_add(1, Ordering::SeqCst);
    let req: WireLabelRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return (400, error_body(&format!("bad request: {e}"))),
    };
    let target = match req.target.as_str() {
        "style" => TokenKind::Style,
        "capability" => TokenKind::Capability,
        other => return (400, error_body(&format!("unknown target {other:?}"))),
    };
    match state.predictor.predict(&req.text, target) {
        Ok(v) => (200, serde_json::to_string(&WireLabelResponse::from(v)).expect("serializes")),
        Err(e) => (400, error_body(&e.to_string())),
    }
}
