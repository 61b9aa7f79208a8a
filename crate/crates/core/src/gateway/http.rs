//! Minimal threaded HTTP unit on top of tiny_http.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;
use tiny_http::{Header, Method, Request, Response, Server};

use super::GatewayError;

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
    pub headers: Vec<(String, String)>,
}

impl Reply {
    pub fn json(status: u16, value: &Value) -> Self {
        Reply { status, body: serde_json::to_vec(value).expect("json serializes"), headers: Vec::new() }
    }

    pub fn error(status: u16, kind: &str, reason: impl Into<String>) -> Self {
        Reply::json(status, &serde_json::json!({"error": kind, "reason": reason.into()}))
    }

    pub fn header(mut self, name: &str, value: impl ToString) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn header_value(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// Request as handed to a unit's handler, body already read.
#[derive(Debug, Clone)]
pub struct Incoming {
    pub method: Method,
    pub path: String,
    pub headers: Vec<(String, String)>,
    /// `None` when the body exceeded the unit's limit.
    pub body: Option<Vec<u8>>,
}

impl Incoming {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

pub type Handler = Arc<dyn Fn(Incoming) -> Reply + Send + Sync>;

/// A listening socket served by a fixed pool of worker threads. Dropping
/// the unit stops the workers.
pub struct HttpUnit {
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

fn read_body(req: &mut Request, limit: usize) -> Option<Vec<u8>> {
    if req.body_length().is_some_and(|n| n > limit) {
        return None;
    }
    let mut buf = Vec::new();
    match req.as_reader().take(limit as u64 + 1).read_to_end(&mut buf) {
        Ok(_) if buf.len() <= limit => Some(buf),
        _ => None,
    }
}

fn serve(mut req: Request, limit: usize, handler: &Handler) {
    let incoming = Incoming {
        method: req.method().clone(),
        path: req.url().split('?').next().unwrap_or_default().to_string(),
        headers: req.headers().iter().map(|h| (h.field.to_string(), h.value.to_string())).collect(),
        body: read_body(&mut req, limit),
    };
    let reply = handler(incoming);
    let mut resp = Response::from_data(reply.body)
        .with_status_code(reply.status)
        .with_header(Header::from_bytes("Content-Type", "application/json").expect("static header"));
    for (k, v) in &reply.headers {
        if let Ok(h) = Header::from_bytes(k.as_bytes(), v.as_bytes()) {
            resp = resp.with_header(h);
        }
    }
    if let Err(e) = req.respond(resp) {
        log::debug!("response not delivered: {e}");
    }
}

impl HttpUnit {
    pub fn spawn(name: &str, workers: usize, body_limit: usize, handler: Handler) -> Result<Self, GatewayError> {
        let server = Arc::new(Server::http("127.0.0.1:0").map_err(|e| GatewayError::Bind(e.to_string()))?);
        let addr = server.server_addr().to_ip().ok_or_else(|| GatewayError::Bind("not an ip listener".into()))?;
        let workers = (0..workers.max(1))
            .map(|i| {
                let server = server.clone();
                let handler = handler.clone();
                std::thread::Builder::new()
                    .name(format!("{name}-{i}"))
                    .spawn(move || {
                        while let Ok(req) = server.recv() {
                            serve(req, body_limit, &handler);
                        }
                    })
                    .expect("spawn worker")
            })
            .collect();
        Ok(HttpUnit { server, workers, addr })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for HttpUnit {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}
