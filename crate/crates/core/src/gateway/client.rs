//! Blocking HTTP client for the gateway endpoints.

use std::collections::BTreeMap;
use std::time::Duration;

use serde_json::{json, Value};

use super::rpc::{parse_reply, RpcError, RpcReply, RpcRequest};
use super::{GatewayError, ServiceRequest};
use crate::tracker::{serialize_features, FeatureMap};

/// Keep-alive agent that reports HTTP error statuses as ordinary replies.
pub fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .build()
        .into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpReply {
    pub status: u16,
    pub body: Vec<u8>,
    /// Lower-cased header names.
    pub headers: BTreeMap<String, String>,
}

impl HttpReply {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    pub fn header_u64(&self, name: &str) -> u64 {
        self.header(name).and_then(|v| v.parse().ok()).unwrap_or(0)
    }

    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }
}

pub struct GatewayClient {
    base: String,
    agent: ureq::Agent,
}

impl GatewayClient {
    pub fn new(base_url: &str) -> Self {
        GatewayClient { base: base_url.trim_end_matches('/').to_string(), agent: agent(Duration::from_secs(30)) }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<HttpReply, GatewayError> {
        let mut resp = resp.map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_ascii_lowercase(), v.to_string())))
            .collect();
        let body = resp.body_mut().read_to_vec().map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(HttpReply { status, body, headers })
    }

    pub fn post(&self, path: &str, headers: &[(&str, &str)], body: &[u8]) -> Result<HttpReply, GatewayError> {
        let mut req = self.agent.post(format!("{}{path}", self.base)).header("Content-Type", "application/json");
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        Self::finish(req.send(body))
    }

    pub fn get(&self, path: &str) -> Result<HttpReply, GatewayError> {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn health(&self) -> Result<HttpReply, GatewayError> {
        self.get("/v1/health")
    }

    pub fn post_features(&self, map: &FeatureMap) -> Result<HttpReply, GatewayError> {
        self.post("/v1/features", &[], &serialize_features(map))
    }

    pub fn service(&self, name: &str, req: &ServiceRequest) -> Result<HttpReply, GatewayError> {
        let token = req.token_id.map(|t| t.to_hex());
        let mut headers = vec![("X-VID", req.requester_vid.as_str()), ("X-Request-Id", req.request_id.as_str())];
        if let Some(t) = &token {
            headers.push(("X-Token-Id", t.as_str()));
        }
        let body = json!({"resource": req.resource, "action": req.action, "body": req.body});
        self.post(&format!("/v1/service/{name}"), &headers, &serde_json::to_vec(&body).expect("json"))
    }

    pub fn rpc(&self, method: &str, params: Value) -> Result<RpcReply, RpcError> {
        let body = serde_json::to_vec(&RpcRequest { method: method.to_string(), params }).expect("json");
        let reply = self.post("/v1/rpc", &[], &body).map_err(|e| RpcError::Transport(e.to_string()))?;
        parse_reply(&reply.body)
    }
}
