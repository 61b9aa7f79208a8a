//! HTTP service fabric: feature intake from the edge, token-guarded service
//! requests, a JSON RPC bridge to the ledger, and a micro/mono deployment
//! switch.
//!
//! Every deployment runs the same units: a front door, an access-control
//! unit, a service unit and a ledger RPC unit, each on its own loopback
//! socket and worker pool. In mono mode the front door calls access control
//! and the services in-process; in micro mode it crosses two socket hops
//! (front to access control, access control to service) with the configured
//! per-hop delay. Access control always reads the ledger through RPC.

mod access;
pub mod client;
mod http;
pub mod rpc;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock, TryLockError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chain::{genesis_contract_address, Address, ChainHandle, Hash32};
use crate::contracts::DenyReason;
use crate::tracker::{parse_features, FeatureVector};

pub use client::{GatewayClient, HttpReply};
pub use http::Reply;
pub use rpc::{ChainClient, HttpChain, LocalChain, RpcError, RpcReply};

use http::{Handler, HttpUnit, Incoming};

pub const MAX_BODY: usize = 1 << 20;
pub const MICRO_HOPS: u32 = 2;

pub const H_VID: &str = "X-VID";
pub const H_TOKEN: &str = "X-Token-Id";
pub const H_REQUEST: &str = "X-Request-Id";
pub const H_DECISION_US: &str = "X-Decision-Us";
pub const H_AUTH_US: &str = "X-Auth-Us";
pub const H_ACCESS_US: &str = "X-Access-Us";
pub const H_SERVICE_US: &str = "X-Service-Us";
const H_ENFORCE: &str = "X-Enforce";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("bind failed: {0}")]
    Bind(String),
    #[error("requests in flight; mode change needs a quiescent gateway")]
    Busy,
    #[error("transport: {0}")]
    Transport(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Micro,
    Mono,
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "micro" => Ok(Arch::Micro),
            "mono" => Ok(Arch::Mono),
            other => Err(format!("unknown architecture {other:?} (micro|mono)")),
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Micro => "micro",
            Arch::Mono => "mono",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentMode {
    pub arch: Arch,
    pub hop_delay_ms: f64,
}

impl DeploymentMode {
    pub fn mono() -> Self {
        DeploymentMode { arch: Arch::Mono, hop_delay_ms: 0.0 }
    }

    pub fn micro(hop_delay_ms: f64) -> Self {
        DeploymentMode { arch: Arch::Micro, hop_delay_ms }
    }

    /// Delay actually applied per hop; mono mode ignores the configured one.
    pub fn effective_hop_delay(&self) -> Duration {
        match self.arch {
            Arch::Mono => Duration::ZERO,
            Arch::Micro => Duration::from_secs_f64(self.hop_delay_ms.max(0.0) / 1000.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub mode: DeploymentMode,
    pub enforce: bool,
    /// Simulated client-to-gateway link, applied to every front-door
    /// request in both modes.
    pub client_link_delay_ms: f64,
    pub feature_queue_capacity: usize,
    pub decision_cache: bool,
    pub registry: Address,
    pub capability: Address,
    pub workers: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            mode: DeploymentMode::mono(),
            enforce: true,
            client_link_delay_ms: 0.0,
            feature_queue_capacity: 100_000,
            decision_cache: false,
            registry: genesis_contract_address(0),
            capability: genesis_contract_address(1),
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub requester_vid: String,
    pub token_id: Option<Hash32>,
    pub resource: String,
    pub action: String,
    #[serde(default)]
    pub body: String,
    pub request_id: String,
}

pub trait Service: Send + Sync {
    fn call(&self, req: &ServiceRequest) -> Result<Value, String>;
}

impl<F> Service for F
where
    F: Fn(&ServiceRequest) -> Result<Value, String> + Send + Sync,
{
    fn call(&self, req: &ServiceRequest) -> Result<Value, String> {
        self(req)
    }
}

/// Returns the request's resource, action and body.
pub struct EchoService;

impl Service for EchoService {
    fn call(&self, req: &ServiceRequest) -> Result<Value, String> {
        Ok(json!({"resource": req.resource, "action": req.action, "echo": req.body}))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AccessOutcome {
    Granted { token_id: Hash32 },
    Denied { reason: DenyReason },
    AuthFailed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub request_id: String,
    pub vid: String,
    pub resource: String,
    pub action: String,
    pub height: u64,
    pub outcome: AccessOutcome,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageTimes {
    pub auth_us: u64,
    pub access_us: u64,
    pub service_us: u64,
}

impl StageTimes {
    pub fn decision_us(&self) -> u64 {
        self.auth_us + self.access_us
    }

    fn stamp(self, reply: Reply) -> Reply {
        reply
            .header(H_AUTH_US, self.auth_us)
            .header(H_ACCESS_US, self.access_us)
            .header(H_SERVICE_US, self.service_us)
            .header(H_DECISION_US, self.decision_us())
    }

    fn from_reply(reply: &Reply) -> Self {
        let get = |h| reply.header_value(h).and_then(|v| v.parse().ok()).unwrap_or(0);
        StageTimes { auth_us: get(H_AUTH_US), access_us: get(H_ACCESS_US), service_us: get(H_SERVICE_US) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Routing {
    mode: DeploymentMode,
    enforce: bool,
}

#[derive(Default)]
struct DecisionCache {
    height: u64,
    entries: BTreeMap<(String, Option<Hash32>, String, String), AccessOutcome>,
}

struct Shared {
    config: GatewayConfig,
    routing: RwLock<Routing>,
    services: BTreeMap<String, Arc<dyn Service>>,
    chain: Arc<ChainHandle>,
    ledger: OnceLock<Box<dyn ChainClient>>,
    features: Mutex<VecDeque<FeatureVector>>,
    access_log: Mutex<Vec<AccessRecord>>,
    request_ids: Mutex<HashSet<String>>,
    next_id: AtomicU64,
    cache: Mutex<DecisionCache>,
    hop_agent: ureq::Agent,
    access_url: OnceLock<String>,
    service_url: OnceLock<String>,
}

fn micros(since: Instant) -> u64 {
    since.elapsed().as_micros() as u64
}

impl Shared {
    fn ledger(&self) -> &dyn ChainClient {
        self.ledger.get().expect("ledger unit started").as_ref()
    }

    fn front(&self, req: Incoming) -> Reply {
        if self.config.client_link_delay_ms > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(self.config.client_link_delay_ms / 1000.0));
        }
        // held for the whole request so mode changes see it as in flight
        let Ok(guard) = self.routing.read() else {
            return Reply::error(500, "Internal", "routing lock poisoned");
        };
        let routing = *guard;
        let reply = match (req.method.as_str(), req.path.as_str()) {
            ("GET", "/v1/health") => Reply::json(
                200,
                &json!({
                    "status": "ok",
                    "arch": routing.mode.arch,
                    "enforce": routing.enforce,
                    "height": self.chain.snapshot().height(),
                }),
            ),
            ("POST", "/v1/features") => self.post_features(&req),
            ("POST", "/v1/rpc") => self.rpc(&req),
            ("POST", path) if path.starts_with("/v1/service/") => {
                let name = &path["/v1/service/".len()..];
                self.guarded(name, &req, routing)
            }
            _ => Reply::error(404, "NotFound", req.path.clone()),
        };
        drop(guard);
        if reply.header_value(H_DECISION_US).is_some() {
            reply
        } else {
            reply.header(H_DECISION_US, 0)
        }
    }

    fn post_features(&self, req: &Incoming) -> Reply {
        let Some(body) = &req.body else {
            return Reply::error(413, "TooLarge", format!("body exceeds {MAX_BODY} octets"));
        };
        let map = match parse_features(body) {
            Ok(m) => m,
            Err(e) => return Reply::error(400, "SchemaError", e.to_string()),
        };
        let mut q = self.features.lock().expect("feature queue");
        if q.len() + map.len() > self.config.feature_queue_capacity {
            return Reply::error(503, "QueueFull", format!("{} queued", q.len()));
        }
        let n = map.len();
        q.extend(map.entries.into_values());
        Reply::json(200, &json!({"accepted": n}))
    }

    fn rpc(&self, req: &Incoming) -> Reply {
        let Some(body) = &req.body else {
            return Reply::error(413, "TooLarge", format!("body exceeds {MAX_BODY} octets"));
        };
        let (height, outcome) = match serde_json::from_slice::<rpc::RpcRequest>(body) {
            Ok(r) => rpc::dispatch(&self.chain, &r.method, &r.params),
            Err(e) => (self.chain.snapshot().height(), Err(RpcError::BadParams(e.to_string()))),
        };
        let status = outcome.as_ref().err().map(RpcError::status).unwrap_or(200);
        Reply::json(status, &rpc::reply_body(height, &outcome))
    }

    fn parse_service_request(&self, req: &Incoming) -> Result<ServiceRequest, Reply> {
        #[derive(Deserialize)]
        struct Body {
            resource: String,
            action: String,
            #[serde(default)]
            body: String,
        }
        let Some(raw) = &req.body else {
            return Err(Reply::error(413, "TooLarge", format!("body exceeds {MAX_BODY} octets")));
        };
        let b: Body = serde_json::from_slice(raw).map_err(|e| Reply::error(400, "SchemaError", e.to_string()))?;
        if b.resource.is_empty() {
            return Err(Reply::error(400, "SchemaError", "resource must be non-empty"));
        }
        let token_id = match req.header(H_TOKEN) {
            None | Some("") => None,
            Some(t) => Some(Hash32::from_hex(t).ok_or_else(|| Reply::error(400, "SchemaError", "X-Token-Id is not a hash"))?),
        };
        let request_id = match req.header(H_REQUEST) {
            Some(id) if !id.is_empty() => id.to_string(),
            _ => format!("gw-{}", self.next_id.fetch_add(1, Ordering::Relaxed)),
        };
        if !self.request_ids.lock().expect("request ids").insert(request_id.clone()) {
            return Err(Reply::error(409, "DuplicateRequestId", request_id));
        }
        Ok(ServiceRequest {
            requester_vid: req.header(H_VID).unwrap_or_default().to_string(),
            token_id,
            resource: b.resource,
            action: b.action,
            body: b.body,
            request_id,
        })
    }

    fn guarded(&self, name: &str, req: &Incoming, routing: Routing) -> Reply {
        if !self.services.contains_key(name) {
            return Reply::error(404, "UnknownService", name);
        }
        let sreq = match self.parse_service_request(req) {
            Ok(r) => r,
            Err(reply) => return reply,
        };
        match routing.mode.arch {
            Arch::Mono => self.guard(&sreq, routing.enforce, |r| self.run_service(name, r)),
            Arch::Micro => {
                let delay = routing.mode.effective_hop_delay();
                let url = format!("{}/unit/guard/{name}", self.access_url.get().expect("access unit"));
                let enforce = if routing.enforce { "1" } else { "0" };
                self.hop(&url, delay, &sreq, &[(H_ENFORCE, enforce), (H_HOP_DELAY, &delay.as_nanos().to_string())])
            }
        }
    }

    /// Sends the request one socket hop further, after the injected delay.
    fn hop(&self, url: &str, delay: Duration, sreq: &ServiceRequest, headers: &[(&str, &str)]) -> Reply {
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        let body = serde_json::to_vec(sreq).expect("request serializes");
        let mut rb = self.hop_agent.post(url).header("Content-Type", "application/json");
        for (k, v) in headers {
            rb = rb.header(*k, *v);
        }
        let mut resp = match rb.send(&body[..]) {
            Ok(r) => r,
            Err(e) => return Reply::error(502, "ServiceUnavailable", e.to_string()),
        };
        let status = resp.status().as_u16();
        let hdrs = resp
            .headers()
            .iter()
            .filter(|(k, _)| k.as_str().starts_with("x-"))
            .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_string(), v.to_string())))
            .collect();
        match resp.body_mut().read_to_vec() {
            Ok(body) => Reply { status, body, headers: hdrs },
            Err(e) => Reply::error(502, "ServiceUnavailable", e.to_string()),
        }
    }

    fn run_service(&self, name: &str, req: &ServiceRequest) -> Reply {
        let Some(svc) = self.services.get(name) else {
            return Reply::error(404, "UnknownService", name);
        };
        let start = Instant::now();
        let out = svc.call(req);
        let us = micros(start);
        let reply = match out {
            Ok(v) => Reply::json(200, &v),
            Err(e) => Reply::error(502, "ServiceUnavailable", e),
        };
        reply.header(H_SERVICE_US, us)
    }

    /// Authentication, then authorization, then `next`. Stage timings go
    /// out as response headers.
    fn guard(&self, req: &ServiceRequest, enforce: bool, next: impl FnOnce(&ServiceRequest) -> Reply) -> Reply {
        let mut times = StageTimes::default();
        if enforce {
            let (outcome, height) = match access::decide(self, req, &mut times) {
                Ok(v) => v,
                Err(e) => return times.stamp(Reply::error(502, "ServiceUnavailable", e.to_string())),
            };
            self.access_log.lock().expect("access log").push(AccessRecord {
                request_id: req.request_id.clone(),
                vid: req.requester_vid.clone(),
                resource: req.resource.clone(),
                action: req.action.clone(),
                height,
                outcome: outcome.clone(),
            });
            match outcome {
                AccessOutcome::Granted { .. } => {}
                AccessOutcome::AuthFailed { reason } => return times.stamp(Reply::error(401, "AuthFailed", reason)),
                AccessOutcome::Denied { reason } => {
                    let r = serde_json::to_value(reason).expect("reason serializes");
                    return times.stamp(Reply::json(403, &json!({"error": "AccessDenied", "reason": r})));
                }
            }
        }
        let reply = next(req);
        times.service_us = StageTimes::from_reply(&reply).service_us;
        let mut reply = reply;
        reply.headers.retain(|(k, _)| !k.eq_ignore_ascii_case(H_SERVICE_US));
        times.stamp(reply)
    }

    fn access_unit(&self, req: Incoming) -> Reply {
        let Some(name) = req.path.strip_prefix("/unit/guard/") else {
            return Reply::error(404, "NotFound", req.path.clone());
        };
        let sreq: ServiceRequest = match req.body.as_deref().map(serde_json::from_slice) {
            Some(Ok(r)) => r,
            _ => return Reply::error(400, "SchemaError", "internal hop body"),
        };
        let enforce = req.header(H_ENFORCE) == Some("1");
        let delay = Duration::from_nanos(req.header(H_HOP_DELAY).and_then(|v| v.parse().ok()).unwrap_or(0));
        let url = format!("{}/unit/service/{name}", self.service_url.get().expect("service unit"));
        self.guard(&sreq, enforce, |r| self.hop(&url, delay, r, &[]))
    }

    fn service_unit(&self, req: Incoming) -> Reply {
        let Some(name) = req.path.strip_prefix("/unit/service/") else {
            return Reply::error(404, "NotFound", req.path.clone());
        };
        match req.body.as_deref().map(serde_json::from_slice::<ServiceRequest>) {
            Some(Ok(r)) => self.run_service(name, &r),
            _ => Reply::error(400, "SchemaError", "internal hop body"),
        }
    }

    fn ledger_unit(&self, req: Incoming) -> Reply {
        match (req.method.as_str(), req.path.as_str()) {
            ("POST", "/v1/rpc") => self.rpc(&req),
            _ => Reply::error(404, "NotFound", req.path.clone()),
        }
    }
}

const H_HOP_DELAY: &str = "X-Hop-Delay-Ns";

/// A running gateway. Dropping it stops every unit.
pub struct Gateway {
    front: HttpUnit,
    _access: HttpUnit,
    _service: HttpUnit,
    ledger: HttpUnit,
    shared: Arc<Shared>,
}

impl Gateway {
    pub fn start(
        chain: Arc<ChainHandle>,
        services: Vec<(String, Arc<dyn Service>)>,
        config: GatewayConfig,
    ) -> Result<Self, GatewayError> {
        if config.feature_queue_capacity == 0 {
            return Err(GatewayError::Config("feature queue capacity must be positive".into()));
        }
        let shared = Arc::new(Shared {
            routing: RwLock::new(Routing { mode: config.mode, enforce: config.enforce }),
            services: services.into_iter().collect(),
            chain,
            ledger: OnceLock::new(),
            features: Mutex::new(VecDeque::new()),
            access_log: Mutex::new(Vec::new()),
            request_ids: Mutex::new(HashSet::new()),
            next_id: AtomicU64::new(1),
            cache: Mutex::new(DecisionCache::default()),
            hop_agent: client::agent(Duration::from_secs(30)),
            access_url: OnceLock::new(),
            service_url: OnceLock::new(),
            config,
        });
        let workers = shared.config.workers;
        let unit = |name: &str, f: fn(&Shared, Incoming) -> Reply| -> Result<HttpUnit, GatewayError> {
            let s = shared.clone();
            let handler: Handler = Arc::new(move |req| f(&s, req));
            HttpUnit::spawn(name, workers, MAX_BODY, handler)
        };
        let ledger = unit("gw-ledger", Shared::ledger_unit)?;
        let service = unit("gw-service", Shared::service_unit)?;
        let access = unit("gw-access", Shared::access_unit)?;
        let _ = shared.ledger.set(Box::new(HttpChain::new(&ledger.url())));
        let _ = shared.service_url.set(service.url());
        let _ = shared.access_url.set(access.url());
        let front = unit("gw-front", Shared::front)?;
        Ok(Gateway { front, _access: access, _service: service, ledger, shared })
    }

    pub fn url(&self) -> String {
        self.front.url()
    }

    pub fn ledger_url(&self) -> String {
        self.ledger.url()
    }

    pub fn client(&self) -> GatewayClient {
        GatewayClient::new(&self.url())
    }

    pub fn mode(&self) -> DeploymentMode {
        self.shared.routing.read().expect("routing").mode
    }

    pub fn enforcing(&self) -> bool {
        self.shared.routing.read().expect("routing").enforce
    }

    fn reroute(&self, f: impl FnOnce(&mut Routing)) -> Result<(), GatewayError> {
        match self.shared.routing.try_write() {
            Ok(mut r) => {
                f(&mut r);
                Ok(())
            }
            Err(TryLockError::WouldBlock) => Err(GatewayError::Busy),
            Err(TryLockError::Poisoned(_)) => Err(GatewayError::Config("routing lock poisoned".into())),
        }
    }

    /// Fails with [`GatewayError::Busy`] while any front-door request is
    /// being served.
    pub fn set_mode(&self, mode: DeploymentMode) -> Result<(), GatewayError> {
        self.reroute(|r| r.mode = mode)
    }

    pub fn set_enforcement(&self, enforce: bool) -> Result<(), GatewayError> {
        self.reroute(|r| r.enforce = enforce)
    }

    /// Removes up to `max` queued feature vectors in arrival order.
    pub fn take_features(&self, max: usize) -> Vec<FeatureVector> {
        let mut q = self.shared.features.lock().expect("feature queue");
        let n = max.min(q.len());
        q.drain(..n).collect()
    }

    pub fn queued_features(&self) -> usize {
        self.shared.features.lock().expect("feature queue").len()
    }

    pub fn access_log(&self) -> Vec<AccessRecord> {
        self.shared.access_log.lock().expect("access log").clone()
    }

    /// Calls a service directly, bypassing HTTP and access control.
    pub fn call_direct(&self, name: &str, req: &ServiceRequest) -> Result<Value, String> {
        let svc = self.shared.services.get(name).ok_or_else(|| format!("unknown service {name}"))?;
        svc.call(req)
    }
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("url", &self.url()).field("mode", &self.mode()).finish()
    }
}

#[cfg(test)]
mod tests;
