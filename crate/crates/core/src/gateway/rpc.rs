//! Stateless JSON bridge to the chain and contract queries.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chain::{Address, ChainHandle, Hash32, Transaction};
use crate::contracts::CallPayload;

pub const METHODS: [&str; 5] = ["submit_tx", "head", "block", "tx_status", "contract_query"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RpcError {
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("bad params: {0}")]
    BadParams(String),
    #[error("{0}")]
    Upstream(String),
    #[error("transport: {0}")]
    Transport(String),
}

impl RpcError {
    pub fn kind(&self) -> &'static str {
        match self {
            RpcError::UnknownMethod(_) => "UnknownMethod",
            RpcError::BadParams(_) => "BadParams",
            RpcError::Upstream(_) => "Upstream",
            RpcError::Transport(_) => "Transport",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            RpcError::UnknownMethod(_) | RpcError::BadParams(_) => 400,
            RpcError::Upstream(_) => 422,
            RpcError::Transport(_) => 502,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcRequest {
    pub method: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcReply {
    pub height: u64,
    pub result: Value,
}

/// Wire form of a reply: `{"height", "result"}` or `{"height", "error"}`.
pub fn reply_body(height: u64, outcome: &Result<Value, RpcError>) -> Value {
    match outcome {
        Ok(result) => json!({"height": height, "result": result}),
        Err(e) => json!({"height": height, "error": {"kind": e.kind(), "message": e.to_string()}}),
    }
}

/// Parses a wire reply back into a result.
pub fn parse_reply(body: &[u8]) -> Result<RpcReply, RpcError> {
    let v: Value = serde_json::from_slice(body).map_err(|e| RpcError::Transport(e.to_string()))?;
    let height = v["height"].as_u64().ok_or_else(|| RpcError::Transport("reply without height".into()))?;
    if let Some(err) = v.get("error") {
        let msg = err["message"].as_str().unwrap_or_default().to_string();
        return Err(match err["kind"].as_str() {
            Some("UnknownMethod") => RpcError::UnknownMethod(msg.trim_start_matches("unknown method ").to_string()),
            Some("BadParams") => RpcError::BadParams(msg.trim_start_matches("bad params: ").to_string()),
            Some("Upstream") => RpcError::Upstream(msg),
            _ => RpcError::Transport(msg),
        });
    }
    Ok(RpcReply { height, result: v["result"].clone() })
}

fn param_str<'a>(params: &'a Value, key: &str) -> Result<&'a str, RpcError> {
    params[key].as_str().ok_or_else(|| RpcError::BadParams(format!("missing string param {key}")))
}

fn param_hash(params: &Value, key: &str) -> Result<Hash32, RpcError> {
    let s = param_str(params, key)?;
    Hash32::from_hex(s).ok_or_else(|| RpcError::BadParams(format!("{key} is not a 32-byte hex hash")))
}

fn block_json(block: &crate::chain::Block) -> Value {
    json!({
        "hash": block.hash(),
        "header": block.header,
        "transactions": block.transactions,
        "encoded": hex::encode(block.encode()),
    })
}

/// Runs one RPC method. The reply carries the height of the snapshot it
/// was answered from; `submit_tx` reports the height at submission.
pub fn dispatch(chain: &ChainHandle, method: &str, params: &Value) -> (u64, Result<Value, RpcError>) {
    let snap = chain.snapshot();
    let height = snap.height();
    let result = match method {
        "submit_tx" => (|| {
            let raw = hex::decode(param_str(params, "tx")?).map_err(|e| RpcError::BadParams(format!("tx hex: {e}")))?;
            let tx = Transaction::decode(&raw).map_err(|e| RpcError::BadParams(e.to_string()))?;
            let hash = chain.submit(tx).map_err(|e| RpcError::Upstream(e.to_string()))?;
            Ok(json!({"tx_hash": hash}))
        })(),
        "head" => Ok(json!({"hash": snap.head_hash, "header": snap.header})),
        "block" => (|| {
            let block = if let Some(h) = params.get("height") {
                let h = h.as_u64().ok_or_else(|| RpcError::BadParams("height must be an integer".into()))?;
                snap.block_at(h).ok_or_else(|| RpcError::Upstream(format!("no block at height {h}")))?
            } else {
                let hash = param_hash(params, "hash")?;
                snap.block_by_hash(&hash).ok_or_else(|| RpcError::Upstream(format!("unknown block {hash}")))?
            };
            Ok(block_json(block))
        })(),
        "tx_status" => (|| {
            let hash = param_hash(params, "hash")?;
            let status = match snap.confirmed(&hash) {
                Some(st) => st,
                None => chain.tx_status(&hash).map_err(|e| RpcError::Upstream(e.to_string()))?,
            };
            Ok(serde_json::to_value(status).expect("status serializes"))
        })(),
        "contract_query" => (|| {
            let contract = Address::from_hex(param_str(params, "contract")?)
                .ok_or_else(|| RpcError::BadParams("contract is not an address".into()))?;
            let function = param_str(params, "function")?;
            let args: Vec<String> = match params.get("args") {
                None | Some(Value::Null) => Vec::new(),
                Some(v) => serde_json::from_value(v.clone()).map_err(|_| RpcError::BadParams("args must be strings".into()))?,
            };
            let caller = match params.get("caller").and_then(Value::as_str) {
                Some(c) => Address::from_hex(c).ok_or_else(|| RpcError::BadParams("caller is not an address".into()))?,
                None => Address::ZERO,
            };
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            snap.query(caller, &CallPayload::new(contract, function, &args))
                .map_err(|e| RpcError::Upstream(e.to_string()))
        })(),
        other => Err(RpcError::UnknownMethod(other.to_string())),
    };
    (height, result)
}

/// Read access to the ledger as the access-control stage sees it.
pub trait ChainClient: Send + Sync {
    fn call(&self, method: &str, params: Value) -> Result<RpcReply, RpcError>;

    fn query(&self, contract: &Address, function: &str, args: &[&str]) -> Result<RpcReply, RpcError> {
        self.call("contract_query", json!({"contract": contract, "function": function, "args": args}))
    }

    fn height(&self) -> Result<u64, RpcError> {
        Ok(self.call("head", Value::Null)?.height)
    }
}

/// In-process client.
pub struct LocalChain(pub std::sync::Arc<ChainHandle>);

impl ChainClient for LocalChain {
    fn call(&self, method: &str, params: Value) -> Result<RpcReply, RpcError> {
        let (height, r) = dispatch(&self.0, method, &params);
        r.map(|result| RpcReply { height, result })
    }
}

/// Client for a remote `/v1/rpc` endpoint.
pub struct HttpChain {
    url: String,
    agent: ureq::Agent,
}

impl HttpChain {
    pub fn new(base_url: &str) -> Self {
        HttpChain { url: format!("{}/v1/rpc", base_url.trim_end_matches('/')), agent: super::client::agent(Duration::from_secs(10)) }
    }
}

impl ChainClient for HttpChain {
    fn call(&self, method: &str, params: Value) -> Result<RpcReply, RpcError> {
        let body = serde_json::to_vec(&RpcRequest { method: method.to_string(), params }).expect("request serializes");
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(&body[..])
            .map_err(|e| RpcError::Transport(e.to_string()))?;
        let bytes = resp.body_mut().read_to_vec().map_err(|e| RpcError::Transport(e.to_string()))?;
        parse_reply(&bytes)
    }
}
