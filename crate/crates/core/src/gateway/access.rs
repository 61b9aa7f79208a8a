use std::time::Instant;

use serde_json::Value;

use super::rpc::RpcError;
use super::{micros, AccessOutcome, Shared, ServiceRequest, StageTimes};
use crate::contracts::{CapabilityToken, Decision, DenyReason, RegistrationEntry};

/// Registry lookup and token ownership (auth stage), then `verify_access`
/// at the head the ledger answers from (access stage). Returns the outcome
/// and that height.
pub(super) fn decide(shared: &Shared, req: &ServiceRequest, times: &mut StageTimes) -> Result<(AccessOutcome, u64), RpcError> {
    let ledger = shared.ledger();
    let key = (req.requester_vid.clone(), req.token_id, req.resource.clone(), req.action.clone());
    let cached_height = if shared.config.decision_cache {
        let start = Instant::now();
        let h = ledger.height()?;
        let mut cache = shared.cache.lock().expect("decision cache");
        if cache.height != h {
            cache.entries.clear();
            cache.height = h;
        }
        let hit = cache.entries.get(&key).cloned();
        times.auth_us += micros(start);
        if let Some(outcome) = hit {
            return Ok((outcome, h));
        }
        Some(h)
    } else {
        None
    };

    let start = Instant::now();
    let auth = authenticate(shared, req);
    times.auth_us += micros(start);
    let (address, height) = match auth? {
        Ok(v) => v,
        Err(outcome) => return Ok((outcome, cached_height.unwrap_or(0))),
    };

    let start = Instant::now();
    let reply = ledger.query(
        &shared.config.capability,
        "verify_access",
        &[&address.to_string(), &req.resource, &req.action],
    );
    times.access_us += micros(start);
    let (outcome, h) = match reply {
        Ok(r) => {
            let decision: Decision =
                serde_json::from_value(r.result).map_err(|e| RpcError::Transport(format!("decision: {e}")))?;
            let outcome = match decision {
                Decision::Grant { token_id } => AccessOutcome::Granted { token_id },
                Decision::Deny { reason } => AccessOutcome::Denied { reason },
            };
            (outcome, r.height)
        }
        // malformed resource or action from the client
        Err(RpcError::Upstream(msg)) => (AccessOutcome::AuthFailed { reason: msg }, height),
        Err(e) => return Err(e),
    };
    if let Some(ch) = cached_height {
        let mut cache = shared.cache.lock().expect("decision cache");
        if cache.height == ch && h == ch {
            cache.entries.insert(key, outcome.clone());
        }
    }
    Ok((outcome, h))
}

type Authenticated = Result<(crate::chain::Address, u64), AccessOutcome>;

fn authenticate(shared: &Shared, req: &ServiceRequest) -> Result<Authenticated, RpcError> {
    let ledger = shared.ledger();
    let fail = |reason: &str| Ok(Err(AccessOutcome::AuthFailed { reason: reason.to_string() }));
    if req.requester_vid.is_empty() {
        return fail("missing X-VID");
    }
    let reply = ledger.query(&shared.config.registry, "lookup_vid", &[&req.requester_vid])?;
    if reply.result == Value::Null {
        return fail("unregistered vid");
    }
    let entry: RegistrationEntry =
        serde_json::from_value(reply.result).map_err(|e| RpcError::Transport(format!("registration entry: {e}")))?;
    if let Some(id) = req.token_id {
        match ledger.query(&shared.config.capability, "get_token", &[&id.to_hex()]) {
            Ok(r) => {
                let token: CapabilityToken =
                    serde_json::from_value(r.result).map_err(|e| RpcError::Transport(format!("token: {e}")))?;
                if token.subject != entry.address {
                    return fail("token subject does not match the vid");
                }
            }
            Err(RpcError::Upstream(_)) => return Ok(Err(AccessOutcome::Denied { reason: DenyReason::NoToken })),
            Err(e) => return Err(e),
        }
    }
    Ok(Ok((entry.address, reply.height)))
}
