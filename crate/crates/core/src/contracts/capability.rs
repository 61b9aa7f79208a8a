//! Capability tokens: issue, delegate, revoke, verify.
//!
//! Expiry is by block height and exclusive: a token is live while
//! `height < expires_at`. Resource patterns are slash-delimited, and a
//! `*` segment matches exactly one segment.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::registration::entry_for_address;
use super::{arg_address, arg_hash, arg_u64, expect_args, CallContext, ContractError, Overlay};
use crate::chain::encoding::Encoder;
use crate::chain::hash::{digest, Address, Hash32};

pub(super) const EXPORTS: &[(&str, bool)] = &[
    ("configure", false),
    ("register_resource", false),
    ("issue", false),
    ("delegate", false),
    ("revoke", false),
    ("verify_access", true),
    ("get_token", true),
    ("tokens_of", true),
    ("owner_of", true),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Read,
    Write,
    Execute,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Read, Action::Write, Action::Execute];

    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Read => "read",
            Action::Write => "write",
            Action::Execute => "execute",
        }
    }
}

impl FromStr for Action {
    type Err = ContractError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "read" => Ok(Action::Read),
            "write" => Ok(Action::Write),
            "execute" => Ok(Action::Execute),
            other => Err(ContractError::ArgumentError(format!("unknown action {other:?}"))),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-empty set of actions, written as `read,write`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSet(BTreeSet<Action>);

impl ActionSet {
    pub fn new(actions: impl IntoIterator<Item = Action>) -> Self {
        ActionSet(actions.into_iter().collect())
    }

    pub fn contains(&self, a: Action) -> bool {
        self.0.contains(&a)
    }

    pub fn is_subset(&self, other: &ActionSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        self.0.iter().copied()
    }
}

impl FromStr for ActionSet {
    type Err = ContractError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let set = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Action::from_str)
            .collect::<Result<BTreeSet<_>, _>>()?;
        if set.is_empty() {
            return Err(ContractError::ArgumentError("empty action set".into()));
        }
        Ok(ActionSet(set))
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|a| a.as_str()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityToken {
    pub token_id: Hash32,
    pub issuer: Address,
    pub subject: Address,
    pub resource: String,
    pub actions: ActionSet,
    pub issued_at: u64,
    pub expires_at: u64,
    pub delegation_depth: u32,
    pub parent_token: Option<Hash32>,
    pub revoked: bool,
}

impl CapabilityToken {
    /// Canonical encoding of the immutable fields plus the issuing nonce,
    /// so two otherwise identical grants in one block stay distinct.
    fn compute_id(&self, nonce: u64) -> Hash32 {
        let parent = self.parent_token.map(|p| p.0.to_vec()).unwrap_or_default();
        digest(
            &Encoder::new()
                .bytes(&self.issuer.0)
                .bytes(&self.subject.0)
                .str(&self.resource)
                .str(&self.actions.to_string())
                .u64(self.issued_at)
                .u64(self.expires_at)
                .u64(self.delegation_depth as u64)
                .bytes(&parent)
                .u64(nonce)
                .finish(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DenyReason {
    NoToken,
    ResourceMismatch,
    Revoked,
    Expired,
    ActionDenied,
}

impl DenyReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DenyReason::NoToken => "NoToken",
            DenyReason::ResourceMismatch => "ResourceMismatch",
            DenyReason::Revoked => "Revoked",
            DenyReason::Expired => "Expired",
            DenyReason::ActionDenied => "ActionDenied",
        }
    }
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Grant { token_id: Hash32 },
    Deny { reason: DenyReason },
}

impl Decision {
    pub fn is_grant(&self) -> bool {
        matches!(self, Decision::Grant { .. })
    }
}

fn segments(path: &str) -> Option<Vec<&str>> {
    let rest = path.strip_prefix('/')?;
    let segs: Vec<&str> = rest.split('/').collect();
    if segs.iter().any(|s| s.is_empty()) {
        return None;
    }
    Some(segs)
}

pub fn validate_pattern(pattern: &str) -> Result<(), ContractError> {
    let segs = segments(pattern).ok_or_else(|| ContractError::ArgumentError(format!("bad resource pattern {pattern:?}")))?;
    if segs.iter().any(|s| s.contains('*') && *s != "*") {
        return Err(ContractError::ArgumentError(format!("`*` must be a whole segment in {pattern:?}")));
    }
    Ok(())
}

/// True iff concrete `resource` is matched by `pattern`.
pub fn pattern_matches(pattern: &str, resource: &str) -> bool {
    match (segments(pattern), segments(resource)) {
        (Some(p), Some(r)) => p.len() == r.len() && p.iter().zip(&r).all(|(p, r)| *p == "*" || p == r),
        _ => false,
    }
}

/// True iff every resource matched by `inner` is also matched by `outer`.
/// A `*` in `inner` is only covered by a `*` in `outer`, which is exactly
/// the literal-segment rule of [`pattern_matches`].
pub fn pattern_covers(outer: &str, inner: &str) -> bool {
    pattern_matches(outer, inner)
}

const REGISTRY_KEY: &str = "config/registry";

fn token_key(id: &Hash32) -> String {
    format!("token/{}", id.to_hex())
}

fn subject_prefix(subject: &Address) -> String {
    format!("subject/{}/", subject.to_hex())
}

fn owner_prefix() -> &'static str {
    "owner/"
}

fn load_token(ov: &Overlay<'_>, me: &Address, id: &Hash32) -> Result<CapabilityToken, ContractError> {
    ov.get_json(me, &token_key(id))?.ok_or(ContractError::UnknownToken(*id))
}

fn store_token(ov: &mut Overlay<'_>, me: &Address, token: &CapabilityToken) {
    ov.put_json(me, &token_key(&token.token_id), token);
    ov.put_json(me, &format!("{}{}", subject_prefix(&token.subject), token.token_id.to_hex()), &true);
}

/// The token and all of its ancestors, nearest first.
fn lineage(ov: &Overlay<'_>, me: &Address, token: &CapabilityToken) -> Result<Vec<CapabilityToken>, ContractError> {
    let mut chain = vec![token.clone()];
    let mut cur = token.parent_token;
    while let Some(id) = cur {
        let parent = load_token(ov, me, &id)?;
        cur = parent.parent_token;
        chain.push(parent);
    }
    Ok(chain)
}

fn ensure_registered(ov: &Overlay<'_>, me: &Address, subject: &Address) -> Result<(), ContractError> {
    let registry: Address = ov.get_json(me, REGISTRY_KEY)?.ok_or(ContractError::NotConfigured)?;
    match entry_for_address(ov, &registry, subject)? {
        Some(_) => Ok(()),
        None => Err(ContractError::UnknownSubject),
    }
}

fn owned_by(ov: &Overlay<'_>, me: &Address, issuer: &Address, resource: &str) -> Result<bool, ContractError> {
    for key in ov.keys_with_prefix(me, owner_prefix()) {
        let owner: Address = ov.get_json(me, &key)?.expect("key listed");
        if owner == *issuer && pattern_covers(&key[owner_prefix().len()..], resource) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn require_creator(ov: &Overlay<'_>, ctx: &CallContext<'_>, me: &Address) -> Result<(), ContractError> {
    let creator = ov.account(me).expect("dispatch checked the account").creator;
    if creator == ctx.caller || creator == Address::ZERO && ctx.roles.get(&ctx.caller).is_some_and(|r| r.is_authority()) {
        Ok(())
    } else {
        Err(ContractError::Unauthorized)
    }
}

/// Status of one token for a request, ranked so the deny reason reports
/// the failure closest to a grant.
fn token_status(
    ov: &Overlay<'_>,
    me: &Address,
    token: &CapabilityToken,
    resource: &str,
    action: Action,
    height: u64,
) -> Result<Result<(), DenyReason>, ContractError> {
    if !pattern_matches(&token.resource, resource) {
        return Ok(Err(DenyReason::ResourceMismatch));
    }
    if lineage(ov, me, token)?.iter().any(|t| t.revoked) {
        return Ok(Err(DenyReason::Revoked));
    }
    if height >= token.expires_at {
        return Ok(Err(DenyReason::Expired));
    }
    if !token.actions.contains(action) {
        return Ok(Err(DenyReason::ActionDenied));
    }
    Ok(Ok(()))
}

pub(super) fn verify_access(
    ov: &Overlay<'_>,
    me: &Address,
    subject: &Address,
    resource: &str,
    action: Action,
    height: u64,
) -> Result<Decision, ContractError> {
    let prefix = subject_prefix(subject);
    let mut best_grant: Option<(u64, Hash32)> = None;
    let mut best_deny = DenyReason::NoToken;
    for key in ov.keys_with_prefix(me, &prefix) {
        let id = arg_hash(&key[prefix.len()..])?;
        let token = load_token(ov, me, &id)?;
        match token_status(ov, me, &token, resource, action, height)? {
            Ok(()) => {
                let better = match best_grant {
                    None => true,
                    Some((issued, tid)) => token.issued_at > issued || (token.issued_at == issued && id < tid),
                };
                if better {
                    best_grant = Some((token.issued_at, id));
                }
            }
            Err(reason) => best_deny = best_deny.max(reason),
        }
    }
    Ok(match best_grant {
        Some((_, token_id)) => Decision::Grant { token_id },
        None => Decision::Deny { reason: best_deny },
    })
}

pub(super) fn call(
    ov: &mut Overlay<'_>,
    ctx: &CallContext<'_>,
    me: &Address,
    function: &str,
    args: &[&str],
) -> Result<Value, ContractError> {
    match function {
        "configure" => {
            let [registry] = expect_args(args)?;
            require_creator(ov, ctx, me)?;
            let registry = arg_address(registry)?;
            ov.put_json(me, REGISTRY_KEY, &registry);
            Ok(json!(true))
        }
        "register_resource" => {
            let [pattern, owner] = expect_args(args)?;
            require_creator(ov, ctx, me)?;
            validate_pattern(pattern)?;
            let owner = arg_address(owner)?;
            ov.put_json(me, &format!("{}{pattern}", owner_prefix()), &owner);
            Ok(json!(true))
        }
        "issue" => {
            let [subject, resource, actions, ttl, depth] = expect_args(args)?;
            let subject = arg_address(subject)?;
            validate_pattern(resource)?;
            let actions: ActionSet = actions.parse()?;
            let ttl = arg_u64(ttl)?;
            let depth = u32::try_from(arg_u64(depth)?)
                .map_err(|_| ContractError::ArgumentError("delegation depth too large".into()))?;
            if !owned_by(ov, me, &ctx.caller, resource)? {
                return Err(ContractError::NotOwner);
            }
            ensure_registered(ov, me, &subject)?;
            if ttl == 0 {
                return Err(ContractError::BadTtl);
            }
            let mut token = CapabilityToken {
                token_id: Hash32::ZERO,
                issuer: ctx.caller,
                subject,
                resource: resource.to_string(),
                actions,
                issued_at: ctx.height,
                expires_at: ctx.height.saturating_add(ttl),
                delegation_depth: depth,
                parent_token: None,
                revoked: false,
            };
            insert_new(ov, me, ctx, &mut token)
        }
        "delegate" => {
            let [parent, subject, actions, ttl] = expect_args(args)?;
            let parent = load_token(ov, me, &arg_hash(parent)?)?;
            let subject = arg_address(subject)?;
            let actions: ActionSet = actions.parse()?;
            let ttl = arg_u64(ttl)?;
            if parent.subject != ctx.caller {
                return Err(ContractError::Unauthorized);
            }
            if lineage(ov, me, &parent)?.iter().any(|t| t.revoked) {
                return Err(ContractError::ParentInvalid("revoked"));
            }
            if ctx.height >= parent.expires_at {
                return Err(ContractError::ParentInvalid("expired"));
            }
            if parent.delegation_depth == 0 {
                return Err(ContractError::DepthExhausted);
            }
            if !actions.is_subset(&parent.actions) {
                return Err(ContractError::SupersetActions);
            }
            if ttl == 0 {
                return Err(ContractError::BadTtl);
            }
            ensure_registered(ov, me, &subject)?;
            let mut token = CapabilityToken {
                token_id: Hash32::ZERO,
                issuer: ctx.caller,
                subject,
                resource: parent.resource.clone(),
                actions,
                issued_at: ctx.height,
                expires_at: ctx.height.saturating_add(ttl).min(parent.expires_at),
                delegation_depth: parent.delegation_depth - 1,
                parent_token: Some(parent.token_id),
                revoked: false,
            };
            insert_new(ov, me, ctx, &mut token)
        }
        "revoke" => {
            let [id] = expect_args(args)?;
            let mut token = load_token(ov, me, &arg_hash(id)?)?;
            if !lineage(ov, me, &token)?.iter().any(|t| t.issuer == ctx.caller) {
                return Err(ContractError::NotRevocable);
            }
            if !token.revoked {
                token.revoked = true;
                store_token(ov, me, &token);
            }
            Ok(json!(true))
        }
        "verify_access" => {
            let (subject, resource, action, height) = match args {
                [s, r, a] => (*s, *r, *a, ctx.height),
                [s, r, a, h] => (*s, *r, *a, arg_u64(h)?),
                _ => return Err(ContractError::ArgumentError("verify_access takes subject, resource, action[, height]".into())),
            };
            let decision = verify_access(ov, me, &arg_address(subject)?, resource, action.parse()?, height)?;
            Ok(serde_json::to_value(decision).expect("decision serializes"))
        }
        "get_token" => {
            let [id] = expect_args(args)?;
            let token = load_token(ov, me, &arg_hash(id)?)?;
            Ok(serde_json::to_value(token).expect("token serializes"))
        }
        "tokens_of" => {
            let [subject] = expect_args(args)?;
            let prefix = subject_prefix(&arg_address(subject)?);
            let mut out = Vec::new();
            for key in ov.keys_with_prefix(me, &prefix) {
                out.push(load_token(ov, me, &arg_hash(&key[prefix.len()..])?)?);
            }
            Ok(serde_json::to_value(out).expect("tokens serialize"))
        }
        "owner_of" => {
            let [pattern] = expect_args(args)?;
            let owner: Option<Address> = ov.get_json(me, &format!("{}{pattern}", owner_prefix()))?;
            Ok(serde_json::to_value(owner).expect("address serializes"))
        }
        other => Err(ContractError::UnknownFunction(other.to_string())),
    }
}

fn insert_new(
    ov: &mut Overlay<'_>,
    me: &Address,
    ctx: &CallContext<'_>,
    token: &mut CapabilityToken,
) -> Result<Value, ContractError> {
    token.token_id = token.compute_id(ctx.nonce);
    if ov.get(me, &token_key(&token.token_id)).is_some() {
        return Err(ContractError::ArgumentError("token id collision".into()));
    }
    store_token(ov, me, token);
    Ok(serde_json::to_value(&*token).expect("token serializes"))
}
