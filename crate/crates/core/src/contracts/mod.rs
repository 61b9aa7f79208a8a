//! Deterministic native contracts executed inside the ledger.
//!
//! Two codes exist: [`CodeId::Registration`] binds VIDs to account
//! addresses and [`CodeId::Capability`] manages capability tokens.
//! Every call runs against an [`Overlay`] that records a [`Delta`]; the
//! world only changes when a delta is applied, so read-only calls are
//! observably side-effect free.

mod capability;
mod registration;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::chain::encoding::{Decoder, Encoder};
use crate::chain::hash::{digest_parts, Address, Hash32};
use crate::chain::merkle::merkle_root_of_leaves;
use crate::chain::Role;

pub use capability::{
    pattern_covers, pattern_matches, validate_pattern, Action, ActionSet, CapabilityToken,
    Decision, DenyReason,
};
pub use registration::RegistrationEntry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("caller is not allowed to perform this operation")]
    Unauthorized,
    #[error("contract address {0} already exists")]
    AddressCollision(Address),
    #[error("no contract at {0}")]
    UnknownContract(Address),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("bad argument: {0}")]
    ArgumentError(String),
    #[error("vid already bound")]
    VidTaken,
    #[error("address already bound")]
    AddressTaken,
    #[error("caller does not own the resource")]
    NotOwner,
    #[error("subject is not registered")]
    UnknownSubject,
    #[error("ttl must be at least one block")]
    BadTtl,
    #[error("delegation depth exhausted")]
    DepthExhausted,
    #[error("requested actions exceed the parent token")]
    SupersetActions,
    #[error("caller may not revoke this token")]
    NotRevocable,
    #[error("unknown token {0}")]
    UnknownToken(Hash32),
    #[error("parent token is {0}")]
    ParentInvalid(&'static str),
    #[error("capability contract has no registry configured")]
    NotConfigured,
    #[error("malformed payload: {0}")]
    Decode(String),
    #[error("corrupt storage at {0}")]
    Storage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeId {
    Registration,
    Capability,
}

impl CodeId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodeId::Registration => "registration",
            CodeId::Capability => "capability",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ContractError> {
        match s {
            "registration" => Ok(CodeId::Registration),
            "capability" => Ok(CodeId::Capability),
            other => Err(ContractError::ArgumentError(format!("unknown code_id {other:?}"))),
        }
    }

    /// Exported functions and whether each is read-only.
    pub fn exports(&self) -> &'static [(&'static str, bool)] {
        match self {
            CodeId::Registration => registration::EXPORTS,
            CodeId::Capability => capability::EXPORTS,
        }
    }
}

impl fmt::Display for CodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transaction payload: contract address, function name, then each
/// argument length-prefixed. A deploy is a call to the zero address with
/// function `deploy` and the code id as its only argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallPayload {
    pub contract: Address,
    pub function: String,
    pub args: Vec<String>,
}

impl CallPayload {
    pub fn new(contract: Address, function: &str, args: &[&str]) -> Self {
        CallPayload {
            contract,
            function: function.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn deploy(code: CodeId) -> Self {
        Self::new(Address::ZERO, "deploy", &[code.as_str()])
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new().bytes(&self.contract.0).str(&self.function);
        for a in &self.args {
            enc = enc.str(a);
        }
        enc.finish()
    }

    pub fn decode(data: &[u8]) -> Result<Self, ContractError> {
        let err = |e: crate::chain::ChainError| ContractError::Decode(e.to_string());
        let mut dec = Decoder::new(data);
        let contract = Address(dec.array::<20>().map_err(err)?);
        let function = dec.string().map_err(err)?;
        let mut args = Vec::new();
        while !dec.is_empty() {
            args.push(dec.string().map_err(err)?);
        }
        Ok(CallPayload { contract, function, args })
    }
}

/// Deterministic deploy address: leading 20 octets of H(creator ‖ nonce).
pub fn contract_address(creator: &Address, nonce: u64) -> Address {
    Address::from_digest(&digest_parts(&[&creator.0, &nonce.to_be_bytes()]))
}

/// Key-value storage of one contract. Values are JSON octets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Storage {
    entries: BTreeMap<String, Vec<u8>>,
}

impl Storage {
    pub fn get(&self, key: &str) -> Option<&[u8]> {
        self.entries.get(key).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<u8>)> {
        self.entries.iter()
    }

    /// Merkle root over `H(len‖key ‖ len‖value)` leaves in key order.
    pub fn root(&self) -> Hash32 {
        let leaves: Vec<Hash32> = self
            .entries
            .iter()
            .map(|(k, v)| crate::chain::hash::digest(&Encoder::new().str(k).bytes(v).finish()))
            .collect();
        merkle_root_of_leaves(&leaves)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractAccount {
    pub address: Address,
    pub code_id: CodeId,
    pub creator: Address,
    pub storage: Storage,
}

/// Storage writes and deployments produced by one call. `None` deletes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delta {
    pub writes: BTreeMap<(Address, String), Option<Vec<u8>>>,
    pub created: Vec<ContractAccount>,
}

impl Delta {
    pub fn is_empty(&self) -> bool {
        self.writes.is_empty() && self.created.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallResult {
    pub output: Value,
    pub delta: Delta,
}

/// Caller-side facts a call may depend on. Everything here is part of the
/// replicated state, so execution stays deterministic.
#[derive(Debug, Clone, Copy)]
pub struct CallContext<'a> {
    pub caller: Address,
    pub nonce: u64,
    pub height: u64,
    pub roles: &'a BTreeMap<Address, Role>,
}

/// Read-through view of the world that buffers writes.
pub struct Overlay<'a> {
    base: &'a World,
    delta: Delta,
}

impl<'a> Overlay<'a> {
    fn new(base: &'a World) -> Self {
        Overlay { base, delta: Delta::default() }
    }

    pub fn account(&self, addr: &Address) -> Option<&ContractAccount> {
        self.base
            .accounts
            .get(addr)
            .or_else(|| self.delta.created.iter().find(|a| a.address == *addr))
    }

    pub fn get(&self, addr: &Address, key: &str) -> Option<Vec<u8>> {
        if let Some(w) = self.delta.writes.get(&(*addr, key.to_string())) {
            return w.clone();
        }
        self.account(addr)?.storage.get(key).map(|v| v.to_vec())
    }

    pub fn get_json<T: serde::de::DeserializeOwned>(&self, addr: &Address, key: &str) -> Result<Option<T>, ContractError> {
        match self.get(addr, key) {
            None => Ok(None),
            Some(raw) => serde_json::from_slice(&raw)
                .map(Some)
                .map_err(|_| ContractError::Storage(key.to_string())),
        }
    }

    pub fn put_json<T: Serialize>(&mut self, addr: &Address, key: &str, value: &T) {
        let raw = serde_json::to_vec(value).expect("storage values serialize");
        self.delta.writes.insert((*addr, key.to_string()), Some(raw));
    }

    /// Keys of `addr` starting with `prefix`, merged with buffered writes.
    pub fn keys_with_prefix(&self, addr: &Address, prefix: &str) -> Vec<String> {
        let mut keys: std::collections::BTreeSet<String> = self
            .account(addr)
            .map(|a| {
                a.storage
                    .entries
                    .range(prefix.to_string()..)
                    .take_while(|(k, _)| k.starts_with(prefix))
                    .map(|(k, _)| k.clone())
                    .collect()
            })
            .unwrap_or_default();
        for ((a, k), v) in &self.delta.writes {
            if a == addr && k.starts_with(prefix) {
                if v.is_some() {
                    keys.insert(k.clone());
                } else {
                    keys.remove(k);
                }
            }
        }
        keys.into_iter().collect()
    }

    fn into_delta(self) -> Delta {
        self.delta
    }
}

/// All contract accounts. Cheap enough to clone per block at desk scale.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct World {
    accounts: BTreeMap<Address, ContractAccount>,
}

impl World {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn account(&self, addr: &Address) -> Option<&ContractAccount> {
        self.accounts.get(addr)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &ContractAccount> {
        self.accounts.values()
    }

    pub fn storage_root(&self, addr: &Address) -> Option<Hash32> {
        self.accounts.get(addr).map(|a| a.storage.root())
    }

    /// Commitment over every account: Merkle root of
    /// `H(address ‖ code_id ‖ storage_root)` in address order.
    pub fn state_root(&self) -> Hash32 {
        let leaves: Vec<Hash32> = self
            .accounts
            .values()
            .map(|a| digest_parts(&[&a.address.0, a.code_id.as_str().as_bytes(), a.storage.root().as_bytes()]))
            .collect();
        merkle_root_of_leaves(&leaves)
    }

    /// Creates an account directly, bypassing role checks. Used for
    /// genesis contracts only.
    pub fn install(&mut self, address: Address, code_id: CodeId, creator: Address) -> Result<(), ContractError> {
        if self.accounts.contains_key(&address) {
            return Err(ContractError::AddressCollision(address));
        }
        self.accounts.insert(
            address,
            ContractAccount { address, code_id, creator, storage: Storage::default() },
        );
        Ok(())
    }

    /// Runs `payload` without mutating the world.
    pub fn execute(&self, ctx: &CallContext<'_>, payload: &CallPayload) -> Result<CallResult, ContractError> {
        let mut ov = Overlay::new(self);
        let output = dispatch(&mut ov, ctx, payload, false)?;
        Ok(CallResult { output, delta: ov.into_delta() })
    }

    /// Read-only query. Mutating functions are refused with
    /// `UnknownFunction` because they are not exported for queries.
    pub fn query(&self, ctx: &CallContext<'_>, payload: &CallPayload) -> Result<Value, ContractError> {
        let mut ov = Overlay::new(self);
        let out = dispatch(&mut ov, ctx, payload, true)?;
        debug_assert!(ov.delta.is_empty());
        Ok(out)
    }

    pub fn apply_delta(&mut self, delta: Delta) {
        for acct in delta.created {
            self.accounts.insert(acct.address, acct);
        }
        for ((addr, key), value) in delta.writes {
            let acct = self.accounts.get_mut(&addr).expect("delta targets an existing account");
            match value {
                Some(v) => acct.storage.entries.insert(key, v),
                None => acct.storage.entries.remove(&key),
            };
        }
    }

    /// `execute` followed by `apply_delta`; on error the world is untouched.
    pub fn call(&mut self, ctx: &CallContext<'_>, payload: &CallPayload) -> Result<Value, ContractError> {
        let res = self.execute(ctx, payload)?;
        self.apply_delta(res.delta);
        Ok(res.output)
    }
}

fn dispatch(
    ov: &mut Overlay<'_>,
    ctx: &CallContext<'_>,
    payload: &CallPayload,
    read_only: bool,
) -> Result<Value, ContractError> {
    if payload.contract == Address::ZERO {
        if read_only || payload.function != "deploy" {
            return Err(ContractError::UnknownFunction(payload.function.clone()));
        }
        return deploy(ov, ctx, payload);
    }
    let code = ov
        .account(&payload.contract)
        .ok_or(ContractError::UnknownContract(payload.contract))?
        .code_id;
    let exported = code
        .exports()
        .iter()
        .find(|(name, _)| *name == payload.function)
        .ok_or_else(|| ContractError::UnknownFunction(payload.function.clone()))?;
    if read_only && !exported.1 {
        return Err(ContractError::UnknownFunction(payload.function.clone()));
    }
    let args: Vec<&str> = payload.args.iter().map(|s| s.as_str()).collect();
    match code {
        CodeId::Registration => registration::call(ov, ctx, &payload.contract, &payload.function, &args),
        CodeId::Capability => capability::call(ov, ctx, &payload.contract, &payload.function, &args),
    }
}

fn deploy(ov: &mut Overlay<'_>, ctx: &CallContext<'_>, payload: &CallPayload) -> Result<Value, ContractError> {
    let [code] = payload.args.as_slice() else {
        return Err(ContractError::ArgumentError("deploy takes one code_id".into()));
    };
    let code = CodeId::parse(code)?;
    match ctx.roles.get(&ctx.caller) {
        Some(Role::Miner) | Some(Role::ServiceManager) => {}
        _ => return Err(ContractError::Unauthorized),
    }
    let address = contract_address(&ctx.caller, ctx.nonce);
    if ov.account(&address).is_some() {
        return Err(ContractError::AddressCollision(address));
    }
    ov.delta.created.push(ContractAccount {
        address,
        code_id: code,
        creator: ctx.caller,
        storage: Storage::default(),
    });
    Ok(Value::String(format!("{address}")))
}

pub(crate) fn arg_address(s: &str) -> Result<Address, ContractError> {
    Address::from_hex(s).ok_or_else(|| ContractError::ArgumentError(format!("bad address {s:?}")))
}

pub(crate) fn arg_u64(s: &str) -> Result<u64, ContractError> {
    s.parse().map_err(|_| ContractError::ArgumentError(format!("bad integer {s:?}")))
}

pub(crate) fn arg_hash(s: &str) -> Result<Hash32, ContractError> {
    Hash32::from_hex(s).ok_or_else(|| ContractError::ArgumentError(format!("bad token id {s:?}")))
}

pub(crate) fn expect_args<'a, const N: usize>(args: &[&'a str]) -> Result<[&'a str; N], ContractError> {
    args.try_into()
        .map_err(|_| ContractError::ArgumentError(format!("expected {N} arguments, got {}", args.len())))
}
