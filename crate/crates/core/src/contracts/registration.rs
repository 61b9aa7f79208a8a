//! VID ↔ address bijection. Registration is permanent.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{arg_address, arg_u64, expect_args, CallContext, ContractError, Overlay};
use crate::chain::hash::Address;

pub const MAX_VID_LEN: usize = 64;

pub(super) const EXPORTS: &[(&str, bool)] = &[
    ("register", false),
    ("authenticate", true),
    ("lookup_vid", true),
    ("lookup_address", true),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationEntry {
    pub vid: String,
    pub address: Address,
    pub registered_at: u64,
}

fn vid_key(vid: &str) -> String {
    format!("vid/{vid}")
}

fn addr_key(addr: &Address) -> String {
    format!("addr/{}", addr.to_hex())
}

/// Entry bound to `address`, as seen by another contract.
pub(super) fn entry_for_address(
    ov: &Overlay<'_>,
    registry: &Address,
    address: &Address,
) -> Result<Option<RegistrationEntry>, ContractError> {
    ov.get_json(registry, &addr_key(address))
}

pub(super) fn call(
    ov: &mut Overlay<'_>,
    ctx: &CallContext<'_>,
    me: &Address,
    function: &str,
    args: &[&str],
) -> Result<Value, ContractError> {
    match function {
        "register" => {
            let [vid, addr] = expect_args(args)?;
            if vid.is_empty() || vid.chars().count() > MAX_VID_LEN {
                return Err(ContractError::ArgumentError(format!("vid must be 1..={MAX_VID_LEN} characters")));
            }
            let address = arg_address(addr)?;
            if ov.get(me, &vid_key(vid)).is_some() {
                return Err(ContractError::VidTaken);
            }
            if ov.get(me, &addr_key(&address)).is_some() {
                return Err(ContractError::AddressTaken);
            }
            let entry = RegistrationEntry { vid: vid.to_string(), address, registered_at: ctx.height };
            ov.put_json(me, &vid_key(vid), &entry);
            ov.put_json(me, &addr_key(&address), &entry);
            Ok(json!(true))
        }
        "authenticate" => {
            let (vid, addr, at) = match args {
                [vid, addr] => (*vid, *addr, ctx.height),
                [vid, addr, at] => (*vid, *addr, arg_u64(at)?),
                _ => return Err(ContractError::ArgumentError("authenticate takes vid, address[, height]".into())),
            };
            let address = arg_address(addr)?;
            let entry: Option<RegistrationEntry> = ov.get_json(me, &vid_key(vid))?;
            Ok(json!(entry.is_some_and(|e| e.address == address && e.registered_at <= at)))
        }
        "lookup_vid" => {
            let [vid] = expect_args(args)?;
            let entry: Option<RegistrationEntry> = ov.get_json(me, &vid_key(vid))?;
            Ok(serde_json::to_value(entry).expect("entry serializes"))
        }
        "lookup_address" => {
            let [addr] = expect_args(args)?;
            let entry = entry_for_address(ov, me, &arg_address(addr)?)?;
            Ok(serde_json::to_value(entry).expect("entry serializes"))
        }
        other => Err(ContractError::UnknownFunction(other.to_string())),
    }
}
