//! Identity registration and capability tokens, executed directly against
//! the contract world: issue, delegate, check, revoke.
//!
//! ```text
//! cargo run --example capability_tokens
//! ```

use std::collections::BTreeMap;
use std::error::Error;

use serde_json::Value;

use adsb_trust::chain::{Address, KeyedHashSigner, Role, Signer};
use adsb_trust::contracts::{CallContext, CallPayload, CapabilityToken, CodeId, Decision, World};

struct Ledger {
    world: World,
    roles: BTreeMap<Address, Role>,
    nonce: u64,
    height: u64,
}

impl Ledger {
    fn call(&mut self, caller: Address, contract: Address, function: &str, args: &[&str]) -> Result<Value, Box<dyn Error>> {
        self.nonce += 1;
        let ctx = CallContext { caller, nonce: self.nonce, height: self.height, roles: &self.roles };
        Ok(self.world.call(&ctx, &CallPayload::new(contract, function, args))?)
    }

    fn deploy(&mut self, creator: Address, code: CodeId) -> Result<Address, Box<dyn Error>> {
        self.nonce += 1;
        let ctx = CallContext { caller: creator, nonce: self.nonce, height: self.height, roles: &self.roles };
        let out = self.world.call(&ctx, &CallPayload::deploy(code))?;
        Ok(Address::from_hex(out.as_str().unwrap_or_default().trim_start_matches("0x")).ok_or("deploy returned no address")?)
    }

    fn check(&self, cap: Address, subject: Address, resource: &str, action: &str) -> Result<Decision, Box<dyn Error>> {
        let ctx = CallContext { caller: Address::ZERO, nonce: self.nonce, height: self.height, roles: &self.roles };
        let args = [subject.to_string(), resource.to_string(), action.to_string(), self.height.to_string()];
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        Ok(serde_json::from_value(self.world.query(&ctx, &CallPayload::new(cap, "verify_access", &args))?)?)
    }
}

pub fn run() -> Result<(), Box<dyn Error>> {
    let admin = KeyedHashSigner::from_seed("caps/admin").address();
    let edge = KeyedHashSigner::from_seed("caps/edge").address();
    let fog = KeyedHashSigner::from_seed("caps/fog").address();
    let roles = BTreeMap::from([(admin, Role::ServiceManager), (edge, Role::Member), (fog, Role::Member)]);
    let mut l = Ledger { world: World::new(), roles, nonce: 0, height: 1 };

    let registry = l.deploy(admin, CodeId::Registration)?;
    let cap = l.deploy(admin, CodeId::Capability)?;
    l.call(admin, cap, "configure", &[&registry.to_string()])?;
    l.call(admin, cap, "register_resource", &["/features/*", &admin.to_string()])?;
    l.call(admin, registry, "register", &["edge-1", &edge.to_string()])?;
    l.call(admin, registry, "register", &["fog-1", &fog.to_string()])?;

    println!("before issue: {:?}", l.check(cap, edge, "/features/track", "read")?);
    let root: CapabilityToken = serde_json::from_value(l.call(admin, cap, "issue", &[&edge.to_string(), "/features/*", "read,write", "100", "1"])?)?;
    println!("issued {} depth {}", root.token_id, root.delegation_depth);
    println!("edge read:  {:?}", l.check(cap, edge, "/features/track", "read")?);
    println!("edge exec:  {:?}", l.check(cap, edge, "/features/track", "execute")?);

    let child: CapabilityToken =
        serde_json::from_value(l.call(edge, cap, "delegate", &[&root.token_id.to_hex(), &fog.to_string(), "read", "50"])?)?;
    println!("delegated {} to fog", child.token_id);
    println!("fog read:   {:?}", l.check(cap, fog, "/features/track", "read")?);
    match l.call(fog, cap, "delegate", &[&child.token_id.to_hex(), &edge.to_string(), "read", "10"]) {
        Ok(_) => println!("unexpected second-level delegation"),
        Err(e) => println!("second-level delegation refused: {e}"),
    }

    l.call(admin, cap, "revoke", &[&root.token_id.to_hex()])?;
    println!("after revoking the root, fog read: {:?}", l.check(cap, fog, "/features/track", "read")?);

    println!("storage roots: registry {:?}, capability {:?}", l.world.storage_root(&registry), l.world.storage_root(&cap));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
