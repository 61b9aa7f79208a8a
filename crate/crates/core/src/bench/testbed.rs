use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::Value;

use super::BenchError;
use crate::chain::{
    genesis_contract_address, Address, ChainHandle, ChainParams, Genesis, Hash32, KeyedHashSigner, Node, Role, Signer,
    Transaction, TxStatus,
};
use crate::contracts::{CallPayload, CodeId};

pub const FEATURE_RESOURCES: &str = "/features/*";

/// A single-process ledger with the registry at genesis index 0 and the
/// capability contract at index 1, configured and owning `/features/*` on
/// behalf of `admin`. Three authorities, all driven by the local node,
/// produce blocks on a background ticker.
pub struct Testbed {
    pub chain: Arc<ChainHandle>,
    pub admin: KeyedHashSigner,
    pub clients: Vec<KeyedHashSigner>,
    pub registry: Address,
    pub capability: Address,
    nonces: Mutex<BTreeMap<Address, u64>>,
}

impl std::fmt::Debug for Testbed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Testbed").field("chain", &self.chain).field("clients", &self.clients.len()).finish()
    }
}

impl Testbed {
    pub fn new(seed: &str, n_clients: usize, block_interval_ms: u64) -> Result<Self, BenchError> {
        let miners: Vec<KeyedHashSigner> = (0..3).map(|i| KeyedHashSigner::from_seed(&format!("{seed}/miner/{i}"))).collect();
        let admin = KeyedHashSigner::from_seed(&format!("{seed}/admin"));
        let clients: Vec<KeyedHashSigner> =
            (0..n_clients).map(|i| KeyedHashSigner::from_seed(&format!("{seed}/client/{i}"))).collect();
        let mut accounts: Vec<(&KeyedHashSigner, Role)> = miners.iter().map(|m| (m, Role::Miner)).collect();
        accounts.push((&admin, Role::ServiceManager));
        accounts.extend(clients.iter().map(|c| (c, Role::Member)));
        let registry = genesis_contract_address(0);
        let capability = genesis_contract_address(1);
        let params = ChainParams { block_interval_ms, ..ChainParams::default() };
        let genesis = Genesis::from_signers(&accounts, 0, params)
            .with_contract(CodeId::Registration, Vec::new())
            .with_contract(
                CodeId::Capability,
                vec![
                    CallPayload::new(capability, "configure", &[&registry.to_string()]),
                    CallPayload::new(capability, "register_resource", &[FEATURE_RESOURCES, &admin.address().to_string()]),
                ],
            );
        let signers: Vec<Arc<dyn Signer>> = miners.into_iter().map(|m| Arc::new(m) as Arc<dyn Signer>).collect();
        let chain = ChainHandle::new(Node::new(genesis, signers)?);
        chain.start_producer(Duration::from_millis((block_interval_ms / 5).max(1)));
        Ok(Testbed { chain, admin, clients, registry, capability, nonces: Mutex::new(BTreeMap::new()) })
    }

    pub fn submit(&self, signer: &KeyedHashSigner, call: &CallPayload) -> Result<Hash32, BenchError> {
        let nonce = {
            let mut n = self.nonces.lock().expect("nonces");
            let next = n.entry(signer.address()).or_insert_with(|| self.chain.snapshot().state.nonce(&signer.address()));
            *next += 1;
            *next
        };
        Ok(self.chain.submit(Transaction::new_signed(signer, nonce, call.encode()))?)
    }

    /// Submits and waits for confirmation; returns the call output.
    pub fn execute(&self, signer: &KeyedHashSigner, call: &CallPayload) -> Result<Value, BenchError> {
        let hash = self.submit(signer, call)?;
        match self.chain.wait_confirmed(&hash, Duration::from_secs(30))? {
            TxStatus::Confirmed { ok: true, .. } => {
                Ok(self.chain.snapshot().receipt(&hash).map(|r| r.output.clone()).unwrap_or(Value::Null))
            }
            TxStatus::Confirmed { error, .. } => Err(BenchError::Contract(error.unwrap_or_default())),
            TxStatus::Rejected { reason } => Err(BenchError::Contract(reason)),
            TxStatus::Pending => Err(BenchError::ChainStalled),
        }
    }

    pub fn register(&self, client: &KeyedHashSigner, vid: &str) -> Result<(), BenchError> {
        self.execute(client, &CallPayload::new(self.registry, "register", &[vid, &client.address().to_string()]))?;
        Ok(())
    }

    /// Admin-issued token; returns its id.
    pub fn issue(&self, subject: &Address, resource: &str, actions: &str, ttl: u64, depth: u32) -> Result<Hash32, BenchError> {
        let out = self.execute(
            &self.admin,
            &CallPayload::new(
                self.capability,
                "issue",
                &[&subject.to_string(), resource, actions, &ttl.to_string(), &depth.to_string()],
            ),
        )?;
        out["token_id"]
            .as_str()
            .and_then(Hash32::from_hex)
            .ok_or_else(|| BenchError::Contract(format!("issue returned {out}")))
    }

    pub fn revoke(&self, token: &Hash32) -> Result<(), BenchError> {
        self.execute(&self.admin, &CallPayload::new(self.capability, "revoke", &[&token.to_hex()]))?;
        Ok(())
    }
}
