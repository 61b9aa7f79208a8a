use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::block::{merkle_root, Block, BlockHeader};
use super::crypto::{KeyRegistry, KeyedHashSigner, Signature, Signer, Verifier};
use super::hash::{digest, Address, Hash32};
use super::tx::Transaction;
use super::{ChainError, RejectReason, Role};
use crate::contracts::{contract_address, CallContext, CallPayload, CodeId, ContractError, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainParams {
    pub block_interval_ms: u64,
    pub block_capacity: usize,
    pub liveness_bound: u64,
    pub finality_depth: u64,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams { block_interval_ms: 500, block_capacity: 128, liveness_bound: 3, finality_depth: 2 }
    }
}

/// A contract installed at genesis. Its `init` calls run with the zero
/// address as caller at height 0.
#[derive(Debug, Clone)]
pub struct GenesisContract {
    pub code_id: CodeId,
    pub init: Vec<CallPayload>,
}

/// Address of the `index`-th genesis contract.
pub fn genesis_contract_address(index: usize) -> Address {
    contract_address(&Address::ZERO, index as u64)
}

#[derive(Clone)]
pub struct Genesis {
    pub authorities: Vec<Address>,
    pub accounts: BTreeMap<Address, Role>,
    pub verifier: Arc<dyn Verifier>,
    pub timestamp_ms: u64,
    pub params: ChainParams,
    pub contracts: Vec<GenesisContract>,
}

impl std::fmt::Debug for Genesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Genesis")
            .field("authorities", &self.authorities)
            .field("accounts", &self.accounts.len())
            .field("params", &self.params)
            .finish()
    }
}

impl Genesis {
    /// Keyed-hash genesis: miners become authorities in the given order.
    pub fn from_signers(accounts: &[(&KeyedHashSigner, Role)], timestamp_ms: u64, params: ChainParams) -> Self {
        let mut reg = KeyRegistry::new();
        for (k, _) in accounts {
            reg.register(k);
        }
        Genesis {
            authorities: accounts
                .iter()
                .filter(|(_, r)| r.is_authority())
                .map(|(k, _)| k.address())
                .collect(),
            accounts: accounts.iter().map(|(k, r)| (k.address(), *r)).collect(),
            verifier: Arc::new(reg),
            timestamp_ms,
            params,
            contracts: Vec::new(),
        }
    }

    pub fn with_contract(mut self, code_id: CodeId, init: Vec<CallPayload>) -> Self {
        self.contracts.push(GenesisContract { code_id, init });
        self
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.authorities.is_empty() {
            return Err(ChainError::Config("authority set is empty".into()));
        }
        if self.params.block_interval_ms == 0 || self.params.block_capacity == 0 {
            return Err(ChainError::Config("interval and capacity must be positive".into()));
        }
        let unique: HashSet<_> = self.authorities.iter().collect();
        if unique.len() != self.authorities.len() {
            return Err(ChainError::Config("duplicate authority".into()));
        }
        Ok(())
    }

    pub fn block(&self) -> Block {
        Block {
            header: BlockHeader {
                parent_hash: Hash32::ZERO,
                height: 0,
                merkle_root: digest(b""),
                timestamp_ms: self.timestamp_ms,
                proposer: Address::ZERO,
                skipped: 0,
                proposer_signature: Signature::EMPTY,
            },
            transactions: Vec::new(),
        }
    }

    pub fn proposer_for(&self, height: u64, skipped: u64) -> Address {
        let n = self.authorities.len() as u64;
        self.authorities[((height + skipped) % n) as usize]
    }

    pub fn initial_state(&self) -> Result<LedgerState, ChainError> {
        let mut world = World::new();
        for (i, gc) in self.contracts.iter().enumerate() {
            world
                .install(genesis_contract_address(i), gc.code_id, Address::ZERO)
                .map_err(|e| ChainError::Config(e.to_string()))?;
        }
        for gc in &self.contracts {
            for call in &gc.init {
                let ctx = CallContext { caller: Address::ZERO, nonce: 0, height: 0, roles: &self.accounts };
                world.call(&ctx, call).map_err(|e| ChainError::Config(format!("genesis call failed: {e}")))?;
            }
        }
        Ok(LedgerState { nonces: BTreeMap::new(), world })
    }
}

/// Replicated state after a block: account nonces and contract world.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerState {
    pub nonces: BTreeMap<Address, u64>,
    pub world: World,
}

impl LedgerState {
    pub fn nonce(&self, addr: &Address) -> u64 {
        self.nonces.get(addr).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: Hash32,
    pub ok: bool,
    pub output: Value,
    pub error: Option<String>,
}

/// Applies `block`'s transactions on top of `parent`. A transaction whose
/// contract call fails is still valid: its nonce is consumed and its
/// receipt records the error.
pub(crate) fn execute_block(
    genesis: &Genesis,
    parent: &LedgerState,
    block: &Block,
) -> Result<(LedgerState, Vec<Receipt>), RejectReason> {
    let mut state = parent.clone();
    let mut receipts = Vec::with_capacity(block.transactions.len());
    for (i, tx) in block.transactions.iter().enumerate() {
        if tx.verify(genesis.verifier.as_ref()).is_err() || !genesis.accounts.contains_key(&tx.sender) {
            return Err(RejectReason::BadTx(i));
        }
        if tx.nonce != state.nonce(&tx.sender) + 1 {
            return Err(RejectReason::BadTx(i));
        }
        state.nonces.insert(tx.sender, tx.nonce);
        let result = CallPayload::decode(&tx.payload).and_then(|call| {
            let ctx = CallContext {
                caller: tx.sender,
                nonce: tx.nonce,
                height: block.header.height,
                roles: &genesis.accounts,
            };
            state.world.call(&ctx, &call)
        });
        receipts.push(match result {
            Ok(output) => Receipt { tx_hash: tx.hash(), ok: true, output, error: None },
            Err(e) => Receipt { tx_hash: tx.hash(), ok: false, output: Value::Null, error: Some(e.to_string()) },
        });
    }
    Ok((state, receipts))
}

#[derive(Debug, Clone)]
struct Stored {
    block: Arc<Block>,
    state: Arc<LedgerState>,
    receipts: Arc<Vec<Receipt>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AppendOutcome {
    Known,
    Orphaned,
    Added { head_changed: bool, reverted: Vec<Transaction> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TxStatus {
    Pending,
    Confirmed { height: u64, index: usize, ok: bool, error: Option<String> },
    Rejected { reason: String },
}

const MAX_ORPHANS: usize = 4096;

/// Block tree with per-block ledger states and fork choice.
#[derive(Debug, Clone)]
pub struct ChainState {
    genesis: Arc<Genesis>,
    blocks: HashMap<Hash32, Stored>,
    head: Hash32,
    canonical: Vec<Hash32>,
    tx_index: HashMap<Hash32, (u64, usize)>,
    orphans: HashMap<Hash32, Vec<Block>>,
    orphan_count: usize,
}

impl ChainState {
    pub fn new(genesis: Genesis) -> Result<Self, ChainError> {
        genesis.validate()?;
        let state = genesis.initial_state()?;
        let block = genesis.block();
        let hash = block.hash();
        let mut blocks = HashMap::new();
        blocks.insert(
            hash,
            Stored { block: Arc::new(block), state: Arc::new(state), receipts: Arc::new(Vec::new()) },
        );
        Ok(ChainState {
            genesis: Arc::new(genesis),
            blocks,
            head: hash,
            canonical: vec![hash],
            tx_index: HashMap::new(),
            orphans: HashMap::new(),
            orphan_count: 0,
        })
    }

    pub fn genesis(&self) -> &Arc<Genesis> {
        &self.genesis
    }

    pub fn head_hash(&self) -> Hash32 {
        self.head
    }

    pub fn head(&self) -> &Arc<Block> {
        &self.blocks[&self.head].block
    }

    pub fn height(&self) -> u64 {
        self.head().header.height
    }

    pub fn head_state(&self) -> &Arc<LedgerState> {
        &self.blocks[&self.head].state
    }

    pub fn contains(&self, hash: &Hash32) -> bool {
        self.blocks.contains_key(hash)
    }

    pub fn block(&self, hash: &Hash32) -> Option<&Arc<Block>> {
        self.blocks.get(hash).map(|s| &s.block)
    }

    pub fn block_at(&self, height: u64) -> Option<&Arc<Block>> {
        self.canonical.get(height as usize).map(|h| &self.blocks[h].block)
    }

    pub fn canonical_hashes(&self) -> &[Hash32] {
        &self.canonical
    }

    pub fn tx_location(&self, tx_hash: &Hash32) -> Option<(u64, usize)> {
        self.tx_index.get(tx_hash).copied()
    }

    pub fn receipt(&self, tx_hash: &Hash32) -> Option<(u64, usize, &Receipt)> {
        let (h, i) = self.tx_location(tx_hash)?;
        let stored = &self.blocks[&self.canonical[h as usize]];
        Some((h, i, &stored.receipts[i]))
    }

    /// Pure check of `block` against its stored parent.
    pub fn validate_block(&self, block: &Block) -> Result<(), RejectReason> {
        self.validate_and_execute(block).map(|_| ())
    }

    fn validate_and_execute(&self, block: &Block) -> Result<(LedgerState, Vec<Receipt>), RejectReason> {
        let g = &self.genesis;
        let h = &block.header;
        let parent = self.blocks.get(&h.parent_hash).ok_or(RejectReason::UnknownParent)?;
        let ph = &parent.block.header;
        if h.height != ph.height + 1 {
            return Err(RejectReason::BadHeight);
        }
        let n = g.authorities.len() as u64;
        if h.skipped >= n {
            return Err(RejectReason::BadSkip);
        }
        if h.proposer != g.proposer_for(h.height, h.skipped) {
            return Err(RejectReason::WrongProposer);
        }
        if h.timestamp_ms <= ph.timestamp_ms {
            return Err(RejectReason::NonMonotoneTime);
        }
        if h.skipped > 0 && h.timestamp_ms < ph.timestamp_ms + 2 * g.params.block_interval_ms * h.skipped {
            return Err(RejectReason::BadSkip);
        }
        if !g.verifier.verify(&h.proposer, &h.signing_bytes(), &h.proposer_signature) {
            return Err(RejectReason::BadProposerSignature);
        }
        if block.transactions.len() > g.params.block_capacity {
            return Err(RejectReason::OverCapacity);
        }
        if h.merkle_root != merkle_root(&block.transactions) {
            return Err(RejectReason::BadMerkleRoot);
        }
        execute_block(g, &parent.state, block)
    }

    /// Validates, stores and runs fork choice. Blocks whose parent is
    /// unknown wait in the orphan buffer until it arrives.
    pub fn append(&mut self, block: Block) -> Result<AppendOutcome, RejectReason> {
        let hash = block.hash();
        if self.blocks.contains_key(&hash) {
            return Ok(AppendOutcome::Known);
        }
        if !self.blocks.contains_key(&block.header.parent_hash) {
            if self.orphan_count < MAX_ORPHANS {
                let bucket = self.orphans.entry(block.header.parent_hash).or_default();
                if !bucket.iter().any(|b| b.hash() == hash) {
                    bucket.push(block);
                    self.orphan_count += 1;
                }
            }
            return Ok(AppendOutcome::Orphaned);
        }
        let old_head = self.head;
        self.insert_validated(block)?;
        let mut queue = vec![hash];
        while let Some(parent) = queue.pop() {
            for child in self.orphans.remove(&parent).unwrap_or_default() {
                self.orphan_count -= 1;
                let ch = child.hash();
                if self.insert_validated(child).is_ok() {
                    queue.push(ch);
                }
            }
        }
        if self.head == old_head {
            return Ok(AppendOutcome::Added { head_changed: false, reverted: Vec::new() });
        }
        let reverted = self.reorganize(old_head);
        Ok(AppendOutcome::Added { head_changed: true, reverted })
    }

    fn insert_validated(&mut self, block: Block) -> Result<(), RejectReason> {
        let (state, receipts) = self.validate_and_execute(&block)?;
        let hash = block.hash();
        let better = {
            let head = self.head();
            (block.header.height, std::cmp::Reverse(hash)) > (head.header.height, std::cmp::Reverse(self.head))
        };
        self.blocks.insert(
            hash,
            Stored { block: Arc::new(block), state: Arc::new(state), receipts: Arc::new(receipts) },
        );
        if better {
            self.head = hash;
        }
        Ok(())
    }

    /// Rebuilds the canonical index after the head moved away from
    /// `old_head`; returns transactions that left the canonical chain.
    fn reorganize(&mut self, _old_head: Hash32) -> Vec<Transaction> {
        let mut branch = Vec::new();
        let mut cur = self.head;
        loop {
            let b = &self.blocks[&cur].block;
            let h = b.header.height as usize;
            if self.canonical.get(h) == Some(&cur) {
                break;
            }
            branch.push(cur);
            cur = b.header.parent_hash;
        }
        let fork_height = self.blocks[&cur].block.header.height as usize;
        let removed: Vec<Hash32> = self.canonical.drain(fork_height + 1..).collect();
        let mut reverted = Vec::new();
        for h in &removed {
            for tx in &self.blocks[h].block.transactions {
                self.tx_index.remove(&tx.hash());
                reverted.push(tx.clone());
            }
        }
        for h in branch.into_iter().rev() {
            let b = &self.blocks[&h].block;
            for (i, tx) in b.transactions.iter().enumerate() {
                self.tx_index.insert(tx.hash(), (b.header.height, i));
            }
            self.canonical.push(h);
        }
        reverted.retain(|tx| !self.tx_index.contains_key(&tx.hash()));
        reverted
    }

    /// Canonical chain in canonical binary encoding, genesis first.
    pub fn encoded_chain(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for h in &self.canonical {
            out.extend_from_slice(&self.blocks[h].block.encode());
        }
        out
    }

    /// `(height, index, tx hash)` for every confirmed transaction.
    pub fn confirmed_log(&self) -> Vec<(u64, usize, Hash32)> {
        let mut out = Vec::new();
        for h in &self.canonical {
            let b = &self.blocks[h].block;
            for (i, tx) in b.transactions.iter().enumerate() {
                out.push((b.header.height, i, tx.hash()));
            }
        }
        out
    }

    pub fn snapshot(&self) -> ChainSnapshot {
        let stored = &self.blocks[&self.head];
        ChainSnapshot {
            genesis: self.genesis.clone(),
            head_hash: self.head,
            header: stored.block.header.clone(),
            state: stored.state.clone(),
            blocks: self.canonical.iter().map(|h| (self.blocks[h].block.clone(), self.blocks[h].receipts.clone())).collect(),
            tx_index: self.tx_index.clone(),
        }
    }
}

/// Immutable view of the canonical chain at one head.
#[derive(Debug, Clone)]
pub struct ChainSnapshot {
    pub genesis: Arc<Genesis>,
    pub head_hash: Hash32,
    pub header: BlockHeader,
    pub state: Arc<LedgerState>,
    blocks: Vec<(Arc<Block>, Arc<Vec<Receipt>>)>,
    tx_index: HashMap<Hash32, (u64, usize)>,
}

impl ChainSnapshot {
    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn block_at(&self, height: u64) -> Option<&Arc<Block>> {
        self.blocks.get(height as usize).map(|(b, _)| b)
    }

    pub fn block_by_hash(&self, hash: &Hash32) -> Option<&Arc<Block>> {
        self.blocks.iter().map(|(b, _)| b).find(|b| b.hash() == *hash)
    }

    pub fn confirmed(&self, tx_hash: &Hash32) -> Option<TxStatus> {
        let (height, index) = *self.tx_index.get(tx_hash)?;
        let r = &self.blocks[height as usize].1[index];
        Some(TxStatus::Confirmed { height, index, ok: r.ok, error: r.error.clone() })
    }

    pub fn receipt(&self, tx_hash: &Hash32) -> Option<&Receipt> {
        let (height, index) = *self.tx_index.get(tx_hash)?;
        Some(&self.blocks[height as usize].1[index])
    }

    /// Read-only contract query against the head state.
    pub fn query(&self, caller: Address, call: &CallPayload) -> Result<Value, ContractError> {
        let ctx = CallContext { caller, nonce: 0, height: self.header.height, roles: &self.genesis.accounts };
        self.state.world.query(&ctx, call)
    }
}
