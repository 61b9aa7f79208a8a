use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::block::{merkle_root, Block, BlockHeader};
use super::crypto::{Signature, Signer};
use super::hash::{Address, Hash32};
use super::mempool::Mempool;
use super::state::{AppendOutcome, ChainSnapshot, ChainState, Genesis, TxStatus};
use super::tx::Transaction;
use super::{ChainError, RejectReason};

/// Everything that can change a node's state.
#[derive(Debug, Clone)]
pub enum Command {
    Submit(Transaction),
    Block(Block),
    Tick(u64),
}

/// Messages a node wants gossiped after handling a command.
#[derive(Debug, Clone)]
pub enum Outbound {
    Tx(Transaction),
    Block(Arc<Block>),
}

pub struct Node {
    chain: ChainState,
    mempool: Mempool,
    signers: Vec<Arc<dyn Signer>>,
    rejected: HashMap<Hash32, String>,
}

impl std::fmt::Debug for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Node")
            .field("height", &self.chain.height())
            .field("head", &self.chain.head_hash())
            .field("mempool", &self.mempool.len())
            .finish()
    }
}

impl Node {
    /// `signers` are the authority keys this node may propose with; a
    /// non-mining node passes none.
    pub fn new(genesis: Genesis, signers: Vec<Arc<dyn Signer>>) -> Result<Self, ChainError> {
        Ok(Node { chain: ChainState::new(genesis)?, mempool: Mempool::new(), signers, rejected: HashMap::new() })
    }

    pub fn chain(&self) -> &ChainState {
        &self.chain
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn handle(&mut self, cmd: Command) -> Vec<Outbound> {
        match cmd {
            Command::Submit(tx) => match self.submit_tx(tx.clone()) {
                Ok(_) => vec![Outbound::Tx(tx)],
                Err(_) => Vec::new(),
            },
            Command::Block(b) => {
                let _ = self.receive_block(b);
                Vec::new()
            }
            Command::Tick(now) => match self.propose_block(now) {
                Ok(b) => vec![Outbound::Block(b)],
                Err(_) => Vec::new(),
            },
        }
    }

    pub fn submit_tx(&mut self, tx: Transaction) -> Result<Hash32, ChainError> {
        let hash = tx.hash();
        let confirmed = self.chain.head_state().nonce(&tx.sender);
        let known = self.chain.tx_location(&hash).is_some();
        let verifier = self.chain.genesis().verifier.clone();
        match self.mempool.submit(tx, verifier.as_ref(), confirmed, known) {
            Ok(h) => {
                self.rejected.remove(&h);
                Ok(h)
            }
            Err(ChainError::DuplicateTx) => Err(ChainError::DuplicateTx),
            Err(e) => {
                self.rejected.entry(hash).or_insert_with(|| reason_name(&e));
                Err(e)
            }
        }
    }

    pub fn receive_block(&mut self, block: Block) -> Result<AppendOutcome, RejectReason> {
        let outcome = self.chain.append(block)?;
        if let AppendOutcome::Added { head_changed: true, reverted } = &outcome {
            self.after_head_change(reverted.clone());
        }
        Ok(outcome)
    }

    fn after_head_change(&mut self, reverted: Vec<Transaction>) {
        let pending = self.mempool.drain();
        for tx in reverted.into_iter().chain(pending) {
            let _ = self.submit_tx(tx);
        }
    }

    /// Rotation offset for each controlled authority at the next height:
    /// `(index - height) mod n`. Offset 0 owns the slot; offset k may
    /// take over once `2 * interval * k` has passed since the parent.
    pub fn propose_block(&mut self, now_ms: u64) -> Result<Arc<Block>, ChainError> {
        let genesis = self.chain.genesis().clone();
        let params = genesis.params;
        let parent = self.chain.head().clone();
        let height = parent.header.height + 1;
        let n = genesis.authorities.len() as u64;
        let mut chosen: Option<(u64, Arc<dyn Signer>)> = None;
        let mut own_slot_waiting = false;
        for s in &self.signers {
            let Some(idx) = genesis.authorities.iter().position(|a| *a == s.address()) else {
                continue;
            };
            let k = (idx as u64 + n - height % n) % n;
            let wait = if k == 0 { params.block_interval_ms } else { 2 * params.block_interval_ms * k };
            if now_ms >= parent.header.timestamp_ms + wait {
                if chosen.as_ref().is_none_or(|(ck, _)| k < *ck) {
                    chosen = Some((k, s.clone()));
                }
            } else if k == 0 {
                own_slot_waiting = true;
            }
        }
        let Some((skipped, signer)) = chosen else {
            return Err(if own_slot_waiting { ChainError::IntervalNotElapsed } else { ChainError::NotMyTurn });
        };
        let state = self.chain.head_state().clone();
        let txs = self.mempool.select(params.block_capacity, |a| state.nonce(a));
        let mut header = BlockHeader {
            parent_hash: parent.hash(),
            height,
            merkle_root: merkle_root(&txs),
            timestamp_ms: now_ms,
            proposer: Address::ZERO,
            skipped,
            proposer_signature: Signature::EMPTY,
        };
        header.sign(signer.as_ref());
        let block = Block { header, transactions: txs };
        let hash = block.hash();
        self.receive_block(block).map_err(ChainError::Rejected)?;
        Ok(self.chain.block(&hash).expect("just appended").clone())
    }

    pub fn tx_status(&self, hash: &Hash32) -> Result<TxStatus, ChainError> {
        if let Some((height, index, r)) = self.chain.receipt(hash) {
            return Ok(TxStatus::Confirmed { height, index, ok: r.ok, error: r.error.clone() });
        }
        if self.mempool.contains(hash) {
            return Ok(TxStatus::Pending);
        }
        if let Some(reason) = self.rejected.get(hash) {
            return Ok(TxStatus::Rejected { reason: reason.clone() });
        }
        Err(ChainError::UnknownTx)
    }
}

fn reason_name(e: &ChainError) -> String {
    match e {
        ChainError::BadSignature => "BadSignature".into(),
        ChainError::UnknownSender => "UnknownSender".into(),
        ChainError::NonceGap { .. } => "NonceGap".into(),
        ChainError::StaleNonce { .. } => "StaleNonce".into(),
        other => other.to_string(),
    }
}

/// Shared single-process chain: commands serialize through one mutex and
/// readers clone the latest published snapshot. Used by the gateway and
/// examples; block production can run on a background ticker.
pub struct ChainHandle {
    node: Mutex<Node>,
    snapshot: RwLock<Arc<ChainSnapshot>>,
    epoch: Instant,
    stop: AtomicBool,
    ticker: Mutex<Option<JoinHandle<()>>>,
}

impl std::fmt::Debug for ChainHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChainHandle").field("height", &self.snapshot().height()).finish()
    }
}

impl ChainHandle {
    pub fn new(node: Node) -> Arc<Self> {
        let snap = Arc::new(node.chain().snapshot());
        Arc::new(ChainHandle {
            node: Mutex::new(node),
            snapshot: RwLock::new(snap),
            epoch: Instant::now(),
            stop: AtomicBool::new(false),
            ticker: Mutex::new(None),
        })
    }

    pub fn snapshot(&self) -> Arc<ChainSnapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Milliseconds since the handle was created; the chain clock when
    /// genesis is at timestamp 0.
    pub fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    fn with_node<T>(&self, f: impl FnOnce(&mut Node) -> T) -> T {
        let mut node = self.node.lock().expect("node lock");
        let before = node.chain().head_hash();
        let out = f(&mut node);
        if node.chain().head_hash() != before {
            *self.snapshot.write().expect("snapshot lock") = Arc::new(node.chain().snapshot());
        }
        out
    }

    pub fn submit(&self, tx: Transaction) -> Result<Hash32, ChainError> {
        self.with_node(|n| n.submit_tx(tx))
    }

    pub fn tick(&self) -> Option<Arc<Block>> {
        let now = self.now_ms();
        self.with_node(|n| n.propose_block(now).ok())
    }

    pub fn tx_status(&self, hash: &Hash32) -> Result<TxStatus, ChainError> {
        self.node.lock().expect("node lock").tx_status(hash)
    }

    /// Blocks until `hash` is confirmed or `timeout` passes, producing
    /// blocks inline when no ticker is running.
    pub fn wait_confirmed(&self, hash: &Hash32, timeout: Duration) -> Result<TxStatus, ChainError> {
        let deadline = Instant::now() + timeout;
        loop {
            let st = self.tx_status(hash)?;
            if matches!(st, TxStatus::Confirmed { .. } | TxStatus::Rejected { .. }) {
                return Ok(st);
            }
            if Instant::now() >= deadline {
                return Ok(st);
            }
            if self.ticker.lock().expect("ticker lock").is_none() {
                self.tick();
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    /// Starts a background thread that offers a tick every `period`.
    pub fn start_producer(self: &Arc<Self>, period: Duration) {
        let mut slot = self.ticker.lock().expect("ticker lock");
        if slot.is_some() {
            return;
        }
        let me = Arc::downgrade(self);
        *slot = Some(std::thread::spawn(move || loop {
            let Some(h) = me.upgrade() else { break };
            if h.stop.load(Ordering::Relaxed) {
                break;
            }
            h.tick();
            drop(h);
            std::thread::sleep(period);
        }));
    }

    pub fn stop_producer(&self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(j) = self.ticker.lock().expect("ticker lock").take() {
            let _ = j.join();
        }
        self.stop.store(false, Ordering::Relaxed);
    }
}

impl Drop for ChainHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}
