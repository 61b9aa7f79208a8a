//! Simulated PoA network for the consensus properties.
//!
//! Miners and non-miners are full validators connected pairwise by links
//! with uniformly random delay. Clients submit transactions to random
//! live nodes; nodes gossip transactions and blocks to every peer. Crashed
//! miners never tick and drop everything they receive.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::block::{merkle_root, Block};
use super::crypto::{KeyedHashSigner, Signer};
use super::hash::{Hash32, Address};
use super::node::{Command, Node, Outbound};
use super::state::{genesis_contract_address, ChainParams, Genesis};
use super::tx::Transaction;
use super::{ChainError, RejectReason, Role};
use crate::contracts::{CallPayload, CodeId};
use crate::sim::queue::EventQueue;

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub miners: usize,
    pub non_miners: usize,
    pub transactions: usize,
    pub senders: usize,
    pub tx_rate_per_s: f64,
    pub max_link_delay_ms: u64,
    pub crashed_miners: Vec<usize>,
    pub tick_ms: u64,
    /// Ticks stop this long after the last submission.
    pub settle_ms: u64,
    pub validity_trials: usize,
    pub seed: u64,
    pub params: ChainParams,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            miners: 6,
            non_miners: 6,
            transactions: 1000,
            senders: 100,
            tx_rate_per_s: 80.0,
            max_link_delay_ms: 100,
            crashed_miners: vec![2],
            tick_ms: 25,
            settle_ms: 10_000,
            validity_trials: 10_000,
            seed: 7,
            params: ChainParams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct HarnessReport {
    pub live_nodes: usize,
    pub final_height: u64,
    pub sim_time_ms: f64,
    pub skip_blocks: usize,
    pub submitted: usize,
    pub entry_rejections: usize,
    pub confirmed: usize,
    pub max_confirmation_rounds: u64,
    pub heads_agree: bool,
    pub chains_identical: bool,
    pub logs_identical: bool,
    pub finality_violations: usize,
    pub validity_trials: usize,
    pub invalid_accepted: usize,
    pub valid_rejected: usize,
    pub verdict_disagreements: usize,
    pub rejection_counts: BTreeMap<String, usize>,
}

impl HarnessReport {
    pub fn agreement(&self) -> bool {
        self.heads_agree && self.chains_identical && self.logs_identical
    }

    pub fn termination(&self, liveness_bound: u64) -> bool {
        self.entry_rejections == 0 && self.confirmed == self.submitted && self.max_confirmation_rounds <= liveness_bound
    }

    pub fn validity(&self) -> bool {
        self.invalid_accepted == 0 && self.valid_rejected == 0 && self.verdict_disagreements == 0
    }

    pub fn append_only(&self) -> bool {
        self.finality_violations == 0
    }
}

enum Ev {
    Submit { node: usize, tx: Transaction },
    Deliver { node: usize, cmd: Command },
    Tick { node: usize },
}

struct Finality {
    upto: u64,
    positions: HashMap<Hash32, (u64, usize)>,
}

pub fn run(cfg: &HarnessConfig) -> Result<HarnessReport, ChainError> {
    if cfg.miners == 0 || cfg.senders == 0 || cfg.tx_rate_per_s <= 0.0 {
        return Err(ChainError::Config("need miners, senders and a positive rate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let miners: Vec<KeyedHashSigner> = (0..cfg.miners).map(|i| KeyedHashSigner::from_seed(&format!("miner-{i}"))).collect();
    let observers: Vec<KeyedHashSigner> =
        (0..cfg.non_miners).map(|i| KeyedHashSigner::from_seed(&format!("observer-{i}"))).collect();
    let senders: Vec<KeyedHashSigner> = (0..cfg.senders).map(|i| KeyedHashSigner::from_seed(&format!("sender-{i}"))).collect();

    let mut accounts: Vec<(&KeyedHashSigner, Role)> = miners.iter().map(|k| (k, Role::Miner)).collect();
    accounts.extend(observers.iter().map(|k| (k, Role::NonMiner)));
    accounts.extend(senders.iter().map(|k| (k, Role::Member)));
    let genesis = Genesis::from_signers(&accounts, 0, cfg.params).with_contract(CodeId::Registration, Vec::new());
    let registry = genesis_contract_address(0);

    let total = cfg.miners + cfg.non_miners;
    let mut nodes = Vec::with_capacity(total);
    for i in 0..total {
        let keys: Vec<Arc<dyn Signer>> = if i < cfg.miners { vec![Arc::new(miners[i].clone())] } else { Vec::new() };
        nodes.push(Node::new(genesis.clone(), keys)?);
    }
    let live: Vec<bool> = (0..total).map(|i| !(i < cfg.miners && cfg.crashed_miners.contains(&i))).collect();
    let live_ids: Vec<usize> = (0..total).filter(|i| live[*i]).collect();

    let mut q: EventQueue<Ev> = EventQueue::new();
    let spacing = 1000.0 / cfg.tx_rate_per_s;
    let start = 1000.0;
    let mut txs = Vec::with_capacity(cfg.transactions);
    for j in 0..cfg.transactions {
        let s = j % cfg.senders;
        let nonce = (j / cfg.senders) as u64 + 1;
        let vid = format!("sender-{s}");
        let addr = senders[s].address().to_hex();
        let call = if nonce == 1 {
            CallPayload::new(registry, "register", &[&vid, &addr])
        } else {
            CallPayload::new(registry, "authenticate", &[&vid, &addr])
        };
        let tx = Transaction::new_signed(&senders[s], nonce, call.encode());
        let node = live_ids[rng.random_range(0..live_ids.len())];
        txs.push(tx.hash());
        q.schedule(start + j as f64 * spacing, Ev::Submit { node, tx }).expect("future");
    }
    let stop_ticks = start + cfg.transactions as f64 * spacing + cfg.settle_ms as f64;
    for i in 0..cfg.miners {
        if live[i] {
            q.schedule(cfg.tick_ms as f64, Ev::Tick { node: i }).expect("future");
        }
    }

    let mut entry_height: HashMap<Hash32, u64> = HashMap::new();
    let mut report = HarnessReport { submitted: cfg.transactions, ..Default::default() };
    let mut finality: Vec<Finality> = (0..total).map(|_| Finality { upto: 0, positions: HashMap::new() }).collect();

    while let Some((t, _, ev)) = q.pop() {
        let (node, out) = match ev {
            Ev::Tick { node } => {
                let next = t + cfg.tick_ms as f64;
                if next <= stop_ticks {
                    q.schedule(next, Ev::Tick { node }).expect("future");
                }
                (node, nodes[node].handle(Command::Tick(t as u64)))
            }
            Ev::Submit { node, tx } => {
                let h = tx.hash();
                entry_height.insert(h, nodes[node].chain().height());
                match nodes[node].submit_tx(tx.clone()) {
                    Ok(_) => (node, vec![Outbound::Tx(tx)]),
                    Err(_) => {
                        report.entry_rejections += 1;
                        (node, Vec::new())
                    }
                }
            }
            Ev::Deliver { node, cmd } => {
                if !live[node] {
                    continue;
                }
                (node, nodes[node].handle(cmd))
            }
        };
        check_finality(&nodes[node], &mut finality[node], &mut report);
        for msg in out {
            for peer in 0..total {
                if peer == node {
                    continue;
                }
                let delay = rng.random_range(0..=cfg.max_link_delay_ms) as f64;
                let cmd = match &msg {
                    Outbound::Tx(tx) => Command::Submit(tx.clone()),
                    Outbound::Block(b) => Command::Block((**b).clone()),
                };
                q.schedule(t + delay, Ev::Deliver { node: peer, cmd }).expect("future");
            }
        }
        report.sim_time_ms = t;
    }

    let reference = &nodes[live_ids[0]];
    let chain = reference.chain();
    report.live_nodes = live_ids.len();
    report.final_height = chain.height();
    report.heads_agree = live_ids.iter().all(|i| nodes[*i].chain().head_hash() == chain.head_hash());
    let encoded = chain.encoded_chain();
    report.chains_identical = live_ids.iter().all(|i| nodes[*i].chain().encoded_chain() == encoded);
    let log = chain.confirmed_log();
    report.logs_identical = live_ids.iter().all(|i| nodes[*i].chain().confirmed_log() == log);
    report.skip_blocks = (1..=chain.height())
        .filter(|h| chain.block_at(*h).is_some_and(|b| b.header.skipped > 0))
        .count();
    for h in &txs {
        if let Some((height, _)) = chain.tx_location(h) {
            report.confirmed += 1;
            let rounds = height.saturating_sub(entry_height[h]);
            report.max_confirmation_rounds = report.max_confirmation_rounds.max(rounds);
        }
    }

    let keys: HashMap<Address, &KeyedHashSigner> = miners.iter().map(|k| (k.address(), k)).collect();
    let live_nodes: Vec<&Node> = live_ids.iter().map(|i| &nodes[*i]).collect();
    validity_trials(&live_nodes, &keys, &senders, cfg.validity_trials, &mut rng, &mut report);
    Ok(report)
}

fn check_finality(node: &Node, fin: &mut Finality, report: &mut HarnessReport) {
    let chain = node.chain();
    for (h, pos) in &fin.positions {
        if chain.tx_location(h) != Some(*pos) {
            report.finality_violations += 1;
        }
    }
    let depth = chain.genesis().params.finality_depth;
    let final_height = chain.height().saturating_sub(depth);
    while fin.upto < final_height {
        fin.upto += 1;
        let b = chain.block_at(fin.upto).expect("canonical height");
        for (i, tx) in b.transactions.iter().enumerate() {
            fin.positions.insert(tx.hash(), (fin.upto, i));
        }
    }
}

fn resign(block: &mut Block, keys: &HashMap<Address, &KeyedHashSigner>, signer: Address) {
    if let Some(k) = keys.get(&signer) {
        block.header.sign(*k);
    }
}

/// Each trial takes a canonical block and either replays it unchanged or
/// applies one corruption, re-signing where needed so only the intended
/// rule is broken. Every live node must return the same verdict, valid
/// blocks must pass and corrupted ones must fail.
fn validity_trials(
    nodes: &[&Node],
    keys: &HashMap<Address, &KeyedHashSigner>,
    senders: &[KeyedHashSigner],
    trials: usize,
    rng: &mut ChaCha8Rng,
    report: &mut HarnessReport,
) {
    let chain = nodes[0].chain();
    let top = chain.height();
    if top == 0 {
        return;
    }
    let genesis = chain.genesis().clone();
    for _ in 0..trials {
        let h = rng.random_range(1..=top);
        let base = chain.block_at(h).expect("canonical").as_ref().clone();
        let mut b = base.clone();
        let mutation = rng.random_range(0..10u32);
        let proposer = b.header.proposer;
        match mutation {
            0 => {}
            1 => {
                b.header.merkle_root = Hash32::ZERO;
                resign(&mut b, keys, proposer);
            }
            2 => {
                let i = rng.random_range(0..32);
                b.header.proposer_signature.0[i] ^= 1 << rng.random_range(0..8);
            }
            3 => {
                let others: Vec<Address> = genesis.authorities.iter().copied().filter(|a| *a != proposer).collect();
                let wrong = others[rng.random_range(0..others.len())];
                resign(&mut b, keys, wrong);
            }
            4 => {
                let parent = chain.block(&b.header.parent_hash).expect("parent");
                b.header.timestamp_ms = parent.header.timestamp_ms - rng.random_range(0..=parent.header.timestamp_ms.min(5));
                resign(&mut b, keys, proposer);
            }
            5 => {
                b.header.height += 1;
                let p = genesis.proposer_for(b.header.height, b.header.skipped);
                resign(&mut b, keys, p);
            }
            6 => {
                let mut junk = [0u8; 32];
                rng.fill(&mut junk);
                b.header.parent_hash = Hash32(junk);
                resign(&mut b, keys, proposer);
            }
            7 => {
                if b.transactions.is_empty() {
                    let s = &senders[rng.random_range(0..senders.len())];
                    let mut tx = Transaction::new_signed(s, 1, vec![1, 2, 3]);
                    tx.signature.0[0] ^= 0xff;
                    b.transactions.push(tx);
                } else {
                    let i = rng.random_range(0..b.transactions.len());
                    let tx = &mut b.transactions[i];
                    if tx.payload.is_empty() {
                        tx.payload.push(0);
                    } else {
                        let j = rng.random_range(0..tx.payload.len());
                        tx.payload[j] ^= 0x01;
                    }
                }
                b.header.merkle_root = merkle_root(&b.transactions);
                resign(&mut b, keys, proposer);
            }
            8 => {
                let n = genesis.authorities.len() as u64;
                let parent = chain.block(&b.header.parent_hash).expect("parent");
                let gap = b.header.timestamp_ms - parent.header.timestamp_ms;
                let interval = genesis.params.block_interval_ms;
                // smallest skip the block's timestamp cannot justify
                let s = gap / (2 * interval) + 1;
                if s >= n {
                    b.header.skipped = n;
                } else {
                    b.header.skipped = s;
                    let p = genesis.proposer_for(b.header.height, s);
                    resign(&mut b, keys, p);
                }
            }
            _ => {
                if b.transactions.is_empty() {
                    let s = &senders[rng.random_range(0..senders.len())];
                    b.transactions.push(Transaction::new_signed(s, 1_000_000, Vec::new()));
                } else {
                    let dup = b.transactions[rng.random_range(0..b.transactions.len())].clone();
                    b.transactions.push(dup);
                }
                b.header.merkle_root = merkle_root(&b.transactions);
                resign(&mut b, keys, proposer);
            }
        }
        let verdicts: Vec<Result<(), RejectReason>> = nodes.iter().map(|n| n.chain().validate_block(&b)).collect();
        if verdicts.iter().any(|v| *v != verdicts[0]) {
            report.verdict_disagreements += 1;
        }
        let mutated = b != base;
        match (&verdicts[0], mutated) {
            (Ok(()), true) => report.invalid_accepted += 1,
            (Err(_), false) => report.valid_rejected += 1,
            (Err(r), true) => {
                let name = match r {
                    RejectReason::BadTx(_) => "BadTx".to_string(),
                    other => other.to_string(),
                };
                *report.rejection_counts.entry(name).or_default() += 1;
            }
            (Ok(()), false) => {}
        }
        report.validity_trials += 1;
    }
}
