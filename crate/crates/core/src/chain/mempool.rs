use std::collections::{BTreeMap, HashMap};

use super::crypto::Verifier;
use super::hash::{Address, Hash32};
use super::tx::Transaction;
use super::ChainError;

/// Pending transactions. Selection walks arrival order, which already
/// respects per-sender nonce order because gapped nonces are refused.
#[derive(Debug, Default, Clone)]
pub struct Mempool {
    entries: HashMap<Hash32, (u64, Transaction)>,
    by_sender: BTreeMap<Address, BTreeMap<u64, Hash32>>,
    order: BTreeMap<u64, Hash32>,
    next_seq: u64,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, hash: &Hash32) -> bool {
        self.entries.contains_key(hash)
    }

    pub fn pending_count(&self, sender: &Address) -> u64 {
        self.by_sender.get(sender).map_or(0, |m| m.len() as u64)
    }

    /// Admits `tx` if its nonce is exactly `confirmed_nonce + pending + 1`.
    /// `already_confirmed` reports whether the chain already holds it.
    pub fn submit(
        &mut self,
        tx: Transaction,
        verifier: &dyn Verifier,
        confirmed_nonce: u64,
        already_confirmed: bool,
    ) -> Result<Hash32, ChainError> {
        let hash = tx.hash();
        if already_confirmed || self.entries.contains_key(&hash) {
            return Err(ChainError::DuplicateTx);
        }
        tx.verify(verifier)?;
        let expected = confirmed_nonce + self.pending_count(&tx.sender) + 1;
        if tx.nonce > expected {
            return Err(ChainError::NonceGap { expected, got: tx.nonce });
        }
        if tx.nonce < expected {
            return Err(ChainError::StaleNonce { expected, got: tx.nonce });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.by_sender.entry(tx.sender).or_default().insert(tx.nonce, hash);
        self.order.insert(seq, hash);
        self.entries.insert(hash, (seq, tx));
        Ok(hash)
    }

    /// Up to `capacity` transactions in arrival order whose nonces follow
    /// on from `confirmed(sender)` without gaps.
    pub fn select(&self, capacity: usize, confirmed: impl Fn(&Address) -> u64) -> Vec<Transaction> {
        let mut next: HashMap<Address, u64> = HashMap::new();
        let mut out = Vec::new();
        for hash in self.order.values() {
            if out.len() == capacity {
                break;
            }
            let tx = &self.entries[hash].1;
            let want = next.entry(tx.sender).or_insert_with(|| confirmed(&tx.sender) + 1);
            if tx.nonce == *want {
                *want += 1;
                out.push(tx.clone());
            }
        }
        out
    }

    pub fn remove(&mut self, hash: &Hash32) -> Option<Transaction> {
        let (seq, tx) = self.entries.remove(hash)?;
        self.order.remove(&seq);
        if let Some(m) = self.by_sender.get_mut(&tx.sender) {
            m.remove(&tx.nonce);
            if m.is_empty() {
                self.by_sender.remove(&tx.sender);
            }
        }
        Some(tx)
    }

    /// Drops every entry whose nonce is already consumed on chain.
    pub fn prune(&mut self, confirmed: impl Fn(&Address) -> u64) {
        let stale: Vec<Hash32> = self
            .by_sender
            .iter()
            .flat_map(|(sender, m)| {
                let c = confirmed(sender);
                m.range(..=c).map(|(_, h)| *h).collect::<Vec<_>>()
            })
            .collect();
        for h in stale {
            self.remove(&h);
        }
    }

    /// Removes and returns everything in arrival order.
    pub fn drain(&mut self) -> Vec<Transaction> {
        let order = std::mem::take(&mut self.order);
        self.by_sender.clear();
        let mut entries = std::mem::take(&mut self.entries);
        order.values().filter_map(|h| entries.remove(h).map(|(_, tx)| tx)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.order.values().map(|h| &self.entries[h].1)
    }
}
