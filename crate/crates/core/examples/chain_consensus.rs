//! Permissioned proof-of-authority ledger: a simulated network with a
//! crashed miner, then a single in-process node producing blocks with
//! Merkle inclusion proofs.
//!
//! ```text
//! cargo run --release --example chain_consensus
//! ```

use std::error::Error;
use std::sync::Arc;
use std::time::Duration;

use adsb_trust::chain::harness::{run as run_network, HarnessConfig};
use adsb_trust::chain::{
    merkle_proof, verify_proof, ChainHandle, ChainParams, Genesis, KeyedHashSigner, Node, Role, Signer, Transaction, TxStatus,
};
use adsb_trust::contracts::{CallPayload, CodeId};

pub fn run() -> Result<(), Box<dyn Error>> {
    let cfg = HarnessConfig { transactions: 120, senders: 12, validity_trials: 200, settle_ms: 4000, ..HarnessConfig::default() };
    let report = run_network(&cfg)?;
    println!(
        "network: {} live nodes, height {}, {} / {} confirmed, max {} rounds",
        report.live_nodes, report.final_height, report.confirmed, report.submitted, report.max_confirmation_rounds
    );
    println!(
        "agreement {} termination {} validity {}",
        report.agreement(),
        report.termination(3),
        report.validity()
    );

    let miner = KeyedHashSigner::from_seed("example/miner");
    let member = KeyedHashSigner::from_seed("example/member");
    let genesis = Genesis::from_signers(&[(&miner, Role::Miner), (&member, Role::ServiceManager)], 0, ChainParams::default())
        .with_contract(CodeId::Registration, Vec::new());
    let registry = adsb_trust::chain::genesis_contract_address(0);
    let chain = ChainHandle::new(Node::new(genesis, vec![Arc::new(miner) as Arc<dyn Signer>])?);

    let mut hashes = Vec::new();
    for (i, vid) in ["edge-1", "edge-2", "fog-1"].iter().enumerate() {
        let subject = KeyedHashSigner::from_seed(&format!("example/{vid}")).address();
        let call = CallPayload::new(registry, "register", &[vid, &subject.to_string()]);
        hashes.push(chain.submit(Transaction::new_signed(&member, i as u64 + 1, call.encode()))?);
    }
    for h in &hashes {
        let st = chain.wait_confirmed(h, Duration::from_secs(5))?;
        assert!(matches!(st, TxStatus::Confirmed { ok: true, .. }), "{st:?}");
    }
    let snap = chain.snapshot();
    println!("local chain height {}, head {}", snap.height(), snap.head_hash);
    let block = snap.block_at(1).expect("block 1");
    for i in 0..block.transactions.len() {
        let proof = merkle_proof(&block.transactions, i)?;
        let ok = verify_proof(&block.header.merkle_root, &block.transactions[i].hash(), &proof);
        println!("tx {i} inclusion proof ({} steps) verifies: {ok}", proof.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
