//! Decentralized ADS-B trust framework.
//!
//! Raw 1090ES frames and CSV exports are decoded ([`codec`]), tracked per
//! aircraft on the edge ([`tracker`]), scored against contextual rules on the
//! fog ([`fusion`]), and shared between services through a permissioned
//! proof-of-authority ledger ([`chain`]) whose native contracts ([`contracts`])
//! hold VID registrations and capability tokens. The [`gateway`] exposes the
//! HTTP surface, [`sim`] generates traffic and attacks, and [`bench`] drives
//! the latency, throughput and end-to-end experiments.

pub mod codec;
pub mod geo;
pub mod tracker;
pub mod fusion;
pub mod chain;
pub mod contracts;
pub mod gateway;
pub mod sim;
pub mod bench;
