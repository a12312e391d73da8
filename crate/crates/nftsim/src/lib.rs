//! Deterministic simulator and verification suite for tokenised ownership
//! on an append-only ledger: a chain state machine with mint, transfer, and
//! royalty operations, a temporal ownership-law checker, a depth-2
//! epistemic engine for public certifiability, and a legal-notice case
//! study built on top of both.

pub mod epistemic;
pub mod laws;
pub mod ledger;
pub mod netsim;
pub mod notice;
pub mod transactions;
