//! Checker for the six temporal ownership laws, evaluated over a sequence
//! of chain snapshots (one per tick). Box-quantified laws are checked at
//! every tick of the finite history, next-time laws at every consecutive
//! pair of snapshots.

use std::collections::{BTreeMap, BTreeSet};

use crate::ledger::{AssetId, Chain, Tick};

/// Ordered chain snapshots; index = tick. Snapshot `i+1` extends snapshot
/// `i` by at most one block in any honestly generated history.
#[derive(Clone, Debug, Default)]
pub struct History {
    snapshots: Vec<Chain>,
}

impl History {
    pub fn new(snapshots: Vec<Chain>) -> Self {
        History { snapshots }
    }

    /// Reconstruct the per-tick history of a single chain from its block
    /// times: snapshot `t` holds the blocks present by tick `t`.
    pub fn from_chain(chain: &Chain) -> Self {
        let last = chain.blocks().last().map(|b| b.time.0).unwrap_or(0);
        let snapshots = (0..=last).map(|t| chain.up_to_time(Tick(t))).collect();
        History { snapshots }
    }

    pub fn snapshots(&self) -> &[Chain] {
        &self.snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub tick: u64,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LawReport {
    pub law: u8,
    pub violations: Vec<Violation>,
}

impl LawReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn report(law: u8, violations: Vec<Violation>) -> LawReport {
    LawReport { law, violations }
}

/// Per-snapshot digest of the ownership data the laws consult, built once
/// per snapshot so the checkers avoid re-decoding tokens.
struct View {
    /// Decoded tokens in chain order.
    records: Vec<crate::ledger::TokenRecord>,
    /// Earliest mint block time per asset.
    mint_time: BTreeMap<AssetId, Tick>,
    /// Token records per asset, chain order.
    by_asset: BTreeMap<AssetId, Vec<crate::ledger::TokenRecord>>,
}

impl View {
    fn build(chain: &Chain) -> View {
        let records = chain.token_records();
        let mut mint_time = BTreeMap::new();
        let mut by_asset: BTreeMap<AssetId, Vec<crate::ledger::TokenRecord>> = BTreeMap::new();
        for block in chain.blocks() {
            if let crate::ledger::Payload::Mint { token } = &block.payload {
                if let Ok((_, asset, _)) = crate::ledger::decode_token(token) {
                    mint_time.entry(asset).or_insert(block.time);
                }
            }
        }
        for r in &records {
            by_asset.entry(r.asset.clone()).or_default().push(r.clone());
        }
        View { records, mint_time, by_asset }
    }

    fn existing(&self, t: Tick) -> BTreeSet<AssetId> {
        self.mint_time
            .iter()
            .filter(|(_, mt)| **mt <= t)
            .map(|(a, _)| a.clone())
            .collect()
    }

    fn owner_list(&self, asset: &AssetId) -> Vec<&crate::ledger::AgentId> {
        self.by_asset
            .get(asset)
            .map(|rs| rs.iter().map(|r| &r.agent).collect())
            .unwrap_or_default()
    }
}

fn views(h: &History) -> Vec<View> {
    h.snapshots().iter().map(View::build).collect()
}

/// Law 1: each existing asset has an owner at any time.
pub fn check_owner_exists(h: &History) -> LawReport {
    law_owner_exists(&views(h))
}

fn law_owner_exists(vs: &[View]) -> LawReport {
    let mut violations = Vec::new();
    for (t, v) in vs.iter().enumerate() {
        let t = Tick(t as u64);
        for (asset, mt) in &v.mint_time {
            if *mt > t {
                continue;
            }
            let owned = v
                .by_asset
                .get(asset)
                .is_some_and(|rs| rs.iter().any(|r| r.tick <= t));
            if !owned {
                violations.push(Violation {
                    tick: t.0,
                    description: format!("existing asset {asset} has no owner"),
                });
            }
        }
    }
    report(1, violations)
}

/// Law 2: each existing asset has at most one owner at any time. Two tokens
/// for the same asset and tick naming distinct agents violate it.
pub fn check_owner_unique(h: &History) -> LawReport {
    law_owner_unique(&views(h))
}

fn law_owner_unique(vs: &[View]) -> LawReport {
    let mut violations = Vec::new();
    for (t, v) in vs.iter().enumerate() {
        let mut sorted: Vec<_> = v.records.iter().collect();
        sorted.sort_by(|a, b| (&a.asset, a.tick, &a.agent).cmp(&(&b.asset, b.tick, &b.agent)));
        for pair in sorted.windows(2) {
            let (r, r2) = (&pair[0], &pair[1]);
            if r.asset == r2.asset && r.tick == r2.tick && r.agent != r2.agent {
                violations.push(Violation {
                    tick: t as u64,
                    description: format!(
                        "asset {} owned by both {} and {} at tick {}",
                        r.asset, r.agent, r2.agent, r.tick
                    ),
                });
            }
        }
        // subsequent snapshots only add records; report the first tick
        if !violations.is_empty() {
            break;
        }
    }
    report(2, violations)
}

/// Law 3: a non-existing asset does not have an owner.
pub fn check_nonexistent_unowned(h: &History) -> LawReport {
    law_nonexistent_unowned(&views(h))
}

fn law_nonexistent_unowned(vs: &[View]) -> LawReport {
    let mut violations = Vec::new();
    for (t, v) in vs.iter().enumerate() {
        let t = Tick(t as u64);
        for asset in v.by_asset.keys() {
            let exists = v.mint_time.get(asset).is_some_and(|mt| *mt <= t);
            if !exists && !v.owner_list(asset).is_empty() {
                violations.push(Violation {
                    tick: t.0,
                    description: format!("non-existing asset {asset} has an owner"),
                });
            }
        }
    }
    report(3, violations)
}

/// Law 4: the set of existing assets increases with time.
pub fn check_assets_monotone(h: &History) -> LawReport {
    law_assets_monotone(&views(h))
}

fn law_assets_monotone(vs: &[View]) -> LawReport {
    let mut violations = Vec::new();
    for t in 1..vs.len() {
        let prev = vs[t - 1].existing(Tick(t as u64 - 1));
        let next = vs[t].existing(Tick(t as u64));
        for asset in prev.difference(&next) {
            violations.push(Violation {
                tick: t as u64,
                description: format!("asset {asset} vanished from the existing set"),
            });
        }
    }
    report(4, violations)
}

/// Number of cumulative ownership records (distinct decoded triples with
/// tick at most `t`) in a snapshot.
fn owns_size(v: &View, t: Tick) -> usize {
    v.records
        .iter()
        .filter(|r| r.tick <= t)
        .map(|r| (&r.agent, &r.asset, r.tick))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Law 5: the size of the ownership relation increases with time.
pub fn check_owns_size_monotone(h: &History) -> LawReport {
    law_owns_size_monotone(&views(h))
}

fn law_owns_size_monotone(vs: &[View]) -> LawReport {
    let mut violations = Vec::new();
    for t in 1..vs.len() {
        let prev = owns_size(&vs[t - 1], Tick(t as u64 - 1));
        let next = owns_size(&vs[t], Tick(t as u64));
        if next < prev {
            violations.push(Violation {
                tick: t as u64,
                description: format!("ownership records shrank from {prev} to {next}"),
            });
        }
    }
    report(5, violations)
}

/// Law 6: for any asset, the list of past owners grows by prefixing.
pub fn check_owner_prefix(h: &History) -> LawReport {
    law_owner_prefix(&views(h))
}

fn law_owner_prefix(vs: &[View]) -> LawReport {
    let mut violations = Vec::new();
    for t in 1..vs.len() {
        let prev = &vs[t - 1];
        let next = &vs[t];
        let mut assets: BTreeSet<&AssetId> = prev.by_asset.keys().collect();
        assets.extend(next.by_asset.keys());
        for asset in assets {
            let before = prev.owner_list(asset);
            let after = next.owner_list(asset);
            if after.len() < before.len() || after[..before.len()] != before[..] {
                violations.push(Violation {
                    tick: t as u64,
                    description: format!("owner list of {asset} is not prefix-extended"),
                });
            }
        }
    }
    report(6, violations)
}

/// All six reports, law order. Snapshot views are shared across the laws.
pub fn check_all(h: &History) -> Vec<LawReport> {
    let vs = views(h);
    vec![
        law_owner_exists(&vs),
        law_owner_unique(&vs),
        law_nonexistent_unowned(&vs),
        law_assets_monotone(&vs),
        law_owns_size_monotone(&vs),
        law_owner_prefix(&vs),
    ]
}
