//! Deterministic discrete-time simulation: honest nodes, e-wallets, one
//! transaction per tick, synchronous broadcast, knowledge bookkeeping, and
//! the correctness verifier for the certified-ownership property.
//!
//! Within a producing tick the appended block is broadcast to every node,
//! the node set publicly certifies the token atom, and each wallet owner is
//! brought into the certifying group through its home node by the two-step
//! extension protocol. Everything is a pure function of the initial
//! configuration, the schedule, and the seed.

use std::collections::{BTreeSet, VecDeque};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::epistemic::{AtomId, Fact, KnowledgeBase};
use crate::laws::{self, History};
use crate::ledger::{chain_to_string, AgentId, Amount, AssetId, Chain, Tick};
use crate::transactions::{self, Rate, TxError, TxKind};

/// World atom for the network honesty assumption, publicly certified among
/// the nodes at initialisation.
pub const HONESTY_ATOM: &str = "all-nodes-honest-and-run-bc-software";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("bad trace file: {0}")]
    BadTrace(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalletCfg {
    pub owner: String,
    pub node: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositCfg {
    pub agent: String,
    pub amount: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nodes: Vec<String>,
    pub wallets: Vec<WalletCfg>,
    #[serde(default)]
    pub deposits: Vec<DepositCfg>,
    #[serde(default)]
    pub seed: u64,
}

/// Honest network node holding its own chain copy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: AgentId,
    pub chain: Chain,
}

/// An agent's interface to the network; `home_node` is the node its
/// extension messages route through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wallet {
    pub owner: AgentId,
    pub home_node: AgentId,
}

/// Test-only fault hook, disabled by default: wallet owners whose extension
/// messages are suppressed during broadcast.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultSpec {
    pub suppress_extension_for: BTreeSet<AgentId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimState {
    pub tick: Tick,
    pub chain: Chain,
    pub nodes: Vec<Node>,
    pub wallets: Vec<Wallet>,
    pub kb: KnowledgeBase,
    pub pending: VecDeque<TxKind>,
    pub seed: u64,
    pub faults: FaultSpec,
    /// Running state digest, re-hashed after every tick.
    pub digest: String,
}

impl SimState {
    /// Nodes plus wallet owners, sorted and deduplicated — the agent set the
    /// certified-ownership property quantifies over.
    pub fn all_agents(&self) -> BTreeSet<AgentId> {
        let mut out: BTreeSet<AgentId> = self.nodes.iter().map(|n| n.id.clone()).collect();
        out.extend(self.wallets.iter().map(|w| w.owner.clone()));
        out
    }

    pub fn node_ids(&self) -> BTreeSet<AgentId> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TickEvent {
    Noop,
    Applied { height: u64 },
    Rejected { error: TxError },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    #[serde(flatten)]
    pub event: TickEvent,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub tick: u64,
    pub request: TxKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    /// Run at least this many ticks even if the schedule ends earlier.
    pub min_ticks: u64,
}

impl Schedule {
    pub fn total_ticks(&self) -> u64 {
        let last = self.entries.last().map(|e| e.tick + 1).unwrap_or(0);
        last.max(self.min_ticks)
    }
}

/// Full record of one run: per-tick events with state digests, the chain
/// snapshot after every tick (index 0 is genesis), and the final state.
#[derive(Clone, Debug)]
pub struct Trace {
    pub config: SimConfig,
    pub schedule: Schedule,
    pub records: Vec<EventRecord>,
    pub chains: Vec<Chain>,
    pub final_state: SimState,
}

impl Trace {
    pub fn final_state(&self) -> &SimState {
        &self.final_state
    }

    pub fn history(&self) -> History {
        History::new(self.chains.clone())
    }
}

fn pairwise_certify(kb: &mut KnowledgeBase, members: &BTreeSet<AgentId>, atom: &AtomId) {
    for m in members {
        kb.observe(m, atom).expect("atom asserted before broadcast");
    }
    let fact = Fact::atom(atom.clone());
    for sender in members {
        let others: BTreeSet<AgentId> =
            members.iter().filter(|m| *m != sender).cloned().collect();
        kb.communicate(sender, &others, &fact)
            .expect("sender observed the atom");
    }
}

/// Genesis state: empty chain plus deposit blocks, all node chains equal,
/// and the honesty assumption publicly certified among the nodes.
pub fn init(config: &SimConfig) -> Result<SimState, SimError> {
    let bad = |msg: String| SimError::BadConfig(msg);
    if config.nodes.is_empty() && !config.wallets.is_empty() {
        return Err(bad("wallets configured without nodes".into()));
    }
    let mut node_ids = Vec::new();
    for id in &config.nodes {
        let id = AgentId::new(id.clone()).map_err(|e| bad(e.to_string()))?;
        if node_ids.contains(&id) {
            return Err(bad(format!("duplicate node {id}")));
        }
        node_ids.push(id);
    }
    let mut wallets = Vec::new();
    for w in &config.wallets {
        let owner = AgentId::new(w.owner.clone()).map_err(|e| bad(e.to_string()))?;
        let home = AgentId::new(w.node.clone()).map_err(|e| bad(e.to_string()))?;
        if !node_ids.contains(&home) {
            return Err(bad(format!("wallet {owner} assigned to unknown node {home}")));
        }
        wallets.push(Wallet { owner, home_node: home });
    }

    // genesis deposits are stamped tick 0, before the clock starts
    let mut chain = Chain::new();
    for d in &config.deposits {
        let to = AgentId::new(d.agent.clone()).map_err(|e| bad(e.to_string()))?;
        chain = chain.append(
            Tick(0),
            crate::ledger::Payload::Standard(crate::ledger::StandardTx {
                buyer: AgentId::deposit(),
                seller: to,
                cost: Amount(d.amount),
                time: Tick(0),
            }),
        );
    }

    let mut kb = KnowledgeBase::new();
    let honesty = AtomId::named(HONESTY_ATOM);
    kb.assert_world(honesty.clone());
    let node_set: BTreeSet<AgentId> = node_ids.iter().cloned().collect();
    if !node_set.is_empty() {
        pairwise_certify(&mut kb, &node_set, &honesty);
    }

    let nodes = node_ids
        .into_iter()
        .map(|id| Node { id, chain: chain.clone() })
        .collect();

    let mut hasher = Sha256::new();
    hasher.update(b"genesis");
    hasher.update(config.seed.to_le_bytes());
    hasher.update(chain_to_string(&chain));
    let digest = hex::encode(hasher.finalize());

    Ok(SimState {
        tick: Tick(0),
        chain,
        nodes,
        wallets,
        kb,
        pending: VecDeque::new(),
        seed: config.seed,
        faults: FaultSpec::default(),
        digest,
    })
}

/// Enqueue a request, FIFO.
pub fn submit(sim: &mut SimState, request: TxKind) {
    sim.pending.push_back(request);
}

/// Advance the clock one unit: dequeue at most one request, apply the
/// matching transaction, broadcast and certify on success, record the event.
pub fn tick(sim: &mut SimState) -> TickEvent {
    let now = sim.tick;
    let event = match sim.pending.pop_front() {
        None => TickEvent::Noop,
        Some(request) => match transactions::apply(&sim.chain, &request, now) {
            Err(error) => TickEvent::Rejected { error },
            Ok(new_chain) => {
                let height = new_chain.height() - 1;
                sim.chain = new_chain.clone();
                for node in &mut sim.nodes {
                    node.chain = new_chain.clone();
                }
                let block = &new_chain.blocks()[height as usize];
                if let Some(token) = block.token() {
                    certify_token(sim, &AtomId::token(token));
                }
                TickEvent::Applied { height }
            }
        },
    };
    debug_assert!(sim.nodes.iter().all(|n| n.chain == sim.chain));
    sim.tick = now.succ();
    let mut hasher = Sha256::new();
    hasher.update(sim.digest.as_bytes());
    hasher.update(sim.tick.0.to_le_bytes());
    hasher.update(serde_json::to_string(&event).expect("event serializes"));
    hasher.update(sim.chain.height().to_le_bytes());
    hasher.update((sim.kb.size() as u64).to_le_bytes());
    sim.digest = hex::encode(hasher.finalize());
    event
}

/// Broadcast a freshly appended token: the nodes certify it pairwise, then
/// every wallet owner joins the certifying group via its home node.
fn certify_token(sim: &mut SimState, atom: &AtomId) {
    sim.kb.assert_world(atom.clone());
    let node_set = sim.node_ids();
    if node_set.is_empty() {
        return;
    }
    pairwise_certify(&mut sim.kb, &node_set, atom);

    let fact = Fact::atom(atom.clone());
    let mut certified = node_set;
    let mut owners: Vec<&Wallet> = sim.wallets.iter().collect();
    owners.sort_by(|a, b| a.owner.cmp(&b.owner));
    for wallet in owners {
        if certified.contains(&wallet.owner) {
            continue;
        }
        if sim.faults.suppress_extension_for.contains(&wallet.owner) {
            continue;
        }
        sim.kb
            .extend_pc(&certified, &wallet.owner, &wallet.home_node, &fact)
            .expect("extension preconditions hold for honest runs");
        certified.insert(wallet.owner.clone());
    }
}

/// Run a schedule to completion. Deterministic: the same initial state and
/// schedule always produce an identical trace.
pub fn run(config: &SimConfig, schedule: &Schedule) -> Result<Trace, SimError> {
    let mut sim = init(config)?;
    run_from(&mut sim, config, schedule)
}

/// Run against an already initialised (possibly fault-injected) state.
pub fn run_from(
    sim: &mut SimState,
    config: &SimConfig,
    schedule: &Schedule,
) -> Result<Trace, SimError> {
    for pair in schedule.entries.windows(2) {
        if pair[1].tick < pair[0].tick {
            return Err(SimError::BadSchedule("entries not sorted by tick".into()));
        }
    }
    let mut records = Vec::new();
    let mut chains = vec![sim.chain.clone()];
    let mut next = 0usize;
    for t in 0..schedule.total_ticks() {
        while next < schedule.entries.len() && schedule.entries[next].tick == t {
            submit(sim, schedule.entries[next].request.clone());
            next += 1;
        }
        let event = tick(sim);
        records.push(EventRecord { tick: t, event, digest: sim.digest.clone() });
        chains.push(sim.chain.clone());
    }
    // drain anything left queued
    while !sim.pending.is_empty() {
        let t = sim.tick.0;
        let event = tick(sim);
        records.push(EventRecord { tick: t, event, digest: sim.digest.clone() });
        chains.push(sim.chain.clone());
    }
    Ok(Trace {
        config: config.clone(),
        schedule: schedule.clone(),
        records,
        chains,
        final_state: sim.clone(),
    })
}

#[derive(Clone, Debug, Default)]
pub struct Theorem1Report {
    pub failures: Vec<String>,
}

impl Theorem1Report {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Verify the correctness property on a trace: at every tick the three
/// fundamental ownership laws hold, and every token on chain is publicly
/// certified among all agents (checked by exhaustive pair enumeration).
///
/// Knowledge only grows and tokens certify in the tick that appends them,
/// so checking every token against the final knowledge base is equivalent
/// to re-checking at every tick.
pub fn verify_theorem1(trace: &Trace) -> Theorem1Report {
    let mut failures = Vec::new();

    let history = trace.history();
    for report in [
        laws::check_owner_exists(&history),
        laws::check_owner_unique(&history),
        laws::check_nonexistent_unowned(&history),
    ] {
        for v in &report.violations {
            failures.push(format!("tick {}: law {}: {}", v.tick, report.law, v.description));
        }
    }

    let state = &trace.final_state;
    let agents = state.all_agents();
    for block in state.chain.blocks() {
        let Some(token) = block.token() else { continue };
        let atom = AtomId::token(token);
        if let Some((x, y)) = first_failing_pair(&state.kb, &agents, &atom) {
            failures.push(format!(
                "token at height {} not publicly certified: K_{x} K_{y} missing",
                block.height
            ));
        }
    }
    failures.sort();
    failures.dedup();
    Theorem1Report { failures }
}

fn first_failing_pair(
    kb: &KnowledgeBase,
    agents: &BTreeSet<AgentId>,
    atom: &AtomId,
) -> Option<(AgentId, AgentId)> {
    for x in agents {
        for y in agents {
            let nested = Fact::knows(y.clone(), Fact::atom(atom.clone()));
            if !kb.knows(x, &nested).unwrap() {
                return Some((x.clone(), y.clone()));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Random schedule generation (deterministic from a seed).
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct GenParams {
    pub agents: usize,
    pub nodes: usize,
    pub ops: usize,
    pub deposit: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { agents: 4, nodes: 3, ops: 40, deposit: 100 }
    }
}

/// A random but deterministic config/schedule pair: the same seed always
/// yields the same scenario.
pub fn random_scenario(seed: u64, params: &GenParams) -> (SimConfig, Schedule) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<String> = (0..params.nodes).map(|i| format!("n{i}")).collect();
    let agents: Vec<String> = (0..params.agents).map(|i| format!("a{i}")).collect();
    let wallets = agents
        .iter()
        .map(|a| WalletCfg {
            owner: a.clone(),
            node: nodes[rng.gen_range(0..nodes.len())].clone(),
        })
        .collect();
    let deposits = agents
        .iter()
        .map(|a| DepositCfg { agent: a.clone(), amount: params.deposit })
        .collect();
    let config = SimConfig { nodes, wallets, deposits, seed };

    let assets: Vec<AssetId> = (0..params.ops.max(1))
        .map(|i| AssetId::new(format!("asset{i}")).unwrap())
        .collect();
    let pick = |rng: &mut ChaCha8Rng, pool: &[String]| {
        AgentId::new(pool[rng.gen_range(0..pool.len())].clone()).unwrap()
    };
    let mut entries = Vec::new();
    let mut tick_no = 0u64;
    let mut minted: Vec<AssetId> = Vec::new();
    for _ in 0..params.ops {
        let request = match rng.gen_range(0..100) {
            0..=29 => {
                let asset = assets.choose(&mut rng).unwrap().clone();
                if !minted.contains(&asset) {
                    minted.push(asset.clone());
                }
                TxKind::Mint { orig: pick(&mut rng, &config.wallets.iter().map(|w| w.owner.clone()).collect::<Vec<_>>()), asset }
            }
            30..=54 => TxKind::Standard {
                buyer: pick(&mut rng, &agents_of(&config)),
                seller: pick(&mut rng, &agents_of(&config)),
                cost: Amount(rng.gen_range(0..=30)),
            },
            55..=79 => TxKind::Transfer {
                old: pick(&mut rng, &agents_of(&config)),
                new: pick(&mut rng, &agents_of(&config)),
                asset: pick_asset(&mut rng, &minted, &assets),
                cost: Amount(rng.gen_range(0..=30)),
            },
            _ => TxKind::TransferRoyalty {
                old: pick(&mut rng, &agents_of(&config)),
                new: pick(&mut rng, &agents_of(&config)),
                asset: pick_asset(&mut rng, &minted, &assets),
                cost: Amount(rng.gen_range(0..=30)),
                rate: Rate::new(rng.gen_range(0..=10), 10).unwrap(),
            },
        };
        entries.push(ScheduleEntry { tick: tick_no, request });
        tick_no += u64::from(rng.gen_range(0..3u8) == 0) + 1;
    }
    (config, Schedule { entries, min_ticks: tick_no + 1 })
}

fn agents_of(config: &SimConfig) -> Vec<String> {
    config.wallets.iter().map(|w| w.owner.clone()).collect()
}

fn pick_asset(rng: &mut ChaCha8Rng, minted: &[AssetId], all: &[AssetId]) -> AssetId {
    if !minted.is_empty() && rng.gen_bool(0.8) {
        minted[rng.gen_range(0..minted.len())].clone()
    } else {
        all[rng.gen_range(0..all.len())].clone()
    }
}

// ---------------------------------------------------------------------------
// Trace persistence: line-delimited records.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Header { config: SimConfig, min_ticks: u64 },
    Schedule { tick: u64, request: TxKind },
    Event(EventRecord),
}

pub fn save_trace<W: Write>(trace: &Trace, mut out: W) -> std::io::Result<()> {
    let mut write = |line: &TraceLine| -> std::io::Result<()> {
        writeln!(out, "{}", serde_json::to_string(line).expect("serialize"))
    };
    write(&TraceLine::Header {
        config: trace.config.clone(),
        min_ticks: trace.schedule.min_ticks,
    })?;
    for entry in &trace.schedule.entries {
        write(&TraceLine::Schedule { tick: entry.tick, request: entry.request.clone() })?;
    }
    for record in &trace.records {
        write(&TraceLine::Event(record.clone()))?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    save_trace(trace, &mut buf).expect("write to vec");
    String::from_utf8(buf).expect("utf-8")
}

/// Parsed contents of a trace file: enough to replay the run and compare
/// digests.
pub struct TraceFile {
    pub config: SimConfig,
    pub schedule: Schedule,
    pub records: Vec<EventRecord>,
}

pub fn load_trace<R: BufRead>(input: R) -> Result<TraceFile, SimError> {
    let mut config = None;
    let mut schedule = Schedule::default();
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let bad = |msg: String| SimError::BadTrace(format!("line {}: {}", idx + 1, msg));
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| bad(e.to_string()))? {
            TraceLine::Header { config: c, min_ticks } => {
                config = Some(c);
                schedule.min_ticks = min_ticks;
            }
            TraceLine::Schedule { tick, request } => {
                schedule.entries.push(ScheduleEntry { tick, request });
            }
            TraceLine::Event(record) => records.push(record),
        }
    }
    let config = config.ok_or_else(|| SimError::BadTrace("missing header".into()))?;
    Ok(TraceFile { config, schedule, records })
}
