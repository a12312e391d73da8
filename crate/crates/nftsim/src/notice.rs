//! Legal-notice case study: the five service methods modeled as epistemic
//! event scenarios, the four derived properties, and the method/property
//! table.
//!
//! The NFT method runs through the real network simulation: the court mints
//! the notice asset and transfers it to the recipient's wallet, and the
//! serving facts are then read off the resulting knowledge base. The other
//! four methods are direct event sequences on a fresh knowledge base.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::epistemic::{AtomId, EpistemicError, Fact, KnowledgeBase};
use crate::ledger::{AgentId, Amount, AssetId};
use crate::netsim::{
    self, Schedule, ScheduleEntry, SimConfig, SimError, Trace, WalletCfg,
};
use crate::transactions::TxKind;

/// The five methods of serving notice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// (α) an officer of the court directly to the recipient
    DirectOfficer,
    /// (β) registered post with a signed receipt on record
    RegisteredPost,
    /// (γ) encrypted email, never acknowledged to the court
    Email,
    /// (δ) publication in a newspaper's public notices
    Newspaper,
    /// (ε) NFT delivered to the recipient's e-wallet
    NftToWallet,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::DirectOfficer,
        Method::RegisteredPost,
        Method::Email,
        Method::Newspaper,
        Method::NftToWallet,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::DirectOfficer => "alpha",
            Method::RegisteredPost => "beta",
            Method::Email => "gamma",
            Method::Newspaper => "delta",
            Method::NftToWallet => "epsilon",
        }
    }
}

#[derive(Debug, Error)]
pub enum NoticeError {
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Epistemic(#[from] EpistemicError),
}

/// A notice-serving scenario: court, recipient, surrounding population,
/// and the method under test.
#[derive(Clone, Debug)]
pub struct NoticeScenario {
    pub court: AgentId,
    pub recipient: AgentId,
    pub population: BTreeSet<AgentId>,
    pub notice: AssetId,
    pub method: Method,
    /// γ only: whether the email actually reaches the recipient's inbox.
    pub email_delivered: bool,
    /// ε only: the network nodes carrying the chain.
    pub nodes: Vec<String>,
    /// ε only: extra background requests interleaved with the serving.
    pub background: Vec<ScheduleEntry>,
    /// Test hook: wallet owners whose extension messages are suppressed.
    pub suppress_extension_for: BTreeSet<AgentId>,
}

impl NoticeScenario {
    pub fn new(method: Method) -> Self {
        let court = AgentId::new("court").unwrap();
        let recipient = AgentId::new("resident").unwrap();
        let mut population = BTreeSet::from([court.clone(), recipient.clone()]);
        population.insert(AgentId::new("p1").unwrap());
        population.insert(AgentId::new("p2").unwrap());
        NoticeScenario {
            court,
            recipient,
            population,
            notice: AssetId::new("notice").unwrap(),
            method,
            email_delivered: true,
            nodes: vec!["n1".into(), "n2".into()],
            background: Vec::new(),
            suppress_extension_for: BTreeSet::new(),
        }
    }

    fn validate(&self) -> Result<(), NoticeError> {
        let bad = |msg: &str| NoticeError::BadScenario(msg.to_string());
        if !self.population.contains(&self.court) {
            return Err(bad("court not in population"));
        }
        if !self.population.contains(&self.recipient) {
            return Err(bad("recipient not in population"));
        }
        if self.court == self.recipient {
            return Err(bad("court cannot serve itself"));
        }
        Ok(())
    }
}

/// The four derived properties of a serving method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PropertyProfile {
    /// (a) the recipient knows the authority of the method
    pub a: bool,
    /// (b) the court knows the recipient has been served
    pub b: bool,
    /// (c) the recipient knows that the court knows
    pub c: bool,
    /// (d) the notice has been served privately
    pub d: bool,
}

impl PropertyProfile {
    pub fn as_array(&self) -> [bool; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

fn atom_authority() -> AtomId {
    AtomId::named("phi0:court-has-authority")
}

fn atom_method_authority() -> AtomId {
    AtomId::named("phi2:server-has-court-authority")
}

fn atom_served() -> AtomId {
    AtomId::named("phi3:recipient-served")
}

fn atom_channel_private() -> AtomId {
    AtomId::named("channel-private")
}

fn atom_published() -> AtomId {
    AtomId::named("notice-published")
}

/// `PC(Pop, φ0)`: a functioning court system is publicly certified among
/// the population.
fn establish_court_authority(kb: &mut KnowledgeBase, pop: &BTreeSet<AgentId>) {
    let authority = atom_authority();
    kb.assert_world(authority.clone());
    for member in pop {
        kb.observe(member, &authority).expect("asserted");
    }
    let fact = Fact::atom(authority);
    for sender in pop {
        let others: BTreeSet<AgentId> = pop.iter().filter(|m| *m != sender).cloned().collect();
        kb.communicate(sender, &others, &fact).expect("observed");
    }
}

/// Run a scenario's event sequence and return the trace it produced.
pub fn serve(scenario: &NoticeScenario) -> Result<Trace, NoticeError> {
    scenario.validate()?;
    match scenario.method {
        Method::NftToWallet => serve_by_nft(scenario),
        _ => serve_direct(scenario),
    }
}

/// α–δ: pure epistemic event sequences; the chain plays no part.
fn serve_direct(scenario: &NoticeScenario) -> Result<Trace, NoticeError> {
    let config = SimConfig::default();
    let schedule = Schedule::default();
    let mut trace = netsim::run(&config, &schedule)?;
    let mut state = netsim::init(&config)?;
    let kb = &mut state.kb;
    establish_court_authority(kb, &scenario.population);

    let cc = &scenario.court;
    let rr = &scenario.recipient;
    let rr_only = BTreeSet::from([rr.clone()]);
    let cc_only = BTreeSet::from([cc.clone()]);
    let served = Fact::atom(atom_served());

    match scenario.method {
        Method::DirectOfficer => {
            // the officer's signed credential is shown to the recipient
            kb.assert_world(atom_method_authority());
            kb.observe(rr, &atom_method_authority())?;
            // direct hand-over with mutual acknowledgment
            kb.assert_world(atom_served());
            kb.observe(cc, &atom_served())?;
            kb.communicate(cc, &rr_only, &served)?;
            kb.communicate(rr, &cc_only, &served)?;
            kb.assert_world(atom_channel_private());
            kb.observe(cc, &atom_channel_private())?;
        }
        Method::RegisteredPost => {
            // the registered-post system is publicly certified and the
            // sender is revealed on delivery
            kb.assert_world(atom_method_authority());
            kb.observe(rr, &atom_method_authority())?;
            // delivery, then the signed receipt goes on record
            kb.assert_world(atom_served());
            kb.observe(rr, &atom_served())?;
            kb.communicate(rr, &cc_only, &served)?;
            kb.communicate(cc, &rr_only, &served)?;
            kb.assert_world(atom_channel_private());
            kb.observe(cc, &atom_channel_private())?;
        }
        Method::Email => {
            // encryption authenticates the sender and rules out relaying
            kb.assert_world(atom_method_authority());
            kb.observe(rr, &atom_method_authority())?;
            // delivery is never acknowledged back to the court
            if scenario.email_delivered {
                kb.assert_world(atom_served());
                kb.observe(rr, &atom_served())?;
            }
            kb.assert_world(atom_channel_private());
            kb.observe(cc, &atom_channel_private())?;
        }
        Method::Newspaper => {
            // publication with no targeted knowledge events
            kb.assert_world(atom_published());
        }
        Method::NftToWallet => unreachable!("handled by serve_by_nft"),
    }

    trace.chains.push(state.chain.clone());
    trace.final_state = state;
    Ok(trace)
}

/// ε: the court mints the notice asset and transfers it to the recipient
/// through the full chain simulation; serving facts are then derived from
/// the resulting knowledge.
fn serve_by_nft(scenario: &NoticeScenario) -> Result<Trace, NoticeError> {
    if scenario.nodes.is_empty() {
        return Err(NoticeError::BadScenario("nft service needs nodes".into()));
    }
    let wallets = scenario
        .population
        .iter()
        .enumerate()
        .map(|(i, owner)| WalletCfg {
            owner: owner.0.clone(),
            node: scenario.nodes[i % scenario.nodes.len()].clone(),
        })
        .collect();
    let deposits = scenario
        .population
        .iter()
        .map(|owner| netsim::DepositCfg { agent: owner.0.clone(), amount: 100 })
        .collect();
    let config = SimConfig {
        nodes: scenario.nodes.clone(),
        wallets,
        deposits,
        seed: 0,
    };

    let mut entries = vec![
        ScheduleEntry {
            tick: 0,
            request: TxKind::Mint {
                orig: scenario.court.clone(),
                asset: scenario.notice.clone(),
            },
        },
        ScheduleEntry {
            tick: 1,
            request: TxKind::Transfer {
                old: scenario.court.clone(),
                new: scenario.recipient.clone(),
                asset: scenario.notice.clone(),
                cost: Amount(0),
            },
        },
    ];
    entries.extend(scenario.background.iter().cloned());
    entries.sort_by_key(|e| e.tick);
    let schedule = Schedule { entries, min_ticks: 3 };

    let mut sim = netsim::init(&config)?;
    sim.faults.suppress_extension_for = scenario.suppress_extension_for.clone();
    establish_court_authority(&mut sim.kb, &scenario.population);
    let mut trace = netsim::run_from(&mut sim, &config, &schedule)?;

    // derive the serving facts from the delivered token
    let mut state = trace.final_state.clone();
    let token = state
        .chain
        .owner_list(&scenario.notice)
        .last()
        .filter(|owner| *owner == &scenario.recipient)
        .map(|_| {
            state
                .chain
                .token_records()
                .into_iter()
                .filter(|r| r.asset == scenario.notice)
                .last()
                .expect("owner list nonempty")
        });
    if let Some(record) = token {
        let token_atom = AtomId::token(&crate::ledger::encode_token(
            &record.agent,
            &record.asset,
            record.tick,
        ));
        let kb = &mut state.kb;
        let cc = &scenario.court;
        let rr = &scenario.recipient;

        // the token on chain is the serving event
        kb.assert_world(atom_served());
        // court and recipient hold the wallet-to-person mapping, so for
        // them knowledge about the token is knowledge about being served
        let insiders = BTreeSet::from([cc.clone(), rr.clone()]);
        kb.relabel_atom_for(cc, &token_atom, &atom_served(), &insiders)?;
        kb.relabel_atom_for(rr, &token_atom, &atom_served(), &insiders)?;

        // the method's authority follows from the certified court system
        // and the certified chain, for a recipient who saw the token
        let saw_token = kb.knows(rr, &Fact::atom(token_atom))?;
        let pop_certified =
            kb.publicly_certified(&scenario.population, &Fact::atom(atom_authority()))?;
        if saw_token && pop_certified {
            kb.assert_world(atom_method_authority());
            kb.observe(rr, &atom_method_authority())?;
        }

        // the wallet is unique and only its holders are being served
        kb.assert_world(atom_channel_private());
        kb.observe(cc, &atom_channel_private())?;
    }
    trace.chains.push(state.chain.clone());
    trace.final_state = state;
    Ok(trace)
}

/// Compute the four property flags from a produced trace.
pub fn evaluate_properties(trace: &Trace, scenario: &NoticeScenario) -> PropertyProfile {
    let state = trace.final_state();
    let kb = &state.kb;
    let cc = &scenario.court;
    let rr = &scenario.recipient;
    let served = Fact::atom(atom_served());

    let a = kb
        .knows(rr, &Fact::atom(atom_method_authority()))
        .unwrap_or(false);
    let b = kb.knows(cc, &served).unwrap_or(false);
    let c = kb
        .knows(rr, &Fact::knows(cc.clone(), served.clone()))
        .unwrap_or(false);
    // privacy: the court knows the channel reached only the recipient, and
    // no one else in the population picked up the serving fact — checked by
    // exhaustive quantification, not sampling
    let channel_private = kb
        .knows(cc, &Fact::atom(atom_channel_private()))
        .unwrap_or(false);
    let no_leak = scenario
        .population
        .iter()
        .filter(|x| *x != rr && *x != cc)
        .all(|x| !kb.knows(x, &served).unwrap_or(false));
    let d = channel_private && no_leak;

    PropertyProfile { a, b, c, d }
}

/// Run one scenario end to end.
pub fn profile(scenario: &NoticeScenario) -> Result<PropertyProfile, NoticeError> {
    let trace = serve(scenario)?;
    Ok(evaluate_properties(&trace, scenario))
}

/// The 5×4 method/property table, rows in method order α–ε.
pub fn method_table() -> Result<[(Method, PropertyProfile); 5], NoticeError> {
    let mut rows = Vec::new();
    for method in Method::ALL {
        let scenario = NoticeScenario::new(method);
        rows.push((method, profile(&scenario)?));
    }
    Ok(rows.try_into().expect("five rows"))
}

/// The table the analysis establishes: α, β, ε satisfy everything,
/// γ only (a) and (d), δ nothing.
pub fn expected_table() -> [(Method, [bool; 4]); 5] {
    [
        (Method::DirectOfficer, [true, true, true, true]),
        (Method::RegisteredPost, [true, true, true, true]),
        (Method::Email, [true, false, false, true]),
        (Method::Newspaper, [false, false, false, false]),
        (Method::NftToWallet, [true, true, true, true]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile_of(method: Method) -> PropertyProfile {
        profile(&NoticeScenario::new(method)).unwrap()
    }

    #[test]
    fn officer_satisfies_all() {
        assert_eq!(profile_of(Method::DirectOfficer).as_array(), [true; 4]);
    }

    #[test]
    fn registered_post_satisfies_all() {
        assert_eq!(profile_of(Method::RegisteredPost).as_array(), [true; 4]);
    }

    #[test]
    fn email_satisfies_only_a_and_d() {
        assert_eq!(
            profile_of(Method::Email).as_array(),
            [true, false, false, true]
        );
    }

    #[test]
    fn email_row_independent_of_delivery() {
        let mut scenario = NoticeScenario::new(Method::Email);
        scenario.email_delivered = true;
        let delivered = profile(&scenario).unwrap();
        scenario.email_delivered = false;
        let lost = profile(&scenario).unwrap();
        assert_eq!(delivered, lost);
    }

    #[test]
    fn newspaper_satisfies_none() {
        assert_eq!(profile_of(Method::Newspaper).as_array(), [false; 4]);
    }

    #[test]
    fn nft_satisfies_all_through_the_pipeline() {
        assert_eq!(profile_of(Method::NftToWallet).as_array(), [true; 4]);
    }

    #[test]
    fn nft_suppressed_extension_flips_c() {
        let mut scenario = NoticeScenario::new(Method::NftToWallet);
        scenario
            .suppress_extension_for
            .insert(scenario.recipient.clone());
        let p = profile(&scenario).unwrap();
        assert!(!p.c);
    }

    #[test]
    fn nft_profile_stable_under_background_traffic() {
        let mut scenario = NoticeScenario::new(Method::NftToWallet);
        scenario.background = vec![
            ScheduleEntry {
                tick: 2,
                request: TxKind::Standard {
                    buyer: AgentId::new("p1").unwrap(),
                    seller: AgentId::new("p2").unwrap(),
                    cost: Amount(5),
                },
            },
            ScheduleEntry {
                tick: 3,
                request: TxKind::Mint {
                    orig: AgentId::new("p2").unwrap(),
                    asset: AssetId::new("unrelated").unwrap(),
                },
            },
        ];
        assert_eq!(profile(&scenario).unwrap().as_array(), [true; 4]);
    }

    #[test]
    fn table_matches_expectation() {
        let table = method_table().unwrap();
        for ((method, got), (expected_method, want)) in table.iter().zip(expected_table()) {
            assert_eq!(*method, expected_method);
            assert_eq!(got.as_array(), want, "row {}", method.label());
        }
    }

    #[test]
    fn table_is_deterministic() {
        let t1 = method_table().unwrap();
        let t2 = method_table().unwrap();
        for (r1, r2) in t1.iter().zip(t2.iter()) {
            assert_eq!(r1.1, r2.1);
        }
    }

    #[test]
    fn bad_scenario_rejected() {
        let mut scenario = NoticeScenario::new(Method::DirectOfficer);
        scenario.population.remove(&scenario.recipient);
        assert!(matches!(serve(&scenario), Err(NoticeError::BadScenario(_))));
    }

    #[test]
    fn empty_trace_yields_no_properties() {
        let trace = netsim::run(&SimConfig::default(), &Schedule::default()).unwrap();
        let scenario = NoticeScenario::new(Method::DirectOfficer);
        let p = evaluate_properties(&trace, &scenario);
        assert_eq!(p.as_array(), [false; 4]);
    }
}
