//! Acceptance suite. Every criterion is one test that prints a single
//! PASS/FAIL line; the bulk random sweep is shared between the law and
//! verifier criteria through a `OnceLock`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::sync::OnceLock;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use nftsim::epistemic::{AtomId, EpistemicError, Fact, KnowledgeBase};
use nftsim::laws::{self, History};
use nftsim::ledger::{AgentId, Amount, AssetId, Chain, Payload, Tick};
use nftsim::netsim::{
    self, load_trace, random_scenario, run, save_trace, trace_to_string, verify_theorem1,
    GenParams,
};
use nftsim::notice;
use nftsim::transactions::{
    self, mint, ownership_tx, ownership_tx_royalty, standard_tx, Rate,
};

fn report(criterion: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} — {detail}");
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn agent(s: &str) -> AgentId {
    AgentId::new(s).unwrap()
}

fn asset(s: &str) -> AssetId {
    AssetId::new(s).unwrap()
}

// ---------------------------------------------------------------- sweep

struct Sweep {
    traces: usize,
    law_violations: Vec<String>,
    verifier_failures: Vec<String>,
    elapsed_secs: f64,
}

static SWEEP: OnceLock<Sweep> = OnceLock::new();

/// 1000 seeded random schedules, 3–6 agents, 2–4 nodes, at most 100
/// operations each; every trace runs through all six law checkers and the
/// full verifier.
fn sweep() -> &'static Sweep {
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let mut law_violations = Vec::new();
        let mut verifier_failures = Vec::new();
        for seed in 0u64..1000 {
            let mut shape = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9));
            let params = GenParams {
                agents: shape.gen_range(3..=6),
                nodes: shape.gen_range(2..=4),
                ops: shape.gen_range(10..=100),
                deposit: 100,
            };
            let (config, schedule) = random_scenario(seed, &params);
            let trace = run(&config, &schedule).expect("generated scenario runs");
            let history = trace.history();
            for rep in laws::check_all(&history) {
                for v in &rep.violations {
                    law_violations.push(format!(
                        "seed {seed} law {} tick {}: {}",
                        rep.law, v.tick, v.description
                    ));
                }
            }
            let rep = verify_theorem1(&trace);
            for f in &rep.failures {
                verifier_failures.push(format!("seed {seed}: {f}"));
            }
        }
        Sweep {
            traces: 1000,
            law_violations,
            verifier_failures,
            elapsed_secs: start.elapsed().as_secs_f64(),
        }
    })
}

// ----------------------------------------------------------- criterion 1

#[test]
fn criterion_1_notice_table() {
    let start = Instant::now();
    let table = notice::method_table().expect("table computes");
    let expected = notice::expected_table();
    let mut mismatches = Vec::new();
    for ((method, profile), (exp_method, exp_cells)) in table.iter().zip(expected.iter()) {
        assert_eq!(method, exp_method);
        for (i, (got, want)) in profile.as_array().iter().zip(exp_cells.iter()).enumerate() {
            if got != want {
                mismatches.push(format!("{} property {}", method.label(), b"abcd"[i] as char));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        mismatches.is_empty() && secs < 1.0,
        &format!(
            "notice table 20/20 cells match in {secs:.3}s (mismatches: {:?})",
            mismatches
        ),
    );
}

// ----------------------------------------------------------- criterion 2

#[test]
fn criterion_2_law_suite() {
    let s = sweep();
    let ok = s.law_violations.is_empty() && s.elapsed_secs < 30.0 && mutants_flagged();
    report(
        2,
        ok,
        &format!(
            "{} random histories clean across six laws in {:.1}s, six mutants flagged \
             (violations: {:?})",
            s.traces,
            s.elapsed_secs,
            &s.law_violations.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

/// Six hand-built broken histories, each tripping exactly its target law.
fn mutants_flagged() -> bool {
    let a = agent("A");
    let b = agent("B");
    let x = asset("art");

    // owner-exists: a mint block at time 1 whose token claims tick 99
    let future_token = nftsim::ledger::encode_token(&a, &x, Tick(99));
    let m1 = Chain::new().append(Tick(1), Payload::Mint { token: future_token.clone() });
    let h1 = History::from_chain(&m1);

    // owner-unique: two same-tick tokens for one asset, different agents
    let m2 = Chain::new()
        .append(Tick(1), Payload::Mint { token: nftsim::ledger::encode_token(&a, &x, Tick(1)) })
        .append(Tick(1), Payload::Mint { token: nftsim::ledger::encode_token(&b, &x, Tick(1)) });
    let h2 = History::from_chain(&m2);

    // nonexistent-unowned: a transfer token with no mint anywhere
    let m3 = Chain::new().append(
        Tick(1),
        Payload::Transfer {
            token: nftsim::ledger::encode_token(&b, &x, Tick(1)),
            legs: vec![nftsim::ledger::StandardTx {
                buyer: b.clone(),
                seller: a.clone(),
                cost: Amount(1),
                time: Tick(1),
            }],
        },
    );
    let h3 = History::from_chain(&m3);

    // assets-monotone: a minted asset vanishes between snapshots
    let minted = mint(&Chain::new(), &a, &x, Tick(0)).unwrap();
    let h4 = History::new(vec![Chain::new(), minted.clone(), Chain::new()]);

    // owns-size-monotone: the record set shrinks back to an earlier state
    let funded = standard_tx(&Chain::new(), &AgentId::deposit(), &b, Amount(10), Tick(0)).unwrap();
    let minted_late = mint(&funded, &a, &x, Tick(0)).unwrap();
    let moved = ownership_tx(&minted_late, &a, &b, &x, Amount(0), Tick(1)).unwrap();
    let h5 = History::new(vec![
        Chain::new(),
        minted_late.clone(),
        moved,
        minted_late,
    ]);

    // owner-prefix: the owner list is rewritten rather than extended
    let other = mint(&Chain::new(), &b, &x, Tick(0)).unwrap();
    let h6 = History::new(vec![minted, other]);

    let checks = [
        laws::check_owner_exists(&h1).holds(),
        laws::check_owner_unique(&h2).holds(),
        laws::check_nonexistent_unowned(&h3).holds(),
        laws::check_assets_monotone(&h4).holds(),
        laws::check_owns_size_monotone(&h5).holds(),
        laws::check_owner_prefix(&h6).holds(),
    ];
    checks.iter().all(|held| !held)
}

// ----------------------------------------------------------- criterion 3

#[test]
fn criterion_3_verifier() {
    let s = sweep();
    let clean_ok = s.verifier_failures.is_empty();

    // fault injection: suppress one wallet's certification extension
    let mut faulted = 0usize;
    let mut missed = Vec::new();
    for seed in 0u64..100 {
        let (config, schedule) = random_scenario(seed, &GenParams::default());
        let victim = agent(&config.wallets[0].owner);
        let mut sim = netsim::init(&config).unwrap();
        sim.faults.suppress_extension_for.insert(victim.clone());
        let trace = netsim::run_from(&mut sim, &config, &schedule).unwrap();
        let has_tokens = trace
            .final_state()
            .chain
            .blocks()
            .iter()
            .any(|blk| blk.has_token());
        if !has_tokens {
            continue;
        }
        faulted += 1;
        let rep = verify_theorem1(&trace);
        let named = rep.failures.iter().any(|f| f.contains(victim.0.as_str()));
        if rep.ok() || !named {
            missed.push(seed);
        }
    }

    // empty trace: vacuously fine
    let (config, _) = random_scenario(0, &GenParams::default());
    let empty = run(&config, &netsim::Schedule::default()).unwrap();
    let empty_ok = verify_theorem1(&empty).ok();

    let ok = clean_ok && missed.is_empty() && faulted >= 90 && empty_ok;
    report(
        3,
        ok,
        &format!(
            "verifier true on {} clean traces, false naming the pair on {faulted}/100 \
             fault-injected traces, vacuous on the empty trace (missed: {:?})",
            s.traces, missed
        ),
    );
}

// ----------------------------------------------------------- criterion 4

#[test]
fn criterion_4_extension_protocol() {
    let alice = agent("alice");
    let bob = agent("bob");
    let carol = agent("carol");
    let group = BTreeSet::from([alice.clone(), bob.clone()]);
    let extended = BTreeSet::from([alice.clone(), bob.clone(), carol.clone()]);
    let atom = AtomId::named("g");
    let f = Fact::atom(atom.clone());

    let base = {
        let mut kb = KnowledgeBase::new();
        kb.assert_world(atom.clone());
        kb.observe(&alice, &atom).unwrap();
        kb.observe(&bob, &atom).unwrap();
        kb.communicate(&alice, &BTreeSet::from([bob.clone()]), &f).unwrap();
        kb.communicate(&bob, &BTreeSet::from([alice.clone()]), &f).unwrap();
        assert!(kb.publicly_certified(&group, &f).unwrap());
        kb
    };

    // both communications: the group grows
    let mut kb = base.clone();
    kb.extend_pc(&group, &carol, &alice, &f).unwrap();
    let full = kb.publicly_certified(&extended, &f).unwrap();

    // first communication only: the old members never learn carol knows
    let mut kb = base.clone();
    kb.send_pc_content(&group, &carol, &alice, &f).unwrap();
    let after_first = kb.publicly_certified(&extended, &f).unwrap();
    let carol_learned = kb.knows(&carol, &Fact::knows(bob.clone(), f.clone())).unwrap();
    let bob_missed = kb.knows(&bob, &Fact::knows(carol.clone(), f.clone())).unwrap();

    // second communication alone cannot be sent honestly
    let mut kb = base.clone();
    let second_alone = kb.communicate(&alice, &group, &Fact::knows(carol.clone(), f.clone()));
    let refused = matches!(second_alone, Err(EpistemicError::SenderIgnorant));
    let still_not = kb.publicly_certified(&extended, &f).unwrap();

    let ok = full && !after_first && carol_learned && !bob_missed && refused && !still_not;
    report(
        4,
        ok,
        "extension certifies with both messages, fails without the second, \
         and the second alone is unsendable",
    );
}

// ----------------------------------------------------------- criterion 5

#[test]
fn criterion_5_epistemic_algebra() {
    // subset closure over 200 random reachable knowledge bases
    let pool: Vec<AgentId> = (0..6).map(|i| agent(&format!("u{i}"))).collect();
    let atoms: Vec<AtomId> = (0..3).map(|i| AtomId::named(format!("p{i}"))).collect();
    let mut certified_cases = 0usize;
    let mut closure_ok = true;
    for seed in 0u64..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_kb(&mut rng, &pool, &atoms);
        for _ in 0..5 {
            let size = rng.gen_range(2..=pool.len());
            let group: BTreeSet<AgentId> =
                pool.choose_multiple(&mut rng, size).cloned().collect();
            let f = Fact::atom(atoms.choose(&mut rng).unwrap().clone());
            if !kb.publicly_certified(&group, &f).unwrap() {
                continue;
            }
            certified_cases += 1;
            for _ in 0..10 {
                let sub_size = rng.gen_range(1..=group.len());
                let sub: BTreeSet<AgentId> = group
                    .iter()
                    .cloned()
                    .choose_multiple(&mut rng, sub_size)
                    .into_iter()
                    .collect();
                if !kb.publicly_certified(&sub, &f).unwrap() {
                    closure_ok = false;
                }
            }
        }
    }

    // one sender emails each friend separately: everyone ends up knowing,
    // but the friends never learn about each other
    let sender = agent("sender");
    let friends: Vec<AgentId> = (0..3).map(|i| agent(&format!("friend{i}"))).collect();
    let atom = AtomId::named("party");
    let f = Fact::atom(atom.clone());
    let mut kb = KnowledgeBase::new();
    kb.assert_world(atom.clone());
    kb.observe(&sender, &atom).unwrap();
    for friend in &friends {
        kb.communicate(&sender, &BTreeSet::from([friend.clone()]), &f).unwrap();
    }
    let everyone: BTreeSet<AgentId> =
        friends.iter().cloned().chain([sender.clone()]).collect();
    let all_know = everyone.iter().all(|x| kb.knows(x, &f).unwrap());
    let all_know_sender_knows = friends
        .iter()
        .all(|x| kb.knows(x, &Fact::knows(sender.clone(), f.clone())).unwrap());
    let email_not_pc = !kb.publicly_certified(&everyone, &f).unwrap();

    // two disjoint certified groups whose union is not certified
    let (a, b, c, d) = (agent("a"), agent("b"), agent("c"), agent("d"));
    let g1 = BTreeSet::from([a.clone(), b.clone()]);
    let g2 = BTreeSet::from([c.clone(), d.clone()]);
    let atom = AtomId::named("q");
    let f = Fact::atom(atom.clone());
    let mut kb = KnowledgeBase::new();
    kb.assert_world(atom.clone());
    for g in [&g1, &g2] {
        for x in g {
            kb.observe(x, &atom).unwrap();
        }
        for x in g {
            let others: BTreeSet<AgentId> = g.iter().filter(|y| *y != x).cloned().collect();
            kb.communicate(x, &others, &f).unwrap();
        }
    }
    let both = kb.publicly_certified(&g1, &f).unwrap() && kb.publicly_certified(&g2, &f).unwrap();
    let union: BTreeSet<AgentId> = g1.union(&g2).cloned().collect();
    let union_not = !kb.publicly_certified(&union, &f).unwrap();

    let ok = closure_ok
        && certified_cases >= 50
        && all_know
        && all_know_sender_knows
        && email_not_pc
        && both
        && union_not;
    report(
        5,
        ok,
        &format!(
            "subset closure on {certified_cases} certified cases over 200 random bases; \
             emailed fact known-but-uncertified; union of certified groups uncertified"
        ),
    );
}

/// A random but reachable knowledge base: every entry goes through the
/// public observation/communication interface.
fn random_kb(rng: &mut ChaCha8Rng, pool: &[AgentId], atoms: &[AtomId]) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for atom in atoms {
        kb.assert_world(atom.clone());
    }
    for _ in 0..rng.gen_range(5..40) {
        let atom = atoms.choose(rng).unwrap().clone();
        let f = Fact::atom(atom.clone());
        match rng.gen_range(0..3) {
            0 => {
                let x = pool.choose(rng).unwrap();
                kb.observe(x, &atom).unwrap();
            }
            1 => {
                let x = pool.choose(rng).unwrap();
                if kb.knows(x, &f).unwrap() {
                    let n = rng.gen_range(1..=pool.len());
                    let to: BTreeSet<AgentId> = pool
                        .choose_multiple(rng, n)
                        .filter(|y| *y != x)
                        .cloned()
                        .collect();
                    if !to.is_empty() {
                        kb.communicate(x, &to, &f).unwrap();
                    }
                }
            }
            _ => {
                // a round that certifies the fact within a random group
                let n = rng.gen_range(2..=pool.len());
                let group: BTreeSet<AgentId> =
                    pool.choose_multiple(rng, n).cloned().collect();
                for x in &group {
                    kb.observe(x, &atom).unwrap();
                }
                for x in &group {
                    let others: BTreeSet<AgentId> =
                        group.iter().filter(|y| *y != x).cloned().collect();
                    kb.communicate(x, &others, &f).unwrap();
                }
            }
        }
    }
    kb
}

// ----------------------------------------------------------- criterion 6

#[test]
fn criterion_6_oracle_equivalence() {
    let mut mismatches = Vec::new();
    for seed in 0u64..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents: Vec<AgentId> =
            (0..rng.gen_range(3..=5)).map(|i| agent(&format!("a{i}"))).collect();
        let assets: Vec<AssetId> =
            (0..5).map(|i| asset(&format!("x{i}"))).collect();

        // incremental oracle state, updated block by block
        let mut balances: BTreeMap<AgentId, i128> = BTreeMap::new();
        let mut owners: BTreeMap<AssetId, Vec<AgentId>> = BTreeMap::new();

        let mut chain = Chain::new();
        let mut t = Tick(0);
        for u in &agents {
            chain = standard_tx(&chain, &AgentId::deposit(), u, Amount(100), t).unwrap();
            t = t.succ();
        }
        for _ in 0..40 {
            let next = random_op(&mut rng, &chain, &agents, &assets, t);
            if let Ok(c) = next {
                chain = c;
                t = t.succ();
            } else {
                t = t.succ();
                continue;
            }
        }

        // replay the final chain block by block against the oracle
        for height in 0..chain.height() {
            let prefix = chain.prefix(height + 1);
            let block = &chain.blocks()[height as usize];
            for leg in block.standard_txs() {
                *balances.entry(leg.seller.clone()).or_default() += i128::from(leg.cost.0);
                *balances.entry(leg.buyer.clone()).or_default() -= i128::from(leg.cost.0);
            }
            if let Some(tok) = block.token() {
                let (owner, which, _) = nftsim::ledger::decode_token(tok).unwrap();
                owners.entry(which).or_default().push(owner);
            }
            for (u, bal) in &balances {
                if prefix.balance(u) != *bal {
                    mismatches.push(format!("seed {seed} height {height}: balance of {u}"));
                }
            }
            for (which, list) in &owners {
                if &prefix.owner_list(which) != list {
                    mismatches.push(format!("seed {seed} height {height}: owners of {which}"));
                }
            }
        }
    }
    report(
        6,
        mismatches.is_empty(),
        &format!(
            "incremental balances and owner lists match full-chain scans on 100 random \
             chains at every height (mismatches: {:?})",
            mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

fn random_op(
    rng: &mut ChaCha8Rng,
    chain: &Chain,
    agents: &[AgentId],
    assets: &[AssetId],
    t: Tick,
) -> Result<Chain, transactions::TxError> {
    let pick = |rng: &mut ChaCha8Rng| agents.choose(rng).unwrap().clone();
    let which = assets.choose(rng).unwrap().clone();
    match rng.gen_range(0..4) {
        0 => mint(chain, &pick(rng), &which, t),
        1 => standard_tx(chain, &pick(rng), &pick(rng), Amount(rng.gen_range(0..=30)), t),
        2 => ownership_tx(chain, &pick(rng), &pick(rng), &which, Amount(rng.gen_range(0..=30)), t),
        _ => ownership_tx_royalty(
            chain,
            &pick(rng),
            &pick(rng),
            &which,
            Amount(rng.gen_range(0..=30)),
            Rate::new(rng.gen_range(0..=10), 10).unwrap(),
            t,
        ),
    }
}

// ----------------------------------------------------------- criterion 7

#[test]
fn criterion_7_royalty_conservation() {
    let mut bad = Vec::new();
    for seed in 0u64..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let orig = agent("orig");
        let old = if rng.gen_bool(0.5) { agent("older") } else { orig.clone() };
        let new = agent("newer");
        let x = asset("piece");

        let mut chain = Chain::new();
        let mut t = Tick(0);
        for u in [&orig, &old, &new] {
            chain = standard_tx(&chain, &AgentId::deposit(), u, Amount(1000), t).unwrap();
            t = t.succ();
        }
        chain = mint(&chain, &orig, &x, t).unwrap();
        t = t.succ();
        if old != orig {
            chain = ownership_tx(&chain, &orig, &old, &x, Amount(rng.gen_range(0..=50)), t)
                .unwrap();
            t = t.succ();
        }

        let cost = rng.gen_range(0..=200u64);
        let rate = Rate::new(rng.gen_range(0..=10), 10).unwrap();
        let before: Vec<i128> =
            [&orig, &old, &new].iter().map(|u| chain.balance(u)).collect();
        let after_chain =
            ownership_tx_royalty(&chain, &old, &new, &x, Amount(cost), rate, t).unwrap();
        let after: Vec<i128> =
            [&orig, &old, &new].iter().map(|u| after_chain.balance(u)).collect();
        let delta: Vec<i128> = after.iter().zip(&before).map(|(a, b)| a - b).collect();

        let royalty = i128::try_from(u128::from(cost) * u128::from(rate_num(rate)) / 10).unwrap();
        // when seller and originator coincide, count the shared delta once
        let conserves = if old == orig {
            delta[0] + delta[2] == 0
        } else {
            delta.iter().sum::<i128>() == 0
        };
        let exact = if old == orig {
            delta[0] == i128::from(cost) && delta[2] == -i128::from(cost)
        } else {
            delta[0] == royalty
                && delta[1] == i128::from(cost) - royalty
                && delta[2] == -i128::from(cost)
        };
        if !(conserves && exact) {
            bad.push(format!("seed {seed}: deltas {delta:?} cost {cost}"));
        }

        // zero rate coincides with a plain transfer
        let via_royalty =
            ownership_tx_royalty(&chain, &old, &new, &x, Amount(cost), Rate::zero(), t).unwrap();
        let via_plain = ownership_tx(&chain, &old, &new, &x, Amount(cost), t).unwrap();
        let same = [&orig, &old, &new]
            .iter()
            .all(|u| via_royalty.balance(u) == via_plain.balance(u))
            && via_royalty.owner_list(&x) == via_plain.owner_list(&x);
        if !same {
            bad.push(format!("seed {seed}: zero-rate transfer differs from plain"));
        }
    }
    report(
        7,
        bad.is_empty(),
        &format!(
            "500 random royalty transfers conserve value with exact floor cuts \
             (failures: {:?})",
            bad.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

fn rate_num(r: Rate) -> u64 {
    // recover the numerator through the cut of the denominator itself
    r.cut(Amount(10)).0
}

// ----------------------------------------------------------- criterion 8

#[test]
fn criterion_8_determinism() {
    let mut bad = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    for seed in [1u64, 7, 42, 1000, 31337] {
        let (config, schedule) = random_scenario(seed, &GenParams::default());
        let t1 = run(&config, &schedule).unwrap();
        let t2 = run(&config, &schedule).unwrap();
        if t1.records != t2.records || trace_to_string(&t1) != trace_to_string(&t2) {
            bad.push(format!("seed {seed}: reruns diverge"));
            continue;
        }

        let path1 = dir.path().join(format!("{seed}-a.trace"));
        let path2 = dir.path().join(format!("{seed}-b.trace"));
        save_trace(&t1, &mut std::fs::File::create(&path1).unwrap()).unwrap();
        save_trace(&t2, &mut std::fs::File::create(&path2).unwrap()).unwrap();
        let bytes1 = std::fs::read(&path1).unwrap();
        let bytes2 = std::fs::read(&path2).unwrap();
        if bytes1 != bytes2 {
            bad.push(format!("seed {seed}: persisted files differ"));
            continue;
        }

        // a trace loaded back from disk replays to the same bytes again
        let mut buf = Vec::new();
        std::fs::File::open(&path1).unwrap().read_to_end(&mut buf).unwrap();
        let parsed = load_trace(&buf[..]).unwrap();
        let replayed = run(&parsed.config, &parsed.schedule).unwrap();
        if trace_to_string(&replayed) != String::from_utf8(bytes1).unwrap() {
            bad.push(format!("seed {seed}: replay from file differs"));
        }
    }
    report(
        8,
        bad.is_empty(),
        &format!("replays and persisted trace files byte-identical ({:?})", bad),
    );
}
