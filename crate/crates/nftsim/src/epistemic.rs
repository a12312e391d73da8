//! Syntactic knowledge engine with veracity and positive introspection,
//! truncated at nesting depth 2 — exactly what public certifiability needs.
//!
//! Knowledge is explicit fact-set membership, closed eagerly on insertion:
//! learning `K_w f` also yields `f` (veracity projection), and learning `f`
//! yields `K_x f` for the learner (introspection), as long as depth permits.
//! Every query is then a plain set lookup.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AgentId, Token};

pub const MAX_DEPTH: u32 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EpistemicError {
    #[error("cannot observe a false atom")]
    NotTrue,
    #[error("sender does not know the communicated fact")]
    SenderIgnorant,
    #[error("fact exceeds knowledge depth {MAX_DEPTH}")]
    DepthExceeded,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}

/// Canonical identifier of an atomic world statement: the hex of a token's
/// bits, or a named proposition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomId(pub String);

impl AtomId {
    pub fn named(name: impl Into<String>) -> Self {
        AtomId(name.into())
    }

    pub fn token(tok: &Token) -> Self {
        AtomId(format!("token:{}", tok.hex()))
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Atomic statement or nested knowledge statement, depth at most 2.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fact {
    Atom(AtomId),
    Knows(AgentId, Box<Fact>),
}

impl Fact {
    pub fn atom(id: AtomId) -> Fact {
        Fact::Atom(id)
    }

    pub fn knows(agent: AgentId, fact: Fact) -> Fact {
        Fact::Knows(agent, Box::new(fact))
    }

    pub fn depth(&self) -> u32 {
        match self {
            Fact::Atom(_) => 0,
            Fact::Knows(_, inner) => 1 + inner.depth(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::Atom(id) => write!(f, "{id}"),
            Fact::Knows(agent, inner) => write!(f, "K({agent}, {inner})"),
        }
    }
}

/// World truth set plus per-agent fact sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    world: BTreeSet<AtomId>,
    agents: BTreeMap<AgentId, BTreeSet<Fact>>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        KnowledgeBase::default()
    }

    pub fn world_contains(&self, atom: &AtomId) -> bool {
        self.world.contains(atom)
    }

    pub fn agent_facts(&self, x: &AgentId) -> impl Iterator<Item = &Fact> {
        self.agents.get(x).into_iter().flatten()
    }

    /// Truth of a fact: atoms against the world set, knowledge statements
    /// against the owning agent's set.
    pub fn is_true(&self, f: &Fact) -> bool {
        match f {
            Fact::Atom(id) => self.world.contains(id),
            Fact::Knows(x, inner) => self.holds(x, inner),
        }
    }

    fn holds(&self, x: &AgentId, f: &Fact) -> bool {
        self.agents.get(x).is_some_and(|set| set.contains(f))
    }

    /// Eager closure on insert: veracity projection and introspection.
    fn insert_fact(&mut self, x: &AgentId, f: Fact) {
        if f.depth() > MAX_DEPTH {
            return; // depth-2 truncation
        }
        let set = self.agents.entry(x.clone()).or_default();
        if !set.insert(f.clone()) {
            return;
        }
        // K_x K_w g gives K_x g
        if let Fact::Knows(_, inner) = &f {
            self.insert_fact(x, (**inner).clone());
        }
        // positive introspection, truncated at depth 2
        let introspected = Fact::knows(x.clone(), f);
        if introspected.depth() <= MAX_DEPTH {
            self.insert_fact(x, introspected);
        }
    }

    /// Add an atom to the world truth set. Idempotent.
    pub fn assert_world(&mut self, atom: AtomId) {
        self.world.insert(atom);
    }

    /// Agent `x` observes a true atom (a node reading its copy of the chain).
    pub fn observe(&mut self, x: &AgentId, atom: &AtomId) -> Result<(), EpistemicError> {
        if !self.world.contains(atom) {
            return Err(EpistemicError::NotTrue);
        }
        self.insert_fact(x, Fact::Atom(atom.clone()));
        Ok(())
    }

    /// Honest communication: the sender must know `f`; each receiver gains
    /// `f` and, the channel being authenticated, `K_sender f`.
    pub fn communicate(
        &mut self,
        sender: &AgentId,
        receivers: &BTreeSet<AgentId>,
        f: &Fact,
    ) -> Result<(), EpistemicError> {
        if !self.holds(sender, f) {
            return Err(EpistemicError::SenderIgnorant);
        }
        for r in receivers {
            self.insert_fact(r, f.clone());
            self.insert_fact(r, Fact::knows(sender.clone(), f.clone()));
        }
        Ok(())
    }

    /// Does `x` know `f`?
    pub fn knows(&self, x: &AgentId, f: &Fact) -> Result<bool, EpistemicError> {
        if f.depth() + 1 > MAX_DEPTH {
            return Err(EpistemicError::DepthExceeded);
        }
        Ok(self.holds(x, f))
    }

    /// `PC(A, f)`: every `x, y` in `A` satisfies `K_x K_y f`. `f` must be
    /// atomic so the checked facts stay within depth 2.
    pub fn publicly_certified(
        &self,
        group: &BTreeSet<AgentId>,
        f: &Fact,
    ) -> Result<bool, EpistemicError> {
        if f.depth() != 0 {
            return Err(EpistemicError::DepthExceeded);
        }
        for x in group {
            for y in group {
                let nested = Fact::knows(y.clone(), f.clone());
                if !self.holds(x, &nested) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Extend `PC(A, f)` to `PC(A ∪ {x}, f)` with the two communications of
    /// the extension protocol: `v_x` sends `x` the certified content
    /// `{K_w f : w ∈ A}`, then tells `A` that `x` knows `f`. Delivery is
    /// synchronous and reliable, so after the first message `v_x` knows
    /// `K_x f` and may honestly send the second.
    pub fn extend_pc(
        &mut self,
        group: &BTreeSet<AgentId>,
        x: &AgentId,
        via: &AgentId,
        f: &Fact,
    ) -> Result<(), EpistemicError> {
        let fail = |msg: &str| EpistemicError::PreconditionFailed(msg.to_string());
        if !group.contains(via) {
            return Err(fail("relay is not a group member"));
        }
        if group.contains(x) {
            return Err(fail("agent already in the group"));
        }
        if !self.publicly_certified(group, f)? {
            return Err(fail("group does not publicly certify the fact"));
        }
        self.send_pc_content(group, x, via, f)?;
        // delivery receipt on the synchronous channel
        self.insert_fact(via, Fact::knows(x.clone(), f.clone()));
        self.communicate(via, group, &Fact::knows(x.clone(), f.clone()))?;
        Ok(())
    }

    /// First message of the extension protocol alone: `v_x → x` carrying
    /// every `K_w f` for `w ∈ A`. Exposed separately so a suppressed second
    /// message can be simulated.
    pub fn send_pc_content(
        &mut self,
        group: &BTreeSet<AgentId>,
        x: &AgentId,
        via: &AgentId,
        f: &Fact,
    ) -> Result<(), EpistemicError> {
        let target = BTreeSet::from([x.clone()]);
        for w in group {
            self.communicate(via, &target, &Fact::knows(w.clone(), f.clone()))?;
        }
        Ok(())
    }

    /// Per-agent sorted fact listing in canonical text form, stable across
    /// runs.
    /// Count of true atoms plus stored facts across all agents.
    pub fn size(&self) -> usize {
        self.world.len() + self.agents.values().map(|s| s.len()).sum::<usize>()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("world:");
        for atom in &self.world {
            out.push_str(&format!(" {atom}"));
        }
        out.push('\n');
        for (agent, facts) in &self.agents {
            out.push_str(&format!("{agent}:"));
            for f in facts {
                out.push_str(&format!(" {f}"));
            }
            out.push('\n');
        }
        out
    }

    /// Copy `from`-atom facts of one agent onto the `to` atom, restricted to
    /// facts whose knowers all lie in `allowed` — the agents holding the
    /// definitional link between the two atoms. The `to` atom must already
    /// be true so veracity is preserved.
    pub fn relabel_atom_for(
        &mut self,
        x: &AgentId,
        from: &AtomId,
        to: &AtomId,
        allowed: &BTreeSet<AgentId>,
    ) -> Result<(), EpistemicError> {
        if !self.world.contains(to) {
            return Err(EpistemicError::NotTrue);
        }
        fn substitute(f: &Fact, from: &AtomId, to: &AtomId) -> Fact {
            match f {
                Fact::Atom(id) if id == from => Fact::Atom(to.clone()),
                Fact::Atom(id) => Fact::Atom(id.clone()),
                Fact::Knows(a, inner) => {
                    Fact::Knows(a.clone(), Box::new(substitute(inner, from, to)))
                }
            }
        }
        fn knowers_allowed(f: &Fact, allowed: &BTreeSet<AgentId>) -> bool {
            match f {
                Fact::Atom(_) => true,
                Fact::Knows(a, inner) => allowed.contains(a) && knowers_allowed(inner, allowed),
            }
        }
        let candidates: Vec<Fact> = self
            .agent_facts(x)
            .filter(|f| knowers_allowed(f, allowed))
            .cloned()
            .collect();
        for f in candidates {
            let relabeled = substitute(&f, from, to);
            if relabeled != f {
                self.insert_fact(x, relabeled);
            }
        }
        Ok(())
    }
}
