//! Chain data model, the token codec, and the derived ledger queries
//! (balance, owner list, existing assets, current owner).
//!
//! A [`Chain`] is an append-only list of single-transaction blocks and is the
//! ground truth every other module reads. Chains are immutable values:
//! appending constructs a new chain, so any snapshot may be shared freely
//! across readers.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved counterparty for deposits. A sale to this agent credits the
/// seller without gating on the buyer's balance; it is excluded from the
/// non-negative-balance invariant.
pub const DEPOSIT_AGENT: &str = "__deposit__";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("identifier must be non-empty")]
    EmptyIdentifier,
    #[error("malformed token: {0}")]
    MalformedToken(String),
    #[error("bad chain record at line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
}

/// Opaque agent identifier; equality is byte equality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Result<Self, LedgerError> {
        let id = id.into();
        if id.is_empty() {
            return Err(LedgerError::EmptyIdentifier);
        }
        Ok(AgentId(id))
    }

    pub fn deposit() -> Self {
        AgentId(DEPOSIT_AGENT.to_string())
    }

    pub fn is_deposit(&self) -> bool {
        self.0 == DEPOSIT_AGENT
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque asset identifier; equality is byte equality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AssetId(pub String);

impl AssetId {
    pub fn new(id: impl Into<String>) -> Result<Self, LedgerError> {
        let id = id.into();
        if id.is_empty() {
            return Err(LedgerError::EmptyIdentifier);
        }
        Ok(AssetId(id))
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Discrete time; one unit per block append.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Tick(pub u64);

impl Tick {
    pub fn succ(self) -> Tick {
        Tick(self.0 + 1)
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Money in integer minor units.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Amount(pub u64);

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bitstring image of an (agent, asset, tick) ownership triple under the
/// injective codec below.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Token {
    bits: Vec<u8>,
}

impl Token {
    pub fn from_bytes(bits: Vec<u8>) -> Self {
        Token { bits }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn hex(&self) -> String {
        hex::encode(&self.bits)
    }
}

fn push_varint(buf: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            return;
        }
        buf.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, LedgerError> {
    let mut value: u64 = 0;
    let mut shift = 0u32;
    let start = *pos;
    loop {
        let byte = *bytes
            .get(*pos)
            .ok_or_else(|| LedgerError::MalformedToken("truncated varint".into()))?;
        *pos += 1;
        if shift >= 64 {
            return Err(LedgerError::MalformedToken("varint overflow".into()));
        }
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            // reject non-minimal encodings so the codec stays injective
            if byte == 0 && *pos - start > 1 {
                return Err(LedgerError::MalformedToken("overlong varint".into()));
            }
            return Ok(value);
        }
        shift += 7;
    }
}

/// The token function: length-prefixed concatenation
/// `varint(len(agent)) ‖ agent ‖ varint(len(asset)) ‖ asset ‖ varint(tick)`.
/// Deterministic, injective, and invertible by [`decode_token`].
pub fn encode_token(agent: &AgentId, asset: &AssetId, t: Tick) -> Token {
    let mut bits = Vec::with_capacity(agent.0.len() + asset.0.len() + 6);
    push_varint(&mut bits, agent.0.len() as u64);
    bits.extend_from_slice(agent.0.as_bytes());
    push_varint(&mut bits, asset.0.len() as u64);
    bits.extend_from_slice(asset.0.as_bytes());
    push_varint(&mut bits, t.0);
    Token { bits }
}

/// Inverse of [`encode_token`]; rejects anything that is not a canonical
/// encoding of a well-formed triple.
pub fn decode_token(tok: &Token) -> Result<(AgentId, AssetId, Tick), LedgerError> {
    let bytes = &tok.bits;
    let mut pos = 0usize;
    let read_str = |pos: &mut usize| -> Result<String, LedgerError> {
        let len = read_varint(bytes, pos)? as usize;
        let end = pos
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| LedgerError::MalformedToken("truncated string".into()))?;
        let s = std::str::from_utf8(&bytes[*pos..end])
            .map_err(|_| LedgerError::MalformedToken("invalid utf-8".into()))?
            .to_string();
        *pos = end;
        if s.is_empty() {
            return Err(LedgerError::MalformedToken("empty identifier".into()));
        }
        Ok(s)
    };
    let agent = read_str(&mut pos)?;
    let asset = read_str(&mut pos)?;
    let tick = read_varint(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(LedgerError::MalformedToken("trailing bytes".into()));
    }
    Ok((AgentId(agent), AssetId(asset), Tick(tick)))
}

/// Standard financial transaction: buyer pays seller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardTx {
    pub buyer: AgentId,
    pub seller: AgentId,
    pub cost: Amount,
    pub time: Tick,
}

/// Exactly one logical transaction per block. A transfer carries one leg
/// (plain ownership change) or two (ownership change with royalty).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Standard(StandardTx),
    Mint { token: Token },
    Transfer { token: Token, legs: Vec<StandardTx> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    /// Tick at which the block entered the chain.
    pub time: Tick,
    pub payload: Payload,
}

impl Block {
    /// Header flag: ownership queries need only scan token blocks.
    pub fn has_token(&self) -> bool {
        !matches!(self.payload, Payload::Standard(_))
    }

    pub fn token(&self) -> Option<&Token> {
        match &self.payload {
            Payload::Standard(_) => None,
            Payload::Mint { token } => Some(token),
            Payload::Transfer { token, .. } => Some(token),
        }
    }

    /// Every standard transaction in the block, including transfer legs.
    pub fn standard_txs(&self) -> &[StandardTx] {
        match &self.payload {
            Payload::Standard(tx) => std::slice::from_ref(tx),
            Payload::Mint { .. } => &[],
            Payload::Transfer { legs, .. } => legs,
        }
    }
}

/// A decoded ownership record found on chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenRecord {
    pub agent: AgentId,
    pub asset: AssetId,
    pub tick: Tick,
    pub height: u64,
    pub block_time: Tick,
}

/// Append-only list of blocks with consecutive heights. Cloning is cheap:
/// snapshots share their block storage.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chain {
    blocks: Arc<Vec<Block>>,
}

impl Chain {
    pub fn new() -> Self {
        Chain { blocks: Arc::new(Vec::new()) }
    }

    fn from_blocks(blocks: Vec<Block>) -> Self {
        Chain { blocks: Arc::new(blocks) }
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Constructs a new chain with one appended block.
    pub fn append(&self, time: Tick, payload: Payload) -> Chain {
        let mut blocks = (*self.blocks).clone();
        blocks.push(Block {
            height: blocks.len() as u64,
            time,
            payload,
        });
        Chain::from_blocks(blocks)
    }

    /// The prefix holding the first `height` blocks.
    pub fn prefix(&self, height: u64) -> Chain {
        Chain::from_blocks(self.blocks[..height as usize].to_vec())
    }

    /// Blocks that had entered the chain by tick `t`.
    pub fn up_to_time(&self, t: Tick) -> Chain {
        Chain::from_blocks(
            self.blocks
                .iter()
                .take_while(|b| b.time <= t)
                .cloned()
                .collect(),
        )
    }

    /// All decodable ownership records, in chain order. Malformed tokens are
    /// skipped; they carry no ownership information.
    pub fn token_records(&self) -> Vec<TokenRecord> {
        self.blocks
            .iter()
            .filter(|b| b.has_token())
            .filter_map(|b| {
                let tok = b.token()?;
                let (agent, asset, tick) = decode_token(tok).ok()?;
                Some(TokenRecord {
                    agent,
                    asset,
                    tick,
                    height: b.height,
                    block_time: b.time,
                })
            })
            .collect()
    }

    /// Signed balance of `u`: sales minus purchases over every standard
    /// transaction on chain, transfer legs included.
    pub fn balance(&self, u: &AgentId) -> i128 {
        let mut total: i128 = 0;
        for block in self.blocks.iter() {
            for tx in block.standard_txs() {
                if tx.seller == *u {
                    total += i128::from(tx.cost.0);
                }
                if tx.buyer == *u {
                    total -= i128::from(tx.cost.0);
                }
            }
        }
        total
    }

    /// Chronological owner list of `α`; the first element is the originator.
    pub fn owner_list(&self, asset: &AssetId) -> Vec<AgentId> {
        self.token_records()
            .into_iter()
            .filter(|r| r.asset == *asset)
            .map(|r| r.agent)
            .collect()
    }

    /// Assets with a mint record that had entered the chain by tick `t`.
    pub fn existing_assets(&self, t: Tick) -> BTreeSet<AssetId> {
        self.blocks
            .iter()
            .filter(|b| b.time <= t)
            .filter_map(|b| match &b.payload {
                Payload::Mint { token } => decode_token(token).ok().map(|(_, asset, _)| asset),
                _ => None,
            })
            .collect()
    }

    /// Last element of the owner list; `None` for unminted assets.
    pub fn current_owner(&self, asset: &AssetId) -> Option<AgentId> {
        self.owner_list(asset).pop()
    }

    /// Owner of `α` as of tick `t`: the last token for `α` whose embedded
    /// tick is at most `t`.
    pub fn owner_at(&self, asset: &AssetId, t: Tick) -> Option<AgentId> {
        self.token_records()
            .into_iter()
            .filter(|r| r.asset == *asset && r.tick <= t)
            .map(|r| r.agent)
            .last()
    }

    /// Every distinct agent named on chain, in either a token or a
    /// standard transaction.
    pub fn agents(&self) -> BTreeSet<AgentId> {
        let mut out = BTreeSet::new();
        for block in self.blocks.iter() {
            for tx in block.standard_txs() {
                out.insert(tx.buyer.clone());
                out.insert(tx.seller.clone());
            }
            if let Some(tok) = block.token() {
                if let Ok((agent, _, _)) = decode_token(tok) {
                    out.insert(agent);
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Persistence: line-delimited self-describing records, one block per line.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TxRecord {
    buyer: String,
    seller: String,
    cost: u64,
    time: u64,
}

#[derive(Serialize, Deserialize)]
struct BlockRecord {
    height: u64,
    time: u64,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    token: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    txs: Vec<TxRecord>,
}

fn tx_record(tx: &StandardTx) -> TxRecord {
    TxRecord {
        buyer: tx.buyer.0.clone(),
        seller: tx.seller.0.clone(),
        cost: tx.cost.0,
        time: tx.time.0,
    }
}

fn tx_from_record(r: &TxRecord, line: usize) -> Result<StandardTx, LedgerError> {
    let bad = |msg: &str| LedgerError::BadRecord {
        line,
        msg: msg.to_string(),
    };
    if r.buyer.is_empty() || r.seller.is_empty() {
        return Err(bad("empty agent id"));
    }
    Ok(StandardTx {
        buyer: AgentId(r.buyer.clone()),
        seller: AgentId(r.seller.clone()),
        cost: Amount(r.cost),
        time: Tick(r.time),
    })
}

pub fn save_chain<W: Write>(chain: &Chain, mut out: W) -> std::io::Result<()> {
    for block in chain.blocks() {
        let (kind, token, txs) = match &block.payload {
            Payload::Standard(tx) => ("standard", None, vec![tx_record(tx)]),
            Payload::Mint { token } => ("mint", Some(token.hex()), Vec::new()),
            Payload::Transfer { token, legs } => (
                "transfer",
                Some(token.hex()),
                legs.iter().map(tx_record).collect(),
            ),
        };
        let record = BlockRecord {
            height: block.height,
            time: block.time.0,
            kind: kind.to_string(),
            token,
            txs,
        };
        writeln!(out, "{}", serde_json::to_string(&record).expect("serialize"))?;
    }
    Ok(())
}

pub fn chain_to_string(chain: &Chain) -> String {
    let mut buf = Vec::new();
    save_chain(chain, &mut buf).expect("write to vec");
    String::from_utf8(buf).expect("utf-8")
}

pub fn load_chain<R: BufRead>(input: R) -> Result<Chain, LedgerError> {
    let mut blocks = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let bad = |msg: String| LedgerError::BadRecord { line: lineno, msg };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: BlockRecord =
            serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if record.height != blocks.len() as u64 {
            return Err(bad(format!(
                "expected height {}, found {}",
                blocks.len(),
                record.height
            )));
        }
        let token = |r: &BlockRecord| -> Result<Token, LedgerError> {
            let hex_bits = r
                .token
                .as_ref()
                .ok_or_else(|| bad("missing token".into()))?;
            let bits = hex::decode(hex_bits).map_err(|e| bad(e.to_string()))?;
            let tok = Token::from_bytes(bits);
            decode_token(&tok).map_err(|e| bad(e.to_string()))?;
            Ok(tok)
        };
        let payload = match record.kind.as_str() {
            "standard" => {
                if record.txs.len() != 1 {
                    return Err(bad("standard block needs exactly one tx".into()));
                }
                Payload::Standard(tx_from_record(&record.txs[0], lineno)?)
            }
            "mint" => Payload::Mint { token: token(&record)? },
            "transfer" => {
                // royalty legs may appear in either order
                if record.txs.is_empty() || record.txs.len() > 2 {
                    return Err(bad("transfer block needs one or two txs".into()));
                }
                let legs = record
                    .txs
                    .iter()
                    .map(|t| tx_from_record(t, lineno))
                    .collect::<Result<Vec<_>, _>>()?;
                Payload::Transfer { token: token(&record)?, legs }
            }
            other => return Err(bad(format!("unknown block kind {other:?}"))),
        };
        blocks.push(Block {
            height: record.height,
            time: Tick(record.time),
            payload,
        });
    }
    Ok(Chain::from_blocks(blocks))
}

pub fn chain_from_str(s: &str) -> Result<Chain, LedgerError> {
    load_chain(s.as_bytes())
}
