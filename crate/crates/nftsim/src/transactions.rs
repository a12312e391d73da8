//! The four state-transition operations: Mint, standard Tx, ownership
//! transfer TxO, and royalty transfer TxOr. Each is a pure function from
//! chain to chain; on rejection the input chain is returned untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{
    encode_token, AgentId, Amount, AssetId, Chain, Payload, StandardTx, Tick,
};

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxError {
    #[error("asset already has an owner")]
    AlreadyOwned,
    #[error("seller is not the current owner")]
    NotOwner,
    #[error("buyer cannot cover the cost")]
    InsufficientFunds,
    #[error("unknown asset")]
    UnknownAsset,
}

/// Royalty rate as a rational in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Option<Rate> {
        if den == 0 || num > den {
            return None;
        }
        Some(Rate { num, den })
    }

    pub fn zero() -> Rate {
        Rate { num: 0, den: 1 }
    }

    /// The royalty cut `%c = floor(c * rate)`; the remainder goes to the
    /// selling owner, so the two legs always conserve `c`.
    pub fn cut(&self, c: Amount) -> Amount {
        Amount((u128::from(c.0) * u128::from(self.num) / u128::from(self.den)) as u64)
    }
}

/// A transaction request as submitted by a wallet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TxKind {
    Mint {
        orig: AgentId,
        asset: AssetId,
    },
    Standard {
        buyer: AgentId,
        seller: AgentId,
        cost: Amount,
    },
    Transfer {
        old: AgentId,
        new: AgentId,
        asset: AssetId,
        cost: Amount,
    },
    TransferRoyalty {
        old: AgentId,
        new: AgentId,
        asset: AssetId,
        cost: Amount,
        rate: Rate,
    },
}

/// Establish original ownership of `asset` by `orig`. Succeeds only when no
/// agent has ever owned the asset; the appended token is stamped `t+1`.
pub fn mint(chain: &Chain, orig: &AgentId, asset: &AssetId, t: Tick) -> Result<Chain, TxError> {
    if !chain.owner_list(asset).is_empty() {
        return Err(TxError::AlreadyOwned);
    }
    let token = encode_token(orig, asset, t.succ());
    Ok(chain.append(t.succ(), Payload::Mint { token }))
}

/// Is the buyer's balance sufficient? Sales must exceed purchases by at
/// least `c`. Deposits (purchases of the reserved deposit agent) are not
/// gated; they are how money enters the ledger.
fn affordable(chain: &Chain, buyer: &AgentId, c: Amount) -> bool {
    buyer.is_deposit() || chain.balance(buyer) >= i128::from(c.0)
}

/// Append a standard financial transaction stamped `t+1`.
pub fn standard_tx(
    chain: &Chain,
    buyer: &AgentId,
    seller: &AgentId,
    cost: Amount,
    t: Tick,
) -> Result<Chain, TxError> {
    if !affordable(chain, buyer, cost) {
        return Err(TxError::InsufficientFunds);
    }
    let tx = StandardTx {
        buyer: buyer.clone(),
        seller: seller.clone(),
        cost,
        time: t.succ(),
    };
    Ok(chain.append(t.succ(), Payload::Standard(tx)))
}

/// Ownership transfer: `new` buys `asset` from its current owner `old`.
/// The appended block carries the new ownership token concatenated with the
/// standard transaction paying `old`.
pub fn ownership_tx(
    chain: &Chain,
    old: &AgentId,
    new: &AgentId,
    asset: &AssetId,
    cost: Amount,
    t: Tick,
) -> Result<Chain, TxError> {
    if chain.current_owner(asset).as_ref() != Some(old) {
        return Err(TxError::NotOwner);
    }
    if !affordable(chain, new, cost) {
        return Err(TxError::InsufficientFunds);
    }
    let token = encode_token(new, asset, t.succ());
    let leg = StandardTx {
        buyer: new.clone(),
        seller: old.clone(),
        cost,
        time: t.succ(),
    };
    Ok(chain.append(t.succ(), Payload::Transfer { token, legs: vec![leg] }))
}

/// Ownership transfer with royalty: the originator (first element of the
/// owner list) receives `%c = floor(c * rate)` and `old` receives the
/// deficiency `c - %c`, both as standard transactions in the same block.
pub fn ownership_tx_royalty(
    chain: &Chain,
    old: &AgentId,
    new: &AgentId,
    asset: &AssetId,
    cost: Amount,
    rate: Rate,
    t: Tick,
) -> Result<Chain, TxError> {
    let owners = chain.owner_list(asset);
    if owners.last() != Some(old) {
        return Err(TxError::NotOwner);
    }
    if !affordable(chain, new, cost) {
        return Err(TxError::InsufficientFunds);
    }
    let orig = owners[0].clone();
    let royalty = rate.cut(cost);
    let token = encode_token(new, asset, t.succ());
    let legs = vec![
        StandardTx {
            buyer: new.clone(),
            seller: old.clone(),
            cost: Amount(cost.0 - royalty.0),
            time: t.succ(),
        },
        StandardTx {
            buyer: new.clone(),
            seller: orig,
            cost: royalty,
            time: t.succ(),
        },
    ];
    Ok(chain.append(t.succ(), Payload::Transfer { token, legs }))
}

/// Dispatch a request against the chain at the current tick.
pub fn apply(chain: &Chain, request: &TxKind, t: Tick) -> Result<Chain, TxError> {
    match request {
        TxKind::Mint { orig, asset } => mint(chain, orig, asset, t),
        TxKind::Standard { buyer, seller, cost } => standard_tx(chain, buyer, seller, *cost, t),
        TxKind::Transfer { old, new, asset, cost } => {
            ownership_tx(chain, old, new, asset, *cost, t)
        }
        TxKind::TransferRoyalty { old, new, asset, cost, rate } => {
            ownership_tx_royalty(chain, old, new, asset, *cost, *rate, t)
        }
    }
}

/// Replay an accepted chain from genesis, re-checking every block's
/// precondition against the prefix it was appended to. Returns the height
/// of the first block that would no longer be accepted.
pub fn replay_check(chain: &Chain) -> Result<(), u64> {
    use crate::ledger::decode_token;

    for block in chain.blocks() {
        let prefix = chain.prefix(block.height);
        let ok = match &block.payload {
            Payload::Standard(tx) => affordable(&prefix, &tx.buyer, tx.cost),
            Payload::Mint { token } => match decode_token(token) {
                Ok((_, asset, _)) => prefix.owner_list(&asset).is_empty(),
                Err(_) => false,
            },
            Payload::Transfer { token, legs } => match decode_token(token) {
                Ok((new, asset, _)) => {
                    let owners = prefix.owner_list(&asset);
                    let total: u64 = legs.iter().map(|l| l.cost.0).sum();
                    let old_ok = match legs.len() {
                        1 => owners.last() == Some(&legs[0].seller),
                        // royalty legs may be stored in either order; one
                        // seller must be the current owner and one the
                        // originator
                        2 => {
                            !owners.is_empty()
                                && legs.iter().any(|l| owners.last() == Some(&l.seller))
                                && legs.iter().any(|l| owners.first() == Some(&l.seller))
                        }
                        _ => false,
                    };
                    old_ok
                        && legs.iter().all(|l| l.buyer == new)
                        && affordable(&prefix, &new, Amount(total))
                }
                Err(_) => false,
            },
        };
        if !ok {
            return Err(block.height);
        }
    }
    Ok(())
}
