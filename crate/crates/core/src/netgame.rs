//! Network layer: which miner sees which transaction triple.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::extform::Emission;
use crate::scalar::Scalar;
use crate::types::{PlayerId, TransactionTriple, TxId};

/// Per-miner inputs to the blockchain game; `views[j]` belongs to miner `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkViews<S> {
    pub views: Vec<Vec<TransactionTriple<S>>>,
}

impl<S: Scalar> NetworkViews<S> {
    pub fn view(&self, j: usize) -> &[TransactionTriple<S>] {
        &self.views[j]
    }

    pub fn sees(&self, j: usize, tx: &TxId) -> bool {
        self.views.get(j).map_or(false, |v| v.iter().any(|t| &t.tx == tx))
    }

    /// Miners whose view contains `tx`.
    pub fn receivers(&self, tx: &TxId) -> BTreeSet<usize> {
        (0..self.views.len()).filter(|&j| self.sees(j, tx)).collect()
    }
}

/// Every miner `0..n_miners` receives every triple.
pub fn broadcast<S: Scalar>(triples: &[TransactionTriple<S>], n_miners: usize) -> NetworkViews<S> {
    NetworkViews { views: vec![triples.to_vec(); n_miners] }
}

/// `owner` sends `restricted` only to the miners in `share_set`. Triples
/// paid by a miner stay in that miner's view; everything else is public.
pub fn selective_share<S: Scalar>(
    emissions: &[Emission<S>],
    owner: &PlayerId,
    restricted: &TxId,
    share_set: &BTreeSet<usize>,
    n_miners: usize,
) -> Result<NetworkViews<S>> {
    let target = emissions.iter().find(|e| e.tx() == restricted).ok_or_else(|| Error::UnknownTx(restricted.0.clone()))?;
    if target.payer.as_ref() != Some(owner) {
        return Err(Error::NotPayer(owner.0.clone(), restricted.0.clone()));
    }
    if let Some(&j) = share_set.iter().find(|&&j| j >= n_miners) {
        return Err(Error::UnknownPlayer(crate::types::miner_player(j).0));
    }
    let mut views = vec![Vec::new(); n_miners];
    for e in emissions {
        let private = e.payer.as_ref().and_then(PlayerId::miner_index);
        for (j, view) in views.iter_mut().enumerate() {
            let visible = if e.tx() == restricted {
                share_set.contains(&j)
            } else {
                private.map_or(true, |k| k == j)
            };
            if visible {
                view.push(e.triple.clone());
            }
        }
    }
    Ok(NetworkViews { views })
}
