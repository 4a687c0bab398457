//! Collusion maps: partitions of players into coalitions with a
//! representative each.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::types::PlayerId;

/// Maps every participant to its coalition's representative.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CollusionMap {
    rep: BTreeMap<PlayerId, PlayerId>,
}

impl CollusionMap {
    pub fn identity<'a>(players: impl IntoIterator<Item = &'a PlayerId>) -> Self {
        CollusionMap { rep: players.into_iter().map(|p| (p.clone(), p.clone())).collect() }
    }

    /// Builds a map from explicit coalitions; anyone in `players` not named
    /// stays alone. The representative is the miner of a block if there is
    /// one, otherwise its smallest id.
    pub fn from_blocks(players: &BTreeSet<PlayerId>, blocks: &[Vec<PlayerId>]) -> Result<Self> {
        let mut rep: BTreeMap<PlayerId, PlayerId> = players.iter().map(|p| (p.clone(), p.clone())).collect();
        for b in blocks {
            let miners: Vec<&PlayerId> = b.iter().filter(|p| p.is_miner()).collect();
            if miners.len() > 1 {
                return Err(Error::MinerMerged(block_name(b.iter())));
            }
            let r = match miners.first() {
                Some(m) => (*m).clone(),
                None => b.iter().min().cloned().ok_or_else(|| Error::InvalidParams("empty coalition".into()))?,
            };
            for p in b {
                if !players.contains(p) {
                    return Err(Error::UnknownPlayer(p.0.clone()));
                }
                rep.insert(p.clone(), r.clone());
            }
        }
        let out = CollusionMap { rep };
        out.validate()?;
        Ok(out)
    }

    /// Convenience form of [`CollusionMap::from_blocks`] with string ids.
    pub fn merging(players: &BTreeSet<PlayerId>, blocks: &[&[&str]]) -> Result<Self> {
        let bs: Vec<Vec<PlayerId>> = blocks.iter().map(|b| b.iter().map(|s| PlayerId::from(*s)).collect()).collect();
        Self::from_blocks(players, &bs)
    }

    /// Builds from a raw map and checks it.
    pub fn from_map(rep: BTreeMap<PlayerId, PlayerId>) -> Result<Self> {
        let out = CollusionMap { rep };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for (p, r) in &self.rep {
            match self.rep.get(r) {
                Some(rr) if rr == r => {}
                _ => return Err(Error::NotIdempotent(p.0.clone())),
            }
            if p.is_miner() && p != r {
                return Err(Error::MinerMerged(block_name([p, r])));
            }
        }
        Ok(())
    }

    /// Representative of `p`; players outside the map represent themselves.
    pub fn rep_of<'a>(&'a self, p: &'a PlayerId) -> &'a PlayerId {
        self.rep.get(p).unwrap_or(p)
    }

    pub fn players(&self) -> impl Iterator<Item = &PlayerId> {
        self.rep.keys()
    }

    pub fn reps(&self) -> BTreeSet<PlayerId> {
        self.rep.values().cloned().collect()
    }

    pub fn members(&self, r: &PlayerId) -> BTreeSet<PlayerId> {
        self.rep.iter().filter(|(_, v)| *v == r).map(|(k, _)| k.clone()).collect()
    }

    /// Coalitions with more than one member.
    pub fn blocks(&self) -> Vec<BTreeSet<PlayerId>> {
        self.reps().iter().map(|r| self.members(r)).filter(|b| b.len() > 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.rep.iter().all(|(k, v)| k == v)
    }

    pub fn covers(&self, p: &PlayerId) -> bool {
        self.rep.contains_key(p)
    }
}

fn block_name<'a>(ps: impl IntoIterator<Item = &'a PlayerId>) -> String {
    let names: Vec<&str> = ps.into_iter().map(|p| p.as_str()).collect();
    format!("{{{}}}", names.join(","))
}

impl fmt::Display for CollusionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.reps().iter().map(|r| block_name(self.members(r).iter())).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Largest population accepted by [`enumerate_collusions`].
pub const MAX_COLLUSION_POPULATION: usize = 10;

/// Every partition of `players ∪ miners` with at most one miner and at
/// most `max_block` members per block.
pub fn enumerate_collusions(
    players: &BTreeSet<PlayerId>,
    miners: &BTreeSet<PlayerId>,
    max_block: usize,
) -> Result<Vec<CollusionMap>> {
    let all: Vec<PlayerId> = players.union(miners).cloned().collect();
    if all.len() > MAX_COLLUSION_POPULATION {
        return Err(Error::TooManyPlayers(all.len()));
    }
    let is_miner: Vec<bool> = all.iter().map(|p| miners.contains(p)).collect();
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    partitions(0, &all, &is_miner, max_block.max(1), &mut blocks, &mut out);
    Ok(out)
}

fn partitions(
    i: usize,
    all: &[PlayerId],
    is_miner: &[bool],
    max_block: usize,
    blocks: &mut Vec<Vec<usize>>,
    out: &mut Vec<CollusionMap>,
) {
    if i == all.len() {
        let mut rep = BTreeMap::new();
        for b in blocks.iter() {
            let r = b.iter().copied().find(|&k| is_miner[k]).unwrap_or_else(|| *b.iter().min().expect("non-empty"));
            for &k in b {
                rep.insert(all[k].clone(), all[r].clone());
            }
        }
        out.push(CollusionMap { rep });
        return;
    }
    for bi in 0..blocks.len() {
        let b = &blocks[bi];
        if b.len() >= max_block || (is_miner[i] && b.iter().any(|&k| is_miner[k])) {
            continue;
        }
        blocks[bi].push(i);
        partitions(i + 1, all, is_miner, max_block, blocks, out);
        blocks[bi].pop();
    }
    blocks.push(vec![i]);
    partitions(i + 1, all, is_miner, max_block, blocks, out);
    blocks.pop();
}
