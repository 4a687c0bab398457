//! A limit order that miners can sandwich, and the user's choice of which
//! miners to send it to.
//!
//! Stages: every miner decides whether to prepare sandwich legs, the user
//! picks a share set, then each miner that received the order plays `H`
//! (include it plainly) or `D` (sandwich it). Proposers are drawn by
//! hashrate among the miners that received the order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::extform::Emission;
use crate::netgame::selective_share;
use crate::scalar::Scalar;
use crate::types::{miner_player, HashrateDistribution, PlayerId, TxId};

#[derive(Clone, Debug, PartialEq)]
pub struct MevParams<S> {
    /// Limit price of the order.
    pub l: S,
    /// Spread below the limit at which the order would fill.
    pub s: S,
    /// Fee the order pays.
    pub f: S,
    pub lambda: HashrateDistribution<S>,
    /// Input index of a miner that only ever plays `H`.
    pub trusted: Option<usize>,
}

impl<S: Scalar> MevParams<S> {
    pub fn validate(&self) -> Result<()> {
        if self.s.is_negative() {
            return Err(Error::InvalidParams("spread must be non-negative".into()));
        }
        if !self.f.is_positive() {
            return Err(Error::InvalidParams("fee must be positive".into()));
        }
        if self.l < self.s {
            return Err(Error::InvalidParams("limit below spread".into()));
        }
        if let Some(t) = self.trusted {
            if t > self.lambda.m() {
                return Err(Error::UnknownPlayer(format!("miner {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Move {
    /// Include the order as is.
    H,
    /// Front- and back-run it.
    D,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Move::H => "H",
            Move::D => "D",
        })
    }
}

/// Moves of the miners that received the order, by input index.
pub type MoveProfile = BTreeMap<usize, Move>;

#[derive(Clone, Debug, PartialEq)]
pub struct ShareOutcome<S> {
    /// Input indices of the miners receiving the order.
    pub share_set: BTreeSet<usize>,
    /// Every pure equilibrium of the block stage.
    pub equilibria: Vec<MoveProfile>,
    /// Equilibrium played; indifferent miners sandwich.
    pub selected: MoveProfile,
    pub user_utility: S,
    /// Probability the order is included plainly.
    pub p_honest: S,
    /// Probability the order is included at all.
    pub inclusion: S,
    /// Expected utility per miner input index.
    pub miner_utilities: BTreeMap<usize, S>,
    /// Receivers for which H pays exactly as much as D.
    pub indifferent: BTreeSet<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MevReport<S> {
    /// Miners (input indices) that prepare sandwich legs.
    pub constructs: BTreeSet<usize>,
    pub best: ShareOutcome<S>,
    /// Every share set the user considered, in enumeration order.
    pub candidates: Vec<ShareOutcome<S>>,
}

impl<S: Scalar> MevReport<S> {
    /// No equilibrium of the chosen block stage has an untrusted miner
    /// playing `H`.
    pub fn all_sandwich(&self, trusted: Option<usize>) -> bool {
        self.best.equilibria.iter().all(|e| e.iter().all(|(j, m)| Some(*j) == trusted || *m == Move::D))
    }
}

pub const USER: &str = "U";
pub const ORDER: &str = "x_U";

/// Largest number of miners the share-set enumeration accepts.
pub const MAX_MEV_MINERS: usize = 12;

struct Stage<'a, S> {
    rate: &'a BTreeMap<usize, S>,
    p: &'a MevParams<S>,
    can_sandwich: &'a BTreeSet<usize>,
}

impl<'a, S: Scalar> Stage<'a, S> {
    /// Proposer odds among the receivers, redrawn until one of them wins.
    fn odds(&self, receivers: &BTreeSet<usize>) -> BTreeMap<usize, S> {
        let total = receivers.iter().fold(S::zero(), |a, j| a + self.rate[j].clone());
        receivers
            .iter()
            .map(|&j| (j, if total.is_zero() { S::zero() } else { self.rate[&j].clone() / total.clone() }))
            .collect()
    }

    fn payoff(&self, odds: &BTreeMap<usize, S>, j: usize, m: Move) -> S {
        let bonus = if m == Move::D { self.p.s.clone() } else { S::zero() };
        odds[&j].clone() * (self.p.f.clone() + bonus)
    }

    fn options(&self, j: usize) -> Vec<Move> {
        if self.can_sandwich.contains(&j) {
            vec![Move::D, Move::H]
        } else {
            vec![Move::H]
        }
    }

    fn best_move(&self, odds: &BTreeMap<usize, S>, j: usize) -> Move {
        let mut best = Move::H;
        for m in self.options(j) {
            if m == Move::D && !self.payoff(odds, j, Move::H).definitely_gt(&self.payoff(odds, j, Move::D)) {
                best = Move::D;
            }
        }
        best
    }

    fn indifferent(&self, odds: &BTreeMap<usize, S>, j: usize) -> bool {
        self.options(j).len() > 1 && self.payoff(odds, j, Move::H).approx_eq(&self.payoff(odds, j, Move::D))
    }

    fn outcome(&self, share_set: BTreeSet<usize>, receivers: &BTreeSet<usize>) -> ShareOutcome<S> {
        let odds = self.odds(receivers);
        let movers: Vec<usize> = receivers.iter().copied().collect();
        let mut equilibria = Vec::new();
        let mut profile = vec![0usize; movers.len()];
        loop {
            let prof: MoveProfile = movers.iter().zip(&profile).map(|(&j, &k)| (j, self.options(j)[k])).collect();
            // a miner plays H only when it is strictly better than D
            let stable = movers.iter().all(|&j| self.best_move(&odds, j) == prof[&j]);
            if stable {
                equilibria.push(prof);
            }
            // odometer over the options
            let mut i = 0;
            while i < movers.len() {
                profile[i] += 1;
                if profile[i] < self.options(movers[i]).len() {
                    break;
                }
                profile[i] = 0;
                i += 1;
            }
            if i == movers.len() {
                break;
            }
        }
        // the tie rule leaves at most one equilibrium per share set
        let selected = equilibria.first().cloned().unwrap_or_default();
        let p_honest = selected
            .iter()
            .filter(|(_, m)| **m == Move::H)
            .fold(S::zero(), |a, (j, _)| a + odds[j].clone());
        let inclusion = odds.values().fold(S::zero(), |a, b| a + b.clone());
        let miner_utilities = self
            .rate
            .keys()
            .map(|&j| (j, selected.get(&j).map_or_else(S::zero, |&m| self.payoff(&odds, j, m))))
            .collect();
        let indifferent = movers.iter().copied().filter(|&j| self.indifferent(&odds, j)).collect();
        ShareOutcome { share_set, indifferent, user_utility: self.p.s.clone() * p_honest.clone(), p_honest, inclusion, equilibria, selected, miner_utilities }
    }
}

/// `a` is preferred by the user over `b`: utility, then plain-inclusion
/// odds, then inclusion odds, then fewer miners, then the smaller set.
fn user_prefers<S: Scalar>(a: &ShareOutcome<S>, b: &ShareOutcome<S>) -> bool {
    let keys = [(&a.user_utility, &b.user_utility), (&a.p_honest, &b.p_honest), (&a.inclusion, &b.inclusion)];
    for (x, y) in keys {
        if x.definitely_gt(y) {
            return true;
        }
        if y.definitely_gt(x) {
            return false;
        }
    }
    (a.share_set.len(), &a.share_set) < (b.share_set.len(), &b.share_set)
}

/// Solves the three stages by backward induction.
pub fn mev_game<S: Scalar>(p: &MevParams<S>) -> Result<MevReport<S>> {
    p.validate()?;
    let n = p.lambda.m() + 1;
    if n > MAX_MEV_MINERS {
        return Err(Error::TooManyPlayers(n));
    }
    let rate: BTreeMap<usize, S> = (0..n).map(|j| (p.lambda.original_index(j), p.lambda.get(j).clone())).collect();
    // sandwich legs never hurt their builder, so every untrusted miner
    // prepares them (ties resolved towards building)
    let constructs: BTreeSet<usize> = rate.keys().copied().filter(|&j| Some(j) != p.trusted).collect();
    let stage = Stage { rate: &rate, p, can_sandwich: &constructs };

    let mut emissions = vec![Emission::paid(ORDER, 0, p.f.clone(), USER)];
    for &j in &constructs {
        let who = miner_player(j);
        emissions.push(Emission::sentinel(&format!("x_F{j}"), 0).with_payer(who.as_str()));
        emissions.push(Emission::sentinel(&format!("x_B{j}"), 0).with_payer(who.as_str()));
    }
    let user = PlayerId::from(USER);
    let order = TxId::from(ORDER);
    let mut candidates = Vec::with_capacity(1 << n);
    for mask in 0u32..(1 << n) {
        let share_set: BTreeSet<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let views = selective_share(&emissions, &user, &order, &share_set, n)?;
        let receivers = views.receivers(&order);
        candidates.push(stage.outcome(share_set, &receivers));
    }
    let best = candidates
        .iter()
        .fold(None::<&ShareOutcome<S>>, |acc, c| match acc {
            Some(b) if !user_prefers(c, b) => Some(b),
            _ => Some(c),
        })
        .expect("at least the empty share set")
        .clone();
    Ok(MevReport { constructs, best, candidates })
}
