//! An HTLC inside a payment channel, closed cooperatively or on chain.
//!
//! Round `t` offers the sender a refund (accepted or rejected by the
//! receiver) and, once the receiver knows the secret, lets the receiver
//! share it, close on chain, or keep quiet. On-chain closes race the
//! receiver's claim `x_B` against the sender's timelocked `x_A` through
//! the miner game.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::comg::{censor_schedule, Depth};
use crate::compose::{
    best_deviation, check_ic, complete, rational_play, Witness, CollusionMap, ICVerdict, IcConfig, Protocol, RationalTrace, WitnessKind,
};
use crate::error::{Error, Result};
use crate::extform::{fee_grid, Action, Emission, GameTree, NodeId, Play, StrategyProfile, TreeBuilder};
use crate::scalar::Scalar;
use crate::types::{BalanceTable, Balances, ConflictSpec, HashrateDistribution, PlayerId, Round, SettlementRules};

/// When the receiver learns the secret.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reveal {
    At(Round),
    Never,
}

impl Reveal {
    pub fn known_at(self, t: Round) -> bool {
        matches!(self, Reveal::At(s) if s <= t)
    }
}

impl fmt::Display for Reveal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reveal::At(t) => write!(f, "{t}"),
            Reveal::Never => write!(f, "never"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HtlcParams<S> {
    pub t_s: Reveal,
    /// Last round played.
    pub t_e: Round,
    pub timelock: Round,
    pub v_a: S,
    pub v_b: S,
    pub v: S,
    /// Largest fee the sender offers on `x_A`.
    pub fee_cap_a: S,
    /// Largest fee the receiver offers on `x_B`.
    pub fee_cap_b: S,
    pub step_a: S,
    pub step_b: S,
    /// Sender's bonus for outcomes that keep the channel open.
    pub epsilon_open: S,
}

impl<S: Scalar> HtlcParams<S> {
    /// Secret known at round 0, horizon equal to the timelock, fee grids of
    /// 100 steps and an open-channel bonus of one sender grid step.
    pub fn new(timelock: Round, v_a: S, v_b: S, v: S, fee_cap_a: S, fee_cap_b: S) -> Self {
        let hundred = S::from_i64(100).expect("small");
        let step_a = fee_cap_a.clone() / hundred.clone();
        let step_b = fee_cap_b.clone() / hundred;
        let epsilon_open = if step_a.is_zero() { S::ratio(1, 100) } else { step_a.clone() };
        HtlcParams { t_s: Reveal::At(0), t_e: timelock, timelock, v_a, v_b, v, fee_cap_a, fee_cap_b, step_a, step_b, epsilon_open }
    }

    /// Splits each fee range into `n` steps; the bonus follows the sender step.
    pub fn with_grid(mut self, n: i64) -> Self {
        let n = S::from_i64(n.max(1)).expect("small");
        self.step_a = self.fee_cap_a.clone() / n.clone();
        self.step_b = self.fee_cap_b.clone() / n;
        if !self.step_a.is_zero() {
            self.epsilon_open = self.step_a.clone();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.timelock > self.t_e {
            return Err(Error::InvalidParams(format!("timelock {} beyond horizon {}", self.timelock, self.t_e)));
        }
        for (name, x) in [("v_a", &self.v_a), ("v_b", &self.v_b), ("v", &self.v), ("epsilon_open", &self.epsilon_open)] {
            if x.is_negative() {
                return Err(Error::InvalidParams(format!("{name} is negative")));
            }
        }
        for (name, cap) in [("fee_cap_a", &self.fee_cap_a), ("fee_cap_b", &self.fee_cap_b)] {
            if cap.is_negative() || cap > &self.v {
                return Err(Error::InvalidParams(format!("{name} must lie in [0, v]")));
            }
        }
        Ok(())
    }
}

/// Who plays the sender and receiver, and the prefix of the channel's
/// transaction ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HtlcRoles {
    pub sender: PlayerId,
    pub receiver: PlayerId,
    pub prefix: String,
}

impl Default for HtlcRoles {
    fn default() -> Self {
        HtlcRoles { sender: "A".into(), receiver: "B".into(), prefix: String::new() }
    }
}

impl HtlcRoles {
    pub fn new(sender: &str, receiver: &str, prefix: &str) -> Self {
        HtlcRoles { sender: sender.into(), receiver: receiver.into(), prefix: prefix.to_string() }
    }

    /// Channel transaction: `H` close, `A` sender refund on chain, `B`
    /// receiver claim, `R` off-chain refund, `P` off-chain payment.
    pub fn tx(&self, kind: char) -> String {
        format!("{}x_{kind}", self.prefix)
    }
}

struct Gen<'a, S> {
    p: &'a HtlcParams<S>,
    r: &'a HtlcRoles,
    b: TreeBuilder<S>,
    grid_a: Vec<S>,
    grid_b: Vec<S>,
}

impl<'a, S: Scalar> Gen<'a, S> {
    fn a(&self) -> &str {
        self.r.sender.as_str()
    }
    fn bb(&self) -> &str {
        self.r.receiver.as_str()
    }
    fn red(&self, t: Round) -> bool {
        t < self.p.timelock
    }
    /// Fresh leaves keep the tree a tree, so plays map to leaves one-to-one.
    fn empty(&mut self) -> NodeId {
        self.b.leaf(vec![])
    }
    fn leaf_with(&mut self, tx: char, t: Round) -> NodeId {
        let e = Emission::sentinel(&self.r.tx(tx), t);
        self.b.leaf(vec![e])
    }
    fn close_by(&self, who: &str, t: Round) -> Emission<S> {
        let mut e = Emission::sentinel(&self.r.tx('H'), t);
        e.payer = Some(who.into());
        e
    }

    /// Round `t`, or the empty continuation past the horizon.
    fn round(&mut self, t: Round) -> NodeId {
        if t > self.p.t_e {
            return self.empty();
        }
        let next = self.round(t + 1);
        if self.p.t_s.known_at(t) {
            self.informed(t, next)
        } else {
            self.uninformed(t, next)
        }
    }

    /// Sender fee choice on `x_A` posted at `t`, then `child`.
    fn sender_fee(&mut self, t: Round, child: NodeId) -> NodeId {
        let top = self.grid_a.len() - 1;
        let (a, tx, grid) = (self.a().to_string(), self.r.tx('A'), self.grid_a.clone());
        self.b.fee_choice(&a, Some(t), &tx, t, grid, child, top)
    }

    fn receiver_fee(&mut self, t: Round, child: NodeId) -> NodeId {
        let top = self.grid_b.len() - 1;
        let (bb, tx, grid) = (self.bb().to_string(), self.r.tx('B'), self.grid_b.clone());
        self.b.fee_choice(&bb, Some(t), &tx, t, grid, child, top)
    }

    /// Receiver's reaction once the sender closed: claim with a fee as
    /// soon as the secret is known and the game still runs.
    fn receiver_claim(&mut self, t: Round) -> NodeId {
        let when = match self.p.t_s {
            Reveal::At(s) => s.max(t),
            Reveal::Never => return self.empty(),
        };
        if when > self.p.t_e {
            return self.empty();
        }
        let end = self.empty();
        let fee = self.receiver_fee(when, end);
        let walk_away = self.empty();
        let bb = self.bb().to_string();
        self.b.decision(&bb, Some(when), vec![Action::new("claim", vec![], fee), Action::new("abandon", vec![], walk_away)], 0)
    }

    /// Sender refunds; receiver accepts or rejects.
    fn refund(&mut self, t: Round) -> NodeId {
        let accept = self.leaf_with('R', t);
        let claim = self.receiver_claim(t);
        let close = self.close_by(self.a(), t);
        let posted = self.sender_fee(t, claim);
        let bb = self.bb().to_string();
        let ipb = if self.red(t) { 1 } else { 0 };
        // the sender's close rides on the reject edge; its fee node follows
        self.b.decision(
            &bb,
            Some(t),
            vec![Action::new("accept", vec![], accept), Action::new("reject", vec![close], posted)],
            ipb,
        )
    }

    /// Sender's choice whether to refund this round.
    fn sender_round(&mut self, t: Round, next: NodeId) -> NodeId {
        let refund = self.refund(t);
        let a = self.a().to_string();
        let ipb = if self.red(t) { 0 } else { 1 };
        self.b.decision(&a, Some(t), vec![Action::new("no refund", vec![], next), Action::new("refund", vec![], refund)], ipb)
    }

    fn uninformed(&mut self, t: Round, next: NodeId) -> NodeId {
        self.sender_round(t, next)
    }

    /// Receiver closes on chain with `x_B`; sender may react with `x_A`.
    fn onchain(&mut self, t: Round) -> NodeId {
        let end = self.empty();
        let react = self.sender_fee(t, end);
        let quiet = self.empty();
        let a = self.a().to_string();
        let ipb = if self.red(t) { 1 } else { 0 };
        let respond =
            self.b.decision(&a, Some(t), vec![Action::new("react", vec![], react), Action::new("ignore", vec![], quiet)], ipb);
        self.receiver_fee(t, respond)
    }

    fn informed(&mut self, t: Round, next: NodeId) -> NodeId {
        let on = self.onchain(t);
        let close_b = self.close_by(self.bb(), t);
        let on_share = self.onchain(t);
        let update = self.leaf_with('P', t);
        let a = self.a().to_string();
        let ipb_update = if self.red(t) { 0 } else { 1 };
        let after_share = self.b.decision(
            &a,
            Some(t),
            vec![Action::new("update", vec![], update), Action::new("no update", vec![close_b.clone()], on_share)],
            ipb_update,
        );
        let quiet = self.sender_round(t, next);
        let bb = self.bb().to_string();
        let ipb = if self.red(t) { 1 } else { 2 };
        self.b.decision(
            &bb,
            Some(t),
            vec![
                Action::new("on-chain", vec![close_b], on),
                Action::new("share", vec![], after_share),
                Action::new("no share", vec![], quiet),
            ],
            ipb,
        )
    }
}

/// The game tree of one channel and its intended profile.
pub fn htlc_tree<S: Scalar>(p: &HtlcParams<S>, roles: &HtlcRoles) -> Result<(GameTree<S>, StrategyProfile)> {
    p.validate()?;
    let grid_a = fee_grid(&p.fee_cap_a, &p.step_a)?;
    let grid_b = fee_grid(&p.fee_cap_b, &p.step_b)?;
    let mut g = Gen { p, r: roles, b: TreeBuilder::new([roles.sender.as_str(), roles.receiver.as_str()]), grid_a, grid_b };
    let root = g.round(0);
    g.b.finish(root)
}

/// Base balances of the channel.
pub fn htlc_rules<S: Scalar>(p: &HtlcParams<S>, roles: &HtlcRoles) -> SettlementRules<S> {
    let (a, b) = (roles.sender.as_str(), roles.receiver.as_str());
    let (x_h, x_a, x_b, x_r, x_p) = (roles.tx('H'), roles.tx('A'), roles.tx('B'), roles.tx('R'), roles.tx('P'));
    let bal = |va: S, vb: S| Balances::from_pairs([(a, va), (b, vb)]);
    let (va, vb, v, e) = (p.v_a.clone(), p.v_b.clone(), p.v.clone(), p.epsilon_open.clone());
    let table = BalanceTable::new([x_h.as_str(), x_a.as_str(), x_b.as_str(), x_r.as_str(), x_p.as_str()])
        .entry(Vec::<&str>::new(), bal(va.clone(), vb.clone()))
        .entry([x_h.as_str()], bal(va.clone(), vb.clone()))
        .entry([x_h.as_str(), x_a.as_str()], bal(va.clone() + v.clone(), vb.clone()))
        .entry([x_h.as_str(), x_b.as_str()], bal(va.clone(), vb.clone() + v.clone()))
        .entry([x_r.as_str()], bal(va.clone() + v.clone() + e.clone(), vb.clone()))
        .entry([x_p.as_str()], bal(va + e, vb + v));
    SettlementRules::new(table)
}

/// `x_A` and `x_B` spend the same output; `x_A` waits for the timelock.
pub fn htlc_conflicts<S: Scalar>(p: &HtlcParams<S>, roles: &HtlcRoles) -> ConflictSpec {
    ConflictSpec::new().with_pair(&roles.tx('A'), &roles.tx('B')).with_validity(&roles.tx('A'), p.timelock)
}

/// The channel game for each reveal time in `reveals`.
pub fn htlc_game<S: Scalar>(p: &HtlcParams<S>, roles: &HtlcRoles, reveals: &[Reveal]) -> Result<Protocol<S, Reveal>> {
    let mut out = Protocol::new();
    for &r in reveals {
        let q = HtlcParams { t_s: r, ..p.clone() };
        let (t, ipb) = htlc_tree(&q, roles)?;
        out.insert(r, t, ipb);
    }
    Ok(out)
}

/// Every reveal time a composed channel can see: rounds `0..=t_e` and never.
pub fn all_reveals(t_e: Round) -> Vec<Reveal> {
    (0..=t_e).map(Reveal::At).chain([Reveal::Never]).collect()
}

/// Round at which the sender learns the secret along a play: when the
/// receiver shares it or posts `x_B`.
pub fn reveal_time<S: Scalar>(play: &Play<S>, roles: &HtlcRoles) -> Reveal {
    let shared = play
        .steps
        .iter()
        .find(|s| s.actor.as_ref() == Some(&roles.receiver) && s.label == "share")
        .and_then(|s| s.round);
    let posted = play.emissions.iter().find(|e| e.tx().as_str() == roles.tx('B')).map(|e| e.triple.post_time);
    match shared.into_iter().chain(posted).min() {
        Some(t) => Reveal::At(t),
        None => Reveal::Never,
    }
}

/// Round from which the largest miner censors the receiver's claim,
/// `T − ⌈ρ_m(cap_B, v)⌉`; `None` when it censors at every round.
pub fn deviation_onset<S: Scalar>(lambda: &HashrateDistribution<S>, cap_b: &S, v: &S, timelock: Round) -> Result<(Depth, Option<i64>)> {
    let d = if cap_b >= v {
        Depth::Finite(0)
    } else if cap_b.is_zero() {
        Depth::Infinite
    } else {
        censor_schedule(lambda, cap_b, v)?.max_depth()
    };
    let onset = d.finite().map(|r| timelock as i64 - r as i64);
    Ok((d, onset))
}

#[derive(Clone, Debug)]
pub struct HtlcReport<S> {
    pub rho_m: Depth,
    /// `T − ⌈ρ_m⌉`; `None` when the largest miner censors at every round.
    pub onset: Option<i64>,
    pub verdict: ICVerdict<S>,
    /// Holds with no indifference anywhere.
    pub ic: bool,
    /// Best deviation of the receiver acting alone.
    pub receiver_witness: Option<Witness<S>>,
    /// The receiver can switch to another outcome at no loss.
    pub indifference: bool,
    pub trace: RationalTrace<S>,
    pub reaches_share_update: bool,
    pub ipb_utilities: Balances<S>,
}

/// IC verdict, deviation onset and rational play for a single channel.
pub fn htlc_analysis<S: Scalar>(p: &HtlcParams<S>, lambda: &HashrateDistribution<S>, cfg: &IcConfig) -> Result<HtlcReport<S>> {
    let roles = HtlcRoles::default();
    let (rho_m, onset) = deviation_onset(lambda, &p.fee_cap_b, &p.v, p.timelock)?;
    let proto = htlc_game(p, &roles, &[p.t_s])?;
    let rules = htlc_rules(p, &roles);
    let conflicts = htlc_conflicts(p, &roles);
    let verdict = check_ic(&proto, lambda, &rules, &conflicts, cfg)?.remove(0).1;
    let inst = proto.get(&p.t_s).expect("just built");
    let game = complete(inst.tree.clone(), lambda.clone(), Arc::new(rules), Arc::new(conflicts))?;
    let receiver_witness = best_deviation(&game, &inst.ipb, &roles.receiver)?;
    let indifference = receiver_witness.as_ref().map_or(false, |w| w.kind == WitnessKind::Indifference);
    let trace = rational_play(&game, &inst.ipb)?;
    let labels: Vec<&str> = trace.steps.iter().map(|s| s.label.as_str()).collect();
    let reaches = labels.ends_with(&["share", "update"]);
    let ipb_utilities = game.utility(&inst.ipb)?;
    Ok(HtlcReport {
        rho_m,
        onset,
        ic: verdict.holds && verdict.strict,
        receiver_witness,
        indifference,
        verdict,
        trace,
        reaches_share_update: reaches,
        ipb_utilities,
    })
}

/// Identity collusion map over a channel's players and the miners.
pub fn identity_eta<S: Scalar>(players: &[&str], lambda: &HashrateDistribution<S>) -> CollusionMap {
    let mut all: Vec<PlayerId> = players.iter().map(|p| PlayerId::from(*p)).collect();
    all.extend((0..=lambda.m()).map(crate::types::miner_player));
    CollusionMap::identity(all.iter())
}

/// Balances keyed by name, for reports.
pub fn named<S: Scalar>(b: &Balances<S>) -> BTreeMap<String, String> {
    b.0.iter().map(|(k, v)| (k.0.clone(), v.to_repr())).collect()
}
